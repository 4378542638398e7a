//! CSV exchange format for paths and measures.
//!
//! The header lists `t{t}_d{k}` columns time-major (`t1_d1, t1_d2, ..., tT_dd`),
//! optionally followed by a `weight` column. One row per path. Bounds are not
//! stored and must be supplied by the reader.

use std::fs::File;
use std::io::{Read, Write};
use std::path::Path;

use super::{Bounds, DiscreteMeasure, PathBatch, Shape};
use crate::error::{Error, Result};

fn header(shape: Shape) -> Vec<String> {
    let mut h = Vec::with_capacity(shape.len());
    for t in 1..=shape.steps {
        for k in 1..=shape.dims {
            h.push(format!("t{t}_d{k}"));
        }
    }
    h
}

fn parse_header(cols: &csv::StringRecord) -> Result<(Shape, bool)> {
    let mut names: Vec<&str> = cols.iter().collect();
    let weighted = names.last() == Some(&"weight");
    if weighted {
        names.pop();
    }
    let mut max_t = 0;
    let mut max_k = 0;
    for name in &names {
        let (t, k) = name
            .strip_prefix('t')
            .and_then(|s| s.split_once("_d"))
            .and_then(|(t, k)| Some((t.parse::<usize>().ok()?, k.parse::<usize>().ok()?)))
            .ok_or_else(|| Error::Dimension(format!("unrecognized column '{name}'")))?;
        max_t = max_t.max(t);
        max_k = max_k.max(k);
    }
    let shape = Shape::new(max_t, max_k)?;
    let expected = header(shape);
    if names.len() != expected.len() || names.iter().zip(&expected).any(|(a, b)| a != b) {
        return Err(Error::Dimension(format!(
            "columns must be {} in time-major order",
            expected.join(",")
        )));
    }
    Ok((shape, weighted))
}

/// Read paths and optional weights. Missing weights default to uniform.
pub fn read_measure<R: Read>(reader: R, bounds: Bounds) -> Result<DiscreteMeasure> {
    let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(reader);
    let (shape, weighted) = parse_header(rdr.headers()?)?;
    let mut data = Vec::new();
    let mut weights = Vec::new();
    for (row, rec) in rdr.records().enumerate() {
        let rec = rec?;
        let mut vals = rec.iter().map(|s| {
            s.parse::<f64>()
                .map_err(|e| Error::Parameter(format!("row {}: '{s}': {e}", row + 1)))
        });
        for _ in 0..shape.len() {
            data.push(vals.next().expect("record length checked by csv")?);
        }
        if weighted {
            weights.push(vals.next().expect("record length checked by csv")?);
        }
    }
    let support = PathBatch::new(shape, bounds, data)?;
    if weighted {
        DiscreteMeasure::new(support, weights)
    } else {
        Ok(DiscreteMeasure::uniform(support))
    }
}

pub fn read_measure_file(path: &Path, bounds: Bounds) -> Result<DiscreteMeasure> {
    let f =
        File::open(path).map_err(|e| Error::Io(std::io::Error::new(e.kind(), format!("{}: {e}", path.display()))))?;
    read_measure(f, bounds)
}

/// Read paths only; a `weight` column, if present, is ignored.
pub fn read_batch<R: Read>(reader: R, bounds: Bounds) -> Result<PathBatch> {
    let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(reader);
    let (shape, _) = parse_header(rdr.headers()?)?;
    let mut data = Vec::new();
    for rec in rdr.records() {
        let rec = rec?;
        for s in rec.iter().take(shape.len()) {
            data.push(s.parse::<f64>().map_err(|e| Error::Parameter(format!("'{s}': {e}")))?);
        }
    }
    PathBatch::new(shape, bounds, data)
}

pub fn write_batch<W: Write>(writer: W, batch: &PathBatch) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    w.write_record(header(batch.shape()))?;
    for p in batch.paths() {
        w.write_record(p.iter().map(|v| format!("{v:?}")))?;
    }
    w.flush()?;
    Ok(())
}

pub fn write_measure<W: Write>(writer: W, m: &DiscreteMeasure) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    let mut h = header(m.shape());
    h.push("weight".into());
    w.write_record(&h)?;
    for (p, wt) in m.atoms() {
        w.write_record(p.iter().chain([&wt]).map(|v| format!("{v:?}")))?;
    }
    w.flush()?;
    Ok(())
}

pub fn write_measure_file(path: &Path, m: &DiscreteMeasure) -> Result<()> {
    write_measure(File::create(path)?, m)
}

pub fn write_batch_file(path: &Path, batch: &PathBatch) -> Result<()> {
    write_batch(File::create(path)?, batch)
}
