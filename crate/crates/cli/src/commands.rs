use std::fs;
use std::path::Path;

use clap::ValueEnum;
use cotdre_core::exact_transport::{
    cot_distance_lp, oracle::brute_force_primal, ot_distance_lp, primal_cot_lp, primal_ot_lp, verify_causality,
    PrimalSolution, TransportSolution,
};
use cotdre_core::measures::io::{write_batch_file, write_measure, write_measure_file};
use cotdre_core::nnet::Activation;
use cotdre_core::quantize::{adapted_measure, conditional_kernel, KernelMode, QuantizerConfig};
use cotdre_core::solvers::{
    lambda_grid_dual, linspace_lambda, pretrain_generator, rademacher_estimate, rademacher_exhaustive,
    solve_dual_cot_gda, solve_scot, Hypothesis, HypothesisSet,
};
use cotdre_core::{Coupling, DenseNet, DiscreteMeasure, GeneratorSpec, SolverReport};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde_json::{json, Value};

use crate::config::{builtin_problem, HypothesisOptions, Inputs, ProblemSpec, RunConfig};
use crate::error::CliError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Command {
    /// Write a built-in instance as CSV measures and a problem file
    Gen,
    /// Adapted (quantized) empirical measure of mu
    Quantize,
    /// Transport distance between mu and nu
    Ot,
    /// Causal transport distance between mu and nu
    Cot,
    /// Worst case over the transport ball on a finite grid
    PrimalOt,
    /// Worst case over the causal transport ball on a finite grid
    PrimalCot,
    /// Dual of the causal problem by gradient descent ascent
    DualCot,
    /// Structural dual with a scenario generator
    Scot,
    /// Empirical Rademacher complexity of a hypothesis set
    Rademacher,
}

impl Command {
    pub fn name(self) -> &'static str {
        match self {
            Command::Gen => "gen",
            Command::Quantize => "quantize",
            Command::Ot => "ot",
            Command::Cot => "cot",
            Command::PrimalOt => "primal-ot",
            Command::PrimalCot => "primal-cot",
            Command::DualCot => "dual-cot",
            Command::Scot => "scot",
            Command::Rademacher => "rademacher",
        }
    }

    /// Commands whose output depends on the seed and can be repeated.
    pub fn repeatable(self) -> bool {
        !matches!(self, Command::Gen | Command::Quantize)
    }
}

const PLAN_THRESHOLD: f64 = 1e-14;

pub fn run(cmd: Command, inputs: &Inputs, out: Option<&Path>) -> Result<Value, CliError> {
    match cmd {
        Command::Gen => gen(inputs, out),
        Command::Quantize => quantize(inputs, out),
        Command::Ot => distance(inputs, false),
        Command::Cot => distance(inputs, true),
        Command::PrimalOt => primal(inputs, false),
        Command::PrimalCot => primal(inputs, true),
        Command::DualCot => dual_cot(inputs),
        Command::Scot => scot(inputs),
        Command::Rademacher => rademacher(inputs),
    }
}

fn measure_json(m: &DiscreteMeasure) -> Value {
    let paths: Vec<&[f64]> = m.support().paths().collect();
    json!({ "paths": paths, "weights": m.weights() })
}

fn plan_json(plan: &Coupling) -> Value {
    let (row_err, col_err) = plan.marginal_errors();
    json!({
        "rows": plan.rows(),
        "cols": plan.cols(),
        "triplets": plan.triplets(PLAN_THRESHOLD),
        "marginal_error": { "row": row_err, "col": col_err },
    })
}

fn with_reference(config: &RunConfig, mut result: Value, computed: f64) -> Value {
    if let Some(reference) = config.reference_value {
        let discrepancy = computed - reference;
        result["reference_check"] = json!({
            "reference": reference,
            "computed": computed,
            "discrepancy": discrepancy,
            "agrees": discrepancy.abs() <= 1e-6,
        });
    }
    result
}

fn gen(inputs: &Inputs, out: Option<&Path>) -> Result<Value, CliError> {
    let builtin = inputs
        .config
        .builtin
        .as_ref()
        .ok_or_else(|| CliError::config("gen needs a builtin instance"))?;
    let dir = out.ok_or_else(|| CliError::config("gen needs --out <dir>"))?;
    fs::create_dir_all(dir).map_err(|e| CliError::new("io", format!("{}: {e}", dir.display())))?;
    let p = builtin_problem(builtin, inputs.seed)?;
    let mut files = vec!["mu.csv", "problem.json", "config.json"];
    let mu_path = dir.join("mu.csv");
    write_measure_file(&mu_path, &p.mu).map_err(|e| CliError::with_path(e, &mu_path))?;
    let mut bundle = json!({ "problem": "problem.json", "mu": "mu.csv", "seed": inputs.seed });
    if let Some(grid) = &p.grid {
        let grid_path = dir.join("grid.csv");
        write_batch_file(&grid_path, grid).map_err(|e| CliError::with_path(e, &grid_path))?;
        bundle["grid"] = json!("grid.csv");
        files.insert(1, "grid.csv");
    }
    let shape = p.mu.shape();
    let spec = ProblemSpec {
        steps: shape.steps,
        dims: shape.dims,
        bounds: p.mu.bounds(),
        objective: p.objective,
        cost: p.cost,
        eps: p.eps,
    };
    write_json(
        &dir.join("problem.json"),
        &serde_json::to_value(&spec).expect("problem serializes"),
    )?;
    write_json(&dir.join("config.json"), &bundle)?;
    Ok(json!({
        "files": files,
        "atoms": p.mu.len(),
        "steps": shape.steps,
        "dims": shape.dims,
        "grid_atoms": p.grid.as_ref().map(|g| g.len()),
    }))
}

fn write_json(path: &Path, v: &Value) -> Result<(), CliError> {
    let mut text = serde_json::to_string_pretty(v).expect("json value serializes");
    text.push('\n');
    fs::write(path, text).map_err(|e| CliError::new("io", format!("{}: {e}", path.display())))
}

fn quantize(inputs: &Inputs, out: Option<&Path>) -> Result<Value, CliError> {
    let mu = inputs.mu()?;
    let opts = inputs.config.quantize.clone().unwrap_or_default();
    let (shape, bounds) = (mu.shape(), mu.bounds());
    let cfg = match opts.cells_per_axis {
        Some(c) => QuantizerConfig::with_cells(bounds, shape, c)?,
        None => QuantizerConfig::new(bounds, shape, mu.len())?,
    };
    let q = adapted_measure(&cfg, mu)?;
    let displacement = mu
        .support()
        .paths()
        .map(|p| {
            cfg.cells(p).map(|cells| {
                p.iter()
                    .zip(cells)
                    .map(|(v, c)| (v - cfg.center(c)).abs())
                    .fold(0.0, f64::max)
            })
        })
        .try_fold(0.0, |acc: f64, d| d.map(|d| acc.max(d)))?;
    let mut result = json!({
        "value": displacement,
        "cells_per_axis": cfg.cells_per_axis,
        "edge": cfg.edge(),
        "input_atoms": mu.len(),
        "atoms": q.len(),
        "displacement_bound": cfg.edge() / 2.0,
    });
    match out {
        Some(path) => {
            write_measure_file(path, &q).map_err(|e| CliError::with_path(e, path))?;
            result["csv"] = json!(path.display().to_string());
        }
        None => {
            let mut buf = Vec::new();
            write_measure(&mut buf, &q)?;
            result["csv"] = json!(String::from_utf8(buf).expect("csv output is utf-8"));
        }
    }
    if let Some(t) = opts.kernel_time {
        let mode = opts.kernel_mode.unwrap_or(KernelMode::Quantized);
        let kernel = conditional_kernel(&cfg, mu.support(), t, mode)?;
        let cells: Vec<Value> = kernel
            .iter()
            .map(|(cell, p, m)| json!({ "cell": cell, "probability": p, "suffix": measure_json(m) }))
            .collect();
        result["kernel"] = json!({ "time": t, "mode": mode, "cells": cells });
    }
    Ok(result)
}

fn distance(inputs: &Inputs, causal: bool) -> Result<Value, CliError> {
    let (mu, nu, cost) = (inputs.mu()?, inputs.nu()?, inputs.cost()?);
    let TransportSolution { value, plan } = if causal {
        cot_distance_lp(mu, nu, cost)?
    } else {
        ot_distance_lp(mu, nu, cost)?
    };
    let result = json!({
        "value": value,
        "plan": plan_json(&plan),
        "diagnostics": { "causal_plan": verify_causality(&plan, mu, nu.support(), 1e-9) },
    });
    Ok(with_reference(&inputs.config, result, value))
}

fn primal(inputs: &Inputs, causal: bool) -> Result<Value, CliError> {
    let (mu, grid, f, cost, eps) = (
        inputs.mu()?,
        inputs.grid()?,
        inputs.objective()?,
        inputs.cost()?,
        inputs.eps()?,
    );
    let PrimalSolution {
        value,
        worst,
        plan,
        transport_cost,
    } = if causal {
        primal_cot_lp(mu, grid, f, cost, eps)?
    } else {
        primal_ot_lp(mu, grid, f, cost, eps)?
    };
    let mut result = json!({
        "value": value,
        "transport_cost": transport_cost,
        "eps": eps,
        "worst_case": measure_json(&worst),
        "plan": plan_json(&plan),
        "diagnostics": { "causal_plan": verify_causality(&plan, mu, worst.support(), 1e-9) },
    });
    if let Some(resolution) = inputs.config.brute_force_resolution {
        let bf = brute_force_primal(mu, grid, f, cost, eps, resolution, causal)?;
        result["brute_force"] = json!({
            "value": bf.value,
            "weights": bf.weights,
            "resolution": resolution,
            "candidates": bf.candidates,
            "difference": value - bf.value,
        });
    }
    Ok(with_reference(&inputs.config, result, value))
}

fn solver_json(r: &SolverReport) -> Value {
    json!({
        "value": r.final_dual,
        "final_lambda": r.final_lambda,
        "final_cost": r.final_cost,
        "last_dual": r.last_dual,
        "min_dual": r.dual.iter().copied().fold(f64::INFINITY, f64::min),
        "converged": r.converged,
        "reason": r.reason,
        "iterations": r.dual.len(),
        "trajectory": {
            "dual": r.dual,
            "lambda": r.lambda,
            "transport_cost": r.transport_cost,
            "penalty": r.penalty,
        },
    })
}

fn dual_cot(inputs: &Inputs) -> Result<Value, CliError> {
    let (mu, f, cost, eps) = (inputs.mu()?, inputs.objective()?, inputs.cost()?, inputs.eps()?);
    let mut cfg = inputs.solver.clone();
    if cfg.y_grid.is_none() {
        cfg.y_grid = inputs.grid.clone();
    }
    let report = solve_dual_cot_gda(mu, f, cost, eps, &cfg)?;
    let mut result = solver_json(&report);
    result["eps"] = json!(eps);
    result["layers"] = json!(cfg.layers);
    result["worst_case"] = measure_json(&report.worst_case);
    if let Some(grid) = &cfg.y_grid {
        let opts = inputs.config.lambda_grid.unwrap_or_default();
        let (value, lambda) = lambda_grid_dual(mu, grid, f, cost, eps, &linspace_lambda(opts.max, opts.count))?;
        result["lambda_grid_dual"] = json!({
            "value": value,
            "lambda": lambda,
            "difference": report.final_dual - value,
        });
    }
    Ok(with_reference(&inputs.config, result, report.final_dual))
}

fn scot(inputs: &Inputs) -> Result<Value, CliError> {
    let (mu, f, cost, eps) = (inputs.mu()?, inputs.objective()?, inputs.cost()?, inputs.eps()?);
    let opts = inputs.config.generator.clone().unwrap_or_default();
    let mut rng = ChaCha8Rng::seed_from_u64(inputs.seed);
    let mut generator = GeneratorSpec::new(mu.shape(), opts.hidden, opts.sigma2, &mut rng)?;
    let mut pretrain = Value::Null;
    if let Some(p) = &opts.pretrain {
        let trained = pretrain_generator(&generator, mu.support(), p)?;
        pretrain = json!({ "initial_mse": trained.initial_mse, "final_mse": trained.final_mse });
        generator = trained.generator;
    }
    let outcome = solve_scot(mu, &generator, f, cost, eps, &inputs.solver)?;
    let mut result = solver_json(&outcome.report);
    result["eps"] = json!(eps);
    result["pretrain"] = pretrain;
    result["cost_gap"] = json!((outcome.report.final_cost - eps).abs());
    result["worst_case"] = measure_json(&outcome.report.worst_case);
    Ok(with_reference(&inputs.config, result, outcome.report.final_dual))
}

fn rademacher(inputs: &Inputs) -> Result<Value, CliError> {
    let sample = inputs.mu()?.support();
    let opts = inputs
        .config
        .rademacher
        .as_ref()
        .ok_or_else(|| CliError::config("rademacher needs a `rademacher` section"))?;
    let mut rng = ChaCha8Rng::seed_from_u64(inputs.seed);
    let finite: Vec<Box<Hypothesis>> = match &opts.hypotheses {
        HypothesisOptions::Constants { values } => values
            .iter()
            .map(|&c| Box::new(move |_: &[f64]| c) as Box<Hypothesis>)
            .collect(),
        HypothesisOptions::Coordinates {} => (0..sample.shape().len())
            .map(|k| Box::new(move |x: &[f64]| x[k]) as Box<Hypothesis>)
            .collect(),
        HypothesisOptions::Network { .. } => Vec::new(),
    };
    let refs: Vec<&Hypothesis> = finite.iter().map(|b| b.as_ref()).collect();
    if let HypothesisOptions::Network {
        hidden,
        steps,
        learning_rate,
        clamp,
    } = &opts.hypotheses
    {
        if opts.exhaustive {
            return Err(CliError::config("exhaustive enumeration needs a finite hypothesis set"));
        }
        let net = DenseNet::new(
            &[sample.shape().len(), *hidden, 1],
            Activation::Tanh,
            Activation::Identity,
            &mut rng,
        )?
        .with_clamp(-clamp, *clamp);
        let set = HypothesisSet::Parametric {
            net: &net,
            steps: *steps,
            learning_rate: *learning_rate,
        };
        let est = rademacher_estimate(&set, sample, opts.draws, &mut rng)?;
        return Ok(json!({ "value": est.value, "draws": est.draws, "lower_bound": est.lower_bound }));
    }
    if refs.is_empty() {
        return Err(CliError::config("hypothesis set is empty"));
    }
    if opts.exhaustive {
        let value = rademacher_exhaustive(&refs, sample)?;
        return Ok(with_reference(
            &inputs.config,
            json!({ "value": value, "exhaustive": true, "hypotheses": refs.len() }),
            value,
        ));
    }
    let est = rademacher_estimate(&HypothesisSet::Finite(&refs), sample, opts.draws, &mut rng)?;
    Ok(with_reference(
        &inputs.config,
        json!({ "value": est.value, "draws": est.draws, "lower_bound": est.lower_bound, "hypotheses": refs.len() }),
        est.value,
    ))
}
