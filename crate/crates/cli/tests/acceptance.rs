//! Acceptance suite. Prints one PASS/FAIL line per criterion and exits
//! nonzero if any fails.

use std::collections::BTreeMap;
use std::fs;
use std::path::Path;
use std::process::{Command, ExitCode};
use std::time::{Duration, Instant};

use cotdre_core::exact_transport::{cot_distance_lp, ot_distance_lp, primal_cot_lp, primal_ot_lp};
use cotdre_core::nnet::{martingale_penalty, Activation};
use cotdre_core::quantize::{conditional_kernel, quantize_point, rate, suffix_marginal, KernelMode, QuantizerConfig};
use cotdre_core::sinkhorn::{sinkhorn_plan, SinkhornConfig};
use cotdre_core::solvers::{
    pretrain_generator, rademacher_estimate, rademacher_exhaustive, solve_dual_cot_gda, solve_scot_gda, Hypothesis,
    HypothesisSet, PretrainConfig,
};
use cotdre_core::synthetic::{ar1_vol, example1, example2, random_instance, separable_random, Ar1VolParams};
use cotdre_core::{
    cost_matrix, Bounds, CostSpec, DenseNet, DiscreteMeasure, GdaConfig, GeneratorSpec, ObjectiveSpec, PathBatch,
    Shape, TestFunctionFamily,
};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde_json::{json, Value};

const BIN: &str = env!("CARGO_BIN_EXE_cotdre");

type Outcome = Result<String, String>;

fn ensure(cond: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg())
    }
}

fn e2s<E: std::fmt::Display>(e: E) -> String {
    e.to_string()
}

fn cli(args: &[&str]) -> Result<Value, String> {
    let out = Command::new(BIN).args(args).output().map_err(e2s)?;
    if !out.status.success() {
        return Err(format!("{args:?} failed: {}", String::from_utf8_lossy(&out.stdout)));
    }
    serde_json::from_slice(&out.stdout).map_err(e2s)
}

fn write_config(dir: &Path, name: &str, v: &Value) -> Result<String, String> {
    let p = dir.join(name);
    fs::write(&p, v.to_string()).map_err(e2s)?;
    Ok(p.to_string_lossy().into_owned())
}

fn scratch() -> Result<tempfile::TempDir, String> {
    tempfile::TempDir::new().map_err(e2s)
}

fn c1_example1_cot_primal() -> Outcome {
    let dir = scratch()?;
    let c = write_config(dir.path(), "c.json", &json!({"builtin": {"kind": "example1"}}))?;
    let r = cli(&["primal-cot", "--config", &c])?;
    let v = r["result"]["value"].as_f64().ok_or("missing value")?;
    ensure((v + 1.0).abs() <= 1e-9, || format!("value {v}"))?;
    Ok(format!("value {v}"))
}

fn c2_example1_ot_primal() -> Outcome {
    let dir = scratch()?;
    let c = write_config(
        dir.path(),
        "c.json",
        &json!({"builtin": {"kind": "example1"}, "reference_value": -0.6, "brute_force_resolution": 60}),
    )?;
    let r = cli(&["primal-ot", "--config", &c])?;
    let res = &r["result"];
    let v = res["value"].as_f64().ok_or("missing value")?;
    let bf = res["brute_force"]["value"].as_f64().ok_or("missing brute force")?;
    ensure((v - bf).abs() <= 1e-6, || format!("lp {v} vs brute force {bf}"))?;
    ensure((bf + 0.2).abs() <= 1e-6, || format!("brute force {bf}"))?;
    ensure(res["reference_check"]["agrees"] == false, || {
        "reference -0.6 not flagged".into()
    })?;
    Ok(format!(
        "value {v}, brute force {bf}, discrepancy vs -0.6: {}",
        res["reference_check"]["discrepancy"]
    ))
}

fn random_measure(rng: &mut ChaCha8Rng, atoms: usize, shape: Shape) -> Result<DiscreteMeasure, String> {
    let bounds = Bounds::new(-1.0, 1.0).map_err(e2s)?;
    let levels = [-1.0, 0.0, 1.0];
    let data = (0..atoms * shape.len())
        .map(|_| levels[rng.random_range(0..3)])
        .collect();
    let masses = (0..atoms).map(|_| rng.random_range(0.1..1.0)).collect();
    DiscreteMeasure::from_masses(PathBatch::new(shape, bounds, data).map_err(e2s)?, masses).map_err(e2s)
}

fn c3_ordering_chain() -> Outcome {
    let mut violations = Vec::new();
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    for i in 0..50u64 {
        let atoms = 1 + (i as usize % 5);
        let steps = 2 + (i as usize % 2);
        let p = random_instance(atoms, steps, i % 3 == 0, 1000 + i).map_err(e2s)?;
        let nu_atoms = rng.random_range(1..5);
        let nu = random_measure(&mut rng, nu_atoms, p.mu.shape())?;
        let w = ot_distance_lp(&p.mu, &nu, &p.cost).map_err(e2s)?.value;
        let wc = cot_distance_lp(&p.mu, &nu, &p.cost).map_err(e2s)?.value;
        if wc < w - 1e-7 {
            violations.push(format!("instance {i}: W_c {wc} < W {w}"));
        }
        let mut last = (f64::NEG_INFINITY, f64::NEG_INFINITY);
        for scale in [0.0, 0.5, 1.0, 1.5] {
            let eps = p.eps * scale;
            let ot = primal_ot_lp(&p.mu, &p.grid, &p.objective, &p.cost, eps)
                .map_err(e2s)?
                .value;
            let cot = primal_cot_lp(&p.mu, &p.grid, &p.objective, &p.cost, eps)
                .map_err(e2s)?
                .value;
            if cot > ot + 1e-7 {
                violations.push(format!("instance {i} eps {eps}: cot {cot} > ot {ot}"));
            }
            if ot < last.0 - 1e-7 || cot < last.1 - 1e-7 {
                violations.push(format!("instance {i} eps {eps}: not monotone"));
            }
            last = (ot, cot);
        }
    }
    ensure(violations.is_empty(), || violations.join("; "))?;
    Ok("50 instances, 0 violations".into())
}

fn c4_separable_equivalence() -> Outcome {
    let mut worst: f64 = 0.0;
    for i in 0..25u64 {
        let p = separable_random(1 + (i as usize % 5), 2 + (i as usize % 2), 500 + i).map_err(e2s)?;
        let ot = primal_ot_lp(&p.mu, &p.grid, &p.objective, &p.cost, p.eps)
            .map_err(e2s)?
            .value;
        let cot = primal_cot_lp(&p.mu, &p.grid, &p.objective, &p.cost, p.eps)
            .map_err(e2s)?
            .value;
        worst = worst.max((ot - cot).abs());
    }
    ensure(worst <= 1e-7, || format!("max gap {worst:e}"))?;
    Ok(format!("25 instances, max |ot - cot| {worst:.1e}"))
}

fn c5_sinkhorn_consistency() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let shape = Shape::new(2, 1).map_err(e2s)?;
    let bounds = Bounds::new(-1.0, 1.0).map_err(e2s)?;
    let cfg = SinkhornConfig::default();
    let (mut worst_rel, mut worst_marg): (f64, f64) = (0.0, 0.0);
    for _ in 0..10 {
        let draw = |rng: &mut ChaCha8Rng| -> Result<DiscreteMeasure, String> {
            let data = (0..4 * shape.len()).map(|_| rng.random_range(-1.0..1.0)).collect();
            let masses = (0..4).map(|_| rng.random_range(0.1..1.0)).collect();
            DiscreteMeasure::from_masses(PathBatch::new(shape, bounds, data).map_err(e2s)?, masses).map_err(e2s)
        };
        let (mu, nu) = (draw(&mut rng)?, draw(&mut rng)?);
        let cost = CostSpec::ScaledQuadratic { scale: 1.0 };
        let c = cost_matrix(&cost, mu.support(), nu.support()).map_err(e2s)?;
        let lp = ot_distance_lp(&mu, &nu, &cost).map_err(e2s)?.value;
        let s = sinkhorn_plan(&mu, &nu, &c, 1e-3, &cfg).map_err(e2s)?;
        let value = s.plan.integrate(&c);
        let (re, ce) = s.plan.marginal_errors();
        worst_rel = worst_rel.max((value - lp).abs() / lp.abs());
        worst_marg = worst_marg.max(re.max(ce));
    }
    ensure(worst_rel <= 0.02 && worst_marg <= 1e-8, || {
        format!("relative gap {worst_rel:.2e}, marginal error {worst_marg:.2e}")
    })?;
    Ok(format!(
        "max relative gap {worst_rel:.2e}, max marginal error {worst_marg:.1e}"
    ))
}

fn c6_weak_duality() -> Outcome {
    let mut checked = 0;
    for i in 0..20u64 {
        let p = random_instance(1 + (i as usize % 4), 2, false, 300 + i).map_err(e2s)?;
        let primal = primal_cot_lp(&p.mu, &p.grid, &p.objective, &p.cost, p.eps)
            .map_err(e2s)?
            .value;
        let mut cfg = GdaConfig {
            iterations: 300,
            seed: i,
            ..GdaConfig::volatility()
        };
        cfg.y_grid = Some(p.grid.clone());
        let r = solve_dual_cot_gda(&p.mu, &p.objective, &p.cost, p.eps, &cfg).map_err(e2s)?;
        if let Some((k, d)) = r.dual.iter().enumerate().find(|(_, d)| **d < primal - 1e-6) {
            return Err(format!("instance {i} iterate {k}: dual {d} < primal {primal}"));
        }
        checked += r.dual.len();
    }

    let p = example1();
    let mut cfg = GdaConfig {
        iterations: 2000,
        ..GdaConfig::volatility()
    };
    cfg.y_grid = Some(p.grid.clone());
    let cot = solve_dual_cot_gda(&p.mu, &p.objective, &p.cost, p.eps, &cfg).map_err(e2s)?;
    let ot = solve_dual_cot_gda(&p.mu, &p.objective, &p.cost, p.eps, &cfg.clone().ot_mode()).map_err(e2s)?;
    if let Some(d) = cot.dual.iter().find(|d| **d < -1.0 - 1e-6) {
        return Err(format!("example iterate below the primal: {d}"));
    }
    checked += cot.dual.len();
    let (d2, d0) = (cot.final_dual, ot.final_dual);
    ensure((-1.0..=-0.15).contains(&d2), || format!("L = 2 final dual {d2}"))?;
    ensure(d2 <= d0 - 0.1, || format!("L = 2 final dual {d2} vs L = 0 {d0}"))?;
    Ok(format!(
        "{checked} iterates checked; example final dual {d2:.4} (L = 2) vs {d0:.4} (L = 0)"
    ))
}

fn c7_duality_gap() -> Outcome {
    let mut duals = Vec::new();
    for k in [10.0, 100.0, 1000.0] {
        let p = example2(k).map_err(e2s)?;
        let primal = primal_cot_lp(&p.mu, &p.grid, &p.objective, &p.cost, p.eps)
            .map_err(e2s)?
            .value;
        ensure(primal.abs() <= 1e-9, || format!("K = {k}: primal {primal}"))?;
        let mut cfg = GdaConfig {
            iterations: 2000,
            ..GdaConfig::volatility()
        };
        cfg.y_grid = Some(p.grid.clone());
        let r = solve_dual_cot_gda(&p.mu, &p.objective, &p.cost, p.eps, &cfg).map_err(e2s)?;
        duals.push(r.final_dual);
    }
    ensure(duals.windows(2).all(|w| w[1] > w[0]), || format!("duals {duals:?}"))?;
    Ok(format!(
        "primal 0 for all K; duals {:.3} < {:.3} < {:.3}",
        duals[0], duals[1], duals[2]
    ))
}

fn scot_run(seed: u64) -> Result<(bool, f64, f64), String> {
    let data = ar1_vol(100, 12, &Ar1VolParams::default(), seed).map_err(e2s)?;
    let shape = data.shape();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let gen = GeneratorSpec::new(shape, 4, 1e-4, &mut rng).map_err(e2s)?;
    let gen = pretrain_generator(
        &gen,
        &data,
        &PretrainConfig {
            seed,
            ..PretrainConfig::default()
        },
    )
    .map_err(e2s)?
    .generator;
    let eps = 0.3;
    let cfg = GdaConfig {
        iterations: 2000,
        seed,
        ..GdaConfig::volatility()
    };
    let r = solve_scot_gda(
        &DiscreteMeasure::uniform(data),
        &gen,
        &ObjectiveSpec::default_linear_relu(shape),
        &CostSpec::ScaledQuadratic { scale: 100.0 },
        eps,
        &cfg,
    )
    .map_err(e2s)?;
    let ok = (r.final_cost - eps).abs() <= 0.05 * eps || r.final_lambda <= 1e-2;
    Ok((ok, r.final_cost, r.final_lambda))
}

fn c8_scot_convergence() -> Outcome {
    let runs: Vec<(bool, f64, f64)> = (0..10u64).into_par_iter().map(scot_run).collect::<Result<_, _>>()?;
    let passed = runs.iter().filter(|r| r.0).count();
    let detail = runs
        .iter()
        .map(|(_, c, l)| format!("({c:.3}, {l:.2})"))
        .collect::<Vec<_>>()
        .join(" ");
    ensure(passed >= 8, || {
        format!("{passed}/10 converged; (cost, lambda): {detail}")
    })?;
    Ok(format!("{passed}/10 converged"))
}

fn fd_relative_error(net: &DenseNet, x: &[f64], adj: &[f64]) -> Result<f64, String> {
    let fb = net.forward_backward(x, adj).map_err(e2s)?;
    let objective = |n: &DenseNet, x: &[f64]| -> Result<f64, String> {
        let out = n.forward(x).map_err(e2s)?;
        Ok(out.iter().zip(adj).map(|(o, a)| o * a).sum())
    };
    // Fourth-order central stencil.
    let h = 1e-3;
    let stencil = |f: &dyn Fn(f64) -> Result<f64, String>| -> Result<f64, String> {
        Ok((-f(2.0 * h)? + 8.0 * f(h)? - 8.0 * f(-h)? + f(-2.0 * h)?) / (12.0 * h))
    };
    let rel = |a: f64, b: f64| (a - b).abs() / a.abs().max(b.abs()).max(1e-8);
    let mut worst: f64 = 0.0;
    let params = net.params();
    for i in 0..params.len() {
        let fd = stencil(&|d| {
            let mut p = params.clone();
            p[i] += d;
            let mut n = net.clone();
            n.set_params(&p).map_err(e2s)?;
            objective(&n, x)
        })?;
        worst = worst.max(rel(fb.param_grad[i], fd));
    }
    for i in 0..x.len() {
        let fd = stencil(&|d| {
            let mut xs = x.to_vec();
            xs[i] += d;
            objective(net, &xs)
        })?;
        worst = worst.max(rel(fb.input_grad[i], fd));
    }
    Ok(worst)
}

fn constant_net(n: usize, pick: Option<usize>, a: f64, b: f64) -> Result<DenseNet, String> {
    let mut net = DenseNet::zeros(&[n, 1], Activation::Identity, Activation::Identity).map_err(e2s)?;
    let mut p = vec![0.0; n + 1];
    if let Some(k) = pick {
        p[k] = a;
    }
    p[n] = b;
    net.set_params(&p).map_err(e2s)?;
    Ok(net)
}

fn c9_autodiff_and_penalty() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    let mut worst: f64 = 0.0;
    for i in 0..100 {
        let inputs = rng.random_range(1..6);
        let hidden = rng.random_range(1..6);
        let outputs = rng.random_range(1..3);
        let act = [Activation::Tanh, Activation::Exp, Activation::Identity][i % 3];
        let net =
            DenseNet::new(&[inputs, hidden, hidden, outputs], act, Activation::Identity, &mut rng).map_err(e2s)?;
        let x: Vec<f64> = (0..inputs).map(|_| rng.random_range(-1.0..1.0)).collect();
        let adj: Vec<f64> = (0..outputs).map(|_| rng.random_range(-1.0..1.0)).collect();
        worst = worst.max(fd_relative_error(&net, &x, &adj)?);
    }
    ensure(worst <= 1e-5, || format!("finite-difference relative error {worst:e}"))?;

    let bounds = Bounds::new(-10.0, 10.0).map_err(e2s)?;
    let shape = Shape::new(3, 1).map_err(e2s)?;
    let h = (0..2)
        .map(|t| constant_net(t + 1, None, 0.0, 1.0))
        .collect::<Result<_, _>>()?;
    let m = (0..3)
        .map(|t| constant_net(t + 1, Some(t), 1.0, 0.0))
        .collect::<Result<_, _>>()?;
    let fam = TestFunctionFamily::from_nets(shape, 1, h, m).map_err(e2s)?;
    let paths = [[0.0, 1.0, 0.0], [0.0, -1.0, 0.0], [1.0, 2.0, 4.0], [1.0, 0.0, -2.0]];
    let sym = DiscreteMeasure::uniform(PathBatch::from_paths(shape, bounds, &paths).map_err(e2s)?);
    let p0 = martingale_penalty(&fam, &sym, 1e-6).map_err(e2s)?;
    ensure(p0.abs() < 1e-9, || format!("symmetric penalty {p0}"))?;

    let shape = Shape::new(2, 1).map_err(e2s)?;
    let h = vec![constant_net(1, None, 0.0, 1.0)?];
    let m = vec![constant_net(1, None, 0.0, 1.0)?, constant_net(2, None, 0.0, 2.0)?];
    let fam = TestFunctionFamily::from_nets(shape, 1, h, m).map_err(e2s)?;
    let eta = 1e-6;
    let drift = DiscreteMeasure::dirac(shape, bounds, &[0.4, 0.9]).map_err(e2s)?;
    let p1 = martingale_penalty(&fam, &drift, eta).map_err(e2s)?;
    let target = 1.0 / (2.0 * eta);
    ensure((p1 - target).abs() <= 1e-9 * target, || {
        format!("drift penalty {p1} vs {target}")
    })?;
    Ok(format!(
        "100 nets, max relative error {worst:.1e}; penalties {p0} and {p1}"
    ))
}

fn c10_rademacher() -> Outcome {
    let shape = Shape::new(1, 1).map_err(e2s)?;
    let bounds = Bounds::new(-1.0, 1.0).map_err(e2s)?;
    let two = PathBatch::from_paths(shape, bounds, &[[0.3], [-0.4]]).map_err(e2s)?;
    let c = 2.5;
    let plus = move |_: &[f64]| c;
    let minus = move |_: &[f64]| -c;
    let set: [&Hypothesis; 2] = [&plus, &minus];
    let exact = rademacher_exhaustive(&set, &two).map_err(e2s)?;
    ensure((exact - c / 2.0).abs() <= 1e-15, || {
        format!("exhaustive {exact} vs {}", c / 2.0)
    })?;

    let mut rng = ChaCha8Rng::seed_from_u64(10);
    let xs: Vec<[f64; 1]> = (0..20).map(|_| [rng.random_range(-1.0..1.0)]).collect();
    let sample = PathBatch::from_paths(shape, bounds, &xs).map_err(e2s)?;
    let g = |x: &[f64]| 2.0 * x[0];
    let max_g = xs.iter().map(|x| g(x).abs()).fold(0.0, f64::max);
    let single: [&Hypothesis; 1] = [&g];
    let draws = 100_000;
    let est = rademacher_estimate(&HypothesisSet::Finite(&single), &sample, draws, &mut rng).map_err(e2s)?;
    let bound = 3.0 * max_g / (draws as f64).sqrt();
    ensure(est.value.abs() <= bound, || {
        format!("singleton estimate {} > {bound}", est.value)
    })?;
    Ok(format!(
        "exhaustive {exact}; singleton |{:.2e}| <= {bound:.2e}",
        est.value
    ))
}

fn c11_quantization() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let bounds = Bounds::new(-2.0, 3.0).map_err(e2s)?;
    let shape = Shape::new(1, 1).map_err(e2s)?;
    let mut worst_ratio: f64 = 0.0;
    for i in 0..1_000_000u32 {
        let cells = 1 + i % 97;
        let cfg = QuantizerConfig::with_cells(bounds, shape, cells).map_err(e2s)?;
        let v = rng.random_range(bounds.low..=bounds.high);
        let q = quantize_point(&cfg, &[v]).map_err(e2s)?[0];
        let limit = bounds.width() / (2.0 * cells as f64);
        let d = (q - v).abs();
        if d > limit {
            return Err(format!("point {v} with {cells} cells moved {d} > {limit}"));
        }
        worst_ratio = worst_ratio.max(d / limit);
    }

    let shape = Shape::new(3, 1).map_err(e2s)?;
    let unit = Bounds::new(0.0, 1.0).map_err(e2s)?;
    let mut worst_gap: f64 = 0.0;
    for seed in 0..20 {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let n = rng.random_range(5..60);
        let data = (0..n * 3).map(|_| rng.random_range(0.0..1.0)).collect();
        let paths = PathBatch::new(shape, unit, data).map_err(e2s)?;
        let cfg = QuantizerConfig::new(unit, shape, n).map_err(e2s)?;
        for t in 1..3 {
            for mode in [KernelMode::Quantized, KernelMode::Identity] {
                let kernel = conditional_kernel(&cfg, &paths, t, mode).map_err(e2s)?;
                let mut composed: BTreeMap<Vec<u64>, f64> = BTreeMap::new();
                for (_, p, m) in kernel.iter() {
                    for (y, w) in m.atoms() {
                        *composed.entry(y.iter().map(|v| v.to_bits()).collect()).or_default() += p * w;
                    }
                }
                let marginal = suffix_marginal(&cfg, &paths, t, mode).map_err(e2s)?;
                let mut direct: BTreeMap<Vec<u64>, f64> = BTreeMap::new();
                for (y, w) in marginal.atoms() {
                    *direct.entry(y.iter().map(|v| v.to_bits()).collect()).or_default() += w;
                }
                if composed.keys().ne(direct.keys()) {
                    return Err(format!("seed {seed} t {t}: supports differ"));
                }
                for (k, w) in &composed {
                    worst_gap = worst_gap.max((w - direct[k]).abs());
                }
            }
        }
    }
    ensure(worst_gap <= 1e-12, || format!("recomposition gap {worst_gap:e}"))?;
    let r = rate(16, 1, 3);
    ensure(r == 0.5, || format!("rate(16, 1, 3) = {r}"))?;
    Ok(format!(
        "1e6 points, max displacement {worst_ratio:.6} of the bound; recomposition gap {worst_gap:.1e}; rate 0.5"
    ))
}

fn strip_timing(mut v: Value) -> String {
    if let Value::Object(m) = &mut v {
        m.remove("wall_clock_seconds");
    }
    v.to_string()
}

fn c12_reproducibility() -> Outcome {
    let dir = scratch()?;
    let d = dir.path();
    let bundle = d.join("bundle");
    let gen_cfg = write_config(
        d,
        "gen.json",
        &json!({"builtin": {"kind": "separable_random", "atoms": 4, "steps": 3}, "seed": 12}),
    )?;
    let mut files = Vec::new();
    for k in 0..2 {
        let out = bundle.with_extension(k.to_string());
        let r = cli(&["gen", "--config", &gen_cfg, "--out", &out.to_string_lossy()])?;
        let mut bytes = strip_timing(r).into_bytes();
        for f in ["mu.csv", "grid.csv", "problem.json", "config.json"] {
            bytes.extend(fs::read(out.join(f)).map_err(e2s)?);
        }
        files.push(bytes);
    }
    ensure(files[0] == files[1], || "gen output differs".into())?;
    let bundle0 = bundle.with_extension("0");
    let nu_cfg = json!({"problem": "problem.json", "mu": "mu.csv", "nu": "mu.csv", "grid": "grid.csv"});
    let bundle_cfg = write_config(&bundle0, "run.json", &nu_cfg)?;

    let configs = [
        (
            "quantize",
            write_config(
                d,
                "q.json",
                &json!({"builtin": {"kind": "ar1_vol", "n": 30, "steps": 3}, "quantize": {"kernel_time": 1}}),
            )?,
        ),
        ("ot", bundle_cfg.clone()),
        ("cot", bundle_cfg.clone()),
        ("primal-ot", bundle_cfg.clone()),
        ("primal-cot", bundle_cfg),
        (
            "dual-cot",
            write_config(
                d,
                "d.json",
                &json!({"builtin": {"kind": "example1"}, "solver": {"iterations": 200}}),
            )?,
        ),
        (
            "scot",
            write_config(
                d,
                "s.json",
                &json!({
                    "builtin": {"kind": "ar1_vol", "n": 20, "steps": 4},
                    "solver": {"iterations": 50, "batch": 10},
                    "generator": {"pretrain": {"steps": 50}},
                }),
            )?,
        ),
        (
            "rademacher",
            write_config(
                d,
                "r.json",
                &json!({"builtin": {"kind": "ar1_vol", "n": 20, "steps": 4}, "rademacher": {"hypotheses": {"kind": "network", "hidden": 3, "steps": 10, "learning_rate": 0.05, "clamp": 5.0}, "draws": 20}}),
            )?,
        ),
    ];
    for (cmd, cfg) in &configs {
        let a = strip_timing(cli(&[cmd, "--config", cfg, "--seed", "3"])?);
        let b = strip_timing(cli(&[cmd, "--config", cfg, "--seed", "3"])?);
        ensure(a == b, || format!("{cmd} reports differ"))?;
    }
    let rep = write_config(
        d,
        "rep.json",
        &json!({"builtin": {"kind": "example1"}, "solver": {"iterations": 100}}),
    )?;
    let a = strip_timing(cli(&["dual-cot", "--config", &rep, "--repeats", "4"])?);
    let b = strip_timing(cli(&["dual-cot", "--config", &rep, "--repeats", "4"])?);
    ensure(a == b, || "repeated dual-cot reports differ".into())?;
    Ok(format!(
        "{} commands plus gen and --repeats byte-identical",
        configs.len()
    ))
}

struct Criterion {
    id: u32,
    name: &'static str,
    budget: Duration,
    run: fn() -> Outcome,
}

fn main() -> ExitCode {
    let criteria = [
        Criterion {
            id: 1,
            name: "first example, causal primal",
            budget: Duration::from_secs(1),
            run: c1_example1_cot_primal,
        },
        Criterion {
            id: 2,
            name: "first example, unconstrained primal",
            budget: Duration::from_secs(5),
            run: c2_example1_ot_primal,
        },
        Criterion {
            id: 3,
            name: "ordering chain",
            budget: Duration::from_secs(60),
            run: c3_ordering_chain,
        },
        Criterion {
            id: 4,
            name: "separable equivalence",
            budget: Duration::from_secs(60),
            run: c4_separable_equivalence,
        },
        Criterion {
            id: 5,
            name: "sinkhorn consistency",
            budget: Duration::from_secs(10),
            run: c5_sinkhorn_consistency,
        },
        Criterion {
            id: 6,
            name: "weak duality",
            budget: Duration::from_secs(120),
            run: c6_weak_duality,
        },
        Criterion {
            id: 7,
            name: "duality gap",
            budget: Duration::from_secs(60),
            run: c7_duality_gap,
        },
        Criterion {
            id: 8,
            name: "structural convergence",
            budget: Duration::from_secs(600),
            run: c8_scot_convergence,
        },
        Criterion {
            id: 9,
            name: "autodiff and martingale penalty",
            budget: Duration::from_secs(30),
            run: c9_autodiff_and_penalty,
        },
        Criterion {
            id: 10,
            name: "rademacher estimator",
            budget: Duration::from_secs(30),
            run: c10_rademacher,
        },
        Criterion {
            id: 11,
            name: "quantization",
            budget: Duration::from_secs(30),
            run: c11_quantization,
        },
        Criterion {
            id: 12,
            name: "reproducibility",
            budget: Duration::from_secs(600),
            run: c12_reproducibility,
        },
    ];
    let filter: Vec<u32> = std::env::args().skip(1).filter_map(|a| a.parse().ok()).collect();
    let mut failed = 0;
    for c in &criteria {
        if !filter.is_empty() && !filter.contains(&c.id) {
            continue;
        }
        let start = Instant::now();
        let outcome = (c.run)();
        let elapsed = start.elapsed();
        let outcome = match outcome {
            Ok(msg) if elapsed > c.budget => Err(format!("{msg}; took {elapsed:.2?}, budget {:?}", c.budget)),
            other => other,
        };
        match outcome {
            Ok(msg) => println!("PASS {:>2} {}: {msg} ({elapsed:.2?})", c.id, c.name),
            Err(msg) => {
                failed += 1;
                println!("FAIL {:>2} {}: {msg} ({elapsed:.2?})", c.id, c.name);
            }
        }
    }
    if failed > 0 {
        println!("{failed} criteria failed");
        ExitCode::FAILURE
    } else {
        ExitCode::SUCCESS
    }
}
