use std::fs;
use std::path::{Path, PathBuf};

use cotdre_core::measures::io::read_measure_file;
use cotdre_core::quantize::KernelMode;
use cotdre_core::solvers::PretrainConfig;
use cotdre_core::synthetic::{self, Ar1VolParams};
use cotdre_core::{Bounds, CostSpec, DiscreteMeasure, GdaConfig, ObjectiveSpec, PathBatch, Shape};
use serde::{Deserialize, Serialize};
use serde_json::Value;
use sha2::{Digest, Sha256};

use crate::error::CliError;

/// Built-in instances, shared by `gen` and by every solver command.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum Builtin {
    Example1 {},
    Example2 {
        k: f64,
    },
    Ar1Vol {
        n: usize,
        steps: usize,
        #[serde(default)]
        params: Ar1VolParams,
        seed: Option<u64>,
    },
    SeparableRandom {
        atoms: usize,
        steps: usize,
        seed: Option<u64>,
    },
}

/// Contents of `problem.json`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProblemSpec {
    pub steps: usize,
    pub dims: usize,
    pub bounds: Bounds,
    pub objective: ObjectiveSpec,
    pub cost: CostSpec,
    pub eps: Option<f64>,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Preset {
    #[default]
    Volatility,
    Prediction,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GeneratorOptions {
    pub hidden: usize,
    pub sigma2: f64,
    /// `null` skips pretraining.
    pub pretrain: Option<PretrainConfig>,
}

impl Default for GeneratorOptions {
    fn default() -> Self {
        GeneratorOptions {
            hidden: 4,
            sigma2: 1e-4,
            pretrain: Some(PretrainConfig::default()),
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct QuantizeOptions {
    pub cells_per_axis: Option<u32>,
    /// Also report the conditional kernel at this time.
    pub kernel_time: Option<usize>,
    pub kernel_mode: Option<KernelMode>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum HypothesisOptions {
    /// Constant functions with the listed values.
    Constants { values: Vec<f64> },
    /// Coordinate projections `g_k(x) = x_k`.
    Coordinates {},
    /// Dense network `[T*d, hidden, 1]`, supremum approximated by ascent.
    Network {
        hidden: usize,
        steps: usize,
        learning_rate: f64,
        clamp: f64,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RademacherOptions {
    pub hypotheses: HypothesisOptions,
    #[serde(default = "default_draws")]
    pub draws: usize,
    /// Enumerate every sign vector instead of sampling (finite sets only).
    #[serde(default)]
    pub exhaustive: bool,
}

fn default_draws() -> usize {
    1000
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LambdaGridOptions {
    pub max: f64,
    pub count: usize,
}

impl Default for LambdaGridOptions {
    fn default() -> Self {
        LambdaGridOptions {
            max: 100.0,
            count: 10_001,
        }
    }
}

/// The JSON document passed with `--config`. Paths are relative to the file.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub builtin: Option<Builtin>,
    pub problem: Option<PathBuf>,
    pub mu: Option<PathBuf>,
    pub nu: Option<PathBuf>,
    pub grid: Option<PathBuf>,
    /// Overrides the radius from the problem.
    pub eps: Option<f64>,
    pub seed: Option<u64>,
    pub preset: Preset,
    pub ot_mode: bool,
    /// Partial solver config applied over the preset.
    pub solver: Option<Value>,
    pub generator: Option<GeneratorOptions>,
    pub quantize: Option<QuantizeOptions>,
    pub rademacher: Option<RademacherOptions>,
    pub lambda_grid: Option<LambdaGridOptions>,
    /// Expected value to compare the result against.
    pub reference_value: Option<f64>,
    /// Weight resolution of the brute-force cross-check for primal commands.
    pub brute_force_resolution: Option<u32>,
}

/// Everything a command needs, loaded and validated.
#[derive(Debug, Clone)]
pub struct Inputs {
    pub config: RunConfig,
    pub raw_config: Value,
    pub seed: u64,
    pub digest: String,
    pub mu: Option<DiscreteMeasure>,
    pub nu: Option<DiscreteMeasure>,
    pub grid: Option<PathBatch>,
    pub objective: Option<ObjectiveSpec>,
    pub cost: Option<CostSpec>,
    pub eps: Option<f64>,
    pub solver: GdaConfig,
}

impl Inputs {
    pub fn mu(&self) -> Result<&DiscreteMeasure, CliError> {
        self.mu
            .as_ref()
            .ok_or_else(|| CliError::config("a reference measure (mu or builtin) is required"))
    }

    pub fn nu(&self) -> Result<&DiscreteMeasure, CliError> {
        self.nu
            .as_ref()
            .ok_or_else(|| CliError::config("a target measure (nu) is required"))
    }

    pub fn grid(&self) -> Result<&PathBatch, CliError> {
        self.grid
            .as_ref()
            .ok_or_else(|| CliError::config("a candidate grid is required"))
    }

    pub fn objective(&self) -> Result<&ObjectiveSpec, CliError> {
        self.objective
            .as_ref()
            .ok_or_else(|| CliError::config("an objective (problem) is required"))
    }

    pub fn cost(&self) -> Result<&CostSpec, CliError> {
        self.cost
            .as_ref()
            .ok_or_else(|| CliError::config("a cost (problem) is required"))
    }

    pub fn eps(&self) -> Result<f64, CliError> {
        self.eps.ok_or_else(|| CliError::config("a radius eps is required"))
    }
}

pub fn load(path: Option<&Path>, seed_flag: Option<u64>) -> Result<Inputs, CliError> {
    let mut hasher = Sha256::new();
    let (raw, base) = match path {
        Some(p) => {
            let bytes = read_bytes(p)?;
            hasher.update(&bytes);
            let raw: Value =
                serde_json::from_slice(&bytes).map_err(|e| CliError::new("json", format!("{}: {e}", p.display())))?;
            (raw, p.parent().map(Path::to_path_buf).unwrap_or_default())
        }
        None => (Value::Object(Default::default()), PathBuf::new()),
    };
    let config: RunConfig =
        serde_json::from_value(raw.clone()).map_err(|e| CliError::config(format!("invalid config: {e}")))?;
    let seed = seed_flag.or(config.seed).unwrap_or(0);
    if seed_flag.is_some() {
        hasher.update(seed.to_le_bytes());
    }

    let mut mu = None;
    let mut grid = None;
    let mut objective = None;
    let mut cost = None;
    let mut eps = None;
    let mut bounds = None;
    let mut shape = None;

    if let Some(b) = &config.builtin {
        let p = builtin_problem(b, seed)?;
        shape = Some(p.mu.shape());
        bounds = Some(p.mu.bounds());
        mu = Some(p.mu);
        grid = p.grid;
        objective = Some(p.objective);
        cost = Some(p.cost);
        eps = p.eps;
    }
    if let Some(p) = &config.problem {
        let p = resolve(&base, p);
        let bytes = read_bytes(&p)?;
        hasher.update(&bytes);
        let spec: ProblemSpec =
            serde_json::from_slice(&bytes).map_err(|e| CliError::config(format!("{}: {e}", p.display())))?;
        let s = Shape::new(spec.steps, spec.dims)?;
        let b = Bounds::new(spec.bounds.low, spec.bounds.high)?;
        spec.objective.validate(s)?;
        spec.cost.validate(s)?;
        shape = Some(s);
        bounds = Some(b);
        objective = Some(spec.objective);
        cost = Some(spec.cost);
        eps = spec.eps.or(eps);
    }
    let measure_bounds = |what: &str| {
        bounds.ok_or_else(|| CliError::config(format!("{what} needs bounds from a problem file or builtin")))
    };
    let load_measure = |p: &PathBuf, what: &str, hasher: &mut Sha256| -> Result<DiscreteMeasure, CliError> {
        let p = resolve(&base, p);
        hasher.update(read_bytes(&p)?);
        let m = read_measure_file(&p, measure_bounds(what)?).map_err(|e| CliError::with_path(e, &p))?;
        if let Some(s) = shape {
            if m.shape() != s {
                return Err(CliError::new(
                    "dimension",
                    format!(
                        "{}: paths have {} values, problem expects {}",
                        p.display(),
                        m.shape().len(),
                        s.len()
                    ),
                ));
            }
        }
        Ok(m)
    };
    if let Some(p) = &config.mu {
        mu = Some(load_measure(p, "mu", &mut hasher)?);
    }
    let nu = match &config.nu {
        Some(p) => Some(load_measure(p, "nu", &mut hasher)?),
        None => None,
    };
    if let Some(p) = &config.grid {
        grid = Some(load_measure(p, "grid", &mut hasher)?.support().clone());
    }
    if let Some(e) = config.eps {
        eps = Some(e);
    }
    if let Some(e) = eps {
        if !(e >= 0.0 && e.is_finite()) {
            return Err(CliError::new("parameter", format!("eps must be nonnegative, got {e}")));
        }
    }

    let solver = solver_config(&config, seed)?;
    let digest = hasher.finalize().iter().map(|b| format!("{b:02x}")).collect();
    Ok(Inputs {
        config,
        raw_config: raw,
        seed,
        digest,
        mu,
        nu,
        grid,
        objective,
        cost,
        eps,
        solver,
    })
}

fn solver_config(config: &RunConfig, seed: u64) -> Result<GdaConfig, CliError> {
    let base = match config.preset {
        Preset::Volatility => GdaConfig::volatility(),
        Preset::Prediction => GdaConfig::prediction(),
    };
    let base = if config.ot_mode { base.ot_mode() } else { base };
    let mut value = serde_json::to_value(&base).map_err(|e| CliError::new("json", e.to_string()))?;
    if let Some(overrides) = &config.solver {
        let Value::Object(o) = overrides else {
            return Err(CliError::config("solver must be a JSON object"));
        };
        let Value::Object(target) = &mut value else {
            unreachable!("config serializes to an object");
        };
        for (k, v) in o {
            target.insert(k.clone(), v.clone());
        }
    }
    let mut cfg: GdaConfig =
        serde_json::from_value(value).map_err(|e| CliError::config(format!("invalid solver config: {e}")))?;
    let seeded = config.solver.as_ref().and_then(|v| v.get("seed")).is_some();
    if !seeded {
        cfg.seed = seed;
    }
    cfg.validate()?;
    Ok(cfg)
}

/// A built-in instance expressed as solver inputs.
pub struct BuiltinProblem {
    pub mu: DiscreteMeasure,
    pub grid: Option<PathBatch>,
    pub objective: ObjectiveSpec,
    pub cost: CostSpec,
    pub eps: Option<f64>,
}

pub fn builtin_problem(b: &Builtin, seed: u64) -> Result<BuiltinProblem, CliError> {
    let from = |p: synthetic::Problem| BuiltinProblem {
        mu: p.mu,
        grid: Some(p.grid),
        objective: p.objective,
        cost: p.cost,
        eps: Some(p.eps),
    };
    Ok(match b {
        Builtin::Example1 {} => from(synthetic::example1()),
        Builtin::Example2 { k } => from(synthetic::example2(*k)?),
        Builtin::SeparableRandom { atoms, steps, seed: s } => {
            from(synthetic::separable_random(*atoms, *steps, s.unwrap_or(seed))?)
        }
        Builtin::Ar1Vol {
            n,
            steps,
            params,
            seed: s,
        } => {
            let batch = synthetic::ar1_vol(*n, *steps, params, s.unwrap_or(seed))?;
            let shape = batch.shape();
            BuiltinProblem {
                mu: DiscreteMeasure::uniform(batch),
                grid: None,
                objective: ObjectiveSpec::default_linear_relu(shape),
                cost: CostSpec::ScaledQuadratic { scale: 100.0 },
                eps: Some(0.3),
            }
        }
    })
}

fn resolve(base: &Path, p: &Path) -> PathBuf {
    if p.is_absolute() {
        p.to_path_buf()
    } else {
        base.join(p)
    }
}

fn read_bytes(p: &Path) -> Result<Vec<u8>, CliError> {
    fs::read(p).map_err(|e| CliError::new("io", format!("{}: {e}", p.display())))
}
