use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{config, Result, VfosaError};
use crate::estimators::EstimatorKind;
use crate::problems::{LinearShift, RegKind};
use crate::solvers::InitialPoint;

fn default_epochs() -> f64 {
    200.0
}

fn default_seeds() -> Vec<u64> {
    vec![0]
}

/// One experiment: a problem family, a list of methods, seeds and instances.
///
/// ```toml
/// name = "game-small"
/// epochs = 200
/// seeds = [0, 1]
/// instances = 10
///
/// [problem]
/// kind = "matrix_game"
/// p1 = 20
/// samples = 100
///
/// [[methods]]
/// solver = "vfosa_plus"
/// estimator = "lsarah"
///
/// [[methods]]
/// solver = "og"
/// ```
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub name: String,
    #[serde(default = "default_epochs")]
    pub epochs: f64,
    #[serde(default = "default_seeds")]
    pub seeds: Vec<u64>,
    /// Generated problem instances; 10 for the matrix game, 1 otherwise.
    #[serde(default)]
    pub instances: Option<usize>,
    /// Seed of the problem generator, separate from the run seeds.
    #[serde(default)]
    pub problem_seed: u64,
    #[serde(default)]
    pub output_dir: Option<PathBuf>,
    /// Oracle units between trace rows; one epoch when unset.
    #[serde(default)]
    pub metric_every: Option<u64>,
    #[serde(default)]
    pub max_iterations: Option<u64>,
    pub problem: ProblemConfig,
    #[serde(default)]
    pub params: SplitConfig,
    pub methods: Vec<MethodConfig>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum ProblemConfig {
    Logistic {
        reg: RegKind,
        #[serde(default = "default_reg_weight")]
        reg_weight: f64,
        /// Synthetic sample count, ignored with `dataset`.
        #[serde(default = "default_samples")]
        samples: usize,
        /// Synthetic raw features; the bias column makes `p₁ = features + 1`.
        #[serde(default = "default_features")]
        features: usize,
        #[serde(default = "default_copies")]
        copies: usize,
        #[serde(default = "default_noise")]
        noise: f64,
        /// LIBSVM file used instead of synthetic data.
        #[serde(default)]
        dataset: Option<PathBuf>,
    },
    MatrixGame {
        p1: usize,
        samples: usize,
        #[serde(default = "default_theta")]
        theta: f64,
        #[serde(default = "default_game_noise")]
        noise_variance: f64,
        #[serde(default = "default_game_eps")]
        epsilon: f64,
    },
    SyntheticLinear {
        spectrum_f: Vec<f64>,
        spectrum_t: Vec<f64>,
        #[serde(default)]
        rho: Option<f64>,
        #[serde(default = "default_shift")]
        shift: LinearShift,
        #[serde(default = "default_components")]
        components: usize,
        #[serde(default)]
        component_spread: f64,
    },
}

fn default_reg_weight() -> f64 {
    5e-3
}
fn default_samples() -> usize {
    500
}
fn default_features() -> usize {
    19
}
fn default_copies() -> usize {
    10
}
fn default_noise() -> f64 {
    0.05
}
fn default_theta() -> f64 {
    0.8
}
fn default_game_noise() -> f64 {
    0.05
}
fn default_game_eps() -> f64 {
    crate::problems::GAME_EPSILON
}
fn default_shift() -> LinearShift {
    LinearShift::Zero
}
fn default_components() -> usize {
    1
}

/// Rule for the splitting step `λ`, or an explicit value.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum LambdaChoice {
    Rule(LambdaRule),
    Value(f64),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LambdaRule {
    /// `1/L̂`
    InverseLHat,
    /// `1/L`
    InverseL,
    /// `1/(2L)`
    HalfInverseL,
}

/// Splitting constants and the initial point. Unset fields take the problem
/// family's preset.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SplitConfig {
    #[serde(default)]
    pub lambda: Option<LambdaChoice>,
    #[serde(default)]
    pub zeta: Option<f64>,
    /// `ρ` used by the step-size gates; overrides the problem's own value.
    #[serde(default)]
    pub rho: Option<f64>,
    #[serde(default)]
    pub mu: Option<f64>,
    #[serde(default)]
    pub r: Option<f64>,
    #[serde(default)]
    pub init: Option<InitialPoint>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SolverKind {
    VfosaPlus,
    VfosaMinus,
    Og,
    Fkm,
    VrHalpern,
    VrEg,
    VrFrbs,
}

impl SolverKind {
    pub fn name(self) -> &'static str {
        match self {
            SolverKind::VfosaPlus => "vfosa_plus",
            SolverKind::VfosaMinus => "vfosa_minus",
            SolverKind::Og => "og",
            SolverKind::Fkm => "fkm",
            SolverKind::VrHalpern => "vr_halpern",
            SolverKind::VrEg => "vr_eg",
            SolverKind::VrFrbs => "vr_frbs",
        }
    }

    pub fn is_deterministic(self) -> bool {
        matches!(self, SolverKind::Og | SolverKind::Fkm)
    }

    /// Estimator used when none is given.
    pub fn default_estimator(self) -> EstimatorKind {
        match self {
            SolverKind::VfosaPlus | SolverKind::VfosaMinus | SolverKind::Og | SolverKind::Fkm => {
                EstimatorKind::FullBatch
            }
            SolverKind::VrHalpern => EstimatorKind::Lsarah,
            SolverKind::VrEg | SolverKind::VrFrbs => EstimatorKind::Lsvrg,
        }
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ScheduleKind {
    /// Fixed `pₖ`, `bₖ` from `n`.
    #[default]
    Practical,
    /// Iteration-dependent schedules with constants `omega`, `c_p`, `c_b`.
    Theory,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MethodConfig {
    pub solver: SolverKind,
    #[serde(default)]
    pub estimator: Option<EstimatorKind>,
    #[serde(default)]
    pub schedule: ScheduleKind,
    /// Name written to the trace `method` column; defaults to
    /// `solver-estimator`, with `-half` for halved variants.
    #[serde(default)]
    pub label: Option<String>,
    /// Step size of the baselines.
    #[serde(default)]
    pub eta: Option<f64>,
    /// Accelerated schemes only; defaults to the largest admissible value.
    #[serde(default)]
    pub beta: Option<f64>,
    /// FKM anchor constant.
    #[serde(default)]
    pub alpha: Option<f64>,
    /// Halves both `pₖ` and `bₖ`.
    #[serde(default)]
    pub halved: bool,
    #[serde(default)]
    pub batch: Option<f64>,
    #[serde(default)]
    pub probability: Option<f64>,
    #[serde(default)]
    pub omega: Option<f64>,
    #[serde(default)]
    pub c_p: Option<f64>,
    #[serde(default)]
    pub c_b: Option<f64>,
    /// Track the estimator error bound (VFOSA₊ only).
    #[serde(default)]
    pub debug: bool,
}

impl MethodConfig {
    pub fn new(solver: SolverKind, estimator: Option<EstimatorKind>) -> Self {
        Self {
            solver,
            estimator,
            schedule: ScheduleKind::Practical,
            label: None,
            eta: None,
            beta: None,
            alpha: None,
            halved: false,
            batch: None,
            probability: None,
            omega: None,
            c_p: None,
            c_b: None,
            debug: false,
        }
    }

    pub fn estimator_kind(&self) -> EstimatorKind {
        self.estimator
            .unwrap_or_else(|| self.solver.default_estimator())
    }

    pub fn label(&self) -> String {
        if let Some(l) = &self.label {
            return l.clone();
        }
        let mut s = self.solver.name().to_string();
        if !self.solver.is_deterministic() {
            s.push('-');
            s.push_str(self.estimator_kind().name());
        }
        if self.halved {
            s.push_str("-half");
        }
        s
    }
}

impl ExperimentConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        let cfg: Self = toml::from_str(text).map_err(|e| config(e.to_string()))?;
        cfg.check()?;
        Ok(cfg)
    }

    /// Reads a config. Relative dataset and output paths resolve against the
    /// config file's directory.
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| config(format!("cannot read config {}: {e}", path.display())))?;
        let mut cfg = Self::from_toml(&text)?;
        let base = path.parent().unwrap_or(Path::new("."));
        if let ProblemConfig::Logistic {
            dataset: Some(d), ..
        } = &mut cfg.problem
        {
            if d.is_relative() {
                *d = base.join(&*d);
            }
        }
        if let Some(o) = &mut cfg.output_dir {
            if o.is_relative() {
                *o = base.join(&*o);
            }
        }
        Ok(cfg)
    }

    pub fn to_toml(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| VfosaError::Config(e.to_string()))
    }

    pub fn instance_count(&self) -> usize {
        self.instances.unwrap_or(match self.problem {
            ProblemConfig::MatrixGame { .. } => 10,
            _ => 1,
        })
    }

    /// Structural checks that do not need a built problem.
    pub fn check(&self) -> Result<()> {
        if self.name.trim().is_empty() {
            return Err(config("name: must not be empty"));
        }
        if !(self.epochs >= 0.0 && self.epochs.is_finite()) {
            return Err(config(format!(
                "epochs: must be finite and nonnegative, got {}",
                self.epochs
            )));
        }
        if self.seeds.is_empty() {
            return Err(config("seeds: must list at least one seed"));
        }
        if self.instance_count() == 0 {
            return Err(config("instances: must be at least 1"));
        }
        if self.metric_every == Some(0) {
            return Err(config("metric_every: must be at least 1"));
        }
        if self.methods.is_empty() {
            return Err(config("methods: must list at least one method"));
        }
        let mut labels = std::collections::HashSet::new();
        for (i, m) in self.methods.iter().enumerate() {
            let label = m.label();
            if label.is_empty() || label.contains(['/', '\\']) {
                return Err(config(format!(
                    "methods[{i}].label: invalid label {label:?}"
                )));
            }
            if !labels.insert(label.clone()) {
                return Err(config(format!(
                    "methods[{i}].label: duplicate label {label:?}"
                )));
            }
            if m.solver.is_deterministic()
                && m.estimator.is_some_and(|e| e != EstimatorKind::FullBatch)
            {
                return Err(config(format!(
                    "methods[{i}].estimator: {} is deterministic and takes no estimator",
                    m.solver.name()
                )));
            }
            if matches!(m.solver, SolverKind::VrEg | SolverKind::VrFrbs)
                && m.estimator.is_some_and(|e| e != EstimatorKind::Lsvrg)
            {
                return Err(config(format!(
                    "methods[{i}].estimator: {} uses lsvrg",
                    m.solver.name()
                )));
            }
        }
        match &self.problem {
            ProblemConfig::Logistic {
                samples,
                features,
                copies,
                noise,
                reg_weight,
                dataset,
                ..
            } => {
                if dataset.is_none() && (*samples == 0 || *features == 0) {
                    return Err(config(
                        "problem.samples and problem.features: must be positive",
                    ));
                }
                if *copies == 0 {
                    return Err(config("problem.copies: must be at least 1"));
                }
                if !(*noise >= 0.0) {
                    return Err(config("problem.noise: must be nonnegative"));
                }
                if !(*reg_weight > 0.0) {
                    return Err(config("problem.reg_weight: must be positive"));
                }
            }
            ProblemConfig::MatrixGame { p1, samples, .. } => {
                if *p1 < 2 || *samples == 0 {
                    return Err(config(
                        "problem.p1 and problem.samples: need p1 >= 2 and samples >= 1",
                    ));
                }
            }
            ProblemConfig::SyntheticLinear {
                spectrum_f,
                spectrum_t,
                components,
                ..
            } => {
                if spectrum_f.is_empty() || spectrum_f.len() != spectrum_t.len() {
                    return Err(config(
                        "problem.spectrum_f and problem.spectrum_t: need equal nonzero lengths",
                    ));
                }
                if *components == 0 {
                    return Err(config("problem.components: must be at least 1"));
                }
            }
        }
        Ok(())
    }
}
