//! Iterative solvers for `0 ∈ Fx + Tx` behind one stepping interface.

mod baselines;
mod params;
mod run;
mod vfosa;

pub use baselines::{Fkm, OptimisticGradient, VrEg, VrFrbs, VrHalpern};
pub use params::{schedule_tk_etak, AccelParams, DEFAULT_MU};
pub use run::{run_solver, InitialPoint, RunResult, RunSpec, DIVERGENCE_NORM};
pub use vfosa::{VfosaMinus, VfosaPlus};

use serde::{Deserialize, Serialize};

use crate::error::{config, Result};
use crate::estimators::EstimatorConfig;
use crate::problem::GeProblem;
use crate::rng::RunRng;
use crate::vector::DenseVector;

/// One solver instance advancing from `xᵏ` to `xᵏ⁺¹`.
pub trait Solver: Send {
    fn step(&mut self, problem: &GeProblem, rng: &mut RunRng) -> Result<()>;

    /// Point at which the solution residual is measured (the shadow iterate
    /// for the backward-forward scheme).
    fn point(&self) -> &DenseVector;

    /// Component-oracle units spent so far, including initialization.
    fn oracle_calls(&self) -> u64;

    fn resolvent_calls(&self) -> u64;

    /// Completed iterations.
    fn iteration(&self) -> u64;

    /// Minimum of `‖F̃ᵏ − Fxᵏ‖ − ‖G̃ᵏ − Gxᵏ‖` over steps, when tracked.
    fn error_bound_slack(&self) -> Option<f64> {
        None
    }
}

/// A fully resolved method with its step sizes.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "method", rename_all = "snake_case")]
pub enum Method {
    VfosaPlus { params: AccelParams },
    VfosaMinus { params: AccelParams },
    Og { eta: f64 },
    Fkm { eta: f64, alpha: f64 },
    VrHalpern { eta: f64 },
    VrEg { eta: f64 },
    VrFrbs { eta: f64 },
}

impl Method {
    pub fn name(&self) -> &'static str {
        match self {
            Method::VfosaPlus { .. } => "vfosa_plus",
            Method::VfosaMinus { .. } => "vfosa_minus",
            Method::Og { .. } => "og",
            Method::Fkm { .. } => "fkm",
            Method::VrHalpern { .. } => "vr_halpern",
            Method::VrEg { .. } => "vr_eg",
            Method::VrFrbs { .. } => "vr_frbs",
        }
    }

    /// Whether the method consumes the estimator configuration.
    pub fn uses_estimator(&self) -> bool {
        !matches!(self, Method::Og { .. } | Method::Fkm { .. })
    }

    fn check(&self) -> Result<()> {
        let eta = match *self {
            Method::VfosaPlus { .. } | Method::VfosaMinus { .. } => return Ok(()),
            Method::Fkm { eta, alpha } => {
                if !(alpha > 2.0) {
                    return Err(config(format!("fkm needs alpha > 2, got {alpha}")));
                }
                eta
            }
            Method::Og { eta }
            | Method::VrHalpern { eta }
            | Method::VrEg { eta }
            | Method::VrFrbs { eta } => eta,
        };
        if !(eta > 0.0 && eta.is_finite()) {
            return Err(config(format!(
                "{} needs a positive step size, got {eta}",
                self.name()
            )));
        }
        Ok(())
    }

    /// Builds the solver at `x0`, spending the initial full pass.
    pub fn build(
        &self,
        problem: &GeProblem,
        estimator: &EstimatorConfig,
        x0: DenseVector,
        rng: &mut RunRng,
        debug: bool,
    ) -> Result<Box<dyn Solver>> {
        self.check()?;
        crate::error::check_dim(problem.dim(), x0.len())?;
        Ok(match *self {
            Method::VfosaPlus { params } => Box::new(
                VfosaPlus::new(problem, params, estimator.clone(), x0, rng)?.with_debug(debug),
            ),
            Method::VfosaMinus { params } => Box::new(VfosaMinus::new(
                problem,
                params,
                estimator.clone(),
                x0,
                rng,
            )?),
            Method::Og { eta } => Box::new(OptimisticGradient::new(problem, eta, x0)),
            Method::Fkm { eta, alpha } => Box::new(Fkm::new(problem, eta, alpha, x0)),
            Method::VrHalpern { eta } => {
                Box::new(VrHalpern::new(problem, eta, estimator.clone(), x0, rng)?)
            }
            Method::VrEg { eta } => Box::new(VrEg::new(problem, eta, estimator.clone(), x0)),
            Method::VrFrbs { eta } => Box::new(VrFrbs::new(problem, eta, estimator.clone(), x0)),
        })
    }
}
