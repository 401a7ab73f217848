use std::time::Instant;

use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{config, Result};
use crate::estimators::EstimatorConfig;
use crate::problem::GeProblem;
use crate::residual::exact_fbs_residual;
use crate::rng::RunRng;
use crate::trace::{RunTrace, TraceMeta, TraceRow};
use crate::vector::DenseVector;

use super::Method;

/// A run stops as diverged once `‖xᵏ‖` exceeds this or turns non-finite.
pub const DIVERGENCE_NORM: f64 = 1e12;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum InitialPoint {
    Zeros,
    Constant {
        value: f64,
    },
    /// `scale · N(0, I)` from the run's init stream.
    Gaussian {
        scale: f64,
    },
    Given {
        values: Vec<f64>,
    },
}

impl InitialPoint {
    pub fn realize(&self, dim: usize, rng: &mut RunRng) -> Result<DenseVector> {
        Ok(match self {
            InitialPoint::Zeros => DenseVector::zeros(dim),
            InitialPoint::Constant { value } => DenseVector::filled(dim, *value),
            InitialPoint::Gaussian { scale } => (0..dim)
                .map(|_| {
                    let z: f64 = StandardNormal.sample(&mut rng.init);
                    scale * z
                })
                .collect(),
            InitialPoint::Given { values } => {
                crate::error::check_dim(dim, values.len())?;
                DenseVector::from(values.clone())
            }
        })
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct RunSpec {
    pub method: Method,
    pub estimator: EstimatorConfig,
    /// `λ` of the reported residual `‖G_λxᵏ‖/‖G_λx⁰‖`.
    pub measure_lambda: f64,
    /// Oracle budget in epochs (`n` units each).
    pub budget_epochs: f64,
    pub max_iterations: Option<u64>,
    /// Minimum oracle units between recorded rows; one epoch when unset.
    pub metric_every: Option<u64>,
    pub seed: u64,
    pub run_index: u64,
    pub init: InitialPoint,
    /// Track the estimator-to-residual error bound at every step.
    pub debug: bool,
}

impl RunSpec {
    pub fn new(
        method: Method,
        estimator: EstimatorConfig,
        measure_lambda: f64,
        budget_epochs: f64,
    ) -> Self {
        Self {
            method,
            estimator,
            measure_lambda,
            budget_epochs,
            max_iterations: None,
            metric_every: None,
            seed: 0,
            run_index: 0,
            init: InitialPoint::Zeros,
            debug: false,
        }
    }

    pub fn estimator_name(&self) -> &'static str {
        if self.method.uses_estimator() {
            self.estimator.kind.name()
        } else {
            "exact"
        }
    }
}

#[derive(Clone, Debug)]
pub struct RunResult {
    pub trace: RunTrace,
    pub iterations: u64,
    pub oracle_calls: u64,
    pub resolvent_calls: u64,
    pub diverged: bool,
    pub error_bound_min_slack: Option<f64>,
    pub final_point: DenseVector,
}

/// Runs one solver until the oracle budget or iteration cap is reached.
///
/// Row 0 is `x⁰` at zero cost with relative residual 1. Later rows are taken
/// whenever at least `metric_every` units have passed since the last row, plus
/// a final row. Residuals use the exact `F`, whose evaluations are not charged.
/// If `G_λx⁰ = 0` the later rows report 0.
pub fn run_solver(problem: &GeProblem, spec: &RunSpec) -> Result<RunResult> {
    if !(spec.budget_epochs >= 0.0) {
        return Err(config(format!(
            "budget must be nonnegative, got {}",
            spec.budget_epochs
        )));
    }
    if spec.budget_epochs.is_infinite() && spec.max_iterations.is_none() {
        return Err(config("an infinite budget needs max_iterations"));
    }
    let n = problem.n() as u64;
    let budget = if spec.budget_epochs.is_finite() {
        (spec.budget_epochs * n as f64).ceil() as u64
    } else {
        u64::MAX
    };
    let stride = spec.metric_every.unwrap_or(n).max(1);
    let max_iter = spec.max_iterations.unwrap_or(u64::MAX);

    let mut rng = RunRng::new(spec.seed, spec.run_index);
    let x0 = spec.init.realize(problem.dim(), &mut rng)?;
    let start = Instant::now();
    let g0 = exact_fbs_residual(problem, &x0, spec.measure_lambda)?.norm();
    let mut trace = RunTrace::new(TraceMeta {
        method: spec.method.name().to_string(),
        estimator: spec.estimator_name().to_string(),
        problem: problem.tag().to_string(),
        seed: spec.seed,
    });
    trace.rows.push(TraceRow {
        oracle_units: 0,
        epochs: 0.0,
        rel_residual: 1.0,
        wall_ms: 0.0,
    });

    let measure = |x: &[f64]| -> Result<f64> {
        let g = exact_fbs_residual(problem, x, spec.measure_lambda)?.norm();
        Ok(if g0 > 0.0 { g / g0 } else { 0.0 })
    };
    let row = |units: u64, rel: f64| TraceRow {
        oracle_units: units,
        epochs: units as f64 / n as f64,
        rel_residual: rel,
        wall_ms: start.elapsed().as_secs_f64() * 1e3,
    };

    let mut diverged = false;
    let mut last_units = 0;
    let mut solver = if budget > 0 && max_iter > 0 {
        Some(
            spec.method
                .build(problem, &spec.estimator, x0.clone(), &mut rng, spec.debug)?,
        )
    } else {
        None
    };
    if let Some(s) = solver.as_mut() {
        while s.oracle_calls() < budget && s.iteration() < max_iter {
            s.step(problem, &mut rng)?;
            let x = s.point();
            if !x.is_finite() || x.norm() > DIVERGENCE_NORM {
                log::warn!(
                    "{} on {} diverged at iteration {}",
                    spec.method.name(),
                    problem.tag(),
                    s.iteration()
                );
                diverged = true;
                break;
            }
            let units = s.oracle_calls();
            if units >= last_units + stride {
                trace.rows.push(row(units, measure(x)?));
                last_units = units;
            }
        }
        let units = s.oracle_calls();
        if !diverged && units > last_units {
            trace.rows.push(row(units, measure(s.point())?));
        }
    }
    Ok(match solver {
        Some(s) => RunResult {
            trace,
            iterations: s.iteration(),
            oracle_calls: s.oracle_calls(),
            resolvent_calls: s.resolvent_calls(),
            diverged,
            error_bound_min_slack: s.error_bound_slack(),
            final_point: s.point().clone(),
        },
        None => RunResult {
            trace,
            iterations: 0,
            oracle_calls: 0,
            resolvent_calls: 0,
            diverged,
            error_bound_min_slack: None,
            final_point: x0,
        },
    })
}
