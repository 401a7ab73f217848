//! Accelerated forward-backward (`VfosaPlus`) and backward-forward
//! (`VfosaMinus`) schemes with a variance-reduced estimate of `F`.
//!
//! Forward-backward, with `z⁰ = x⁰`:
//!
//! ```text
//! yᵏ   = (tₖ − 1)/tₖ · xᵏ + zᵏ/tₖ
//! wᵏ   = J_{λT}(xᵏ − λF̃ᵏ)
//! xᵏ⁺¹ = yᵏ − (ηₖ/λ)(xᵏ − wᵏ)
//! zᵏ⁺¹ = zᵏ + ν(xᵏ⁺¹ − yᵏ)
//! ```
//!
//! Backward-forward, with `u⁰ = x⁰ + λξ⁰`, `s⁰ = u⁰` and shadow `xᵏ = J_{λT}uᵏ`:
//!
//! ```text
//! vᵏ   = (tₖ − 1)/tₖ · uᵏ + sᵏ/tₖ
//! uᵏ⁺¹ = vᵏ − (ηₖ/λ)(uᵏ − xᵏ) − ηₖF̃ᵏ
//! sᵏ⁺¹ = sᵏ + ν(uᵏ⁺¹ − vᵏ)
//! ```

use crate::error::Result;
use crate::estimators::{EstimatorConfig, VrEstimator};
use crate::problem::GeProblem;
use crate::residual::fbs_residual;
use crate::rng::RunRng;
use crate::vector::{dist, DenseVector};

use super::{AccelParams, Solver};

pub struct VfosaPlus {
    params: AccelParams,
    k: u64,
    x: DenseVector,
    x_prev: DenseVector,
    z: DenseVector,
    estimator: VrEstimator,
    g_tilde: DenseVector,
    resolvent_calls: u64,
    debug: bool,
    bound_slack: Option<f64>,
}

impl VfosaPlus {
    pub fn new(
        problem: &GeProblem,
        params: AccelParams,
        config: EstimatorConfig,
        x0: DenseVector,
        rng: &mut RunRng,
    ) -> Result<Self> {
        let mut estimator = VrEstimator::new(config, problem);
        estimator.initialize(problem, &x0, rng)?;
        Ok(Self {
            params,
            k: 0,
            x_prev: x0.clone(),
            z: x0.clone(),
            g_tilde: DenseVector::zeros(x0.len()),
            x: x0,
            estimator,
            resolvent_calls: 0,
            debug: false,
            bound_slack: None,
        })
    }

    /// Tracks `‖F̃ᵏ − Fxᵏ‖ − ‖G̃ᵏ − Gxᵏ‖` at every step. Costs one exact `F`
    /// per step, which is not counted as oracle work.
    pub fn with_debug(mut self, debug: bool) -> Self {
        self.debug = debug;
        self
    }

    pub fn x(&self) -> &DenseVector {
        &self.x
    }

    pub fn z(&self) -> &DenseVector {
        &self.z
    }

    /// `G̃` of the last completed step.
    pub fn last_residual_estimate(&self) -> &DenseVector {
        &self.g_tilde
    }

    pub fn params(&self) -> &AccelParams {
        &self.params
    }

    pub fn estimator(&self) -> &VrEstimator {
        &self.estimator
    }
}

impl Solver for VfosaPlus {
    fn step(&mut self, problem: &GeProblem, rng: &mut RunRng) -> Result<()> {
        let lambda = self.params.lambda();
        let nu = self.params.nu();
        let (t, eta) = self.params.t_eta(self.k);
        let f = self
            .estimator
            .estimate(problem, self.k, &self.x, &self.x_prev, rng)?;
        let g = fbs_residual(problem, &self.x, lambda, &f)?;
        self.resolvent_calls += 1;
        if self.debug {
            let fx = problem.full(&self.x);
            let gx = fbs_residual(problem, &self.x, lambda, &fx)?;
            let slack = dist(&f, &fx) - dist(&g, &gx);
            self.bound_slack = Some(self.bound_slack.map_or(slack, |s| s.min(slack)));
        }
        let a = (t - 1.0) / t;
        let mut next = DenseVector::zeros(self.x.len());
        for i in 0..next.len() {
            let y = a * self.x[i] + self.z[i] / t;
            next[i] = y - eta * g[i];
            self.z[i] += nu * (next[i] - y);
        }
        self.x_prev = std::mem::replace(&mut self.x, next);
        self.g_tilde = g;
        self.k += 1;
        Ok(())
    }

    fn point(&self) -> &DenseVector {
        &self.x
    }

    fn oracle_calls(&self) -> u64 {
        self.estimator.oracle_calls()
    }

    fn resolvent_calls(&self) -> u64 {
        self.resolvent_calls
    }

    fn iteration(&self) -> u64 {
        self.k
    }

    fn error_bound_slack(&self) -> Option<f64> {
        self.bound_slack
    }
}

pub struct VfosaMinus {
    params: AccelParams,
    k: u64,
    u: DenseVector,
    s: DenseVector,
    shadow: DenseVector,
    shadow_prev: DenseVector,
    estimator: VrEstimator,
    resolvent_calls: u64,
}

impl VfosaMinus {
    /// `ξ⁰` comes from the problem when supplied and is zero otherwise.
    pub fn new(
        problem: &GeProblem,
        params: AccelParams,
        config: EstimatorConfig,
        x0: DenseVector,
        rng: &mut RunRng,
    ) -> Result<Self> {
        let lambda = params.lambda();
        let u: DenseVector = match problem.initial_xi() {
            Some(xi) => x0
                .iter()
                .zip(xi.iter())
                .map(|(x, v)| x + lambda * v)
                .collect(),
            None => x0,
        };
        let shadow = problem.resolve(&u, lambda);
        let mut estimator = VrEstimator::new(config, problem);
        estimator.initialize(problem, &shadow, rng)?;
        Ok(Self {
            params,
            k: 0,
            s: u.clone(),
            u,
            shadow_prev: shadow.clone(),
            shadow,
            estimator,
            resolvent_calls: 1,
        })
    }

    pub fn u(&self) -> &DenseVector {
        &self.u
    }

    pub fn s(&self) -> &DenseVector {
        &self.s
    }

    pub fn shadow(&self) -> &DenseVector {
        &self.shadow
    }
}

impl Solver for VfosaMinus {
    fn step(&mut self, problem: &GeProblem, rng: &mut RunRng) -> Result<()> {
        let lambda = self.params.lambda();
        let nu = self.params.nu();
        let (t, eta) = self.params.t_eta(self.k);
        let f = self
            .estimator
            .estimate(problem, self.k, &self.shadow, &self.shadow_prev, rng)?;
        let a = (t - 1.0) / t;
        let c = eta / lambda;
        let mut next = DenseVector::zeros(self.u.len());
        for i in 0..next.len() {
            let v = a * self.u[i] + self.s[i] / t;
            next[i] = v - c * (self.u[i] - self.shadow[i]) - eta * f[i];
            self.s[i] += nu * (next[i] - v);
        }
        let shadow = problem.resolve(&next, lambda);
        self.resolvent_calls += 1;
        self.u = next;
        self.shadow_prev = std::mem::replace(&mut self.shadow, shadow);
        self.k += 1;
        Ok(())
    }

    fn point(&self) -> &DenseVector {
        &self.shadow
    }

    fn oracle_calls(&self) -> u64 {
        self.estimator.oracle_calls()
    }

    fn resolvent_calls(&self) -> u64 {
        self.resolvent_calls
    }

    fn iteration(&self) -> u64 {
        self.k
    }
}
