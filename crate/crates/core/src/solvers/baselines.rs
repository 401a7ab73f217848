//! Comparison methods. Each recursion below is the single-loop form used in
//! the benchmarks; `J` is `J_{ηT}` unless noted.
//!
//! * Optimistic gradient: `xᵏ⁺¹ = J(xᵏ − η(2Fxᵏ − Fxᵏ⁻¹))`, `x⁻¹ = x⁰`.
//!   One full pass per step.
//! * Fast Krasnosel'skii-Mann on `R = I − J(I − ηF)`:
//!   `xᵏ⁺¹ = xᵏ + k/(k+α)(xᵏ − xᵏ⁻¹) − α/(2(k+α))Rxᵏ − k/(k+α)(Rxᵏ − Rxᵏ⁻¹)`.
//!   One full pass per step.
//! * Variance-reduced Halpern: `xᵏ⁺¹ = λₖx⁰ + (1 − λₖ)J(xᵏ − ηF̃ᵏ)` with
//!   `λₖ = 2/(k+4)` and `F̃ᵏ` from the configured estimator.
//! * Loopless variance-reduced extragradient, `α = 1 − p`:
//!   `x̄ = αxᵏ + (1 − α)wᵏ`, `x½ = J(x̄ − ηFwᵏ)`,
//!   `xᵏ⁺¹ = J(x̄ − η[Fwᵏ + F_S x½ − F_S wᵏ])`, then `wᵏ⁺¹ = xᵏ⁺¹` with
//!   probability `p` (full pass), else `wᵏ`.
//! * Variance-reduced forward-reflected-backward:
//!   `xᵏ⁺¹ = J(xᵏ − η[Fwᵏ + F_S xᵏ − F_S wᵏ⁻¹])`, then `wᵏ⁺¹ = xᵏ⁺¹` with
//!   probability `p` (full pass), else `wᵏ`.
//!
//! The two loopless methods take `bₖ` and `pₖ` from the estimator
//! configuration and ignore its kind.

use rand::Rng;

use crate::error::Result;
use crate::estimators::{sample_batch, EstimatorConfig, VrEstimator};
use crate::problem::GeProblem;
use crate::rng::RunRng;
use crate::vector::DenseVector;

use super::Solver;

fn forward(x: &[f64], eta: f64, d: &[f64]) -> DenseVector {
    x.iter().zip(d).map(|(a, b)| a - eta * b).collect()
}

pub struct OptimisticGradient {
    eta: f64,
    k: u64,
    x: DenseVector,
    fx: Option<DenseVector>,
    fx_prev: Option<DenseVector>,
    oracle_calls: u64,
    resolvent_calls: u64,
}

impl OptimisticGradient {
    pub fn new(problem: &GeProblem, eta: f64, x0: DenseVector) -> Self {
        let fx = problem.full(&x0);
        Self {
            eta,
            k: 0,
            x: x0,
            fx_prev: Some(fx.clone()),
            fx: Some(fx),
            oracle_calls: problem.n() as u64,
            resolvent_calls: 0,
        }
    }
}

impl Solver for OptimisticGradient {
    fn step(&mut self, problem: &GeProblem, _rng: &mut RunRng) -> Result<()> {
        let fx = match self.fx.take() {
            Some(f) => f,
            None => {
                self.oracle_calls += problem.n() as u64;
                problem.full(&self.x)
            }
        };
        let prev = self.fx_prev.take().unwrap_or_else(|| fx.clone());
        let d: Vec<f64> = fx
            .iter()
            .zip(prev.iter())
            .map(|(a, b)| 2.0 * a - b)
            .collect();
        self.x = problem.resolve(&forward(&self.x, self.eta, &d), self.eta);
        self.resolvent_calls += 1;
        self.fx_prev = Some(fx);
        self.k += 1;
        Ok(())
    }

    fn point(&self) -> &DenseVector {
        &self.x
    }
    fn oracle_calls(&self) -> u64 {
        self.oracle_calls
    }
    fn resolvent_calls(&self) -> u64 {
        self.resolvent_calls
    }
    fn iteration(&self) -> u64 {
        self.k
    }
}

pub struct Fkm {
    eta: f64,
    alpha: f64,
    k: u64,
    x: DenseVector,
    x_prev: DenseVector,
    r_prev: DenseVector,
    f0: Option<DenseVector>,
    oracle_calls: u64,
    resolvent_calls: u64,
}

impl Fkm {
    pub fn new(problem: &GeProblem, eta: f64, alpha: f64, x0: DenseVector) -> Self {
        let f0 = problem.full(&x0);
        Self {
            eta,
            alpha,
            k: 0,
            x_prev: x0.clone(),
            r_prev: DenseVector::zeros(x0.len()),
            x: x0,
            f0: Some(f0),
            oracle_calls: problem.n() as u64,
            resolvent_calls: 0,
        }
    }
}

impl Solver for Fkm {
    fn step(&mut self, problem: &GeProblem, _rng: &mut RunRng) -> Result<()> {
        let fx = match self.f0.take() {
            Some(f) => f,
            None => {
                self.oracle_calls += problem.n() as u64;
                problem.full(&self.x)
            }
        };
        let w = problem.resolve(&forward(&self.x, self.eta, &fx), self.eta);
        self.resolvent_calls += 1;
        let r: DenseVector = self.x.iter().zip(w.iter()).map(|(a, b)| a - b).collect();
        let kf = self.k as f64;
        let c = kf / (kf + self.alpha);
        let h = self.alpha / (2.0 * (kf + self.alpha));
        let next: DenseVector = (0..r.len())
            .map(|i| {
                self.x[i] + c * (self.x[i] - self.x_prev[i])
                    - h * r[i]
                    - c * (r[i] - self.r_prev[i])
            })
            .collect();
        self.x_prev = std::mem::replace(&mut self.x, next);
        self.r_prev = r;
        self.k += 1;
        Ok(())
    }

    fn point(&self) -> &DenseVector {
        &self.x
    }
    fn oracle_calls(&self) -> u64 {
        self.oracle_calls
    }
    fn resolvent_calls(&self) -> u64 {
        self.resolvent_calls
    }
    fn iteration(&self) -> u64 {
        self.k
    }
}

pub struct VrHalpern {
    eta: f64,
    k: u64,
    anchor: DenseVector,
    x: DenseVector,
    x_prev: DenseVector,
    estimator: VrEstimator,
    resolvent_calls: u64,
}

impl VrHalpern {
    pub fn new(
        problem: &GeProblem,
        eta: f64,
        config: EstimatorConfig,
        x0: DenseVector,
        rng: &mut RunRng,
    ) -> Result<Self> {
        let mut estimator = VrEstimator::new(config, problem);
        estimator.initialize(problem, &x0, rng)?;
        Ok(Self {
            eta,
            k: 0,
            anchor: x0.clone(),
            x_prev: x0.clone(),
            x: x0,
            estimator,
            resolvent_calls: 0,
        })
    }

    /// Anchor weight `λₖ = 2/(k+4)`.
    pub fn anchor_weight(k: u64) -> f64 {
        2.0 / (k as f64 + 4.0)
    }
}

impl Solver for VrHalpern {
    fn step(&mut self, problem: &GeProblem, rng: &mut RunRng) -> Result<()> {
        let f = self
            .estimator
            .estimate(problem, self.k, &self.x, &self.x_prev, rng)?;
        let w = problem.resolve(&forward(&self.x, self.eta, &f), self.eta);
        self.resolvent_calls += 1;
        let a = Self::anchor_weight(self.k);
        let next: DenseVector = self
            .anchor
            .iter()
            .zip(w.iter())
            .map(|(x0, wi)| a * x0 + (1.0 - a) * wi)
            .collect();
        self.x_prev = std::mem::replace(&mut self.x, next);
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
}

/// Snapshot `w` with its full operator value, shared by the loopless methods.
struct Snapshot {
    w: DenseVector,
    fw: DenseVector,
}

impl Snapshot {
    fn new(problem: &GeProblem, x0: &DenseVector) -> Self {
        Self {
            w: x0.clone(),
            fw: problem.full(x0),
        }
    }
}

fn batch_mean(problem: &GeProblem, batch: &[usize], x: &[f64]) -> DenseVector {
    let mut out = DenseVector::zeros(x.len());
    problem.batch_mean(batch, x, &mut out);
    out
}

pub struct VrEg {
    eta: f64,
    config: EstimatorConfig,
    k: u64,
    x: DenseVector,
    snap: Snapshot,
    batch: Vec<usize>,
    oracle_calls: u64,
    resolvent_calls: u64,
}

impl VrEg {
    pub fn new(problem: &GeProblem, eta: f64, config: EstimatorConfig, x0: DenseVector) -> Self {
        Self {
            eta,
            config,
            k: 0,
            snap: Snapshot::new(problem, &x0),
            x: x0,
            batch: Vec::new(),
            oracle_calls: problem.n() as u64,
            resolvent_calls: 0,
        }
    }
}

impl Solver for VrEg {
    fn step(&mut self, problem: &GeProblem, rng: &mut RunRng) -> Result<()> {
        let n = problem.n();
        let p = self.config.probability_at(self.k);
        let alpha = 1.0 - p;
        let xbar: DenseVector = self
            .x
            .iter()
            .zip(self.snap.w.iter())
            .map(|(x, w)| alpha * x + (1.0 - alpha) * w)
            .collect();
        let half = problem.resolve(&forward(&xbar, self.eta, &self.snap.fw), self.eta);
        sample_batch(
            self.config.batch_size(self.k, n),
            n,
            &mut rng.batch,
            &mut self.batch,
        );
        let fa = batch_mean(problem, &self.batch, &half);
        let fb = batch_mean(problem, &self.batch, &self.snap.w);
        self.oracle_calls += 2 * self.batch.len() as u64;
        let d: Vec<f64> = (0..fa.len())
            .map(|i| self.snap.fw[i] + (fa[i] - fb[i]))
            .collect();
        self.x = problem.resolve(&forward(&xbar, self.eta, &d), self.eta);
        self.resolvent_calls += 2;
        if rng.coin.random::<f64>() < p {
            self.snap = Snapshot::new(problem, &self.x);
            self.oracle_calls += n as u64;
        }
        self.k += 1;
        Ok(())
    }

    fn point(&self) -> &DenseVector {
        &self.x
    }
    fn oracle_calls(&self) -> u64 {
        self.oracle_calls
    }
    fn resolvent_calls(&self) -> u64 {
        self.resolvent_calls
    }
    fn iteration(&self) -> u64 {
        self.k
    }
}

pub struct VrFrbs {
    eta: f64,
    config: EstimatorConfig,
    k: u64,
    x: DenseVector,
    snap: Snapshot,
    w_prev: DenseVector,
    batch: Vec<usize>,
    oracle_calls: u64,
    resolvent_calls: u64,
}

impl VrFrbs {
    pub fn new(problem: &GeProblem, eta: f64, config: EstimatorConfig, x0: DenseVector) -> Self {
        Self {
            eta,
            config,
            k: 0,
            snap: Snapshot::new(problem, &x0),
            w_prev: x0.clone(),
            x: x0,
            batch: Vec::new(),
            oracle_calls: problem.n() as u64,
            resolvent_calls: 0,
        }
    }
}

impl Solver for VrFrbs {
    fn step(&mut self, problem: &GeProblem, rng: &mut RunRng) -> Result<()> {
        let n = problem.n();
        let p = self.config.probability_at(self.k);
        sample_batch(
            self.config.batch_size(self.k, n),
            n,
            &mut rng.batch,
            &mut self.batch,
        );
        let fa = batch_mean(problem, &self.batch, &self.x);
        let fb = batch_mean(problem, &self.batch, &self.w_prev);
        self.oracle_calls += 2 * self.batch.len() as u64;
        let d: Vec<f64> = (0..fa.len())
            .map(|i| self.snap.fw[i] + (fa[i] - fb[i]))
            .collect();
        self.x = problem.resolve(&forward(&self.x, self.eta, &d), self.eta);
        self.resolvent_calls += 1;
        self.w_prev = self.snap.w.clone();
        if rng.coin.random::<f64>() < p {
            self.snap = Snapshot::new(problem, &self.x);
            self.oracle_calls += n as u64;
        }
        self.k += 1;
        Ok(())
    }

    fn point(&self) -> &DenseVector {
        &self.x
    }
    fn oracle_calls(&self) -> u64 {
        self.oracle_calls
    }
    fn resolvent_calls(&self) -> u64 {
        self.resolvent_calls
    }
    fn iteration(&self) -> u64 {
        self.k
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::estimators::EstimatorKind;
    use crate::problem::testing::{scaled_identity, shifted};
    use crate::residual::exact_fbs_residual;
    use crate::vector::norm;

    #[test]
    fn optimistic_gradient_scalar_by_hand() {
        let p = scaled_identity(1, vec![1.0]);
        let mut rng = RunRng::new(0, 0);
        let mut og = OptimisticGradient::new(&p, 1.0, vec![1.0].into());
        og.step(&p, &mut rng).unwrap();
        assert_eq!(og.point()[0], 0.0);
        assert_eq!(og.oracle_calls(), 1);
        og.step(&p, &mut rng).unwrap();
        // x² = x¹ − (2·0 − 1)
        assert_eq!(og.point()[0], 1.0);
        assert_eq!(og.oracle_calls(), 2);
    }

    #[test]
    fn halpern_anchor_weight() {
        assert_eq!(VrHalpern::anchor_weight(0), 0.5);
        assert_eq!(VrHalpern::anchor_weight(6), 0.2);
    }

    fn all(problem: &GeProblem, x0: &DenseVector, rng: &mut RunRng) -> Vec<Box<dyn Solver>> {
        let l = problem.lipschitz();
        let cfg = EstimatorConfig::new(EstimatorKind::Lsvrg, 1.0, 0.5);
        vec![
            Box::new(OptimisticGradient::new(problem, 0.5 / l, x0.clone())),
            Box::new(Fkm::new(problem, 1.0 / l, 3.0, x0.clone())),
            Box::new(VrHalpern::new(problem, 0.5 / l, cfg.clone(), x0.clone(), rng).unwrap()),
            Box::new(VrEg::new(
                problem,
                0.99 * 0.5f64.sqrt() / l,
                cfg.clone(),
                x0.clone(),
            )),
            Box::new(VrFrbs::new(
                problem,
                0.99 * (1.0 - 0.5f64.sqrt()) / (2.0 * l),
                cfg,
                x0.clone(),
            )),
        ]
    }

    #[test]
    fn solution_is_stationary_for_exact_oracles() {
        let p = shifted(vec![1.0, 2.0, 3.0], vec![0.5, -1.0]);
        let xs = p.solution().unwrap().clone();
        let mut rng = RunRng::new(3, 0);
        for mut s in all(&p, &xs, &mut rng) {
            for _ in 0..10 {
                s.step(&p, &mut rng).unwrap();
            }
            assert!(max_dev(s.point(), &xs) < 1e-15);
        }
    }

    fn max_dev(a: &[f64], b: &[f64]) -> f64 {
        crate::vector::max_abs_diff(a, b)
    }

    #[test]
    fn every_baseline_reduces_the_residual() {
        let p = shifted(vec![0.5, 1.0, 1.5, 2.0], vec![1.0, -1.0, 0.5]);
        let x0: DenseVector = vec![4.0, 4.0, -4.0].into();
        let lam = 1.0 / p.lipschitz();
        let g0 = norm(&exact_fbs_residual(&p, &x0, lam).unwrap());
        let mut rng = RunRng::new(8, 0);
        for mut s in all(&p, &x0, &mut rng) {
            for _ in 0..300 {
                s.step(&p, &mut rng).unwrap();
            }
            let g = norm(&exact_fbs_residual(&p, s.point(), lam).unwrap());
            // the anchored method is only O(1/k)
            assert!(g < 5e-2 * g0, "{g} vs {g0}");
        }
    }

    #[test]
    fn loopless_cost_accounting() {
        let p = shifted(vec![1.0; 10], vec![0.0, 0.0]);
        let cfg = EstimatorConfig::new(EstimatorKind::Lsvrg, 2.0, 1.0);
        let mut rng = RunRng::new(0, 0);
        let mut eg = VrEg::new(&p, 0.5, cfg.clone(), vec![1.0, 1.0].into());
        let mut fr = VrFrbs::new(&p, 0.1, cfg, vec![1.0, 1.0].into());
        eg.step(&p, &mut rng).unwrap();
        fr.step(&p, &mut rng).unwrap();
        // initial pass + two minibatches of 2 + forced refresh
        assert_eq!(eg.oracle_calls(), 10 + 4 + 10);
        assert_eq!(fr.oracle_calls(), 10 + 4 + 10);
        assert_eq!(eg.resolvent_calls(), 2);
        assert_eq!(fr.resolvent_calls(), 1);
    }
}
