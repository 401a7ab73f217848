//! Variance-reduced estimators `F̃ᵏ ≈ Fxᵏ`.
//!
//! All five kinds share one state type. Minibatches are drawn i.i.d. uniform
//! with replacement; when `bₖ ≥ n` the whole index set is used once instead, so
//! a full batch is exact.
//!
//! * L-SVRG: `F̄x̃ᵏ + F_S xᵏ − F_S x̃ᵏ`. Before the estimate a coin with
//!   probability `pₖ` moves the snapshot to `xᵏ⁻¹` and recomputes `F̄x̃ᵏ`.
//! * SAGA: `mean(table) + F_S xᵏ − mean(table_S)`, then rows in `S` are
//!   overwritten with `Fᵢxᵏ`.
//! * L-SARAH: with probability `pₖ` the full `Fxᵏ`, otherwise
//!   `F̃ᵏ⁻¹ + F_S xᵏ − F_S xᵏ⁻¹`.
//! * HSGD: `(1 − τₖ)[F̃ᵏ⁻¹ + F_S xᵏ − F_S xᵏ⁻¹] + τₖ F̄xᵏ`, where `F̄xᵏ` reuses
//!   `S` unless a separate batch size is configured.

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{config, Result, VfosaError};
use crate::problem::GeProblem;
use crate::rng::RunRng;
use crate::vector::DenseVector;

/// Lower clamp on probabilities.
pub const P_FLOOR: f64 = 1e-6;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EstimatorKind {
    FullBatch,
    Lsvrg,
    Saga,
    Lsarah,
    Hsgd,
}

impl EstimatorKind {
    pub fn name(self) -> &'static str {
        match self {
            EstimatorKind::FullBatch => "full_batch",
            EstimatorKind::Lsvrg => "lsvrg",
            EstimatorKind::Saga => "saga",
            EstimatorKind::Lsarah => "lsarah",
            EstimatorKind::Hsgd => "hsgd",
        }
    }
}

/// A real-valued sequence indexed by the iteration counter.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "form", rename_all = "snake_case")]
pub enum Schedule {
    Const {
        value: f64,
    },
    /// `base + coeff·μ/(μ(k + r − 1) − 1)` for `k ≤ k0`, `tail` afterwards.
    Decaying {
        base: f64,
        coeff: f64,
        mu: f64,
        r: f64,
        k0: u64,
        tail: f64,
    },
    /// `1 − √((1 − θ) t_{k−1}(t_{k−1} − 1) / (tₖ(tₖ − 1)))` with `tₖ = μ(k + r)`.
    HybridWeight {
        mu: f64,
        r: f64,
        theta: f64,
    },
}

impl Schedule {
    pub fn constant(value: f64) -> Self {
        Schedule::Const { value }
    }

    pub fn eval(&self, k: u64) -> f64 {
        match *self {
            Schedule::Const { value } => value,
            Schedule::Decaying {
                base,
                coeff,
                mu,
                r,
                k0,
                tail,
            } => {
                if k <= k0 {
                    base + coeff * mu / (mu * (k as f64 + r - 1.0) - 1.0)
                } else {
                    tail
                }
            }
            Schedule::HybridWeight { mu, r, theta } => {
                let t = mu * (k as f64 + r);
                let tp = mu * (k as f64 - 1.0 + r);
                1.0 - ((1.0 - theta) * tp * (tp - 1.0) / (t * (t - 1.0))).sqrt()
            }
        }
    }

    /// Multiplies every branch of the schedule by `factor`.
    pub fn scaled(self, factor: f64) -> Self {
        match self {
            Schedule::Const { value } => Schedule::Const {
                value: value * factor,
            },
            Schedule::Decaying {
                base,
                coeff,
                mu,
                r,
                k0,
                tail,
            } => Schedule::Decaying {
                base: base * factor,
                coeff: coeff * factor,
                mu,
                r,
                k0,
                tail: tail * factor,
            },
            Schedule::HybridWeight { .. } => self,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EstimatorConfig {
    pub kind: EstimatorKind,
    /// Minibatch size `bₖ`, floored and clamped to `[1, n]`.
    pub batch: Schedule,
    /// Refresh probability `pₖ`, clamped to `[1e-6, 1]`.
    pub probability: Schedule,
    /// HSGD weight `τₖ`, clamped to `[0, 1]`.
    pub tau: Schedule,
    /// HSGD `θ`, recorded for reporting.
    pub theta: Option<f64>,
    /// Mega-batch size replacing full passes (expectation setting).
    pub mega_batch: Option<Schedule>,
    /// Separate batch size for the HSGD `F̄xᵏ` term.
    pub hybrid_batch: Option<Schedule>,
    /// Analysis constant, carried for reporting only.
    pub alpha: f64,
}

impl EstimatorConfig {
    pub fn new(kind: EstimatorKind, batch: f64, probability: f64) -> Self {
        Self {
            kind,
            batch: Schedule::constant(batch),
            probability: Schedule::constant(probability),
            tau: Schedule::constant(0.0),
            theta: None,
            mega_batch: None,
            hybrid_batch: None,
            alpha: 0.5,
        }
    }

    pub fn full_batch() -> Self {
        Self::new(EstimatorKind::FullBatch, f64::INFINITY, 1.0)
    }

    pub fn batch_size(&self, k: u64, n: usize) -> usize {
        clamp_batch(self.batch.eval(k), n)
    }

    pub fn probability_at(&self, k: u64) -> f64 {
        let p = self.probability.eval(k);
        if p.is_nan() {
            1.0
        } else {
            p.clamp(P_FLOOR, 1.0)
        }
    }

    pub fn tau_at(&self, k: u64) -> f64 {
        let t = self.tau.eval(k);
        if t.is_nan() {
            1.0
        } else {
            t.clamp(0.0, 1.0)
        }
    }

    /// Halves both `pₖ` and `bₖ`.
    pub fn halved(mut self) -> Self {
        self.batch = self.batch.scaled(0.5);
        self.probability = self.probability.scaled(0.5);
        self
    }
}

fn clamp_batch(b: f64, n: usize) -> usize {
    if b.is_nan() || b >= n as f64 {
        n
    } else if b < 1.0 {
        1
    } else {
        b.floor() as usize
    }
}

/// Constants of the batch/probability schedules.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ScheduleConstants {
    pub c_p: f64,
    pub c_b: f64,
    pub r: f64,
    pub mu: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct BuiltSchedule {
    pub config: EstimatorConfig,
    /// Violated lower bounds on `n^ω` or `r`; the schedule is still usable.
    pub warnings: Vec<String>,
}

/// Theory schedules: piecewise `pₖ` (L-SVRG, L-SARAH), piecewise `bₖ` (SAGA),
/// and the hybrid weight `τₖ` with `θ = 1/n` (HSGD).
pub fn build_schedule(
    kind: EstimatorKind,
    n: usize,
    omega: f64,
    c: ScheduleConstants,
) -> Result<BuiltSchedule> {
    if n == 0 {
        return Err(config("schedule needs n >= 1"));
    }
    if !(c.mu > 0.0 && c.mu < 2.0 / 3.0) {
        return Err(config(format!("schedule needs 0 < mu < 2/3, got {}", c.mu)));
    }
    let nf = n as f64;
    let nw = nf.powf(omega);
    let mu = c.mu;
    let r = c.r;
    let lead = mu * (r - 1.0) - 1.0;
    let mut warnings = Vec::new();
    let floor_k0 = |v: f64| if v <= 0.0 { 0 } else { floor_tol(v) as u64 };
    let config = match kind {
        EstimatorKind::FullBatch => EstimatorConfig::full_batch(),
        EstimatorKind::Lsvrg => {
            if r <= 5.0 + 1.0 / mu {
                warnings.push(format!("r = {r} violates r > 5 + 1/mu"));
            }
            let need = (2.0 * lead / (mu * (r - 5.0) - 1.0)).max(lead / (4.0 * mu)) / c.c_p;
            if nw < need {
                warnings.push(format!("n^omega = {nw} below required {need}"));
            }
            let mut cfg = EstimatorConfig::new(kind, floor_tol(c.c_b * nw * nw), 1.0);
            cfg.probability = Schedule::Decaying {
                base: 2.0 / (c.c_p * nw),
                coeff: 4.0,
                mu,
                r,
                k0: floor_k0(4.0 * c.c_p * nw - r + 1.0 + 1.0 / mu),
                tail: 3.0 / (c.c_p * nw),
            };
            cfg
        }
        EstimatorKind::Saga => {
            if r <= 5.0 + 1.0 / mu {
                warnings.push(format!("r = {r} violates r > 5 + 1/mu"));
            }
            let n13 = nf.cbrt();
            let need = (2.0 * c.c_b * lead / (mu * (r - 5.0) - 1.0)).max(lead / (4.0 * mu));
            if n13 < need {
                warnings.push(format!("n^(1/3) = {n13} below required {need}"));
            }
            let mut cfg = EstimatorConfig::new(kind, 1.0, 1.0);
            cfg.batch = Schedule::Decaying {
                base: 2.0 * c.c_b * n13 * n13,
                coeff: 4.0 * nf,
                mu,
                r,
                k0: floor_k0(4.0 * n13 + 1.0 + 1.0 / mu - r),
                tail: 3.0 * c.c_b * n13 * n13,
            };
            cfg
        }
        EstimatorKind::Lsarah => {
            if r <= 3.0 + 1.0 / mu {
                warnings.push(format!("r = {r} violates r > 3 + 1/mu"));
            }
            let need = (lead / (mu * (r - 3.0) - 1.0)).max(lead / (2.0 * mu)) / c.c_p;
            if nw < need {
                warnings.push(format!("n^omega = {nw} below required {need}"));
            }
            let mut cfg = EstimatorConfig::new(kind, floor_tol(c.c_b * nw), 1.0);
            cfg.probability = Schedule::Decaying {
                base: 1.0 / (c.c_p * nw),
                coeff: 2.0,
                mu,
                r,
                k0: floor_k0(2.0 * c.c_p * nw - r + 1.0 + 1.0 / mu),
                tail: 2.0 / (c.c_p * nw),
            };
            cfg
        }
        EstimatorKind::Hsgd => {
            if r < 5.0 + 1.0 / mu {
                warnings.push(format!("r = {r} violates r >= 5 + 1/mu"));
            }
            hybrid(n, floor_tol(c.c_b * nw), mu, r)
        }
    };
    for w in &warnings {
        log::warn!("{} schedule: {w}", kind.name());
    }
    Ok(BuiltSchedule {
        config: deterministic_if_full(config, n),
        warnings,
    })
}

/// `⌊v⌋` that does not drop a unit when `v` is an integer up to rounding.
fn floor_tol(v: f64) -> f64 {
    (v * (1.0 + 1e-12)).floor()
}

/// A batch covering every component makes the estimator exact, so refreshes
/// are forced on.
fn deterministic_if_full(mut cfg: EstimatorConfig, n: usize) -> EstimatorConfig {
    if let Schedule::Const { value } = cfg.batch {
        if clamp_batch(value, n) == n {
            cfg.probability = Schedule::constant(1.0);
        }
    }
    cfg
}

fn hybrid(n: usize, batch: f64, mu: f64, r: f64) -> EstimatorConfig {
    let theta = 1.0 / n as f64;
    let mut cfg = EstimatorConfig::new(EstimatorKind::Hsgd, batch, 1.0);
    cfg.tau = Schedule::HybridWeight { mu, r, theta };
    cfg.theta = Some(theta);
    cfg
}

/// Practical presets: L-SVRG/SAGA `pₖ = 1/(2n^{1/3})`, `b = ⌊n^{2/3}/2⌋`;
/// L-SARAH `pₖ = 1/(2√n)`, `b = ⌊√n/2⌋`; HSGD `θ = 1/n`, `b = ⌊√n/2⌋`.
/// `mu` and `r` must match the solver's `tₖ` for the HSGD weight.
pub fn practical_preset(kind: EstimatorKind, n: usize, mu: f64, r: f64) -> EstimatorConfig {
    let nf = n as f64;
    let n13 = nf.cbrt();
    let half_sqrt = (nf.sqrt() / 2.0).floor();
    let cfg = match kind {
        EstimatorKind::FullBatch => EstimatorConfig::full_batch(),
        EstimatorKind::Lsvrg | EstimatorKind::Saga => {
            EstimatorConfig::new(kind, (n13 * n13 / 2.0).floor(), 1.0 / (2.0 * n13))
        }
        EstimatorKind::Lsarah => EstimatorConfig::new(kind, half_sqrt, 1.0 / (2.0 * nf.sqrt())),
        EstimatorKind::Hsgd => hybrid(n, half_sqrt, mu, r),
    };
    deterministic_if_full(cfg, n)
}

/// I.i.d. uniform indices with replacement, or every index once when
/// `size >= n`.
pub fn sample_batch(size: usize, n: usize, rng: &mut ChaCha8Rng, out: &mut Vec<usize>) {
    out.clear();
    if size >= n {
        out.extend(0..n);
    } else {
        out.extend((0..size).map(|_| rng.random_range(0..n)));
    }
}

/// Mutable estimator state: snapshot, SAGA table, running estimate and the
/// oracle counter (one unit per `Fᵢ` evaluation).
#[derive(Clone, Debug)]
pub struct VrEstimator {
    config: EstimatorConfig,
    n: usize,
    dim: usize,
    initialized: bool,
    snapshot_x: DenseVector,
    snapshot_f: DenseVector,
    table: Vec<f64>,
    table_mean: DenseVector,
    prev_estimate: DenseVector,
    oracle_calls: u64,
    refreshes: u64,
    batch: Vec<usize>,
}

impl VrEstimator {
    pub fn new(config: EstimatorConfig, problem: &GeProblem) -> Self {
        let (n, dim) = (problem.n(), problem.dim());
        Self {
            config,
            n,
            dim,
            initialized: false,
            snapshot_x: DenseVector::zeros(dim),
            snapshot_f: DenseVector::zeros(dim),
            table: Vec::new(),
            table_mean: DenseVector::zeros(dim),
            prev_estimate: DenseVector::zeros(dim),
            oracle_calls: 0,
            refreshes: 0,
            batch: Vec::new(),
        }
    }

    pub fn config(&self) -> &EstimatorConfig {
        &self.config
    }

    pub fn oracle_calls(&self) -> u64 {
        self.oracle_calls
    }

    /// Number of full (or mega-batch) refreshes after initialization.
    pub fn refreshes(&self) -> u64 {
        self.refreshes
    }

    pub fn snapshot(&self) -> &DenseVector {
        &self.snapshot_x
    }

    pub fn table_row(&self, i: usize) -> &[f64] {
        &self.table[i * self.dim..(i + 1) * self.dim]
    }

    pub fn table_mean(&self) -> &DenseVector {
        &self.table_mean
    }

    pub fn last_batch(&self) -> &[usize] {
        &self.batch
    }

    /// Full pass at `x⁰` (or a mega-batch), seeding every kind's state.
    pub fn initialize(&mut self, problem: &GeProblem, x0: &[f64], rng: &mut RunRng) -> Result<()> {
        if x0.len() != self.dim {
            return Err(VfosaError::Dimension {
                expected: self.dim,
                got: x0.len(),
            });
        }
        let f0 = if self.config.kind == EstimatorKind::Saga {
            let mut table = vec![0.0; self.n * self.dim];
            let op = problem.operator();
            for (i, row) in table.chunks_mut(self.dim).enumerate() {
                op.accumulate_component(i, x0, 1.0, row);
            }
            self.oracle_calls += self.n as u64;
            let inv_n = 1.0 / self.n as f64;
            let mut mean = DenseVector::zeros(self.dim);
            for row in table.chunks(self.dim) {
                mean.iter_mut().zip(row).for_each(|(m, v)| *m += v * inv_n);
            }
            self.table = table;
            self.table_mean = mean.clone();
            mean
        } else {
            self.reference_f(problem, x0, 0, rng)
        };
        self.snapshot_x = DenseVector::from(x0);
        self.snapshot_f = f0.clone();
        self.prev_estimate = f0;
        self.initialized = true;
        Ok(())
    }

    /// Full `F x`, or a mega-batch mean in the expectation setting.
    fn reference_f(
        &mut self,
        problem: &GeProblem,
        x: &[f64],
        k: u64,
        rng: &mut RunRng,
    ) -> DenseVector {
        match self.config.mega_batch {
            None => {
                self.oracle_calls += self.n as u64;
                problem.full(x)
            }
            Some(s) => {
                let m = clamp_batch(s.eval(k), usize::MAX);
                let idx: Vec<usize> = (0..m).map(|_| rng.batch.random_range(0..self.n)).collect();
                let mut out = DenseVector::zeros(self.dim);
                problem.batch_mean(&idx, x, &mut out);
                self.oracle_calls += m as u64;
                out
            }
        }
    }

    fn draw_batch(&mut self, size: usize, rng: &mut ChaCha8Rng) {
        sample_batch(size, self.n, rng, &mut self.batch);
    }

    fn batch_mean(&mut self, problem: &GeProblem, x: &[f64]) -> DenseVector {
        let mut out = DenseVector::zeros(self.dim);
        problem.batch_mean(&self.batch, x, &mut out);
        self.oracle_calls += self.batch.len() as u64;
        out
    }

    /// `prev + (F_S a − F_S b)`; shared by L-SARAH and HSGD so that their
    /// recursions agree bitwise.
    fn recursive_term(
        &mut self,
        problem: &GeProblem,
        x: &[f64],
        x_prev: &[f64],
    ) -> (DenseVector, DenseVector) {
        let fa = self.batch_mean(problem, x);
        let fb = self.batch_mean(problem, x_prev);
        let est = self
            .prev_estimate
            .iter()
            .zip(fa.iter().zip(fb.iter()))
            .map(|(p, (a, b))| p + (a - b))
            .collect();
        (est, fa)
    }

    /// Returns `F̃ᵏ`. At `k = 0` this is the initialization value `F x⁰`.
    pub fn estimate(
        &mut self,
        problem: &GeProblem,
        k: u64,
        x: &[f64],
        x_prev: &[f64],
        rng: &mut RunRng,
    ) -> Result<DenseVector> {
        if !self.initialized {
            return Err(VfosaError::State(
                "estimator used before initialization".into(),
            ));
        }
        if x.len() != self.dim || x_prev.len() != self.dim {
            return Err(VfosaError::Dimension {
                expected: self.dim,
                got: x.len().min(x_prev.len()),
            });
        }
        if k == 0 {
            return Ok(self.prev_estimate.clone());
        }
        let b = self.config.batch_size(k, self.n);
        let est = match self.config.kind {
            EstimatorKind::FullBatch => self.reference_f(problem, x, k, rng),
            EstimatorKind::Lsvrg => {
                let p = self.config.probability_at(k);
                if rng.coin.random::<f64>() < p {
                    self.snapshot_x = DenseVector::from(x_prev);
                    let snap = self.snapshot_x.clone();
                    self.snapshot_f = self.reference_f(problem, &snap, k, rng);
                    self.refreshes += 1;
                }
                self.draw_batch(b, &mut rng.batch);
                let fa = self.batch_mean(problem, x);
                let snap = self.snapshot_x.clone();
                let fs = self.batch_mean(problem, &snap);
                self.snapshot_f
                    .iter()
                    .zip(fa.iter().zip(fs.iter()))
                    .map(|(s, (a, c))| s + (a - c))
                    .collect()
            }
            EstimatorKind::Saga => self.saga_step(problem, b, x, rng),
            EstimatorKind::Lsarah => {
                let p = self.config.probability_at(k);
                if rng.coin.random::<f64>() < p {
                    self.refreshes += 1;
                    self.reference_f(problem, x, k, rng)
                } else {
                    self.draw_batch(b, &mut rng.batch);
                    self.recursive_term(problem, x, x_prev).0
                }
            }
            EstimatorKind::Hsgd => {
                let tau = self.config.tau_at(k);
                self.draw_batch(b, &mut rng.batch);
                let (sarah, fa) = self.recursive_term(problem, x, x_prev);
                let unbiased = match self.config.hybrid_batch {
                    Some(s) if tau > 0.0 => {
                        let hb = clamp_batch(s.eval(k), self.n);
                        self.draw_batch(hb, &mut rng.batch);
                        self.batch_mean(problem, x)
                    }
                    _ => fa,
                };
                if tau == 0.0 {
                    sarah
                } else if tau == 1.0 {
                    unbiased
                } else {
                    sarah
                        .iter()
                        .zip(unbiased.iter())
                        .map(|(s, u)| (1.0 - tau) * s + tau * u)
                        .collect()
                }
            }
        };
        self.prev_estimate = est.clone();
        Ok(est)
    }

    /// The estimate a step would return for the minibatch `batch` if no
    /// refresh fired, leaving the state untouched. Used to take expectations
    /// over every possible batch of a frozen state.
    pub fn frozen_estimate(
        &self,
        problem: &GeProblem,
        k: u64,
        x: &[f64],
        x_prev: &[f64],
        batch: &[usize],
    ) -> Result<DenseVector> {
        if !self.initialized {
            return Err(VfosaError::State(
                "estimator used before initialization".into(),
            ));
        }
        if x.len() != self.dim || x_prev.len() != self.dim {
            return Err(VfosaError::Dimension {
                expected: self.dim,
                got: x.len().min(x_prev.len()),
            });
        }
        if batch.is_empty() || batch.iter().any(|&i| i >= self.n) {
            return Err(config(format!(
                "batch must be nonempty with indices below {}",
                self.n
            )));
        }
        let mean = |at: &[f64]| {
            let mut out = DenseVector::zeros(self.dim);
            problem.batch_mean(batch, at, &mut out);
            out
        };
        let combine = |base: &DenseVector, a: &DenseVector, b: &DenseVector| -> DenseVector {
            base.iter()
                .zip(a.iter().zip(b.iter()))
                .map(|(s, (a, b))| s + (a - b))
                .collect()
        };
        Ok(match self.config.kind {
            EstimatorKind::FullBatch => problem.full(x),
            EstimatorKind::Lsvrg => combine(&self.snapshot_f, &mean(x), &mean(&self.snapshot_x)),
            EstimatorKind::Saga => {
                let w = 1.0 / batch.len() as f64;
                let mut stored = DenseVector::zeros(self.dim);
                for &i in batch {
                    stored
                        .iter_mut()
                        .zip(self.table_row(i))
                        .for_each(|(s, v)| *s += w * v);
                }
                combine(&self.table_mean, &mean(x), &stored)
            }
            EstimatorKind::Lsarah => combine(&self.prev_estimate, &mean(x), &mean(x_prev)),
            EstimatorKind::Hsgd => {
                let tau = self.config.tau_at(k);
                let fa = mean(x);
                let sarah = combine(&self.prev_estimate, &fa, &mean(x_prev));
                sarah
                    .iter()
                    .zip(fa.iter())
                    .map(|(s, u)| (1.0 - tau) * s + tau * u)
                    .collect()
            }
        })
    }

    fn saga_step(
        &mut self,
        problem: &GeProblem,
        b: usize,
        x: &[f64],
        rng: &mut RunRng,
    ) -> DenseVector {
        self.draw_batch(b, &mut rng.batch);
        let dim = self.dim;
        let w = 1.0 / self.batch.len() as f64;
        let op = problem.operator();
        let mut fresh_mean = DenseVector::zeros(dim);
        let mut stored_mean = DenseVector::zeros(dim);
        let mut fresh = vec![0.0; self.batch.len() * dim];
        for (j, &i) in self.batch.iter().enumerate() {
            let row = &mut fresh[j * dim..(j + 1) * dim];
            op.accumulate_component(i, x, 1.0, row);
            for d in 0..dim {
                fresh_mean[d] += w * row[d];
                stored_mean[d] += w * self.table[i * dim + d];
            }
        }
        self.oracle_calls += self.batch.len() as u64;
        let est: DenseVector = self
            .table_mean
            .iter()
            .zip(fresh_mean.iter().zip(stored_mean.iter()))
            .map(|(m, (a, s))| m + (a - s))
            .collect();
        let inv_n = 1.0 / self.n as f64;
        for (j, &i) in self.batch.iter().enumerate() {
            for d in 0..dim {
                let new = fresh[j * dim + d];
                let old = std::mem::replace(&mut self.table[i * dim + d], new);
                self.table_mean[d] += (new - old) * inv_n;
            }
        }
        est
    }
}
