//! Self-checks behind `vfosa validate`. Each check is exact or uses a
//! seed-independent tolerance, so the pass set does not depend on the seed.

use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::checks::{
    check_cocoercivity, check_residual_cocoercivity, check_resolvent_nonexpansive, PairSampler,
};
use crate::constants::compute_split_constants;
use crate::data::{make_ambiguous, SparseDataset};
use crate::error::Result;
use crate::estimators::{EstimatorConfig, EstimatorKind, VrEstimator, P_FLOOR};
use crate::problem::GeProblem;
use crate::problems::{
    build_logistic_minimax, build_matrix_game, build_synthetic_linear, LinearShift, MatrixGameSpec,
    RegKind, SyntheticLinearSpec,
};
use crate::prox::{project_simplex, prox_scad, SCAD_A};
use crate::residual::exact_fbs_residual;
use crate::rng::RunRng;
use crate::solvers::{run_solver, AccelParams, InitialPoint, Method, RunSpec};
use crate::vector::{dot, max_abs_diff, norm_sq, sub};

/// `β̄` as a function of `(λ, L̂, ρ)`.
pub type BetaBarFormula = fn(f64, f64, f64) -> f64;

#[derive(Clone, Copy, Debug)]
pub struct ValidateOptions {
    pub seed: u64,
    /// Replaces the library `β̄` in the residual inequality checks. Lets tests
    /// confirm that a wrong formula is caught.
    pub beta_bar_override: Option<BetaBarFormula>,
}

impl Default for ValidateOptions {
    fn default() -> Self {
        Self {
            seed: 0,
            beta_bar_override: None,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct CheckOutcome {
    pub name: &'static str,
    pub passed: bool,
    pub detail: String,
}

fn outcome(name: &'static str, passed: bool, detail: String) -> CheckOutcome {
    CheckOutcome {
        name,
        passed,
        detail,
    }
}

fn logistic(seed: u64, reg: RegKind) -> Result<GeProblem> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let ds = SparseDataset::synthetic(60, 7, &mut rng)?.preprocess();
    let amb = make_ambiguous(&ds, 4, 0.05, &mut rng)?;
    build_logistic_minimax(Arc::new(amb), &ds.labels, reg, 5e-3)
}

fn game(seed: u64, p1: usize, samples: usize) -> Result<GeProblem> {
    Ok(build_matrix_game(
        &MatrixGameSpec::new(p1, samples),
        &mut ChaCha8Rng::seed_from_u64(seed),
    )?
    .0)
}

fn residual_inequality(
    name: &'static str,
    problem: &GeProblem,
    zeta: f64,
    lambda: f64,
    opts: &ValidateOptions,
) -> Result<CheckOutcome> {
    let mut c = compute_split_constants(problem.lipschitz(), problem.rho(), zeta, Some(lambda))?;
    if let Some(f) = opts.beta_bar_override {
        c.beta_bar = f(c.lambda, c.l_hat, problem.rho());
    }
    let r = check_residual_cocoercivity(problem, &c, PairSampler::new(1000, opts.seed));
    Ok(outcome(
        name,
        r.min_slack >= -1e-8,
        format!("min slack {:.3e} over {} pairs", r.min_slack, r.pairs),
    ))
}

fn inequality_monotone(opts: &ValidateOptions) -> Result<CheckOutcome> {
    let p = logistic(opts.seed, RegKind::L1)?;
    let l = p.lipschitz();
    residual_inequality(
        "residual inequality, monotone logistic",
        &p,
        0.05 * l,
        1.0 / (1.05 * l),
        opts,
    )
}

/// `L = 1`, `ρ = 0.5` and `λ = 2ρ`.
fn inequality_hypomonotone(opts: &ValidateOptions) -> Result<CheckOutcome> {
    let f: Vec<f64> = (0..8).map(|k| 0.1 + 0.9 * k as f64 / 7.0).collect();
    let t = vec![-2.0, -2.5, -4.0, 0.5, 1.0, 1.5, 2.0, 3.0];
    let mut spec = SyntheticLinearSpec::new(f, t);
    spec.shift = LinearShift::Random { scale: 1.0 };
    let p = build_synthetic_linear(&spec, &mut ChaCha8Rng::seed_from_u64(opts.seed))?;
    residual_inequality(
        "residual inequality, co-hypomonotone linear",
        &p,
        0.0,
        2.0 * p.rho(),
        opts,
    )
}

fn cocoercive_logistic(opts: &ValidateOptions) -> Result<CheckOutcome> {
    let p = logistic(opts.seed, RegKind::L1)?;
    let r = check_cocoercivity(&p, PairSampler::new(1000, opts.seed));
    Ok(outcome(
        "average co-coercivity, logistic",
        r.min_margin >= -1e-8,
        format!("min margin {:.3e}", r.min_margin),
    ))
}

fn nonexpansive(opts: &ValidateOptions) -> Result<CheckOutcome> {
    let a = check_resolvent_nonexpansive(
        &logistic(opts.seed, RegKind::L1)?,
        0.7,
        PairSampler::new(500, opts.seed),
    );
    let b = check_resolvent_nonexpansive(
        &game(opts.seed, 6, 3)?,
        1.0,
        PairSampler::new(500, opts.seed),
    );
    let worst = a.max_ratio.max(b.max_ratio);
    Ok(outcome(
        "resolvent nonexpansive, l1 and simplex blocks",
        worst <= 1.0 + 1e-12,
        format!("max ratio {worst:.15}"),
    ))
}

fn strong_monotone_game(opts: &ValidateOptions) -> Result<CheckOutcome> {
    let p = game(opts.seed, 8, 5)?;
    let eps = crate::problems::GAME_EPSILON;
    let worst = PairSampler::new(500, opts.seed)
        .draw(&p)
        .iter()
        .map(|(x, y)| {
            let d = sub(x, y);
            dot(&sub(&p.full(x), &p.full(y)), &d) - eps * norm_sq(&d)
        })
        .fold(f64::INFINITY, f64::min);
    Ok(outcome(
        "matrix game strong monotonicity",
        worst >= -1e-12,
        format!("min slack {worst:.3e}"),
    ))
}

/// Frozen state after a few steps, then the mean over all `n` single-index
/// batches against `Fx`.
fn enumeration(kind: EstimatorKind, opts: &ValidateOptions) -> Result<f64> {
    let p = game(opts.seed, 3, 4)?;
    let mut rng = RunRng::new(opts.seed, 0);
    let mut pts = ChaCha8Rng::seed_from_u64(opts.seed ^ 0x9e37);
    let mut point = || -> Vec<f64> { (0..p.dim()).map(|_| pts.random_range(-1.0..1.0)).collect() };
    let mut e = VrEstimator::new(EstimatorConfig::new(kind, 1.0, P_FLOOR), &p);
    let mut prev = point();
    e.initialize(&p, &prev, &mut rng)?;
    for k in 1..4 {
        let x = point();
        e.estimate(&p, k, &x, &prev, &mut rng)?;
        prev = x;
    }
    let x = point();
    let mut mean = vec![0.0; p.dim()];
    for i in 0..p.n() {
        let est = e.frozen_estimate(&p, 4, &x, &prev, &[i])?;
        mean.iter_mut()
            .zip(est.iter())
            .for_each(|(m, v)| *m += v / p.n() as f64);
    }
    Ok(max_abs_diff(&mean, &p.full(&x)))
}

fn unbiased(opts: &ValidateOptions) -> Result<Vec<CheckOutcome>> {
    [
        (EstimatorKind::Lsvrg, "L-SVRG unbiased by enumeration"),
        (EstimatorKind::Saga, "SAGA unbiased by enumeration"),
    ]
    .into_iter()
    .map(|(kind, name)| {
        let err = enumeration(kind, opts)?;
        Ok(outcome(
            name,
            err <= 1e-12,
            format!("max |E[F~] - Fx| = {err:.3e}"),
        ))
    })
    .collect()
}

fn sarah_full_batch(opts: &ValidateOptions) -> Result<CheckOutcome> {
    let p = game(opts.seed, 4, 6)?;
    let mut rng = RunRng::new(opts.seed, 0);
    let mut pts = ChaCha8Rng::seed_from_u64(opts.seed);
    let mut e = VrEstimator::new(
        EstimatorConfig::new(EstimatorKind::Lsarah, 6.0, P_FLOOR),
        &p,
    );
    let mut prev: Vec<f64> = (0..p.dim()).map(|_| pts.random_range(-1.0..1.0)).collect();
    e.initialize(&p, &prev, &mut rng)?;
    let mut worst = 0.0f64;
    for k in 1..30 {
        let x: Vec<f64> = (0..p.dim()).map(|_| pts.random_range(-1.0..1.0)).collect();
        let est = e.estimate(&p, k, &x, &prev, &mut rng)?;
        worst = worst.max(max_abs_diff(&est, &p.full(&x)));
        prev = x;
    }
    Ok(outcome(
        "L-SARAH full batch is exact",
        worst <= 1e-12,
        format!("max error {worst:.3e}"),
    ))
}

fn hsgd_reduces_to_sarah(opts: &ValidateOptions) -> Result<CheckOutcome> {
    let p = game(opts.seed, 5, 16)?;
    let c = compute_split_constants(p.lipschitz(), 0.0, 0.0, Some(1.0 / p.lipschitz()))?;
    let params = AccelParams::theory(&c, None, None)?;
    let run = |est: EstimatorConfig| -> Result<Vec<(u64, u64, u64)>> {
        let mut spec = RunSpec::new(Method::VfosaPlus { params }, est, c.lambda, 20.0);
        spec.seed = opts.seed;
        spec.metric_every = Some(1);
        spec.init = InitialPoint::Constant { value: 0.1 };
        Ok(run_solver(&p, &spec)?.trace.numeric_columns())
    };
    let hsgd = run(EstimatorConfig::new(EstimatorKind::Hsgd, 3.0, 1.0))?;
    let sarah = run(EstimatorConfig::new(EstimatorKind::Lsarah, 3.0, 0.0))?;
    Ok(outcome(
        "HSGD with tau = 0 equals L-SARAH",
        hsgd == sarah,
        format!("{} rows compared", hsgd.len()),
    ))
}

fn scad_objective(t: f64, x: f64, step: f64, w: f64, a: f64) -> f64 {
    let s = t.abs();
    let pen = if s <= w {
        w * s
    } else if s <= a * w {
        (2.0 * a * w * s - s * s - w * w) / (2.0 * (a - 1.0))
    } else {
        (a + 1.0) * w * w / 2.0
    };
    0.5 * (t - x) * (t - x) + step * pen
}

/// Grid minimum over `[−2, 2]` at spacing `1e-4`, refined at `1e-6` around the
/// best grid point.
fn scad_grid(x: f64, step: f64, w: f64, a: f64) -> f64 {
    let argmin = |lo: f64, h: f64, count: usize| {
        (0..=count)
            .map(|k| lo + k as f64 * h)
            .map(|t| (t, scad_objective(t, x, step, w, a)))
            .fold(
                (0.0, f64::INFINITY),
                |best, c| if c.1 < best.1 { c } else { best },
            )
            .0
    };
    let coarse = argmin(-2.0, 1e-4, 40_000);
    argmin(coarse - 1e-4, 1e-6, 200)
}

/// Exact projection by enumerating supports: on support `S` the minimizer is
/// `v_S − (Σv_S − 1)/|S|`, kept when nonnegative.
fn simplex_brute(v: &[f64]) -> Vec<f64> {
    let n = v.len();
    let mut best = (f64::INFINITY, vec![0.0; n]);
    for mask in 1u32..(1 << n) {
        let idx: Vec<usize> = (0..n).filter(|i| mask >> i & 1 == 1).collect();
        let shift = (idx.iter().map(|&i| v[i]).sum::<f64>() - 1.0) / idx.len() as f64;
        let mut x = vec![0.0; n];
        for &i in &idx {
            x[i] = v[i] - shift;
        }
        if x.iter().all(|&t| t >= -1e-15) {
            let d = norm_sq(&sub(&x, v));
            if d < best.0 {
                best = (d, x);
            }
        }
    }
    best.1
}

fn prox_oracles(opts: &ValidateOptions) -> Result<Vec<CheckOutcome>> {
    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
    let mut scad_err = 0.0f64;
    let mut simplex_err = 0.0f64;
    for _ in 0..100 {
        let d = rng.random_range(1..=4);
        let x: Vec<f64> = (0..d).map(|_| rng.random_range(-1.5..1.5)).collect();
        let step = rng.random_range(0.05..2.0);
        let w = rng.random_range(0.01..0.5);
        let got = prox_scad(&x, step, w, SCAD_A)?;
        for (g, &xi) in got.iter().zip(&x) {
            scad_err = scad_err.max((g - scad_grid(xi, step, w, SCAD_A)).abs());
        }
        let v: Vec<f64> = (0..d + 1).map(|_| rng.random_range(-2.0..2.0)).collect();
        simplex_err = simplex_err.max(max_abs_diff(&project_simplex(&v)?, &simplex_brute(&v)));
    }
    Ok(vec![
        outcome(
            "SCAD prox against grid minimization",
            scad_err <= 2e-4,
            format!("max error {scad_err:.3e}"),
        ),
        outcome(
            "simplex projection against brute force",
            simplex_err <= 1e-6,
            format!("max error {simplex_err:.3e}"),
        ),
    ])
}

fn planted_residual(opts: &ValidateOptions) -> Result<CheckOutcome> {
    let mut spec = SyntheticLinearSpec::new(vec![0.5, 1.0, 2.0, 3.0], vec![0.1, 0.2, 0.3, 0.4]);
    spec.shift = LinearShift::PlantedUnit { s_scale: 1.0 };
    let p = build_synthetic_linear(&spec, &mut ChaCha8Rng::seed_from_u64(opts.seed))?;
    let g = match p.solution() {
        Some(x) => exact_fbs_residual(&p, x, 1.0 / p.lipschitz())?.norm(),
        None => f64::INFINITY,
    };
    Ok(outcome(
        "residual vanishes at the planted solution",
        g <= 1e-9,
        format!("|G x*| = {g:.3e}"),
    ))
}

fn error_bound(opts: &ValidateOptions) -> Result<CheckOutcome> {
    let p = logistic(opts.seed, RegKind::L1)?;
    let l = p.lipschitz();
    let c = compute_split_constants(l, 0.0, 0.0, Some(0.5 / l))?;
    let params = AccelParams::theory(&c, None, None)?;
    let mut spec = RunSpec::new(
        Method::VfosaPlus { params },
        EstimatorConfig::new(EstimatorKind::Lsvrg, 4.0, 0.1),
        c.lambda,
        20.0,
    );
    spec.seed = opts.seed;
    spec.debug = true;
    let slack = run_solver(&p, &spec)?
        .error_bound_min_slack
        .unwrap_or(f64::NEG_INFINITY);
    Ok(outcome(
        "estimator error bounds the residual error",
        slack >= -1e-12,
        format!("min slack {slack:.3e}"),
    ))
}

/// Runs every check. Setup errors are reported as failed checks.
pub fn run_checks(opts: &ValidateOptions) -> Vec<CheckOutcome> {
    type Check = fn(&ValidateOptions) -> Result<Vec<CheckOutcome>>;
    let checks: Vec<(&'static str, Check)> = vec![
        ("residual inequality, monotone logistic", |o| {
            Ok(vec![inequality_monotone(o)?])
        }),
        ("residual inequality, co-hypomonotone linear", |o| {
            Ok(vec![inequality_hypomonotone(o)?])
        }),
        ("average co-coercivity, logistic", |o| {
            Ok(vec![cocoercive_logistic(o)?])
        }),
        ("resolvent nonexpansive", |o| Ok(vec![nonexpansive(o)?])),
        ("matrix game strong monotonicity", |o| {
            Ok(vec![strong_monotone_game(o)?])
        }),
        ("estimator enumeration", unbiased),
        ("L-SARAH full batch", |o| Ok(vec![sarah_full_batch(o)?])),
        ("HSGD reduction", |o| Ok(vec![hsgd_reduces_to_sarah(o)?])),
        ("prox oracles", prox_oracles),
        ("planted solution", |o| Ok(vec![planted_residual(o)?])),
        ("error bound", |o| Ok(vec![error_bound(o)?])),
    ];
    checks
        .into_iter()
        .flat_map(|(name, f)| match f(opts) {
            Ok(v) => v,
            Err(e) => vec![outcome(name, false, format!("setup failed: {e}"))],
        })
        .collect()
}
