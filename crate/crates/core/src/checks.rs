//! Sampling-based assumption reports. Finite samples can refute an assumption
//! but never certify it, so these return numbers instead of gating runs.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::constants::SplitConstants;
use crate::par::{chunked_sum, parallel_map, Execution};
use crate::problem::GeProblem;
use crate::residual::fbs_residual;
use crate::vector::{dist, dot, norm_sq, sub, DenseVector};

/// Pairs drawn componentwise uniform in `[−radius, radius]ᵖ`, then mapped into
/// `dom T`.
#[derive(Clone, Copy, Debug)]
pub struct PairSampler {
    pub pairs: usize,
    pub seed: u64,
    pub radius: f64,
}

impl PairSampler {
    pub fn new(pairs: usize, seed: u64) -> Self {
        Self {
            pairs,
            seed,
            radius: 1.0,
        }
    }

    pub fn with_radius(mut self, radius: f64) -> Self {
        self.radius = radius;
        self
    }

    pub fn draw(&self, problem: &GeProblem) -> Vec<(DenseVector, DenseVector)> {
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        let p = problem.dim();
        let point = |rng: &mut ChaCha8Rng| {
            let mut v: DenseVector = (0..p)
                .map(|_| rng.random_range(-self.radius..=self.radius))
                .collect();
            problem.project_domain(&mut v);
            v
        };
        (0..self.pairs)
            .map(|_| {
                let x = point(&mut rng);
                let y = point(&mut rng);
                (x, y)
            })
            .collect()
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct CocoercivityReport {
    pub min_margin: f64,
    pub pairs: usize,
}

/// Minimum over pairs of `⟨Fx − Fy, x − y⟩ − (1/(nL)) Σᵢ‖Fᵢx − Fᵢy‖²`.
pub fn check_cocoercivity(problem: &GeProblem, sampler: PairSampler) -> CocoercivityReport {
    let pairs = sampler.draw(problem);
    let n = problem.n();
    let p = problem.dim();
    let l = problem.lipschitz();
    let op = problem.operator();
    let margins = parallel_map(pairs.len(), |k| {
        let (x, y) = &pairs[k];
        let fx = problem.full(x);
        let fy = problem.full(y);
        let lhs = dot(&sub(&fx, &fy), &sub(x, y));
        let spread = chunked_sum(Execution::Sequential, n, 1, |i, out| {
            let mut d = vec![0.0; p];
            op.accumulate_component(i, x, 1.0, &mut d);
            op.accumulate_component(i, y, -1.0, &mut d);
            out[0] += norm_sq(&d);
        })[0];
        lhs - spread / (n as f64 * l)
    });
    CocoercivityReport {
        min_margin: margins.into_iter().fold(f64::INFINITY, f64::min),
        pairs: pairs.len(),
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct NonexpansiveReport {
    pub max_ratio: f64,
    pub pairs: usize,
}

/// Maximum over pairs of `‖J x − J y‖ / ‖x − y‖`. Pairs are drawn in the full
/// box since `J` is defined everywhere.
pub fn check_resolvent_nonexpansive(
    problem: &GeProblem,
    lambda: f64,
    sampler: PairSampler,
) -> NonexpansiveReport {
    let mut rng = ChaCha8Rng::seed_from_u64(sampler.seed);
    let p = problem.dim();
    let mut ratio = 0.0f64;
    for _ in 0..sampler.pairs {
        let x: DenseVector = (0..p)
            .map(|_| rng.random_range(-sampler.radius..=sampler.radius))
            .collect();
        let y: DenseVector = (0..p)
            .map(|_| rng.random_range(-sampler.radius..=sampler.radius))
            .collect();
        let d = dist(&x, &y);
        if d == 0.0 {
            continue;
        }
        let jx = problem.resolve(&x, lambda);
        let jy = problem.resolve(&y, lambda);
        ratio = ratio.max(dist(&jx, &jy) / d);
    }
    NonexpansiveReport {
        max_ratio: ratio,
        pairs: sampler.pairs,
    }
}

/// Slack of the residual co-coercivity inequality at one pair.
pub fn residual_cocoercivity_slack(
    problem: &GeProblem,
    constants: &SplitConstants,
    x: &[f64],
    y: &[f64],
) -> f64 {
    let lambda = constants.lambda;
    let fx = problem.full(x);
    let fy = problem.full(y);
    let gx = fbs_residual(problem, x, lambda, &fx).expect("dimensions checked by caller");
    let gy = fbs_residual(problem, y, lambda, &fy).expect("dimensions checked by caller");
    let dg = sub(&gx, &gy);
    let dx = sub(x, y);
    let df = sub(&fx, &fy);
    dot(&dg, &dx)
        - constants.beta_bar * norm_sq(&dg)
        - constants.lambda_gap * problem.lipschitz() * dot(&df, &dx)
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ResidualCocoercivityReport {
    pub min_slack: f64,
    pub pairs: usize,
}

/// Minimum slack of `⟨G_λx − G_λy, x − y⟩ ≥ β̄‖G_λx − G_λy‖² + ΛL⟨Fx − Fy, x − y⟩`.
pub fn check_residual_cocoercivity(
    problem: &GeProblem,
    constants: &SplitConstants,
    sampler: PairSampler,
) -> ResidualCocoercivityReport {
    let pairs = sampler.draw(problem);
    let slacks = parallel_map(pairs.len(), |k| {
        residual_cocoercivity_slack(problem, constants, &pairs[k].0, &pairs[k].1)
    });
    ResidualCocoercivityReport {
        min_slack: slacks.into_iter().fold(f64::INFINITY, f64::min),
        pairs: pairs.len(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::constants::compute_split_constants;
    use crate::problem::testing::scaled_identity;

    #[test]
    fn psd_quadratic_is_cocoercive() {
        let p = scaled_identity(4, vec![2.0, 2.0, 2.0]);
        let r = check_cocoercivity(&p, PairSampler::new(200, 1));
        assert!(r.min_margin >= -1e-10, "{r:?}");
    }

    #[test]
    fn negated_identity_reports_negative_margin() {
        let p = scaled_identity(3, vec![-1.0]);
        let r = check_cocoercivity(&p, PairSampler::new(50, 2));
        assert!(r.min_margin < 0.0);
    }

    #[test]
    fn identity_resolvent_ratio_is_one() {
        let p = scaled_identity(3, vec![1.0]);
        let r = check_resolvent_nonexpansive(&p, 1.0, PairSampler::new(50, 3));
        assert!((r.max_ratio - 1.0).abs() < 1e-12);
    }

    #[test]
    fn residual_inequality_on_quadratic() {
        let p = scaled_identity(3, vec![0.5, 1.5]);
        let l = p.lipschitz();
        let c = compute_split_constants(l, 0.0, 0.05 * l, None).unwrap();
        let r = check_residual_cocoercivity(&p, &c, PairSampler::new(200, 4));
        assert!(r.min_slack >= -1e-10, "{r:?}");
    }

    #[test]
    fn inflated_beta_bar_breaks_inequality() {
        let p = scaled_identity(3, vec![1.0]);
        let mut c = compute_split_constants(1.0, 0.0, 0.05, None).unwrap();
        c.beta_bar *= 2.0;
        let r = check_residual_cocoercivity(&p, &c, PairSampler::new(50, 5));
        assert!(r.min_slack < 0.0);
    }
}
