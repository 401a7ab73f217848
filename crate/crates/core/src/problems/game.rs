use std::sync::Arc;

use rand::Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{config, Result};
use crate::problem::{ComponentOperator, GeProblem};
use crate::prox::{BlockResolvent, Elementary};

use super::spectral::spectral_norm;

/// Regularization `ε` added to both blocks.
pub const GAME_EPSILON: f64 = 1e-8;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct MatrixGameSpec {
    pub p1: usize,
    pub samples: usize,
    pub theta: f64,
    /// Noise variance `σ²` of the sampled wealth vectors.
    pub noise_variance: f64,
    pub epsilon: f64,
}

impl MatrixGameSpec {
    pub fn new(p1: usize, samples: usize) -> Self {
        Self {
            p1,
            samples,
            theta: 0.8,
            noise_variance: 0.05,
            epsilon: GAME_EPSILON,
        }
    }
}

/// `Lₛ = diag(wₛ) D` with `D_ij = 1 − exp(−θ|i − j|)` and component
/// `Fₛx = [εu + Lₛᵀv; εv − Lₛu]`.
pub struct MatrixGame {
    p1: usize,
    epsilon: f64,
    decay: Vec<f64>,
    wealth: Vec<f64>,
}

impl MatrixGame {
    pub fn samples(&self) -> usize {
        self.wealth.len() / self.p1
    }

    /// Row-major `Lₛ`.
    pub fn payoff(&self, s: usize) -> Vec<f64> {
        let w = &self.wealth[s * self.p1..(s + 1) * self.p1];
        let mut out = self.decay.clone();
        for (i, row) in out.chunks_mut(self.p1).enumerate() {
            row.iter_mut().for_each(|v| *v *= w[i]);
        }
        out
    }

    /// Row-major mean payoff `L̄`.
    pub fn mean_payoff(&self) -> Vec<f64> {
        let p1 = self.p1;
        let mut wbar = vec![0.0; p1];
        for w in self.wealth.chunks(p1) {
            wbar.iter_mut().zip(w).for_each(|(a, b)| *a += b);
        }
        let ns = self.samples() as f64;
        let mut out = self.decay.clone();
        for (i, row) in out.chunks_mut(p1).enumerate() {
            row.iter_mut().for_each(|v| *v *= wbar[i] / ns);
        }
        out
    }
}

impl ComponentOperator for MatrixGame {
    fn dim(&self) -> usize {
        2 * self.p1
    }

    fn n_components(&self) -> usize {
        self.samples()
    }

    fn accumulate_component(&self, s: usize, x: &[f64], weight: f64, out: &mut [f64]) {
        let p1 = self.p1;
        let (u, v) = x.split_at(p1);
        let (ou, ov) = out.split_at_mut(p1);
        let w = &self.wealth[s * p1..(s + 1) * p1];
        let eps = weight * self.epsilon;
        for i in 0..p1 {
            let d = &self.decay[i * p1..(i + 1) * p1];
            // D is symmetric: (Lₛᵀv)ᵢ = Σⱼ D_ij wⱼ vⱼ and (Lₛu)ᵢ = wᵢ Σⱼ D_ij uⱼ
            let mut a = 0.0;
            let mut b = 0.0;
            for j in 0..p1 {
                a += d[j] * w[j] * v[j];
                b += d[j] * u[j];
            }
            ou[i] += eps * u[i] + weight * a;
            ov[i] += eps * v[i] - weight * w[i] * b;
        }
    }
}

/// Draws `ŵ = |N(0, I)|` and `wₛ = |ŵ + σN(0, I)|` for each sample. The
/// set-valued part is the normal cone of `Δ_{p₁} × Δ_{p₁}` and `L = ‖L̄‖₂ + ε`.
pub fn build_matrix_game<R: Rng + ?Sized>(
    spec: &MatrixGameSpec,
    rng: &mut R,
) -> Result<(GeProblem, Arc<MatrixGame>)> {
    if spec.p1 < 2 || spec.samples < 1 {
        return Err(config(format!(
            "matrix game needs p1 >= 2 and samples >= 1, got {} and {}",
            spec.p1, spec.samples
        )));
    }
    if !(spec.noise_variance >= 0.0 && spec.theta >= 0.0 && spec.epsilon >= 0.0) {
        return Err(config(
            "matrix game needs nonnegative theta, noise variance and epsilon",
        ));
    }
    let p1 = spec.p1;
    let decay: Vec<f64> = (0..p1 * p1)
        .map(|k| {
            let (i, j) = (k / p1, k % p1);
            1.0 - (-spec.theta * i.abs_diff(j) as f64).exp()
        })
        .collect();
    let base: Vec<f64> = (0..p1)
        .map(|_| StandardNormal.sample(rng))
        .map(|z: f64| z.abs())
        .collect();
    let sigma = spec.noise_variance.sqrt();
    let wealth: Vec<f64> = (0..spec.samples)
        .flat_map(|_| {
            base.iter()
                .map(|b| {
                    let z: f64 = StandardNormal.sample(rng);
                    (b + sigma * z).abs()
                })
                .collect::<Vec<_>>()
        })
        .collect();
    let game = Arc::new(MatrixGame {
        p1,
        epsilon: spec.epsilon,
        decay,
        wealth,
    });
    let l = spectral_norm(&game.mean_payoff(), p1, p1) + spec.epsilon;
    let res =
        BlockResolvent::from_lengths(&[(p1, Elementary::Simplex), (p1, Elementary::Simplex)])?;
    let problem = GeProblem::new(
        game.clone(),
        Arc::new(res),
        l.max(super::L_FLOOR),
        0.0,
        "matrix-game",
    )?;
    Ok((problem, game))
}
