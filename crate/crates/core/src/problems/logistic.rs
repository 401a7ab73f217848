use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::data::{sigmoid, AmbiguousFeatures};
use crate::error::{config, Result};
use crate::problem::{ComponentOperator, GeProblem};
use crate::prox::{BlockResolvent, Elementary, SCAD_A};

use super::spectral::estimate_l_features;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RegKind {
    L1,
    Scad,
}

impl RegKind {
    pub fn name(self) -> &'static str {
        match self {
            RegKind::L1 => "l1",
            RegKind::Scad => "scad",
        }
    }
}

/// `ℓ(τ, s) = log(1 + eᵗ) − sτ`, evaluated without overflow.
pub fn logistic_loss(tau: f64, s: f64) -> f64 {
    (-tau.abs()).exp().ln_1p() + tau.max(0.0) - s * tau
}

/// `ℓ′(τ, s) = σ(τ) − s`
pub fn logistic_loss_derivative(tau: f64, s: f64) -> f64 {
    sigmoid(tau) - s
}

/// Worst-case logistic loss over a mixture `v ∈ Δ_{p₂}` of ambiguous copies:
///
/// ```text
/// Fᵢ(u, v) = [ Σⱼ vⱼ ℓ′(⟨Xᵢⱼ, u⟩, yᵢ) Xᵢⱼ ;  −ℓ(⟨Xᵢⱼ, u⟩, yᵢ) for j = 1..p₂ ]
/// ```
pub struct LogisticMinimax {
    features: Arc<AmbiguousFeatures>,
    labels: Vec<f64>,
}

impl LogisticMinimax {
    pub fn new(features: Arc<AmbiguousFeatures>, labels: &[u8]) -> Result<Self> {
        if labels.len() != features.len() {
            return Err(config(format!(
                "{} labels for {} rows",
                labels.len(),
                features.len()
            )));
        }
        if features.is_empty() {
            return Err(config("logistic problem needs at least one sample"));
        }
        Ok(Self {
            labels: labels.iter().map(|&l| f64::from(l)).collect(),
            features,
        })
    }

    pub fn p1(&self) -> usize {
        self.features.dim
    }

    pub fn p2(&self) -> usize {
        self.features.copies
    }

    /// `ℋᵢ(u, v) = Σⱼ vⱼ ℓ(⟨Xᵢⱼ, u⟩, yᵢ)`, whose gradient in `u` and negated
    /// gradient in `v` make up `Fᵢ`.
    pub fn objective_component(&self, i: usize, x: &[f64]) -> f64 {
        let (u, v) = x.split_at(self.p1());
        let row = &self.features.rows[i];
        (0..self.p2())
            .map(|j| v[j] * logistic_loss(row.dot(j, u), self.labels[i]))
            .sum()
    }
}

impl ComponentOperator for LogisticMinimax {
    fn dim(&self) -> usize {
        self.p1() + self.p2()
    }

    fn n_components(&self) -> usize {
        self.features.len()
    }

    fn accumulate_component(&self, i: usize, x: &[f64], weight: f64, out: &mut [f64]) {
        let p1 = self.p1();
        let (u, v) = x.split_at(p1);
        let (out_u, out_v) = out.split_at_mut(p1);
        let row = &self.features.rows[i];
        let y = self.labels[i];
        for j in 0..self.p2() {
            let tau = row.dot(j, u);
            let c = weight * v[j] * logistic_loss_derivative(tau, y);
            for (&k, xv) in row.indices.iter().zip(row.copy(j)) {
                out_u[k] += c * xv;
            }
            out_v[j] -= weight * logistic_loss(tau, y);
        }
    }
}

/// `0 ∈ F(u, v) + [w∂R(u); N_Δ(v)]` with `R` the ℓ1 norm or SCAD (`a = 3.7`)
/// and `L = ¼λmax(MᵀM)` over the stacked copies. The SCAD instance reports
/// `ρ = a − 1`, a local constant only.
pub fn build_logistic_minimax(
    features: Arc<AmbiguousFeatures>,
    labels: &[u8],
    reg: RegKind,
    reg_weight: f64,
) -> Result<GeProblem> {
    if !(reg_weight > 0.0) {
        return Err(config(format!(
            "regularization weight must be positive, got {reg_weight}"
        )));
    }
    let l = estimate_l_features(&features);
    let op = LogisticMinimax::new(features, labels)?;
    let (p1, p2) = (op.p1(), op.p2());
    let (reg_block, rho) = match reg {
        RegKind::L1 => (Elementary::L1 { weight: reg_weight }, 0.0),
        RegKind::Scad => (
            Elementary::Scad {
                weight: reg_weight,
                a: SCAD_A,
            },
            SCAD_A - 1.0,
        ),
    };
    let res = BlockResolvent::from_lengths(&[(p1, reg_block), (p2, Elementary::Simplex)])?;
    GeProblem::new(
        Arc::new(op),
        Arc::new(res),
        l,
        rho,
        format!("logistic-{}", reg.name()),
    )
}
