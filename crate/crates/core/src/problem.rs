//! Generalized-equation instances `0 ∈ Fx + Tx` with finite-sum `F = (1/n) Σ Fᵢ`.

use std::fmt;
use std::sync::Arc;

use crate::error::{check_dim, config, Result};
use crate::par::{chunked_sum, Execution};
use crate::vector::DenseVector;

/// Finite-sum operator `F = (1/n) Σᵢ Fᵢ` accessed one component at a time.
pub trait ComponentOperator: Send + Sync {
    fn dim(&self) -> usize;
    fn n_components(&self) -> usize;
    /// `out += weight · Fᵢ x`
    fn accumulate_component(&self, i: usize, x: &[f64], weight: f64, out: &mut [f64]);
}

/// Resolvent `J_{λT} = (I + λT)⁻¹` of the set-valued part.
pub trait Resolvent: Send + Sync {
    fn apply(&self, x: &[f64], lambda: f64, out: &mut [f64]);

    /// Maps a point into `dom T`. Used by the sampling checks; identity when
    /// `T` has full domain.
    fn project_domain(&self, _x: &mut [f64]) {}
}

/// Resolvent of `T = 0`.
#[derive(Clone, Copy, Debug, Default)]
pub struct IdentityResolvent;

impl Resolvent for IdentityResolvent {
    fn apply(&self, x: &[f64], _lambda: f64, out: &mut [f64]) {
        out.copy_from_slice(x);
    }
}

#[derive(Clone)]
pub struct GeProblem {
    op: Arc<dyn ComponentOperator>,
    resolvent: Arc<dyn Resolvent>,
    lipschitz: f64,
    rho: f64,
    tag: String,
    solution: Option<DenseVector>,
    initial_xi: Option<DenseVector>,
    execution: Execution,
}

impl fmt::Debug for GeProblem {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("GeProblem")
            .field("tag", &self.tag)
            .field("dim", &self.dim())
            .field("n", &self.n())
            .field("lipschitz", &self.lipschitz)
            .field("rho", &self.rho)
            .finish()
    }
}

impl GeProblem {
    pub fn new(
        op: Arc<dyn ComponentOperator>,
        resolvent: Arc<dyn Resolvent>,
        lipschitz: f64,
        rho: f64,
        tag: impl Into<String>,
    ) -> Result<Self> {
        if !(lipschitz > 0.0 && lipschitz.is_finite()) {
            return Err(config(format!(
                "L must be positive and finite, got {lipschitz}"
            )));
        }
        if !(rho >= 0.0 && rho.is_finite()) {
            return Err(config(format!("rho must be nonnegative, got {rho}")));
        }
        if op.n_components() == 0 || op.dim() == 0 {
            return Err(config(
                "operator needs at least one component and one coordinate",
            ));
        }
        Ok(Self {
            op,
            resolvent,
            lipschitz,
            rho,
            tag: tag.into(),
            solution: None,
            initial_xi: None,
            execution: Execution::default(),
        })
    }

    pub fn with_solution(mut self, x: DenseVector) -> Result<Self> {
        check_dim(self.dim(), x.len())?;
        self.solution = Some(x);
        Ok(self)
    }

    /// Supplies `ξ⁰ ∈ T x⁰` for the backward-forward scheme's start `u⁰ = x⁰ + λξ⁰`.
    pub fn with_initial_xi(mut self, xi: DenseVector) -> Result<Self> {
        check_dim(self.dim(), xi.len())?;
        self.initial_xi = Some(xi);
        Ok(self)
    }

    pub fn with_execution(mut self, execution: Execution) -> Self {
        self.execution = execution;
        self
    }

    pub fn with_lipschitz(mut self, lipschitz: f64) -> Result<Self> {
        if !(lipschitz > 0.0 && lipschitz.is_finite()) {
            return Err(config(format!(
                "L must be positive and finite, got {lipschitz}"
            )));
        }
        self.lipschitz = lipschitz;
        Ok(self)
    }

    pub fn dim(&self) -> usize {
        self.op.dim()
    }

    pub fn n(&self) -> usize {
        self.op.n_components()
    }

    pub fn lipschitz(&self) -> f64 {
        self.lipschitz
    }

    pub fn rho(&self) -> f64 {
        self.rho
    }

    pub fn tag(&self) -> &str {
        &self.tag
    }

    pub fn solution(&self) -> Option<&DenseVector> {
        self.solution.as_ref()
    }

    pub fn initial_xi(&self) -> Option<&DenseVector> {
        self.initial_xi.as_ref()
    }

    pub fn execution(&self) -> Execution {
        self.execution
    }

    pub fn operator(&self) -> &dyn ComponentOperator {
        self.op.as_ref()
    }

    /// Full operator `Fx = (1/n) Σ Fᵢx`.
    pub fn full(&self, x: &[f64]) -> DenseVector {
        let w = 1.0 / self.n() as f64;
        chunked_sum(self.execution, self.n(), self.dim(), |i, out| {
            self.op.accumulate_component(i, x, w, out)
        })
        .into()
    }

    pub fn component(&self, i: usize, x: &[f64]) -> DenseVector {
        let mut out = DenseVector::zeros(self.dim());
        self.op.accumulate_component(i, x, 1.0, &mut out);
        out
    }

    /// `out = (1/|S|) Σ_{i∈S} Fᵢ x`, summed in the order of `batch`.
    pub fn batch_mean(&self, batch: &[usize], x: &[f64], out: &mut [f64]) {
        out.iter_mut().for_each(|v| *v = 0.0);
        let w = 1.0 / batch.len() as f64;
        for &i in batch {
            self.op.accumulate_component(i, x, w, out);
        }
    }

    pub fn resolve(&self, x: &[f64], lambda: f64) -> DenseVector {
        let mut out = DenseVector::zeros(x.len());
        self.resolvent.apply(x, lambda, &mut out);
        out
    }

    pub fn project_domain(&self, x: &mut [f64]) {
        self.resolvent.project_domain(x);
    }
}


#[cfg(test)]
mod tests {
    use super::testing::scaled_identity;
    use super::*;

    #[test]
    fn full_is_component_mean() {
        let p = scaled_identity(3, (0..200).map(|i| 1.0 + (i % 7) as f64).collect());
        let x = [1.0, -2.0, 0.5];
        let f = p.full(&x);
        let mean: f64 = (0..200).map(|i| 1.0 + (i % 7) as f64).sum::<f64>() / 200.0;
        for (fi, xi) in f.iter().zip(x) {
            assert!((fi - mean * xi).abs() < 1e-12);
        }
        let seq = p.clone().with_execution(Execution::Sequential).full(&x);
        assert_eq!(f, seq);
    }

    #[test]
    fn batch_mean_of_repeated_index() {
        let p = scaled_identity(1, vec![2.0, 4.0]);
        let mut out = [0.0];
        p.batch_mean(&[1, 1, 0], &[1.0], &mut out);
        assert!((out[0] - 10.0 / 3.0).abs() < 1e-15);
    }

    #[test]
    fn rejects_bad_constants() {
        let p = scaled_identity(1, vec![1.0]);
        assert!(p.clone().with_lipschitz(0.0).is_err());
        assert!(p.with_solution(DenseVector::zeros(2)).is_err());
    }
}
