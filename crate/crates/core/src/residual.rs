//! Forward-backward and backward-forward residual maps.

use crate::error::{check_dim, config, Result};
use crate::problem::GeProblem;
use crate::vector::DenseVector;

fn check_lambda(lambda: f64) -> Result<()> {
    if lambda > 0.0 && lambda.is_finite() {
        Ok(())
    } else {
        Err(config(format!(
            "step lambda must be positive, got {lambda}"
        )))
    }
}

/// `G_λx = (x − J_{λT}(x − λ·f_value))/λ`. Pass `Fx` for the exact residual or an
/// estimate of it for the stochastic one.
pub fn fbs_residual(
    problem: &GeProblem,
    x: &[f64],
    lambda: f64,
    f_value: &[f64],
) -> Result<DenseVector> {
    check_lambda(lambda)?;
    check_dim(problem.dim(), x.len())?;
    check_dim(problem.dim(), f_value.len())?;
    let fwd: DenseVector = x
        .iter()
        .zip(f_value)
        .map(|(xi, fi)| xi - lambda * fi)
        .collect();
    let w = problem.resolve(&fwd, lambda);
    Ok(x.iter()
        .zip(w.iter())
        .map(|(xi, wi)| (xi - wi) / lambda)
        .collect())
}

/// `G_λx` with the exact full operator.
pub fn exact_fbs_residual(problem: &GeProblem, x: &[f64], lambda: f64) -> Result<DenseVector> {
    let f = problem.full(x);
    fbs_residual(problem, x, lambda, &f)
}

#[derive(Clone, Debug, PartialEq)]
pub struct BfsResidual {
    /// `S_λu = f_at_shadow + ξ`
    pub value: DenseVector,
    /// `ξ = (u − x)/λ ∈ T x` for the shadow `x = J_{λT}u`.
    pub xi: DenseVector,
}

pub fn bfs_residual(
    problem: &GeProblem,
    u: &[f64],
    lambda: f64,
    shadow_x: &[f64],
    f_at_shadow: &[f64],
) -> Result<BfsResidual> {
    check_lambda(lambda)?;
    for len in [u.len(), shadow_x.len(), f_at_shadow.len()] {
        check_dim(problem.dim(), len)?;
    }
    let xi: DenseVector = u
        .iter()
        .zip(shadow_x)
        .map(|(ui, xi)| (ui - xi) / lambda)
        .collect();
    let value = f_at_shadow
        .iter()
        .zip(xi.iter())
        .map(|(f, x)| f + x)
        .collect();
    Ok(BfsResidual { value, xi })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::problem::testing::scaled_identity;
    use crate::problem::{ComponentOperator, GeProblem, Resolvent};
    use std::sync::Arc;

    struct Scalar(f64);
    impl ComponentOperator for Scalar {
        fn dim(&self) -> usize {
            1
        }
        fn n_components(&self) -> usize {
            1
        }
        fn accumulate_component(&self, _i: usize, x: &[f64], w: f64, out: &mut [f64]) {
            out[0] += w * self.0 * x[0];
        }
    }

    /// Resolvent of `T x = x`: `y = x/(1+λ)`.
    struct LinearT;
    impl Resolvent for LinearT {
        fn apply(&self, x: &[f64], lambda: f64, out: &mut [f64]) {
            out[0] = x[0] / (1.0 + lambda);
        }
    }

    #[test]
    fn identity_resolvent_gives_f() {
        let p = scaled_identity(2, vec![3.0]);
        let x = [0.3, -1.7];
        let f = p.full(&x);
        assert_eq!(fbs_residual(&p, &x, 0.7, &f).unwrap(), f);
    }

    #[test]
    fn hand_evaluated_fbs() {
        let p = GeProblem::new(
            Arc::new(Scalar(2.0)),
            Arc::new(crate::problem::IdentityResolvent),
            2.0,
            0.0,
            "s",
        )
        .unwrap();
        let g = exact_fbs_residual(&p, &[1.0], 0.5).unwrap();
        assert_eq!(g[0], 2.0);
    }

    #[test]
    fn hand_evaluated_bfs() {
        let p = GeProblem::new(Arc::new(Scalar(1.0)), Arc::new(LinearT), 1.0, 0.0, "s").unwrap();
        let u = [2.0];
        let shadow = p.resolve(&u, 1.0);
        assert_eq!(shadow[0], 1.0);
        let f = p.full(&shadow);
        let s = bfs_residual(&p, &u, 1.0, &shadow, &f).unwrap();
        assert_eq!(s.value[0], 2.0);
        assert_eq!(s.xi[0], 1.0);
    }

    #[test]
    fn bfs_with_zero_t_is_f() {
        let p = scaled_identity(2, vec![1.5, 0.5]);
        let u = [1.0, 2.0];
        let shadow = p.resolve(&u, 0.3);
        let f = p.full(&shadow);
        assert_eq!(bfs_residual(&p, &u, 0.3, &shadow, &f).unwrap().value, f);
    }

    #[test]
    fn errors() {
        let p = scaled_identity(2, vec![1.0]);
        assert!(fbs_residual(&p, &[1.0, 1.0], 0.0, &[0.0, 0.0]).is_err());
        assert!(fbs_residual(&p, &[1.0], 1.0, &[0.0]).is_err());
    }
}
