//! Step-size constants of the forward-backward residual.
//!
//! For `F` 1/L-average co-coercive and `T` ρ-co-hypomonotone, `G_λ` satisfies
//! `⟨G_λx − G_λy, x − y⟩ ≥ β̄‖G_λx − G_λy‖² + ΛL⟨Fx − Fy, x − y⟩` with
//! `β̄ = (λ(4 − L̂λ) − 4ρ)/(4(1 − ρL̂))` and `Λ = (L̂ − L)/(LL̂)`.

use serde::{Deserialize, Serialize};

use crate::error::{config, Result};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SplitConstants {
    pub lambda: f64,
    pub l_hat: f64,
    pub beta_bar: f64,
    pub lambda_gap: f64,
}

/// Default `ζ` in `L̂ = L + ζ`.
pub fn default_zeta(l: f64) -> f64 {
    0.05 * l
}

/// Builds `(λ, L̂, β̄, Λ)` with `L̂ = L + ζ` and `λ = 1/L̂` unless overridden.
///
/// Fails with the violated inequality when `L̂ρ ≥ 1`, `λ < 2ρ` or
/// `λ ≥ 2(1 + √(1 − L̂ρ))/L̂`.
pub fn compute_split_constants(
    l: f64,
    rho: f64,
    zeta: f64,
    lambda_override: Option<f64>,
) -> Result<SplitConstants> {
    if !(l > 0.0 && l.is_finite()) {
        return Err(config(format!("L must be positive, got {l}")));
    }
    if !(rho >= 0.0) {
        return Err(config(format!("rho must be nonnegative, got {rho}")));
    }
    if !(zeta >= 0.0) {
        return Err(config(format!("zeta must be nonnegative, got {zeta}")));
    }
    let l_hat = l + zeta;
    if l_hat * rho >= 1.0 {
        return Err(config(format!(
            "L_hat * rho < 1 violated: L_hat = {l_hat}, rho = {rho}"
        )));
    }
    let lambda = lambda_override.unwrap_or(1.0 / l_hat);
    if !(lambda > 0.0 && lambda.is_finite()) {
        return Err(config(format!("lambda must be positive, got {lambda}")));
    }
    if lambda < 2.0 * rho {
        return Err(config(format!(
            "lambda >= 2 rho violated: lambda = {lambda}, rho = {rho}"
        )));
    }
    let upper = 2.0 * (1.0 + (1.0 - l_hat * rho).sqrt()) / l_hat;
    if lambda >= upper {
        return Err(config(format!(
            "lambda < 2(1 + sqrt(1 - L_hat rho))/L_hat violated: lambda = {lambda}, bound = {upper}"
        )));
    }
    let beta_bar =
        ((lambda * (4.0 - l_hat * lambda) - 4.0 * rho) / (4.0 * (1.0 - rho * l_hat))).max(0.0);
    let lambda_gap = (l_hat - l) / (l * l_hat);
    Ok(SplitConstants {
        lambda,
        l_hat,
        beta_bar,
        lambda_gap,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    #[test]
    fn monotone_default_step() {
        let l = 2.0;
        let z = default_zeta(l);
        let c = compute_split_constants(l, 0.0, z, None).unwrap();
        assert_relative_eq!(c.lambda, 1.0 / (l + z), max_relative = 1e-15);
        assert_relative_eq!(c.beta_bar, 3.0 / (4.0 * (l + z)), max_relative = 1e-15);
        assert_relative_eq!(c.lambda_gap, z / (l * (l + z)), max_relative = 1e-15);
    }

    #[test]
    fn experiment_step() {
        let l = 3.0;
        let c = compute_split_constants(l, 0.0, 0.0, Some(1.0 / (2.0 * l))).unwrap();
        assert_relative_eq!(c.beta_bar, 7.0 / (16.0 * l), max_relative = 1e-15);
        assert_eq!(c.lambda_gap, 0.0);
    }

    #[test]
    fn nonmonotone_at_twice_rho() {
        let c = compute_split_constants(1.0, 0.5, 0.0, Some(1.0)).unwrap();
        assert_relative_eq!(c.beta_bar, 0.5, max_relative = 1e-15);
    }

    #[test]
    fn gates_name_the_inequality() {
        let e = compute_split_constants(1.0, 1.0, 0.0, None)
            .unwrap_err()
            .to_string();
        assert!(e.contains("L_hat * rho < 1"), "{e}");
        let e = compute_split_constants(1.0, 0.4, 0.0, Some(0.5))
            .unwrap_err()
            .to_string();
        assert!(e.contains("lambda >= 2 rho"), "{e}");
        let e = compute_split_constants(1.0, 0.0, 0.0, Some(4.0))
            .unwrap_err()
            .to_string();
        assert!(e.contains("sqrt"), "{e}");
    }

    proptest! {
        #[test]
        fn beta_bar_nonnegative_in_range(
            l in 0.01f64..100.0,
            lr in 0.0f64..0.99,
            t in 0.0f64..0.999,
            zf in 0.0f64..0.2,
        ) {
            let zeta = zf * l;
            let l_hat = l + zeta;
            let rho = lr / l_hat;
            let upper = 2.0 * (1.0 + (1.0 - l_hat * rho).sqrt()) / l_hat;
            let lambda = 2.0 * rho + t * (upper - 2.0 * rho);
            prop_assume!(lambda > 0.0);
            let c = compute_split_constants(l, rho, zeta, Some(lambda)).unwrap();
            prop_assert!(c.beta_bar >= 0.0);
            prop_assert!(c.lambda_gap >= 0.0);
        }
    }
}
