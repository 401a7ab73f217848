use serde::{Deserialize, Serialize};

use crate::constants::SplitConstants;
use crate::error::{config, Result};

/// Default momentum parameter `μ = 0.95·2/3`.
pub const DEFAULT_MU: f64 = 0.95 * 2.0 / 3.0;

/// Parameters of the accelerated schemes: `tₖ = μ(k + r)`,
/// `ηₖ = 2β(tₖ − 1)/(tₖ − ν)`, `ν = μ/2`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct AccelParams {
    mu: f64,
    r: f64,
    nu: f64,
    beta: f64,
    lambda: f64,
    beta_bar: f64,
}

impl AccelParams {
    /// Rejects `μ ∉ (0, 2/3)`, `r < 2 + 1/μ`, and `β ∉ (0, (2 − μ)β̄/(2 + μ)]`.
    pub fn new(mu: f64, r: f64, beta: f64, constants: &SplitConstants) -> Result<Self> {
        if !(mu > 0.0 && mu < 2.0 / 3.0) {
            return Err(config(format!("0 < mu < 2/3 violated: mu = {mu}")));
        }
        if !(r >= 2.0 + 1.0 / mu) {
            return Err(config(format!(
                "r >= 2 + 1/mu violated: r = {r}, 2 + 1/mu = {}",
                2.0 + 1.0 / mu
            )));
        }
        let beta_max = beta_cap(mu, constants.beta_bar);
        if !(beta > 0.0 && beta <= beta_max * (1.0 + 1e-12)) {
            return Err(config(format!(
                "0 < beta <= (2 - mu) beta_bar / (2 + mu) violated: beta = {beta}, bound = {beta_max}"
            )));
        }
        Ok(Self {
            mu,
            r,
            nu: mu / 2.0,
            beta,
            lambda: constants.lambda,
            beta_bar: constants.beta_bar,
        })
    }

    /// `μ` and `r` default to `0.95·2/3` and `2 + 1/μ`; `β` takes its upper bound.
    pub fn theory(constants: &SplitConstants, mu: Option<f64>, r: Option<f64>) -> Result<Self> {
        let mu = mu.unwrap_or(DEFAULT_MU);
        let r = r.unwrap_or(2.0 + 1.0 / mu);
        Self::new(mu, r, beta_cap(mu, constants.beta_bar), constants)
    }

    pub fn mu(&self) -> f64 {
        self.mu
    }
    pub fn r(&self) -> f64 {
        self.r
    }
    pub fn nu(&self) -> f64 {
        self.nu
    }
    pub fn beta(&self) -> f64 {
        self.beta
    }
    pub fn lambda(&self) -> f64 {
        self.lambda
    }
    pub fn beta_bar(&self) -> f64 {
        self.beta_bar
    }

    /// `(tₖ, ηₖ)`
    pub fn t_eta(&self, k: u64) -> (f64, f64) {
        schedule_tk_etak(self.mu, self.r, self.nu, self.beta, k)
    }
}

fn beta_cap(mu: f64, beta_bar: f64) -> f64 {
    (2.0 - mu) * beta_bar / (2.0 + mu)
}

pub fn schedule_tk_etak(mu: f64, r: f64, nu: f64, beta: f64, k: u64) -> (f64, f64) {
    let t = mu * (k as f64 + r);
    (t, 2.0 * beta * (t - 1.0) / (t - nu))
}
