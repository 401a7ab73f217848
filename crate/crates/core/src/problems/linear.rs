use std::sync::Arc;

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use rand::Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{config, Result};
use crate::problem::{ComponentOperator, GeProblem, Resolvent};
use crate::vector::DenseVector;

/// Affine shifts `q` (of `F`) and `s` (of `T`).
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum LinearShift {
    Zero,
    /// `q, s ~ scale·N(0, I)`.
    Random {
        scale: f64,
    },
    /// Random unit-norm `x⋆`, `s ~ s_scale·N(0, I)` and `q = −(𝔽 + 𝕋)x⋆ − s`.
    PlantedUnit {
        s_scale: f64,
    },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SyntheticLinearSpec {
    /// Eigenvalues of the PSD matrix `𝔽`.
    pub spectrum_f: Vec<f64>,
    /// Eigenvalues of the invertible symmetric `𝕋`.
    pub spectrum_t: Vec<f64>,
    /// Reported `ρ`; must be at least the value implied by `spectrum_t`.
    pub rho_target: Option<f64>,
    pub shift: LinearShift,
    /// Number of components `Fᵢx = 𝔽x + q + δᵢ` with `Σδᵢ = 0`.
    pub components: usize,
    pub component_spread: f64,
}

impl SyntheticLinearSpec {
    pub fn new(spectrum_f: Vec<f64>, spectrum_t: Vec<f64>) -> Self {
        Self {
            spectrum_f,
            spectrum_t,
            rho_target: None,
            shift: LinearShift::Zero,
            components: 1,
            component_spread: 0.0,
        }
    }
}

struct LinearOperator {
    dim: usize,
    f: Vec<f64>,
    q: Vec<f64>,
    offsets: Vec<f64>,
}

impl ComponentOperator for LinearOperator {
    fn dim(&self) -> usize {
        self.dim
    }

    fn n_components(&self) -> usize {
        self.offsets.len() / self.dim
    }

    fn accumulate_component(&self, i: usize, x: &[f64], weight: f64, out: &mut [f64]) {
        let p = self.dim;
        let off = &self.offsets[i * p..(i + 1) * p];
        for (r, o) in out.iter_mut().enumerate() {
            let row = &self.f[r * p..(r + 1) * p];
            let fx: f64 = row.iter().zip(x).map(|(a, b)| a * b).sum();
            *o += weight * (fx + self.q[r] + off[r]);
        }
    }
}

/// `J_{λT}x = Q diag(1/(1 + λtₖ)) Qᵀ(x − λs)` for `Tx = 𝕋x + s`, `𝕋 = Q diag(t) Qᵀ`.
struct LinearResolvent {
    basis: DMatrix<f64>,
    eig: Vec<f64>,
    s: DVector<f64>,
}

impl Resolvent for LinearResolvent {
    fn apply(&self, x: &[f64], lambda: f64, out: &mut [f64]) {
        let y = DVector::from_column_slice(x) - &self.s * lambda;
        let mut c = self.basis.tr_mul(&y);
        c.iter_mut()
            .zip(&self.eig)
            .for_each(|(v, t)| *v /= 1.0 + lambda * t);
        out.copy_from_slice((&self.basis * c).as_slice());
    }
}

fn implied_rho(eig: &[f64]) -> f64 {
    eig.iter().map(|t| -1.0 / t).fold(0.0, f64::max)
}

fn random_orthogonal<R: Rng + ?Sized>(p: usize, rng: &mut R) -> DMatrix<f64> {
    let g = DMatrix::from_fn(p, p, |_, _| StandardNormal.sample(rng));
    let qr = g.qr();
    let mut q = qr.q();
    let r = qr.r();
    for j in 0..p {
        if r[(j, j)] < 0.0 {
            q.column_mut(j).neg_mut();
        }
    }
    q
}

fn to_row_major(m: &DMatrix<f64>) -> Vec<f64> {
    m.transpose().as_slice().to_vec()
}

fn assemble(
    f: &DMatrix<f64>,
    t_basis: DMatrix<f64>,
    t_eig: Vec<f64>,
    q: DVector<f64>,
    s: DVector<f64>,
    offsets: Vec<f64>,
    lipschitz: f64,
    rho: f64,
) -> Result<GeProblem> {
    let p = f.nrows();
    let t =
        &t_basis * DMatrix::from_diagonal(&DVector::from_vec(t_eig.clone())) * t_basis.transpose();
    let solution = (f + &t).lu().solve(&(-(&q + &s)));
    let op = LinearOperator {
        dim: p,
        f: to_row_major(f),
        q: q.as_slice().to_vec(),
        offsets,
    };
    let res = LinearResolvent {
        basis: t_basis,
        eig: t_eig,
        s,
    };
    let problem = GeProblem::new(
        Arc::new(op),
        Arc::new(res),
        lipschitz.max(super::L_FLOOR),
        rho,
        "synthetic-linear",
    )?;
    match solution {
        Some(x) => problem.with_solution(DenseVector::from(x.as_slice())),
        None => Ok(problem),
    }
}

/// Builds `F = 𝔽x + q`, `T = 𝕋x + s` from explicit symmetric matrices, with
/// `L = λmax(𝔽)` and `ρ = max(0, −min 1/tₖ)`. No `Lρ < 1` gate is applied.
pub fn linear_from_parts(
    f: DMatrix<f64>,
    t: DMatrix<f64>,
    q: Vec<f64>,
    s: Vec<f64>,
) -> Result<GeProblem> {
    let p = f.nrows();
    if f.ncols() != p || t.nrows() != p || t.ncols() != p || q.len() != p || s.len() != p {
        return Err(config("linear parts must be p×p matrices and p-vectors"));
    }
    let sym_err = |m: &DMatrix<f64>| (m - m.transpose()).amax();
    if sym_err(&f) > 1e-12 || sym_err(&t) > 1e-12 {
        return Err(config("linear parts must be symmetric"));
    }
    let fe = SymmetricEigen::new(f.clone());
    if fe.eigenvalues.min() < -1e-12 {
        return Err(config("F matrix must be positive semidefinite"));
    }
    let te = SymmetricEigen::new(t);
    let eig: Vec<f64> = te.eigenvalues.iter().copied().collect();
    if eig.iter().any(|&v| v == 0.0) {
        return Err(config("T matrix must be invertible"));
    }
    let rho = implied_rho(&eig);
    assemble(
        &f,
        te.eigenvectors,
        eig,
        DVector::from_vec(q),
        DVector::from_vec(s),
        vec![0.0; p],
        fe.eigenvalues.max(),
        rho,
    )
}

/// Random orthogonal eigenbases with the given spectra. Fails when `Lρ ≥ 1`.
pub fn build_synthetic_linear<R: Rng + ?Sized>(
    spec: &SyntheticLinearSpec,
    rng: &mut R,
) -> Result<GeProblem> {
    let p = spec.spectrum_f.len();
    if p == 0 || spec.spectrum_t.len() != p {
        return Err(config(format!(
            "spectra must be nonempty and of equal length, got {} and {}",
            p,
            spec.spectrum_t.len()
        )));
    }
    if spec.spectrum_f.iter().any(|&v| !(v >= 0.0)) {
        return Err(config("spectrum_f must be nonnegative"));
    }
    if spec.spectrum_t.iter().any(|&v| v == 0.0 || !v.is_finite()) {
        return Err(config("spectrum_t must be finite and nonzero"));
    }
    if spec.components == 0 {
        return Err(config("need at least one component"));
    }
    let l = spec
        .spectrum_f
        .iter()
        .copied()
        .fold(0.0, f64::max)
        .max(super::L_FLOOR);
    let implied = implied_rho(&spec.spectrum_t);
    let rho = match spec.rho_target {
        Some(r) if r < implied => {
            return Err(config(format!(
                "rho_target = {r} is below the value {implied} implied by spectrum_t"
            )));
        }
        Some(r) => r,
        None => implied,
    };
    if l * rho >= 1.0 {
        return Err(config(format!(
            "L * rho < 1 violated: L = {l}, rho = {rho}"
        )));
    }
    let qf = random_orthogonal(p, rng);
    let qt = random_orthogonal(p, rng);
    let f = &qf
        * DMatrix::from_diagonal(&DVector::from_column_slice(&spec.spectrum_f))
        * qf.transpose();
    let f = (&f + f.transpose()) * 0.5;
    let t = &qt
        * DMatrix::from_diagonal(&DVector::from_column_slice(&spec.spectrum_t))
        * qt.transpose();
    let gauss = |rng: &mut R, scale: f64| {
        DVector::from_fn(p, |_, _| {
            let z: f64 = StandardNormal.sample(rng);
            scale * z
        })
    };
    let (q, s) = match spec.shift {
        LinearShift::Zero => (DVector::zeros(p), DVector::zeros(p)),
        LinearShift::Random { scale } => {
            let q = gauss(rng, scale);
            (q, gauss(rng, scale))
        }
        LinearShift::PlantedUnit { s_scale } => {
            let xs = gauss(rng, 1.0).normalize();
            let s = gauss(rng, s_scale);
            (-(&f + &t) * xs - &s, s)
        }
    };
    let n = spec.components;
    let mut offsets = vec![0.0; n * p];
    if n > 1 && spec.component_spread > 0.0 {
        offsets.iter_mut().for_each(|v| {
            let z: f64 = StandardNormal.sample(rng);
            *v = spec.component_spread * z;
        });
        for r in 0..p {
            let mean = (0..n).map(|i| offsets[i * p + r]).sum::<f64>() / n as f64;
            (0..n).for_each(|i| offsets[i * p + r] -= mean);
        }
    }
    assemble(&f, qt, spec.spectrum_t.clone(), q, s, offsets, l, rho)
}
