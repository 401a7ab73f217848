//! Closed-form resolvents: soft-thresholding, SCAD, simplex projection, and
//! block products of them.

use serde::{Deserialize, Serialize};

use crate::error::{config, Result, VfosaError};
use crate::problem::Resolvent;
use crate::vector::DenseVector;

/// Default SCAD shape parameter.
pub const SCAD_A: f64 = 3.7;

/// `sign(xᵢ)·max(|xᵢ| − threshold, 0)`.
pub fn prox_l1(x: &[f64], threshold: f64) -> Result<DenseVector> {
    if !(threshold >= 0.0) {
        return Err(config(format!(
            "soft threshold must be nonnegative, got {threshold}"
        )));
    }
    let mut out = DenseVector::zeros(x.len());
    soft_threshold(x, threshold, &mut out);
    Ok(out)
}

fn soft_threshold(x: &[f64], threshold: f64, out: &mut [f64]) {
    for (o, &v) in out.iter_mut().zip(x) {
        let m = (v.abs() - threshold).max(0.0);
        *o = if m == 0.0 { 0.0 } else { m.copysign(v) };
    }
}

/// SCAD penalty at `t ≥ 0`.
fn scad_penalty(t: f64, weight: f64, a: f64) -> f64 {
    if t <= weight {
        weight * t
    } else if t <= a * weight {
        (2.0 * a * weight * t - t * t - weight * weight) / (2.0 * (a - 1.0))
    } else {
        (a + 1.0) * weight * weight / 2.0
    }
}

/// Global minimiser of `½(t − x)² + step·SCAD(t)` for `x ≥ 0`.
///
/// The objective is piecewise quadratic, so the minimiser is one of: the clamped
/// stationary point of each piece, or a breakpoint. Candidates are scanned in
/// increasing order and only a strictly smaller value replaces the incumbent,
/// which resolves ties toward the smaller magnitude.
fn scad_scalar(x: f64, step: f64, weight: f64, a: f64) -> f64 {
    let h = |t: f64| 0.5 * (t - x) * (t - x) + step * scad_penalty(t, weight, a);
    let aw = a * weight;
    let mut cands = [
        (x - step * weight).clamp(0.0, weight),
        weight,
        aw,
        x.max(aw),
        f64::NAN,
    ];
    let denom = a - 1.0 - step;
    if denom != 0.0 {
        cands[4] = (((a - 1.0) * x - step * aw) / denom).clamp(weight, aw);
    }
    let mut sorted: Vec<f64> = cands.into_iter().filter(|c| c.is_finite()).collect();
    sorted.sort_by(f64::total_cmp);
    let mut best = sorted[0];
    let mut best_val = h(best);
    for &t in &sorted[1..] {
        let v = h(t);
        if v < best_val {
            best = t;
            best_val = v;
        }
    }
    best
}

fn check_scad(step: f64, weight: f64, a: f64) -> Result<()> {
    if !(a > 2.0) {
        return Err(config(format!("SCAD requires a > 2, got {a}")));
    }
    if !(step > 0.0 && weight > 0.0 && (step * weight).is_finite()) {
        return Err(config(format!(
            "SCAD requires positive finite step and weight, got step = {step}, weight = {weight}"
        )));
    }
    Ok(())
}

fn scad_into(x: &[f64], step: f64, weight: f64, a: f64, out: &mut [f64]) {
    for (o, &v) in out.iter_mut().zip(x) {
        let t = scad_scalar(v.abs(), step, weight, a);
        *o = if v < 0.0 { -t } else { t };
    }
}

/// Componentwise minimiser of `½(t − xᵢ)² + step·SCAD_{weight,a}(t)`.
pub fn prox_scad(x: &[f64], step: f64, weight: f64, a: f64) -> Result<DenseVector> {
    check_scad(step, weight, a)?;
    let mut out = DenseVector::zeros(x.len());
    scad_into(x, step, weight, a, &mut out);
    Ok(out)
}

/// Euclidean projection onto the unit simplex `{w ≥ 0, Σw = 1}` by the sorted
/// cumulative threshold.
pub fn project_simplex(v: &[f64]) -> Result<DenseVector> {
    if v.is_empty() {
        return Err(config("cannot project an empty vector onto the simplex"));
    }
    let mut out = DenseVector::zeros(v.len());
    simplex_into(v, &mut out);
    Ok(out)
}

fn simplex_into(v: &[f64], out: &mut [f64]) {
    let mut u = v.to_vec();
    u.sort_by(|a, b| b.total_cmp(a));
    let mut cum = 0.0;
    let mut theta = 0.0;
    for (k, &uk) in u.iter().enumerate() {
        cum += uk;
        let t = (cum - 1.0) / (k + 1) as f64;
        if uk - t > 0.0 {
            theta = t;
        }
    }
    for (o, &x) in out.iter_mut().zip(v) {
        *o = (x - theta).max(0.0);
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Elementary {
    Identity,
    /// `T = weight·∂‖·‖₁`, resolvent threshold `λ·weight`.
    L1 {
        weight: f64,
    },
    /// `T = ∂SCAD_{weight,a}`, resolvent with step `λ`.
    Scad {
        weight: f64,
        a: f64,
    },
    /// Normal cone of the unit simplex; resolvent is the projection for any `λ`.
    Simplex,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Block {
    pub offset: usize,
    pub len: usize,
    pub kind: Elementary,
}

#[derive(Clone, Debug, PartialEq)]
pub struct BlockResolvent {
    blocks: Vec<Block>,
    dim: usize,
}

impl BlockResolvent {
    /// Blocks must tile `[0, p)` in order with no gaps or overlaps.
    pub fn new(blocks: Vec<Block>) -> Result<Self> {
        let mut next = 0;
        for b in &blocks {
            if b.offset != next {
                return Err(config(format!(
                    "blocks must tile the vector: expected offset {next}, found {}",
                    b.offset
                )));
            }
            if b.len == 0 {
                return Err(config(format!("empty block at offset {}", b.offset)));
            }
            match b.kind {
                Elementary::L1 { weight } if !(weight >= 0.0) => {
                    return Err(config(format!(
                        "l1 weight must be nonnegative, got {weight}"
                    )))
                }
                Elementary::Scad { weight, a } => check_scad(1.0, weight, a)?,
                _ => {}
            }
            next += b.len;
        }
        if next == 0 {
            return Err(config("block resolvent needs at least one block"));
        }
        Ok(Self { blocks, dim: next })
    }

    /// Consecutive blocks with the given lengths.
    pub fn from_lengths(parts: &[(usize, Elementary)]) -> Result<Self> {
        let mut offset = 0;
        let blocks = parts
            .iter()
            .map(|&(len, kind)| {
                let b = Block { offset, len, kind };
                offset += len;
                b
            })
            .collect();
        Self::new(blocks)
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn blocks(&self) -> &[Block] {
        &self.blocks
    }

    pub fn apply_checked(&self, x: &[f64], lambda: f64) -> Result<DenseVector> {
        if x.len() != self.dim {
            return Err(VfosaError::Dimension {
                expected: self.dim,
                got: x.len(),
            });
        }
        if !(lambda > 0.0) {
            return Err(config(format!("lambda must be positive, got {lambda}")));
        }
        let mut out = DenseVector::zeros(self.dim);
        self.apply(x, lambda, &mut out);
        Ok(out)
    }
}

impl Resolvent for BlockResolvent {
    fn apply(&self, x: &[f64], lambda: f64, out: &mut [f64]) {
        for b in &self.blocks {
            let r = b.offset..b.offset + b.len;
            let (xs, os) = (&x[r.clone()], &mut out[r]);
            match b.kind {
                Elementary::Identity => os.copy_from_slice(xs),
                Elementary::L1 { weight } => soft_threshold(xs, lambda * weight, os),
                Elementary::Scad { weight, a } => scad_into(xs, lambda, weight, a, os),
                Elementary::Simplex => simplex_into(xs, os),
            }
        }
    }

    fn project_domain(&self, x: &mut [f64]) {
        for b in self.blocks.iter().filter(|b| b.kind == Elementary::Simplex) {
            let r = b.offset..b.offset + b.len;
            let projected = project_simplex(&x[r.clone()]).expect("blocks are nonempty");
            x[r].copy_from_slice(&projected);
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    /// Grid minimiser of `½(t − x)² + step·SCAD(t)` over `[lo, hi]`.
    fn scad_grid(x: f64, step: f64, weight: f64, a: f64, lo: f64, hi: f64, h: f64) -> f64 {
        let steps = ((hi - lo) / h).round() as usize;
        (0..=steps)
            .map(|k| lo + k as f64 * h)
            .map(|t| {
                (
                    t,
                    0.5 * (t - x).powi(2) + step * scad_penalty(t.abs(), weight, a),
                )
            })
            .fold(
                (0.0, f64::INFINITY),
                |acc, c| if c.1 < acc.1 { c } else { acc },
            )
            .0
    }

    #[test]
    fn soft_threshold_examples() {
        assert_eq!(*prox_l1(&[1.5, -0.2], 1.0).unwrap(), [0.5, 0.0]);
        assert_eq!(*prox_l1(&[1.5, -0.2], 0.0).unwrap(), [1.5, -0.2]);
        assert_eq!(*prox_l1(&[0.3], 0.3).unwrap(), [0.0]);
        assert!(prox_l1(&[1.0], -1.0).is_err());
    }

    #[test]
    fn scad_identity_beyond_flat_region() {
        let out = prox_scad(&[0.05, -0.2, 3.0], 1.0, 0.005, SCAD_A).unwrap();
        assert_eq!(*out, [0.05, -0.2, 3.0]);
    }

    #[test]
    fn scad_zero_stays_zero() {
        assert_eq!(*prox_scad(&[0.0], 5.4, 1.0, SCAD_A).unwrap(), [0.0]);
    }

    #[test]
    fn scad_matches_grid_at_small_input() {
        let t = prox_scad(&[0.004], 1.0, 0.005, SCAD_A).unwrap()[0];
        let g = scad_grid(0.004, 1.0, 0.005, SCAD_A, -1.0, 1.0, 1e-5);
        assert!((t - g).abs() <= 2e-5, "prox {t}, grid {g}");
    }

    #[test]
    fn scad_large_step_is_hard_threshold_like() {
        // step > a − 1 makes the middle piece concave; the minimiser jumps.
        let w = 0.1;
        for &x in &[0.2, 0.5, 0.6, 1.0, 2.0] {
            let t = prox_scad(&[x], 5.4, w, SCAD_A).unwrap()[0];
            let g = scad_grid(x, 5.4, w, SCAD_A, -3.0, 3.0, 1e-5);
            assert!((t - g).abs() <= 2e-5, "x {x}: prox {t}, grid {g}");
        }
    }

    #[test]
    fn scad_errors() {
        assert!(prox_scad(&[1.0], 1.0, 1.0, 2.0).is_err());
        assert!(prox_scad(&[1.0], 0.0, 1.0, 3.7).is_err());
        assert!(prox_scad(&[1.0], 1.0, f64::INFINITY, 3.7).is_err());
    }

    #[test]
    fn simplex_examples() {
        assert_eq!(*project_simplex(&[0.5, 0.5]).unwrap(), [0.5, 0.5]);
        assert_eq!(*project_simplex(&[2.0, 0.0]).unwrap(), [1.0, 0.0]);
        for c in [-3.0, 0.0, 0.25, 7.5] {
            let out = project_simplex(&[c; 4]).unwrap();
            assert!(out.iter().all(|&v| (v - 0.25).abs() < 1e-15));
        }
        assert!(project_simplex(&[]).is_err());
    }

    #[test]
    fn block_layouts() {
        let ident =
            BlockResolvent::from_lengths(&[(2, Elementary::Identity), (1, Elementary::Identity)])
                .unwrap();
        assert_eq!(
            *ident.apply_checked(&[1.0, -2.0, 3.0], 0.7).unwrap(),
            [1.0, -2.0, 3.0]
        );

        let logistic = BlockResolvent::from_lengths(&[
            (2, Elementary::L1 { weight: 5e-3 }),
            (2, Elementary::Simplex),
        ])
        .unwrap();
        let out = logistic
            .apply_checked(&[0.01, -0.004, 2.0, 0.0], 1.0)
            .unwrap();
        assert!((out[0] - 0.005).abs() < 1e-15);
        assert_eq!(out[1], 0.0);
        assert_eq!(&out[2..], &[1.0, 0.0]);

        let game =
            BlockResolvent::from_lengths(&[(3, Elementary::Simplex), (3, Elementary::Simplex)])
                .unwrap();
        let out = game
            .apply_checked(&[0.3, -1.0, 4.0, 0.1, 0.1, 0.1], 2.0)
            .unwrap();
        assert!((out[..3].iter().sum::<f64>() - 1.0).abs() < 1e-12);
        assert!((out[3..].iter().sum::<f64>() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn block_construction_errors() {
        let gap = vec![
            Block {
                offset: 0,
                len: 2,
                kind: Elementary::Identity,
            },
            Block {
                offset: 3,
                len: 1,
                kind: Elementary::Identity,
            },
        ];
        assert!(BlockResolvent::new(gap).is_err());
        let overlap = vec![
            Block {
                offset: 0,
                len: 2,
                kind: Elementary::Identity,
            },
            Block {
                offset: 1,
                len: 2,
                kind: Elementary::Identity,
            },
        ];
        assert!(BlockResolvent::new(overlap).is_err());
        assert!(BlockResolvent::new(vec![]).is_err());
    }

    fn firmly_nonexpansive(res: &BlockResolvent, x: &[f64], y: &[f64], lambda: f64) -> bool {
        let jx = res.apply_checked(x, lambda).unwrap();
        let jy = res.apply_checked(y, lambda).unwrap();
        let dj: Vec<f64> = jx.iter().zip(jy.iter()).map(|(a, b)| a - b).collect();
        let dx: Vec<f64> = x.iter().zip(y).map(|(a, b)| a - b).collect();
        crate::vector::norm_sq(&dj) <= crate::vector::dot(&dj, &dx) + 1e-10
    }

    proptest! {
        #[test]
        fn scad_is_odd(x in -5.0f64..5.0, step in 0.01f64..6.0, w in 0.001f64..1.0) {
            let p = prox_scad(&[x], step, w, SCAD_A).unwrap()[0];
            let m = prox_scad(&[-x], step, w, SCAD_A).unwrap()[0];
            prop_assert_eq!(p, -m);
        }

        #[test]
        fn simplex_output_feasible(v in proptest::collection::vec(-10.0f64..10.0, 1..12)) {
            let w = project_simplex(&v).unwrap();
            prop_assert!(w.iter().all(|&x| x >= 0.0));
            prop_assert!((w.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        }

        #[test]
        fn convex_blocks_firmly_nonexpansive(
            x in proptest::collection::vec(-2.0f64..2.0, 6),
            y in proptest::collection::vec(-2.0f64..2.0, 6),
            lambda in 0.01f64..5.0,
            w in 0.0f64..1.0,
        ) {
            let res = BlockResolvent::from_lengths(&[
                (2, Elementary::L1 { weight: w }),
                (3, Elementary::Simplex),
                (1, Elementary::Identity),
            ]).unwrap();
            prop_assert!(firmly_nonexpansive(&res, &x, &y, lambda));
        }

        #[test]
        fn simplex_projection_idempotent(v in proptest::collection::vec(-3.0f64..3.0, 1..8)) {
            let once = project_simplex(&v).unwrap();
            let twice = project_simplex(&once).unwrap();
            for (a, b) in once.iter().zip(twice.iter()) {
                prop_assert!((a - b).abs() < 1e-12);
            }
        }
    }
}
