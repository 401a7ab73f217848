use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::data::AmbiguousFeatures;
use crate::vector::{dot, norm};

/// Floor returned for an all-zero operator.
pub const L_FLOOR: f64 = 1e-12;

const TOL: f64 = 1e-8;
const MAX_ITER: usize = 1000;

/// Largest eigenvalue of a symmetric PSD operator given by `apply(v, out)`
/// (`out` arrives zeroed). Stops when the Rayleigh quotient changes by less
/// than `1e-8` relative, or after 1000 iterations. The start vector is a
/// fixed-seed Gaussian, so results are reproducible.
pub fn power_iteration(dim: usize, apply: impl Fn(&[f64], &mut [f64])) -> f64 {
    let mut rng = ChaCha8Rng::seed_from_u64(0x5eed);
    let mut v: Vec<f64> = (0..dim).map(|_| StandardNormal.sample(&mut rng)).collect();
    let nv = norm(&v);
    v.iter_mut().for_each(|x| *x /= nv);
    let mut w = vec![0.0; dim];
    let mut est = 0.0f64;
    for _ in 0..MAX_ITER {
        w.iter_mut().for_each(|x| *x = 0.0);
        apply(&v, &mut w);
        let next = dot(&v, &w);
        let nw = norm(&w);
        if nw == 0.0 {
            return 0.0;
        }
        v.iter_mut().zip(&w).for_each(|(a, b)| *a = b / nw);
        let done = (next - est).abs() <= TOL * next.abs();
        est = next;
        if done {
            break;
        }
    }
    est
}

/// `L = ¼ λmax(MᵀM)` over every stacked ambiguous copy, floored at `1e-12`.
pub fn estimate_l_features(features: &AmbiguousFeatures) -> f64 {
    let top = power_iteration(features.dim, |v, out| features.gram_apply(v, out));
    (0.25 * top).max(L_FLOOR)
}

/// `‖A‖₂` of a dense row-major `rows × cols` matrix.
pub fn spectral_norm(a: &[f64], rows: usize, cols: usize) -> f64 {
    let top = power_iteration(cols, |v, out| {
        for r in 0..rows {
            let row = &a[r * cols..(r + 1) * cols];
            let t = dot(row, v);
            out.iter_mut().zip(row).for_each(|(o, x)| *o += t * x);
        }
    });
    top.max(0.0).sqrt()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::{make_ambiguous, SparseDataset, SparseRow};
    use nalgebra::DMatrix;

    fn features(rows: Vec<Vec<f64>>) -> AmbiguousFeatures {
        let dim = rows[0].len();
        let ds = SparseDataset {
            labels: vec![0; rows.len()],
            rows: rows
                .into_iter()
                .map(|r| SparseRow {
                    indices: (0..dim).collect(),
                    values: r,
                })
                .collect(),
            dim,
            has_bias: false,
        };
        make_ambiguous(&ds, 1, 0.0, &mut ChaCha8Rng::seed_from_u64(0)).unwrap()
    }

    #[test]
    fn identity_gives_quarter() {
        let rows = (0..5)
            .map(|i| (0..5).map(|j| f64::from(u8::from(i == j))).collect())
            .collect();
        assert!((estimate_l_features(&features(rows)) - 0.25).abs() < 1e-12);
    }

    #[test]
    fn rank_one() {
        assert!((estimate_l_features(&features(vec![vec![1.0, 0.0]])) - 0.25).abs() < 1e-12);
    }

    #[test]
    fn zero_matrix_is_floored() {
        assert_eq!(
            estimate_l_features(&features(vec![vec![0.0, 0.0]])),
            L_FLOOR
        );
    }

    #[test]
    fn matches_dense_eigensolver() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let data: Vec<f64> = (0..500).map(|_| StandardNormal.sample(&mut rng)).collect();
        let rows: Vec<Vec<f64>> = data.chunks(10).map(|c| c.to_vec()).collect();
        let m = DMatrix::from_row_slice(50, 10, &data);
        let oracle = (m.transpose() * &m).symmetric_eigenvalues().max();
        let l = estimate_l_features(&features(rows));
        assert!(
            (l - 0.25 * oracle).abs() <= 1e-6 * 0.25 * oracle,
            "{l} vs {}",
            0.25 * oracle
        );
        let s = spectral_norm(&data, 50, 10);
        assert!((s - oracle.sqrt()).abs() <= 1e-6 * oracle.sqrt());
    }
}
