//! LIBSVM datasets, preprocessing, synthetic binary data and ambiguous
//! feature copies.

use std::collections::HashSet;
use std::io::BufRead;
use std::path::Path;

use rand::Rng;
use rand_distr::{Distribution, Normal, StandardNormal};

use crate::error::{config, Result, VfosaError};

/// Sparse row with strictly increasing 0-based indices.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct SparseRow {
    pub indices: Vec<usize>,
    pub values: Vec<f64>,
}

impl SparseRow {
    pub fn norm(&self) -> f64 {
        self.values.iter().map(|v| v * v).sum::<f64>().sqrt()
    }

    pub fn dot(&self, x: &[f64]) -> f64 {
        self.indices
            .iter()
            .zip(&self.values)
            .map(|(&i, v)| v * x[i])
            .sum()
    }

    pub fn to_dense(&self, dim: usize) -> Vec<f64> {
        let mut out = vec![0.0; dim];
        for (&i, &v) in self.indices.iter().zip(&self.values) {
            out[i] = v;
        }
        out
    }
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct SparseDataset {
    pub rows: Vec<SparseRow>,
    /// Binary labels in `{0, 1}`.
    pub labels: Vec<u8>,
    pub dim: usize,
    /// Whether the last coordinate is the appended constant column.
    pub has_bias: bool,
}

/// Maps a raw label to `{0, 1}`: `−1 → 0`, otherwise the parity of a
/// nonnegative integer (`+1 → 1`, even digits `→ 0`, odd digits `→ 1`).
fn binarize(token: &str) -> Option<u8> {
    let v: f64 = token.parse().ok()?;
    if v.fract() != 0.0 {
        return None;
    }
    if v == -1.0 {
        Some(0)
    } else if v >= 0.0 {
        Some((v as u64 % 2) as u8)
    } else {
        None
    }
}

pub fn parse_libsvm(path: &Path) -> Result<SparseDataset> {
    let f = std::fs::File::open(path)?;
    parse_libsvm_reader(std::io::BufReader::new(f))
}

/// Parses `label idx:val idx:val …` lines with 1-based indices. Blank lines
/// and `#` comments are skipped.
pub fn parse_libsvm_reader<R: BufRead>(reader: R) -> Result<SparseDataset> {
    let mut ds = SparseDataset::default();
    let mut seen = HashSet::new();
    for (k, line) in reader.lines().enumerate() {
        let line_no = k + 1;
        let line = line?;
        let content = line.split('#').next().unwrap_or("").trim();
        if content.is_empty() {
            continue;
        }
        let err = |msg: String| VfosaError::Parse { line: line_no, msg };
        let mut tokens = content.split_whitespace();
        let label_tok = tokens.next().expect("nonempty line has a token");
        let label = binarize(label_tok).ok_or_else(|| err(format!("bad label {label_tok:?}")))?;
        seen.clear();
        let mut entries = Vec::new();
        for tok in tokens {
            let (i, v) = tok
                .split_once(':')
                .ok_or_else(|| err(format!("malformed token {tok:?}")))?;
            let idx: usize = i
                .parse()
                .map_err(|_| err(format!("malformed index in {tok:?}")))?;
            if idx == 0 {
                return Err(err(format!("indices are 1-based, got {tok:?}")));
            }
            let val: f64 = v
                .parse()
                .map_err(|_| err(format!("malformed value in {tok:?}")))?;
            if !val.is_finite() {
                return Err(err(format!("non-finite value in {tok:?}")));
            }
            if !seen.insert(idx) {
                return Err(err(format!("duplicate index {idx}")));
            }
            entries.push((idx - 1, val));
        }
        entries.sort_by_key(|e| e.0);
        if let Some(&(last, _)) = entries.last() {
            ds.dim = ds.dim.max(last + 1);
        }
        let (indices, values) = entries.into_iter().unzip();
        ds.rows.push(SparseRow { indices, values });
        ds.labels.push(label);
    }
    Ok(ds)
}

impl SparseDataset {
    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    /// Scales every nonzero row to unit norm, ignoring the bias column.
    pub fn normalize_rows(&mut self) {
        let bias = self.has_bias.then(|| self.dim - 1);
        for row in &mut self.rows {
            let sq: f64 = row
                .indices
                .iter()
                .zip(&row.values)
                .filter(|(i, _)| Some(**i) != bias)
                .map(|(_, v)| v * v)
                .sum();
            let nrm = sq.sqrt();
            if nrm > 0.0 && nrm != 1.0 {
                for (i, v) in row.indices.iter().zip(row.values.iter_mut()) {
                    if Some(*i) != bias {
                        *v /= nrm;
                    }
                }
            }
        }
    }

    /// Appends a constant-one column as the last coordinate.
    pub fn append_bias(&mut self) {
        if self.has_bias {
            return;
        }
        let b = self.dim;
        for row in &mut self.rows {
            row.indices.push(b);
            row.values.push(1.0);
        }
        self.dim += 1;
        self.has_bias = true;
    }

    /// Unit-norm rows, then a bias column.
    pub fn preprocess(mut self) -> Self {
        self.normalize_rows();
        self.append_bias();
        self
    }

    /// Dense Gaussian features on the unit sphere with labels drawn from a
    /// logistic model `P(y = 1) = σ(⟨w, x⟩)`, `w = 3·N(0, I)`. No bias column.
    pub fn synthetic<R: Rng + ?Sized>(n: usize, dim: usize, rng: &mut R) -> Result<Self> {
        if n == 0 || dim == 0 {
            return Err(config("synthetic dataset needs n >= 1 and dim >= 1"));
        }
        let w: Vec<f64> = (0..dim)
            .map(|_| {
                let z: f64 = StandardNormal.sample(rng);
                3.0 * z
            })
            .collect();
        let mut rows = Vec::with_capacity(n);
        let mut labels = Vec::with_capacity(n);
        for _ in 0..n {
            let mut x: Vec<f64> = (0..dim).map(|_| StandardNormal.sample(rng)).collect();
            let nrm = x.iter().map(|v| v * v).sum::<f64>().sqrt();
            x.iter_mut().for_each(|v| *v /= nrm);
            let z: f64 = x.iter().zip(&w).map(|(a, b)| a * b).sum();
            labels.push(u8::from(rng.random::<f64>() < sigmoid(z)));
            rows.push(SparseRow {
                indices: (0..dim).collect(),
                values: x,
            });
        }
        Ok(Self {
            rows,
            labels,
            dim,
            has_bias: false,
        })
    }
}

pub(crate) fn sigmoid(t: f64) -> f64 {
    if t >= 0.0 {
        1.0 / (1.0 + (-t).exp())
    } else {
        let e = t.exp();
        e / (1.0 + e)
    }
}

/// `p₂` noisy copies of each row sharing the row's support.
#[derive(Clone, Debug, PartialEq)]
pub struct AmbiguousFeatures {
    pub dim: usize,
    pub copies: usize,
    pub rows: Vec<AmbiguousRow>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct AmbiguousRow {
    pub indices: Vec<usize>,
    /// `copies × indices.len()`, copy-major.
    pub values: Vec<f64>,
}

impl AmbiguousRow {
    pub fn copy(&self, j: usize) -> &[f64] {
        let m = self.indices.len();
        &self.values[j * m..(j + 1) * m]
    }

    pub fn dot(&self, j: usize, u: &[f64]) -> f64 {
        self.indices
            .iter()
            .zip(self.copy(j))
            .map(|(&i, v)| v * u[i])
            .sum()
    }
}

impl AmbiguousFeatures {
    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    /// Applies `out += Mᵀ M v`, where `M` stacks every copy of every row.
    pub fn gram_apply(&self, v: &[f64], out: &mut [f64]) {
        for row in &self.rows {
            for j in 0..self.copies {
                let t = row.dot(j, v);
                for (&i, x) in row.indices.iter().zip(row.copy(j)) {
                    out[i] += t * x;
                }
            }
        }
    }
}

/// `X_ij = X̂_i + σ·N(0, I)` on the support of `X̂_i`; the bias entry stays 1.
pub fn make_ambiguous<R: Rng + ?Sized>(
    dataset: &SparseDataset,
    copies: usize,
    sigma: f64,
    rng: &mut R,
) -> Result<AmbiguousFeatures> {
    if copies < 1 {
        return Err(config(format!(
            "need at least one ambiguous copy, got {copies}"
        )));
    }
    let noise =
        Normal::new(0.0, sigma).map_err(|e| config(format!("bad noise level {sigma}: {e}")))?;
    let bias = dataset.has_bias.then(|| dataset.dim - 1);
    let rows = dataset
        .rows
        .iter()
        .map(|row| {
            let mut values = Vec::with_capacity(copies * row.values.len());
            for _ in 0..copies {
                for (&i, &v) in row.indices.iter().zip(&row.values) {
                    values.push(if Some(i) == bias {
                        v
                    } else {
                        v + noise.sample(rng)
                    });
                }
            }
            AmbiguousRow {
                indices: row.indices.clone(),
                values,
            }
        })
        .collect();
    Ok(AmbiguousFeatures {
        dim: dataset.dim,
        copies,
        rows,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn parse(s: &str) -> Result<SparseDataset> {
        parse_libsvm_reader(s.as_bytes())
    }

    #[test]
    fn parses_basic_line() {
        let ds = parse("1 1:0.5 3:0.5\n").unwrap();
        assert_eq!(ds.labels, vec![1]);
        assert_eq!(ds.rows[0].indices, vec![0, 2]);
        assert_eq!(ds.rows[0].values, vec![0.5, 0.5]);
        assert_eq!(ds.dim, 3);
    }

    #[test]
    fn relabels() {
        assert_eq!(parse("-1 2:1.0\n").unwrap().labels, vec![0]);
        assert_eq!(parse("+1 2:1.0\n").unwrap().labels, vec![1]);
        assert_eq!(
            parse("7 1:1\n4 1:1\n0 1:1\n").unwrap().labels,
            vec![1, 0, 0]
        );
    }

    #[test]
    fn fixture_styles() {
        // a9a/w8a: ±1 labels, binary features; gisette: dense-ish reals; mnist: digits.
        let a9a = "-1 3:1 11:1 14:1\n+1 5:1 7:1\n";
        let gisette = "1 1:-0.4 2:0.13 3:1e-3 4:2.5E+1\n-1 1:0.0 4:-1\n";
        let mnist = "5 153:0.0117647 154:0.0705882\n0 128:0.5\n";
        assert_eq!(parse(a9a).unwrap().len(), 2);
        assert_eq!(parse(gisette).unwrap().dim, 4);
        let m = parse(mnist).unwrap();
        assert_eq!(m.labels, vec![1, 0]);
        assert_eq!(m.dim, 154);
    }

    #[test]
    fn unsorted_indices_are_sorted() {
        let ds = parse("1 4:1 2:2\n").unwrap();
        assert_eq!(ds.rows[0].indices, vec![1, 3]);
        assert_eq!(ds.rows[0].values, vec![2.0, 1.0]);
    }

    #[test]
    fn errors_carry_line_numbers() {
        let cases = [
            ("1 1:1\n1 2:x\n", 2, "malformed value"),
            ("1 1:1\n\n1 1:1 1:2\n", 3, "duplicate index 1"),
            ("1 1:1 foo\n", 1, "malformed token"),
            ("0.5 1:1\n", 1, "bad label"),
            ("1 0:1\n", 1, "1-based"),
        ];
        for (text, line, needle) in cases {
            match parse(text) {
                Err(VfosaError::Parse { line: l, msg }) => {
                    assert_eq!(l, line, "{text:?}");
                    assert!(msg.contains(needle), "{msg}");
                }
                other => panic!("{text:?}: {other:?}"),
            }
        }
    }

    #[test]
    fn preprocessing() {
        let ds = parse("1 1:3 2:4\n-1 3:2\n").unwrap().preprocess();
        assert_eq!(ds.dim, 4);
        assert_eq!(ds.rows[0].values, vec![0.6, 0.8, 1.0]);
        assert_eq!(ds.rows[1].indices, vec![2, 3]);
        assert_eq!(ds.rows[1].values, vec![1.0, 1.0]);
        let again = ds.clone().preprocess();
        assert_eq!(again, ds);
    }

    #[test]
    fn zero_noise_copies_equal_rows() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let ds = SparseDataset::synthetic(5, 4, &mut rng)
            .unwrap()
            .preprocess();
        let amb = make_ambiguous(&ds, 3, 0.0, &mut rng).unwrap();
        for (a, r) in amb.rows.iter().zip(&ds.rows) {
            for j in 0..3 {
                assert_eq!(a.copy(j), &r.values[..]);
            }
        }
        assert!(make_ambiguous(&ds, 0, 0.05, &mut rng).is_err());
    }

    #[test]
    fn noise_mean_is_small() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let ds = SparseDataset::synthetic(1, 6, &mut rng)
            .unwrap()
            .preprocess();
        let sigma = 0.05;
        let m = 10_000;
        let amb = make_ambiguous(&ds, m, sigma, &mut rng).unwrap();
        let row = &amb.rows[0];
        for k in 0..row.indices.len() {
            let mean = (0..m)
                .map(|j| row.copy(j)[k] - ds.rows[0].values[k])
                .sum::<f64>()
                / m as f64;
            assert!(mean.abs() <= 3.0 * sigma / 100.0, "{mean}");
        }
        // bias slot is never perturbed
        assert!((0..m).all(|j| *row.copy(j).last().unwrap() == 1.0));
    }

    #[test]
    fn single_copy() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let ds = SparseDataset::synthetic(4, 3, &mut rng)
            .unwrap()
            .preprocess();
        let amb = make_ambiguous(&ds, 1, 0.05, &mut rng).unwrap();
        assert_eq!(amb.copies, 1);
        assert!(amb.rows.iter().all(|r| r.values.len() == r.indices.len()));
    }

    #[test]
    fn synthetic_rows_are_unit() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let ds = SparseDataset::synthetic(50, 7, &mut rng).unwrap();
        assert!(ds.rows.iter().all(|r| (r.norm() - 1.0).abs() < 1e-12));
        assert!(ds.labels.iter().any(|&l| l == 0) && ds.labels.iter().any(|&l| l == 1));
    }

    proptest! {
        #[test]
        fn normalization_idempotent(vals in proptest::collection::vec(-10.0f64..10.0, 1..8)) {
            let line: String = std::iter::once("1".to_string())
                .chain(vals.iter().enumerate().map(|(i, v)| format!("{}:{}", i + 1, v)))
                .collect::<Vec<_>>()
                .join(" ");
            let mut once = parse(&line).unwrap();
            once.normalize_rows();
            let mut twice = once.clone();
            twice.normalize_rows();
            for (a, b) in once.rows[0].values.iter().zip(&twice.rows[0].values) {
                prop_assert!((a - b).abs() <= 1e-15);
            }
        }
    }
}
