//! Sampling and application of the sparse sign matrix.
//!
//! Each column carries s signed entries of magnitude 1/sqrt(s). Sampling is
//! keyed by (seed, column) through the splittable generator, so columns are
//! reproducible independently and a matrix is fully determined by its
//! header (n, m, s, variant, seed).

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng::{self, floyd_sample};

/// How the nonzero positions are chosen.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Variant {
    /// s distinct rows per column (the default construction).
    ColumnWor,
    /// s distinct columns per row.
    RowWor,
    /// s rows per column, sampled with replacement.
    WithReplacement,
}

impl std::str::FromStr for Variant {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "column-wor" => Ok(Variant::ColumnWor),
            "row-wor" => Ok(Variant::RowWor),
            "with-replacement" => Ok(Variant::WithReplacement),
            other => Err(Error::Argument(format!(
                "unknown variant '{other}' (expected column-wor, row-wor or with-replacement)"
            ))),
        }
    }
}

impl std::fmt::Display for Variant {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let s = match self {
            Variant::ColumnWor => "column-wor",
            Variant::RowWor => "row-wor",
            Variant::WithReplacement => "with-replacement",
        };
        f.write_str(s)
    }
}

/// Serializable record from which a matrix is reconstructed; entries are
/// never stored, only re-sampled from the seed.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct EmbeddingHeader {
    pub version: u32,
    pub n: usize,
    pub m: usize,
    pub s: usize,
    pub variant: Variant,
    pub seed: u64,
}

pub const HEADER_VERSION: u32 = 1;

/// A sampled m x n sparse sign matrix, stored column-compressed.
#[derive(Clone, Debug)]
pub struct SparseEmbedding {
    n: usize,
    m: usize,
    s: usize,
    variant: Variant,
    seed: u64,
    /// Per column: (row index, sign) pairs in sampling order.
    columns: Vec<Vec<(u32, i8)>>,
    scale: f64,
}

/// Stream offset separating row-keyed from column-keyed draws.
const ROW_STREAM_BASE: u64 = 1 << 63;

fn sample_column(seed: u64, col: u64, m: u64, s: u64) -> Vec<(u32, i8)> {
    let mut rng = rng::stream(seed, col);
    let rows = floyd_sample(&mut rng, m, s);
    rows.into_iter().map(|r| (r, rng.next_sign())).collect()
}

pub fn sample_matrix(
    n: usize,
    m: usize,
    s: usize,
    variant: Variant,
    seed: u64,
) -> Result<SparseEmbedding> {
    if n == 0 || m == 0 {
        return Err(Error::Argument("dimensions must be positive".into()));
    }
    let limit = match variant {
        Variant::RowWor => n,
        _ => m,
    };
    if s < 1 || s > limit {
        return Err(Error::Argument(format!(
            "sparsity s = {s} out of range 1..={limit} for variant {variant}"
        )));
    }
    let scale = 1.0 / (s as f64).sqrt();
    let mut columns: Vec<Vec<(u32, i8)>> = match variant {
        Variant::ColumnWor => (0..n)
            .map(|i| sample_column(seed, i as u64, m as u64, s as u64))
            .collect(),
        Variant::WithReplacement => (0..n)
            .map(|i| {
                let mut rng = rng::stream(seed, i as u64);
                (0..s)
                    .map(|_| {
                        let r = rng.below(m as u64) as u32;
                        (r, rng.next_sign())
                    })
                    .collect()
            })
            .collect(),
        Variant::RowWor => {
            let mut cols: Vec<Vec<(u32, i8)>> = vec![Vec::new(); n];
            for r in 0..m {
                let mut rng = rng::stream(seed, ROW_STREAM_BASE | r as u64);
                let picked = floyd_sample(&mut rng, n as u64, s as u64);
                for c in picked {
                    cols[c as usize].push((r as u32, rng.next_sign()));
                }
            }
            cols
        }
    };
    columns.shrink_to_fit();
    Ok(SparseEmbedding {
        n,
        m,
        s,
        variant,
        seed,
        columns,
        scale,
    })
}

impl SparseEmbedding {
    pub fn n(&self) -> usize {
        self.n
    }

    pub fn m(&self) -> usize {
        self.m
    }

    pub fn s(&self) -> usize {
        self.s
    }

    pub fn variant(&self) -> Variant {
        self.variant
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn scale(&self) -> f64 {
        self.scale
    }

    pub fn column(&self, i: usize) -> &[(u32, i8)] {
        &self.columns[i]
    }

    pub fn header(&self) -> EmbeddingHeader {
        EmbeddingHeader {
            version: HEADER_VERSION,
            n: self.n,
            m: self.m,
            s: self.s,
            variant: self.variant,
            seed: self.seed,
        }
    }

    pub fn from_header(h: &EmbeddingHeader) -> Result<Self> {
        if h.version != HEADER_VERSION {
            return Err(Error::Argument(format!(
                "unsupported embedding header version {}",
                h.version
            )));
        }
        sample_matrix(h.n, h.m, h.s, h.variant, h.seed)
    }

    /// y = A x, accumulated column by column in stored entry order.
    pub fn apply(&self, x: &[f64]) -> Result<Vec<f64>> {
        if x.len() != self.n {
            return Err(Error::Argument(format!(
                "input length {} does not match ambient dimension {}",
                x.len(),
                self.n
            )));
        }
        let mut y = vec![0.0f64; self.m];
        for (i, col) in self.columns.iter().enumerate() {
            let xi = x[i];
            if xi == 0.0 {
                continue;
            }
            let scaled = xi * self.scale;
            for &(r, sign) in col {
                y[r as usize] += f64::from(sign) * scaled;
            }
        }
        Ok(y)
    }

    /// Same as `apply` for a sparse input given as (index, value) pairs.
    pub fn apply_sparse(&self, x: &[(usize, f64)]) -> Result<Vec<f64>> {
        let mut y = vec![0.0f64; self.m];
        for &(i, xi) in x {
            if i >= self.n {
                return Err(Error::Argument(format!(
                    "sparse index {i} out of range for ambient dimension {}",
                    self.n
                )));
            }
            if xi == 0.0 {
                continue;
            }
            let scaled = xi * self.scale;
            for &(r, sign) in &self.columns[i] {
                y[r as usize] += f64::from(sign) * scaled;
            }
        }
        Ok(y)
    }

    /// Relative squared-norm error ||Ax||^2 / ||x||^2 - 1.
    ///
    /// The 1/s scaling is applied once to the squared norm rather than per
    /// entry, so 1-sparse inputs report exactly zero distortion.
    pub fn distortion(&self, x: &[f64]) -> Result<f64> {
        let x2: f64 = x.iter().map(|a| a * a).sum();
        if x2 == 0.0 {
            return Err(Error::Argument("distortion of the zero vector is undefined".into()));
        }
        if x.len() != self.n {
            return Err(Error::Argument(format!(
                "input length {} does not match ambient dimension {}",
                x.len(),
                self.n
            )));
        }
        let mut u = vec![0.0f64; self.m];
        for (i, col) in self.columns.iter().enumerate() {
            let xi = x[i];
            if xi == 0.0 {
                continue;
            }
            for &(r, sign) in col {
                u[r as usize] += f64::from(sign) * xi;
            }
        }
        let y2: f64 = u.iter().map(|a| a * a).sum::<f64>() / self.s as f64;
        Ok(y2 / x2 - 1.0)
    }
}

/// Sample (column-wor) and apply in one pass, without materializing the
/// matrix. Bit-identical to `sample_matrix(..).apply(x)` for the same seed.
pub fn project_streaming(n: usize, m: usize, s: usize, seed: u64, x: &[f64]) -> Vec<f64> {
    debug_assert_eq!(x.len(), n);
    let scale = 1.0 / (s as f64).sqrt();
    let mut y = vec![0.0f64; m];
    for (i, &xi) in x.iter().enumerate() {
        if xi == 0.0 {
            continue;
        }
        let col = sample_column(seed, i as u64, m as u64, s as u64);
        let scaled = xi * scale;
        for (r, sign) in col {
            y[r as usize] += f64::from(sign) * scaled;
        }
    }
    y
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn full_columns_when_s_equals_m() {
        let e = sample_matrix(3, 4, 4, Variant::ColumnWor, 1).unwrap();
        for i in 0..3 {
            let mut rows: Vec<u32> = e.column(i).iter().map(|&(r, _)| r).collect();
            rows.sort_unstable();
            assert_eq!(rows, vec![0, 1, 2, 3]);
        }
    }

    #[test]
    fn resampling_is_deterministic() {
        let a = sample_matrix(1000, 100, 3, Variant::ColumnWor, 7).unwrap();
        let b = sample_matrix(1000, 100, 3, Variant::ColumnWor, 7).unwrap();
        assert_eq!(a.columns, b.columns);
        let c = sample_matrix(1000, 100, 3, Variant::ColumnWor, 8).unwrap();
        assert_ne!(a.columns, c.columns);
    }

    #[test]
    fn entry_magnitudes_follow_scaling_rule() {
        let e = sample_matrix(10, 20, 3, Variant::ColumnWor, 5).unwrap();
        assert!((e.scale() - 1.0 / 3f64.sqrt()).abs() < 1e-15);
        for i in 0..10 {
            assert_eq!(e.column(i).len(), 3);
            for &(_, sign) in e.column(i) {
                assert!(sign == 1 || sign == -1);
            }
        }
    }

    #[test]
    fn s_out_of_range_rejected() {
        assert!(sample_matrix(3, 4, 5, Variant::ColumnWor, 0).is_err());
        assert!(sample_matrix(3, 4, 0, Variant::ColumnWor, 0).is_err());
        assert!(sample_matrix(3, 4, 4, Variant::RowWor, 0).is_err()); // s > n
        assert!(sample_matrix(5, 4, 4, Variant::RowWor, 0).is_ok());
    }

    #[test]
    fn apply_basics() {
        let e = sample_matrix(6, 8, 2, Variant::ColumnWor, 3).unwrap();
        let zero = vec![0.0; 6];
        assert!(e.apply(&zero).unwrap().iter().all(|&y| y == 0.0));
        assert!(e.apply(&[1.0, 2.0]).is_err());

        // x = e_i: exactly s entries of magnitude 1/sqrt(s).
        for i in 0..6 {
            let mut x = vec![0.0; 6];
            x[i] = 1.0;
            let y = e.apply(&x).unwrap();
            let norm2: f64 = y.iter().map(|a| a * a).sum();
            assert!((norm2 - 1.0).abs() < 1e-12);
            assert_eq!(e.distortion(&x).unwrap(), 0.0);
        }
    }

    #[test]
    fn apply_is_linear() {
        let e = sample_matrix(12, 16, 4, Variant::ColumnWor, 11).unwrap();
        let x: Vec<f64> = (0..12).map(|i| (i as f64 * 0.37).sin()).collect();
        let y = e.apply(&x).unwrap();
        let xs: Vec<f64> = x.iter().map(|a| 2.5 * a).collect();
        let ys = e.apply(&xs).unwrap();
        for (a, b) in y.iter().zip(&ys) {
            assert!((2.5 * a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn sparse_apply_matches_dense() {
        let e = sample_matrix(10, 12, 3, Variant::ColumnWor, 2).unwrap();
        let mut x = vec![0.0; 10];
        x[2] = 1.5;
        x[7] = -0.25;
        let dense = e.apply(&x).unwrap();
        let sparse = e.apply_sparse(&[(2, 1.5), (7, -0.25)]).unwrap();
        assert_eq!(dense, sparse);
    }

    #[test]
    fn streaming_matches_materialized() {
        let (n, m, s, seed) = (50, 30, 4, 99);
        let e = sample_matrix(n, m, s, Variant::ColumnWor, seed).unwrap();
        let x: Vec<f64> = (0..n).map(|i| ((i * i) as f64 * 0.01).cos()).collect();
        let a = e.apply(&x).unwrap();
        let b = project_streaming(n, m, s, seed, &x);
        assert_eq!(a, b);
    }

    #[test]
    fn header_round_trip() {
        let e = sample_matrix(40, 16, 2, Variant::RowWor, 13).unwrap();
        let json = serde_json::to_string(&e.header()).unwrap();
        let h: EmbeddingHeader = serde_json::from_str(&json).unwrap();
        let e2 = SparseEmbedding::from_header(&h).unwrap();
        assert_eq!(e.columns, e2.columns);
    }

    #[test]
    fn row_wor_has_s_entries_per_row() {
        let (n, m, s) = (9, 5, 3);
        let e = sample_matrix(n, m, s, Variant::RowWor, 4).unwrap();
        let mut per_row = vec![0usize; m];
        for i in 0..n {
            for &(r, _) in e.column(i) {
                per_row[r as usize] += 1;
            }
        }
        assert!(per_row.iter().all(|&c| c == s));
    }

    #[test]
    fn column_marginal_rate() {
        // Empirical P(A_{r,i} != 0) = s/m within binomial bounds.
        let (n, m, s) = (4000, 10, 3);
        let e = sample_matrix(n, m, s, Variant::ColumnWor, 21).unwrap();
        let mut hits = vec![0u64; m];
        for i in 0..n {
            for &(r, _) in e.column(i) {
                hits[r as usize] += 1;
            }
        }
        let p = s as f64 / m as f64;
        let se = (p * (1.0 - p) / n as f64).sqrt();
        for &h in &hits {
            let rate = h as f64 / n as f64;
            assert!((rate - p).abs() < 5.0 * se, "rate {rate} vs p {p}");
        }
    }
}
