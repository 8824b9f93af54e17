//! Dataset loading, dispersion profiling over pairwise differences, and
//! empirical distortion measurement.

use std::io::{BufRead, BufReader};
use std::path::{Path, PathBuf};

use rayon::prelude::*;

use crate::embedding::project_streaming;
use crate::error::{Error, Result};
use crate::rng;
use crate::row_bound::BoundParams;
use crate::tail_bounds::{self, BoundKind};

/// Supported input formats.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Format {
    /// One row per line, comma-separated decimals; `has_header` skips the
    /// first line.
    DenseCsv { has_header: bool },
    /// Matrix Market exchange format (coordinate, real/integer,
    /// general or symmetric); matrix rows become dataset vectors.
    MatrixMarket,
}

#[derive(Clone, Debug)]
pub struct Dataset {
    rows: Vec<Vec<f64>>,
    n: usize,
    source: PathBuf,
}

impl Dataset {
    pub fn from_rows(rows: Vec<Vec<f64>>, source: PathBuf) -> Result<Self> {
        if rows.is_empty() {
            return Err(Error::Load { line: 0, msg: "empty dataset".into() });
        }
        let n = rows[0].len();
        for (i, r) in rows.iter().enumerate() {
            if r.len() != n {
                return Err(Error::Load {
                    line: i + 1,
                    msg: format!("ragged row: expected {n} entries, found {}", r.len()),
                });
            }
            if let Some(bad) = r.iter().find(|v| !v.is_finite()) {
                return Err(Error::Load {
                    line: i + 1,
                    msg: format!("non-finite entry {bad}"),
                });
            }
        }
        Ok(Self { rows, n, source })
    }

    pub fn rows(&self) -> &[Vec<f64>] {
        &self.rows
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn source(&self) -> &Path {
        &self.source
    }
}

fn load_dense_csv(path: &Path, has_header: bool) -> Result<Dataset> {
    let file = std::fs::File::open(path)?;
    let reader = BufReader::new(file);
    let mut rows: Vec<Vec<f64>> = Vec::new();
    let mut width: Option<usize> = None;
    for (idx, line) in reader.lines().enumerate() {
        let lineno = idx + 1;
        let line = line?;
        if idx == 0 && has_header {
            continue;
        }
        if line.trim().is_empty() {
            continue;
        }
        let mut row = Vec::new();
        for field in line.split(',') {
            let v: f64 = field.trim().parse().map_err(|_| Error::Load {
                line: lineno,
                msg: format!("cannot parse '{}' as a number", field.trim()),
            })?;
            if !v.is_finite() {
                return Err(Error::Load {
                    line: lineno,
                    msg: format!("non-finite entry {v}"),
                });
            }
            row.push(v);
        }
        match width {
            None => width = Some(row.len()),
            Some(w) if w != row.len() => {
                return Err(Error::Load {
                    line: lineno,
                    msg: format!("ragged row: expected {w} entries, found {}", row.len()),
                })
            }
            _ => {}
        }
        rows.push(row);
    }
    if rows.is_empty() {
        return Err(Error::Load { line: 0, msg: "empty dataset".into() });
    }
    Dataset::from_rows(rows, path.to_path_buf())
}

fn load_matrix_market(path: &Path) -> Result<Dataset> {
    let file = std::fs::File::open(path)?;
    let reader = BufReader::new(file);
    let mut lines = reader.lines().enumerate();

    let (_, header) = lines
        .next()
        .ok_or(Error::Load { line: 0, msg: "empty dataset".into() })?;
    let header = header?;
    let tokens: Vec<String> = header.split_whitespace().map(|t| t.to_lowercase()).collect();
    if tokens.len() < 5
        || tokens[0] != "%%matrixmarket"
        || tokens[1] != "matrix"
        || tokens[2] != "coordinate"
    {
        return Err(Error::Load {
            line: 1,
            msg: format!("unsupported Matrix Market header '{header}' (need 'matrix coordinate')"),
        });
    }
    let field = tokens[3].as_str();
    if !matches!(field, "real" | "integer" | "pattern") {
        return Err(Error::Load {
            line: 1,
            msg: format!("unsupported field type '{field}'"),
        });
    }
    let symmetry = tokens[4].as_str();
    if !matches!(symmetry, "general" | "symmetric") {
        return Err(Error::Load {
            line: 1,
            msg: format!("unsupported symmetry '{symmetry}'"),
        });
    }

    // Size line: first non-comment line after the header.
    let mut size: Option<(usize, usize, usize)> = None;
    let mut rows: Vec<Vec<f64>> = Vec::new();
    let mut seen_entries = 0usize;
    for (idx, line) in lines {
        let lineno = idx + 1;
        let line = line?;
        let trimmed = line.trim();
        if trimmed.is_empty() || trimmed.starts_with('%') {
            continue;
        }
        let fields: Vec<&str> = trimmed.split_whitespace().collect();
        match size {
            None => {
                if fields.len() != 3 {
                    return Err(Error::Load {
                        line: lineno,
                        msg: format!("expected 'rows cols nnz' size line, got '{trimmed}'"),
                    });
                }
                let parse = |s: &str| -> Result<usize> {
                    s.parse().map_err(|_| Error::Load {
                        line: lineno,
                        msg: format!("cannot parse size field '{s}'"),
                    })
                };
                let (r, c, nnz) = (parse(fields[0])?, parse(fields[1])?, parse(fields[2])?);
                if r == 0 || c == 0 {
                    return Err(Error::Load { line: lineno, msg: "empty dataset".into() });
                }
                rows = vec![vec![0.0; c]; r];
                size = Some((r, c, nnz));
            }
            Some((r, c, _)) => {
                let need = if field == "pattern" { 2 } else { 3 };
                if fields.len() != need {
                    return Err(Error::Load {
                        line: lineno,
                        msg: format!("expected {need} fields in entry line, got '{trimmed}'"),
                    });
                }
                let i: usize = fields[0].parse().map_err(|_| Error::Load {
                    line: lineno,
                    msg: format!("bad row index '{}'", fields[0]),
                })?;
                let j: usize = fields[1].parse().map_err(|_| Error::Load {
                    line: lineno,
                    msg: format!("bad column index '{}'", fields[1]),
                })?;
                if i < 1 || i > r || j < 1 || j > c {
                    return Err(Error::Load {
                        line: lineno,
                        msg: format!("index ({i}, {j}) outside {r} x {c}"),
                    });
                }
                let v: f64 = if field == "pattern" {
                    1.0
                } else {
                    fields[2].parse().map_err(|_| Error::Load {
                        line: lineno,
                        msg: format!("cannot parse value '{}'", fields[2]),
                    })?
                };
                if !v.is_finite() {
                    return Err(Error::Load {
                        line: lineno,
                        msg: format!("non-finite entry {v}"),
                    });
                }
                rows[i - 1][j - 1] = v;
                if symmetry == "symmetric" && i != j {
                    rows[j - 1][i - 1] = v;
                }
                seen_entries += 1;
            }
        }
    }
    let Some((_, _, nnz)) = size else {
        return Err(Error::Load { line: 0, msg: "missing size line".into() });
    };
    if seen_entries != nnz {
        return Err(Error::Load {
            line: 0,
            msg: format!("entry count mismatch: header says {nnz}, file has {seen_entries}"),
        });
    }
    Dataset::from_rows(rows, path.to_path_buf())
}

pub fn load(path: &Path, format: Format) -> Result<Dataset> {
    match format {
        Format::DenseCsv { has_header } => load_dense_csv(path, has_header),
        Format::MatrixMarket => load_matrix_market(path),
    }
}

pub const DEFAULT_SUBSAMPLE: usize = 250;
pub const PROFILE_QUANTILES: [f64; 7] = [0.01, 0.05, 0.25, 0.50, 0.75, 0.95, 0.99];

/// Empirical distribution of v = ||x1 - x2||_inf / ||x1 - x2||_2 over the
/// distinct pairs of a subsample.
#[derive(Clone, Debug)]
pub struct DispersionProfile {
    pub sample_pairs: usize,
    pub skipped_identical: usize,
    pub values: Vec<f64>,
    /// (quantile level, value) at 1/5/25/50/75/95/99 percent.
    pub quantiles: Vec<(f64, f64)>,
    /// The median: the dataset's "typical" dispersion.
    pub typical: f64,
}

fn quantile(sorted: &[f64], q: f64) -> f64 {
    let pos = q * (sorted.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    if lo == hi {
        sorted[lo]
    } else {
        let w = pos - lo as f64;
        sorted[lo] * (1.0 - w) + sorted[hi] * w
    }
}

pub fn dispersion_of(diff: &[f64]) -> Option<f64> {
    let norm2: f64 = diff.iter().map(|a| a * a).sum();
    if norm2 == 0.0 {
        return None;
    }
    let inf = diff.iter().fold(0.0f64, |acc, a| acc.max(a.abs()));
    Some(inf / norm2.sqrt())
}

/// Subsample-without-replacement indices into a canonical (file) ordering.
fn subsample_indices(total: usize, size: usize, seed: u64) -> Vec<usize> {
    let mut rng = rng::stream(seed, 0);
    let take = size.min(total) as u64;
    rng::floyd_sample(&mut rng, total as u64, take)
        .into_iter()
        .map(|i| i as usize)
        .collect()
}

pub fn dispersion_profile(
    dataset: &Dataset,
    subsample_size: usize,
    seed: u64,
) -> Result<DispersionProfile> {
    if dataset.len() < 2 {
        return Err(Error::Argument("need at least 2 rows for pairwise dispersion".into()));
    }
    let idx = subsample_indices(dataset.len(), subsample_size.max(2), seed);
    let mut values = Vec::new();
    let mut skipped = 0usize;
    for (a, &i) in idx.iter().enumerate() {
        for &j in &idx[a + 1..] {
            let diff: Vec<f64> = dataset.rows[i]
                .iter()
                .zip(&dataset.rows[j])
                .map(|(x, y)| x - y)
                .collect();
            match dispersion_of(&diff) {
                Some(v) => values.push(v),
                None => skipped += 1,
            }
        }
    }
    if values.is_empty() {
        return Err(Error::Argument(
            "degenerate dataset: all sampled pairs are identical".into(),
        ));
    }
    let mut sorted = values.clone();
    sorted.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let quantiles: Vec<(f64, f64)> = PROFILE_QUANTILES
        .iter()
        .map(|&q| (q, quantile(&sorted, q)))
        .collect();
    let typical = quantile(&sorted, 0.5);
    Ok(DispersionProfile {
        sample_pairs: values.len(),
        skipped_identical: skipped,
        values,
        quantiles,
        typical,
    })
}

/// One grid point of the empirical-vs-proved exceedance table.
#[derive(Clone, Debug)]
pub struct DistortionRow {
    pub epsilon: f64,
    pub exceed_count: u64,
    pub total: u64,
    pub exceed_rate: f64,
    /// Proved failure bound at the dataset's typical dispersion.
    pub proved_typical: f64,
    /// Worst proved failure bound over the sampled pairs' own dispersions.
    pub proved_perpair_max: f64,
}

/// Measure |E(x1 - x2)| / ||x1 - x2||^2 over sampled pairs and embedding
/// seeds, and tabulate exceedance per epsilon next to the proved bounds.
#[allow(clippy::too_many_arguments)]
pub fn empirical_distortion_profile(
    dataset: &Dataset,
    m: u64,
    s: u64,
    pair_count: usize,
    seeds_per_pair: usize,
    epsilon_grid: &[f64],
    seed: u64,
    d_max: usize,
) -> Result<Vec<DistortionRow>> {
    if pair_count == 0 {
        return Ok(Vec::new());
    }
    if dataset.len() < 2 {
        return Err(Error::Argument("need at least 2 rows".into()));
    }
    let n = dataset.dim() as u64;
    let mut pair_rng = rng::stream(seed, 1);
    let mut diffs: Vec<Vec<f64>> = Vec::with_capacity(pair_count);
    let mut attempts = 0;
    while diffs.len() < pair_count && attempts < pair_count * 20 {
        attempts += 1;
        let i = pair_rng.below(dataset.len() as u64) as usize;
        let j = pair_rng.below(dataset.len() as u64) as usize;
        if i == j {
            continue;
        }
        let diff: Vec<f64> = dataset.rows[i]
            .iter()
            .zip(&dataset.rows[j])
            .map(|(x, y)| x - y)
            .collect();
        if dispersion_of(&diff).is_some() {
            diffs.push(diff);
        }
    }
    if diffs.is_empty() {
        return Err(Error::Argument(
            "degenerate dataset: all sampled pairs are identical".into(),
        ));
    }
    let pair_vs: Vec<f64> = diffs.iter().map(|d| dispersion_of(d).unwrap()).collect();
    let mut sorted_vs = pair_vs.clone();
    sorted_vs.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let typical_v = quantile(&sorted_vs, 0.5);

    // All |relative error| samples, pairs x seeds.
    let errors: Vec<f64> = diffs
        .par_iter()
        .enumerate()
        .flat_map_iter(|(pi, diff)| {
            let x2: f64 = diff.iter().map(|a| a * a).sum();
            (0..seeds_per_pair).map(move |si| {
                let trial_seed = rng::mix(seed, ((pi as u64) << 32) | si as u64);
                let y = project_streaming(diff.len(), m as usize, s as usize, trial_seed, diff);
                let y2: f64 = y.iter().map(|a| a * a).sum();
                ((y2 - x2) / x2).abs()
            })
        })
        .collect();

    let mut rows = Vec::with_capacity(epsilon_grid.len());
    let total = errors.len() as u64;
    for &eps in epsilon_grid {
        let exceed = errors.iter().filter(|&&e| e > eps).count() as u64;
        let proved_at = |v: f64| -> Result<f64> {
            let params = BoundParams::new(n, m, s, v)?;
            tail_bounds::confidence_at_epsilon_with(BoundKind::New, &params, eps, d_max)
        };
        let proved_typical = proved_at(typical_v)?;
        let mut perpair_max = 0.0f64;
        for &v in &pair_vs {
            perpair_max = perpair_max.max(proved_at(v)?);
        }
        rows.push(DistortionRow {
            epsilon: eps,
            exceed_count: exceed,
            total,
            exceed_rate: exceed as f64 / total as f64,
            proved_typical,
            proved_perpair_max: perpair_max,
        });
    }
    Ok(rows)
}
