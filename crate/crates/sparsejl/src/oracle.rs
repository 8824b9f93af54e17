//! Ground-truth machinery: exact small-instance enumeration of the trinary
//! row error, worst-case vector construction, majorization checks, and
//! Monte-Carlo estimation of error moments and tails.
//!
//! The row error of a single row has the law sum_{i != j} eta_i eta_j x_i x_j
//! with eta_i i.i.d. trinary(p), because each column independently hits a
//! given row with probability s/m. Enumerating the 3^n sign/support patterns
//! therefore gives exact moments without touching matrix space.

use num::{BigInt, One, Signed, ToPrimitive, Zero};
use rayon::prelude::*;

use crate::embedding::project_streaming;
use crate::error::{Error, Result};
use crate::moment_engine::{binomial_rows, Rational};
use crate::rng;
use crate::row_bound::{check_dispersion, BoundParams};

const MAX_ENUM_LINEAR: usize = 12;
const MAX_ENUM_ROW: usize = 10;

/// The majorization-extreme unit vector: one coordinate v, the rest flat.
pub fn worst_case_vector(n: usize, v: f64) -> Result<Vec<f64>> {
    if n == 0 {
        return Err(Error::Argument("dimension must be positive".into()));
    }
    check_dispersion(n as u64, v)?;
    let mut x = vec![0.0; n];
    x[0] = v;
    if n > 1 {
        let rest = ((1.0 - v * v).max(0.0) / (n - 1) as f64).sqrt();
        for xi in x.iter_mut().skip(1) {
            *xi = rest;
        }
    }
    Ok(x)
}

/// True iff every descending-sorted prefix sum of `u` dominates that of `w`.
/// Requires equal lengths and equal totals (within 1e-9).
pub fn majorizes(u: &[f64], w: &[f64]) -> Result<bool> {
    if u.len() != w.len() {
        return Err(Error::Argument(format!(
            "length mismatch: {} vs {}",
            u.len(),
            w.len()
        )));
    }
    let su: f64 = u.iter().sum();
    let sw: f64 = w.iter().sum();
    if (su - sw).abs() > 1e-9 {
        return Err(Error::Argument(format!(
            "majorization requires equal sums (got {su} vs {sw})"
        )));
    }
    let mut a = u.to_vec();
    let mut b = w.to_vec();
    a.sort_by(|x, y| y.partial_cmp(x).unwrap());
    b.sort_by(|x, y| y.partial_cmp(x).unwrap());
    let mut pa = 0.0;
    let mut pb = 0.0;
    for (x, y) in a.iter().zip(&b) {
        pa += x;
        pb += y;
        if pa < pb - 1e-12 {
            return Ok(false);
        }
    }
    Ok(true)
}

fn check_enum_p(p: &Rational) -> Result<()> {
    if !p.is_positive() || p > &Rational::one() {
        return Err(Error::Argument(format!("probability p = {p} out of (0, 1]")));
    }
    Ok(())
}

/// Iterate over all 3^n assignments of (eta_1..eta_n) in {-1,0,1}^n, calling
/// `f(etas, nonzero_count)` for each.
fn enumerate_trinary(n: usize, mut f: impl FnMut(&[i8], usize)) {
    let total = 3usize.pow(n as u32);
    let mut etas = vec![0i8; n];
    for idx in 0..total {
        let mut rem = idx;
        let mut nonzero = 0;
        for e in etas.iter_mut() {
            let digit = rem % 3;
            rem /= 3;
            *e = digit as i8 - 1;
            if digit != 1 {
                nonzero += 1;
            }
        }
        f(&etas, nonzero);
    }
}

fn outcome_weights(p: &Rational, n: usize) -> (Vec<Rational>, Vec<Rational>) {
    let half = p / Rational::from(BigInt::from(2));
    let zero_p = Rational::one() - p;
    let mut pow_half = Vec::with_capacity(n + 1);
    let mut pow_zero = Vec::with_capacity(n + 1);
    pow_half.push(Rational::one());
    pow_zero.push(Rational::one());
    for k in 1..=n {
        pow_half.push(&pow_half[k - 1] * &half);
        pow_zero.push(&pow_zero[k - 1] * &zero_p);
    }
    (pow_half, pow_zero)
}

/// Exact E[(sum_i x_i Y_i)^d] by full enumeration over 3^n outcomes.
pub fn exact_linear_moment(x: &[Rational], p: &Rational, d: usize) -> Result<Rational> {
    check_enum_p(p)?;
    let n = x.len();
    if n == 0 || n > MAX_ENUM_LINEAR {
        return Err(Error::Resource(format!(
            "enumeration limited to 1..={MAX_ENUM_LINEAR} variables (got {n})"
        )));
    }
    let (pow_half, pow_zero) = outcome_weights(p, n);
    let mut acc = Rational::zero();
    enumerate_trinary(n, |etas, nonzero| {
        let mut s = Rational::zero();
        for (e, xi) in etas.iter().zip(x) {
            match e {
                1 => s += xi,
                -1 => s -= xi,
                _ => {}
            }
        }
        if !s.is_zero() || d == 0 {
            acc += s.pow(d as i32) * &pow_half[nonzero] * &pow_zero[n - nonzero];
        }
    });
    Ok(acc)
}

/// Exact E[E_r(x)^d] with E_r(x) = sum_{i != j} eta_i eta_j x_i x_j, by full
/// enumeration over 3^n sign/support patterns.
pub fn exact_row_moment(x: &[Rational], p: &Rational, d: usize) -> Result<Rational> {
    check_enum_p(p)?;
    let n = x.len();
    if n == 0 || n > MAX_ENUM_ROW {
        return Err(Error::Resource(format!(
            "enumeration limited to 1..={MAX_ENUM_ROW} variables (got {n})"
        )));
    }
    let squares: Vec<Rational> = x.iter().map(|xi| xi * xi).collect();
    let (pow_half, pow_zero) = outcome_weights(p, n);
    let mut acc = Rational::zero();
    enumerate_trinary(n, |etas, nonzero| {
        let mut s = Rational::zero();
        let mut sq = Rational::zero();
        for ((e, xi), xi2) in etas.iter().zip(x).zip(&squares) {
            match e {
                1 => {
                    s += xi;
                    sq += xi2;
                }
                -1 => {
                    s -= xi;
                    sq += xi2;
                }
                _ => {}
            }
        }
        let row = &s * &s - sq;
        if !row.is_zero() || d == 0 {
            acc += row.pow(d as i32) * &pow_half[nonzero] * &pow_zero[n - nonzero];
        }
    });
    Ok(acc)
}

/// Exact E[(sum_i x_i Y_i)^d] as a function of the squared weights
/// u_i = x_i^2 only, via moment convolution over the independent summands.
/// Only even d is meaningful (odd moments vanish by symmetry).
///
/// This route is independent of both the 3^n enumeration and the cumulant
/// pipeline, and works for rational u whose square roots are irrational.
pub fn linear_moment_from_squares(u: &[Rational], p: &Rational, d: usize) -> Result<Rational> {
    check_enum_p(p)?;
    if d % 2 != 0 {
        return Err(Error::Argument("order must be even".into()));
    }
    if u.is_empty() {
        return Err(Error::Argument("empty weight vector".into()));
    }
    let binom = binomial_rows(d.max(1));
    let mut cur = vec![Rational::zero(); d + 1];
    cur[0] = Rational::one();
    for ui in u {
        // Moments of x_i Y_i: order 2k is u_i^k p for k >= 1, odd orders 0.
        let mut z = vec![Rational::zero(); d + 1];
        z[0] = Rational::one();
        let mut upow = Rational::one();
        for k in 1..=d / 2 {
            upow *= ui;
            z[2 * k] = &upow * p;
        }
        let mut next = vec![Rational::zero(); d + 1];
        for (j, nj) in next.iter_mut().enumerate() {
            let mut acc = Rational::zero();
            for k in (0..=j).step_by(2) {
                if cur[k].is_zero() || z[j - k].is_zero() {
                    continue;
                }
                acc += Rational::from(binom[j][k].clone()) * &cur[k] * &z[j - k];
            }
            *nj = acc;
        }
        cur = next;
    }
    Ok(cur[d].clone())
}

/// Exact E[(Y_1 + ... + Y_count)^j] by literal enumeration over 3^count
/// outcomes; the independent oracle for the cumulant-based sum moments.
pub fn sum_moment_by_enumeration(p: &Rational, count: usize, j: usize) -> Result<Rational> {
    check_enum_p(p)?;
    if count == 0 || count > MAX_ENUM_LINEAR {
        return Err(Error::Resource(format!(
            "enumeration limited to 1..={MAX_ENUM_LINEAR} summands (got {count})"
        )));
    }
    let (pow_half, pow_zero) = outcome_weights(p, count);
    let mut acc = Rational::zero();
    enumerate_trinary(count, |etas, nonzero| {
        let s: i64 = etas.iter().map(|&e| e as i64).sum();
        let val = BigInt::from(s).pow(j as u32);
        acc += Rational::from(val) * &pow_half[nonzero] * &pow_zero[count - nonzero];
    });
    Ok(acc)
}

/// Monte-Carlo tail estimate with a Wilson 99% interval.
#[derive(Clone, Debug)]
pub struct TailEstimate {
    pub trials: u64,
    pub exceed_count: u64,
    pub point_estimate: f64,
    pub wilson_99_low: f64,
    pub wilson_99_high: f64,
}

/// Two-sided 99% normal quantile.
const Z_99: f64 = 2.5758293035489004;

pub fn wilson_interval(successes: u64, trials: u64, z: f64) -> (f64, f64) {
    if trials == 0 {
        return (0.0, 1.0);
    }
    let n = trials as f64;
    let phat = successes as f64 / n;
    let z2 = z * z;
    let denom = 1.0 + z2 / n;
    let center = (phat + z2 / (2.0 * n)) / denom;
    let half = z / denom * (phat * (1.0 - phat) / n + z2 / (4.0 * n * n)).sqrt();
    ((center - half).max(0.0), (center + half).min(1.0))
}

fn relative_error(params: &BoundParams, x: &[f64], x2: f64, trial_seed: u64) -> f64 {
    let y = project_streaming(
        params.n() as usize,
        params.m() as usize,
        params.s() as usize,
        trial_seed,
        x,
    );
    let y2: f64 = y.iter().map(|a| a * a).sum();
    (y2 - x2) / x2
}

/// Sample `trials` independent column-wor embeddings and count how often the
/// relative squared-norm error exceeds epsilon. Deterministic given the
/// seed; trials run in parallel with per-trial derived seeds.
pub fn mc_error_tail(
    params: &BoundParams,
    x: &[f64],
    epsilon: f64,
    trials: u64,
    seed: u64,
) -> Result<TailEstimate> {
    if trials < 1 {
        return Err(Error::Argument("trials must be >= 1".into()));
    }
    if x.len() != params.n() as usize {
        return Err(Error::Argument("vector length does not match n".into()));
    }
    let x2: f64 = x.iter().map(|a| a * a).sum();
    if x2 == 0.0 {
        return Err(Error::Argument("zero vector".into()));
    }
    let exceed_count: u64 = (0..trials)
        .into_par_iter()
        .map(|trial| {
            let e = relative_error(params, x, x2, rng::mix(seed, trial));
            u64::from(e.abs() > epsilon)
        })
        .sum();
    let point = exceed_count as f64 / trials as f64;
    let (lo, hi) = wilson_interval(exceed_count, trials, Z_99);
    Ok(TailEstimate {
        trials,
        exceed_count,
        point_estimate: point,
        wilson_99_low: lo,
        wilson_99_high: hi,
    })
}

/// Empirical moment norm with a batch standard error.
#[derive(Clone, Debug)]
pub struct MomentEstimate {
    pub trials: u64,
    pub d: usize,
    /// (mean of |E|^d)^{1/d}
    pub norm: f64,
    /// Standard error of the 10 batch norms.
    pub std_err: f64,
    pub batch_norms: Vec<f64>,
}

const MOMENT_BATCHES: u64 = 10;

/// Empirical ||E(x)||_d over `trials` embeddings, with a 10-batch standard
/// error. E is the relative squared-norm error, matching a unit input.
pub fn mc_error_moment(
    params: &BoundParams,
    x: &[f64],
    d: usize,
    trials: u64,
    seed: u64,
) -> Result<MomentEstimate> {
    if d % 2 != 0 || d == 0 {
        return Err(Error::Argument("order d must be even and positive".into()));
    }
    if trials < MOMENT_BATCHES {
        return Err(Error::Argument(format!("need at least {MOMENT_BATCHES} trials")));
    }
    if x.len() != params.n() as usize {
        return Err(Error::Argument("vector length does not match n".into()));
    }
    let x2: f64 = x.iter().map(|a| a * a).sum();
    if x2 == 0.0 {
        return Err(Error::Argument("zero vector".into()));
    }
    let values: Vec<f64> = (0..trials)
        .into_par_iter()
        .map(|trial| {
            let e = relative_error(params, x, x2, rng::mix(seed, trial));
            e.abs().powi(d as i32)
        })
        .collect();
    // Deterministic aggregation: sequential sums over fixed batch windows.
    let mut batch_norms = Vec::with_capacity(MOMENT_BATCHES as usize);
    let per_batch = trials / MOMENT_BATCHES;
    for b in 0..MOMENT_BATCHES {
        let start = (b * per_batch) as usize;
        let end = if b == MOMENT_BATCHES - 1 {
            trials as usize
        } else {
            ((b + 1) * per_batch) as usize
        };
        let mean: f64 = values[start..end].iter().sum::<f64>() / (end - start) as f64;
        batch_norms.push(mean.powf(1.0 / d as f64));
    }
    let total_mean: f64 = values.iter().sum::<f64>() / trials as f64;
    let norm = total_mean.powf(1.0 / d as f64);
    let bmean: f64 = batch_norms.iter().sum::<f64>() / batch_norms.len() as f64;
    let var: f64 = batch_norms.iter().map(|b| (b - bmean) * (b - bmean)).sum::<f64>()
        / (batch_norms.len() - 1) as f64;
    let std_err = (var / batch_norms.len() as f64).sqrt();
    Ok(MomentEstimate {
        trials,
        d,
        norm,
        std_err,
        batch_norms,
    })
}

/// Robin-Hood transfer in squared-weight space: move mass from a larger to a
/// smaller coordinate. The result is majorized by the input.
pub fn robin_hood_transfer(u: &[Rational], rng: &mut rng::SplitMix64) -> Vec<Rational> {
    let n = u.len();
    let mut out = u.to_vec();
    if n < 2 {
        return out;
    }
    for _ in 0..8 {
        let i = rng.below(n as u64) as usize;
        let j = rng.below(n as u64) as usize;
        if i == j {
            continue;
        }
        let (rich, poor) = if out[i] >= out[j] { (i, j) } else { (j, i) };
        let gap = &out[rich] - &out[poor];
        if gap.is_zero() {
            continue;
        }
        // Move a random dyadic fraction of at most half the gap.
        let frac = Rational::new(BigInt::from(1 + rng.below(8)), BigInt::from(16));
        let delta = gap * frac;
        out[rich] -= &delta;
        out[poor] += &delta;
    }
    out
}

/// Reverse transfer: move mass from a smaller to a larger coordinate,
/// capped by `cap`. The result majorizes the input, and no entry exceeds
/// the cap (so a shared maximum entry is preserved).
pub fn concentrate_transfer(
    u: &[Rational],
    cap: &Rational,
    rng: &mut rng::SplitMix64,
) -> Vec<Rational> {
    let n = u.len();
    let mut out = u.to_vec();
    if n < 2 {
        return out;
    }
    for _ in 0..8 {
        let i = rng.below(n as u64) as usize;
        let j = rng.below(n as u64) as usize;
        if i == j {
            continue;
        }
        let (rich, poor) = if out[i] >= out[j] { (i, j) } else { (j, i) };
        let headroom = cap - &out[rich];
        let available = out[poor].clone();
        let limit = if headroom < available { headroom } else { available };
        if !limit.is_positive() {
            continue;
        }
        let frac = Rational::new(BigInt::from(1 + rng.below(8)), BigInt::from(16));
        let delta = limit * frac;
        out[rich] += &delta;
        out[poor] -= &delta;
    }
    out
}

pub fn rational_to_f64_vec(u: &[Rational]) -> Vec<f64> {
    u.iter().map(|r| r.to_f64().unwrap_or(f64::NAN)).collect()
}
