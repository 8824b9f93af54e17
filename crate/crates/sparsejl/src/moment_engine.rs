//! Exact moments of sums of i.i.d. symmetric trinary variables.
//!
//! A trinary variable takes values +1 and -1 with probability p/2 each and 0
//! with probability 1-p. The scaled binomial difference B' - B'' appearing in
//! the per-row bound has the same law as (n-1)^{-1/2} times a sum of n-1 such
//! variables, so all of its moments are computed here, exactly, in big
//! rationals: single-variable raw moments are converted to cumulants, the
//! cumulants are scaled by the number of summands, and the result is
//! converted back to raw moments. No floating point is involved until the
//! module boundary.

use std::collections::HashMap;
use std::sync::Mutex;
use std::sync::OnceLock;

use num::{BigInt, BigRational, One, Signed, ToPrimitive, Zero};

use crate::error::{Error, Result};

pub type Rational = BigRational;

/// Shorthand for a small rational constant.
pub fn ratio(num: i64, den: i64) -> Rational {
    Rational::new(BigInt::from(num), BigInt::from(den))
}

/// Convert once, at the module boundary, round-to-nearest.
pub fn to_f64(r: &Rational) -> f64 {
    r.to_f64().unwrap_or(f64::NAN)
}

fn check_p(p: &Rational) -> Result<()> {
    if !p.is_positive() || p > &ratio(1, 2) {
        return Err(Error::Domain(format!(
            "nonzero-probability p = {p} must lie in (0, 1/2]: a Bernoulli parameter sigma \
             with sigma^2 + (1-sigma)^2 = 1-p exists only in that range"
        )));
    }
    Ok(())
}

fn check_even_order(d_max: usize) -> Result<()> {
    if d_max == 0 || d_max % 2 != 0 {
        return Err(Error::Argument(format!(
            "maximal order d_max = {d_max} must be a positive even integer"
        )));
    }
    Ok(())
}

/// Pascal triangle rows 0..=n of exact binomial coefficients.
pub fn binomial_rows(n: usize) -> Vec<Vec<BigInt>> {
    let mut rows: Vec<Vec<BigInt>> = Vec::with_capacity(n + 1);
    rows.push(vec![BigInt::one()]);
    for i in 1..=n {
        let prev = &rows[i - 1];
        let mut row = Vec::with_capacity(i + 1);
        row.push(BigInt::one());
        for k in 1..i {
            row.push(&prev[k - 1] + &prev[k]);
        }
        row.push(BigInt::one());
        rows.push(row);
    }
    rows
}

/// Exact binomial coefficient C(n, k) as f64 (rounded once).
pub fn binomial_f64(n: usize, k: usize) -> f64 {
    let rows = binomial_rows(n);
    rows[n][k].to_f64().unwrap_or(f64::INFINITY)
}

/// The symmetric three-point law on {-1, 0, 1} with P(Y != 0) = p.
#[derive(Clone, Debug, PartialEq)]
pub struct TrinaryLaw {
    p: Rational,
}

impl TrinaryLaw {
    pub fn new(p: Rational) -> Result<Self> {
        check_p(&p)?;
        Ok(Self { p })
    }

    pub fn p(&self) -> &Rational {
        &self.p
    }

    /// E[Y^j]: 1 for j = 0, 0 for odd j, p for even j >= 2.
    pub fn raw_moment(&self, j: usize) -> Rational {
        if j == 0 {
            Rational::one()
        } else if j % 2 == 1 {
            Rational::zero()
        } else {
            self.p.clone()
        }
    }
}

/// Raw moments E[Y^j] for j = 0..=d_max of a single trinary variable.
pub fn trinary_moments(p: &Rational, d_max: usize) -> Result<Vec<Rational>> {
    check_even_order(d_max)?;
    let law = TrinaryLaw::new(p.clone())?;
    Ok((0..=d_max).map(|j| law.raw_moment(j)).collect())
}

/// Raw moments -> cumulants via the recursive moment-cumulant identity.
fn raw_to_cumulants(moments: &[Rational], binom: &[Vec<BigInt>]) -> Vec<Rational> {
    let d = moments.len() - 1;
    let mut kappa: Vec<Rational> = vec![Rational::zero(); d + 1];
    for n in 1..=d {
        let mut acc = moments[n].clone();
        for k in 1..n {
            let c = Rational::from(binom[n - 1][k - 1].clone());
            acc -= c * &kappa[k] * &moments[n - k];
        }
        kappa[n] = acc;
    }
    kappa
}

/// Cumulants -> raw moments (inverse of `raw_to_cumulants`).
fn cumulants_to_raw(kappa: &[Rational], binom: &[Vec<BigInt>]) -> Vec<Rational> {
    let d = kappa.len() - 1;
    let mut m: Vec<Rational> = vec![Rational::zero(); d + 1];
    m[0] = Rational::one();
    for n in 1..=d {
        let mut acc = Rational::zero();
        for k in 1..=n {
            let c = Rational::from(binom[n - 1][k - 1].clone());
            acc += c * &kappa[k] * &m[n - k];
        }
        m[n] = acc;
    }
    m
}

/// Exact raw moments of S = Y_1 + ... + Y_N, orders 0..=d_max.
#[derive(Clone, Debug, PartialEq)]
pub struct MomentTable {
    p: Rational,
    count: u64,
    moments: Vec<Rational>,
}

impl MomentTable {
    pub fn p(&self) -> &Rational {
        &self.p
    }

    pub fn count(&self) -> u64 {
        self.count
    }

    pub fn max_order(&self) -> usize {
        self.moments.len() - 1
    }

    pub fn moment(&self, j: usize) -> &Rational {
        &self.moments[j]
    }

    pub fn moments(&self) -> &[Rational] {
        &self.moments
    }
}

fn compute_sum_moments(p: &Rational, count: u64, d_max: usize) -> Vec<Rational> {
    let binom = binomial_rows(d_max.max(1));
    let law = TrinaryLaw { p: p.clone() };
    let single: Vec<Rational> = (0..=d_max).map(|j| law.raw_moment(j)).collect();
    let mut kappa = raw_to_cumulants(&single, &binom);
    let n_big = Rational::from(BigInt::from(count));
    for k in kappa.iter_mut() {
        *k *= &n_big;
    }
    cumulants_to_raw(&kappa, &binom)
}

type CacheKey = (Rational, u64);

fn cache() -> &'static Mutex<HashMap<CacheKey, Vec<Rational>>> {
    static CACHE: OnceLock<Mutex<HashMap<CacheKey, Vec<Rational>>>> = OnceLock::new();
    CACHE.get_or_init(|| Mutex::new(HashMap::new()))
}

/// Exact moments of S = sum of `count` i.i.d. trinary(p) variables.
///
/// Results are cached per (p, count) up to the largest order requested so
/// far; cached and uncached results are bit-identical since the computation
/// is exact.
pub fn sum_moments(p: &Rational, count: u64, d_max: usize) -> Result<MomentTable> {
    check_p(p)?;
    check_even_order(d_max)?;
    if count == 0 {
        return Err(Error::Argument("summand count must be positive".into()));
    }
    let key = (p.clone(), count);
    let mut guard = cache().lock().expect("moment cache poisoned");
    let entry = guard.entry(key).or_default();
    if entry.len() <= d_max {
        *entry = compute_sum_moments(p, count, d_max);
    }
    Ok(MomentTable {
        p: p.clone(),
        count,
        moments: entry[..=d_max].to_vec(),
    })
}

/// E[(B' - B'')^j] where B', B'' are i.i.d. (n-1)^{-1/2} Binom(n-1, sigma)
/// with 2 sigma (1 - sigma) = p. Uses the identity B' - B'' =_d
/// (n-1)^{-1/2} (Y_1 + ... + Y_{n-1}); exact until the final conversion.
pub fn binom_diff_moment(n: u64, p: &Rational, j: usize) -> Result<f64> {
    check_p(p)?;
    if n < 2 {
        return Err(Error::Argument(format!("ambient dimension n = {n} must be >= 2")));
    }
    if j == 0 {
        return Ok(1.0);
    }
    if j % 2 == 1 {
        return Ok(0.0);
    }
    let table = sum_moments(p, n - 1, j)?;
    let scale = Rational::from(BigInt::from(n - 1).pow((j / 2) as u32));
    Ok(to_f64(&(table.moment(j) / scale)))
}
