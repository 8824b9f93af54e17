//! Per-row moment bound T_{n,p,d}(v) and the baseline bounds it is
//! compared against.
//!
//! T bounds the d-th moment norm of a single row's error contribution for a
//! unit vector with dispersion v = ||x||_inf / ||x||_2. The baseline is the
//! better of two prior-work row bounds with optimistic constants C1 = 4e and
//! C2 = 8.

use num::{BigInt, FromPrimitive};

use crate::error::{Error, Result};
use crate::moment_engine::{self, Rational};

/// Parameters shared by every bound: ambient dimension n, embedding
/// dimension m, column sparsity s (so p = s/m), and dispersion v.
#[derive(Clone, Debug, PartialEq)]
pub struct BoundParams {
    n: u64,
    m: u64,
    s: u64,
    v: f64,
}

impl BoundParams {
    pub fn new(n: u64, m: u64, s: u64, v: f64) -> Result<Self> {
        if n < 2 {
            return Err(Error::Domain(format!("ambient dimension n = {n} must be >= 2")));
        }
        if s < 1 || s > m {
            return Err(Error::Domain(format!(
                "column sparsity s = {s} must satisfy 1 <= s <= m = {m}"
            )));
        }
        if 2 * s > m {
            return Err(Error::Domain(format!(
                "p = s/m = {s}/{m} exceeds 1/2; the binomial representation of the row \
                 error does not exist in that regime"
            )));
        }
        check_dispersion(n, v)?;
        Ok(Self { n, m, s, v })
    }

    pub fn n(&self) -> u64 {
        self.n
    }

    pub fn m(&self) -> u64 {
        self.m
    }

    pub fn s(&self) -> u64 {
        self.s
    }

    pub fn v(&self) -> f64 {
        self.v
    }

    /// Exact p = s/m.
    pub fn p(&self) -> Rational {
        Rational::new(BigInt::from(self.s), BigInt::from(self.m))
    }

    pub fn p_f64(&self) -> f64 {
        self.s as f64 / self.m as f64
    }
}

pub(crate) fn check_dispersion(n: u64, v: f64) -> Result<()> {
    let floor = 1.0 / (n as f64).sqrt();
    if !v.is_finite() || v < floor - 1e-12 || v > 1.0 + 1e-12 {
        return Err(Error::Domain(format!(
            "dispersion v = {v} must lie in [1/sqrt(n), 1] = [{floor}, 1] for n = {n}: \
             a unit vector with ||x||_inf = v exists only in that range"
        )));
    }
    Ok(())
}

fn check_even_d(d: usize) -> Result<()> {
    if d < 2 || d % 2 != 0 {
        return Err(Error::Argument(format!("moment order d = {d} must be even and >= 2")));
    }
    Ok(())
}

/// T_{n,p,d}(v), evaluated from the exact binomial-difference moments.
///
/// Terms are nonnegative; they are accumulated in increasing k order with
/// compensated summation because their magnitudes vary widely.
pub fn row_moment_bound_np(n: u64, p: &Rational, v: f64, d: usize) -> Result<f64> {
    check_even_d(d)?;
    check_dispersion(n, v)?;
    let p_f = moment_engine::to_f64(p);
    let v2 = v * v;
    let rest = (1.0 - v2).max(0.0);
    let mut sum = 0.0f64;
    let mut comp = 0.0f64;
    for k in 0..=d / 2 {
        let w = moment_engine::binom_diff_moment(n, p, d - 2 * k)?;
        let p_factor = if k > 0 { p_f } else { 1.0 };
        let term = moment_engine::binomial_f64(d, 2 * k)
            * p_factor
            * v2.powi(k as i32)
            * rest.powi(((d - 2 * k) / 2) as i32)
            * w;
        let y = term - comp;
        let t = sum + y;
        comp = (t - sum) - y;
        sum = t;
    }
    Ok(4.0 * sum.powf(2.0 / d as f64))
}

/// T_{n,p,d}(v) at the parameters' own p.
pub fn row_moment_bound(params: &BoundParams, d: usize) -> Result<f64> {
    row_moment_bound_np(params.n, &params.p(), params.v, d)
}

/// Which of the two prior-work row bounds to use.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum BaselineVariant {
    D1,
    D2,
    Best,
}

const C1: f64 = 4.0 * std::f64::consts::E;
const C2: f64 = 8.0;

fn baseline_d1(d: usize, p: f64, v: f64) -> f64 {
    let df = d as f64;
    // sup over real t in [1, d/2] of (d v / t) (p / (d v^2))^{1/(2t)}:
    // the unconstrained maximizer is t* = ln(d v^2 / p) / 2, clamped to the
    // interval; both endpoints are evaluated as well.
    let h = |t: f64| (df * v / t) * (p / (df * v * v)).powf(1.0 / (2.0 * t));
    let hi = (df / 2.0).max(1.0);
    let mut best = h(1.0).max(h(hi));
    let a = df * v * v / p;
    if a > 1.0 {
        let t_star = (a.ln() / 2.0).clamp(1.0, hi);
        best = best.max(h(t_star));
    }
    2.0 * C1 * best * best
}

fn baseline_d2(d: usize, p: f64) -> Result<f64> {
    if p >= 1.0 {
        return Err(Error::Domain(format!(
            "baseline D2 requires p < 1 (got p = {p}); log(1/p) is not positive"
        )));
    }
    Ok(2.0 * C2 * d as f64 / (1.0 / p).ln())
}

/// Prior-work row bound with optimistic constants; `Best` takes the minimum
/// of the two estimates, falling through to D1 when D2 is undefined.
pub fn baseline_row_bound(d: usize, p: f64, v: f64, variant: BaselineVariant) -> Result<f64> {
    check_even_d(d)?;
    if !(p > 0.0) || !(v > 0.0) || v > 1.0 + 1e-12 {
        return Err(Error::Domain(format!(
            "baseline bound requires 0 < p and 0 < v <= 1 (got p = {p}, v = {v})"
        )));
    }
    match variant {
        BaselineVariant::D1 => Ok(baseline_d1(d, p, v)),
        BaselineVariant::D2 => baseline_d2(d, p),
        BaselineVariant::Best => {
            let d1 = baseline_d1(d, p, v);
            match baseline_d2(d, p) {
                Ok(d2) => Ok(d1.min(d2)),
                Err(_) => Ok(d1),
            }
        }
    }
}

/// One cell of the T_new/T_old comparison grid.
#[derive(Clone, Debug)]
pub struct RatioCell {
    pub d: u32,
    pub p: f64,
    pub v: f64,
    /// None when p > 1/2, where the new bound is unsupported.
    pub t_new: Option<f64>,
    pub t_old: f64,
    pub ratio: Option<f64>,
    /// True for odd d, filled by linear interpolation between the even
    /// neighbors (on the ratio scale).
    pub interpolated: bool,
}

fn grid_point(n: u64, d: usize, p: f64, v: f64) -> Result<(Option<f64>, f64)> {
    let t_old = baseline_row_bound(d, p, v, BaselineVariant::Best)?;
    let t_new = if p <= 0.5 {
        let p_rat = Rational::from_f64(p)
            .ok_or_else(|| Error::Argument(format!("p = {p} is not a finite number")))?;
        Some(row_moment_bound_np(n, &p_rat, v, d)?)
    } else {
        None
    };
    Ok((t_new, t_old))
}

/// Evaluate T_new and T_old over a (d, p, v) grid. Odd d rows are linearly
/// interpolated between the adjacent even orders.
pub fn ratio_grid(n: u64, d_grid: &[u32], p_grid: &[f64], v_grid: &[f64]) -> Result<Vec<RatioCell>> {
    let mut out = Vec::new();
    for &d in d_grid {
        for &p in p_grid {
            for &v in v_grid {
                if d % 2 == 0 {
                    let (t_new, t_old) = grid_point(n, d as usize, p, v)?;
                    let ratio = t_new.map(|t| t / t_old);
                    out.push(RatioCell { d, p, v, t_new, t_old, ratio, interpolated: false });
                } else {
                    if d < 2 {
                        return Err(Error::Argument("d = 1 has no even neighbor below".into()));
                    }
                    let (lo_new, lo_old) = grid_point(n, (d - 1) as usize, p, v)?;
                    let (hi_new, hi_old) = grid_point(n, (d + 1) as usize, p, v)?;
                    let mid = |a: f64, b: f64| 0.5 * (a + b);
                    let t_old = mid(lo_old, hi_old);
                    let t_new = match (lo_new, hi_new) {
                        (Some(a), Some(b)) => Some(mid(a, b)),
                        _ => None,
                    };
                    let ratio = match (lo_new, hi_new) {
                        (Some(a), Some(b)) => Some(mid(a / lo_old, b / hi_old)),
                        _ => None,
                    };
                    out.push(RatioCell { d, p, v, t_new, t_old, ratio, interpolated: true });
                }
            }
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::moment_engine::ratio;

    #[test]
    fn params_validation() {
        assert!(BoundParams::new(4, 10, 2, 0.8).is_ok());
        assert!(BoundParams::new(1, 10, 2, 0.8).is_err());
        assert!(BoundParams::new(4, 10, 0, 0.8).is_err());
        assert!(BoundParams::new(4, 10, 6, 0.8).is_err()); // p > 1/2
        assert!(BoundParams::new(4, 10, 2, 0.3).is_err()); // v < 1/sqrt(4)
        assert!(BoundParams::new(4, 10, 2, 1.2).is_err());
    }

    #[test]
    fn d2_closed_form_is_4p() {
        for n in [2u64, 5, 100, 10_000] {
            for (s, m) in [(1u64, 4u64), (1, 100), (3, 10), (5, 10)] {
                let p = Rational::new(BigInt::from(s), BigInt::from(m));
                let v_lo = 1.0 / (n as f64).sqrt();
                for v in [v_lo, 0.5 * (v_lo + 1.0), 1.0] {
                    let t = row_moment_bound_np(n, &p, v, 2).unwrap();
                    let expect = 4.0 * s as f64 / m as f64;
                    assert!((t - expect).abs() <= 1e-12 * expect, "T2 = {t} expect {expect}");
                }
            }
        }
    }

    #[test]
    fn v_one_special_case() {
        let t = row_moment_bound_np(4, &ratio(1, 4), 1.0, 2).unwrap();
        assert!((t - 1.0).abs() < 1e-12);
        // General d at v = 1: only the k = d/2 term survives, T = 4 p^{2/d}.
        let t4 = row_moment_bound_np(4, &ratio(1, 4), 1.0, 4).unwrap();
        assert!((t4 - 4.0 * 0.25f64.powf(0.5)).abs() < 1e-12);
    }

    #[test]
    fn odd_d_rejected() {
        assert!(matches!(
            row_moment_bound_np(4, &ratio(1, 4), 0.8, 3),
            Err(Error::Argument(_))
        ));
    }

    #[test]
    fn baseline_d2_example() {
        // d = 4, p = 0.01: 2 * 8 * 4 / ln(100).
        let got = baseline_row_bound(4, 0.01, 0.5, BaselineVariant::D2).unwrap();
        let expect = 64.0 / 100f64.ln();
        assert!((got - expect).abs() < 1e-12);
    }

    #[test]
    fn baseline_d1_degenerate_range() {
        // d = 2: the t range is the single point t = 1, giving 16 e p.
        for p in [0.01, 0.2, 0.5] {
            for v in [0.3, 0.9] {
                let got = baseline_row_bound(2, p, v, BaselineVariant::D1).unwrap();
                let expect = 16.0 * std::f64::consts::E * p;
                assert!((got - expect).abs() < 1e-9 * expect, "got {got} expect {expect}");
            }
        }
    }

    #[test]
    fn baseline_best_falls_through_on_p_one() {
        let d1 = baseline_row_bound(4, 1.0, 0.1, BaselineVariant::D1).unwrap();
        let best = baseline_row_bound(4, 1.0, 0.1, BaselineVariant::Best).unwrap();
        assert_eq!(d1, best);
        assert!(baseline_row_bound(4, 1.0, 0.1, BaselineVariant::D2).is_err());
    }

    #[test]
    fn ratio_grid_single_cell_d2() {
        let cells = ratio_grid(10_000, &[2], &[0.05], &[0.5]).unwrap();
        assert_eq!(cells.len(), 1);
        let r = cells[0].ratio.unwrap();
        assert!((r - 1.0 / (4.0 * std::f64::consts::E)).abs() < 1e-9);
    }

    #[test]
    fn ratio_grid_empty_and_unsupported() {
        assert!(ratio_grid(100, &[], &[0.1], &[0.5]).unwrap().is_empty());
        let cells = ratio_grid(100, &[2], &[0.7], &[0.5]).unwrap();
        assert!(cells[0].t_new.is_none());
        assert!(cells[0].ratio.is_none());
    }

    #[test]
    fn ratio_grid_interpolates_odd_d() {
        let cells = ratio_grid(1000, &[2, 3, 4], &[0.01], &[0.3]).unwrap();
        let by_d: Vec<_> = cells.iter().map(|c| (c.d, c.ratio.unwrap())).collect();
        let r2 = by_d.iter().find(|(d, _)| *d == 2).unwrap().1;
        let r3 = by_d.iter().find(|(d, _)| *d == 3).unwrap().1;
        let r4 = by_d.iter().find(|(d, _)| *d == 4).unwrap().1;
        assert!((r3 - 0.5 * (r2 + r4)).abs() < 1e-12);
        assert!(cells.iter().find(|c| c.d == 3).unwrap().interpolated);
    }

    #[test]
    fn monotone_in_p_constant_in_v_at_d2() {
        let n = 50;
        // d = 2 collapses to 4p for every v; higher d need not be monotone in v
        // (at p = 1/4, d = 6 the bound peaks near v = 0.8 and dips toward v = 1).
        for v in [0.2, 0.4, 0.6, 0.8, 1.0] {
            let t = row_moment_bound_np(n, &ratio(1, 4), v, 2).unwrap();
            assert!((t - 1.0).abs() < 1e-12, "T at d=2 should be 4p, got {t}");
        }
        for d in [2usize, 4, 6] {
            let mut prev = 0.0;
            for (num, den) in [(1i64, 16i64), (1, 8), (1, 4), (1, 2)] {
                let t = row_moment_bound_np(n, &ratio(num, den), 0.5, d).unwrap();
                assert!(t >= prev - 1e-12, "T not monotone in p at d={d}");
                prev = t;
            }
        }
    }
}
