//! Aggregation of per-row bounds into whole-error moment bounds and their
//! conversion into distortion/confidence statements.
//!
//! The aggregate bound Q solves
//!   sum_{k=0}^{d/2} C(d,2k) (T_{n,p,2k}(v)/Q)^{2k} = e^{d/(2m)},
//! whose left side is continuous and strictly decreasing in Q from +inf to 1
//! while the right side exceeds 1, so the root exists and is unique. The
//! error moment bound is Q/s; Markov's inequality then turns it into a tail
//! probability for any target distortion.

use crate::error::{Error, Result};
use crate::moment_engine::binomial_f64;
use crate::row_bound::{self, BaselineVariant, BoundParams};

/// Which row bound feeds the aggregator: the new bound T or the prior-work
/// baseline with optimistic constants (used for comparison curves).
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum BoundKind {
    New,
    Baseline,
}

const ROOT_FLOOR: f64 = 1e-300;
const ROOT_REL_TOL: f64 = 1e-12;
const MAX_DOUBLINGS: u32 = 200;

/// Least t > 0 with `lhs(t) <= rhs`, for `lhs` strictly decreasing.
/// Bracket by doubling from 1, then bisect geometrically.
fn least_root(lhs: impl Fn(f64) -> f64, rhs: f64) -> Result<f64> {
    if lhs(ROOT_FLOOR) <= rhs {
        return Ok(ROOT_FLOOR);
    }
    let mut lo = ROOT_FLOOR;
    let mut hi = 1.0f64;
    let mut doublings = 0;
    while lhs(hi) > rhs {
        lo = hi;
        hi *= 2.0;
        doublings += 1;
        if doublings > MAX_DOUBLINGS {
            return Err(Error::Solver(
                "bracket failure after 200 doublings; moment table is inconsistent".into(),
            ));
        }
    }
    while hi - lo > ROOT_REL_TOL * hi {
        let mid = (lo * hi).sqrt();
        if lhs(mid) <= rhs {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    Ok(hi)
}

/// Least t with sum_{even k <= d} C(d,k) E[Z^k] / t^k <= e^{d/(2m)}; an
/// upper bound on ||Z_1 + ... + Z_m||_d for symmetric Z.
pub fn iid_sum_norm_bound(
    even_moments: impl Fn(usize) -> f64,
    d: usize,
    m: u64,
) -> Result<f64> {
    if d % 2 != 0 || d == 0 {
        return Err(Error::Argument(format!("order d = {d} must be even and positive")));
    }
    let moments: Vec<f64> = (0..=d / 2).map(|k| even_moments(2 * k)).collect();
    if moments.iter().any(|x| !x.is_finite()) {
        return Err(Error::Argument("non-finite moment in table".into()));
    }
    let coeffs: Vec<f64> = (0..=d / 2).map(|k| binomial_f64(d, 2 * k)).collect();
    let rhs = (d as f64 / (2.0 * m as f64)).exp();
    let lhs = |t: f64| {
        let mut acc = 0.0;
        for k in 0..=d / 2 {
            // skip vanished moments: t^{2k} can underflow to 0 near the floor
            if moments[k] != 0.0 {
                acc += coeffs[k] * moments[k] / t.powi((2 * k) as i32);
            }
        }
        acc
    };
    least_root(lhs, rhs)
}

/// The solved aggregate bound: Q and the error moment bound Q/s.
#[derive(Clone, Debug)]
pub struct AggregateBound {
    pub params: BoundParams,
    pub d: usize,
    pub q: f64,
    pub error_moment: f64,
}

/// Precomputed T_{n,p,2k}(v) values for orders 2..=max_order, reused across
/// every Q evaluation at the same parameters.
struct Aggregator<'a> {
    params: &'a BoundParams,
    /// ts[k-1] = T_{n,p,2k}(v)
    ts: Vec<f64>,
}

impl<'a> Aggregator<'a> {
    fn new(kind: BoundKind, params: &'a BoundParams, max_order: usize) -> Result<Self> {
        if max_order % 2 != 0 || max_order == 0 {
            return Err(Error::Argument(format!(
                "order {max_order} must be even and positive"
            )));
        }
        let mut ts = Vec::with_capacity(max_order / 2);
        for k in 1..=max_order / 2 {
            let t = match kind {
                BoundKind::New => row_bound::row_moment_bound(params, 2 * k)?,
                BoundKind::Baseline => row_bound::baseline_row_bound(
                    2 * k,
                    params.p_f64(),
                    params.v(),
                    BaselineVariant::Best,
                )?,
            };
            ts.push(t);
        }
        Ok(Self { params, ts })
    }

    fn solve_q(&self, d: usize) -> Result<f64> {
        debug_assert!(d % 2 == 0 && d / 2 <= self.ts.len());
        let rhs = (d as f64 / (2.0 * self.params.m() as f64)).exp();
        let coeffs: Vec<f64> = (1..=d / 2).map(|k| binomial_f64(d, 2 * k)).collect();
        let lhs = |q: f64| {
            let mut acc = 1.0; // k = 0 term
            for k in 1..=d / 2 {
                acc += coeffs[k - 1] * (self.ts[k - 1] / q).powi((2 * k) as i32);
            }
            acc
        };
        least_root(lhs, rhs)
    }

    fn aggregate(&self, d: usize) -> Result<AggregateBound> {
        let q = self.solve_q(d)?;
        Ok(AggregateBound {
            params: self.params.clone(),
            d,
            q,
            error_moment: q / self.params.s() as f64,
        })
    }
}

pub fn aggregate_bound_with(
    kind: BoundKind,
    params: &BoundParams,
    d: usize,
) -> Result<AggregateBound> {
    if d % 2 != 0 || d < 2 {
        return Err(Error::Argument(format!("order d = {d} must be even and >= 2")));
    }
    Aggregator::new(kind, params, d)?.aggregate(d)
}

/// Bound on ||E(x)||_d = s^{-1} Q_{n,p,d}(v) for the new row bound.
pub fn aggregate_bound(params: &BoundParams, d: usize) -> Result<AggregateBound> {
    aggregate_bound_with(BoundKind::New, params, d)
}

/// How the moment order is chosen when converting to a distortion bound.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Mode {
    /// d = smallest even integer >= ln(1/delta); epsilon = e * Q_d / s.
    Corollary,
    /// Minimize (Q_d/s) * delta^{-1/d} over even d up to d_max; the
    /// tightest Markov consequence of the moment bounds.
    Optimized,
}

pub const DEFAULT_D_MAX: usize = 64;

#[derive(Clone, Debug)]
pub struct EpsilonBound {
    pub epsilon: f64,
    pub d: usize,
    pub q: f64,
}

fn check_delta(delta: f64) -> Result<()> {
    if !(delta > 0.0 && delta < 1.0) {
        return Err(Error::Argument(format!(
            "failure probability delta = {delta} must lie in (0, 1)"
        )));
    }
    Ok(())
}

/// Smallest even integer >= ln(1/delta), at least 2.
pub fn corollary_order(delta: f64) -> usize {
    let raw = (1.0 / delta).ln().ceil().max(2.0) as usize;
    if raw % 2 == 0 {
        raw
    } else {
        raw + 1
    }
}

pub fn epsilon_bound_with(
    kind: BoundKind,
    params: &BoundParams,
    delta: f64,
    mode: Mode,
    d_max: usize,
) -> Result<EpsilonBound> {
    check_delta(delta)?;
    let s = params.s() as f64;
    match mode {
        Mode::Corollary => {
            let d = corollary_order(delta);
            let agg = aggregate_bound_with(kind, params, d)?;
            Ok(EpsilonBound {
                epsilon: std::f64::consts::E * agg.q / s,
                d,
                q: agg.q,
            })
        }
        Mode::Optimized => {
            let agg = Aggregator::new(kind, params, d_max)?;
            let mut best: Option<EpsilonBound> = None;
            for d in (2..=d_max).step_by(2) {
                let q = agg.solve_q(d)?;
                let eps = (q / s) * delta.powf(-1.0 / d as f64);
                if best.as_ref().map_or(true, |b| eps < b.epsilon) {
                    best = Some(EpsilonBound { epsilon: eps, d, q });
                }
            }
            Ok(best.expect("d_max >= 2 guarantees a candidate"))
        }
    }
}

/// Proved distortion bound epsilon such that Pr[|E(x)| > epsilon] <= delta.
pub fn epsilon_bound(
    params: &BoundParams,
    delta: f64,
    mode: Mode,
    d_max: usize,
) -> Result<EpsilonBound> {
    epsilon_bound_with(BoundKind::New, params, delta, mode, d_max)
}

pub fn confidence_at_epsilon_with(
    kind: BoundKind,
    params: &BoundParams,
    epsilon: f64,
    d_max: usize,
) -> Result<f64> {
    if !(epsilon > 0.0) {
        return Err(Error::Argument(format!("epsilon = {epsilon} must be positive")));
    }
    let s = params.s() as f64;
    let agg = Aggregator::new(kind, params, d_max)?;
    let mut delta_hat = 1.0f64;
    for d in (2..=d_max).step_by(2) {
        let q = agg.solve_q(d)?;
        let cand = (q / (s * epsilon)).powi(d as i32);
        if cand < delta_hat {
            delta_hat = cand;
        }
    }
    Ok(delta_hat)
}

/// Proved failure bound delta_hat = min(1, min_d (Q_d/(s eps))^d); the
/// confidence is 1 - delta_hat, and delta_hat = 1 is the trivial-bound case.
pub fn confidence_at_epsilon(params: &BoundParams, epsilon: f64, d_max: usize) -> Result<f64> {
    confidence_at_epsilon_with(BoundKind::New, params, epsilon, d_max)
}

/// Sparsity schedule used when searching over the embedding dimension.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum SparsityRule {
    FixedS(u64),
    FixedRatio(f64),
}

impl SparsityRule {
    /// Sparsity for dimension m, or None when no legal s exists at this m.
    pub fn sparsity_for(&self, m: u64) -> Option<u64> {
        match *self {
            SparsityRule::FixedS(s) => {
                if s >= 1 && 2 * s <= m {
                    Some(s)
                } else {
                    None
                }
            }
            SparsityRule::FixedRatio(r) => {
                if !(r > 0.0 && r <= 0.5) {
                    return None;
                }
                let s = ((r * m as f64).round() as u64).max(1);
                if 2 * s <= m {
                    Some(s)
                } else {
                    None
                }
            }
        }
    }
}

fn feasible(
    kind: BoundKind,
    n: u64,
    rule: &SparsityRule,
    m: u64,
    v: f64,
    epsilon: f64,
    confidence_target: f64,
    d_max: usize,
) -> Result<bool> {
    let Some(s) = rule.sparsity_for(m) else {
        return Ok(false);
    };
    let params = match BoundParams::new(n, m, s, v) {
        Ok(p) => p,
        Err(_) => return Ok(false),
    };
    let delta_hat = confidence_at_epsilon_with(kind, &params, epsilon, d_max)?;
    Ok(1.0 - delta_hat >= confidence_target)
}

/// Smallest m <= n achieving the confidence target, or None when infeasible.
///
/// Doubling followed by binary search; the final bracket is verified by a
/// linear ascending scan to guard against non-monotonicity of the proved
/// confidence in m.
pub fn min_dimension_with(
    kind: BoundKind,
    n: u64,
    rule: SparsityRule,
    epsilon: f64,
    confidence_target: f64,
    v: f64,
    d_max: usize,
) -> Result<Option<u64>> {
    if !(0.0..1.0).contains(&confidence_target) {
        return Err(Error::Argument(format!(
            "confidence target {confidence_target} must lie in [0, 1)"
        )));
    }
    // Smallest legal m under the rule.
    let mut m_min = None;
    for m in 2..=n {
        if rule.sparsity_for(m).is_some() {
            m_min = Some(m);
            break;
        }
    }
    let Some(m_min) = m_min else {
        return Ok(None);
    };
    if feasible(kind, n, &rule, m_min, v, epsilon, confidence_target, d_max)? {
        return Ok(Some(m_min));
    }
    // Doubling until feasible or past n.
    let mut lo = m_min;
    let mut hi = None;
    let mut cur = m_min;
    while cur < n {
        cur = (cur * 2).min(n);
        if feasible(kind, n, &rule, cur, v, epsilon, confidence_target, d_max)? {
            hi = Some(cur);
            break;
        }
        lo = cur;
    }
    let Some(mut hi) = hi else {
        return Ok(None);
    };
    while hi - lo > 64 {
        let mid = lo + (hi - lo) / 2;
        if feasible(kind, n, &rule, mid, v, epsilon, confidence_target, d_max)? {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    for m in (lo + 1)..=hi {
        if feasible(kind, n, &rule, m, v, epsilon, confidence_target, d_max)? {
            return Ok(Some(m));
        }
    }
    Ok(Some(hi))
}

pub fn min_dimension(
    n: u64,
    rule: SparsityRule,
    epsilon: f64,
    confidence_target: f64,
    v: f64,
    d_max: usize,
) -> Result<Option<u64>> {
    min_dimension_with(BoundKind::New, n, rule, epsilon, confidence_target, v, d_max)
}

/// Smallest s with s/m <= 1/2 achieving the target (exhaustive ascending
/// scan); returns m as the flat-segment sentinel when none works.
pub fn min_sparsity_with(
    kind: BoundKind,
    n: u64,
    m: u64,
    epsilon: f64,
    confidence_target: f64,
    v: f64,
    d_max: usize,
) -> Result<u64> {
    for s in 1..=m / 2 {
        let params = match BoundParams::new(n, m, s, v) {
            Ok(p) => p,
            Err(_) => continue,
        };
        let delta_hat = confidence_at_epsilon_with(kind, &params, epsilon, d_max)?;
        if 1.0 - delta_hat >= confidence_target {
            return Ok(s);
        }
    }
    Ok(m)
}

pub fn min_sparsity(
    n: u64,
    m: u64,
    epsilon: f64,
    confidence_target: f64,
    v: f64,
    d_max: usize,
) -> Result<u64> {
    min_sparsity_with(BoundKind::New, n, m, epsilon, confidence_target, v, d_max)
}

/// Minimal dimension for `pair_count` simultaneous guarantees: the failure
/// budget 1 - confidence_target is split across pairs (union bound).
pub fn union_bound_dimension_with(
    kind: BoundKind,
    pair_count: u64,
    n: u64,
    rule: SparsityRule,
    epsilon: f64,
    confidence_target: f64,
    v: f64,
    d_max: usize,
) -> Result<Option<u64>> {
    if pair_count < 1 {
        return Err(Error::Argument("pair count must be >= 1".into()));
    }
    let delta = (1.0 - confidence_target) / pair_count as f64;
    min_dimension_with(kind, n, rule, epsilon, 1.0 - delta, v, d_max)
}

pub fn union_bound_dimension(
    pair_count: u64,
    n: u64,
    rule: SparsityRule,
    epsilon: f64,
    confidence_target: f64,
    v: f64,
    d_max: usize,
) -> Result<Option<u64>> {
    union_bound_dimension_with(
        BoundKind::New,
        pair_count,
        n,
        rule,
        epsilon,
        confidence_target,
        v,
        d_max,
    )
}
