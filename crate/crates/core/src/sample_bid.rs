//! The sample-bid mechanism: the agent bids `b`, a sample `s` is drawn from
//! the same value distribution, the agent wins iff `b >= s` and pays `alpha min(b, s)`.
//!
//! In quantile space a bid is identified with its quantile `x = Pr[s > b]`.
//! With `b = v(x)` the expected payment is `alpha (R(x) + ∫_x^1 R(t)/t dt)` and
//! the utility of value `v` is `v (1 - x)` minus that payment.

use serde::{Serialize, Serializer};

use crate::curves::RevenueCurve;
use crate::numerics::{integrate_split, last_true, Quadrature, UTILITY_TOL};
use crate::{Error, Result};

/// A bid: a finite amount, or `Top`, any bid at or above the top of the
/// sample's support (it always wins and pays `alpha E[s]`).
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Bid {
    Finite(f64),
    Top,
}

impl Bid {
    /// Numeric value, `f64::INFINITY` for `Top`.
    pub fn amount(self) -> f64 {
        match self {
            Bid::Finite(b) => b,
            Bid::Top => f64::INFINITY,
        }
    }
}

impl Serialize for Bid {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        match *self {
            Bid::Finite(b) => s.serialize_f64(b),
            Bid::Top => s.serialize_str("TOP"),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum BidKind {
    Zero,
    InteriorRoot,
    Kink,
    Top,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct BestResponse {
    pub bid: Bid,
    /// Bid quantile `Pr[s > bid]`; 1 for the zero bid.
    pub quantile: f64,
    pub utility: f64,
    pub payment: f64,
    pub kind: BidKind,
    pub tie_break_applied: bool,
}

impl BestResponse {
    /// Winning probability.
    pub fn allocation(&self) -> f64 {
        match self.kind {
            BidKind::Zero => 0.0,
            _ => 1.0 - self.quantile,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct MechanismEval {
    pub revenue: f64,
    pub opt_revenue: f64,
    pub ratio: f64,
    pub alpha: f64,
}

/// Expected payment of the bid with quantile `x`.
pub fn payment_at(curve: &RevenueCurve, x: f64, alpha: f64) -> f64 {
    alpha * (curve.revenue(x) + curve.welfare_below(x))
}

/// Expected payment `alpha (b q_b + ∫_{q_b}^1 R(t)/t dt)` with `q_b = Pr[s > b]`.
///
/// ```
/// use sblab::curves::{build, DistributionSpec};
/// use sblab::sample_bid::{expected_payment, Bid};
/// let u = build(&DistributionSpec::Uniform { l: 0.0, h: 1.0 }).unwrap();
/// assert!((expected_payment(Bid::Top, &u, 0.7) - 0.35).abs() < 1e-12);
/// assert_eq!(expected_payment(Bid::Finite(0.0), &u, 0.7), 0.0);
/// ```
pub fn expected_payment(bid: Bid, curve: &RevenueCurve, alpha: f64) -> f64 {
    match bid {
        Bid::Top => alpha * curve.expected_value(),
        Bid::Finite(b) if b <= 0.0 => 0.0,
        Bid::Finite(b) => {
            let q = curve.quantile(b);
            alpha * (b * q + curve.welfare_below(q))
        }
    }
}

/// Interim utility of value `v` bidding `bid`; `-∞` when the payment diverges.
pub fn utility(v: f64, bid: Bid, curve: &RevenueCurve, alpha: f64) -> f64 {
    match bid {
        Bid::Finite(b) if b <= 0.0 => 0.0,
        Bid::Finite(b) => {
            let q = curve.quantile(b);
            v * (1.0 - q) - expected_payment(bid, curve, alpha)
        }
        Bid::Top => v - expected_payment(bid, curve, alpha),
    }
}

#[derive(Debug, Clone, Copy)]
struct Candidate {
    bid: Bid,
    quantile: f64,
    utility: f64,
    payment: f64,
    kind: BidKind,
}

const ZERO: Candidate = Candidate { bid: Bid::Finite(0.0), quantile: 1.0, utility: 0.0, payment: 0.0, kind: BidKind::Zero };

/// Best utility, ties within [`UTILITY_TOL`] broken toward the lowest payment
/// (then toward the earliest candidate).
fn select(cands: &[Candidate]) -> BestResponse {
    let best_u = cands.iter().map(|c| c.utility).fold(f64::NEG_INFINITY, f64::max);
    let mut chosen: Option<&Candidate> = None;
    for c in cands.iter().filter(|c| c.utility >= best_u - UTILITY_TOL) {
        if chosen.map_or(true, |b| c.payment < b.payment) {
            chosen = Some(c);
        }
    }
    let c = chosen.unwrap_or(&ZERO);
    let tie_break_applied = cands
        .iter()
        .any(|o| o.utility >= best_u - UTILITY_TOL && (o.payment - c.payment).abs() > 1e-12);
    BestResponse {
        bid: c.bid,
        quantile: c.quantile,
        utility: c.utility,
        payment: c.payment,
        kind: c.kind,
        tie_break_applied,
    }
}

fn at_quantile(v: f64, curve: &RevenueCurve, alpha: f64, x: f64, kind: BidKind) -> Candidate {
    let payment = payment_at(curve, x, alpha);
    let utility = if payment.is_finite() { v * (1.0 - x) - payment } else { f64::NEG_INFINITY };
    let bid = if x == 0.0 { Bid::Top } else { Bid::Finite(curve.value(x)) };
    Candidate { bid, quantile: x, utility, payment, kind }
}

/// Utility-maximizing bid of value `v`.
///
/// Candidates: the zero bid, the top bid, every piece boundary and every
/// first-order root on each smooth piece. Utilities are compared directly, so
/// minima of the first-order condition (as in MHR curves) are harmless.
///
/// ```
/// use sblab::curves::{build, DistributionSpec};
/// use sblab::sample_bid::{best_response, Bid};
/// let p = build(&DistributionSpec::ShiftedPareto { c: 0.265, a: 0.735 }).unwrap();
/// let br = best_response(3.0, &p, 0.7);
/// assert!((br.bid.amount() - (3.0 / 0.7 + 0.735)).abs() < 1e-9);
/// ```
pub fn best_response(v: f64, curve: &RevenueCurve, alpha: f64) -> BestResponse {
    let mut cands = Vec::with_capacity(2 + 3 * curve.pieces().len());
    cands.push(ZERO);
    cands.push(at_quantile(v, curve, alpha, 0.0, BidKind::Top));
    for p in curve.pieces() {
        cands.push(at_quantile(v, curve, alpha, p.hi, BidKind::Kink));
        for x in p.foc_roots(v, alpha) {
            cands.push(at_quantile(v, curve, alpha, x, BidKind::InteriorRoot));
        }
    }
    select(&cands)
}

/// Brute-force oracle: best of zero, top, and `n_bids` bids (half uniform,
/// half geometric) up to the smallest bid whose payment reaches `v`.
pub fn best_response_brute(v: f64, curve: &RevenueCurve, alpha: f64, n_bids: usize) -> BestResponse {
    let n_bids = n_bids.max(2);
    let mut cands = vec![ZERO];
    let top = expected_payment(Bid::Top, curve, alpha);
    cands.push(Candidate {
        bid: Bid::Top,
        quantile: 0.0,
        utility: if top.is_finite() { v - top } else { f64::NEG_INFINITY },
        payment: top,
        kind: BidKind::Top,
    });
    let b_lo = curve.value(1.0);
    let b_hi = if top >= v {
        if payment_at(curve, 1.0, alpha) >= v {
            b_lo
        } else {
            curve.value(last_true(|x| payment_at(curve, x, alpha) >= v, 0.0, 1.0, 1e-15))
        }
    } else if curve.value(0.0).is_finite() {
        curve.value(0.0)
    } else {
        curve.value(1e-12)
    };
    let n_uniform = n_bids - n_bids / 2;
    let n_geom = n_bids / 2;
    let mut bids = Vec::with_capacity(n_bids);
    for j in 0..n_uniform {
        let t = if n_uniform == 1 { 1.0 } else { j as f64 / (n_uniform - 1) as f64 };
        bids.push(b_lo + (b_hi - b_lo) * t);
    }
    let g_lo = if b_lo > 0.0 { b_lo } else { b_hi * 1e-8 };
    for j in 0..n_geom {
        let t = if n_geom == 1 { 0.0 } else { j as f64 / (n_geom - 1) as f64 };
        bids.push(g_lo * (b_hi / g_lo).powf(t));
    }
    for b in bids {
        if !(b > 0.0 && b.is_finite()) {
            continue;
        }
        let bid = Bid::Finite(b);
        let payment = expected_payment(bid, curve, alpha);
        let quantile = curve.quantile(b);
        cands.push(Candidate { bid, quantile, utility: v * (1.0 - quantile) - payment, payment, kind: BidKind::InteriorRoot });
    }
    select(&cands)
}

fn check_alpha(alpha: f64) -> Result<()> {
    if alpha > 0.0 && alpha <= 1.0 {
        Ok(())
    } else {
        Err(Error::InvalidParameter(format!("alpha = {alpha} must be in (0, 1]")))
    }
}

/// Best response of the type at quantile `q`.
pub fn response_at(curve: &RevenueCurve, q: f64, alpha: f64) -> BestResponse {
    let q = q.max(f64::MIN_POSITIVE);
    best_response(curve.value(q), curve, alpha)
}

/// `q* = sup{q : the type at quantile q places a positive bid}`; bids are
/// monotone in value, so every type above `q*` bids zero.
pub fn critical_quantile(curve: &RevenueCurve, alpha: f64) -> f64 {
    let positive = |q: f64| response_at(curve, q, alpha).kind != BidKind::Zero;
    if positive(1.0) {
        return 1.0;
    }
    if !positive(0.0) {
        return 0.0;
    }
    last_true(positive, 0.0, 1.0, 1e-15)
}

fn splits(curve: &RevenueCurve) -> Vec<f64> {
    let mut s = curve.breakpoints();
    s.push(curve.q_m());
    s
}

/// Seller revenue `∫_0^1 payment(best_response(v(q))) dq`.
pub fn mechanism_revenue(curve: &RevenueCurve, alpha: f64) -> Result<f64> {
    check_alpha(alpha)?;
    let q_star = critical_quantile(curve, alpha);
    if q_star == 0.0 {
        return Ok(0.0);
    }
    let pay = |q: f64| {
        if q == 0.0 && !curve.value(0.0).is_finite() {
            return f64::INFINITY;
        }
        response_at(curve, q, alpha).payment
    };
    integrate_split(pay, 0.0, q_star, &splits(curve), &Quadrature::default())
}

/// Optimal revenue `R(q_m)`.
pub fn opt_revenue(curve: &RevenueCurve) -> f64 {
    curve.opt_revenue()
}

/// Mechanism revenue, optimal revenue and their ratio.
///
/// ```
/// use sblab::curves::{build, DistributionSpec};
/// let u = build(&DistributionSpec::Uniform { l: 0.0, h: 1.0 }).unwrap();
/// let e = sblab::sample_bid::evaluate(&u, 0.7).unwrap();
/// assert!((e.revenue - 0.2275).abs() < 1e-9);
/// ```
pub fn evaluate(curve: &RevenueCurve, alpha: f64) -> Result<MechanismEval> {
    let revenue = mechanism_revenue(curve, alpha)?;
    let opt_revenue = opt_revenue(curve);
    Ok(MechanismEval { revenue, opt_revenue, ratio: opt_revenue / revenue, alpha })
}

/// `|revenue - (∫ a(q) R'(q) dq - u(v(1)) + R(0) a(0+))|` where `a` is the
/// winning probability of the type at quantile `q`. The last term is the
/// boundary contribution of an unbounded value support.
pub fn myerson_identity_check(curve: &RevenueCurve, alpha: f64) -> Result<f64> {
    let revenue = mechanism_revenue(curve, alpha)?;
    let q_star = critical_quantile(curve, alpha);
    let virtual_surplus = if q_star == 0.0 {
        0.0
    } else {
        let f = |q: f64| response_at(curve, q, alpha).allocation() * curve.marginal(q);
        integrate_split(f, 0.0, q_star, &splits(curve), &Quadrature::default())?
    };
    let lowest = best_response(curve.value(1.0), curve, alpha).utility;
    let boundary = curve.revenue(0.0) * response_at(curve, 1e-12, alpha).allocation();
    Ok((revenue - (virtual_surplus - lowest + boundary)).abs())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::curves::{build, DistributionSpec};

    fn uniform() -> RevenueCurve {
        build(&DistributionSpec::Uniform { l: 0.0, h: 1.0 }).unwrap()
    }

    fn pareto() -> RevenueCurve {
        build(&DistributionSpec::ShiftedPareto { c: 0.265, a: 0.735 }).unwrap()
    }

    #[test]
    fn zero_bid_has_zero_utility() {
        for c in [uniform(), pareto()] {
            assert_eq!(utility(0.5, Bid::Finite(0.0), &c, 0.7), 0.0);
            assert_eq!(best_response(0.0, &c, 0.7).kind, BidKind::Zero);
        }
    }

    #[test]
    fn top_bid_utilities() {
        assert!((utility(1.0, Bid::Top, &uniform(), 0.7) - 0.65).abs() < 1e-12);
        assert_eq!(utility(5.0, Bid::Top, &pareto(), 0.7), f64::NEG_INFINITY);
        let t = build(&DistributionSpec::TruncExp { t: 0.43 }).unwrap();
        assert!((expected_payment(Bid::Top, &t, 0.824) - 0.28797).abs() < 5e-5);
    }

    #[test]
    fn uniform_threshold() {
        let u = uniform();
        assert_eq!(best_response(0.34, &u, 0.7).kind, BidKind::Zero);
        let br = best_response(0.36, &u, 0.7);
        assert_eq!(br.bid, Bid::Top);
        assert!((br.utility - 0.01).abs() < 1e-12);
    }

    #[test]
    fn pareto_interior_root() {
        let br = best_response(3.0, &pareto(), 0.7);
        assert_eq!(br.kind, BidKind::InteriorRoot);
        assert!((br.bid.amount() - 5.0207142857).abs() < 1e-6);
    }

    #[test]
    fn brute_agrees_on_examples() {
        for (c, v) in [(uniform(), 0.34), (uniform(), 0.36), (pareto(), 3.0)] {
            let a = best_response(v, &c, 0.7);
            let b = best_response_brute(v, &c, 0.7, 10_000);
            assert!(a.utility >= b.utility - 1e-9);
            assert!(a.utility - b.utility < 1e-5, "{} vs {}", a.utility, b.utility);
        }
        assert_eq!(best_response_brute(0.0, &uniform(), 0.7, 100).kind, BidKind::Zero);
        let tiny = best_response_brute(0.5, &uniform(), 0.7, 2);
        assert_eq!(tiny.bid, Bid::Top);
    }

    #[test]
    fn uniform_revenue() {
        let r = mechanism_revenue(&uniform(), 0.7).unwrap();
        assert!((r - 0.35 * 0.65).abs() < 1e-9, "{r}");
        assert!(mechanism_revenue(&uniform(), 0.0).is_err());
    }

    #[test]
    fn myerson_identity_small_examples() {
        let curves = [
            uniform(),
            build(&DistributionSpec::TruncExp { t: 3.0 }).unwrap(),
            build(&DistributionSpec::R0Line { r0: 0.0, q_m: 0.5 }).unwrap(),
            pareto(),
        ];
        for c in &curves {
            let r = myerson_identity_check(c, 0.7).unwrap();
            assert!(r <= 1e-6, "{r}");
        }
    }
}
