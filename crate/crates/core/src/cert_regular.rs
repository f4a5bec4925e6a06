//! Grid certification of a revenue lower bound for regular distributions
//! (concave revenue curves), normalized to optimal revenue 1.
//!
//! Two regimes by monopoly quantile:
//!
//! * `q_m >= 0.62`: the worst curves form the two-parameter r0-line family.
//!   If the monopoly-reserve type already bids above the reserve, a closed
//!   form bounds the revenue; otherwise the critical value `v*` and its
//!   quantile `q*` give the bound `p(v*) q*`, certified on parameter boxes.
//! * `q_m <= 0.62`: curves are summarized by `(q_m, q'', w)` where `q''` is
//!   the quantile of value `v_m/alpha` and `w = ∫_{q''}^{q_m} R(q)/q dq`.
//!   Payment, quantile and critical-value bounds are assembled per cell;
//!   types below the monopoly quantile are handled through worst-case bids
//!   over pentagon curves.

use rayon::prelude::*;
use serde::Serialize;

use crate::curves::{build, DistributionSpec, RevenueCurve};
use crate::numerics::{argmin_indexed, find_root, Bracket, Grid1D, GridScale};
use crate::sample_bid::{best_response, utility, Bid, BidKind};
use crate::{Error, Result};

pub const REGULAR_ALPHA: f64 = 0.7;
pub const REGULAR_TARGET: f64 = 0.545;
/// Boundary between the small and large monopoly-quantile regimes.
pub const Q_SPLIT: f64 = 0.62;

/// `-ln(q)/(1-q)`, continuous at `q = 1`.
fn neg_log_ratio(q: f64) -> f64 {
    let e = 1.0 - q;
    if e.abs() < 1e-8 {
        1.0 + 0.5 * e + e * e / 3.0
    } else {
        -q.ln() / e
    }
}

/// `ln(1 + x)/x`, continuous at `x = 0`.
fn log1p_ratio(x: f64) -> f64 {
    if x.abs() < 1e-12 {
        1.0
    } else {
        x.ln_1p() / x
    }
}

// ---------------------------------------------------------------------------
// Per-curve bounds

/// Minimum payment for a bid `b <= v_m` given monopoly quantile `q_m`,
/// attained by the curve that is straight from `(q_m, 1)` to `(1, 0)`.
///
/// ```
/// let p = sblab::cert_regular::payment_lb_low(1.0 / 0.62, 0.62, 0.7);
/// assert!((p - 0.88059).abs() < 1e-5);
/// ```
pub fn payment_lb_low(b: f64, q_m: f64, alpha: f64) -> f64 {
    alpha * b * log1p_ratio(b * (1.0 - q_m))
}

/// Minimum payment for the bid `v_m/alpha` given `(q_m, q'', w)`.
///
/// The bid wins against samples below quantile `q''`; the payment is
/// `q''/q_m + alpha w` from samples between `q''` and `q_m`, plus the
/// smallest possible contribution of samples above `q_m`.
pub fn payment_lb_vm_over_alpha(q_m: f64, q_pp: f64, w: f64, alpha: f64) -> f64 {
    q_pp / q_m + alpha * w + alpha * (neg_log_ratio(q_m) - 1.0)
}

/// The published form of [`payment_lb_vm_over_alpha`], without the `-alpha`
/// term. It can exceed the true payment and is not used for certification.
pub fn payment_lb_vm_over_alpha_published(q_m: f64, q_pp: f64, w: f64, alpha: f64) -> f64 {
    q_pp / q_m + alpha * w + alpha * neg_log_ratio(q_m)
}

fn check_lemma_range(v: f64, q_m: f64, alpha: f64) -> Result<()> {
    let cap = 1.0 / (alpha * q_m);
    if v > cap * (1.0 + 1e-12) {
        return Err(Error::OutOfRange(format!("value {v} above v_m/alpha = {cap}")));
    }
    Ok(())
}

/// Lower bound on the quantile of value `v <= v_m/alpha`.
///
/// Below `v_m` the extreme curve is the straight line from `(q_m, 1)` to
/// `(1, 0)`; above it, concavity keeps `R` above its chord from
/// `(q'', q''/(alpha q_m))` to `(q_m, 1)`.
pub fn quantile_lb(v: f64, q_m: f64, q_pp: f64, alpha: f64) -> Result<f64> {
    check_lemma_range(v, q_m, alpha)?;
    if v <= 1.0 / q_m {
        return Ok(1.0 / (1.0 + v * (1.0 - q_m)));
    }
    let r_pp = q_pp / (alpha * q_m);
    let s = (1.0 - r_pp) / (q_m - q_pp);
    let c = 1.0 - s * q_m;
    if c <= 0.0 {
        return Ok(0.0);
    }
    Ok(c / (v - s))
}

/// The published form of [`quantile_lb`]. Its second branch can exceed the
/// true quantile and is not used for certification.
pub fn quantile_lb_published(v: f64, q_m: f64, q_pp: f64, alpha: f64) -> Result<f64> {
    check_lemma_range(v, q_m, alpha)?;
    if v <= 1.0 / q_m {
        return Ok(1.0 / (1.0 + v * (1.0 - q_m)));
    }
    Ok((2.0 * q_m - q_pp * (1.0 + 1.0 / alpha)) / (1.0 + v * (1.0 - q_m)))
}

/// Utility of bidding `v_m/alpha` on the curve that keeps the shape below
/// `q_m`, stays at 1 until `q_hat`, then falls straight to `(1, 0)`.
fn high_bid_utility(v: f64, q_m: f64, q_pp: f64, w: f64, q_hat: f64, alpha: f64) -> f64 {
    v * (1.0 - q_pp) - q_pp / q_m - alpha * (w + (q_hat / q_m).ln() + neg_log_ratio(q_hat) - 1.0)
}

/// Best utility of value `v` among bids on the straight part of that curve.
fn low_bid_utility(v: f64, q_hat: f64, alpha: f64) -> f64 {
    let e = 1.0 - q_hat;
    if e <= 0.0 {
        return 0.0;
    }
    let b = (v / alpha - 1.0 / e).clamp(0.0, 1.0 / q_hat);
    let x = b * e;
    // q_b = 1/(1 + x); payment alpha ln(1 + x)/e
    v * x / (1.0 + x) - alpha * x.ln_1p() / e
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct CriticalValue {
    pub v: f64,
    /// No value below the cap satisfied the inequality; `v` is the cap.
    pub unbounded: bool,
}

/// Smallest `v` for which bidding `v_m/alpha` beats every lower bid on every
/// reduced curve indexed by `q_hat`; an upper bound on the critical value
/// `v*` of any curve with diagnostics `(q_m, q'', w)`.
pub fn critical_value_ub(q_m: f64, q_pp: f64, w: f64, q_hat: &Grid1D, alpha: f64) -> CriticalValue {
    let holds = |v: f64| {
        q_hat
            .nodes()
            .all(|qh| high_bid_utility(v, q_m, q_pp, w, qh, alpha) >= low_bid_utility(v, qh, alpha))
    };
    let cap = 10.0 / q_m;
    if !holds(cap) {
        return CriticalValue { v: cap, unbounded: true };
    }
    let (mut lo, mut hi) = (0.0, cap);
    while hi - lo > 1e-10 * hi {
        let mid = 0.5 * (lo + hi);
        if holds(mid) {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    CriticalValue { v: hi, unbounded: false }
}

/// Lower bound on the optimal bid of the type at quantile `q >= q_m`, over
/// pentagon curves whose monopoly quantile is at least `q_m`, with `n`
/// nodes per pentagon parameter.
pub fn pentagon_bid_lb(q: f64, q_m: f64, n: usize, alpha: f64) -> f64 {
    PentagonFamily::new(q_m, n).bid_lb(q, alpha)
}

/// The finite set of pentagon curves searched by [`pentagon_bid_lb`].
pub struct PentagonFamily {
    curves: Vec<RevenueCurve>,
}

impl PentagonFamily {
    pub fn new(q_m: f64, n: usize) -> PentagonFamily {
        let n = n.max(2);
        // the last node is exactly `hi`: a near-vertical final segment is a
        // different curve from a flat one and bids differently
        let node = |lo: f64, hi: f64, i: usize| if i + 1 == n { hi } else { lo + (hi - lo) * i as f64 / (n - 1) as f64 };
        let mut curves = Vec::new();
        for i in 0..n {
            let qm = node(q_m, 1.0, i);
            for j in 0..n {
                let q_k = node(qm, 1.0, j);
                let floor = if qm < 1.0 { (1.0 - q_k) / (1.0 - qm) } else { 1.0 };
                for l in 0..n {
                    let r_k = node(floor, 1.0, l).min(1.0);
                    if let Ok(c) = build(&DistributionSpec::Pentagon { q_m: qm, q_k, r_k }) {
                        curves.push(c);
                    }
                    if floor >= 1.0 {
                        break;
                    }
                }
                if qm >= 1.0 {
                    break;
                }
            }
        }
        PentagonFamily { curves }
    }

    pub fn len(&self) -> usize {
        self.curves.len()
    }

    pub fn is_empty(&self) -> bool {
        self.curves.is_empty()
    }

    pub fn bid_lb(&self, q: f64, alpha: f64) -> f64 {
        self.curves
            .iter()
            .map(|c| best_response(c.value(q), c, alpha).bid.amount().max(0.0))
            .fold(f64::INFINITY, f64::min)
    }
}

/// Diagnostics `(q'', w)` of a normalized curve.
pub fn band_parameters(curve: &RevenueCurve, alpha: f64) -> (f64, f64) {
    let q_pp = curve.quantile(curve.v_m() / alpha);
    let w = curve.welfare_below(q_pp) - curve.welfare_below(curve.q_m());
    (q_pp, w)
}

/// Checks on an explicit pair of curves that a preference for the bid at
/// quantile `q_dag` over every higher bid survives raising the curve below
/// `q_dag`. Bids are compared in quantile space on the grid `x in [0, q_dag]`.
pub fn revenue_monotone_check(r1: &RevenueCurve, r2: &RevenueCurve, q_dag: f64, v: f64, alpha: f64) -> Result<bool> {
    const N: usize = 200;
    for i in 0..=N {
        let q = q_dag * i as f64 / N as f64;
        if r1.revenue(q) > r2.revenue(q) + 1e-12 {
            return Err(Error::InvalidParameter(format!("r1 > r2 at q = {q}")));
        }
    }
    if (r1.revenue(q_dag) - r2.revenue(q_dag)).abs() > 1e-12 {
        return Err(Error::InvalidParameter(format!("r1 and r2 differ at q = {q_dag}")));
    }
    let u = |c: &RevenueCurve, x: f64| {
        let p = crate::sample_bid::payment_at(c, x, alpha);
        if p.is_finite() {
            v * (1.0 - x) - p
        } else {
            f64::NEG_INFINITY
        }
    };
    let (u1, u2) = (u(r1, q_dag), u(r2, q_dag));
    Ok((0..N).all(|i| {
        let x = q_dag * i as f64 / N as f64;
        u1 < u(r1, x) || u2 >= u(r2, x) - 1e-9
    }))
}

/// Whether value `v >= v_m` weakly prefers the bid `v/alpha` to every bid in
/// `[v_m, v/alpha]` on an `n`-point grid.
pub fn prefers_v_over_alpha(curve: &RevenueCurve, v: f64, alpha: f64, n: usize) -> bool {
    let top = utility(v, Bid::Finite(v / alpha), curve, alpha);
    let v_m = curve.v_m();
    (0..=n).all(|i| {
        let b = v_m + (v / alpha - v_m) * i as f64 / n as f64;
        top >= utility(v, Bid::Finite(b), curve, alpha) - 1e-9
    })
}

// ---------------------------------------------------------------------------
// Large monopoly quantiles: the r0-line family

/// Revenue bound when the monopoly-reserve type bids above the reserve.
pub fn branch_a_bound(q_m: f64, alpha: f64) -> f64 {
    alpha * q_m * neg_log_ratio(q_m)
}

/// Utility of value `v` at its optimal bid above the reserve on the r0-line
/// curve: bid quantile `alpha r0/v`, bid `v/alpha + (1 - r0)/q_m`.
pub fn r0_line_utility(v: f64, q_m: f64, r0: f64, alpha: f64) -> f64 {
    let log_term = if r0 > 0.0 { alpha * r0 * (q_m * v / (alpha * r0)).ln() } else { 0.0 };
    v - alpha * r0 - alpha - log_term + alpha * q_m.ln()
}

/// Value at which bidding above the reserve breaks even on the r0-line curve.
pub fn r0_line_critical_value(q_m: f64, r0: f64, alpha: f64) -> f64 {
    if r0 == 0.0 {
        return alpha * (1.0 - q_m.ln());
    }
    let f = |v: f64| r0_line_utility(v, q_m, r0, alpha);
    let lo = alpha * r0 / q_m;
    let mut hi = 2.0 * lo.max(1.0);
    while f(hi) <= 0.0 {
        hi *= 2.0;
    }
    if f(lo) >= 0.0 {
        return lo;
    }
    find_root(f, Bracket { lo, hi, f_lo: f(lo), f_hi: f(hi) }, 1e-13).expect("sign change checked")
}

/// `p(v*) q*` for one r0-line curve, or `None` when the reserve type already
/// bids above the reserve.
///
/// ```
/// let t = sblab::cert_regular::r0_line_point(1.0, 0.328, 0.7).unwrap();
/// assert!((t - 0.5474).abs() < 1e-3);
/// ```
pub fn r0_line_point(q_m: f64, r0: f64, alpha: f64) -> Option<f64> {
    if r0_line_utility(1.0 / q_m, q_m, r0, alpha) > 0.0 {
        return None;
    }
    let v = r0_line_critical_value(q_m, r0, alpha);
    let q_star = r0 / (v - (1.0 - r0) / q_m);
    Some((v - alpha * r0) * q_star)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct RegCellLarge {
    pub q_m_lo: f64,
    pub q_m_hi: f64,
    pub r0_lo: f64,
    pub r0_hi: f64,
    pub cert_revenue_lb: f64,
    /// Some curve in the box may have `v* >= v_m`.
    pub feasible: bool,
}

/// Certified bound over a parameter box, from the monotonicity of the
/// r0-line utility (increasing in `q_m` and `v`, decreasing in `r0`).
pub fn r0_line_box(q_m_lo: f64, q_m_hi: f64, r0_lo: f64, r0_hi: f64, alpha: f64) -> RegCellLarge {
    let mut cell = RegCellLarge { q_m_lo, q_m_hi, r0_lo, r0_hi, cert_revenue_lb: f64::INFINITY, feasible: false };
    if r0_line_utility(1.0 / q_m_hi, q_m_hi, r0_hi, alpha) > 0.0 {
        return cell;
    }
    let v_up = r0_line_critical_value(q_m_lo, r0_hi, alpha);
    if v_up < 1.0 / q_m_hi {
        return cell;
    }
    cell.feasible = true;
    let v_dn = r0_line_critical_value(q_m_hi, r0_lo, alpha).max(1.0 / q_m_hi);
    let q_dn = if r0_lo > 0.0 { r0_lo / (v_up - (1.0 - r0_lo) / q_m_hi) } else { 0.0 };
    cell.cert_revenue_lb = (v_dn - alpha * r0_hi).max(0.0) * q_dn;
    cell
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LargeGrid {
    /// Nodes for the closed-form branch on `[0.62, 1]`.
    pub branch_a: Grid1D,
    pub q_boxes: usize,
    pub r_boxes: usize,
    /// Boxes below target are split in four up to this depth.
    pub max_depth: u32,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LargeReport {
    pub branch_a_min: f64,
    pub branch_a_argmin_q_m: f64,
    pub branch_b_min: f64,
    pub branch_b_argmin: RegCellLarge,
    pub boxes: usize,
    pub infeasible_boxes: usize,
}

struct BoxStats {
    worst: RegCellLarge,
    leaves: usize,
    infeasible: usize,
}

fn refine(cell: RegCellLarge, depth: u32, grid: &LargeGrid, alpha: f64, target: f64) -> BoxStats {
    let c = r0_line_box(cell.q_m_lo, cell.q_m_hi, cell.r0_lo, cell.r0_hi, alpha);
    if !c.feasible {
        return BoxStats { worst: c, leaves: 1, infeasible: 1 };
    }
    if c.cert_revenue_lb >= target || depth >= grid.max_depth {
        return BoxStats { worst: c, leaves: 1, infeasible: 0 };
    }
    let qm = 0.5 * (c.q_m_lo + c.q_m_hi);
    let rm = 0.5 * (c.r0_lo + c.r0_hi);
    let kids = [
        (c.q_m_lo, qm, c.r0_lo, rm),
        (c.q_m_lo, qm, rm, c.r0_hi),
        (qm, c.q_m_hi, c.r0_lo, rm),
        (qm, c.q_m_hi, rm, c.r0_hi),
    ];
    let mut out = BoxStats { worst: c, leaves: 0, infeasible: 0 };
    out.worst.cert_revenue_lb = f64::INFINITY;
    out.worst.feasible = false;
    for (a, b, r, s) in kids {
        let kid = RegCellLarge { q_m_lo: a, q_m_hi: b, r0_lo: r, r0_hi: s, cert_revenue_lb: 0.0, feasible: true };
        let st = refine(kid, depth + 1, grid, alpha, target);
        out.leaves += st.leaves;
        out.infeasible += st.infeasible;
        if st.worst.feasible && st.worst.cert_revenue_lb < out.worst.cert_revenue_lb {
            out.worst = st.worst;
        }
    }
    out
}

pub fn verify_regular_large(alpha: f64, grid: &LargeGrid, target: f64) -> Result<LargeReport> {
    if grid.branch_a.lo > Q_SPLIT || grid.branch_a.hi < 1.0 || grid.q_boxes == 0 || grid.r_boxes == 0 {
        return Err(Error::InvalidGrid("large-q_m grid must cover [0.62, 1] x [0, 1]".into()));
    }
    let a = &grid.branch_a;
    let (ia, branch_a_min, ()) =
        argmin_indexed(a.len(), |i| (branch_a_bound(a.node(i), alpha), ())).ok_or(Error::EmptyGrid)?;
    let qg = Grid1D::new(Q_SPLIT, 1.0, grid.q_boxes)?;
    let rg = Grid1D::new(0.0, 1.0, grid.r_boxes)?;
    let stats: Vec<BoxStats> = (0..grid.q_boxes * grid.r_boxes)
        .into_par_iter()
        .map(|k| {
            let (i, j) = (k / grid.r_boxes, k % grid.r_boxes);
            let cell = RegCellLarge {
                q_m_lo: qg.node(i),
                q_m_hi: qg.node(i + 1),
                r0_lo: rg.node(j),
                r0_hi: rg.node(j + 1),
                cert_revenue_lb: 0.0,
                feasible: true,
            };
            refine(cell, 0, grid, alpha, target)
        })
        .collect();
    let (_, branch_b_min, branch_b_argmin) = argmin_indexed(stats.len(), |k| {
        let w = stats[k].worst;
        (if w.feasible { w.cert_revenue_lb } else { f64::INFINITY }, w)
    })
    .ok_or(Error::EmptyGrid)?;
    Ok(LargeReport {
        branch_a_min,
        branch_a_argmin_q_m: a.node(ia),
        branch_b_min,
        branch_b_argmin,
        boxes: stats.iter().map(|s| s.leaves).sum(),
        infeasible_boxes: stats.iter().map(|s| s.infeasible).sum(),
    })
}

// ---------------------------------------------------------------------------
// Small monopoly quantiles: the (q_m, q'', w) assembly

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum SmallCase {
    /// `v* <= v_m`.
    I,
    /// `v_m < v* < v_m/alpha`.
    Ii,
    /// `v* >= v_m/alpha` could not be ruled out.
    Iii,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct RegCellSmall {
    pub q_m: f64,
    pub q_pp: f64,
    pub w: f64,
    pub case: SmallCase,
    pub v_crit: f64,
    pub cert_revenue_lb: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SmallGrid {
    /// Monopoly quantiles `step, 2 step, ..., 0.62`.
    pub q_m_step: f64,
    /// `q''` nodes on `[0, alpha q_m]`.
    pub q_pp_steps: usize,
    pub w_nodes: usize,
    pub q_hat_nodes: usize,
    /// Quantile nodes on `[q_m, 1]` for the low-type payment integral.
    pub q_nodes: usize,
    pub pentagon_nodes: usize,
}

/// Feasible `w` for given `(q_m, q'')`: `v` lies in `[v_m, v_m/alpha]` on
/// `[q'', q_m]`, `R <= 1`, and `R` lies above its chord.
pub fn w_range(q_m: f64, q_pp: f64, alpha: f64) -> (f64, f64) {
    let mut lo = (q_m - q_pp) / q_m;
    let mut hi = (q_m - q_pp) / (alpha * q_m);
    if q_pp > 0.0 {
        let r_pp = q_pp / (alpha * q_m);
        let s = (1.0 - r_pp) / (q_m - q_pp);
        let c = 1.0 - s * q_m;
        lo = lo.max(c * (q_m / q_pp).ln() + s * (q_m - q_pp));
        hi = hi.min((q_m / q_pp).ln());
    }
    (lo, hi.max(lo))
}

/// Everything that depends only on `q_m`: the low-type payment bounds.
pub struct SmallColumn {
    pub q_m: f64,
    q_hat: Grid1D,
    /// `(q, f(q))`, `f` non-increasing: minimum payment of the type at `q`.
    payments: Vec<(f64, f64)>,
    alpha: f64,
}

impl SmallColumn {
    pub fn new(q_m: f64, grid: &SmallGrid, alpha: f64) -> Result<SmallColumn> {
        let q_hat = Grid1D::new(q_m, 1.0, grid.q_hat_nodes.max(2) - 1)?;
        let qs = Grid1D::new(q_m, 1.0, grid.q_nodes.max(2) - 1)?;
        let family = PentagonFamily::new(q_m, grid.pentagon_nodes);
        let v_m = 1.0 / q_m;
        let mut payments: Vec<(f64, f64)> = qs
            .nodes()
            .map(|q| (q, payment_lb_low(family.bid_lb(q, alpha).min(v_m), q_m, alpha)))
            .collect();
        // running minimum keeps the table non-increasing
        for i in 1..payments.len() {
            payments[i].1 = payments[i].1.min(payments[i - 1].1);
        }
        Ok(SmallColumn { q_m, q_hat, payments, alpha })
    }

    /// Lower Riemann sum of `∫_a^1 f(q) dq`.
    pub fn low_type_revenue(&self, a: f64) -> f64 {
        self.payments
            .windows(2)
            .filter(|w| w[1].0 > a)
            .map(|w| (w[1].0 - w[0].0.max(a)) * w[1].1)
            .sum()
    }

    /// Bound for one cell. `w_hi`, when given, is the upper `w` edge of the
    /// cell; the bound then holds for every `w` in `[w, w_hi]`.
    pub fn cell(&self, q_pp: f64, w: f64, w_hi: Option<f64>) -> RegCellSmall {
        let (q_m, alpha) = (self.q_m, self.alpha);
        let v_m = 1.0 / q_m;
        let crit = critical_value_ub(q_m, q_pp, w_hi.unwrap_or(w), &self.q_hat, alpha);
        let p_high = payment_lb_vm_over_alpha(q_m, q_pp, w, alpha);
        let p_reserve = payment_lb_low(v_m, q_m, alpha);
        let (case, bound) = if crit.unbounded || crit.v >= v_m / alpha * (1.0 - 1e-12) {
            (SmallCase::Iii, self.low_type_revenue(q_m))
        } else if crit.v <= v_m {
            let q_bar = 1.0 / (1.0 + crit.v * (1.0 - q_m));
            (SmallCase::I, p_high * q_m + p_reserve * (q_bar - q_m) + self.low_type_revenue(q_bar))
        } else {
            let q_lb = quantile_lb(crit.v, q_m, q_pp, alpha).expect("v below v_m/alpha");
            (SmallCase::Ii, p_high * q_lb + self.low_type_revenue(q_m))
        };
        RegCellSmall { q_m, q_pp, w, case, v_crit: crit.v, cert_revenue_lb: bound }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SmallReport {
    pub min: f64,
    pub argmin: RegCellSmall,
    pub case_iii_empty: bool,
    pub case_iii_cells: usize,
    pub first_case_iii: Option<RegCellSmall>,
    #[serde(skip)]
    pub cells: Vec<RegCellSmall>,
}

pub fn verify_regular_small(alpha: f64, grid: &SmallGrid, certified: bool) -> Result<SmallReport> {
    if !(grid.q_m_step > 0.0 && grid.q_m_step <= Q_SPLIT) || grid.q_pp_steps == 0 || grid.w_nodes == 0 {
        return Err(Error::InvalidGrid("small-q_m grid is empty".into()));
    }
    let n_qm = (Q_SPLIT / grid.q_m_step - 1e-9).ceil() as usize;
    let q_ms: Vec<f64> = (1..=n_qm).map(|i| (i as f64 * grid.q_m_step).min(Q_SPLIT)).collect();
    let columns: Vec<Vec<RegCellSmall>> = q_ms
        .par_iter()
        .map(|&q_m| -> Result<Vec<RegCellSmall>> {
            let col = SmallColumn::new(q_m, grid, alpha)?;
            let mut cells = Vec::new();
            for i in 0..=grid.q_pp_steps {
                let q_pp = alpha * q_m * i as f64 / grid.q_pp_steps as f64;
                let (lo, hi) = w_range(q_m, q_pp, alpha);
                let n = grid.w_nodes;
                let node = |j: usize| if n == 1 { lo } else { lo + (hi - lo) * j as f64 / (n - 1) as f64 };
                for j in 0..n {
                    let w_hi = if certified && j + 1 < n { Some(node(j + 1)) } else { None };
                    cells.push(col.cell(q_pp, node(j), w_hi));
                }
            }
            Ok(cells)
        })
        .collect::<Result<_>>()?;
    let cells: Vec<RegCellSmall> = columns.into_iter().flatten().collect();
    let (_, min, argmin) = argmin_indexed(cells.len(), |i| (cells[i].cert_revenue_lb, cells[i])).ok_or(Error::EmptyGrid)?;
    let iii: Vec<&RegCellSmall> = cells.iter().filter(|c| c.case == SmallCase::Iii).collect();
    Ok(SmallReport {
        min,
        argmin,
        case_iii_empty: iii.is_empty(),
        case_iii_cells: iii.len(),
        first_case_iii: iii.first().map(|c| **c),
        cells,
    })
}

/// Grid resolutions for the whole regular certification.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RegularGrid {
    pub large: LargeGrid,
    pub small: SmallGrid,
}

impl RegularGrid {
    pub fn preset(scale: GridScale) -> RegularGrid {
        let (a_steps, q_boxes, r_boxes, max_depth) = match scale {
            GridScale::Coarse => (1000, 38, 100, 6),
            GridScale::Default => (3800, 76, 200, 8),
            GridScale::Fine => (38000, 152, 400, 10),
        };
        let small = match scale {
            GridScale::Coarse => SmallGrid {
                q_m_step: 0.02,
                q_pp_steps: 20,
                w_nodes: 8,
                q_hat_nodes: 60,
                q_nodes: 100,
                pentagon_nodes: 8,
            },
            GridScale::Default => SmallGrid {
                q_m_step: 5e-3,
                q_pp_steps: 200,
                w_nodes: 20,
                q_hat_nodes: 200,
                q_nodes: 200,
                pentagon_nodes: 12,
            },
            GridScale::Fine => SmallGrid {
                q_m_step: 2.5e-3,
                q_pp_steps: 400,
                w_nodes: 30,
                q_hat_nodes: 400,
                q_nodes: 400,
                pentagon_nodes: 16,
            },
        };
        RegularGrid {
            large: LargeGrid {
                branch_a: Grid1D::new(Q_SPLIT, 1.0, a_steps).expect("valid preset"),
                q_boxes,
                r_boxes,
                max_depth,
            },
            small,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct BranchMinima {
    /// `q_m >= 0.62`, reserve type bids above the reserve.
    pub large_low_critical: f64,
    /// `q_m >= 0.62`, certified r0-line boxes.
    pub large_high_critical: f64,
    /// `q_m <= 0.62`.
    pub small: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RegularArgmin {
    pub large_low_critical_q_m: f64,
    pub large_high_critical: RegCellLarge,
    pub small: RegCellSmall,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RegularReport {
    pub alpha: f64,
    pub target: f64,
    pub min_bound: f64,
    pub margin: f64,
    pub branch_minima: BranchMinima,
    pub argmin: RegularArgmin,
    pub case_iii_empty: bool,
    pub case_iii_cells: usize,
    pub first_case_iii: Option<RegCellSmall>,
    pub large_boxes: usize,
    pub small_cells: usize,
    pub certified: bool,
    pub pass: bool,
    #[serde(skip)]
    pub cells: Vec<RegCellSmall>,
}

pub fn verify_regular(alpha: f64, grid: &RegularGrid, certified: bool) -> Result<RegularReport> {
    if !(alpha > 0.0 && alpha < 1.0) {
        return Err(Error::InvalidParameter(format!("alpha = {alpha} must be in (0, 1)")));
    }
    let large = verify_regular_large(alpha, &grid.large, REGULAR_TARGET)?;
    let small = verify_regular_small(alpha, &grid.small, certified)?;
    let branch_minima = BranchMinima {
        large_low_critical: large.branch_a_min,
        large_high_critical: large.branch_b_min,
        small: small.min,
    };
    let min_bound = branch_minima.large_low_critical.min(branch_minima.large_high_critical).min(branch_minima.small);
    Ok(RegularReport {
        alpha,
        target: REGULAR_TARGET,
        min_bound,
        margin: min_bound - REGULAR_TARGET,
        branch_minima,
        argmin: RegularArgmin {
            large_low_critical_q_m: large.branch_a_argmin_q_m,
            large_high_critical: large.branch_b_argmin,
            small: small.argmin,
        },
        case_iii_empty: small.case_iii_empty,
        case_iii_cells: small.case_iii_cells,
        first_case_iii: small.first_case_iii,
        large_boxes: large.boxes,
        small_cells: small.cells.len(),
        certified,
        pass: min_bound >= REGULAR_TARGET && small.case_iii_empty,
        cells: small.cells,
    })
}

/// Whether the best response of the type at quantile `q` reaches `b`.
pub fn bids_at_least(curve: &RevenueCurve, q: f64, b: f64, alpha: f64) -> bool {
    let br = best_response(curve.value(q), curve, alpha);
    br.kind != BidKind::Zero && br.bid.amount() >= b
}
