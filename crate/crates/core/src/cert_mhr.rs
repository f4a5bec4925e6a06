//! Grid certification of a revenue lower bound for MHR distributions.
//!
//! For MHR values the best response is a threshold rule: bid `Top` iff
//! `v >= alpha E[v]`. With optimal revenue normalized to 1, the revenue is
//! `alpha w q(alpha w)` where `w = E[v]`, and `q(alpha w)` is bounded below by
//! exponential envelopes through known (value, quantile) anchors.

use serde::Serialize;

use crate::numerics::{argmin_indexed, Grid1D, GridScale};
use crate::{Error, Result};

pub const MHR_ALPHA: f64 = 0.824;
pub const MHR_TARGET: f64 = 0.7717;
pub const W_MAX: f64 = 50.0;

/// MHR monopoly quantiles are at least `1/e`.
pub const Q_M_MIN: f64 = 0.367_879_441_171_442_33;

/// Exponential envelope: `q(v) >= q2 exp((v - v2)/(v1 - v2) ln(q1/q2))` for
/// anchors `(v1, q1)`, `(v2, q2)` with `v1 > v2` and `v >= v2`.
///
/// ```
/// let q = sblab::cert_mhr::quantile_envelope_mhr(1.0, (-1f64).exp(), 0.0, 1.0, 0.5).unwrap();
/// assert!((q - (-0.5f64).exp()).abs() < 1e-12);
/// ```
pub fn quantile_envelope_mhr(v1: f64, q1: f64, v2: f64, q2: f64, v: f64) -> Result<f64> {
    if !(v1 > v2) {
        return Err(Error::InvalidParameter(format!("degenerate anchors v1 = {v1}, v2 = {v2}")));
    }
    Ok(q2 * ((v - v2) / (v1 - v2) * (q1 / q2).ln()).exp())
}

/// Lower bound on the normalized expected value given the monopoly quantile.
pub fn welfare_lb(q_m: f64) -> f64 {
    if q_m >= 1.0 - 1e-12 {
        1.0
    } else {
        (q_m - 1.0) / (q_m * q_m.ln())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum MhrCase {
    /// `alpha w < v_m`: the threshold value is below the monopoly reserve.
    BelowReserve,
    AboveReserve,
}

pub fn cell_case(q_m: f64, w: f64, alpha: f64) -> MhrCase {
    if alpha * w < 1.0 / q_m {
        MhrCase::BelowReserve
    } else {
        MhrCase::AboveReserve
    }
}

/// Revenue lower bound for a normalized MHR curve with monopoly quantile `q_m`
/// and expected value `w`.
///
/// ```
/// let b = sblab::cert_mhr::cell_revenue_lb(1.0, 1.0, 0.824);
/// assert!((b - 0.824).abs() < 1e-12);
/// ```
pub fn cell_revenue_lb(q_m: f64, w: f64, alpha: f64) -> f64 {
    let aw = alpha * w;
    match cell_case(q_m, w, alpha) {
        MhrCase::BelowReserve => {
            // envelope through (0, 1) and (v_m, q_m)
            aw * (aw * q_m * q_m.ln()).exp()
        }
        MhrCase::AboveReserve => {
            let v_m = 1.0 / q_m;
            // envelope through (v_m, q_m) and (w, 1/e); step off the pole
            let w = if (w - v_m).abs() < 1e-12 { v_m + 1e-9 } else { w };
            let exponent = (aw - v_m) / (w - v_m) * (1.0 / (std::f64::consts::E * q_m)).ln();
            aw * q_m * exponent.exp()
        }
    }
}

/// Grid resolution for [`verify_mhr`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MhrGrid {
    /// Monopoly quantiles; must cover `[1/e, 1]`.
    pub q_m: Grid1D,
    /// Spacing of expected values above [`welfare_lb`].
    pub w_step: f64,
    pub w_max: f64,
}

impl MhrGrid {
    pub fn with_step(step: f64) -> Result<MhrGrid> {
        Ok(MhrGrid { q_m: Grid1D::with_step(Q_M_MIN, 1.0, step)?, w_step: step, w_max: W_MAX })
    }

    /// Steps `1e-2`, `1e-3` and `2.5e-4` in both `q_m` and `w`.
    pub fn preset(scale: GridScale) -> MhrGrid {
        let step = match scale {
            GridScale::Coarse => 1e-2,
            GridScale::Default => 1e-3,
            GridScale::Fine => 2.5e-4,
        };
        MhrGrid::with_step(step).expect("valid preset")
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct MhrCell {
    pub q_m: f64,
    pub w: f64,
    pub case: MhrCase,
    pub cert_revenue_lb: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MhrReport {
    pub alpha: f64,
    pub target: f64,
    pub min_bound: f64,
    pub argmin: MhrCell,
    pub pass: bool,
    pub certified: bool,
    /// Minimum per case.
    pub case_minima: CaseMinima,
    /// Case-two bound is non-decreasing in `w` at `w_max` for every `q_m`,
    /// so truncating the `w` range loses nothing.
    pub tail_monotone: bool,
    pub cells: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct CaseMinima {
    pub below_reserve: f64,
    pub above_reserve: f64,
}

struct Row {
    best: MhrCell,
    below: f64,
    above: f64,
    cells: usize,
    tail_ok: bool,
}

fn row(grid: &MhrGrid, i: usize, alpha: f64, certified: bool) -> Row {
    let q = grid.q_m.node(i);
    let q_next = if certified && i + 1 < grid.q_m.len() { Some(grid.q_m.node(i + 1)) } else { None };
    // in certified mode a cell is [q, q_next] x [w, w + step], w measured from
    // the lower welfare bound at q_next (welfare_lb decreases in q_m)
    let w0 = q_next.map_or_else(|| welfare_lb(q), welfare_lb);
    let w_hi = grid.w_max.max(w0);
    let n = ((w_hi - w0) / grid.w_step).floor() as usize;
    let mut best = MhrCell { q_m: q, w: w0, case: cell_case(q, w0, alpha), cert_revenue_lb: f64::INFINITY };
    let (mut below, mut above) = (f64::INFINITY, f64::INFINITY);
    let mut visit = |qq: f64, w: f64| {
        let b = cell_revenue_lb(qq, w, alpha);
        let case = cell_case(qq, w, alpha);
        match case {
            MhrCase::BelowReserve => below = below.min(b),
            MhrCase::AboveReserve => above = above.min(b),
        }
        if b < best.cert_revenue_lb {
            best = MhrCell { q_m: qq, w, case, cert_revenue_lb: b };
        }
    };
    for j in 0..=n {
        let w = (w0 + j as f64 * grid.w_step).min(w_hi);
        visit(q, w);
        if let Some(qn) = q_next {
            visit(qn, w);
            let wn = (w + grid.w_step).min(w_hi);
            visit(q, wn);
            visit(qn, wn);
        }
    }
    let h = 1e-6 * grid.w_max;
    let tail_ok = cell_case(q, grid.w_max, alpha) == MhrCase::BelowReserve
        || cell_revenue_lb(q, grid.w_max + h, alpha) >= cell_revenue_lb(q, grid.w_max, alpha);
    Row { best, below, above, cells: n + 1, tail_ok }
}

/// Minimum of [`cell_revenue_lb`] over the grid; `certified` evaluates the
/// worst corner of each `(q_m, w)` cell instead of its node.
pub fn verify_mhr(alpha: f64, grid: &MhrGrid, certified: bool) -> Result<MhrReport> {
    if !(alpha > 0.0 && alpha <= 1.0) {
        return Err(Error::InvalidParameter(format!("alpha = {alpha} must be in (0, 1]")));
    }
    if grid.q_m.lo > Q_M_MIN + 1e-12 || grid.q_m.hi < 1.0 {
        return Err(Error::InvalidGrid(format!(
            "q_m grid [{}, {}] does not cover [1/e, 1]",
            grid.q_m.lo, grid.q_m.hi
        )));
    }
    if !(grid.w_step > 0.0 && grid.w_max > 1.0) {
        return Err(Error::InvalidGrid("w grid must have positive step and w_max > 1".into()));
    }
    let rows: Vec<Row> = {
        use rayon::prelude::*;
        (0..grid.q_m.len()).into_par_iter().map(|i| row(grid, i, alpha, certified)).collect()
    };
    let (_, _, argmin) =
        argmin_indexed(rows.len(), |i| (rows[i].best.cert_revenue_lb, rows[i].best)).ok_or(Error::EmptyGrid)?;
    let case_minima = CaseMinima {
        below_reserve: rows.iter().map(|r| r.below).fold(f64::INFINITY, f64::min),
        above_reserve: rows.iter().map(|r| r.above).fold(f64::INFINITY, f64::min),
    };
    let min_bound = argmin.cert_revenue_lb;
    Ok(MhrReport {
        alpha,
        target: MHR_TARGET,
        min_bound,
        argmin,
        pass: min_bound >= MHR_TARGET,
        certified,
        case_minima,
        tail_monotone: rows.iter().all(|r| r.tail_ok),
        cells: rows.iter().map(|r| r.cells).sum(),
    })
}
