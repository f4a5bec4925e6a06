//! Lower bound on the prior-independent ratio of every mechanism, truthful or
//! not, from a uniform prior on `[l, h]` and the point masses inside it.
//!
//! A mechanism with ratio `beta` must
//!
//! * allocate to the highest type of `U[l, h]` with probability at least `1/beta`;
//! * leave that type utility at least `(h - sqrt(h^2 - 4 l (h - l)/beta)) / 2`;
//! * leave a point-mass type `s` utility at most `s (1 - 1/beta)`.
//!
//! A point-mass type can imitate the highest uniform type, which gives an
//! inequality that fails for `beta` below a threshold.

use serde::Serialize;

use crate::numerics::{find_root, Bracket};
use crate::{Error, Result};

/// Support of the uniform prior.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct LbInstance {
    pub l: f64,
    pub h: f64,
}

impl LbInstance {
    pub const UNIT: LbInstance = LbInstance { l: 1.0, h: 2.0 };

    pub fn new(l: f64, h: f64) -> Result<LbInstance> {
        if !(l > 0.0 && l < h && h <= 2.0 * l) {
            return Err(Error::InvalidParameter(format!("need 0 < l < h <= 2l, got l = {l}, h = {h}")));
        }
        Ok(LbInstance { l, h })
    }

    /// Only `h = 2l` is the instance the bound was originally stated for.
    pub fn is_reference(&self) -> bool {
        (self.h - 2.0 * self.l).abs() <= 1e-12 * self.l
    }
}

/// Minimum utility of the highest uniform type.
fn utility_floor(beta: f64, inst: LbInstance) -> f64 {
    let LbInstance { l, h } = inst;
    0.5 * (h - (h * h - 4.0 * l * (h - l) / beta).max(0.0).sqrt())
}

/// Left side minus right side of the imitation inequality; positive means no
/// mechanism achieves ratio `beta`.
///
/// ```
/// use sblab::lower_bound::{feasibility_gap, LbInstance};
/// assert!((feasibility_gap(1.0, LbInstance::UNIT).unwrap() - 0.5).abs() < 1e-15);
/// ```
pub fn feasibility_gap(beta: f64, inst: LbInstance) -> Result<f64> {
    if !(beta >= 1.0) {
        return Err(Error::InvalidParameter(format!("beta = {beta} must be >= 1")));
    }
    let LbInstance { l, h } = inst;
    let width = h - l;
    // E[s x(h, s)] when the allocation mass 1/beta sits on the lowest samples
    let reach = l + width / beta;
    let value_won = (reach * reach - l * l) / (2.0 * width);
    let max_payment = h - utility_floor(beta, inst);
    let imitation_cap = 0.5 * (l + h) * (1.0 - 1.0 / beta);
    Ok(value_won - max_payment - imitation_cap)
}

/// Smallest `beta` in `[1, 2]` where the imitation inequality can hold.
pub fn solve_beta(inst: LbInstance, tol: f64) -> Result<f64> {
    let f = |b: f64| feasibility_gap(b, inst).unwrap_or(f64::NAN);
    let bracket = Bracket::new(f, 1.0, 2.0).map_err(|e| match e {
        Error::NoBracket { .. } => Error::InvalidParameter("inequality never binds on [1, 2]".into()),
        e => e,
    })?;
    find_root(f, bracket, tol)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct LowerBound {
    pub beta: f64,
    pub l: f64,
    pub h: f64,
    /// True when `h != 2l`.
    pub non_reference: bool,
}

pub fn lower_bound(inst: LbInstance, tol: f64) -> Result<LowerBound> {
    Ok(LowerBound { beta: solve_beta(inst, tol)?, l: inst.l, h: inst.h, non_reference: !inst.is_reference() })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn closed_form(beta: f64) -> f64 {
        let ib = 1.0 / beta;
        0.5 * (1.0 + ib).powi(2) - 0.5 - (1.0 + (1.0 - ib).sqrt()) - 1.5 * (1.0 - ib)
    }

    #[test]
    fn matches_unit_closed_form() {
        for beta in [1.0, 1.05, 1.0737, 1.3, 2.0] {
            let g = feasibility_gap(beta, LbInstance::UNIT).unwrap();
            assert!((g - closed_form(beta)).abs() < 1e-14, "{beta}");
        }
        assert!((feasibility_gap(2.0, LbInstance::UNIT).unwrap() + 1.832106781).abs() < 1e-8);
    }

    #[test]
    fn root() {
        let b = solve_beta(LbInstance::UNIT, 1e-12).unwrap();
        assert!((b - 1.0737).abs() < 1e-3, "{b}");
        let tight = solve_beta(LbInstance::UNIT, 1e-10).unwrap();
        assert!((tight - b).abs() < 1e-6);
    }

    #[test]
    fn rejects_bad_inputs() {
        assert!(feasibility_gap(0.9, LbInstance::UNIT).is_err());
        assert!(LbInstance::new(1.0, 2.5).is_err());
        assert!(LbInstance::new(1.0, 1.0).is_err());
    }

    #[test]
    fn generic_instance_flags() {
        let lb = lower_bound(LbInstance::new(1.0, 1.5).unwrap(), 1e-12).unwrap();
        assert!(lb.beta > 1.0 && lb.non_reference);
        assert!(!lower_bound(LbInstance::UNIT, 1e-12).unwrap().non_reference);
    }
}
