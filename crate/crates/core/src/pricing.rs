//! Sample-based pricing (post the price `alpha s` to the agent) and the
//! revelation-gap report.

use serde::{Deserialize, Serialize};

use crate::curves::RevenueCurve;
use crate::numerics::{integrate_split, Quadrature};
use crate::{Error, Result};

/// Revenue of posting `alpha s`: `∫_0^1 alpha v(t) Pr[v >= alpha v(t)] dt`
/// where `t` is the sample's quantile. Infinite if the integral diverges.
///
/// ```
/// use sblab::curves::{build, DistributionSpec};
/// let u = build(&DistributionSpec::Uniform { l: 0.0, h: 1.0 }).unwrap();
/// let r = sblab::pricing::pricing_revenue(&u, 1.0).unwrap();
/// assert!((r - 1.0 / 6.0).abs() < 1e-9);
/// ```
pub fn pricing_revenue(curve: &RevenueCurve, alpha: f64) -> Result<f64> {
    if !(alpha > 0.0 && alpha.is_finite()) {
        return Err(Error::InvalidParameter(format!("alpha = {alpha} must be positive")));
    }
    let f = |t: f64| {
        let price = alpha * curve.value(t);
        if !price.is_finite() {
            return f64::INFINITY;
        }
        price * curve.quantile_at_least(price)
    };
    let mut splits = curve.breakpoints();
    splits.push(curve.q_m());
    match integrate_split(f, 0.0, 1.0, &splits, &Quadrature::default()) {
        Err(Error::NonFiniteIntegrand { .. }) => Ok(f64::INFINITY),
        r => r,
    }
}

/// Randomized pricing: `alpha` drawn from a finite mixture of `(weight, alpha)`.
pub fn pricing_revenue_mixture(curve: &RevenueCurve, mixture: &[(f64, f64)]) -> Result<f64> {
    let total: f64 = mixture.iter().map(|m| m.0).sum();
    if mixture.is_empty() || mixture.iter().any(|m| !(m.0 >= 0.0)) || (total - 1.0).abs() > 1e-9 {
        return Err(Error::InvalidParameter("mixture weights must be non-negative and sum to 1".into()));
    }
    mixture.iter().try_fold(0.0, |acc, &(w, a)| Ok(acc + w * pricing_revenue(curve, a)?))
}

/// Ratio bounds per distribution class: the best truthful (sample-based
/// pricing) mechanism lies in `[truthful_lb, truthful_ub]`, the best mechanism
/// overall in `[all_lb, all_ub]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GapConstants {
    pub truthful_lb: f64,
    pub truthful_ub: f64,
    pub all_lb: f64,
    pub all_ub: f64,
}

impl GapConstants {
    pub const REGULAR: GapConstants = GapConstants { truthful_lb: 1.957, truthful_ub: 1.996, all_lb: 1.0737, all_ub: 1.835 };
    pub const MHR: GapConstants = GapConstants { truthful_lb: 1.543, truthful_ub: 1.575, all_lb: 1.0737, all_ub: 1.296 };

    fn check(&self) -> Result<()> {
        let ok = [self.truthful_lb, self.truthful_ub, self.all_lb, self.all_ub].iter().all(|x| x.is_finite() && *x >= 1.0)
            && self.truthful_lb <= self.truthful_ub
            && self.all_lb <= self.all_ub
            && self.all_lb <= self.truthful_ub;
        if ok {
            Ok(())
        } else {
            Err(Error::InvalidParameter(format!("inconsistent gap constants {self:?}")))
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct GapInterval {
    pub lo: f64,
    pub hi: f64,
}

/// Revelation gap `[truthful_lb / all_ub, truthful_ub / all_lb]`.
///
/// ```
/// use sblab::pricing::{gap_report, GapConstants};
/// let g = gap_report(&GapConstants::REGULAR).unwrap();
/// assert!((g.lo - 1.066).abs() < 1e-3 && (g.hi - 1.859).abs() < 1e-3);
/// ```
pub fn gap_report(c: &GapConstants) -> Result<GapInterval> {
    c.check()?;
    Ok(GapInterval { lo: c.truthful_lb / c.all_ub, hi: c.truthful_ub / c.all_lb })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::curves::{build, DistributionSpec};

    #[test]
    fn pareto_sample_price() {
        let p = build(&DistributionSpec::ShiftedPareto { c: 0.265, a: 0.735 }).unwrap();
        let r = pricing_revenue(&p, 1.0).unwrap();
        assert!((r - 0.6325).abs() < 1e-8, "{r}");
    }

    #[test]
    fn point_mass_limit() {
        let c = build(&DistributionSpec::TruncExp { t: 1e-4 }).unwrap();
        let ratio = c.opt_revenue() / pricing_revenue(&c, 1.0).unwrap();
        assert!((ratio - 1.0).abs() < 1e-3, "{ratio}");
    }

    #[test]
    fn mixture_of_one_is_scalar() {
        let u = build(&DistributionSpec::Uniform { l: 0.0, h: 1.0 }).unwrap();
        let a = pricing_revenue(&u, 0.8).unwrap();
        let b = pricing_revenue_mixture(&u, &[(1.0, 0.8)]).unwrap();
        assert_eq!(a, b);
        assert!(pricing_revenue_mixture(&u, &[(0.5, 0.8)]).is_err());
    }

    #[test]
    fn gaps() {
        let m = gap_report(&GapConstants::MHR).unwrap();
        assert!((m.lo - 1.190).abs() < 1e-3 && (m.hi - 1.467).abs() < 1e-3);
        let one = GapConstants { truthful_lb: 1.5, truthful_ub: 1.5, all_lb: 1.5, all_ub: 1.5 };
        assert_eq!(gap_report(&one).unwrap(), GapInterval { lo: 1.0, hi: 1.0 });
    }
}
