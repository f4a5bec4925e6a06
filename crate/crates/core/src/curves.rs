//! Distribution families and their revenue curves.
//!
//! A value distribution is stored through its revenue curve `R(q) = q v(q)`,
//! where `q` is the probability that a value exceeds `v(q)`. Every family is
//! lowered to a list of pieces of the form
//!
//! ```text
//! R(q) = c0 + c1 q + c2 q^2 - k q ln q
//! ```
//!
//! which covers linear curves (shifted Pareto, r0-lines, pentagons), the
//! uniform distribution (`c2 < 0`) and exponential tails (`k > 0`). All the
//! integrals the mechanism needs have closed forms on such pieces.

use serde::{Deserialize, Serialize};

use crate::{Error, Result};

/// Parametric description of a value distribution.
///
/// Serialized as one flat JSON object tagged by `family`:
///
/// ```
/// use sblab::curves::DistributionSpec;
/// let s: DistributionSpec = serde_json::from_str(r#"{"family":"trunc_exp","T":0.43}"#).unwrap();
/// assert_eq!(s, DistributionSpec::TruncExp { t: 0.43 });
/// assert!(serde_json::from_str::<DistributionSpec>(r#"{"family":"trunc_exp","T":1,"x":2}"#).is_err());
/// ```
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "snake_case", deny_unknown_fields)]
pub enum DistributionSpec {
    /// Survival `e^{-v}` on `[0, T)` with an atom of mass `e^{-T}` at `T`.
    TruncExp {
        #[serde(rename = "T")]
        t: f64,
    },
    /// Survival `c / (v - a)` on `[a + c, ∞)`.
    ShiftedPareto { c: f64, a: f64 },
    Uniform { l: f64, h: f64 },
    /// `R` rises linearly from `r0` at `q = 0` to 1 at `q_m`, then stays at 1.
    #[serde(rename = "r0_line")]
    R0Line { r0: f64, q_m: f64 },
    /// Flat at 1 on `[0, q_m]`, then straight to `(q_k, r_k)`, then straight to `(1, 0)`.
    Pentagon { q_m: f64, q_k: f64, r_k: f64 },
    Triangle { q_m: f64 },
    /// Corner points `[q, R(q)]`, from `q = 0` to `q = 1`.
    PiecewiseLinearConcave { points: Vec<[f64; 2]> },
    /// `shift + Exp(rate)`.
    ShiftedExp { rate: f64, shift: f64 },
}

/// One smooth piece of a revenue curve on `[lo, hi]`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Piece {
    pub lo: f64,
    pub hi: f64,
    pub c0: f64,
    pub c1: f64,
    pub c2: f64,
    pub k: f64,
}

fn xlogx(x: f64) -> f64 {
    if x == 0.0 {
        0.0
    } else {
        x * x.ln()
    }
}

impl Piece {
    pub fn linear(lo: f64, hi: f64, c0: f64, c1: f64) -> Piece {
        Piece { lo, hi, c0, c1, c2: 0.0, k: 0.0 }
    }

    /// Linear piece through `(q1, r1)` and `(q2, r2)`.
    pub fn through(q1: f64, r1: f64, q2: f64, r2: f64) -> Piece {
        let s = (r2 - r1) / (q2 - q1);
        Piece::linear(q1, q2, r1 - s * q1, s)
    }

    pub fn revenue(&self, q: f64) -> f64 {
        self.c0 + q * (self.c1 + self.c2 * q) - self.k * xlogx(q)
    }

    pub fn value(&self, q: f64) -> f64 {
        if q == 0.0 {
            if self.c0 > 0.0 || self.k > 0.0 {
                return f64::INFINITY;
            }
            return self.c1;
        }
        let log = if self.k == 0.0 { 0.0 } else { self.k * q.ln() };
        self.c0 / q + self.c1 + self.c2 * q - log
    }

    pub fn marginal(&self, q: f64) -> f64 {
        let log = if self.k == 0.0 { 0.0 } else { self.k * (q.ln() + 1.0) };
        self.c1 + 2.0 * self.c2 * q - log
    }

    /// `∫_x^y R(t)/t dt` for `lo <= x <= y <= hi`.
    pub fn welfare(&self, x: f64, y: f64) -> f64 {
        if x >= y {
            return 0.0;
        }
        let head = if self.c0 == 0.0 {
            0.0
        } else if x == 0.0 {
            return f64::INFINITY;
        } else {
            self.c0 * (y / x).ln()
        };
        let tail = if self.k == 0.0 { 0.0 } else { self.k * ((xlogx(y) - y) - (xlogx(x) - x)) };
        head + self.c1 * (y - x) + 0.5 * self.c2 * (y * y - x * x) - tail
    }

    /// Bid quantiles in `(lo, hi)` where the marginal utility of value `v`
    /// vanishes: `v = alpha (v(x) - R'(x))`, i.e.
    /// `alpha c2 x^2 + (v - alpha k) x - alpha c0 = 0`.
    pub fn foc_roots(&self, v: f64, alpha: f64) -> Vec<f64> {
        let a = alpha * self.c2;
        let b = v - alpha * self.k;
        let c = -alpha * self.c0;
        let mut roots = Vec::with_capacity(2);
        if a == 0.0 {
            if b != 0.0 {
                roots.push(-c / b);
            }
        } else {
            let disc = b * b - 4.0 * a * c;
            if disc >= 0.0 {
                let sq = disc.sqrt();
                let t = -0.5 * (b + b.signum() * sq);
                if t != 0.0 {
                    roots.push(t / a);
                    roots.push(c / t);
                } else {
                    roots.push(0.0);
                }
            }
        }
        roots.retain(|&x| x > self.lo && x < self.hi && x.is_finite());
        roots
    }

    fn scaled(&self, rho: f64) -> Piece {
        Piece { c0: rho * self.c0, c1: rho * self.c1, c2: rho * self.c2, k: rho * self.k, ..*self }
    }
}

/// A revenue curve on `[0, 1]` with its monopoly point.
#[derive(Debug, Clone, PartialEq)]
pub struct RevenueCurve {
    pieces: Vec<Piece>,
    /// `welfare_above[i] = ∫_{pieces[i].hi}^1 R(t)/t dt`.
    welfare_above: Vec<f64>,
    q_m: f64,
    v_m: f64,
}

impl RevenueCurve {
    /// Assembles a curve from contiguous pieces covering `[0, 1]`.
    pub fn from_pieces(pieces: Vec<Piece>, q_m: f64) -> Result<RevenueCurve> {
        if pieces.is_empty() {
            return Err(Error::InvalidSpec("no pieces".into()));
        }
        if pieces[0].lo != 0.0 || pieces[pieces.len() - 1].hi != 1.0 {
            return Err(Error::InvalidSpec("pieces must cover [0, 1]".into()));
        }
        for w in pieces.windows(2) {
            if w[0].hi != w[1].lo {
                return Err(Error::InvalidSpec("pieces must be contiguous".into()));
            }
        }
        for p in &pieces {
            if !(p.lo < p.hi) {
                return Err(Error::InvalidSpec(format!("empty piece [{}, {}]", p.lo, p.hi)));
            }
            for q in [p.lo, 0.5 * (p.lo + p.hi), p.hi] {
                if !(p.revenue(q) >= -1e-12) {
                    return Err(Error::InvalidSpec(format!("negative revenue at q = {q}")));
                }
            }
        }
        let mut welfare_above = vec![0.0; pieces.len()];
        for i in (0..pieces.len() - 1).rev() {
            let next = &pieces[i + 1];
            welfare_above[i] = welfare_above[i + 1] + next.welfare(next.lo, next.hi);
        }
        let mut curve = RevenueCurve { pieces, welfare_above, q_m, v_m: 0.0 };
        curve.v_m = curve.value(q_m);
        Ok(curve)
    }

    pub fn pieces(&self) -> &[Piece] {
        &self.pieces
    }

    /// Monopoly quantile.
    pub fn q_m(&self) -> f64 {
        self.q_m
    }

    /// Monopoly reserve `v(q_m)`.
    pub fn v_m(&self) -> f64 {
        self.v_m
    }

    /// Optimal (posted price) revenue `R(q_m)`.
    pub fn opt_revenue(&self) -> f64 {
        self.revenue(self.q_m)
    }

    fn piece_index(&self, q: f64) -> usize {
        self.pieces.iter().position(|p| q <= p.hi).unwrap_or(self.pieces.len() - 1)
    }

    fn piece(&self, q: f64) -> &Piece {
        &self.pieces[self.piece_index(q)]
    }

    pub fn revenue(&self, q: f64) -> f64 {
        self.piece(q).revenue(q)
    }

    pub fn value(&self, q: f64) -> f64 {
        self.piece(q).value(q)
    }

    /// Right derivative `R'(q+)`; the left derivative at `q = 1`.
    pub fn marginal(&self, q: f64) -> f64 {
        let i = self.pieces.iter().position(|p| q < p.hi).unwrap_or(self.pieces.len() - 1);
        self.pieces[i].marginal(q)
    }

    /// Subgradient interval `[R'(q+), R'(q-)]`.
    pub fn subgradient(&self, q: f64) -> (f64, f64) {
        (self.marginal(q), self.piece(q).marginal(q))
    }

    /// Interior piece boundaries.
    pub fn breakpoints(&self) -> Vec<f64> {
        self.pieces[..self.pieces.len() - 1].iter().map(|p| p.hi).collect()
    }

    /// `∫_x^1 R(t)/t dt`, the expected sample value on `{s < v(x)}`.
    /// Infinite when `x = 0` and the value distribution has a heavy tail.
    pub fn welfare_below(&self, x: f64) -> f64 {
        let i = self.piece_index(x);
        let p = &self.pieces[i];
        p.welfare(x, p.hi) + self.welfare_above[i]
    }

    /// `E[v] = ∫_0^1 v(q) dq`, or `f64::INFINITY` when it diverges.
    pub fn expected_value(&self) -> f64 {
        self.welfare_below(0.0)
    }

    /// `Pr[v > b] = sup{q : v(q) > b}`.
    pub fn quantile(&self, b: f64) -> f64 {
        self.invert(b, true)
    }

    /// `Pr[v >= b] = sup{q : v(q) >= b}`; differs from [`Self::quantile`] only at atoms.
    pub fn quantile_at_least(&self, b: f64) -> f64 {
        self.invert(b, false)
    }

    fn invert(&self, b: f64, strict: bool) -> f64 {
        // values within a few ulps of b count as equal, so an atom is not lost
        // to rounding noise between pieces
        let slack = 1e-14 * b.abs();
        let above = |x: f64| if strict { x > b + slack } else { x >= b - slack };
        if !above(self.value(0.0)) {
            return 0.0;
        }
        if above(self.value(1.0)) {
            return 1.0;
        }
        // first piece whose right end is no longer above b
        let Some(p) = self.pieces.iter().find(|p| !above(p.value(p.hi))) else {
            return 1.0;
        };
        if !above(p.value(p.lo)) {
            return p.lo;
        }
        let guess = if p.k == 0.0 && p.c2 == 0.0 && b != p.c1 {
            Some(p.c0 / (b - p.c1))
        } else if p.k == 0.0 && p.c0 == 0.0 && p.c2 != 0.0 {
            Some((b - p.c1) / p.c2)
        } else {
            None
        };
        if let Some(q) = guess {
            if q.is_finite() {
                return q.clamp(p.lo, p.hi);
            }
        }
        let (mut lo, mut hi) = (p.lo, p.hi);
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if mid <= lo || mid >= hi || hi - lo <= 4.0 * f64::EPSILON * hi {
                break;
            }
            if above(p.value(mid)) {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        lo
    }

    /// Curve of the values multiplied by `rho`.
    pub fn scale(&self, rho: f64) -> Result<RevenueCurve> {
        if !(rho > 0.0 && rho.is_finite()) {
            return Err(Error::InvalidParameter(format!("scale factor {rho} must be positive")));
        }
        RevenueCurve::from_pieces(self.pieces.iter().map(|p| p.scaled(rho)).collect(), self.q_m)
    }

    /// The same curve scaled so that the optimal revenue is 1.
    pub fn normalized(&self) -> RevenueCurve {
        self.scale(1.0 / self.opt_revenue()).expect("optimal revenue is positive")
    }
}

fn require(ok: bool, msg: impl FnOnce() -> String) -> Result<()> {
    if ok {
        Ok(())
    } else {
        Err(Error::InvalidSpec(msg()))
    }
}

/// Builds the revenue curve of a parametric family. Monopoly points are
/// computed analytically.
pub fn build(spec: &DistributionSpec) -> Result<RevenueCurve> {
    use DistributionSpec::*;
    let finite = |xs: &[f64]| xs.iter().all(|x| x.is_finite());
    match *spec {
        TruncExp { t } => {
            require(finite(&[t]) && t > 0.0, || format!("trunc_exp: T = {t} must be > 0"))?;
            let atom = (-t).exp();
            let q_m = if t < 1.0 { atom } else { (-1.0f64).exp() };
            RevenueCurve::from_pieces(
                vec![
                    Piece::linear(0.0, atom, 0.0, t),
                    Piece { lo: atom, hi: 1.0, c0: 0.0, c1: 0.0, c2: 0.0, k: 1.0 },
                ],
                q_m,
            )
        }
        ShiftedPareto { c, a } => {
            require(finite(&[c, a]) && c > 0.0, || format!("shifted_pareto: c = {c} must be > 0"))?;
            require(a >= 0.0, || format!("shifted_pareto: a = {a} must be >= 0"))?;
            RevenueCurve::from_pieces(vec![Piece::linear(0.0, 1.0, c, a)], 1.0)
        }
        Uniform { l, h } => {
            require(finite(&[l, h]) && 0.0 <= l && l < h, || format!("uniform: need 0 <= l < h, got l = {l}, h = {h}"))?;
            let q_m = (h / (2.0 * (h - l))).min(1.0);
            RevenueCurve::from_pieces(vec![Piece { lo: 0.0, hi: 1.0, c0: 0.0, c1: h, c2: -(h - l), k: 0.0 }], q_m)
        }
        R0Line { r0, q_m } => {
            require(finite(&[r0]) && (0.0..=1.0).contains(&r0), || format!("r0_line: r0 = {r0} must be in [0, 1]"))?;
            require(q_m > 0.0 && q_m <= 1.0, || format!("r0_line: q_m = {q_m} must be in (0, 1]"))?;
            let mut pieces = vec![Piece::linear(0.0, q_m, r0, (1.0 - r0) / q_m)];
            if q_m < 1.0 {
                pieces.push(Piece::linear(q_m, 1.0, 1.0, 0.0));
            }
            RevenueCurve::from_pieces(pieces, q_m)
        }
        Triangle { q_m } => {
            require(q_m > 0.0 && q_m <= 1.0, || format!("triangle: q_m = {q_m} must be in (0, 1]"))?;
            let mut pieces = vec![Piece::linear(0.0, q_m, 0.0, 1.0 / q_m)];
            if q_m < 1.0 {
                pieces.push(Piece::through(q_m, 1.0, 1.0, 0.0));
            }
            RevenueCurve::from_pieces(pieces, q_m)
        }
        Pentagon { q_m, q_k, r_k } => {
            require(q_m > 0.0 && q_m <= q_k && q_k <= 1.0, || {
                format!("pentagon: need 0 < q_m <= q_k <= 1, got q_m = {q_m}, q_k = {q_k}")
            })?;
            let floor = if q_m < 1.0 { (1.0 - q_k) / (1.0 - q_m) } else { 0.0 };
            require(r_k >= floor - 1e-12 && r_k <= 1.0, || {
                format!("pentagon: r_k = {r_k} must be in [{floor}, 1] for concavity")
            })?;
            let mut pieces = vec![Piece::linear(0.0, q_m, 1.0, 0.0)];
            if q_k > q_m {
                pieces.push(Piece::through(q_m, 1.0, q_k, r_k));
            }
            if q_k < 1.0 {
                let start = if q_k > q_m { r_k } else { 1.0 };
                pieces.push(Piece::through(q_k, start, 1.0, 0.0));
            }
            RevenueCurve::from_pieces(pieces, q_m)
        }
        PiecewiseLinearConcave { ref points } => {
            require(points.len() >= 2, || "piecewise_linear_concave: need at least two points".into())?;
            require(points.iter().all(|p| finite(p)), || "piecewise_linear_concave: non-finite point".into())?;
            require(points[0][0] == 0.0 && points[points.len() - 1][0] == 1.0, || {
                "piecewise_linear_concave: quantiles must start at 0 and end at 1".into()
            })?;
            require(points.windows(2).all(|w| w[0][0] < w[1][0]), || {
                "piecewise_linear_concave: quantiles must be strictly increasing".into()
            })?;
            require(points.iter().all(|p| p[1] >= 0.0), || "piecewise_linear_concave: revenues must be >= 0".into())?;
            let pieces: Vec<Piece> =
                points.windows(2).map(|w| Piece::through(w[0][0], w[0][1], w[1][0], w[1][1])).collect();
            for w in pieces.windows(2) {
                let tol = 1e-9 * (1.0 + w[0].c1.abs());
                require(w[1].c1 <= w[0].c1 + tol, || {
                    format!("piecewise_linear_concave: R is not concave at q = {}", w[0].hi)
                })?;
            }
            let best = points.iter().map(|p| p[1]).fold(f64::NEG_INFINITY, f64::max);
            require(best > 0.0, || "piecewise_linear_concave: revenue is identically zero".into())?;
            let q_m = points.iter().find(|p| p[1] == best).map(|p| p[0]).unwrap_or(1.0);
            RevenueCurve::from_pieces(pieces, q_m)
        }
        ShiftedExp { rate, shift } => {
            require(finite(&[rate, shift]) && rate > 0.0, || format!("shifted_exp: rate = {rate} must be > 0"))?;
            require(shift >= 0.0, || format!("shifted_exp: shift = {shift} must be >= 0"))?;
            let q_m = (shift * rate - 1.0).exp().min(1.0);
            RevenueCurve::from_pieces(vec![Piece { lo: 0.0, hi: 1.0, c0: 0.0, c1: shift, c2: 0.0, k: 1.0 / rate }], q_m)
        }
    }
}

/// Distribution class for [`validate`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Class {
    Regular,
    Mhr,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Validation {
    pub ok: bool,
    /// Grid points (quantiles for `regular`, values for `mhr`) where the check failed.
    pub violations: Vec<f64>,
}

const VALIDATION_NODES: usize = 2000;

/// Grid check of regularity (`R` concave) or MHR (log-survival concave in value).
pub fn validate(curve: &RevenueCurve, class: Class) -> Validation {
    let n = VALIDATION_NODES;
    let mut violations = Vec::new();
    match class {
        Class::Regular => {
            let h = 1.0 / n as f64;
            for i in 1..n {
                let q = i as f64 * h;
                let mid = curve.revenue(q);
                let chord = 0.5 * (curve.revenue(q - h) + curve.revenue(q + h));
                if mid < chord - 1e-10 * (1.0 + mid.abs()) {
                    violations.push(q);
                }
            }
        }
        Class::Mhr => {
            let lo = curve.value(1.0);
            let top = curve.value(0.0);
            let hi = if top.is_finite() { top } else { curve.value(1e-9) };
            let h = (hi - lo) / n as f64;
            let log_survival = |v: f64| curve.quantile(v).ln();
            for i in 1..n {
                let v = lo + i as f64 * h;
                let (a, b, c) = (log_survival(v - h), log_survival(v), log_survival(v + h));
                if !(a.is_finite() && b.is_finite() && c.is_finite()) {
                    continue;
                }
                if b < 0.5 * (a + c) - 1e-9 * (1.0 + b.abs()) {
                    violations.push(v);
                }
            }
        }
    }
    Validation { ok: violations.is_empty(), violations }
}
