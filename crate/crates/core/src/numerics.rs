//! Root finding, adaptive quadrature and deterministic grids.
//!
//! Everything is pure. Parallel reductions enumerate cells in a fixed order
//! and break ties toward the lowest index, so results do not depend on the
//! number of threads.

use rayon::prelude::*;

use crate::{Error, Result};

pub const ROOT_TOL: f64 = 1e-12;
pub const INTEGRATION_TOL: f64 = 1e-9;
pub const UTILITY_TOL: f64 = 1e-9;

/// A sign-change interval for [`find_root`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Bracket {
    pub lo: f64,
    pub hi: f64,
    pub f_lo: f64,
    pub f_hi: f64,
}

impl Bracket {
    /// Evaluates `f` at both ends and checks for a sign change.
    pub fn new(f: impl Fn(f64) -> f64, lo: f64, hi: f64) -> Result<Bracket> {
        let b = Bracket { lo, hi, f_lo: f(lo), f_hi: f(hi) };
        b.check()?;
        Ok(b)
    }

    fn check(&self) -> Result<()> {
        if !(self.lo < self.hi) {
            return Err(Error::InvalidParameter(format!(
                "bracket [{}, {}] is empty",
                self.lo, self.hi
            )));
        }
        let opposite = (self.f_lo <= 0.0 && self.f_hi >= 0.0) || (self.f_lo >= 0.0 && self.f_hi <= 0.0);
        if !opposite {
            return Err(Error::NoBracket { lo: self.lo, hi: self.hi, f_lo: self.f_lo, f_hi: self.f_hi });
        }
        Ok(())
    }
}

/// Bisection on a sign change.
///
/// Returns `x` with `|f(x)| <= tol` or a final bracket no wider than `tol`.
///
/// ```
/// use sblab::numerics::{find_root, Bracket};
/// let f = |x: f64| x * x - 2.0;
/// let r = find_root(f, Bracket::new(f, 1.0, 2.0).unwrap(), 1e-12).unwrap();
/// assert!((r - 2f64.sqrt()).abs() < 1e-12);
/// ```
pub fn find_root(f: impl Fn(f64) -> f64, bracket: Bracket, tol: f64) -> Result<f64> {
    if !(tol > 0.0) {
        return Err(Error::InvalidParameter(format!("tolerance {tol} must be positive")));
    }
    bracket.check()?;
    let Bracket { mut lo, mut hi, f_lo, f_hi } = bracket;
    if f_lo == 0.0 {
        return Ok(lo);
    }
    if f_hi == 0.0 {
        return Ok(hi);
    }
    let lo_negative = f_lo < 0.0;
    loop {
        let mid = 0.5 * (lo + hi);
        let fm = f(mid);
        if fm.abs() <= tol || hi - lo <= tol || mid <= lo || mid >= hi {
            return Ok(mid);
        }
        if (fm < 0.0) == lo_negative {
            lo = mid;
        } else {
            hi = mid;
        }
    }
}

/// Boundary of a monotone predicate: `pred(lo)` holds, `pred(hi)` does not.
/// Returns the last point known to satisfy `pred` after bisecting to `tol`.
pub fn last_true(pred: impl Fn(f64) -> bool, mut lo: f64, mut hi: f64, tol: f64) -> f64 {
    while hi - lo > tol {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if pred(mid) {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    lo
}

/// Adaptive Simpson settings.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Quadrature {
    pub tol: f64,
    pub max_depth: u32,
    /// Inset applied to an endpoint whose integrand value is not finite.
    pub edge: f64,
}

impl Default for Quadrature {
    fn default() -> Self {
        Quadrature { tol: INTEGRATION_TOL, max_depth: 40, edge: 1e-12 }
    }
}

const MIN_DEPTH: u32 = 4;

impl Quadrature {
    pub fn integrate(&self, f: impl Fn(f64) -> f64, a: f64, b: f64) -> Result<f64> {
        if !(a <= b) {
            return Err(Error::InvalidParameter(format!("integration bounds {a} > {b}")));
        }
        if a == b {
            return Ok(0.0);
        }
        let (a, fa) = self.endpoint(&f, a, (b - a).min(self.edge))?;
        let (b, fb) = self.endpoint(&f, b, -(b - a).min(self.edge))?;
        let m = 0.5 * (a + b);
        let fm = finite(&f, m)?;
        let whole = (b - a) / 6.0 * (fa + 4.0 * fm + fb);
        self.step(&f, [a, m, b], [fa, fm, fb], whole, self.tol, 0)
    }

    fn endpoint(&self, f: &impl Fn(f64) -> f64, x: f64, inset: f64) -> Result<(f64, f64)> {
        let fx = f(x);
        if fx.is_finite() {
            return Ok((x, fx));
        }
        let y = x + inset;
        Ok((y, finite(f, y)?))
    }

    fn step(
        &self,
        f: &impl Fn(f64) -> f64,
        [a, m, b]: [f64; 3],
        [fa, fm, fb]: [f64; 3],
        whole: f64,
        tol: f64,
        depth: u32,
    ) -> Result<f64> {
        let lm = 0.5 * (a + m);
        let rm = 0.5 * (m + b);
        let flm = finite(f, lm)?;
        let frm = finite(f, rm)?;
        let left = (m - a) / 6.0 * (fa + 4.0 * flm + fm);
        let right = (b - m) / 6.0 * (fm + 4.0 * frm + fb);
        let delta = left + right - whole;
        if depth >= self.max_depth || (depth >= MIN_DEPTH && delta.abs() <= 15.0 * tol) {
            return Ok(left + right + delta / 15.0);
        }
        let l = self.step(f, [a, lm, m], [fa, flm, fm], left, 0.5 * tol, depth + 1)?;
        let r = self.step(f, [m, rm, b], [fm, frm, fb], right, 0.5 * tol, depth + 1)?;
        Ok(l + r)
    }
}

fn finite(f: &impl Fn(f64) -> f64, x: f64) -> Result<f64> {
    let y = f(x);
    if y.is_finite() {
        Ok(y)
    } else {
        Err(Error::NonFiniteIntegrand { x })
    }
}

/// `∫_a^b f` with the default depth cap and endpoint inset.
///
/// ```
/// let v = sblab::numerics::integrate(|v: f64| (-v).exp(), 0.0, 0.43, 1e-9).unwrap();
/// assert!((v - (1.0 - (-0.43f64).exp())).abs() < 1e-9);
/// ```
pub fn integrate(f: impl Fn(f64) -> f64, a: f64, b: f64, tol: f64) -> Result<f64> {
    Quadrature { tol, ..Quadrature::default() }.integrate(f, a, b)
}

/// Integrates over `[a, b]` split at the given interior points.
pub fn integrate_split(
    f: impl Fn(f64) -> f64,
    a: f64,
    b: f64,
    splits: &[f64],
    quad: &Quadrature,
) -> Result<f64> {
    let mut cuts: Vec<f64> = splits.iter().copied().filter(|&s| s > a && s < b).collect();
    cuts.sort_by(f64::total_cmp);
    cuts.dedup();
    let mut total = 0.0;
    let mut lo = a;
    for hi in cuts.into_iter().chain(std::iter::once(b)) {
        total += quad.integrate(&f, lo, hi)?;
        lo = hi;
    }
    Ok(total)
}

/// Named grid resolutions shared by the certification routines.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum GridScale {
    Coarse,
    #[default]
    Default,
    Fine,
}

/// `steps + 1` equally spaced nodes from `lo` to `hi`, both included.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Grid1D {
    pub lo: f64,
    pub hi: f64,
    pub steps: usize,
}

impl Grid1D {
    pub fn new(lo: f64, hi: f64, steps: usize) -> Result<Grid1D> {
        let g = Grid1D { lo, hi, steps };
        g.check()?;
        Ok(g)
    }

    /// Grid with spacing at most `step`.
    pub fn with_step(lo: f64, hi: f64, step: f64) -> Result<Grid1D> {
        if !(step > 0.0) {
            return Err(Error::InvalidGrid(format!("step {step} must be positive")));
        }
        let steps = (((hi - lo) / step) - 1e-9).ceil().max(1.0) as usize;
        Grid1D::new(lo, hi, steps)
    }

    fn check(&self) -> Result<()> {
        if self.steps == 0 {
            return Err(Error::EmptyGrid);
        }
        if !(self.lo.is_finite() && self.hi.is_finite() && self.lo <= self.hi) {
            return Err(Error::InvalidGrid(format!("[{}, {}]", self.lo, self.hi)));
        }
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.steps + 1
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn node(&self, i: usize) -> f64 {
        if i >= self.steps {
            self.hi
        } else {
            self.lo + (self.hi - self.lo) * (i as f64 / self.steps as f64)
        }
    }

    pub fn nodes(&self) -> impl Iterator<Item = f64> + '_ {
        (0..self.len()).map(|i| self.node(i))
    }

    pub fn step(&self) -> f64 {
        (self.hi - self.lo) / self.steps as f64
    }
}

/// Minimum of `f(i)` over `0..n`, evaluated in parallel, lowest index wins ties.
/// NaN values are ignored.
pub fn argmin_indexed<T: Send>(
    n: usize,
    f: impl Fn(usize) -> (f64, T) + Sync,
) -> Option<(usize, f64, T)> {
    (0..n)
        .into_par_iter()
        .map(|i| {
            let (v, t) = f(i);
            (i, v, t)
        })
        .filter(|(_, v, _)| !v.is_nan())
        .reduce_with(|a, b| if b.1 < a.1 || (b.1 == a.1 && b.0 < a.0) { b } else { a })
}

#[derive(Debug, Clone, PartialEq)]
pub struct GridMin {
    pub value: f64,
    pub index: Vec<usize>,
    pub point: Vec<f64>,
}

/// Exact minimum of `g` over the node product of `grids`.
///
/// ```
/// use sblab::numerics::{grid_min, Grid1D};
/// let g = Grid1D::new(0.0, 1.0, 10).unwrap();
/// let m = grid_min(|p| p[0], &[g]).unwrap();
/// assert_eq!((m.value, m.index[0]), (0.0, 0));
/// ```
pub fn grid_min(g: impl Fn(&[f64]) -> f64 + Sync, grids: &[Grid1D]) -> Result<GridMin> {
    if grids.is_empty() {
        return Err(Error::EmptyGrid);
    }
    for grid in grids {
        grid.check()?;
    }
    let total: usize = grids.iter().map(Grid1D::len).product();
    let unflatten = |mut flat: usize| {
        let mut index = vec![0; grids.len()];
        for (d, grid) in grids.iter().enumerate().rev() {
            index[d] = flat % grid.len();
            flat /= grid.len();
        }
        index
    };
    let point_of = |index: &[usize]| -> Vec<f64> {
        index.iter().zip(grids).map(|(&i, grid)| grid.node(i)).collect()
    };
    let (flat, value, ()) = argmin_indexed(total, |flat| {
        let p = point_of(&unflatten(flat));
        (g(&p), ())
    })
    .ok_or(Error::EmptyGrid)?;
    let index = unflatten(flat);
    let point = point_of(&index);
    Ok(GridMin { value, index, point })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn linear_root_is_exact() {
        let f = |x: f64| x - 1.0;
        let r = find_root(f, Bracket::new(f, 0.0, 2.0).unwrap(), 1e-12).unwrap();
        assert_eq!(r, 1.0);
    }

    #[test]
    fn no_sign_change_is_rejected() {
        let f = |x: f64| x * x + 1.0;
        assert!(matches!(Bracket::new(f, -1.0, 1.0), Err(Error::NoBracket { .. })));
    }

    #[test]
    fn root_postcondition() {
        let f = |x: f64| x.exp() - 3.0;
        let tol = 1e-10;
        let r = find_root(f, Bracket::new(f, 0.0, 2.0).unwrap(), tol).unwrap();
        assert!(f(r).abs() <= tol || (r - 3f64.ln()).abs() <= tol);
    }

    #[test]
    fn simple_integrals() {
        assert!((integrate(|q| q, 0.0, 1.0, 1e-9).unwrap() - 0.5).abs() < 1e-12);
        let r = integrate(|q| 0.735 * q + 0.265, 0.0, 1.0, 1e-9).unwrap();
        assert!((r - 0.6325).abs() < 1e-12);
    }

    #[test]
    fn log_singularity_at_endpoint() {
        // ∫_0^1 -ln q dq = 1, integrand infinite at 0
        let r = integrate(|q: f64| -q.ln(), 0.0, 1.0, 1e-9).unwrap();
        assert!((r - 1.0).abs() < 1e-8, "{r}");
    }

    #[test]
    fn interior_nan_is_an_error() {
        let r = integrate(|q: f64| if (q - 0.5).abs() < 1e-3 { f64::NAN } else { q }, 0.0, 1.0, 1e-9);
        assert!(matches!(r, Err(Error::NonFiniteIntegrand { .. })));
    }

    #[test]
    fn grid_nodes() {
        let g = Grid1D::new(0.62, 0.999, 1000).unwrap();
        assert_eq!(g.len(), 1001);
        assert_eq!(g.node(0), 0.62);
        assert_eq!(g.node(1000), 0.999);
        assert!(Grid1D::new(0.0, 1.0, 0).is_err());
        let s = Grid1D::with_step(0.0, 1.0, 0.1).unwrap();
        assert_eq!(s.steps, 10);
    }

    #[test]
    fn grid_min_branch_a_shape() {
        let g = Grid1D::new(0.62, 0.999, 1000).unwrap();
        let m = grid_min(|p| -0.7 * p[0].ln() * p[0] / (1.0 - p[0]), &[g]).unwrap();
        assert_eq!(m.index, vec![0]);
        assert!((m.value - 0.546).abs() < 1e-3);
    }

    #[test]
    fn grid_min_constant_2d_picks_first_cell() {
        let g = Grid1D::new(0.0, 1.0, 4).unwrap();
        let m = grid_min(|_| 1.0, &[g, g]).unwrap();
        assert_eq!((m.value, m.index.clone()), (1.0, vec![0, 0]));
        assert!(grid_min(|_| 1.0, &[]).is_err());
    }
}
