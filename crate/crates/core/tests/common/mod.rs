#![allow(dead_code)]

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use sblab::curves::{build, DistributionSpec, Piece, RevenueCurve};

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn spec(family: DistributionSpec) -> RevenueCurve {
    build(&family).unwrap()
}

/// Corner points of a random concave, non-negative revenue curve: the lower
/// envelope of a few non-negative lines, sampled at random knots.
pub fn concave_points(rng: &mut impl Rng) -> Vec<[f64; 2]> {
    let n_lines = rng.gen_range(2..5);
    let lines: Vec<(f64, f64)> = (0..n_lines)
        .map(|i| {
            // keep R(0) = 0 about half the time so the value support is bounded
            let a = if i == 0 && rng.gen_bool(0.5) { 0.0 } else { rng.gen_range(0.0..1.0) };
            let b = rng.gen_range(-a..3.0);
            (a, b)
        })
        .collect();
    let mut knots: Vec<f64> = (0..rng.gen_range(2..7)).map(|_| rng.gen_range(0.02..0.98)).collect();
    knots.push(0.0);
    knots.push(1.0);
    knots.sort_by(f64::total_cmp);
    knots.dedup_by(|a, b| (*a - *b).abs() < 1e-3);
    let r = |q: f64| lines.iter().map(|&(a, b)| a + b * q).fold(f64::INFINITY, f64::min);
    knots.iter().map(|&q| [q, r(q)]).collect()
}

pub fn random_concave(rng: &mut impl Rng) -> RevenueCurve {
    loop {
        let points = concave_points(rng);
        if points.iter().all(|p| p[1] < 1e-3) {
            continue;
        }
        if let Ok(c) = build(&DistributionSpec::PiecewiseLinearConcave { points }) {
            return c;
        }
    }
}

/// Random normalized regular curve: concave families mixed with the named ones.
pub fn random_regular(rng: &mut impl Rng) -> RevenueCurve {
    let c = match rng.gen_range(0..6) {
        0 => spec(DistributionSpec::Uniform { l: rng.gen_range(0.0..1.0), h: rng.gen_range(1.0..3.0) }),
        1 => spec(DistributionSpec::R0Line { r0: rng.gen_range(0.0..1.0), q_m: rng.gen_range(0.05..1.0) }),
        2 => {
            let q_m: f64 = rng.gen_range(0.05..1.0);
            let q_k = rng.gen_range(q_m..=1.0);
            let floor = if q_m < 1.0 { (1.0 - q_k) / (1.0 - q_m) } else { 0.0 };
            spec(DistributionSpec::Pentagon { q_m, q_k, r_k: rng.gen_range(floor..=1.0) })
        }
        3 => spec(DistributionSpec::Triangle { q_m: rng.gen_range(0.05..1.0) }),
        _ => random_concave(rng),
    };
    c.normalized()
}

/// Random MHR curve, normalized.
pub fn random_mhr(rng: &mut impl Rng) -> RevenueCurve {
    let c = match rng.gen_range(0..3) {
        0 => spec(DistributionSpec::TruncExp { t: rng.gen_range(0.01..5.0) }),
        1 => spec(DistributionSpec::ShiftedExp { rate: rng.gen_range(0.2..5.0), shift: rng.gen_range(0.0..3.0) }),
        _ => spec(DistributionSpec::Uniform { l: rng.gen_range(0.0..1.0), h: rng.gen_range(1.0..3.0) }),
    };
    c.normalized()
}

/// Revenue curve through corner points without any concavity requirement.
pub fn polyline(points: &[[f64; 2]]) -> RevenueCurve {
    let pieces = points.windows(2).map(|w| Piece::through(w[0][0], w[0][1], w[1][0], w[1][1])).collect();
    let q_m = points.iter().fold(points[0], |best, p| if p[1] > best[1] { *p } else { best })[0];
    RevenueCurve::from_pieces(pieces, q_m).unwrap()
}
