use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use sblab::curves::RevenueCurve;
use sblab::sample_bid::{best_response, best_response_brute};

#[derive(Debug, Serialize)]
pub struct OracleReport {
    pub alpha: f64,
    pub seed: u64,
    pub instances: usize,
    pub n_bids: usize,
    /// Largest amount by which brute force beat the solver.
    pub max_gap: f64,
    pub worst_value: f64,
    pub pass: bool,
}

/// Values drawn uniformly from `[0, 3 v_m]` (or `[0, 3]` if `v_m` is not finite).
pub fn compare(curve: &RevenueCurve, alpha: f64, seed: u64, instances: usize, n_bids: usize) -> OracleReport {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let scale = if curve.v_m().is_finite() { 3.0 * curve.v_m() } else { 3.0 };
    let (mut max_gap, mut worst_value) = (f64::NEG_INFINITY, 0.0);
    for _ in 0..instances {
        let v = rng.gen_range(0.0..scale);
        let gap = best_response_brute(v, curve, alpha, n_bids).utility - best_response(v, curve, alpha).utility;
        if gap > max_gap {
            (max_gap, worst_value) = (gap, v);
        }
    }
    let max_gap = max_gap.max(0.0);
    OracleReport { alpha, seed, instances, n_bids, max_gap, worst_value, pass: max_gap <= 1e-6 }
}
