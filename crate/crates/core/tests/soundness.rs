//! Every certified lower bound against direct evaluation on sampled curves.

mod common;

use common::{polyline, random_mhr, random_regular, rng, spec};
use rand::Rng;
use sblab::cert_mhr::{self, cell_revenue_lb, welfare_lb, MhrGrid, MHR_ALPHA, MHR_TARGET};
use sblab::cert_regular::{
    band_parameters, critical_value_ub, payment_lb_low, payment_lb_vm_over_alpha, prefers_v_over_alpha,
    quantile_lb, r0_line_box, r0_line_point, revenue_monotone_check, SmallColumn, SmallGrid, Q_SPLIT,
};
use sblab::curves::{DistributionSpec, RevenueCurve};
use sblab::numerics::{Grid1D, GridScale};
use sblab::sample_bid::{best_response, expected_payment, mechanism_revenue, Bid};

const ALPHA: f64 = 0.7;

/// Normalized regular curves with monopoly quantile in the small regime.
fn small_regime_curves(n: usize, seed: u64) -> Vec<RevenueCurve> {
    let mut r = rng(seed);
    let mut out = Vec::new();
    while out.len() < n {
        let c = random_regular(&mut r);
        if c.q_m() <= Q_SPLIT && c.q_m() > 0.02 {
            out.push(c);
        }
    }
    out
}

#[test]
fn payment_bounds_are_sound() {
    for c in small_regime_curves(50, 1) {
        let (q_m, v_m) = (c.q_m(), c.v_m());
        for i in 0..=20 {
            let b = v_m * i as f64 / 20.0;
            let lb = payment_lb_low(b, q_m, ALPHA);
            assert!(lb <= expected_payment(Bid::Finite(b), &c, ALPHA) + 1e-9, "q_m {q_m}, b {b}");
        }
        let (q_pp, w) = band_parameters(&c, ALPHA);
        let lb = payment_lb_vm_over_alpha(q_m, q_pp, w, ALPHA);
        let p = expected_payment(Bid::Finite(v_m / ALPHA), &c, ALPHA);
        assert!(lb <= p + 1e-9, "q_m {q_m}: {lb} > {p}");
    }
}

#[test]
fn quantile_bound_is_sound() {
    for c in small_regime_curves(50, 2) {
        let (q_m, v_m) = (c.q_m(), c.v_m());
        let (q_pp, _) = band_parameters(&c, ALPHA);
        for i in 0..=40 {
            let v = v_m / ALPHA * i as f64 / 40.0;
            let lb = quantile_lb(v, q_m, q_pp, ALPHA).unwrap();
            assert!(lb <= c.quantile_at_least(v) + 1e-9, "q_m {q_m}, v {v}");
        }
    }
}

#[test]
fn critical_value_bound_is_sound() {
    let q_hat = |q_m: f64| Grid1D::new(q_m, 1.0, 400).unwrap();
    for c in small_regime_curves(50, 3) {
        let (q_m, v_m) = (c.q_m(), c.v_m());
        let (q_pp, w) = band_parameters(&c, ALPHA);
        let crit = critical_value_ub(q_m, q_pp, w, &q_hat(q_m), ALPHA);
        if crit.unbounded {
            continue;
        }
        // above the bound the bid reaches the reserve, and from v_m on it
        // reaches v_m/alpha
        let v = crit.v * (1.0 + 1e-6);
        let bid = best_response(v, &c, ALPHA).bid.amount();
        assert!(bid >= v_m * (1.0 - 1e-9), "q_m {q_m}: value {v} bids {bid}");
        let v = v.max(v_m);
        let bid = best_response(v, &c, ALPHA).bid.amount();
        assert!(bid >= v_m / ALPHA * (1.0 - 1e-9), "q_m {q_m}: value {v} bids {bid}");
    }
}

#[test]
fn small_regime_cell_bound_is_sound() {
    let grid = SmallGrid { q_m_step: 0.02, q_pp_steps: 1, w_nodes: 1, q_hat_nodes: 200, q_nodes: 200, pentagon_nodes: 12 };
    let mut worst = f64::INFINITY;
    for c in small_regime_curves(50, 4) {
        let col = SmallColumn::new(c.q_m(), &grid, ALPHA).unwrap();
        let (q_pp, w) = band_parameters(&c, ALPHA);
        let bound = col.cell(q_pp, w, None).cert_revenue_lb;
        let revenue = mechanism_revenue(&c, ALPHA).unwrap();
        worst = worst.min(revenue - bound);
        assert!(bound <= revenue + 1e-6, "q_m {}: bound {bound} > revenue {revenue}", c.q_m());
    }
    assert!(worst.is_finite());
}

#[test]
fn r0_line_points_match_the_engine() {
    let mut r = rng(5);
    for _ in 0..50 {
        let q_m = r.gen_range(Q_SPLIT..=1.0);
        let r0 = r.gen_range(0.0..1.0);
        let Some(tau) = r0_line_point(q_m, r0, ALPHA) else { continue };
        let c = spec(DistributionSpec::R0Line { r0, q_m });
        // tau = p(v*) q* undercounts the revenue of types above q*
        let revenue = mechanism_revenue(&c, ALPHA).unwrap();
        assert!(tau <= revenue + 1e-6, "q_m {q_m}, r0 {r0}: {tau} > {revenue}");
    }
}

#[test]
fn boxes_are_conservative() {
    let mut r = rng(6);
    for _ in 0..300 {
        let q_lo: f64 = r.gen_range(Q_SPLIT..1.0);
        let q_hi = (q_lo + r.gen_range(0.0..0.02)).min(1.0);
        let r_lo: f64 = r.gen_range(0.0..1.0);
        let r_hi = (r_lo + r.gen_range(0.0..0.02)).min(1.0);
        let b = r0_line_box(q_lo, q_hi, r_lo, r_hi, ALPHA);
        for _ in 0..10 {
            let q = r.gen_range(q_lo..=q_hi);
            let r0 = r.gen_range(r_lo..=r_hi);
            if let Some(t) = r0_line_point(q, r0, ALPHA) {
                assert!(b.feasible && b.cert_revenue_lb <= t + 1e-12);
            }
        }
    }
}

#[test]
fn mhr_cell_bound_is_sound() {
    let mut r = rng(7);
    for _ in 0..50 {
        let c = random_mhr(&mut r);
        let (q_m, w) = (c.q_m(), c.expected_value());
        assert!(welfare_lb(q_m) <= w + 1e-9, "q_m {q_m}, E {w}");
        let revenue = mechanism_revenue(&c, MHR_ALPHA).unwrap();
        assert!(cell_revenue_lb(q_m, w, MHR_ALPHA) <= revenue + 1e-6, "q_m {q_m}, E {w}");
    }
}

#[test]
fn mhr_revenue_is_the_threshold_rule() {
    let mut r = rng(8);
    for _ in 0..50 {
        let c = random_mhr(&mut r);
        let price = MHR_ALPHA * c.expected_value();
        let expected = price * c.quantile_at_least(price);
        let revenue = mechanism_revenue(&c, MHR_ALPHA).unwrap();
        assert!((revenue - expected).abs() <= 1e-6, "{revenue} vs {expected}");
    }
}

#[test]
fn mhr_target_has_a_counterexample() {
    // 1 + Exp(1.93556): optimal price 1 sells surely, the threshold 0.824 E[v]
    // loses too many types
    let c = spec(DistributionSpec::ShiftedExp { rate: 1.93556, shift: 1.0 });
    assert_eq!(c.opt_revenue(), 1.0);
    let revenue = mechanism_revenue(&c, MHR_ALPHA).unwrap();
    assert!((revenue - 0.770724).abs() < 1e-5, "{revenue}");
    assert!(revenue < MHR_TARGET);
}

#[test]
fn mhr_refinement_never_raises_the_minimum() {
    let coarse = cert_mhr::verify_mhr(MHR_ALPHA, &MhrGrid::preset(GridScale::Coarse), false).unwrap();
    let default = cert_mhr::verify_mhr(MHR_ALPHA, &MhrGrid::preset(GridScale::Default), false).unwrap();
    assert!(default.min_bound <= coarse.min_bound + 1e-12);
    assert!(default.tail_monotone);
}

#[test]
fn preference_for_v_over_alpha() {
    let mut r = rng(9);
    for _ in 0..50 {
        let c = random_regular(&mut r);
        if c.q_m() == 0.0 {
            continue;
        }
        let v = c.v_m() * r.gen_range(1.0..1.0 / ALPHA);
        assert!(prefers_v_over_alpha(&c, v, ALPHA, 100), "q_m {} v {v}", c.q_m());
    }
}

#[test]
fn revenue_monotone_transfer() {
    let tri = spec(DistributionSpec::Triangle { q_m: 0.5 });
    assert!(revenue_monotone_check(&tri, &tri, 0.5, 1.0, ALPHA).unwrap());
    let boosted = polyline(&[[0.0, 0.5], [0.5, 1.0], [1.0, 0.0]]);
    for i in 1..=20 {
        let v = 4.0 * i as f64 / 20.0;
        assert!(revenue_monotone_check(&tri, &boosted, 0.5, v, ALPHA).unwrap(), "v {v}");
    }
    assert!(revenue_monotone_check(&boosted, &tri, 0.5, 1.0, ALPHA).is_err());

    // random admissible pairs: raise the curve left of a corner, keeping v non-increasing
    let mut r = rng(10);
    let mut checked = 0;
    while checked < 50 {
        let c = random_regular(&mut r);
        let q_dag = r.gen_range(0.1..0.9);
        let r_dag = c.revenue(q_dag);
        let lift = r.gen_range(0.0..=1.0) * r_dag;
        let pts = [[0.0, c.revenue(0.0).max(lift)], [q_dag, r_dag], [1.0, c.revenue(1.0)]];
        let raised = polyline(&pts);
        // the raised curve must dominate on [0, q_dag]
        if (0..=50).any(|i| {
            let q = q_dag * i as f64 / 50.0;
            c.revenue(q) > raised.revenue(q) + 1e-12
        }) {
            continue;
        }
        let v = c.value(q_dag) * r.gen_range(0.5..2.0);
        assert!(revenue_monotone_check(&c, &raised, q_dag, v, ALPHA).unwrap());
        checked += 1;
    }
}
