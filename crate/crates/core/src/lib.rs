//! Single-item, single-agent, single-sample mechanism analysis.
//!
//! The agent bids `b` against a hidden sample `s` drawn from the same value
//! distribution, wins iff `b >= s` and always pays `alpha * min(b, s)`.
//! Everything here works in quantile space: a distribution is its revenue
//! curve `R(q) = q * v(q)` on `[0, 1]`.
//!
//! ```
//! use sblab::curves::{build, DistributionSpec};
//! use sblab::sample_bid::evaluate;
//!
//! let curve = build(&DistributionSpec::TruncExp { t: 0.43 }).unwrap();
//! let eval = evaluate(&curve, 0.824).unwrap();
//! assert!((eval.opt_revenue - 0.2797).abs() < 1e-3);
//! assert!((eval.revenue - 0.2159).abs() < 1e-3);
//! ```
//!
//! Modules:
//!
//! * [`numerics`]: root finding, quadrature, grids.
//! * [`curves`]: distribution families and their revenue curves.
//! * [`sample_bid`]: utilities, best responses, mechanism revenue.
//! * [`cert_mhr`], [`cert_regular`]: grid certification of revenue lower bounds.
//! * [`lower_bound`]: the bound for arbitrary mechanisms.
//! * [`pricing`]: sample-based pricing and the revelation-gap report.

mod error;

pub mod cert_mhr;
pub mod cert_regular;
pub mod curves;
pub mod lower_bound;
pub mod numerics;
pub mod pricing;
pub mod sample_bid;

pub use error::{Error, Result};
