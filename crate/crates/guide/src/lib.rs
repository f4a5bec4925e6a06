//! The guide's chapters, compiled so that `cargo test` runs every snippet.

#[doc = include_str!("../../../book/src/introduction.md")]
pub mod introduction {}
#[doc = include_str!("../../../book/src/curves.md")]
pub mod curves {}
#[doc = include_str!("../../../book/src/best-response.md")]
pub mod best_response {}
#[doc = include_str!("../../../book/src/certification.md")]
pub mod certification {}
#[doc = include_str!("../../../book/src/lower-bound.md")]
pub mod lower_bound {}
#[doc = include_str!("../../../book/src/cli.md")]
pub mod cli {}
