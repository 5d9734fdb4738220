//! Two-sided stable matching for categorized patient/doctor consultancy markets.
//!
//! The crate is organised bottom-up:
//!
//! - [`market_model`]: agents, preference lists, per-category markets, validation,
//!   random generation and the JSON document format.
//! - [`mechanisms`]: the randomized baseline allocator (`ramhecs`) and the
//!   proposer-optimal deferred acceptance allocator (`tomhecs`).
//! - [`stability_oracle`]: blocking pairs, stability and perfection checks, plus
//!   factorial brute-force oracles for optimality and truthfulness audits.
//! - [`metrics`]: satisfaction level (sum of rank gaps) and number of first-choice
//!   allocations.
//! - [`analytics`]: preference perturbation and Monte Carlo estimators for the
//!   stylized expectation models.
//! - [`harness`]: seeded experiment grid with CSV/JSON output.
//!
//! Every randomized entry point takes an explicit `u64` seed and is reproducible
//! bit-for-bit; see [`rng`] for how independent streams are derived.

pub mod analytics;
pub mod fixtures;
pub mod harness;
pub mod market_model;
pub mod mechanisms;
pub mod metrics;
pub mod rng;
pub mod stability_oracle;

pub use market_model::{
    Agent, AgentId, CategoryMarket, ListLength, Market, PreferenceList, PreferenceMode, Side,
};
pub use mechanisms::{CategoryMatching, Matching, Mechanism, Pair, TraceStats};
