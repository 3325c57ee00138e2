//! Informed-flow analytics for binary prediction markets.
//!
//! The library computes, from file-based market, trade, wallet, and news-anchor
//! inputs, the full label and feature stack for informed-trading analysis:
//!
//! - [`leakage`] — the information leakage score (pre-news price drift over the
//!   total information move), its multi-window variants, scope-condition flags,
//!   and the auxiliary volume / concentration / timing metrics.
//! - [`deadline`] — the deadline-market extension: a constant-hazard baseline
//!   belief trajectory, per-category exponential-hazard MLE, and the
//!   event-anchored score for deadline contracts.
//! - [`micro`] — rolling-window microstructure features adapted to bounded
//!   binary prices: order imbalance, VPIN, Kyle's lambda, variance ratio,
//!   two-sidedness, trade-size kurtosis, and a Hawkes branching ratio.
//! - [`wallet`] — wallet novelty scoring from on-chain context.
//! - [`scoring`] — Murphy decomposition of the Brier score, label aggregation,
//!   feature-vector assembly, and statistical power analysis.
//! - [`typology`] — rule-based market classification into resolution types and
//!   target categories.
//! - [`synth`] — a deterministic synthetic-market generator that doubles as a
//!   ground-truth oracle for everything above.

pub mod deadline;
pub mod hawkes;
pub mod io;
pub mod leakage;
pub mod market;
pub mod micro;
pub mod scoring;
pub mod stats;
pub mod synth;
pub mod time;
pub mod typology;
pub mod wallet;

pub use market::{
    build_price_series, volume_cutoff_filter, AnchorTier, Category, MarketRecord, NewsAnchor,
    Outcome, PricePoint, PriceSeries, ResolutionType, Side, Trade,
};
pub use time::Ts;

/// Schema version stamped on every emitted record.
pub const SCHEMA_VERSION: &str = "1";
