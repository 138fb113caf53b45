//! Systemic trade-risk analytics for multiplex international trade networks.
//!
//! The crate builds vulnerability-weighted trade networks from bilateral flow
//! data, computes recursive and first-neighbour risk indicators (TradeRisk,
//! In-Strength TradeRisk), spectral and component-based resilience metrics,
//! degree-preserving null models, and the correlation machinery used to relate
//! those indicators to price volatility, supply risk, scarcity and trade
//! barriers.

pub mod archive;
pub mod error;
pub mod fixture;
pub mod graph;
pub mod indicators;
pub mod ingest;
pub mod model;
pub mod nullmodels;
pub mod pipeline;
pub mod stats;

pub use error::Error;
pub use model::{
    CorrelationReport, CountryRecord, CountryRegistry, IndicatorTable, Layer, ResourceRecord,
    ResourceRegistry, TradeFlowPanel, VulnerabilityNetwork,
};
