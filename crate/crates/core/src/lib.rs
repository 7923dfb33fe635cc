//! Multi-level association rule mining over per-cell wireless telemetry.
//!
//! The pipeline loads role-tagged time series, quantizes them into levels,
//! clusters similar cells, turns each cluster's records into transactions,
//! mines CP ⇒ KPI rules with FP-growth and extends them with environment
//! context. Metric code is generic over [`Scalar`] so the level
//! decomposition identities can be checked in exact arithmetic.

pub mod cluster;
pub mod config;
pub mod dataset;
pub mod error;
pub mod eval;
pub mod kv;
pub mod miner;
pub mod pipeline;
pub mod quantize;
pub mod ruleplus;
pub mod scalar;
pub mod transactions;

pub use error::{Error, Result};
pub use scalar::Scalar;

/// Exact rational used for identity checks.
pub type Exact = num_rational::Ratio<i128>;
pub type Metrics = miner::RuleMetrics<f64>;
pub type ExactMetrics = miner::RuleMetrics<Exact>;
pub type PairAggregate = miner::VariablePairAggregate<f64>;
pub type ExactPairAggregate = miner::VariablePairAggregate<Exact>;
pub type FeatureVector = cluster::CellFeatureVector<f64>;
pub type Clustering = cluster::CellClustering<f64>;
