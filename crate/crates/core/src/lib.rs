//! Stochastic network model of collective protective behaviour under an
//! external epidemic hazard signal: per-agent dynamics, seeded graph
//! generators, daily-series ingestion, a deterministic parallel ensemble
//! engine, likelihood-free (ABC) calibration, and validation metrics.

pub mod behaviour;
pub mod calibrate;
pub mod cli;
pub mod config;
pub mod data;
pub mod engine;
pub mod error;
pub mod metrics;
pub mod network;

pub use behaviour::{AgentState, ModelParams};
pub use data::{DailySeries, ExternalSignal, FillPolicy};
pub use engine::{Channel, ChannelBand, SummaryBands, Trajectory};
pub use error::{Error, Result};
pub use network::{NetworkKind, SocialNetwork};
