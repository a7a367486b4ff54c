//! Neighborhood local energy market (LEM) simulator.
//!
//! The market clears an hourly local price from the ratio of neighborhood
//! surplus to neighborhood demand, bounded below by either a feed-in tariff or
//! the levelized cost of electricity of the participating PV systems. Costs and
//! revenues are then settled ex-post across prosumers and consumers.
//!
//! The crate is organized bottom-up:
//!
//! - [`profiles`]: hourly time series, participants, synthetic generators, CSV I/O
//! - [`lcoe`]: CAPEX and levelized cost of electricity
//! - [`market`]: supply-demand ratio and price clearing (fixed and dynamic thresholds)
//! - [`settlement`]: cost and revenue allocation with energy routing
//! - [`scenario`]: scenario labels and single-scenario execution
//! - [`analysis`]: duration curves, daily/monthly statistics, comparisons, sweeps
//! - [`config`] and [`pipeline`]: declarative configuration and the batch pipeline behind the CLI

pub mod analysis;
pub mod config;
pub mod lcoe;
pub mod market;
pub mod numeric;
pub mod pipeline;
pub mod profiles;
pub mod scenario;
pub mod settlement;

pub use analysis::{ScenarioOutcome, SweepPoint};
pub use lcoe::{FinancialParams, PvCostModel};
pub use market::{MarketResult, Regime, Sdr, Thresholds, UpperThreshold};
pub use profiles::{Neighborhood, Participant, TimeSeries};
pub use scenario::{Scenario, ScenarioLabel};
pub use settlement::{SettlementLedger, SettlementRecord};
