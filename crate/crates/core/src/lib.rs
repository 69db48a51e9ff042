//! Sizing and operating community energy storage, and splitting its cost among buildings.

pub mod allocation;
pub mod coalition;
pub mod error;
pub mod metrics;
pub mod model;
pub mod solver;
pub mod synth;

pub use allocation::{AllocationResult, CommunityGame, CostGame, Method, TableGame};
pub use coalition::{evaluate_coalition, CharacteristicCache, CoalitionOutcome};
pub use error::{Error, Result};
pub use metrics::EconomicReport;
pub use model::{CoalitionKey, CommunityModel, SharingMode};
