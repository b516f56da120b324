//! Bidirectional age of incorrect information (BAoII) for two entities that
//! measure themselves and share what they measure.
//!
//! The crate is organized bottom-up:
//!
//! - [`state`]: the nine-state knowledge space and event semantics
//! - [`ctmc`]: generator, stationary distribution, hitting times
//! - [`analytic`]: the published closed forms, evaluated verbatim
//! - [`optimizer`]: optimal transmit probability and measurement rate
//! - [`simulator`]: seeded Monte Carlo of the chain
//! - [`trace`]: deterministic penalty curves for a given event timeline
//! - [`experiments`]: validation reports, figure sweeps and the CLI commands

pub mod linalg;
pub mod params;
pub mod state;
pub mod ctmc;
pub mod analytic;
pub mod optimizer;
pub mod simulator;
pub mod trace;
pub mod experiments;

pub use params::{CostModel, ParamError, RateParams};
pub use state::{EntityId, Event, EventKind, InfoState};
