//! Deterministic 2D social-navigation simulator with a sweep harness for
//! measuring how scenario complexity factors affect navigation metrics.
//!
//! The ego robot is agent 0. Humans follow cooperative or naive policies
//! (ORCA, social force, constant velocity, static) while the ego runs the
//! policy under test.

pub mod analysis;
pub mod controller;
pub mod error;
pub mod experiment;
pub mod geometry;
pub mod metrics;
pub mod policies;
pub mod predictive;
pub mod scenario;
pub mod sim;
pub mod world;

pub use controller::{Controller, PolicyParams};
pub use error::{Error, Result};
pub use geometry::Vec2;
pub use policies::PolicyTag;
pub use scenario::{Factor, Scenario, ScenarioParams, SweepCondition};
pub use sim::{run_trial, Outcome, TrialConfig, TrialResult};
pub use world::Workspace;
