//! Slot-level simulator for deadline-constrained shared-alarm random access
//! among mobile subnetworks, with learning and baseline access policies and
//! exact oracles for small instances.

pub mod analytics;
pub mod channel;
pub mod engine;
pub mod error;
pub mod events;
pub mod geometry;
pub mod nn;
pub mod policy;
pub mod report;
pub mod scenario;
pub mod selftest;
pub mod signature;

pub use engine::{resolve_collisions, run, EventRecord, RunTrace, Simulation, SlotOutcome};
pub use error::{Error, Result};
pub use events::EventStatus;
pub use policy::{make_policy, AccessPolicy, DrlAgent, MapRaAgent, RandomAgent, TransmissionPattern};
pub use report::{run_experiment, sweep, ExperimentResult, SweepAxis, SweepResult};
pub use scenario::{load_config, ActivationMode, PilotKind, PolicyKind, RewardScope, ScenarioConfig};
