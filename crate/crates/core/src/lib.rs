//! Discrete-time agent-based simulation of protest dynamics.
//!
//! Each agent carries four psychological scalars (disidentification,
//! innovation, moralisation, energisation) that respond to the success or
//! failure of collective action. Every time step an authority broadcasts a
//! success/failure signal which agents may re-frame individually and then
//! collectively over a social network, after which they update their state
//! and decide whether, and how, to act.
//!
//! The crate is organised bottom-up:
//!
//! * [`model`]: per-agent state, the psychological update and decision rules
//! * [`signal`]: the authority broadcast and the re-framing pipeline
//! * [`network`]: Holme-Kim and Erdős–Rényi generators, graph statistics
//! * [`engine`]: single runs, Monte Carlo replicates and time-series metrics
//! * [`experiments`]: presets, parameter sweeps and initial-condition batteries
//! * [`output`]: CSV/JSON artifact writers shared by the command-line tool

pub mod engine;
pub mod error;
pub mod experiments;
pub mod model;
pub mod network;
pub mod output;
pub mod rng;
pub mod signal;

pub use engine::{
    rolling_average, run, run_replicates, CoeffMode, GraphSource, InitialCondition, ModelParams,
    NoiseMode, PopulationSnapshot, ReplicateSet, RunOptions, RunResult, Simulation,
};
pub use error::{Error, Result};
pub use experiments::{
    dominant_type, initial_condition_battery, run_sweep, BatteryRow, CellCoordinates, Preset,
    SweepAxes, SweepCell, SweepSpec,
};
pub use model::{
    Action, ActivationTie, AgentState, AgentType, Decision, Dime, DimeCoefficients,
    DimeDistributionTable, Dimension, Tactic,
};
pub use network::{GraphStats, NetworkParams, SocialGraph};
pub use signal::Signal;
