//! Deterministic simulator for ground-station handover studies over
//! non-geostationary satellite constellations.
//!
//! The pipeline is: [`constellation`] builds per-satellite elements,
//! [`orbits`] propagates them, [`geometry`] finds what the ground station
//! sees, [`handover`] picks the serving satellite, [`link`] turns its range
//! into SNR, rate, delay and Doppler, and [`simkit`] drives the time loop.

// Negated float comparisons below are deliberate: they also reject NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod cli;
pub mod constellation;
pub mod geometry;
pub mod handover;
pub mod link;
pub mod orbits;
pub mod simkit;

pub use constellation::{build_elements, load_catalog, ConstellationSpec, ShellOrbit, ShellSpec};
pub use geometry::{GroundStation, Topocentric};
pub use handover::{HandoverCause, HandoverEvent, SatId, StrategyId};
pub use link::{LinkBudgetParams, LinkMetrics, LinkSample, ModcodTable};
pub use orbits::{propagate, solve_kepler, EciState, Orbit, OrbitalElements};
pub use simkit::{compare, run, GridEntry, RunResult, SimConfig, SimError, SummaryStats};
