//! Simulation library for dynamic power and thermal management of many-core chiplets.
//!
//! The plant couples a lumped RC thermal network of the die and its cooling
//! stack with an exponential-leakage power model and instruction-characterized
//! workload traces; real actuator behavior (discrete F/V grids, shared
//! voltage rails, PLL/VRM transitions) sits between three periodic capping
//! controllers and the plant. The harness runs the full evaluation battery
//! and computes the control-quality metrics.

pub mod actuators;
pub mod config;
pub mod control;
pub mod error;
pub mod harness;
pub mod power;
pub mod thermal;
pub mod workload;

pub use error::SimError;
