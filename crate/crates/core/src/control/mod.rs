//! The periodic low-level control algorithms: the voting-box reference
//! (VBA), the enhanced moving-average cascade (EBA), and the fuzzy-inspired
//! iterative controller (FCA).
//!
//! All three consume the same inputs (noisy temperatures, per-rail power,
//! targets, budgets, a one-period-delayed workload proxy) and emit a
//! grid-feasible command that the actuator applies at the next period.

pub mod distribute;
pub mod fuzzy;
pub mod pid;
pub mod solver;

mod eba;
mod fca;
mod vba;

pub use eba::EbaController;
pub use fca::FcaController;
pub use vba::VbaController;

use serde::{Deserialize, Serialize};

use crate::actuators::{ControlCommand, DomainMap, OperatingGrid};
use crate::config::ControllerConfig;
use crate::power::{CorePowerParams, PowerReading};

/// Everything a controller may observe at one control period. True silicon
/// temperatures and per-core powers are deliberately absent.
#[derive(Debug, Clone)]
pub struct ControllerInputs<'a> {
    /// Noisy sensor temperatures, degC per core.
    pub sensed_t: &'a [f64],
    /// Per-rail power measurement from the previous period.
    pub rail_power: &'a PowerReading,
    /// Target frequencies from the higher-level controller, GHz per core.
    pub f_target: &'a [f64],
    /// Chip power budget, W.
    pub p_budget: f64,
    /// Per-domain rail budgets, W.
    pub p_domain: &'a [f64],
    /// Previous-period average effective capacitance per core, F.
    pub workload_proxy: &'a [f64],
    /// Soft thermal capping limit, degC.
    pub t_l: f64,
    /// Current time, s.
    pub now: f64,
}

pub trait Controller: Send {
    fn name(&self) -> &'static str;

    /// Computes the command for the next period. Implementations clamp
    /// internally and always return a feasible command.
    fn step(&mut self, inputs: &ControllerInputs) -> ControlCommand;

    /// Optional per-period internals for the debug trace.
    fn internals(&self) -> Vec<(&'static str, f64)> {
        Vec::new()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Algorithm {
    Vba,
    Eba,
    Fca,
}

impl Algorithm {
    pub fn label(&self) -> &'static str {
        match self {
            Algorithm::Vba => "VBA",
            Algorithm::Eba => "EBA",
            Algorithm::Fca => "FCA",
        }
    }

    pub fn all() -> [Algorithm; 3] {
        [Algorithm::Vba, Algorithm::Eba, Algorithm::Fca]
    }
}

impl std::str::FromStr for Algorithm {
    type Err = crate::SimError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_uppercase().as_str() {
            "VBA" => Ok(Algorithm::Vba),
            "EBA" => Ok(Algorithm::Eba),
            "FCA" => Ok(Algorithm::Fca),
            other => Err(crate::SimError::Config(format!("unknown algorithm {other}"))),
        }
    }
}

/// Instantiates a controller with its own copies of the grid and domain map.
pub fn make_controller(
    algorithm: Algorithm,
    cfg: &ControllerConfig,
    grid: &OperatingGrid,
    domains: &DomainMap,
    model_params: &CorePowerParams,
) -> Box<dyn Controller> {
    match algorithm {
        Algorithm::Vba => Box::new(VbaController::new(cfg, grid.clone(), domains.clone())),
        Algorithm::Eba => Box::new(EbaController::new(
            cfg,
            grid.clone(),
            domains.clone(),
            *model_params,
        )),
        Algorithm::Fca => Box::new(FcaController::new(
            cfg,
            grid.clone(),
            domains.clone(),
            *model_params,
        )),
    }
}
