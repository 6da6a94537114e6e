//! Voting-box reference controller.
//!
//! Industry-style centralized design: per core, independent candidate
//! frequencies are computed for (a) the HLC target, (b) thermal capping via a
//! per-core PI on the temperature error, and (c) chip power capping via one
//! global PI mapped to a uniform frequency delta on the previous command.
//! The minimum candidate wins; the domain voltage follows the highest
//! granted frequency. This is a behavioral reconstruction of the published
//! voting-box designs, not a reproduction of any vendor firmware.

use crate::actuators::{ControlCommand, DomainMap, OperatingGrid};
use crate::config::ControllerConfig;

use super::pid::Pid;
use super::{Controller, ControllerInputs};

pub struct VbaController {
    grid: OperatingGrid,
    domains: DomainMap,
    ts: f64,
    thermal_gains: crate::config::PidGains,
    release_rate: f64,
    release_band: f64,
    power_margin: f64,
    thermal_reduction: Vec<f64>,
    power_pid: Pid,
    ceiling_ghz: f64,
}

impl VbaController {
    pub fn new(cfg: &ControllerConfig, grid: OperatingGrid, domains: DomainMap) -> Self {
        let n_c = domains.n_cores();
        let f_min = grid.f_min_ghz();
        Self {
            ts: cfg.ts_s,
            thermal_gains: cfg.vba.thermal.clone(),
            release_rate: cfg.vba.thermal_release_rate,
            release_band: cfg.vba.thermal_release_band_c,
            power_margin: cfg.vba.power_margin_frac,
            thermal_reduction: vec![0.0; n_c],
            power_pid: Pid::new(cfg.vba.power.clone()),
            ceiling_ghz: f_min,
            grid,
            domains,
        }
    }
}

impl Controller for VbaController {
    fn name(&self) -> &'static str {
        "VBA"
    }

    fn step(&mut self, inputs: &ControllerInputs) -> ControlCommand {
        let n_c = self.domains.n_cores();
        let power_error = inputs.p_budget * (1.0 - self.power_margin) - inputs.rail_power.total;
        let power_delta = self.power_pid.step(power_error, self.ts);

        let f_max = self.grid.f_max_ghz();
        // Chip-wide frequency ceiling: the power box homogenizes frequencies
        // across cores, one of the known weaknesses of the voting design.
        self.ceiling_ghz = (self.ceiling_ghz + power_delta).clamp(self.grid.f_min_ghz(), f_max);
        let mut f = vec![0.0; n_c];
        for i in 0..n_c {
            let cand_target = inputs.f_target[i];
            // Thermal reduction accumulates only past the limit and leaks
            // away slowly below it, so violations arrive as few deep
            // excursions followed by a long guarded recovery.
            let e = inputs.t_l - inputs.sensed_t[i];
            let g = &self.thermal_gains;
            if e < 0.0 {
                self.thermal_reduction[i] =
                    (self.thermal_reduction[i] + g.ki * e * self.ts).max(g.out_min);
            } else if e > self.release_band {
                self.thermal_reduction[i] *= 1.0 - self.release_rate;
            }
            let cand_thermal =
                f_max + (g.kp * e.min(0.0) + self.thermal_reduction[i]).max(g.out_min);
            let cand_power = self.ceiling_ghz;
            let winner = cand_target
                .min(cand_thermal)
                .min(cand_power)
                .clamp(self.grid.f_min_ghz(), f_max);
            f[i] = self.grid.quantize_down(winner);
        }
        let mut v = vec![0.0; self.domains.n_domains()];
        for (d, cores) in self.domains.domains() {
            let max_f = cores.iter().map(|&c| f[c]).fold(f64::NEG_INFINITY, f64::max);
            v[d] = self.grid.min_voltage_for(max_f).expect("grid frequency");
        }
        ControlCommand { f_ghz: f, v_domain: v }
    }

    fn internals(&self) -> Vec<(&'static str, f64)> {
        vec![("vba_power_integrator", self.power_pid.integrator())]
    }
}
