//! Configuration tree for the plant, actuators, controllers, and harness.
//!
//! Every tunable ships with a default calibrated for the 9-core quick battery;
//! a TOML file with the same structure can override any subset of fields.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Result, SimError};

/// Grid geometry of the chiplet floorplan. One thermal cell per core.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default)]
pub struct FloorplanConfig {
    pub rows: usize,
    pub cols: usize,
    /// Cell width in meters (x direction, along rows).
    pub cell_width_m: f64,
    /// Cell length in meters (y direction, along columns).
    pub cell_length_m: f64,
    pub si_thickness_m: f64,
    pub cu_thickness_m: f64,
}

impl Default for FloorplanConfig {
    fn default() -> Self {
        Self {
            rows: 3,
            cols: 3,
            cell_width_m: 3.0e-3,
            cell_length_m: 3.0e-3,
            si_thickness_m: 0.2e-3,
            cu_thickness_m: 1.2e-3,
        }
    }
}

/// Bulk material constants.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
#[serde(default)]
pub struct Material {
    /// kg/m^3
    pub density: f64,
    /// J/(kg*K)
    pub specific_heat: f64,
    /// W/(m*K)
    pub conductivity: f64,
}

impl Default for Material {
    fn default() -> Self {
        SILICON
    }
}

pub const SILICON: Material = Material {
    density: 2330.0,
    specific_heat: 712.0,
    conductivity: 130.0,
};

pub const COPPER: Material = Material {
    density: 8960.0,
    specific_heat: 385.0,
    conductivity: 390.0,
};

/// Materials and lumped parameters of the dissipation stack beyond the die.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default)]
pub struct MaterialsConfig {
    pub silicon: Material,
    pub copper: Material,
    /// Die <-> heat-spreader interface resistance, K*m^2/W (divided by cell area).
    pub tim1_r_m2k_w: f64,
    /// Heat-spreader <-> heat-sink interface resistance, K*m^2/W.
    pub tim2_r_m2k_w: f64,
    /// Aluminum heat sink lumped capacitance, J/K.
    pub sink_capacitance_j_k: f64,
    pub sink_conductivity: f64,
    /// Heat sink base plate area, m^2 (for the spreading-resistance term).
    pub sink_plate_area_m2: f64,
    pub sink_plate_thickness_m: f64,
    /// PCB (with interposer merged in) lumped capacitance, J/K.
    pub pcb_capacitance_j_k: f64,
    /// Die cell -> PCB secondary-path resistance per cell, K/W.
    pub r_si_pcb_per_cell_k_w: f64,
    pub mb_capacitance_j_k: f64,
    pub r_pcb_mb_k_w: f64,
    pub r_mb_air_k_w: f64,
    /// Case air lumped capacitance, J/K.
    pub air_capacitance_j_k: f64,
}

impl Default for MaterialsConfig {
    fn default() -> Self {
        Self {
            silicon: SILICON,
            copper: COPPER,
            tim1_r_m2k_w: 5.0e-6,
            tim2_r_m2k_w: 8.0e-6,
            sink_capacitance_j_k: 70.0,
            sink_conductivity: 205.0,
            sink_plate_area_m2: 64.0e-4,
            sink_plate_thickness_m: 6.0e-3,
            pcb_capacitance_j_k: 60.0,
            r_si_pcb_per_cell_k_w: 60.0,
            mb_capacitance_j_k: 250.0,
            r_pcb_mb_k_w: 1.2,
            r_mb_air_k_w: 1.5,
            air_capacitance_j_k: 120.0,
        }
    }
}

/// Per-variant cooling parameters applied on top of the common stack.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default)]
pub struct CoolingParams {
    /// Baseline heat-spreader cell -> sink resistance, K/W per cell,
    /// before TIM2 and spreading contributions.
    pub r_cu_sink_base_k_w: f64,
    /// Sink -> case-air resistance, K/W.
    pub r_sink_air_k_w: f64,
    /// Case-air -> ambient resistance, K/W.
    pub r_air_ambient_k_w: f64,
    /// AIR variant: peak of the radial Gaussian multiplier at the die center.
    pub gaussian_peak: f64,
    /// AIR variant: Gaussian radius as a fraction of the die half-diagonal.
    pub gaussian_sigma_frac: f64,
    /// RACK variant: linear increase of sink resistance from first to last column.
    pub column_gradient: f64,
    /// RACK variant: extra spreader coupling between column-adjacent cells, K/W.
    pub inter_column_r_k_w: f64,
}

impl Default for CoolingParams {
    fn default() -> Self {
        Self {
            r_cu_sink_base_k_w: 2.4,
            r_sink_air_k_w: 0.22,
            r_air_ambient_k_w: 0.25,
            gaussian_peak: 0.0,
            gaussian_sigma_frac: 0.6,
            column_gradient: 0.0,
            inter_column_r_k_w: 0.0,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default)]
pub struct CoolingConfig {
    pub water: CoolingParams,
    pub air: CoolingParams,
    pub rack: CoolingParams,
}

impl Default for CoolingConfig {
    fn default() -> Self {
        Self {
            water: CoolingParams {
                r_cu_sink_base_k_w: 0.7,
                r_sink_air_k_w: 0.035,
                r_air_ambient_k_w: 0.025,
                ..CoolingParams::default()
            },
            air: CoolingParams {
                r_cu_sink_base_k_w: 1.6,
                r_sink_air_k_w: 0.05,
                r_air_ambient_k_w: 0.04,
                gaussian_peak: 1.0,
                gaussian_sigma_frac: 0.6,
                ..CoolingParams::default()
            },
            rack: CoolingParams {
                r_cu_sink_base_k_w: 1.6,
                r_sink_air_k_w: 0.06,
                r_air_ambient_k_w: 0.05,
                column_gradient: 1.0,
                inter_column_r_k_w: 8.0,
                ..CoolingParams::default()
            },
        }
    }
}

/// Core power model coefficients and workload capacitance classes.
///
/// The leakage coefficients default to the output of the calibration fit
/// (see `power::calibrate`); `dtmsim calibrate` regenerates them.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default)]
pub struct PowerConfig {
    /// Static floor, W.
    pub k_s0: f64,
    /// Static current, A.
    pub i_cc: f64,
    /// Leakage voltage coefficient, 1/V.
    pub k_v: f64,
    /// Leakage temperature coefficient, 1/degC.
    pub k_t: f64,
    /// Leakage offset, dimensionless.
    pub k_t0: f64,
    /// Effective capacitance per workload class, F.
    pub ceff_vector_f: f64,
    pub ceff_intfloat_f: f64,
    pub ceff_idle_f: f64,
    /// Critical corner used by the calibration fit.
    pub v_max: f64,
    pub t_max_c: f64,
    /// Multiplicative process-variation half-width on I_cc and C_eff.
    pub variation_spread: f64,
    /// Seed for the variation draw; constant across a whole battery.
    pub variation_seed: u64,
    /// Calibration anchors (see `power::CalibrationAnchors`).
    pub anchor_dp_same_volt_w: f64,
    pub anchor_dp_cross_volt_w: f64,
    pub anchor_p_min_freq_w: f64,
    pub anchor_leak_ratio: f64,
    pub anchor_temp_c: f64,
}

impl Default for PowerConfig {
    fn default() -> Self {
        // Leakage coefficients from the shipped calibration fit; regenerate
        // with `dtmsim calibrate` after touching any anchor.
        Self {
            k_s0: 0.5,
            i_cc: 4.711_581_280_849_044_3e-1,
            k_v: 1.079_815_502_200_478_5,
            k_t: 0.045,
            k_t0: -2.682_681_020_966_682_7,
            ceff_vector_f: 1.548_148_148_148_153_6e-9,
            ceff_intfloat_f: 0.95e-9,
            ceff_idle_f: 0.16e-9,
            v_max: 1.2,
            t_max_c: 95.0,
            variation_spread: 0.1,
            variation_seed: 0xD7_1C_57,
            anchor_dp_same_volt_w: 0.0627,
            anchor_dp_cross_volt_w: 0.7407,
            anchor_p_min_freq_w: 5.52,
            anchor_leak_ratio: 10.0,
            anchor_temp_c: 75.0,
        }
    }
}

/// Discrete operating grid of the frequency/voltage actuators.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default)]
pub struct GridConfig {
    pub f_min_ghz: f64,
    pub f_max_ghz: f64,
    pub f_step_ghz: f64,
    pub v_min: f64,
    pub v_max: f64,
    pub v_step: f64,
    /// Max sustainable frequency per voltage level, GHz, ascending with voltage.
    pub fmax_per_volt_ghz: Vec<f64>,
    /// VRM transition delay, s.
    pub vrm_delay_s: f64,
}

impl Default for GridConfig {
    fn default() -> Self {
        Self {
            f_min_ghz: 0.4,
            f_max_ghz: 3.45,
            f_step_ghz: 0.05,
            v_min: 0.5,
            v_max: 1.2,
            v_step: 0.05,
            // Anchored at 0.90 V -> 2.90, 0.95 V -> 3.00, 1.20 V -> 3.45 and
            // 0.85 V -> 2.75+; the free levels quantize a quadratic V(F)
            // curve so the F-V relation stays sub-linear and admits a tight
            // polynomial upper bound.
            fmax_per_volt_ghz: vec![
                1.60, 1.90, 2.10, 2.25, 2.40, 2.55, 2.70, 2.80, 2.90, 3.00, 3.10, 3.20, 3.30,
                3.40, 3.45,
            ],
            vrm_delay_s: 50e-6,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default)]
pub struct PidGains {
    pub kp: f64,
    pub ki: f64,
    pub kd: f64,
    pub out_min: f64,
    pub out_max: f64,
}

impl Default for PidGains {
    fn default() -> Self {
        Self {
            kp: 1.0,
            ki: 0.0,
            kd: 0.0,
            out_min: 0.0,
            out_max: 1.0,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default)]
pub struct VbaConfig {
    /// Thermal candidate PI on the limit error, emitting a reduction below
    /// F_max in GHz. Accumulates only above the limit; below it the
    /// reduction leaks away at the release rate.
    pub thermal: PidGains,
    /// Multiplicative per-period decay of the thermal reduction once the
    /// core has cooled `thermal_release_band_c` under the limit; in between
    /// the reduction holds.
    pub thermal_release_rate: f64,
    pub thermal_release_band_c: f64,
    /// Power candidate PI: W error -> uniform GHz delta on the previous
    /// command.
    pub power: PidGains,
    /// Guard band under the chip budget the power loop regulates against.
    pub power_margin_frac: f64,
}

impl Default for VbaConfig {
    fn default() -> Self {
        Self {
            thermal: PidGains {
                kp: 0.1,
                ki: 8.0,
                kd: 0.0,
                out_min: -3.05,
                out_max: 0.0,
            },
            thermal_release_rate: 0.05,
            thermal_release_band_c: 1.5,
            // Windowed like the vendor implementations: protective drops are
            // fast, the climb back is on the seconds scale.
            power: PidGains {
                kp: 0.001,
                ki: 0.05,
                kd: 0.0,
                out_min: -0.4,
                out_max: 0.003,
            },
            power_margin_frac: 0.03,
        }
    }
}

/// Shared-voltage selection policy for EBA's per-domain vote.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum VoltagePolicy {
    /// Highest vote wins (industry standard).
    Max,
    /// Vote at the given percentile (0-100) of the sorted domain votes.
    Percentile(f64),
    /// Grid level minimizing the importance-weighted squared frequency loss.
    ImportanceWeighted,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default)]
pub struct EbaConfig {
    /// Moving-average filter time constant, s (lambda = Ts / tau).
    pub tau_ma_s: f64,
    /// Thermal power-cap PI: degC error -> W.
    pub thermal: PidGains,
    /// Forgetting factor of the power-model adaptation filter.
    pub offset_beta: f64,
    pub voltage_policy: VoltagePolicy,
    /// Per-core importance weights when `ImportanceWeighted` is selected
    /// (empty = uniform).
    pub importance: Vec<f64>,
}

impl Default for EbaConfig {
    fn default() -> Self {
        Self {
            tau_ma_s: 1.25e-2,
            thermal: PidGains {
                kp: 3.0,
                ki: 400.0,
                kd: 0.0,
                out_min: 0.2,
                out_max: 60.0,
            },
            offset_beta: 0.04,
            voltage_policy: VoltagePolicy::Max,
            importance: Vec::new(),
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default)]
pub struct FcaConfig {
    /// Temperature-derivative step count (control periods).
    pub s_steps: usize,
    /// Blend between max and mean domain temperature in the distribution heuristic.
    pub temp_blend_gamma: f64,
    /// 5x5 fuzzy increment table, rows = dT bins, cols = T bins.
    pub lut: Vec<Vec<i32>>,
    /// Bisection tolerance on the scalar max-frequency variable, GHz.
    pub bisect_tol_ghz: f64,
    /// Per-core floor used by the power distribution, W.
    pub p_floor_w: f64,
}

impl Default for FcaConfig {
    fn default() -> Self {
        Self {
            s_steps: 2,
            temp_blend_gamma: 0.5,
            lut: default_fuzzy_lut(),
            bisect_tol_ghz: 5e-3,
            p_floor_w: 0.2,
        }
    }
}

/// Fuzzy increment table. Rows: dT < 0, 0-0.5, 0.5-1.0, 1.0-2.0, >= 2.0.
/// Cols: T < 45, 45-65, 65-80, 80-T_L, >= T_L.
pub fn default_fuzzy_lut() -> Vec<Vec<i32>> {
    vec![
        vec![2, 2, 1, 0, -1],
        vec![2, 1, 1, 0, -1],
        vec![1, 1, 0, -1, -2],
        vec![1, 0, -1, -2, -3],
        vec![0, 0, -2, -3, -4],
    ]
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default)]
pub struct ControllerConfig {
    /// Control period, s.
    pub ts_s: f64,
    /// Soft thermal capping limit, degC.
    pub t_l_c: f64,
    /// Hard critical limit, degC.
    pub t_crit_c: f64,
    pub vba: VbaConfig,
    pub eba: EbaConfig,
    pub fca: FcaConfig,
}

impl Default for ControllerConfig {
    fn default() -> Self {
        Self {
            ts_s: 500e-6,
            t_l_c: 85.0,
            t_crit_c: 95.0,
            vba: VbaConfig::default(),
            eba: EbaConfig::default(),
            fca: FcaConfig::default(),
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default)]
pub struct HarnessConfig {
    /// Plant step, s.
    pub plant_dt_s: f64,
    /// Plant steps per controller invocation.
    pub control_every: usize,
    /// Test duration, s.
    pub duration_s: f64,
    pub ambient_c: f64,
    /// Band for the per-iteration uniform initial temperature draw, degC.
    pub init_temp_min_c: f64,
    pub init_temp_max_c: f64,
    /// Temperature sensor noise sigma, degC (3 sigma = 1 degC amplitude).
    pub noise_sigma_c: f64,
    /// Budget schedule as fractions of the max-workload reference power;
    /// the budget changes len-1 times during a test.
    pub budget_pattern: Vec<f64>,
    /// Temperature at which the reference power is evaluated. Warm but below
    /// the limit, so the schedule exercises both capping paths.
    pub budget_ref_temp_c: f64,
    /// Number of initial-condition iterations per test case.
    pub iterations: usize,
}

impl Default for HarnessConfig {
    fn default() -> Self {
        Self {
            plant_dt_s: 50e-6,
            control_every: 10,
            duration_s: 2.0,
            ambient_c: 25.0,
            init_temp_min_c: 35.0,
            init_temp_max_c: 75.0,
            noise_sigma_c: 1.0 / 3.0,
            budget_pattern: vec![1.0, 0.6, 0.8, 0.4, 0.9],
            budget_ref_temp_c: 75.0,
            iterations: 10,
        }
    }
}

/// Root configuration.
#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(default)]
pub struct SimConfig {
    pub floorplan: FloorplanConfig,
    pub materials: MaterialsConfig,
    pub cooling: CoolingConfig,
    pub power: PowerConfig,
    pub grid: GridConfig,
    pub controller: ControllerConfig,
    pub harness: HarnessConfig,
}

impl SimConfig {
    pub fn from_toml_str(s: &str) -> Result<Self> {
        toml::from_str(s).map_err(|e| SimError::Config(e.to_string()))
    }

    pub fn from_path(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| SimError::io(path, e))?;
        Self::from_toml_str(&text)
    }

    pub fn to_toml_string(&self) -> String {
        toml::to_string_pretty(self).expect("config serializes")
    }

    /// Resize the floorplan grid, keeping square cells.
    pub fn with_grid_size(mut self, rows: usize, cols: usize) -> Self {
        self.floorplan.rows = rows;
        self.floorplan.cols = cols;
        self
    }

    pub fn n_cores(&self) -> usize {
        self.floorplan.rows * self.floorplan.cols
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn toml_round_trip() {
        let cfg = SimConfig::default();
        let text = cfg.to_toml_string();
        let back = SimConfig::from_toml_str(&text).unwrap();
        assert_eq!(back.floorplan.rows, cfg.floorplan.rows);
        assert_eq!(back.power.i_cc, cfg.power.i_cc);
        assert_eq!(back.controller.fca.lut, cfg.controller.fca.lut);
    }

    #[test]
    fn partial_override_keeps_defaults() {
        let cfg = SimConfig::from_toml_str("[floorplan]\nrows = 6\ncols = 6\n").unwrap();
        assert_eq!(cfg.floorplan.rows, 6);
        assert_eq!(cfg.harness.control_every, 10);
    }
}
