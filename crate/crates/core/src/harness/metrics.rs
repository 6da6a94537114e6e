//! Control-quality metrics and their streaming accumulator.

use serde::{Deserialize, Serialize};

/// Per-run metrics derived from the control objective: thermal capping,
/// power capping, target compliance, and execution progress.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Metrics {
    /// Maximum temperature excess over T_L, degC (0 when never exceeded).
    pub thermal_exceeded_max: f64,
    /// Percentage of plant steps where any core exceeds T_L.
    pub thermal_exceeded_time: f64,
    /// Secondary per-core-sample variant of the exceeded time.
    pub thermal_exceeded_core_time: f64,
    /// Mean exceedance over the budget among exceeding steps, percent of the
    /// budget (may exceed 100).
    pub power_exceeded_avg: f64,
    /// Percentage of steps with total power above the budget, among steps
    /// where a budget applies.
    pub power_exceeded_time: f64,
    /// Normalized target-compliance norm, GHz/s.
    pub target_l2: f64,
    /// Mean workload progress across cores, percent.
    pub av_wlp: f64,
    /// Progress of the most penalized core, percent.
    pub min_wlp: f64,
    /// Mean true silicon temperature over cores and time, degC.
    pub avg_temp: f64,
    /// Integrated chip energy, J.
    pub total_energy: f64,
    /// Infeasible commands clamped by the actuator.
    pub actuator_violations: u64,
    /// Power grants clamped into the solvable band by the controller.
    pub solver_clamp_events: u64,
    /// Plant steps spent in the critical-temperature hardware trip.
    pub trip_steps: u64,
    /// The run diverged (thermal runaway); metrics cover the recorded prefix.
    pub aborted: bool,
}

/// Streaming accumulator fed once per plant step plus once per control step.
#[derive(Debug, Clone)]
pub struct MetricsAccumulator {
    n_cores: usize,
    t_l: f64,
    plant_steps: u64,
    any_exceed_steps: u64,
    core_exceed_samples: u64,
    max_excess: f64,
    budget_steps: u64,
    exceed_power_steps: u64,
    exceed_power_ratio_sum: f64,
    temp_sum: f64,
    energy: f64,
    control_steps: u64,
    l2_sum: f64,
    ts: f64,
    dt: f64,
    reference_cycles: Vec<f64>,
    aborted: bool,
}

impl MetricsAccumulator {
    pub fn new(n_cores: usize, t_l: f64, dt: f64, ts: f64) -> Self {
        Self {
            n_cores,
            t_l,
            plant_steps: 0,
            any_exceed_steps: 0,
            core_exceed_samples: 0,
            max_excess: 0.0,
            budget_steps: 0,
            exceed_power_steps: 0,
            exceed_power_ratio_sum: 0.0,
            temp_sum: 0.0,
            energy: 0.0,
            control_steps: 0,
            l2_sum: 0.0,
            ts,
            dt,
            reference_cycles: vec![0.0; n_cores],
            aborted: false,
        }
    }

    /// One plant step: true silicon temperatures, per-core powers, the
    /// active chip budget (None = no budget, exceedance impossible), and the
    /// per-core target frequencies accruing reference work.
    pub fn push_plant_step(
        &mut self,
        true_temps: &[f64],
        powers: &[f64],
        budget: Option<f64>,
        f_target: &[f64],
    ) {
        self.plant_steps += 1;
        let mut any = false;
        for &t in true_temps {
            let excess = t - self.t_l;
            if excess > 0.0 {
                any = true;
                self.core_exceed_samples += 1;
                self.max_excess = self.max_excess.max(excess);
            }
            self.temp_sum += t;
        }
        if any {
            self.any_exceed_steps += 1;
        }
        let total: f64 = powers.iter().sum();
        self.energy += total * self.dt;
        if let Some(b) = budget {
            self.budget_steps += 1;
            if total > b && b > 0.0 {
                self.exceed_power_steps += 1;
                self.exceed_power_ratio_sum += (total - b) / b;
            }
        }
        for (i, &ft) in f_target.iter().enumerate() {
            self.reference_cycles[i] += ft * crate::power::GHZ * self.dt;
        }
    }

    /// One control step: the applied frequencies against the targets.
    pub fn push_control_step(&mut self, f_target: &[f64], f_applied: &[f64]) {
        self.control_steps += 1;
        let sq: f64 = f_target
            .iter()
            .zip(f_applied)
            .map(|(t, a)| (t - a) * (t - a))
            .sum();
        self.l2_sum += sq.sqrt();
    }

    pub fn mark_aborted(&mut self) {
        self.aborted = true;
    }

    pub fn reference_cycles(&self) -> &[f64] {
        &self.reference_cycles
    }

    pub fn finalize(
        &self,
        consumed_cycles: &[u64],
        actuator_violations: u64,
        solver_clamp_events: u64,
        trip_steps: u64,
    ) -> Metrics {
        let plant = self.plant_steps.max(1) as f64;
        let wlp: Vec<f64> = consumed_cycles
            .iter()
            .zip(&self.reference_cycles)
            .map(|(&c, &r)| {
                if r <= 0.0 {
                    100.0
                } else {
                    (100.0 * c as f64 / r).min(100.0)
                }
            })
            .collect();
        let n_ctl = self.control_steps.max(1) as f64;
        Metrics {
            thermal_exceeded_max: self.max_excess,
            thermal_exceeded_time: 100.0 * self.any_exceed_steps as f64 / plant,
            thermal_exceeded_core_time: 100.0 * self.core_exceed_samples as f64
                / (plant * self.n_cores as f64),
            power_exceeded_avg: if self.exceed_power_steps == 0 {
                0.0
            } else {
                100.0 * self.exceed_power_ratio_sum / self.exceed_power_steps as f64
            },
            power_exceeded_time: if self.budget_steps == 0 {
                0.0
            } else {
                100.0 * self.exceed_power_steps as f64 / self.budget_steps as f64
            },
            target_l2: self.l2_sum / (self.n_cores as f64 * n_ctl * self.ts),
            av_wlp: wlp.iter().sum::<f64>() / wlp.len().max(1) as f64,
            min_wlp: wlp.iter().cloned().fold(f64::MAX, f64::min),
            avg_temp: self.temp_sum / (plant * self.n_cores as f64),
            total_energy: self.energy,
            actuator_violations,
            solver_clamp_events,
            trip_steps,
            aborted: self.aborted,
        }
    }
}

/// Named metric accessors for the long-format export and aggregation.
pub const METRIC_NAMES: [&str; 10] = [
    "thermal_exceeded_max",
    "thermal_exceeded_time",
    "thermal_exceeded_core_time",
    "power_exceeded_avg",
    "power_exceeded_time",
    "target_l2",
    "av_wlp",
    "min_wlp",
    "avg_temp",
    "total_energy",
];

impl Metrics {
    pub fn get(&self, name: &str) -> Option<f64> {
        Some(match name {
            "thermal_exceeded_max" => self.thermal_exceeded_max,
            "thermal_exceeded_time" => self.thermal_exceeded_time,
            "thermal_exceeded_core_time" => self.thermal_exceeded_core_time,
            "power_exceeded_avg" => self.power_exceeded_avg,
            "power_exceeded_time" => self.power_exceeded_time,
            "target_l2" => self.target_l2,
            "av_wlp" => self.av_wlp,
            "min_wlp" => self.min_wlp,
            "avg_temp" => self.avg_temp,
            "total_energy" => self.total_energy,
            _ => return None,
        })
    }
}

/// Grouped summary statistics, the paper-style aggregate view.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    pub n: usize,
    pub mean: f64,
    pub sd: f64,
    pub se: f64,
    pub min: f64,
    pub q25: f64,
    pub median: f64,
    pub q75: f64,
    pub max: f64,
}

pub fn summarize(values: &[f64]) -> Summary {
    assert!(!values.is_empty(), "cannot summarize an empty group");
    let n = values.len();
    let mean = values.iter().sum::<f64>() / n as f64;
    let var = values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n as f64;
    let sd = var.sqrt();
    let mut sorted = values.to_vec();
    sorted.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let quantile = |q: f64| -> f64 {
        let pos = q * (n - 1) as f64;
        let lo = pos.floor() as usize;
        let hi = pos.ceil() as usize;
        if lo == hi {
            sorted[lo]
        } else {
            sorted[lo] + (pos - lo as f64) * (sorted[hi] - sorted[lo])
        }
    };
    Summary {
        n,
        mean,
        sd,
        se: sd / (n as f64).sqrt(),
        min: sorted[0],
        q25: quantile(0.25),
        median: quantile(0.5),
        q75: quantile(0.75),
        max: sorted[n - 1],
    }
}
