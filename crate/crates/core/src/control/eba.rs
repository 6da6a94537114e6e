//! Enhanced baseline cascade controller.
//!
//! Power is the controlled variable. Each period the controller:
//! 1. forms `F_V-MA = F_T - F_MA` from the moving-average accumulator,
//! 2. votes the shared voltage per domain from `f_V(F_V-MA)`,
//! 3. estimates per-core power at the *target* frequency (plus the adaptive
//!    model offset) so headroom can still raise the applied frequency,
//! 4. distributes the chip and rail budgets weighted by thermal headroom,
//! 5. caps each grant with a per-core thermal PI,
//! 6. converts granted power back to a frequency at the voted voltage,
//! 7. updates `F_MA` through the forgetting factor, and
//! 8. feeds the measured-vs-estimated rail power into the offset filter.

use crate::actuators::{ControlCommand, DomainMap, OperatingGrid};
use crate::config::{ControllerConfig, VoltagePolicy};
use crate::power::CorePowerParams;

use super::distribute::proportional_fill;
use super::pid::Pid;
use super::solver::h_est;
use super::{Controller, ControllerInputs};

pub struct EbaController {
    grid: OperatingGrid,
    domains: DomainMap,
    model: CorePowerParams,
    ts: f64,
    lambda_ma: f64,
    offset_beta: f64,
    voltage_policy: VoltagePolicy,
    importance: Vec<f64>,
    p_floor: f64,
    f_ma: Vec<f64>,
    thermal_pids: Vec<Pid>,
    power_model_offset: f64,
    prev_cmd_est: Option<f64>,
}

impl EbaController {
    pub fn new(
        cfg: &ControllerConfig,
        grid: OperatingGrid,
        domains: DomainMap,
        model: CorePowerParams,
    ) -> Self {
        let n_c = domains.n_cores();
        let lambda_ma = cfg.ts_s / cfg.eba.tau_ma_s;
        assert!(
            lambda_ma > 0.0 && lambda_ma < 1.0,
            "lambda_MA = Ts/tau must lie in (0, 1)"
        );
        let importance = if cfg.eba.importance.len() == n_c {
            cfg.eba.importance.clone()
        } else {
            vec![1.0; n_c]
        };
        Self {
            ts: cfg.ts_s,
            lambda_ma,
            offset_beta: cfg.eba.offset_beta,
            voltage_policy: cfg.eba.voltage_policy,
            importance,
            p_floor: 0.2,
            f_ma: vec![0.0; n_c],
            thermal_pids: (0..n_c).map(|_| Pid::new(cfg.eba.thermal.clone())).collect(),
            power_model_offset: 0.0,
            prev_cmd_est: None,
            grid,
            domains,
            model,
        }
    }

    pub fn lambda_ma(&self) -> f64 {
        self.lambda_ma
    }

    pub fn f_ma(&self) -> &[f64] {
        &self.f_ma
    }

    pub fn power_model_offset(&self) -> f64 {
        self.power_model_offset
    }

    /// Domain voltage from the per-core votes under the configured policy.
    fn select_voltage(&self, votes: &[f64], cores: &[usize], f_vma: &[f64]) -> f64 {
        match self.voltage_policy {
            VoltagePolicy::Max => votes.iter().cloned().fold(f64::MIN, f64::max),
            VoltagePolicy::Percentile(p) => {
                let mut sorted = votes.to_vec();
                sorted.sort_by(|a, b| a.partial_cmp(b).unwrap());
                let rank = ((p / 100.0) * (sorted.len() - 1) as f64).round() as usize;
                sorted[rank.min(sorted.len() - 1)]
            }
            VoltagePolicy::ImportanceWeighted => {
                // Grid level minimizing the importance-weighted squared
                // frequency loss against the filtered requests.
                let lo = votes.iter().cloned().fold(f64::MAX, f64::min);
                let hi = votes.iter().cloned().fold(f64::MIN, f64::max);
                let mut best = (hi, f64::MAX);
                for &v in self.grid.volt_levels() {
                    if v < lo - 1e-12 || v > hi + 1e-12 {
                        continue;
                    }
                    let cap = self.grid.max_frequency_at(v).unwrap();
                    let loss: f64 = cores
                        .iter()
                        .map(|&c| {
                            let short = (f_vma[c] - cap).max(0.0);
                            self.importance[c] * short * short
                        })
                        .sum();
                    if loss < best.1 {
                        best = (v, loss);
                    }
                }
                best.0
            }
        }
    }
}

impl Controller for EbaController {
    fn name(&self) -> &'static str {
        "EBA"
    }

    fn step(&mut self, inputs: &ControllerInputs) -> ControlCommand {
        let n_c = self.domains.n_cores();
        let n_d = self.domains.n_domains();
        let (f_lo, f_hi) = (self.grid.f_min_ghz(), self.grid.f_max_ghz());

        // (1)-(2) moving-average voltage selection.
        let f_vma: Vec<f64> = (0..n_c)
            .map(|i| (inputs.f_target[i] - self.f_ma[i]).clamp(f_lo, f_hi))
            .collect();
        let mut v_dom = vec![0.0; n_d];
        for (d, cores) in self.domains.domains() {
            let votes: Vec<f64> = cores
                .iter()
                .map(|&c| self.grid.min_voltage_for(f_vma[c]).expect("clamped"))
                .collect();
            v_dom[d] = self.select_voltage(&votes, cores, &f_vma);
        }

        // (3) Conv2P at the target frequency, with the adaptive offset share.
        let offset_share = self.power_model_offset / n_c as f64;
        let p_est: Vec<f64> = (0..n_c)
            .map(|i| {
                let d = self.domains.domain_of(i).unwrap();
                h_est(
                    inputs.f_target[i].clamp(f_lo, f_hi),
                    v_dom[d],
                    inputs.sensed_t[i],
                    inputs.workload_proxy[i],
                    &self.model,
                ) + offset_share
            })
            .collect();

        // (4) headroom-weighted budget distribution against P_B, then P_Dj.
        let weights: Vec<f64> = inputs
            .sensed_t
            .iter()
            .map(|&t| (inputs.t_l - t).max(0.5))
            .collect();
        let (mut granted, _) = proportional_fill(&p_est, &weights, inputs.p_budget, self.p_floor);
        for (d, cores) in self.domains.domains() {
            let rail: f64 = cores.iter().map(|&c| granted[c]).sum();
            if rail > inputs.p_domain[d] {
                let reqs: Vec<f64> = cores.iter().map(|&c| granted[c]).collect();
                let w: Vec<f64> = cores.iter().map(|&c| weights[c]).collect();
                let (scaled, _) = proportional_fill(&reqs, &w, inputs.p_domain[d], self.p_floor);
                for (k, &c) in cores.iter().enumerate() {
                    granted[c] = scaled[k];
                }
            }
        }

        // (5) thermal capping on granted power.
        for i in 0..n_c {
            let cap = self.thermal_pids[i].step(inputs.t_l - inputs.sensed_t[i], self.ts);
            granted[i] = granted[i].min(cap);
        }

        // (6) Conv2F to an (F, V) pair. The grant is priced at the domain
        // voltage and rounded to the nearest grid frequency, so the realized
        // power dithers around the grant. If the grants afford more than the
        // voted level sustains, the pair climbs one voltage level per period
        // (re-priced at the higher level), which un-sticks the moving
        // average after a budget release without blowing through the budget.
        let half_step = 0.5 * (self.grid.freq_levels()[1] - self.grid.freq_levels()[0]);
        let mut f = vec![0.0; n_c];
        for (d, cores) in self.domains.domains() {
            let mut v = v_dom[d];
            let solve_at = |v: f64, f: &mut Vec<f64>| -> f64 {
                let mut max_f = f_lo;
                for &c in cores {
                    let stat = h_est(0.0, v, inputs.sensed_t[c], 0.0, &self.model);
                    let omega = inputs.workload_proxy[c].max(1e-15);
                    let f_cont = (granted[c] - offset_share - stat)
                        / (omega * crate::power::GHZ * v * v);
                    let desired = f_cont.clamp(f_lo, inputs.f_target[c].clamp(f_lo, f_hi));
                    f[c] = self.grid.quantize_down_with_snap(desired, half_step);
                    max_f = max_f.max(f[c]);
                }
                max_f
            };
            let mut max_f = solve_at(v, &mut f);
            let cap = self.grid.max_frequency_at(v).expect("grid level");
            if max_f > cap + 1e-9 {
                let idx = self.grid.volt_level_index(v).expect("grid level");
                if idx + 1 < self.grid.n_volt_levels() {
                    v = self.grid.volt_levels()[idx + 1];
                    max_f = solve_at(v, &mut f);
                }
            }
            let _ = max_f;
            let cap = self.grid.max_frequency_at(v).expect("grid level");
            for &c in cores {
                f[c] = f[c].min(cap);
            }
            v_dom[d] = v;
        }

        // (7) forgetting-factor update toward the actually emitted command.
        for i in 0..n_c {
            self.f_ma[i] = (1.0 - self.lambda_ma) * self.f_ma[i]
                + self.lambda_ma * (inputs.f_target[i] - f[i]);
        }

        // (8) model adaptation from the previous period's estimate.
        if let Some(prev_est) = self.prev_cmd_est {
            let err = inputs.rail_power.total - prev_est;
            self.power_model_offset += self.offset_beta * (err - self.power_model_offset);
            self.power_model_offset = self.power_model_offset.clamp(-1e4, 1e4);
        }
        let cmd_est: f64 = (0..n_c)
            .map(|i| {
                let d = self.domains.domain_of(i).unwrap();
                h_est(
                    f[i],
                    v_dom[d],
                    inputs.sensed_t[i],
                    inputs.workload_proxy[i],
                    &self.model,
                )
            })
            .sum();
        self.prev_cmd_est = Some(cmd_est);

        ControlCommand {
            f_ghz: f,
            v_domain: v_dom,
        }
    }

    fn internals(&self) -> Vec<(&'static str, f64)> {
        vec![
            ("eba_offset_w", self.power_model_offset),
            ("eba_f_ma_mean", self.f_ma.iter().sum::<f64>() / self.f_ma.len() as f64),
        ]
    }
}
