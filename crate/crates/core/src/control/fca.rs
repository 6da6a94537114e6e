//! Fuzzy-inspired iterative controller.
//!
//! Thermal capping moves *before* power distribution: a per-core fuzzy state
//! driven by the (noise-filtered) temperature derivative caps the frequency
//! targets, the capped targets are converted to power requests with the
//! polynomial f_V bound, the chip and rail budgets are distributed per
//! domain, and the granted powers are converted back into a per-domain
//! (F, V) operating point by the bisection solver.

use std::collections::VecDeque;

use crate::actuators::{ControlCommand, DomainMap, OperatingGrid};
use crate::config::ControllerConfig;
use crate::power::CorePowerParams;

use super::distribute::fca_power_distribute;
use super::fuzzy::{fca_cap_frequency, fuzzy_update, FuzzyLut};
use super::solver::{conv2f_bisection, h_est};
use super::{Controller, ControllerInputs};

pub struct FcaController {
    grid: OperatingGrid,
    domains: DomainMap,
    model: CorePowerParams,
    lut: FuzzyLut,
    s_steps: usize,
    fuzzy_floor: i32,
    temp_blend_gamma: f64,
    bisect_tol: f64,
    p_floor: f64,
    fuzzy_state: Vec<i32>,
    temp_history: Vec<VecDeque<f64>>,
    clamp_events: u64,
    floor_events: u64,
}

impl FcaController {
    pub fn new(
        cfg: &ControllerConfig,
        grid: OperatingGrid,
        domains: DomainMap,
        model: CorePowerParams,
    ) -> Self {
        let n_c = domains.n_cores();
        let lut = FuzzyLut::from_rows(&cfg.fca.lut).expect("valid fuzzy LUT");
        // Deep enough that the state can always walk the grid down to V_min.
        let fuzzy_floor = -2 * grid.n_volt_levels() as i32;
        Self {
            lut,
            s_steps: cfg.fca.s_steps,
            fuzzy_floor,
            temp_blend_gamma: cfg.fca.temp_blend_gamma,
            bisect_tol: cfg.fca.bisect_tol_ghz,
            p_floor: cfg.fca.p_floor_w,
            fuzzy_state: vec![0; n_c],
            temp_history: vec![VecDeque::with_capacity(cfg.fca.s_steps + 1); n_c],
            clamp_events: 0,
            floor_events: 0,
            grid,
            domains,
            model,
        }
    }

    pub fn fuzzy_state(&self) -> &[i32] {
        &self.fuzzy_state
    }

    pub fn clamp_events(&self) -> u64 {
        self.clamp_events
    }

    /// LUT update from the sensed temperatures; the derivative is the
    /// difference against the sample `s` periods back (cold start replicates
    /// the first sample).
    fn update_fuzzy(&mut self, sensed_t: &[f64], t_l: f64) {
        for (i, &t) in sensed_t.iter().enumerate() {
            let hist = &mut self.temp_history[i];
            if hist.is_empty() {
                for _ in 0..=self.s_steps {
                    hist.push_back(t);
                }
            }
            let t_old = *hist.front().expect("primed history");
            let dt = t - t_old;
            let inc = self.lut.increment(t, dt, t_l);
            self.fuzzy_state[i] = fuzzy_update(self.fuzzy_state[i], inc, self.fuzzy_floor);
            hist.pop_front();
            hist.push_back(t);
        }
    }
}

impl Controller for FcaController {
    fn name(&self) -> &'static str {
        "FCA"
    }

    fn step(&mut self, inputs: &ControllerInputs) -> ControlCommand {
        let n_c = self.domains.n_cores();
        let (f_lo, f_hi) = (self.grid.f_min_ghz(), self.grid.f_max_ghz());

        // (1) fuzzy thermal capping of the targets.
        self.update_fuzzy(inputs.sensed_t, inputs.t_l);
        let capped: Vec<f64> = (0..n_c)
            .map(|i| {
                fca_cap_frequency(
                    inputs.f_target[i].clamp(f_lo, f_hi),
                    self.fuzzy_state[i],
                    &self.grid,
                )
            })
            .collect();

        // (2) Conv2P on the capped targets at the bound voltage of the
        // domain's maximum cap, so shared-rail static cost is priced in.
        let mut p_req = vec![0.0; n_c];
        for (_, cores) in self.domains.domains() {
            let m = cores.iter().map(|&c| capped[c]).fold(f64::MIN, f64::max);
            let v_b = self
                .grid
                .quad_bound()
                .eval(m)
                .clamp(self.grid.v_min(), self.grid.v_max());
            for &c in cores {
                p_req[c] = h_est(
                    capped[c],
                    v_b,
                    inputs.sensed_t[c],
                    inputs.workload_proxy[c],
                    &self.model,
                );
            }
        }

        // (3) per-domain power distribution.
        let dist = fca_power_distribute(
            &p_req,
            inputs.workload_proxy,
            inputs.sensed_t,
            &self.domains,
            inputs.p_budget,
            inputs.p_domain,
            self.temp_blend_gamma,
            self.p_floor,
        );
        if dist.floor_infeasible {
            self.floor_events += 1;
        }

        // (4) Conv2F by bisection per domain, then quantize and pick the
        // exact table voltage.
        let mut f = vec![0.0; n_c];
        let mut v_dom = vec![0.0; self.domains.n_domains()];
        for (d, cores) in self.domains.domains() {
            let granted: Vec<f64> = cores.iter().map(|&c| dist.granted[c]).collect();
            let temps: Vec<f64> = cores.iter().map(|&c| inputs.sensed_t[c]).collect();
            let omega: Vec<f64> = cores.iter().map(|&c| inputs.workload_proxy[c]).collect();
            let sol = conv2f_bisection(
                &granted,
                &temps,
                &omega,
                &self.model,
                &self.grid,
                self.bisect_tol,
            );
            self.clamp_events += sol.clamp_events as u64;
            let mut max_f = f_lo;
            for (k, &c) in cores.iter().enumerate() {
                // Never raise a core past its fuzzy cap: the solver may have
                // spare budget, but thermal capping already spoke.
                let fq = self
                    .grid
                    .quantize_down_with_snap(sol.f_cont[k].min(capped[c]), 1.5 * self.bisect_tol);
                f[c] = fq;
                max_f = max_f.max(fq);
            }
            v_dom[d] = self.grid.min_voltage_for(max_f).expect("grid frequency");

            // Refinement: the solver priced the grants at the polynomial
            // bound voltage; the exact table level is at most one step
            // lower, so re-invert each grant there and recover the slack
            // (still under the fuzzy cap and the rail's frequency cap).
            let v_exact = v_dom[d];
            if v_exact < sol.v_bound - 1e-12 {
                let cap_v = self.grid.max_frequency_at(v_exact).expect("grid level");
                for &c in cores {
                    let stat = h_est(0.0, v_exact, inputs.sensed_t[c], 0.0, &self.model);
                    let omega_c = inputs.workload_proxy[c].max(1e-15);
                    let f_cont = (dist.granted[c] - stat)
                        / (omega_c * crate::power::GHZ * v_exact * v_exact);
                    let refined = self
                        .grid
                        .quantize_down_with_snap(
                            f_cont.clamp(f_lo, cap_v).min(capped[c]),
                            1.5 * self.bisect_tol,
                        )
                        .max(f[c]);
                    f[c] = refined;
                }
                // The refinement never raises a core above the rail cap, so
                // the voltage level stays valid; it may only have grown more
                // headroom, never less.
                let new_max = cores.iter().map(|&c| f[c]).fold(f_lo, f64::max);
                v_dom[d] = self.grid.min_voltage_for(new_max).expect("grid frequency");
            }
        }

        ControlCommand {
            f_ghz: f,
            v_domain: v_dom,
        }
    }

    fn internals(&self) -> Vec<(&'static str, f64)> {
        let min_state = self.fuzzy_state.iter().cloned().min().unwrap_or(0);
        vec![
            ("fca_min_fuzzy_state", min_state as f64),
            ("fca_clamp_events", self.clamp_events as f64),
        ]
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::config::SimConfig;
    use crate::power::PowerReading;

    fn setup(n_c: usize, n_d: usize) -> (ControllerConfig, OperatingGrid, DomainMap, CorePowerParams) {
        let cfg = SimConfig::default();
        (
            cfg.controller.clone(),
            OperatingGrid::from_config(&cfg.grid).unwrap(),
            DomainMap::even_split(n_c, n_d).unwrap(),
            CorePowerParams::from_config(&cfg.power),
        )
    }

    fn reading(total: f64, n_d: usize) -> PowerReading {
        PowerReading {
            per_rail: vec![total / n_d as f64; n_d],
            total,
            timestamp: 0.0,
        }
    }

    #[test]
    fn cool_unconstrained_tracks_targets() {
        let (cfg, grid, domains, model) = setup(4, 2);
        let mut c = FcaController::new(&cfg, grid, domains, model);
        let rail = reading(10.0, 2);
        let targets = [3.45, 2.7, 0.4, 2.0];
        let inputs = ControllerInputs {
            sensed_t: &[45.0; 4],
            rail_power: &rail,
            f_target: &targets,
            p_budget: 500.0,
            p_domain: &[250.0, 250.0],
            workload_proxy: &[1.2e-9; 4],
            t_l: 85.0,
            now: 0.0,
        };
        let cmd = c.step(&inputs);
        assert_eq!(cmd.f_ghz, targets.to_vec());
        // Exact table voltage for the domain maxima.
        assert_eq!(cmd.v_domain[0], c.grid.min_voltage_for(3.45).unwrap());
        assert_eq!(cmd.v_domain[1], c.grid.min_voltage_for(2.0).unwrap());
    }

    #[test]
    fn zero_budget_floors_everything() {
        let (cfg, grid, domains, model) = setup(4, 1);
        let f_min = grid.f_min_ghz();
        let mut c = FcaController::new(&cfg, grid, domains, model);
        let rail = reading(30.0, 1);
        let inputs = ControllerInputs {
            sensed_t: &[55.0; 4],
            rail_power: &rail,
            f_target: &[3.45; 4],
            p_budget: 0.0,
            p_domain: &[0.0],
            workload_proxy: &[1.5e-9; 4],
            t_l: 85.0,
            now: 0.0,
        };
        let cmd = c.step(&inputs);
        assert!(cmd.f_ghz.iter().all(|&f| f == f_min), "{:?}", cmd.f_ghz);
    }

    #[test]
    fn hot_rising_core_gets_capped_next_period() {
        let (cfg, grid, domains, model) = setup(2, 1);
        let mut c = FcaController::new(&cfg, grid, domains, model);
        let rail = reading(20.0, 1);
        let mk = |t: [f64; 2]| (t, [3.45, 3.45]);
        // Prime history cool, then ramp core 0 across T_L with a rising slope.
        let mut last_f0 = 3.45;
        let temps_seq = [
            mk([70.0, 60.0]),
            mk([78.0, 60.0]),
            mk([86.0, 60.0]),
            mk([88.5, 60.0]),
        ];
        for (temps, targets) in temps_seq {
            let inputs = ControllerInputs {
                sensed_t: &temps,
                rail_power: &rail,
                f_target: &targets,
                p_budget: 500.0,
                p_domain: &[500.0],
                workload_proxy: &[1.5e-9; 2],
                t_l: 85.0,
                now: 0.0,
            };
            let cmd = c.step(&inputs);
            assert!(cmd.f_ghz[0] <= last_f0);
            last_f0 = cmd.f_ghz[0];
        }
        // Above T_L and rising: the frequency strictly decreased.
        assert!(last_f0 < 3.45);
        assert!(c.fuzzy_state()[0] < 0);
        // The cool core keeps its target.
        assert_eq!(c.fuzzy_state()[1], 0);
    }

    #[test]
    fn command_always_feasible_under_stress() {
        let (cfg, grid, domains, model) = setup(6, 2);
        let g2 = grid.clone();
        let d2 = domains.clone();
        let mut c = FcaController::new(&cfg, grid, domains, model);
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(77);
        for k in 0..400 {
            let temps: Vec<f64> = (0..6).map(|_| rng.random_range(35.0..100.0)).collect();
            let targets: Vec<f64> = (0..6)
                .map(|_| g2.quantize_down(rng.random_range(0.4..3.45)))
                .collect();
            let rail = reading(rng.random_range(5.0..200.0), 2);
            let proxy: Vec<f64> = (0..6).map(|_| rng.random_range(0.1e-9..1.6e-9)).collect();
            let inputs = ControllerInputs {
                sensed_t: &temps,
                rail_power: &rail,
                f_target: &targets,
                p_budget: rng.random_range(0.0..150.0),
                p_domain: &[rng.random_range(0.0..80.0), rng.random_range(0.0..80.0)],
                workload_proxy: &proxy,
                t_l: 85.0,
                now: k as f64 * 5e-4,
            };
            let cmd = c.step(&inputs);
            for (d, cores) in d2.domains() {
                for &core in cores {
                    assert!(g2.check_feasible(cmd.f_ghz[core], cmd.v_domain[d]).is_ok());
                }
            }
        }
    }
}
