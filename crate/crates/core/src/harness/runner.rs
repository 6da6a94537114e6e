//! The model-in-the-loop run: plant stepped at the simulation step,
//! controller invoked every control period, commands applied at the next
//! plant boundary, metrics accumulated along the way.

use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::actuators::{ActuatorState, ControlCommand, OperatingGrid};
use crate::config::SimConfig;
use crate::control::{make_controller, ControllerInputs};
use crate::error::Result;
use crate::power::{
    apply_process_variation, core_power, rail_power, CorePowerParams, PowerReading,
};
use crate::thermal::{
    build_thermal_network, discretize, sense_temperatures, CoolingKind, CoolingVariant,
    DiscreteThermalModel, Discretization, Floorplan, NoiseSpec, ThermalNetwork,
};
use crate::workload::{generate_trace, ClassCeff, WorkloadCursor};

use super::metrics::{Metrics, MetricsAccumulator};
use super::scenario::ResolvedCase;

/// Divergence guard: a state beyond this is recorded as thermal runaway.
const RUNAWAY_TEMP_C: f64 = 400.0;

/// Immutable per-battery assets: the operating grid (whose polynomial bound
/// fit is not free) and the discretized plants per cooling variant.
pub struct RunContext {
    pub cfg: SimConfig,
    pub grid: OperatingGrid,
    pub plants: Vec<(CoolingKind, DiscreteThermalModel)>,
    pub networks: Vec<(CoolingKind, ThermalNetwork)>,
    pub core_params: Vec<CorePowerParams>,
}

impl RunContext {
    pub fn new(cfg: &SimConfig) -> Result<Self> {
        let grid = OperatingGrid::from_config(&cfg.grid)?;
        let fp = Floorplan::from_config(&cfg.floorplan)?;
        let mut plants = Vec::new();
        let mut networks = Vec::new();
        for kind in [CoolingKind::Water, CoolingKind::Air, CoolingKind::Rack] {
            let params = match kind {
                CoolingKind::Water => cfg.cooling.water.clone(),
                CoolingKind::Air => cfg.cooling.air.clone(),
                CoolingKind::Rack => cfg.cooling.rack.clone(),
            };
            let net = build_thermal_network(
                &fp,
                &cfg.materials,
                &CoolingVariant::new(kind, params),
                cfg.harness.ambient_c,
            )?;
            plants.push((kind, discretize(&net, cfg.harness.plant_dt_s, Discretization::Exact)?));
            networks.push((kind, net));
        }
        // Process variation: one draw shared by the whole battery.
        let base = CorePowerParams::from_config(&cfg.power);
        let mut var_rng = ChaCha8Rng::seed_from_u64(cfg.power.variation_seed);
        let core_params = apply_process_variation(
            &base,
            cfg.power.variation_spread,
            cfg.n_cores(),
            &mut var_rng,
        )?;
        Ok(Self {
            cfg: cfg.clone(),
            grid,
            plants,
            networks,
            core_params,
        })
    }

    pub fn plant_for(&self, kind: CoolingKind) -> &DiscreteThermalModel {
        &self.plants.iter().find(|(k, _)| *k == kind).unwrap().1
    }

    pub fn network_for(&self, kind: CoolingKind) -> &ThermalNetwork {
        &self.networks.iter().find(|(k, _)| *k == kind).unwrap().1
    }
}

/// Complete per-step time series of one run.
#[derive(Debug, Clone, Default, Serialize, Deserialize)]
pub struct RunRecord {
    pub time_s: Vec<f64>,
    pub true_states: Vec<Vec<f64>>,
    pub sensed_t: Vec<Vec<f64>>,
    pub core_power_w: Vec<Vec<f64>>,
    pub rail_power_w: Vec<Vec<f64>>,
    pub f_target_ghz: Vec<Vec<f64>>,
    pub f_applied_ghz: Vec<Vec<f64>>,
    pub v_domain: Vec<Vec<f64>>,
    pub budget_w: Vec<f64>,
    pub state_layout: Vec<String>,
    pub controller_internals: Vec<Vec<(String, f64)>>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RunOutput {
    pub metrics: Metrics,
    #[serde(skip)]
    pub record: Option<RunRecord>,
}

/// Executes one resolved test case. `record` retains the full time series
/// (single-run exports); the battery path streams into the accumulator only.
pub fn run_test(ctx: &RunContext, resolved: &ResolvedCase, record: bool) -> Result<RunOutput> {
    let cfg = &ctx.cfg;
    let case = &resolved.case;
    let n_c = cfg.n_cores();
    let dt = cfg.harness.plant_dt_s;
    let every = cfg.harness.control_every;
    let ts = dt * every as f64;
    let steps = (case.duration_s / dt).round() as usize;
    let domains = &resolved.domain_map;

    // Per-run deterministic RNG streams derived from the case seed.
    let mut seed_rng = ChaCha8Rng::seed_from_u64(case.seed);
    let init_seed: u64 = seed_rng.random();
    let noise_seed: u64 = seed_rng.random();
    let trace_seeds: Vec<u64> = (0..n_c).map(|_| seed_rng.random()).collect();
    let mut noise_rng = ChaCha8Rng::seed_from_u64(noise_seed);
    let mut init_rng = ChaCha8Rng::seed_from_u64(init_seed);

    // Plant with per-iteration initial conditions.
    let mut plant = ctx.plant_for(case.cooling).clone();
    let t0 = init_rng.random_range(cfg.harness.init_temp_min_c..=cfg.harness.init_temp_max_c);
    let amb = cfg.harness.ambient_c;
    plant.set_uniform_state(amb + (t0 - amb) * 0.5);
    for i in 0..n_c {
        plant.state[crate::thermal::si_index(i)] = t0 + init_rng.random_range(-2.0..=2.0);
        plant.state[crate::thermal::cu_index(i)] = t0 + init_rng.random_range(-2.0..=2.0);
    }

    // Workload traces and cursors.
    let ceff = ClassCeff {
        vector: cfg.power.ceff_vector_f,
        intfloat: cfg.power.ceff_intfloat_f,
        idle: cfg.power.ceff_idle_f,
    };
    let trace_cycles = (case.duration_s * cfg.grid.f_max_ghz * crate::power::GHZ) as u64;
    let mut cursors: Vec<WorkloadCursor> = (0..n_c)
        .map(|i| {
            let mut rng = ChaCha8Rng::seed_from_u64(trace_seeds[i]);
            let trace = generate_trace(resolved.classes[i], trace_cycles, &ceff, &mut rng)
                .expect("valid trace");
            WorkloadCursor::new(Arc::new(trace))
        })
        .collect();

    // Actuators, controller, measurement state.
    let mut actuators = ActuatorState::new(&ctx.grid, domains);
    let mut controller = make_controller(
        case.algorithm,
        &cfg.controller,
        &ctx.grid,
        domains,
        &CorePowerParams::from_config(&cfg.power),
    );
    let noise = NoiseSpec {
        sigma: cfg.harness.noise_sigma_c,
    };

    let mut acc = MetricsAccumulator::new(n_c, cfg.controller.t_l_c, dt, ts);
    let mut rec = record.then(RunRecord::default);
    if let Some(r) = rec.as_mut() {
        r.state_layout = ctx.network_for(case.cooling).state_layout.clone();
    }

    // Measurement of the previous plant step, what the controller may see.
    let boot_powers: Vec<f64> = (0..n_c)
        .map(|i| {
            core_power(
                ctx.grid.f_min_ghz(),
                ctx.grid.v_min(),
                plant.state[crate::thermal::si_index(i)],
                cursors[i].current_ceff(),
                &ctx.core_params[i],
            )
        })
        .collect();
    let mut last_reading: PowerReading = rail_power(&boot_powers, domains, 0.0)?;

    // One-period-delayed workload proxy.
    let mut proxy: Vec<f64> = cursors.iter().map(|c| c.current_ceff()).collect();
    let mut period_weighted = vec![0.0f64; n_c];
    let mut period_cycles = vec![0u64; n_c];

    let mut pending: Option<(ControlCommand, usize)> = None;
    let mut solver_clamps_last: u64 = 0;

    // Hardware critical-temperature trip: above T_CRIT the platform forces
    // the lowest operating point regardless of the controller, releasing
    // with hysteresis. Runaway transients then show up as huge exceedances
    // instead of destroying the (simulated) part.
    let t_crit = cfg.controller.t_crit_c;
    let trip_release = t_crit - 5.0;
    let mut tripped = false;
    let mut trip_steps: u64 = 0;
    let trip_cmd = ControlCommand {
        f_ghz: vec![ctx.grid.f_min_ghz(); n_c],
        v_domain: vec![ctx.grid.v_min(); domains.n_domains()],
    };

    for k in 0..steps {
        let now = k as f64 * dt;
        let budget = resolved.budget_at(now);
        let sensed = sense_temperatures(&plant, noise, &mut noise_rng);
        let sensed_max = sensed.iter().cloned().fold(f64::MIN, f64::max);
        if tripped {
            if sensed_max < trip_release {
                tripped = false;
            }
        } else if sensed_max > t_crit {
            tripped = true;
        }

        if k % every == 0 {
            let p_domain = resolved.domain_budgets(budget);
            let inputs = ControllerInputs {
                sensed_t: &sensed,
                rail_power: &last_reading,
                f_target: &resolved.f_target,
                p_budget: budget,
                p_domain: &p_domain,
                workload_proxy: &proxy,
                t_l: cfg.controller.t_l_c,
                now,
            };
            let cmd = controller.step(&inputs);
            // Applied at the beginning of the next plant step.
            pending = Some((cmd, k + 1));
            // Refresh the proxy with the just-finished period.
            for i in 0..n_c {
                if period_cycles[i] > 0 {
                    proxy[i] = period_weighted[i] / period_cycles[i] as f64;
                }
                period_weighted[i] = 0.0;
                period_cycles[i] = 0;
            }
            acc.push_control_step(&resolved.f_target, actuators.applied_frequencies());
        }

        if tripped {
            actuators.apply_commands(&trip_cmd, now, &ctx.grid, domains)?;
            pending = None;
            trip_steps += 1;
        } else if let Some((cmd, at)) = pending.as_ref() {
            if *at == k {
                actuators.apply_commands(cmd, now, &ctx.grid, domains)?;
                pending = None;
            }
        }
        let (f_app, v_app) = actuators.effective(now, &ctx.grid, domains);
        let f_app = f_app.to_vec();
        let v_app = v_app.to_vec();

        // Workload consumption and per-core power at the applied point.
        let mut powers = vec![0.0; n_c];
        let mut diverged = false;
        for i in 0..n_c {
            let (avg_ceff, cycles) = cursors[i].consume_cycles(f_app[i], dt);
            period_weighted[i] += avg_ceff * cycles as f64;
            period_cycles[i] += cycles;
            let d = domains.domain_of(i).unwrap();
            let t_true = plant.state[crate::thermal::si_index(i)];
            let p = core_power(f_app[i], v_app[d], t_true, avg_ceff, &ctx.core_params[i]);
            if !p.is_finite() || t_true > RUNAWAY_TEMP_C {
                diverged = true;
            }
            powers[i] = p;
        }
        if diverged {
            acc.mark_aborted();
            break;
        }

        last_reading = rail_power(&powers, domains, now)?;
        let true_temps = plant.silicon_temps();
        acc.push_plant_step(&true_temps, &powers, Some(budget), &resolved.f_target);

        if let Some(r) = rec.as_mut() {
            r.time_s.push(now);
            r.true_states.push(plant.state.iter().cloned().collect());
            r.sensed_t.push(sensed.clone());
            r.core_power_w.push(powers.clone());
            r.rail_power_w.push(last_reading.per_rail.clone());
            r.f_target_ghz.push(resolved.f_target.clone());
            r.f_applied_ghz.push(f_app.clone());
            r.v_domain.push(v_app.clone());
            r.budget_w.push(budget);
            r.controller_internals.push(
                controller
                    .internals()
                    .into_iter()
                    .map(|(k, v)| (k.to_string(), v))
                    .collect(),
            );
        }

        plant.thermal_step(&powers, amb)?;
        solver_clamps_last = controller
            .internals()
            .iter()
            .find(|(name, _)| name.ends_with("clamp_events"))
            .map(|&(_, v)| v as u64)
            .unwrap_or(0);
    }

    let consumed: Vec<u64> = cursors.iter().map(|c| c.cycles_consumed()).collect();
    let metrics = acc.finalize(
        &consumed,
        actuators.violation_count(),
        solver_clamps_last,
        trip_steps,
    );
    Ok(RunOutput {
        metrics,
        record: rec,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::control::Algorithm;
    use crate::harness::scenario::{build_scenario, DomainScheme, TestCase, WorkloadScenario};

    fn quick_case(algorithm: Algorithm, seed: u64) -> TestCase {
        TestCase {
            workload: WorkloadScenario::MaxWl,
            cooling: CoolingKind::Water,
            domains: DomainScheme::FourD,
            algorithm,
            seed,
            n_cores: 9,
            duration_s: 0.1,
        }
    }

    #[test]
    fn short_run_completes_for_all_algorithms() {
        let cfg = SimConfig::default();
        let ctx = RunContext::new(&cfg).unwrap();
        for alg in Algorithm::all() {
            let resolved = build_scenario(&cfg, &quick_case(alg, 3)).unwrap();
            let out = run_test(&ctx, &resolved, false).unwrap();
            assert!(!out.metrics.aborted, "{alg:?} aborted");
            assert!(out.metrics.avg_temp > cfg.harness.ambient_c);
            assert!(out.metrics.total_energy > 0.0);
        }
    }

    #[test]
    fn identical_seeds_reproduce_metrics_exactly() {
        let cfg = SimConfig::default();
        let ctx = RunContext::new(&cfg).unwrap();
        for alg in Algorithm::all() {
            let resolved = build_scenario(&cfg, &quick_case(alg, 42)).unwrap();
            let a = run_test(&ctx, &resolved, false).unwrap();
            let b = run_test(&ctx, &resolved, false).unwrap();
            assert_eq!(a.metrics, b.metrics, "{alg:?} not reproducible");
        }
    }

    #[test]
    fn record_series_lengths_are_uniform() {
        let cfg = SimConfig::default();
        let ctx = RunContext::new(&cfg).unwrap();
        let resolved = build_scenario(&cfg, &quick_case(Algorithm::Fca, 7)).unwrap();
        let out = run_test(&ctx, &resolved, true).unwrap();
        let r = out.record.unwrap();
        let n = r.time_s.len();
        assert_eq!(n, 2000); // 0.1 s at 50 us
        assert_eq!(r.true_states.len(), n);
        assert_eq!(r.sensed_t.len(), n);
        assert_eq!(r.core_power_w.len(), n);
        assert_eq!(r.rail_power_w.len(), n);
        assert_eq!(r.f_applied_ghz.len(), n);
        assert_eq!(r.v_domain.len(), n);
        assert_eq!(r.budget_w.len(), n);
    }

    #[test]
    fn feasibility_scan_over_recorded_run() {
        let cfg = SimConfig::default();
        let ctx = RunContext::new(&cfg).unwrap();
        for alg in Algorithm::all() {
            let resolved = build_scenario(&cfg, &quick_case(alg, 9)).unwrap();
            let out = run_test(&ctx, &resolved, true).unwrap();
            let r = out.record.unwrap();
            for k in 0..r.time_s.len() {
                for (d, cores) in resolved.domain_map.domains() {
                    for &c in cores {
                        ctx.grid
                            .check_feasible(r.f_applied_ghz[k][c], r.v_domain[k][d])
                            .unwrap();
                    }
                }
            }
            assert_eq!(out.metrics.actuator_violations, 0, "{alg:?} emitted infeasible commands");
        }
    }
}
