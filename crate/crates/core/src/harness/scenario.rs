//! Test-case construction: workload scenarios, cooling variants, domain
//! configurations, budget schedules, and seeds resolved into a runnable case.

use serde::{Deserialize, Serialize};

use crate::actuators::DomainMap;
use crate::config::SimConfig;
use crate::control::Algorithm;
use crate::error::{Result, SimError};
use crate::power::{core_power, CorePowerParams};
use crate::thermal::CoolingKind;
use crate::workload::WorkloadClass;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum WorkloadScenario {
    /// Every core runs the vector workload at the maximum target frequency.
    MaxWl,
    /// Vector / int-float / idle groups at 3.45, 2.7, and 0.4 GHz targets;
    /// multi-core domains hold at least one core of each active group.
    MultiWl,
    /// Random varying workload on all cores, maximum frequency requested.
    CloudWl,
}

impl WorkloadScenario {
    pub fn label(&self) -> &'static str {
        match self {
            WorkloadScenario::MaxWl => "MAX-WL",
            WorkloadScenario::MultiWl => "MULTI-WL",
            WorkloadScenario::CloudWl => "CLOUD-WL",
        }
    }

    pub fn all() -> [WorkloadScenario; 3] {
        [
            WorkloadScenario::MaxWl,
            WorkloadScenario::MultiWl,
            WorkloadScenario::CloudWl,
        ]
    }
}

/// Voltage-domain configuration labels from the evaluation methodology.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum DomainScheme {
    /// All cores on one rail.
    OneD,
    /// Four rails.
    FourD,
    /// Nine rails.
    NineD,
    /// One rail per core (no voltage coupling).
    AllD,
}

impl DomainScheme {
    pub fn label(&self) -> &'static str {
        match self {
            DomainScheme::OneD => "1D",
            DomainScheme::FourD => "4D",
            DomainScheme::NineD => "9D",
            DomainScheme::AllD => "AD",
        }
    }

    pub fn all() -> [DomainScheme; 4] {
        [
            DomainScheme::OneD,
            DomainScheme::FourD,
            DomainScheme::NineD,
            DomainScheme::AllD,
        ]
    }

    pub fn domain_count(&self, n_cores: usize) -> usize {
        match self {
            DomainScheme::OneD => 1,
            DomainScheme::FourD => 4.min(n_cores),
            DomainScheme::NineD => 9.min(n_cores),
            DomainScheme::AllD => n_cores,
        }
    }
}

/// A fully specified test before resolution.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TestCase {
    pub workload: WorkloadScenario,
    pub cooling: CoolingKind,
    pub domains: DomainScheme,
    pub algorithm: Algorithm,
    pub seed: u64,
    pub n_cores: usize,
    pub duration_s: f64,
}

impl TestCase {
    pub fn label(&self) -> String {
        format!(
            "{}/{}/{}/{}/seed{}",
            self.algorithm.label(),
            self.workload.label(),
            self.cooling.label(),
            self.domains.label(),
            self.seed
        )
    }
}

/// A test case resolved against a configuration: every derived quantity a
/// run needs, deterministic in (config, case).
#[derive(Debug, Clone)]
pub struct ResolvedCase {
    pub case: TestCase,
    pub domain_map: DomainMap,
    pub classes: Vec<WorkloadClass>,
    pub f_target: Vec<f64>,
    /// (segment start time, chip budget W); per-domain budgets scale by core
    /// share.
    pub budget_schedule: Vec<(f64, f64)>,
}

impl ResolvedCase {
    pub fn budget_at(&self, t: f64) -> f64 {
        let mut current = self.budget_schedule[0].1;
        for &(start, b) in &self.budget_schedule {
            if t + 1e-12 >= start {
                current = b;
            }
        }
        current
    }

    pub fn domain_budgets(&self, p_b: f64) -> Vec<f64> {
        let n_c = self.domain_map.n_cores() as f64;
        self.domain_map
            .domains()
            .map(|(_, cores)| p_b * cores.len() as f64 / n_c)
            .collect()
    }
}

/// Reference chip power for the budget schedule: every core at the maximum
/// operating point with the vector workload, evaluated at the configured
/// reference temperature. (The literal uncontrolled steady state diverges
/// through the leakage feedback, so a fixed temperature anchors the scale.)
pub fn reference_power(cfg: &SimConfig) -> f64 {
    let params = CorePowerParams::from_config(&cfg.power);
    let p = core_power(
        cfg.grid.f_max_ghz,
        cfg.grid.v_max,
        cfg.harness.budget_ref_temp_c,
        cfg.power.ceff_vector_f,
        &params,
    );
    p * cfg.n_cores() as f64
}

/// Workload class of each core for a scenario.
fn assign_classes(
    scenario: WorkloadScenario,
    domain_map: &DomainMap,
    n_cores: usize,
) -> Vec<WorkloadClass> {
    match scenario {
        WorkloadScenario::MaxWl => vec![WorkloadClass::Vector; n_cores],
        WorkloadScenario::CloudWl => vec![WorkloadClass::Cloud; n_cores],
        WorkloadScenario::MultiWl => {
            let mut classes = vec![WorkloadClass::Idle; n_cores];
            let mut any_multi_core = false;
            for (_, cores) in domain_map.domains() {
                if cores.len() < 2 {
                    continue;
                }
                any_multi_core = true;
                // One core from each active group per domain, a fifth of the
                // domain when it is large; the rest idles.
                let n_active = (cores.len() / 5).max(1);
                for k in 0..cores.len() {
                    if k < n_active {
                        classes[cores[k]] = WorkloadClass::Vector;
                    } else if k < 2 * n_active {
                        classes[cores[k]] = WorkloadClass::IntFloat;
                    }
                }
            }
            if !any_multi_core {
                // Single-core domains cannot mix; keep the global group split.
                for (i, class) in classes.iter_mut().enumerate() {
                    *class = match i % 5 {
                        0 => WorkloadClass::Vector,
                        1 => WorkloadClass::IntFloat,
                        _ => WorkloadClass::Idle,
                    };
                }
            }
            classes
        }
    }
}

/// Resolves a test case against the configuration.
pub fn build_scenario(cfg: &SimConfig, case: &TestCase) -> Result<ResolvedCase> {
    let n_cores = cfg.n_cores();
    if case.n_cores != n_cores {
        return Err(SimError::Config(format!(
            "case expects {} cores, configuration provides {}",
            case.n_cores, n_cores
        )));
    }
    let n_d = case.domains.domain_count(n_cores);
    let domain_map = DomainMap::even_split(n_cores, n_d)?;
    let classes = assign_classes(case.workload, &domain_map, n_cores);
    let f_target: Vec<f64> = classes
        .iter()
        .map(|c| match c {
            WorkloadClass::Vector | WorkloadClass::Cloud => cfg.grid.f_max_ghz,
            WorkloadClass::IntFloat => 2.7,
            WorkloadClass::Idle => cfg.grid.f_min_ghz,
        })
        .collect();

    let p_ref = reference_power(cfg);
    let pattern = &cfg.harness.budget_pattern;
    if pattern.is_empty() {
        return Err(SimError::Config("budget pattern must be non-empty".into()));
    }
    let seg = case.duration_s / pattern.len() as f64;
    let budget_schedule = pattern
        .iter()
        .enumerate()
        .map(|(i, frac)| (i as f64 * seg, frac * p_ref))
        .collect();

    Ok(ResolvedCase {
        case: case.clone(),
        domain_map,
        classes,
        f_target,
        budget_schedule,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn case(workload: WorkloadScenario, domains: DomainScheme, n_cores: usize) -> TestCase {
        TestCase {
            workload,
            cooling: CoolingKind::Water,
            domains,
            algorithm: Algorithm::Fca,
            seed: 1,
            n_cores,
            duration_s: 2.0,
        }
    }

    #[test]
    fn multi_wl_mixes_every_multi_core_domain() {
        let cfg = SimConfig::default().with_grid_size(6, 6);
        let resolved =
            build_scenario(&cfg, &case(WorkloadScenario::MultiWl, DomainScheme::FourD, 36))
                .unwrap();
        for (_, cores) in resolved.domain_map.domains() {
            let has_vec = cores
                .iter()
                .any(|&c| resolved.classes[c] == WorkloadClass::Vector);
            let has_if = cores
                .iter()
                .any(|&c| resolved.classes[c] == WorkloadClass::IntFloat);
            assert!(has_vec && has_if, "domain missing an active group");
        }
        // The majority of the chip idles.
        let idle = resolved
            .classes
            .iter()
            .filter(|&&c| c == WorkloadClass::Idle)
            .count();
        assert!(idle > 18, "only {idle} idle cores");
    }

    #[test]
    fn all_domains_config_has_one_core_per_rail() {
        let cfg = SimConfig::default();
        let resolved =
            build_scenario(&cfg, &case(WorkloadScenario::MaxWl, DomainScheme::AllD, 9)).unwrap();
        assert_eq!(resolved.domain_map.n_domains(), 9);
    }

    #[test]
    fn deterministic_resolution() {
        let cfg = SimConfig::default();
        let c = case(WorkloadScenario::CloudWl, DomainScheme::FourD, 9);
        let a = build_scenario(&cfg, &c).unwrap();
        let b = build_scenario(&cfg, &c).unwrap();
        assert_eq!(a.classes, b.classes);
        assert_eq!(a.f_target, b.f_target);
        assert_eq!(a.budget_schedule, b.budget_schedule);
    }

    #[test]
    fn budget_schedule_changes_four_times() {
        let cfg = SimConfig::default();
        let resolved =
            build_scenario(&cfg, &case(WorkloadScenario::MaxWl, DomainScheme::OneD, 9)).unwrap();
        assert_eq!(resolved.budget_schedule.len(), 5);
        // Both increasing and decreasing steps appear.
        let budgets: Vec<f64> = resolved.budget_schedule.iter().map(|&(_, b)| b).collect();
        assert!(budgets.windows(2).any(|w| w[1] > w[0]));
        assert!(budgets.windows(2).any(|w| w[1] < w[0]));
        // Piecewise lookup.
        let seg = 2.0 / 5.0;
        assert_eq!(resolved.budget_at(0.0), budgets[0]);
        assert_eq!(resolved.budget_at(1.5 * seg), budgets[1]);
        assert_eq!(resolved.budget_at(1.999), budgets[4]);
    }

    #[test]
    fn core_count_mismatch_is_config_error() {
        let cfg = SimConfig::default();
        let bad = case(WorkloadScenario::MaxWl, DomainScheme::OneD, 16);
        assert!(build_scenario(&cfg, &bad).is_err());
    }
}
