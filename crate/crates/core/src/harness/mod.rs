//! Test battery orchestration: the full evaluation grid (workloads x
//! coolings x domain configurations x algorithms x seeds), metric
//! aggregation, and result export.

pub mod export;
pub mod metrics;
pub mod runner;
pub mod scenario;

pub use metrics::{summarize, Metrics, MetricsAccumulator, Summary, METRIC_NAMES};
pub use runner::{run_test, RunContext, RunOutput, RunRecord};
pub use scenario::{
    build_scenario, reference_power, DomainScheme, ResolvedCase, TestCase, WorkloadScenario,
};

use std::collections::BTreeMap;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::config::SimConfig;
use crate::control::Algorithm;
use crate::error::Result;
use crate::thermal::CoolingKind;

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CaseResult {
    pub case: TestCase,
    pub metrics: Metrics,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct BatteryResult {
    pub config_digest: String,
    pub cases: Vec<CaseResult>,
}

/// FNV-1a digest of the canonical configuration text; pins reproducibility.
pub fn config_digest(cfg: &SimConfig) -> String {
    let text = cfg.to_toml_string();
    let mut hash: u64 = 0xcbf2_9ce4_8422_2325;
    for b in text.as_bytes() {
        hash ^= u64::from(*b);
        hash = hash.wrapping_mul(0x0000_0100_0000_01b3);
    }
    format!("{hash:016x}")
}

/// The full evaluation grid for the given algorithms and iteration count.
pub fn battery_cases(cfg: &SimConfig, algorithms: &[Algorithm], iterations: usize) -> Vec<TestCase> {
    let mut cases = Vec::new();
    for &algorithm in algorithms {
        for workload in WorkloadScenario::all() {
            for cooling in [CoolingKind::Water, CoolingKind::Air, CoolingKind::Rack] {
                for domains in DomainScheme::all() {
                    for seed in 0..iterations as u64 {
                        cases.push(TestCase {
                            workload,
                            cooling,
                            domains,
                            algorithm,
                            seed,
                            n_cores: cfg.n_cores(),
                            duration_s: cfg.harness.duration_s,
                        });
                    }
                }
            }
        }
    }
    cases
}

/// Runs every case (in parallel; each run owns its state) and collects the
/// results in deterministic case order.
pub fn run_battery(ctx: &RunContext, cases: &[TestCase]) -> Result<BatteryResult> {
    let outputs: Vec<Result<CaseResult>> = cases
        .par_iter()
        .map(|case| {
            let resolved = build_scenario(&ctx.cfg, case)?;
            let out = run_test(ctx, &resolved, false)?;
            Ok(CaseResult {
                case: case.clone(),
                metrics: out.metrics,
            })
        })
        .collect();
    let mut results = Vec::with_capacity(outputs.len());
    for o in outputs {
        results.push(o?);
    }
    Ok(BatteryResult {
        config_digest: config_digest(&ctx.cfg),
        cases: results,
    })
}

/// Grouping axes mirroring the paper's figures.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum GroupBy {
    Algorithm,
    AlgorithmWorkload,
    AlgorithmDomains,
    AlgorithmCooling,
    AlgorithmSeed,
}

impl GroupBy {
    pub fn all() -> [GroupBy; 5] {
        [
            GroupBy::Algorithm,
            GroupBy::AlgorithmWorkload,
            GroupBy::AlgorithmDomains,
            GroupBy::AlgorithmCooling,
            GroupBy::AlgorithmSeed,
        ]
    }

    pub fn label(&self) -> &'static str {
        match self {
            GroupBy::Algorithm => "algorithm",
            GroupBy::AlgorithmWorkload => "algorithm_workload",
            GroupBy::AlgorithmDomains => "algorithm_domains",
            GroupBy::AlgorithmCooling => "algorithm_cooling",
            GroupBy::AlgorithmSeed => "algorithm_seed",
        }
    }

    fn key(&self, case: &TestCase) -> String {
        match self {
            GroupBy::Algorithm => case.algorithm.label().to_string(),
            GroupBy::AlgorithmWorkload => {
                format!("{}/{}", case.algorithm.label(), case.workload.label())
            }
            GroupBy::AlgorithmDomains => {
                format!("{}/{}", case.algorithm.label(), case.domains.label())
            }
            GroupBy::AlgorithmCooling => {
                format!("{}/{}", case.algorithm.label(), case.cooling.label())
            }
            GroupBy::AlgorithmSeed => format!("{}/seed{}", case.algorithm.label(), case.seed),
        }
    }
}

pub type GroupedSummaries = BTreeMap<String, BTreeMap<String, Summary>>;

/// Grouped summary statistics over all runs in deterministic key order.
pub fn aggregate(results: &[CaseResult], group_by: GroupBy) -> GroupedSummaries {
    assert!(!results.is_empty(), "cannot aggregate an empty battery");
    let mut grouped: BTreeMap<String, Vec<&Metrics>> = BTreeMap::new();
    for r in results {
        grouped.entry(group_by.key(&r.case)).or_default().push(&r.metrics);
    }
    grouped
        .into_iter()
        .map(|(key, ms)| {
            let per_metric: BTreeMap<String, Summary> = METRIC_NAMES
                .iter()
                .map(|&name| {
                    let vals: Vec<f64> = ms.iter().map(|m| m.get(name).unwrap()).collect();
                    (name.to_string(), summarize(&vals))
                })
                .collect();
            (key, per_metric)
        })
        .collect()
}
