//! Result export: per-run CSV time series, battery JSON summaries, and the
//! long-format CSV for plotting.

use std::io::Write;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Result, SimError};

use super::runner::RunRecord;
use super::{aggregate, BatteryResult, GroupBy, GroupedSummaries};

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct BatterySummary {
    pub config_digest: String,
    pub cases: Vec<super::CaseResult>,
    pub aggregates: Vec<(String, GroupedSummaries)>,
}

impl BatterySummary {
    pub fn from_battery(battery: &BatteryResult) -> Self {
        let aggregates = GroupBy::all()
            .iter()
            .map(|g| (g.label().to_string(), aggregate(&battery.cases, *g)))
            .collect();
        Self {
            config_digest: battery.config_digest.clone(),
            cases: battery.cases.clone(),
            aggregates,
        }
    }
}

/// Writes the battery summary as JSON; f64 metric values survive the round
/// trip exactly.
pub fn write_battery_json(summary: &BatterySummary, path: &Path) -> Result<()> {
    let file = std::fs::File::create(path).map_err(|e| SimError::io(path, e))?;
    serde_json::to_writer_pretty(std::io::BufWriter::new(file), summary)
        .map_err(|e| SimError::Config(format!("serialize {}: {e}", path.display())))
}

pub fn read_battery_json(path: &Path) -> Result<BatterySummary> {
    let text = std::fs::read_to_string(path).map_err(|e| SimError::io(path, e))?;
    serde_json::from_str(&text).map_err(|e| SimError::Config(format!("parse {}: {e}", path.display())))
}

/// Long-format CSV keyed by (algorithm, scenario, cooling, domains, seed,
/// metric), one value per row - the plot-ready distribution dump.
pub fn write_long_csv(battery: &BatteryResult, path: &Path) -> Result<()> {
    let mut w = csv::Writer::from_path(path).map_err(|e| SimError::Config(e.to_string()))?;
    w.write_record([
        "algorithm", "workload", "cooling", "domains", "seed", "metric", "value",
    ])
    .map_err(|e| SimError::Config(e.to_string()))?;
    for r in &battery.cases {
        for name in super::METRIC_NAMES {
            w.write_record([
                r.case.algorithm.label(),
                r.case.workload.label(),
                r.case.cooling.label(),
                r.case.domains.label(),
                &r.case.seed.to_string(),
                name,
                &format!("{:.17e}", r.metrics.get(name).unwrap()),
            ])
            .map_err(|e| SimError::Config(e.to_string()))?;
        }
    }
    w.flush().map_err(|e| SimError::io(path, e))?;
    Ok(())
}

/// Per-run CSV time series at the plant step, one row per step.
pub fn write_run_csv(record: &RunRecord, path: &Path) -> Result<()> {
    let file = std::fs::File::create(path).map_err(|e| SimError::io(path, e))?;
    let mut w = std::io::BufWriter::new(file);
    let n_states = record.state_layout.len();
    let n_cores = record.sensed_t.first().map_or(0, |v| v.len());
    let n_rails = record.rail_power_w.first().map_or(0, |v| v.len());

    let mut header = vec!["time_s".to_string(), "budget_w".to_string()];
    header.extend(record.state_layout.iter().map(|s| format!("true_{s}")));
    header.extend((0..n_cores).map(|i| format!("sensed_T_{i}")));
    header.extend((0..n_cores).map(|i| format!("P_core_{i}")));
    header.extend((0..n_rails).map(|d| format!("P_rail_{d}")));
    header.extend((0..n_cores).map(|i| format!("F_T_{i}")));
    header.extend((0..n_cores).map(|i| format!("F_a_{i}")));
    header.extend((0..n_rails).map(|d| format!("V_{d}")));
    writeln!(w, "{}", header.join(",")).map_err(|e| SimError::io(path, e))?;

    for k in 0..record.time_s.len() {
        let mut row: Vec<String> = Vec::with_capacity(header.len());
        row.push(format!("{:.9}", record.time_s[k]));
        row.push(format!("{:.6}", record.budget_w[k]));
        debug_assert_eq!(record.true_states[k].len(), n_states);
        for v in &record.true_states[k] {
            row.push(format!("{v:.6}"));
        }
        for v in &record.sensed_t[k] {
            row.push(format!("{v:.6}"));
        }
        for v in &record.core_power_w[k] {
            row.push(format!("{v:.6}"));
        }
        for v in &record.rail_power_w[k] {
            row.push(format!("{v:.6}"));
        }
        for v in &record.f_target_ghz[k] {
            row.push(format!("{v:.3}"));
        }
        for v in &record.f_applied_ghz[k] {
            row.push(format!("{v:.3}"));
        }
        for v in &record.v_domain[k] {
            row.push(format!("{v:.3}"));
        }
        writeln!(w, "{}", row.join(",")).map_err(|e| SimError::io(path, e))?;
    }
    w.flush().map_err(|e| SimError::io(path, e))?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::config::SimConfig;
    use crate::control::Algorithm;
    use crate::harness::runner::{run_test, RunContext};
    use crate::harness::scenario::{build_scenario, DomainScheme, TestCase, WorkloadScenario};
    use crate::thermal::CoolingKind;

    fn tiny_battery() -> (RunContext, BatteryResult) {
        let mut cfg = SimConfig::default();
        cfg.harness.duration_s = 0.05;
        let ctx = RunContext::new(&cfg).unwrap();
        let cases: Vec<TestCase> = [Algorithm::Vba, Algorithm::Fca]
            .iter()
            .map(|&algorithm| TestCase {
                workload: WorkloadScenario::MaxWl,
                cooling: CoolingKind::Water,
                domains: DomainScheme::NineD,
                algorithm,
                seed: 5,
                n_cores: 9,
                duration_s: 0.05,
            })
            .collect();
        let battery = super::super::run_battery(&ctx, &cases).unwrap();
        (ctx, battery)
    }

    #[test]
    fn json_round_trip_preserves_metrics_exactly() {
        let (_ctx, battery) = tiny_battery();
        let summary = BatterySummary::from_battery(&battery);
        let dir = std::env::temp_dir().join("dtm_export_test");
        std::fs::create_dir_all(&dir).unwrap();
        let path = dir.join("summary.json");
        write_battery_json(&summary, &path).unwrap();
        let back = read_battery_json(&path).unwrap();
        assert_eq!(back.config_digest, summary.config_digest);
        for (a, b) in back.cases.iter().zip(&summary.cases) {
            assert_eq!(a.metrics, b.metrics);
        }
        // Aggregates digest the same data.
        assert_eq!(back.aggregates.len(), summary.aggregates.len());
    }

    #[test]
    fn long_csv_has_expected_shape() {
        let (_ctx, battery) = tiny_battery();
        let dir = std::env::temp_dir().join("dtm_export_test");
        std::fs::create_dir_all(&dir).unwrap();
        let path = dir.join("long.csv");
        write_long_csv(&battery, &path).unwrap();
        let text = std::fs::read_to_string(&path).unwrap();
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines.len(), 1 + battery.cases.len() * super::super::METRIC_NAMES.len());
        assert_eq!(lines[0].split(',').count(), 7);
    }

    #[test]
    fn run_csv_column_count_matches_manifest() {
        let mut cfg = SimConfig::default();
        cfg.harness.duration_s = 0.01;
        let ctx = RunContext::new(&cfg).unwrap();
        let case = TestCase {
            workload: WorkloadScenario::CloudWl,
            cooling: CoolingKind::Air,
            domains: DomainScheme::FourD,
            algorithm: Algorithm::Eba,
            seed: 0,
            n_cores: 9,
            duration_s: 0.01,
        };
        let resolved = build_scenario(&cfg, &case).unwrap();
        let out = run_test(&ctx, &resolved, true).unwrap();
        let dir = std::env::temp_dir().join("dtm_export_test");
        std::fs::create_dir_all(&dir).unwrap();
        let path = dir.join("run.csv");
        write_run_csv(out.record.as_ref().unwrap(), &path).unwrap();
        let text = std::fs::read_to_string(&path).unwrap();
        let mut lines = text.lines();
        let header_cols = lines.next().unwrap().split(',').count();
        // time + budget + states + sensed + core P + rails + F_T + F_a + V
        let expect = 2 + 22 + 9 + 9 + 4 + 9 + 9 + 4;
        assert_eq!(header_cols, expect);
        for line in lines {
            assert_eq!(line.split(',').count(), expect);
        }
    }
}
