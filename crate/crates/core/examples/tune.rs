use dtm_core::config::SimConfig;
use dtm_core::control::Algorithm;
use dtm_core::harness::{aggregate, battery_cases, run_battery, GroupBy, RunContext};

fn main() {
    let seeds: usize = std::env::args().nth(1).and_then(|s| s.parse().ok()).unwrap_or(3);
    let cfg = SimConfig::default();
    let ctx = RunContext::new(&cfg).unwrap();
    let cases = battery_cases(&cfg, &Algorithm::all(), seeds);
    eprintln!("running {} cases...", cases.len());
    let t0 = std::time::Instant::now();
    let battery = run_battery(&ctx, &cases).unwrap();
    eprintln!("battery took {:.1} s", t0.elapsed().as_secs_f64());
    let aborted = battery.cases.iter().filter(|c| c.metrics.aborted).count();
    eprintln!("aborted runs: {aborted}");
    for alg in ["FCA", "EBA", "VBA"] {
        let trips: u64 = battery.cases.iter().filter(|c| c.case.algorithm.label() == alg).map(|c| c.metrics.trip_steps).sum();
        eprintln!("{alg} total trip steps: {trips}");
    }
    let agg = aggregate(&battery.cases, GroupBy::Algorithm);
    println!("{:<28} {:>10} {:>10} {:>10}", "metric", "FCA", "EBA", "VBA");
    for m in ["thermal_exceeded_max", "thermal_exceeded_time", "power_exceeded_avg", "power_exceeded_time", "target_l2", "av_wlp", "min_wlp", "avg_temp"] {
        println!(
            "{:<28} {:>10.3} {:>10.3} {:>10.3}",
            m, agg["FCA"][m].mean, agg["EBA"][m].mean, agg["VBA"][m].mean
        );
    }
    for gb in [GroupBy::AlgorithmWorkload, GroupBy::AlgorithmDomains, GroupBy::AlgorithmCooling] {
        println!("\n== av_wlp / thermal_exceeded_max / power_exceeded_avg by {:?}", gb);
        let agg = aggregate(&battery.cases, gb);
        for (key, ms) in &agg {
            println!(
                "{:<22} wlp {:>7.2}  texmax {:>7.2}  pexavg {:>7.2}  textime {:>6.2}",
                key, ms["av_wlp"].mean, ms["thermal_exceeded_max"].mean, ms["power_exceeded_avg"].mean, ms["thermal_exceeded_time"].mean
            );
        }
    }
}
