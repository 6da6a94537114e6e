use dtm_core::config::SimConfig;
use dtm_core::control::Algorithm;
use dtm_core::harness::{build_scenario, run_test, RunContext, TestCase, WorkloadScenario, DomainScheme};
use dtm_core::thermal::CoolingKind;

fn main() {
    let args: Vec<String> = std::env::args().collect();
    let alg = match args.get(1).map(|s| s.as_str()) { Some("EBA") => Algorithm::Eba, Some("VBA") => Algorithm::Vba, _ => Algorithm::Fca };
    let wl = match args.get(2).map(|s| s.as_str()) { Some("MULTI") => WorkloadScenario::MultiWl, Some("CLOUD") => WorkloadScenario::CloudWl, _ => WorkloadScenario::MaxWl };
    let cool = match args.get(3).map(|s| s.as_str()) { Some("AIR") => CoolingKind::Air, Some("RACK") => CoolingKind::Rack, _ => CoolingKind::Water };
    let dom = match args.get(4).map(|s| s.as_str()) { Some("1D") => DomainScheme::OneD, Some("9D") => DomainScheme::NineD, _ => DomainScheme::FourD };
    let cfg = SimConfig::default();
    let ctx = RunContext::new(&cfg).unwrap();
    let case = TestCase { workload: wl, cooling: cool, domains: dom, algorithm: alg, seed: 0, n_cores: 9, duration_s: 2.0 };
    let resolved = build_scenario(&cfg, &case).unwrap();
    let out = run_test(&ctx, &resolved, true).unwrap();
    let r = out.record.unwrap();
    println!("case {}   metrics: wlp {:.2} min {:.2} texmax {:.3} textime {:.3} pexavg {:.2} pextime {:.2}",
        case.label(), out.metrics.av_wlp, out.metrics.min_wlp, out.metrics.thermal_exceeded_max,
        out.metrics.thermal_exceeded_time, out.metrics.power_exceeded_avg, out.metrics.power_exceeded_time);
    // per-segment per-core mean applied F and mean true T, chip power
    let n = r.time_s.len();
    let segs = 5;
    for s in 0..segs {
        let (lo, hi) = (n * s / segs, n * (s + 1) / segs);
        let mut fmean = vec![0.0; 9];
        let mut tmean = vec![0.0; 9];
        let mut ptot = 0.0;
        let mut vmean = 0.0;
        for k in lo..hi {
            for i in 0..9 {
                fmean[i] += r.f_applied_ghz[k][i];
                tmean[i] += r.true_states[k][2 * i];
            }
            ptot += r.core_power_w[k].iter().sum::<f64>();
            vmean += r.v_domain[k].iter().cloned().fold(f64::MIN, f64::max);
        }
        let c = (hi - lo) as f64;
        println!("seg{} budget {:6.1}  Ptot {:6.1}  Vmax {:.3}", s, r.budget_w[lo + 1], ptot / c, vmean / c);
        println!("  F: {}", fmean.iter().map(|f| format!("{:.2}", f / c)).collect::<Vec<_>>().join(" "));
        println!("  T: {}", tmean.iter().map(|t| format!("{:.1}", t / c)).collect::<Vec<_>>().join(" "));
    }
}
