use dtm_core::config::SimConfig;
use dtm_core::thermal::{build_thermal_network, CoolingKind, CoolingVariant, Floorplan};

fn main() {
    let mut cfg = SimConfig::default();
    let args: Vec<String> = std::env::args().collect();
    // args: sink_cap air_cap r_sink_air r_air_amb pcb_cap mb_cap
    if args.len() > 1 { cfg.materials.sink_capacitance_j_k = args[1].parse().unwrap(); }
    if args.len() > 2 { cfg.materials.air_capacitance_j_k = args[2].parse().unwrap(); }
    for kind in [CoolingKind::Water, CoolingKind::Air, CoolingKind::Rack] {
        let fp = Floorplan::from_config(&cfg.floorplan).unwrap();
        let params = match kind {
            CoolingKind::Water => cfg.cooling.water.clone(),
            CoolingKind::Air => cfg.cooling.air.clone(),
            CoolingKind::Rack => cfg.cooling.rack.clone(),
        };
        let net = build_thermal_network(&fp, &cfg.materials, &CoolingVariant::new(kind, params), 25.0).unwrap();
        let taus = net.time_constants();
        let fmt: Vec<String> = taus.iter().map(|t| format!("{t:.3e}")).collect();
        println!("{:?}: {}", kind, fmt.join(" "));
        // steady state at 8 W/core
        let ss = net.steady_state(&[8.0;9], 25.0).unwrap();
        let tmax = (0..9).map(|i| ss[2*i]).fold(f64::MIN, f64::max);
        let tmin = (0..9).map(|i| ss[2*i]).fold(f64::MAX, f64::min);
        println!("   ss@8W/core: die {:.1}..{:.1} sink {:.1} air {:.1}", tmin, tmax, ss[net.sink_index()], ss[net.air_index()]);
    }
}
// (appended) print the calibration fit when asked
