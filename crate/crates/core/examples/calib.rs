use dtm_core::actuators::OperatingGrid;
use dtm_core::config::SimConfig;
use dtm_core::power::{calibrate, CalibrationAnchors};

fn main() {
    let cfg = SimConfig::default();
    let grid = OperatingGrid::from_config(&cfg.grid).unwrap();
    let anchors = CalibrationAnchors::from_config(&cfg.power);
    let fit = calibrate(&anchors, cfg.power.k_s0, cfg.power.k_t, &grid).unwrap();
    println!("i_cc   = {:.16e}", fit.i_cc);
    println!("k_v    = {:.16e}", fit.k_v);
    println!("k_t0   = {:.16e}", fit.k_t0);
    println!("ceff_v = {:.16e}", fit.ceff_vector_f);
    for (n, r) in &fit.residuals {
        println!("residual {n}: {r:.3e}");
    }
    let q = grid.quad_bound();
    println!("quad: k1={:.6} k0={:.6} scale={:.6}", q.k1, q.k0, q.freq_scale);
    let slack = grid.freq_levels().iter().map(|&f| q.eval(f) - grid.min_voltage_for(f).unwrap()).fold(f64::MIN, f64::max);
    println!("max slack = {slack:.4}");
}
