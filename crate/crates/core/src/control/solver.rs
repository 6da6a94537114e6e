//! Conversion of granted per-core power into a shared-voltage operating
//! point (Conv2F), solved by bisection on the domain's maximum frequency.
//!
//! For one domain the coupled system is
//!
//! ```text
//!   P_a,i = h_est(F_i, V(max_j F_j), ...)     i = 1..n_j
//! ```
//!
//! with `V` the quadratic upper bound on `f_V`. Fixing the scalar
//! `m = max_j F_j` makes every equation independent and linear in `F_i`, and
//! the defect `max_i F_i(m) - m` is strictly decreasing in `m`, so a plain
//! bisection to actuator precision (5e-3 GHz) solves the system without
//! derivatives.

use crate::actuators::OperatingGrid;
use crate::power::{static_power, CorePowerParams, GHZ};

#[derive(Debug, Clone)]
pub struct Conv2fResult {
    /// Continuous per-core frequency solution, GHz.
    pub f_cont: Vec<f64>,
    /// Bound voltage at the solved maximum frequency.
    pub v_bound: f64,
    /// Granted powers clamped into the feasible band.
    pub clamp_events: u32,
    /// Root was pinned at an interval boundary.
    pub boundary: bool,
}

/// `h_est`: the controller-side power model (no process variation).
pub fn h_est(f_ghz: f64, v: f64, t_c: f64, omega: f64, p: &CorePowerParams) -> f64 {
    static_power(t_c, v, p) + omega.max(1e-15) * f_ghz * GHZ * v * v
}

fn invert_h(p_w: f64, v: f64, t_c: f64, omega: f64, params: &CorePowerParams) -> f64 {
    (p_w - static_power(t_c, v, params)) / (omega.max(1e-15) * GHZ * v * v)
}

pub fn conv2f_bisection(
    granted: &[f64],
    sensed_t: &[f64],
    omega: &[f64],
    params: &CorePowerParams,
    grid: &OperatingGrid,
    tol_ghz: f64,
) -> Conv2fResult {
    let f_lo = grid.f_min_ghz();
    let f_hi = grid.f_max_ghz();
    let bound_v = |m: f64| grid.quad_bound().eval(m).clamp(grid.v_min(), grid.v_max());

    // Feasible band per core (existence condition for the system).
    let v_at_min = bound_v(f_lo);
    let v_at_max = bound_v(f_hi);
    let mut clamp_events = 0;
    let p_a: Vec<f64> = granted
        .iter()
        .enumerate()
        .map(|(i, &p)| {
            let lo = h_est(f_lo, v_at_min, sensed_t[i], omega[i], params);
            let hi = h_est(f_hi, v_at_max, sensed_t[i], omega[i], params);
            let clamped = p.clamp(lo, hi);
            if (clamped - p).abs() > 1e-12 {
                clamp_events += 1;
            }
            clamped
        })
        .collect();

    let solve_at = |m: f64| -> Vec<f64> {
        let v = bound_v(m);
        p_a.iter()
            .enumerate()
            .map(|(i, &p)| invert_h(p, v, sensed_t[i], omega[i], params).clamp(f_lo, f_hi))
            .collect()
    };
    let defect = |m: f64| -> f64 {
        solve_at(m)
            .into_iter()
            .fold(f64::NEG_INFINITY, f64::max)
            - m
    };

    let (mut lo, mut hi) = (f_lo, f_hi);
    let d_lo = defect(lo);
    let d_hi = defect(hi);
    let mut boundary = false;
    if d_lo <= 1e-9 {
        // Every core already solvable at the minimum frequency.
        hi = lo;
        boundary = true;
    } else if d_hi >= -1e-9 {
        lo = hi;
        boundary = true;
    } else {
        while hi - lo > tol_ghz {
            let mid = 0.5 * (lo + hi);
            if defect(mid) >= 0.0 {
                lo = mid;
            } else {
                hi = mid;
            }
        }
    }
    let m = 0.5 * (lo + hi);
    let mut f_cont = solve_at(m);
    for f in &mut f_cont {
        *f = f.min(m.max(f_lo));
    }
    Conv2fResult {
        f_cont,
        v_bound: bound_v(m),
        clamp_events,
        boundary,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::config::SimConfig;
    use approx::assert_relative_eq;

    fn setup() -> (OperatingGrid, CorePowerParams) {
        let cfg = SimConfig::default();
        (
            OperatingGrid::from_config(&cfg.grid).unwrap(),
            CorePowerParams::from_config(&cfg.power),
        )
    }

    #[test]
    fn single_core_matches_closed_form_inversion() {
        let (grid, params) = setup();
        // Pick an interior operating point, compute its power, solve back.
        let f_true = 2.37;
        let t = 68.0;
        let omega = 1.2e-9;
        let v = grid.quad_bound().eval(f_true);
        let p = h_est(f_true, v, t, omega, &params);
        let out = conv2f_bisection(&[p], &[t], &[omega], &params, &grid, 5e-3);
        assert!(!out.boundary);
        assert_eq!(out.clamp_events, 0);
        assert!(
            (out.f_cont[0] - f_true).abs() <= 5e-3,
            "got {} want {}",
            out.f_cont[0],
            f_true
        );
    }

    #[test]
    fn max_band_power_pins_the_top() {
        let (grid, params) = setup();
        let t = [75.0; 3];
        let omega = [1.5e-9; 3];
        let p_max = h_est(grid.f_max_ghz(), grid.v_max(), 75.0, 1.5e-9, &params);
        let out = conv2f_bisection(&[p_max + 5.0; 3], &t, &omega, &params, &grid, 5e-3);
        assert_eq!(out.clamp_events, 3);
        for f in &out.f_cont {
            assert_relative_eq!(*f, grid.f_max_ghz(), epsilon = 5e-3);
            assert_relative_eq!(
                grid.quantize_down_with_snap(*f, 7.5e-3),
                grid.f_max_ghz(),
                epsilon = 1e-12
            );
        }
        assert_relative_eq!(out.v_bound, grid.v_max(), epsilon = 1e-9);
    }

    #[test]
    fn starved_domain_pins_the_bottom() {
        let (grid, params) = setup();
        let out = conv2f_bisection(&[0.01, 0.01], &[80.0, 82.0], &[1e-9, 1e-9], &params, &grid, 5e-3);
        assert!(out.boundary);
        for f in &out.f_cont {
            assert_relative_eq!(*f, grid.f_min_ghz(), epsilon = 1e-9);
        }
    }

    #[test]
    fn residuals_small_on_interior_solutions() {
        let (grid, params) = setup();
        // Construct a consistent 4-core instance from known frequencies.
        let f_true = [2.1, 2.8, 1.4, 2.8];
        let t = [62.0, 71.0, 55.0, 80.0];
        let omega = [0.7e-9, 1.5e-9, 0.3e-9, 1.1e-9];
        let m = 2.8;
        let v = grid.quad_bound().eval(m);
        let p: Vec<f64> = (0..4)
            .map(|i| h_est(f_true[i], v, t[i], omega[i], &params))
            .collect();
        let out = conv2f_bisection(&p, &t, &omega, &params, &grid, 5e-3);
        let v_sol = out.v_bound;
        for i in 0..4 {
            let back = h_est(out.f_cont[i], v_sol, t[i], omega[i], &params);
            assert!(
                (back - p[i]).abs() / p[i] <= 0.01,
                "core {i}: residual {} of {}",
                (back - p[i]).abs(),
                p[i]
            );
            assert!((out.f_cont[i] - f_true[i]).abs() <= 5e-3);
        }
    }
}
