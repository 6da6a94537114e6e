//! Per-core power model with exponential leakage and process variation.
//!
//! `P = k_s0 + I_cc V K(T, V) + C_eff F V^2` with the leakage factor
//! `K(T, V) = exp(k_v V + k_T T + k_T0)`. The leakage coefficients are not
//! published for any real part; they are fitted against a small anchor set of
//! published operating-point deltas (see [`calibrate`]) at the critical
//! corner `(V_MAX, T_MAX)`.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::actuators::{DomainMap, OperatingGrid};
use crate::config::PowerConfig;
use crate::error::{Result, SimError};

pub const GHZ: f64 = 1e9;

/// Power-model coefficients of one core, including its process-variation
/// multipliers on static current and effective capacitance.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct CorePowerParams {
    /// Static floor, W.
    pub k_s0: f64,
    /// Static current, A.
    pub i_cc: f64,
    /// Leakage voltage coefficient, 1/V.
    pub k_v: f64,
    /// Leakage temperature coefficient, 1/degC.
    pub k_t: f64,
    /// Leakage offset.
    pub k_t0: f64,
    pub variation_scale_icc: f64,
    pub variation_scale_ceff: f64,
}

impl CorePowerParams {
    pub fn from_config(cfg: &PowerConfig) -> Self {
        Self {
            k_s0: cfg.k_s0,
            i_cc: cfg.i_cc,
            k_v: cfg.k_v,
            k_t: cfg.k_t,
            k_t0: cfg.k_t0,
            variation_scale_icc: 1.0,
            variation_scale_ceff: 1.0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.k_s0 < 0.0 || self.i_cc <= 0.0 {
            return Err(SimError::Config(format!(
                "k_s0 = {}, I_cc = {} out of range",
                self.k_s0, self.i_cc
            )));
        }
        if !(0.9..=1.1).contains(&self.variation_scale_icc)
            || !(0.9..=1.1).contains(&self.variation_scale_ceff)
        {
            return Err(SimError::Config("variation multiplier outside [0.9, 1.1]".into()));
        }
        Ok(())
    }
}

/// Leakage factor `K(T, V) = exp(k_v V + k_T T + k_T0)`, strictly increasing
/// in both temperature and voltage.
pub fn leakage_factor(t_c: f64, v: f64, p: &CorePowerParams) -> f64 {
    (p.k_v * v + p.k_t * t_c + p.k_t0).exp()
}

/// Static power of the exponential-leakage model, W.
pub fn static_power(t_c: f64, v: f64, p: &CorePowerParams) -> f64 {
    p.k_s0 + p.i_cc * p.variation_scale_icc * v * leakage_factor(t_c, v, p)
}

/// Static power with the leakage factor dropped (the linear reference model).
pub fn static_power_linear(v: f64, p: &CorePowerParams) -> f64 {
    p.k_s0 + p.i_cc * p.variation_scale_icc * v
}

/// Average power of one core over a simulation step, W.
///
/// `avg_ceff` is the cycle-averaged effective capacitance of the workload
/// executed during the step, in farads.
pub fn core_power(f_ghz: f64, v: f64, t_c: f64, avg_ceff: f64, p: &CorePowerParams) -> f64 {
    static_power(t_c, v, p) + p.variation_scale_ceff * avg_ceff * f_ghz * GHZ * v * v
}

/// Like [`core_power`] but refuses operating points outside the actuator grid
/// feasibility relation; the plant never evaluates silently wrong inputs.
pub fn core_power_checked(
    f_ghz: f64,
    v: f64,
    t_c: f64,
    avg_ceff: f64,
    p: &CorePowerParams,
    grid: &OperatingGrid,
) -> Result<f64> {
    grid.check_feasible(f_ghz, v)?;
    if avg_ceff < 0.0 {
        return Err(SimError::Constraint(format!("negative C_eff {avg_ceff}")));
    }
    Ok(core_power(f_ghz, v, t_c, avg_ceff, p))
}

/// Draws per-core multiplicative perturbations on I_cc and C_eff, uniform in
/// `[1 - spread, 1 + spread]`. The battery uses one fixed seed so the same
/// silicon is simulated across all tests.
pub fn apply_process_variation(
    base: &CorePowerParams,
    spread: f64,
    n_cores: usize,
    rng: &mut impl Rng,
) -> Result<Vec<CorePowerParams>> {
    if !(0.0..=0.1).contains(&spread) {
        return Err(SimError::Config(format!("variation spread {spread} outside [0, 0.1]")));
    }
    Ok((0..n_cores)
        .map(|_| {
            let mut p = *base;
            p.variation_scale_icc = 1.0 + rng.random_range(-spread..=spread);
            p.variation_scale_ceff = 1.0 + rng.random_range(-spread..=spread);
            p
        })
        .collect())
}

/// Power measurement as exposed to the controller: per-rail sums only.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PowerReading {
    /// W per voltage domain.
    pub per_rail: Vec<f64>,
    pub total: f64,
    /// Measurement timestamp, s.
    pub timestamp: f64,
}

/// Aggregates per-core powers into per-rail readings. Per-core power is never
/// observable downstream of this call.
pub fn rail_power(core_powers: &[f64], domains: &DomainMap, timestamp: f64) -> Result<PowerReading> {
    let mut per_rail = vec![0.0; domains.n_domains()];
    for (core, &p) in core_powers.iter().enumerate() {
        let d = domains
            .domain_of(core)
            .ok_or_else(|| SimError::Config(format!("core {core} not mapped to a domain")))?;
        per_rail[d] += p;
    }
    let total = per_rail.iter().sum();
    Ok(PowerReading {
        per_rail,
        total,
        timestamp,
    })
}

/// The published operating-point deltas the leakage fit reproduces.
#[derive(Debug, Clone, Copy)]
pub struct CalibrationAnchors {
    /// dP for 2.85 -> 2.90 GHz at the 0.90 V level, W.
    pub dp_same_volt_w: f64,
    /// dP for 2.90 GHz @ 0.90 V -> 2.95 GHz @ 0.95 V, W.
    pub dp_cross_volt_w: f64,
    /// P at minimum frequency and V_MAX, W.
    pub p_min_freq_w: f64,
    /// Static power ratio exponential/linear model at (V_MAX, T_MAX).
    pub leak_ratio: f64,
    /// Temperature at which the dP anchors are quoted, degC.
    pub anchor_temp_c: f64,
    pub v_max: f64,
    pub t_max_c: f64,
}

impl CalibrationAnchors {
    pub fn from_config(cfg: &PowerConfig) -> Self {
        Self {
            dp_same_volt_w: cfg.anchor_dp_same_volt_w,
            dp_cross_volt_w: cfg.anchor_dp_cross_volt_w,
            p_min_freq_w: cfg.anchor_p_min_freq_w,
            leak_ratio: cfg.anchor_leak_ratio,
            anchor_temp_c: cfg.anchor_temp_c,
            v_max: cfg.v_max,
            t_max_c: cfg.t_max_c,
        }
    }
}

#[derive(Debug, Clone)]
pub struct CalibrationResult {
    pub i_cc: f64,
    pub k_v: f64,
    pub k_t0: f64,
    pub ceff_vector_f: f64,
    /// Relative residual of each anchor under the fitted coefficients.
    pub residuals: Vec<(String, f64)>,
}

/// Fits `(I_cc, k_v, k_T0, C_eff_vector)` so the anchor set holds exactly,
/// with `k_s0` and `k_T` pinned from the config. Four anchors, four free
/// coefficients: the least-squares optimum has zero residual and can be
/// computed by elimination plus one scalar bracketed root-find on `k_v`.
pub fn calibrate(
    anchors: &CalibrationAnchors,
    k_s0: f64,
    k_t: f64,
    grid: &OperatingGrid,
) -> Result<CalibrationResult> {
    let f_lo = 2.85;
    let f_hi = 2.90;
    let f_cross = 2.95;
    let v_same = grid.min_voltage_for(f_hi)?;
    let v_cross = grid.min_voltage_for(f_cross)?;
    let f_min = grid.f_min_ghz();

    // Anchor 1 pins the vector-class dynamic capacitance alone.
    let ceff = anchors.dp_same_volt_w / ((f_hi - f_lo) * GHZ * v_same * v_same);

    // Anchor 3: static part at (V_MAX, anchor temp).
    let s_anchor = anchors.p_min_freq_w
        - k_s0
        - ceff * f_min * GHZ * anchors.v_max * anchors.v_max;
    if s_anchor <= 0.0 {
        return Err(SimError::Numerical("anchor set leaves no static headroom".into()));
    }

    // Anchor 4: ratio at (V_MAX, T_MAX) fixes I_cc given k_T.
    let s_tmax = s_anchor * (k_t * (anchors.t_max_c - anchors.anchor_temp_c)).exp();
    let i_cc = ((k_s0 + s_tmax) / anchors.leak_ratio - k_s0) / anchors.v_max;
    if i_cc <= 0.0 {
        return Err(SimError::Numerical(format!("fit produced I_cc = {i_cc}")));
    }

    // Anchor 2: static jump across the voltage step fixes k_v.
    let dyn_diff = ceff * GHZ * (f_cross * v_cross * v_cross - f_hi * v_same * v_same);
    let static_diff = anchors.dp_cross_volt_w - dyn_diff;
    if static_diff <= 0.0 {
        return Err(SimError::Numerical("cross-voltage anchor dominated by dynamic power".into()));
    }
    let target = static_diff / s_anchor;
    let g = |k_v: f64| -> f64 {
        (v_cross * ((v_cross - anchors.v_max) * k_v).exp()
            - v_same * ((v_same - anchors.v_max) * k_v).exp())
            / anchors.v_max
    };
    let (mut lo, mut hi) = (0.0, 3.0);
    if (g(lo) - target) * (g(hi) - target) > 0.0 {
        return Err(SimError::Numerical(format!(
            "k_v target {target:.4} not bracketed on [0, 3]"
        )));
    }
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if (g(lo) - target) * (g(mid) - target) <= 0.0 {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    let k_v = 0.5 * (lo + hi);

    // Back-substitute the leakage offset.
    let e_anchor = s_anchor / (i_cc * anchors.v_max * (k_v * anchors.v_max).exp());
    let k_t0 = e_anchor.ln() - k_t * anchors.anchor_temp_c;

    let fitted = CorePowerParams {
        k_s0,
        i_cc,
        k_v,
        k_t: k_t,
        k_t0,
        variation_scale_icc: 1.0,
        variation_scale_ceff: 1.0,
    };
    let t_a = anchors.anchor_temp_c;
    let dp_same = core_power(f_hi, v_same, t_a, ceff, &fitted)
        - core_power(f_lo, v_same, t_a, ceff, &fitted);
    let dp_cross = core_power(f_cross, v_cross, t_a, ceff, &fitted)
        - core_power(f_hi, v_same, t_a, ceff, &fitted);
    let p_min = core_power(f_min, anchors.v_max, t_a, ceff, &fitted);
    let ratio = static_power(anchors.t_max_c, anchors.v_max, &fitted)
        / static_power_linear(anchors.v_max, &fitted);
    let residuals = vec![
        (
            "dp_same_volt".to_string(),
            (dp_same - anchors.dp_same_volt_w).abs() / anchors.dp_same_volt_w,
        ),
        (
            "dp_cross_volt".to_string(),
            (dp_cross - anchors.dp_cross_volt_w).abs() / anchors.dp_cross_volt_w,
        ),
        (
            "p_min_freq".to_string(),
            (p_min - anchors.p_min_freq_w).abs() / anchors.p_min_freq_w,
        ),
        ("leak_ratio".to_string(), (ratio - anchors.leak_ratio).abs() / anchors.leak_ratio),
    ];
    Ok(CalibrationResult {
        i_cc,
        k_v,
        k_t0,
        ceff_vector_f: ceff,
        residuals,
    })
}
