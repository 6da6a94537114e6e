//! Discrete frequency/voltage actuation: the operating grid, the F-V
//! feasibility relation, shared voltage domains, and PLL/VRM transition
//! behavior.
//!
//! Feasibility (`eq. F-V`): a core may run at `F` only if
//! `F_min <= F <= F_max(V)` for its domain voltage `V`. `f_V` is the
//! step-wise monotone inverse: the minimum grid voltage sustaining `F`.

use serde::{Deserialize, Serialize};

use crate::config::GridConfig;
use crate::error::{Result, SimError};

const GRID_EPS: f64 = 1e-9;

/// Discrete frequency and voltage levels plus the F-V tables.
#[derive(Debug, Clone)]
pub struct OperatingGrid {
    freq_levels: Vec<f64>,
    volt_levels: Vec<f64>,
    fmax_per_volt: Vec<f64>,
    quad_bound: QuadBound,
    vrm_delay_s: f64,
}

/// Continuous upper bound on `f_V`: `bound(F) = x^2 + k1 x + k0` with
/// `x = F * freq_scale`. The frequency scale is fitted with the coefficients
/// so the parabola can hug the step-wise table tightly; `freq_scale = 0`
/// degenerates to the constant `k0` (single-voltage grids).
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct QuadBound {
    pub k1: f64,
    pub k0: f64,
    pub freq_scale: f64,
}

impl QuadBound {
    pub fn eval(&self, f_ghz: f64) -> f64 {
        let x = f_ghz * self.freq_scale;
        x * x + self.k1 * x + self.k0
    }

    /// Derivative in volts per GHz.
    pub fn slope(&self, f_ghz: f64) -> f64 {
        (2.0 * f_ghz * self.freq_scale + self.k1) * self.freq_scale
    }
}

impl OperatingGrid {
    pub fn from_config(cfg: &GridConfig) -> Result<Self> {
        let n_f = ((cfg.f_max_ghz - cfg.f_min_ghz) / cfg.f_step_ghz).round() as usize + 1;
        let freq_levels: Vec<f64> = (0..n_f)
            .map(|i| cfg.f_min_ghz + i as f64 * cfg.f_step_ghz)
            .collect();
        let n_v = ((cfg.v_max - cfg.v_min) / cfg.v_step).round() as usize + 1;
        let volt_levels: Vec<f64> = (0..n_v).map(|i| cfg.v_min + i as f64 * cfg.v_step).collect();
        if cfg.fmax_per_volt_ghz.len() != n_v {
            return Err(SimError::Config(format!(
                "fmax table has {} entries for {} voltage levels",
                cfg.fmax_per_volt_ghz.len(),
                n_v
            )));
        }
        let fmax = cfg.fmax_per_volt_ghz.clone();
        if fmax.windows(2).any(|w| w[1] <= w[0]) {
            return Err(SimError::Config("fmax_per_volt must be strictly increasing".into()));
        }
        if fmax[0] + GRID_EPS < cfg.f_min_ghz {
            return Err(SimError::Config(
                "F_min must be sustainable at the lowest voltage".into(),
            ));
        }
        if (fmax[n_v - 1] - cfg.f_max_ghz).abs() > GRID_EPS {
            return Err(SimError::Config(
                "top voltage level must sustain the global F_max".into(),
            ));
        }
        let mut grid = Self {
            freq_levels,
            volt_levels,
            fmax_per_volt: fmax,
            quad_bound: QuadBound {
                k1: 0.0,
                k0: cfg.v_max,
                freq_scale: 0.0,
            },
            vrm_delay_s: cfg.vrm_delay_s,
        };
        grid.quad_bound = fit_quadratic_fv_bound(&grid)?;
        Ok(grid)
    }

    pub fn f_min_ghz(&self) -> f64 {
        self.freq_levels[0]
    }

    pub fn f_max_ghz(&self) -> f64 {
        *self.freq_levels.last().unwrap()
    }

    pub fn v_min(&self) -> f64 {
        self.volt_levels[0]
    }

    pub fn v_max(&self) -> f64 {
        *self.volt_levels.last().unwrap()
    }

    pub fn freq_levels(&self) -> &[f64] {
        &self.freq_levels
    }

    pub fn volt_levels(&self) -> &[f64] {
        &self.volt_levels
    }

    pub fn n_volt_levels(&self) -> usize {
        self.volt_levels.len()
    }

    pub fn quad_bound(&self) -> QuadBound {
        self.quad_bound
    }

    pub fn vrm_delay_s(&self) -> f64 {
        self.vrm_delay_s
    }

    pub fn volt_level_index(&self, v: f64) -> Result<usize> {
        self.volt_levels
            .iter()
            .position(|&lv| (lv - v).abs() < GRID_EPS)
            .ok_or_else(|| SimError::Range(format!("{v} V is not a grid voltage level")))
    }

    /// Smallest grid voltage whose frequency cap covers `f_ghz`.
    pub fn min_voltage_for(&self, f_ghz: f64) -> Result<f64> {
        if f_ghz > self.f_max_ghz() + GRID_EPS {
            return Err(SimError::Range(format!(
                "{f_ghz} GHz above the global maximum {}",
                self.f_max_ghz()
            )));
        }
        if f_ghz < self.f_min_ghz() - GRID_EPS {
            return Err(SimError::Range(format!(
                "{f_ghz} GHz below the system minimum {}",
                self.f_min_ghz()
            )));
        }
        let idx = self
            .fmax_per_volt
            .iter()
            .position(|&cap| cap + GRID_EPS >= f_ghz)
            .expect("top level covers F_max");
        Ok(self.volt_levels[idx])
    }

    /// Frequency cap at a grid voltage level.
    pub fn max_frequency_at(&self, v: f64) -> Result<f64> {
        Ok(self.fmax_per_volt[self.volt_level_index(v)?])
    }

    /// Largest grid frequency at most `f_ghz + snap`; clamps into the grid
    /// range. `snap` absorbs root-finder tolerance so near-exact hits do not
    /// fall one level short.
    pub fn quantize_down_with_snap(&self, f_ghz: f64, snap: f64) -> f64 {
        let f = f_ghz + snap;
        if f <= self.f_min_ghz() {
            return self.f_min_ghz();
        }
        if f >= self.f_max_ghz() {
            return self.f_max_ghz();
        }
        let step = self.freq_levels[1] - self.freq_levels[0];
        let idx = ((f - self.freq_levels[0]) / step).floor() as usize;
        self.freq_levels[idx.min(self.freq_levels.len() - 1)]
    }

    pub fn quantize_down(&self, f_ghz: f64) -> f64 {
        self.quantize_down_with_snap(f_ghz, GRID_EPS)
    }

    pub fn is_grid_frequency(&self, f_ghz: f64) -> bool {
        self.freq_levels.iter().any(|&f| (f - f_ghz).abs() < GRID_EPS)
    }

    /// Checks the feasibility relation for an applied pair.
    pub fn check_feasible(&self, f_ghz: f64, v: f64) -> Result<()> {
        let cap = self.max_frequency_at(v)?;
        if f_ghz < self.f_min_ghz() - GRID_EPS || f_ghz > cap + GRID_EPS {
            return Err(SimError::Constraint(format!(
                "{f_ghz} GHz outside [{}, {cap}] at {v} V",
                self.f_min_ghz()
            )));
        }
        Ok(())
    }
}

/// Fits the minimal-slack quadratic upper bound on the `(F, f_V(F))` table
/// over all grid frequencies.
///
/// For a trial curvature the best dominating line over the residuals is
/// searched over support pairs; the curvature itself is then minimized by
/// golden-section search on the resulting max slack.
pub fn fit_quadratic_fv_bound(grid: &OperatingGrid) -> Result<QuadBound> {
    let points: Vec<(f64, f64)> = grid
        .freq_levels
        .iter()
        .map(|&f| (f, grid.min_voltage_for(f).expect("grid frequency")))
        .collect();
    if grid.volt_levels.len() == 1 {
        return Ok(QuadBound {
            k1: 0.0,
            k0: grid.volt_levels[0],
            freq_scale: 0.0,
        });
    }

    // Best dominating line b*F + c over residuals z_i = y_i - a*F_i^2,
    // by support-pair enumeration.
    let line_fit = |a: f64| -> (f64, f64, f64) {
        let z: Vec<(f64, f64)> = points.iter().map(|&(f, y)| (f, y - a * f * f)).collect();
        let mut best = (0.0, f64::INFINITY, f64::INFINITY); // (b, c, slack)
        for i in 0..z.len() {
            for j in i..z.len() {
                let (b, c) = if i == j {
                    (0.0, z[i].1)
                } else {
                    let b = (z[j].1 - z[i].1) / (z[j].0 - z[i].0);
                    (b, z[i].1 - b * z[i].0)
                };
                // Lift the line to dominance, then score its max slack.
                let lift = z
                    .iter()
                    .map(|&(f, v)| v - (b * f + c))
                    .fold(f64::NEG_INFINITY, f64::max);
                let c = c + lift.max(0.0);
                let slack = z
                    .iter()
                    .map(|&(f, v)| b * f + c - v)
                    .fold(f64::NEG_INFINITY, f64::max);
                if slack < best.2 {
                    best = (b, c, slack);
                }
            }
        }
        best
    };

    // The slack is not unimodal in the curvature (the support pairs jump),
    // so scan a dense curvature grid and refine around the best cell.
    let span = grid.f_max_ghz() - grid.f_min_ghz();
    let v_span = grid.v_max() - grid.v_min();
    let a_hi = 8.0 * v_span / (span * span);
    let mut best = (0.0, line_fit(0.0));
    for pass in 0..2 {
        let (lo, hi, n) = if pass == 0 {
            (0.0, a_hi, 160)
        } else {
            let w = a_hi / 160.0;
            ((best.0 - w).max(0.0), best.0 + w, 80)
        };
        for i in 0..=n {
            let a = lo + (hi - lo) * i as f64 / n as f64;
            let fit = line_fit(a);
            if fit.2 < best.1 .2 {
                best = (a, fit);
            }
        }
    }
    let (a, (b, c, _)) = best;

    // Express as x^2 + k1 x + k0 with x = F * sqrt(a).
    if a <= 0.0 {
        return Ok(QuadBound {
            k1: 0.0,
            k0: c + b * grid.f_max_ghz().max(0.0),
            freq_scale: 0.0,
        });
    }
    let s = a.sqrt();
    Ok(QuadBound {
        k1: b / s,
        k0: c,
        freq_scale: s,
    })
}

/// Partition of cores into shared-rail voltage domains.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DomainMap {
    membership: Vec<usize>,
    cores_per_domain: Vec<Vec<usize>>,
}

impl DomainMap {
    /// Contiguous near-even split of `n_cores` into `n_domains`; the first
    /// `n_cores % n_domains` domains take one extra core.
    pub fn even_split(n_cores: usize, n_domains: usize) -> Result<Self> {
        if n_domains == 0 || n_domains > n_cores {
            return Err(SimError::Config(format!(
                "cannot split {n_cores} cores into {n_domains} domains"
            )));
        }
        let base = n_cores / n_domains;
        let extra = n_cores % n_domains;
        let mut membership = Vec::with_capacity(n_cores);
        let mut cores_per_domain = Vec::with_capacity(n_domains);
        let mut next = 0;
        for d in 0..n_domains {
            let take = base + usize::from(d < extra);
            let cores: Vec<usize> = (next..next + take).collect();
            membership.extend(std::iter::repeat_n(d, take));
            cores_per_domain.push(cores);
            next += take;
        }
        Ok(Self {
            membership,
            cores_per_domain,
        })
    }

    pub fn n_cores(&self) -> usize {
        self.membership.len()
    }

    pub fn n_domains(&self) -> usize {
        self.cores_per_domain.len()
    }

    pub fn domain_of(&self, core: usize) -> Option<usize> {
        self.membership.get(core).copied()
    }

    pub fn cores_in(&self, domain: usize) -> &[usize] {
        &self.cores_per_domain[domain]
    }

    pub fn domains(&self) -> impl Iterator<Item = (usize, &[usize])> {
        self.cores_per_domain
            .iter()
            .enumerate()
            .map(|(d, cores)| (d, cores.as_slice()))
    }
}

/// A controller's output for one period: per-core frequency targets and
/// per-domain voltages. Members must be grid levels.
#[derive(Debug, Clone, PartialEq)]
pub struct ControlCommand {
    pub f_ghz: Vec<f64>,
    pub v_domain: Vec<f64>,
}

/// Applied actuator state with pending VRM transitions.
///
/// Two PLLs per frequency output let frequency changes land at the next plant
/// step without halting; voltage changes complete after the fixed VRM delay,
/// and cores wait at the old level's frequency cap during an upward
/// transition.
#[derive(Debug, Clone)]
pub struct ActuatorState {
    target_f: Vec<f64>,
    applied_v: Vec<f64>,
    pending_v: Vec<Option<(f64, f64)>>,
    applied_f: Vec<f64>,
    violation_count: u64,
}

impl ActuatorState {
    /// Boot state: every core at `F_min`, every rail at the lowest voltage.
    pub fn new(grid: &OperatingGrid, domains: &DomainMap) -> Self {
        Self {
            target_f: vec![grid.f_min_ghz(); domains.n_cores()],
            applied_v: vec![grid.v_min(); domains.n_domains()],
            pending_v: vec![None; domains.n_domains()],
            applied_f: vec![grid.f_min_ghz(); domains.n_cores()],
            violation_count: 0,
        }
    }

    pub fn violation_count(&self) -> u64 {
        self.violation_count
    }

    /// Accepts a command at time `now`. Internally infeasible commands are
    /// clamped to the commanded voltage's cap and flagged, so a buggy
    /// controller produces measurable violations instead of aborting a run.
    pub fn apply_commands(
        &mut self,
        cmd: &ControlCommand,
        now: f64,
        grid: &OperatingGrid,
        domains: &DomainMap,
    ) -> Result<()> {
        if cmd.f_ghz.len() != self.target_f.len() || cmd.v_domain.len() != self.applied_v.len() {
            return Err(SimError::Constraint("command dimensions mismatch".into()));
        }
        for (d, &v) in cmd.v_domain.iter().enumerate() {
            let cap = grid.max_frequency_at(v)?;
            for &core in domains.cores_in(d) {
                let f = cmd.f_ghz[core];
                if !grid.is_grid_frequency(f) || f > cap + GRID_EPS {
                    self.violation_count += 1;
                    self.target_f[core] = grid.quantize_down(f.min(cap));
                } else {
                    self.target_f[core] = f;
                }
            }
            match self.pending_v[d] {
                _ if (v - self.applied_v[d]).abs() < GRID_EPS => {
                    // Commanding the current voltage cancels any pending move.
                    self.pending_v[d] = None;
                }
                Some((tv, _)) if (tv - v).abs() < GRID_EPS => {} // transition already under way
                _ => self.pending_v[d] = Some((v, now + grid.vrm_delay_s)),
            }
        }
        Ok(())
    }

    /// Resolves pending transitions at time `now` and returns the applied
    /// per-core frequencies and per-domain voltages. The applied pair always
    /// satisfies the feasibility relation: target frequencies are capped at
    /// the *currently* applied voltage's maximum.
    pub fn effective(
        &mut self,
        now: f64,
        grid: &OperatingGrid,
        domains: &DomainMap,
    ) -> (&[f64], &[f64]) {
        for d in 0..self.applied_v.len() {
            if let Some((v, t_eff)) = self.pending_v[d] {
                if t_eff <= now + 1e-12 {
                    self.applied_v[d] = v;
                    self.pending_v[d] = None;
                }
            }
        }
        for (d, cores) in domains.domains() {
            let cap = grid
                .max_frequency_at(self.applied_v[d])
                .expect("applied voltage is a grid level");
            for &core in cores {
                self.applied_f[core] = self.target_f[core].min(cap);
            }
        }
        (&self.applied_f, &self.applied_v)
    }

    pub fn applied_voltages(&self) -> &[f64] {
        &self.applied_v
    }

    pub fn applied_frequencies(&self) -> &[f64] {
        &self.applied_f
    }

    pub fn has_pending(&self, domain: usize) -> bool {
        self.pending_v[domain].is_some()
    }
}
