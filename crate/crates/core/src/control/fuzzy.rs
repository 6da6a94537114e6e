//! Fuzzy-inspired thermal capping: the increment LUT over (temperature,
//! temperature derivative) bins and the half-step frequency reduction rule.

use crate::actuators::OperatingGrid;
use crate::error::{Result, SimError};

/// 5x5 increment table. Rows bin the filtered temperature derivative
/// (`dT = T(t_k) - T(t_k - s)`), columns bin the temperature itself; the top
/// temperature bins are anchored at the capping limit `T_L`.
#[derive(Debug, Clone)]
pub struct FuzzyLut {
    values: [[i32; 5]; 5],
}

impl FuzzyLut {
    pub fn from_rows(rows: &[Vec<i32>]) -> Result<Self> {
        if rows.len() != 5 || rows.iter().any(|r| r.len() != 5) {
            return Err(SimError::Config("fuzzy LUT must be 5x5".into()));
        }
        let mut values = [[0i32; 5]; 5];
        for (i, row) in rows.iter().enumerate() {
            for (j, &v) in row.iter().enumerate() {
                values[i][j] = v;
            }
        }
        // Hotter and faster-rising cells must never increment more.
        for i in 0..5 {
            for j in 1..5 {
                if values[i][j] > values[i][j - 1] {
                    return Err(SimError::Config("LUT rows must be non-increasing".into()));
                }
            }
        }
        for j in 0..5 {
            for i in 1..5 {
                if values[i][j] > values[i - 1][j] {
                    return Err(SimError::Config("LUT columns must be non-increasing".into()));
                }
            }
        }
        Ok(Self { values })
    }

    pub fn values(&self) -> &[[i32; 5]; 5] {
        &self.values
    }

    fn temp_bin(t: f64, t_l: f64) -> usize {
        if t < 45.0 {
            0
        } else if t < 65.0 {
            1
        } else if t < 80.0 {
            2
        } else if t < t_l {
            3
        } else {
            4
        }
    }

    fn dt_bin(dt: f64) -> usize {
        if dt < 0.0 {
            0
        } else if dt < 0.5 {
            1
        } else if dt < 1.0 {
            2
        } else if dt < 2.0 {
            3
        } else {
            4
        }
    }

    pub fn increment(&self, t: f64, dt: f64, t_l: f64) -> i32 {
        self.values[Self::dt_bin(dt)][Self::temp_bin(t, t_l)]
    }
}

/// Applies one LUT increment to a fuzzy state, saturating at 0 above (no
/// turbo) and at `floor` below.
pub fn fuzzy_update(state: i32, increment: i32, floor: i32) -> i32 {
    (state + increment).clamp(floor, 0)
}

/// Continuous half-step descent: each negative unit removes half of the
/// frequency step between the consecutive voltage levels at the current
/// position, so every two units drop exactly one voltage level; floored at
/// `F_min`.
pub fn fca_cap_frequency_continuous(f_req_ghz: f64, fuzzy_state: i32, grid: &OperatingGrid) -> f64 {
    debug_assert!(fuzzy_state <= 0);
    let mut f = f_req_ghz.clamp(grid.f_min_ghz(), grid.f_max_ghz());
    for _ in 0..fuzzy_state.unsigned_abs() {
        if f <= grid.f_min_ghz() {
            break;
        }
        let v = grid.min_voltage_for(f).expect("f inside grid range");
        let idx = grid.volt_level_index(v).expect("grid level");
        let cap = grid.max_frequency_at(v).expect("grid level");
        let lower_cap = if idx == 0 {
            grid.f_min_ghz()
        } else {
            grid.max_frequency_at(grid.volt_levels()[idx - 1]).unwrap()
        };
        f = (f - 0.5 * (cap - lower_cap)).max(grid.f_min_ghz());
    }
    f
}

/// [`fca_cap_frequency_continuous`] quantized down to the grid.
pub fn fca_cap_frequency(f_req_ghz: f64, fuzzy_state: i32, grid: &OperatingGrid) -> f64 {
    grid.quantize_down(fca_cap_frequency_continuous(f_req_ghz, fuzzy_state, grid))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::config::{default_fuzzy_lut, SimConfig};
    use approx::assert_relative_eq;

    fn lut() -> FuzzyLut {
        FuzzyLut::from_rows(&default_fuzzy_lut()).unwrap()
    }

    fn grid() -> OperatingGrid {
        OperatingGrid::from_config(&SimConfig::default().grid).unwrap()
    }

    #[test]
    fn published_entries() {
        let l = lut();
        let t_l = 85.0;
        // Warm cell, mild rise: no action.
        assert_eq!(l.increment(70.0, 0.7, t_l), 0);
        // At the limit and rising fast: strongest decrement.
        assert_eq!(l.increment(t_l, 2.5, t_l), -4);
        assert_eq!(l.increment(t_l + 10.0, 9.0, t_l), -4);
        // Cool and falling: recover (clamped at 0 by the caller).
        assert_eq!(l.increment(40.0, -0.3, t_l), 2);
        assert_eq!(fuzzy_update(0, 2, -30), 0);
    }

    #[test]
    fn full_table_matches_published_lut() {
        let expect = [
            [2, 2, 1, 0, -1],
            [2, 1, 1, 0, -1],
            [1, 1, 0, -1, -2],
            [1, 0, -1, -2, -3],
            [0, 0, -2, -3, -4],
        ];
        assert_eq!(lut().values(), &expect);
    }

    #[test]
    fn lut_rejects_non_monotone_tables() {
        let mut rows = default_fuzzy_lut();
        rows[0][1] = 5;
        assert!(FuzzyLut::from_rows(&rows).is_err());
    }

    #[test]
    fn cap_identity_at_zero_state() {
        let g = grid();
        for &f in g.freq_levels() {
            assert_relative_eq!(fca_cap_frequency(f, 0, &g), f);
        }
    }

    #[test]
    fn two_states_drop_exactly_one_voltage_level() {
        let g = grid();
        for idx in 1..g.n_volt_levels() {
            let v = g.volt_levels()[idx];
            let cap = g.max_frequency_at(v).unwrap();
            let below = g.max_frequency_at(g.volt_levels()[idx - 1]).unwrap();
            assert_relative_eq!(fca_cap_frequency(cap, -2, &g), below, epsilon = 1e-9);
        }
    }

    #[test]
    fn level_descent_scan() {
        let g = grid();
        // From every level boundary, |state| descent units walk down
        // floor(|state|/2) voltage levels before quantization.
        for idx in 0..g.n_volt_levels() {
            let start_v = g.volt_levels()[idx];
            let start_f = g.max_frequency_at(start_v).unwrap();
            for state in 0..=12i32 {
                let cap = fca_cap_frequency_continuous(start_f, -state, &g);
                let expect_idx = idx.saturating_sub(state as usize / 2);
                let got_v = g.min_voltage_for(cap).unwrap();
                let got_idx = g.volt_level_index(got_v).unwrap();
                assert_eq!(
                    got_idx, expect_idx,
                    "level {idx}, state -{state}: cap {cap} landed on level {got_idx}"
                );
                // Even states that do not bottom out land exactly on a level
                // cap, so quantization keeps them there.
                if state % 2 == 0 && (state as usize / 2) <= idx {
                    let q = fca_cap_frequency(start_f, -state, &g);
                    let want = g.max_frequency_at(g.volt_levels()[expect_idx]).unwrap();
                    assert_relative_eq!(q, want, epsilon = 1e-9);
                }
            }
        }
    }

    #[test]
    fn deep_state_floors_at_f_min() {
        let g = grid();
        let floor = -2 * g.n_volt_levels() as i32;
        assert_relative_eq!(fca_cap_frequency(g.f_max_ghz(), floor, &g), g.f_min_ghz());
    }
}
