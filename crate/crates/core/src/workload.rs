//! Instruction-characterized cycle sequences.
//!
//! A trace is a run-length-encoded sequence of per-cycle effective
//! capacitances; a cursor consumes `F * dt` cycles per plant step and yields
//! the cycle-weighted average capacitance that drives the dynamic power term.
//! Traces repeat cyclically so a fixed-wall-time test never starves.

use std::sync::Arc;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Result, SimError};
use crate::power::GHZ;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum WorkloadClass {
    Vector,
    IntFloat,
    Idle,
    Cloud,
}

impl WorkloadClass {
    pub fn label(&self) -> &'static str {
        match self {
            WorkloadClass::Vector => "VECTOR",
            WorkloadClass::IntFloat => "INTFLOAT",
            WorkloadClass::Idle => "IDLE",
            WorkloadClass::Cloud => "CLOUD",
        }
    }
}

/// Per-class effective capacitance values, farads. Demanding classes have
/// larger values: vector > int/float mix > idle.
#[derive(Debug, Clone, Copy)]
pub struct ClassCeff {
    pub vector: f64,
    pub intfloat: f64,
    pub idle: f64,
}

/// Run-length-encoded cycle sequence.
#[derive(Debug, Clone, PartialEq)]
pub struct CycleTrace {
    pub class: WorkloadClass,
    /// (C_eff value in farads, cycle count) pairs.
    segments: Vec<(f64, u64)>,
    total_cycles: u64,
}

impl CycleTrace {
    pub fn new(class: WorkloadClass, segments: Vec<(f64, u64)>) -> Result<Self> {
        if segments.is_empty() || segments.iter().any(|&(c, n)| c < 0.0 || n == 0) {
            return Err(SimError::Config("trace segments must be non-empty with C_eff >= 0".into()));
        }
        let total_cycles = segments.iter().map(|&(_, n)| n).sum();
        Ok(Self {
            class,
            segments,
            total_cycles,
        })
    }

    pub fn total_cycles(&self) -> u64 {
        self.total_cycles
    }

    pub fn segments(&self) -> &[(f64, u64)] {
        &self.segments
    }

    pub fn min_ceff(&self) -> f64 {
        self.segments.iter().map(|&(c, _)| c).fold(f64::MAX, f64::min)
    }

    pub fn max_ceff(&self) -> f64 {
        self.segments.iter().map(|&(c, _)| c).fold(f64::MIN, f64::max)
    }
}

/// Nominal frequency used to convert CLOUD segment durations into cycles.
const CLOUD_NOMINAL_GHZ: f64 = 2.0;

/// Generates a trace of `duration_cycles` for the class.
///
/// The three named classes are constant at their class capacitance. CLOUD is
/// a seeded piecewise-constant random walk across the whole class range with
/// segment lengths log-uniform in 0.1-10 ms at nominal frequency.
pub fn generate_trace(
    class: WorkloadClass,
    duration_cycles: u64,
    ceff: &ClassCeff,
    rng: &mut impl Rng,
) -> Result<CycleTrace> {
    if duration_cycles == 0 {
        return Err(SimError::Config("duration_cycles must be positive".into()));
    }
    match class {
        WorkloadClass::Vector => CycleTrace::new(class, vec![(ceff.vector, duration_cycles)]),
        WorkloadClass::IntFloat => CycleTrace::new(class, vec![(ceff.intfloat, duration_cycles)]),
        WorkloadClass::Idle => CycleTrace::new(class, vec![(ceff.idle, duration_cycles)]),
        WorkloadClass::Cloud => {
            let (lo, hi) = (ceff.idle, ceff.vector);
            let step = (hi - lo) / 8.0;
            let mut value = rng.random_range(lo..=hi);
            let mut segments = Vec::new();
            let mut produced = 0u64;
            while produced < duration_cycles {
                // log-uniform in [0.1, 10] ms
                let len_s = 1e-4 * 100f64.powf(rng.random::<f64>());
                let cycles = ((len_s * CLOUD_NOMINAL_GHZ * GHZ) as u64)
                    .min(duration_cycles - produced)
                    .max(1);
                segments.push((value, cycles));
                produced += cycles;
                value = (value + rng.random_range(-step..=step)).clamp(lo, hi);
            }
            CycleTrace::new(class, segments)
        }
    }
}

/// Consumption position inside a (cyclically repeated) trace.
#[derive(Debug, Clone)]
pub struct WorkloadCursor {
    trace: Arc<CycleTrace>,
    seg_idx: usize,
    consumed_in_seg: u64,
    cycles_consumed: u64,
    fractional_cycle: f64,
}

impl WorkloadCursor {
    pub fn new(trace: Arc<CycleTrace>) -> Self {
        Self {
            trace,
            seg_idx: 0,
            consumed_in_seg: 0,
            cycles_consumed: 0,
            fractional_cycle: 0.0,
        }
    }

    pub fn cycles_consumed(&self) -> u64 {
        self.cycles_consumed
    }

    /// C_eff of the cycle the cursor currently points at.
    pub fn current_ceff(&self) -> f64 {
        self.trace.segments[self.seg_idx].0
    }

    /// Consumes `theta = F * dt` cycles (fractional residue carried over) and
    /// returns the cycle-weighted average C_eff plus the whole cycles consumed.
    pub fn consume_cycles(&mut self, f_ghz: f64, dt: f64) -> (f64, u64) {
        let theta = f_ghz * GHZ * dt + self.fractional_cycle;
        let whole = theta.floor();
        self.fractional_cycle = theta - whole;
        let mut remaining = whole as u64;
        if remaining == 0 {
            return (self.current_ceff(), 0);
        }
        let consumed = remaining;
        let mut weighted = 0.0;
        while remaining > 0 {
            let (ceff, seg_len) = self.trace.segments[self.seg_idx];
            let available = seg_len - self.consumed_in_seg;
            let take = available.min(remaining);
            weighted += ceff * take as f64;
            remaining -= take;
            self.consumed_in_seg += take;
            if self.consumed_in_seg == seg_len {
                self.seg_idx = (self.seg_idx + 1) % self.trace.segments.len();
                self.consumed_in_seg = 0;
            }
        }
        self.cycles_consumed += consumed;
        (weighted / consumed as f64, consumed)
    }

    /// Execution progress in percent against the cycles an uncontrolled run
    /// would have executed, capped at 100.
    pub fn progress(&self, reference_cycles: f64) -> f64 {
        assert!(reference_cycles > 0.0, "reference cycle count must be positive");
        (100.0 * self.cycles_consumed as f64 / reference_cycles).min(100.0)
    }
}
