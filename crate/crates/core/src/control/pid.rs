//! Discrete PI(D) with back-calculation anti-windup.

use crate::config::PidGains;

#[derive(Debug, Clone)]
pub struct Pid {
    gains: PidGains,
    integrator: f64,
    prev_error: Option<f64>,
}

impl Pid {
    pub fn new(gains: PidGains) -> Self {
        Self {
            gains,
            integrator: 0.0,
            prev_error: None,
        }
    }

    pub fn reset(&mut self) {
        self.integrator = 0.0;
        self.prev_error = None;
    }

    pub fn integrator(&self) -> f64 {
        self.integrator
    }

    /// One controller period: `out = Kp e + I + Kd de/dt`, saturated into
    /// `[out_min, out_max]` with the integrator clamped back on saturation.
    pub fn step(&mut self, error: f64, ts: f64) -> f64 {
        self.integrator += self.gains.ki * error * ts;
        let derivative = match self.prev_error {
            Some(prev) if self.gains.kd != 0.0 => self.gains.kd * (error - prev) / ts,
            _ => 0.0,
        };
        self.prev_error = Some(error);
        let unsat = self.gains.kp * error + self.integrator + derivative;
        let out = unsat.clamp(self.gains.out_min, self.gains.out_max);
        self.integrator -= unsat - out;
        out
    }
}
