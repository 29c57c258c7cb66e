use serde::{Deserialize, Serialize};

pub const DEFAULT_THRESHOLD_C: f64 = 60.0;
pub const DEFAULT_HYSTERESIS_C: f64 = 5.0;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TempReading {
    pub celsius: f64,
    pub ts_ms: u64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum GuardAction {
    Continue,
    Halt,
}

/// What one reading did to the guard.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum GuardStep {
    Running,
    /// Crossed above the threshold on this reading.
    Halted,
    StillHalted,
    /// Cooled to `threshold − hysteresis` or below on this reading.
    Resumed,
}

impl GuardStep {
    pub fn action(self) -> GuardAction {
        match self {
            GuardStep::Running | GuardStep::Resumed => GuardAction::Continue,
            GuardStep::Halted | GuardStep::StillHalted => GuardAction::Halt,
        }
    }
}

/// Thermal halt with hysteresis: halts when a reading exceeds `threshold`,
/// resumes once a reading is at or below `threshold − hysteresis`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TemperatureGuard {
    pub threshold: f64,
    pub hysteresis: f64,
    #[serde(skip)]
    halted: bool,
}

impl Default for TemperatureGuard {
    fn default() -> Self {
        Self::new(DEFAULT_THRESHOLD_C, DEFAULT_HYSTERESIS_C)
    }
}

impl TemperatureGuard {
    pub fn new(threshold: f64, hysteresis: f64) -> Self {
        Self {
            threshold,
            hysteresis,
            halted: false,
        }
    }

    pub fn is_halted(&self) -> bool {
        self.halted
    }

    pub fn resume_at(&self) -> f64 {
        self.threshold - self.hysteresis
    }

    /// Feeds one reading. A non-finite reading counts as too hot.
    pub fn observe(&mut self, reading: TempReading) -> GuardStep {
        let c = reading.celsius;
        let hot = !c.is_finite() || c > self.threshold;
        match (self.halted, hot) {
            (false, false) => GuardStep::Running,
            (false, true) => {
                self.halted = true;
                GuardStep::Halted
            }
            (true, _) if c.is_finite() && c <= self.resume_at() => {
                self.halted = false;
                GuardStep::Resumed
            }
            (true, _) => GuardStep::StillHalted,
        }
    }
}
