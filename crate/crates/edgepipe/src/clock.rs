use std::sync::atomic::{AtomicU64, Ordering};
use std::time::{Instant, SystemTime, UNIX_EPOCH};

/// Wall-clock milliseconds that never go backwards.
///
/// The epoch offset is sampled once; later readings advance with a monotonic
/// timer and are clamped to the largest value handed out so far.
#[derive(Debug)]
pub struct Clock {
    base_ms: u64,
    start: Instant,
    last: AtomicU64,
}

impl Clock {
    pub fn new() -> Self {
        let base_ms = SystemTime::now()
            .duration_since(UNIX_EPOCH)
            .map(|d| d.as_millis() as u64)
            .unwrap_or(0);
        Self {
            base_ms,
            start: Instant::now(),
            last: AtomicU64::new(0),
        }
    }

    pub fn now_ms(&self) -> u64 {
        let t = self.base_ms + self.start.elapsed().as_millis() as u64;
        self.last.fetch_max(t, Ordering::AcqRel).max(t)
    }
}

impl Default for Clock {
    fn default() -> Self {
        Self::new()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn never_decreases() {
        let c = Clock::new();
        let mut prev = c.now_ms();
        for _ in 0..10_000 {
            let t = c.now_ms();
            assert!(t >= prev);
            prev = t;
        }
        assert!(prev > 1_600_000_000_000);
    }
}
