//! Criterion runner for the acceptance suite: each criterion is a closure
//! that either returns a one-line summary or an error, is timed against a
//! budget, and reports a single PASS/FAIL line.

use std::panic::{catch_unwind, AssertUnwindSafe};
use std::time::{Duration, Instant};

pub type Check = Result<String, String>;

/// `Err(msg)` unless `cond` holds.
pub fn ensure(cond: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg())
    }
}

#[derive(Debug, Clone)]
pub struct Verdict {
    pub id: u8,
    pub title: &'static str,
    pub passed: bool,
    pub detail: String,
    pub elapsed: Duration,
}

impl Verdict {
    pub fn line(&self) -> String {
        format!(
            "criterion {}: {} [{}] {} ({:.2} s)",
            self.id,
            if self.passed { "PASS" } else { "FAIL" },
            self.title,
            self.detail,
            self.elapsed.as_secs_f64()
        )
    }
}

/// Runs one criterion. Panics count as failures, and so does overrunning `budget`.
pub fn run(id: u8, title: &'static str, budget: Duration, f: impl FnOnce() -> Check) -> Verdict {
    let start = Instant::now();
    let result = catch_unwind(AssertUnwindSafe(f));
    let elapsed = start.elapsed();
    let (passed, detail) = match result {
        Ok(Ok(d)) if elapsed <= budget => (true, d),
        Ok(Ok(d)) => (
            false,
            format!("{d}; over the {:.0} s budget", budget.as_secs_f64()),
        ),
        Ok(Err(e)) => (false, e),
        Err(p) => {
            let msg = p
                .downcast_ref::<String>()
                .cloned()
                .or_else(|| p.downcast_ref::<&str>().map(|s| s.to_string()))
                .unwrap_or_else(|| "panicked".into());
            (false, format!("panic: {msg}"))
        }
    };
    let v = Verdict {
        id,
        title,
        passed,
        detail,
        elapsed,
    };
    println!("{}", v.line());
    v
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn panics_and_overruns_fail() {
        let long = Duration::from_secs(60);
        assert!(run(1, "ok", long, || Ok("fine".into())).passed);
        assert!(!run(2, "err", long, || Err("nope".into())).passed);
        assert!(!run(3, "panic", long, || panic!("boom")).passed);
        let slow = run(4, "slow", Duration::ZERO, || {
            std::thread::sleep(Duration::from_millis(2));
            Ok("late".into())
        });
        assert!(!slow.passed && slow.detail.contains("budget"));
    }
}
