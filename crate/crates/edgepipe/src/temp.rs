use std::path::Path;

use crate::error::{EdgeError, Result};

/// Per-frame temperature feed in °C.
pub trait TempSource: Send {
    fn read_celsius(&mut self) -> f64;
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ConstantTemp(pub f64);

impl TempSource for ConstantTemp {
    fn read_celsius(&mut self) -> f64 {
        self.0
    }
}

/// Replays a scripted trace, one reading per frame, holding the last value
/// once the trace runs out.
#[derive(Debug, Clone, PartialEq)]
pub struct ReplayTemp {
    values: Vec<f64>,
    pos: usize,
}

impl ReplayTemp {
    pub fn new(values: Vec<f64>) -> Result<Self> {
        if values.is_empty() {
            return Err(EdgeError::Config("temperature trace is empty".into()));
        }
        if let Some(v) = values.iter().find(|v| !v.is_finite()) {
            return Err(EdgeError::Config(format!("temperature {v} is not finite")));
        }
        Ok(Self { values, pos: 0 })
    }

    /// One reading per line; blank lines and `#` comments are ignored.
    pub fn parse(path: &Path, text: &str) -> Result<Self> {
        let mut values = Vec::new();
        for (i, line) in text.lines().enumerate() {
            let line = line.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let err = |msg: String| EdgeError::Temperature {
                path: path.to_path_buf(),
                line: i + 1,
                msg,
            };
            let v: f64 = line.parse().map_err(|e| err(format!("{line:?}: {e}")))?;
            if !v.is_finite() {
                return Err(err(format!("{line:?} is not a finite temperature")));
            }
            values.push(v);
        }
        if values.is_empty() {
            return Err(EdgeError::Temperature {
                path: path.to_path_buf(),
                line: 0,
                msg: "no readings".into(),
            });
        }
        Self::new(values)
    }

    pub fn open(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| EdgeError::io(path, e))?;
        Self::parse(path, &text)
    }
}

impl TempSource for ReplayTemp {
    fn read_celsius(&mut self) -> f64 {
        let v = self.values[self.pos.min(self.values.len() - 1)];
        self.pos += 1;
        v
    }
}

/// `constant:C` or a trace file path.
pub fn open_temp_source(spec: &str) -> Result<Box<dyn TempSource>> {
    match spec.strip_prefix("constant:") {
        Some(c) => {
            let v: f64 = c
                .trim()
                .parse()
                .map_err(|e| EdgeError::Config(format!("temp_source {spec:?}: {e}")))?;
            if !v.is_finite() {
                return Err(EdgeError::Config(format!(
                    "temp_source {spec:?} is not finite"
                )));
            }
            Ok(Box::new(ConstantTemp(v)))
        }
        None => Ok(Box::new(ReplayTemp::open(Path::new(spec))?)),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn replay_holds_last_value() {
        let mut t = ReplayTemp::parse(Path::new("t"), "# trace\n40\n\n61.5 # hot\n").unwrap();
        let got: Vec<f64> = (0..4).map(|_| t.read_celsius()).collect();
        assert_eq!(got, [40.0, 61.5, 61.5, 61.5]);
    }

    #[test]
    fn bad_line_reports_position() {
        let err = ReplayTemp::parse(Path::new("t.txt"), "40\nwarm\n").unwrap_err();
        assert!(
            matches!(err, EdgeError::Temperature { line: 2, .. }),
            "{err}"
        );
        assert!(ReplayTemp::parse(Path::new("t"), "inf\n").is_err());
        assert!(ReplayTemp::parse(Path::new("t"), "# nothing\n").is_err());
    }

    #[test]
    fn constant_spec() {
        assert_eq!(
            open_temp_source("constant:40").unwrap().read_celsius(),
            40.0
        );
        assert!(open_temp_source("constant:hot").is_err());
        assert!(open_temp_source("constant:NaN").is_err());
    }
}
