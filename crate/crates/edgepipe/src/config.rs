use std::path::{Path, PathBuf};
use std::time::Duration;

use phantom_core::frames::{FrameSource, ImageDirSource, SyntheticSource};
use phantom_core::netgraph::{load_config, load_model};
use phantom_core::postprocess::DEFAULT_CONF;
use serde::{Deserialize, Serialize};

use crate::error::{EdgeError, Result};
use crate::guard::{TemperatureGuard, DEFAULT_HYSTERESIS_C, DEFAULT_THRESHOLD_C};
use crate::pipeline::{ModelDetector, Pipeline};
use crate::sink::{DeadLetter, Dispatcher, FileSink, RetryPolicy, Sink, TcpSink};
use crate::temp::open_temp_source;
use crate::trigger::ClassMap;

pub const DEADLETTER_ENV: &str = "EDGEPIPE_DEADLETTER";
pub const DEFAULT_DEADLETTER: &str = "edgepipe-deadletter.jsonl";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelRef {
    /// Config file or `builtin:NAME`.
    pub config: String,
    /// Weight manifest or `random:SEED`.
    #[serde(default = "default_weights")]
    pub weights: String,
}

fn default_weights() -> String {
    "random:0".into()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "lowercase", deny_unknown_fields)]
pub enum SourceConfig {
    Synthetic {
        frames: u64,
        #[serde(default)]
        seed: u64,
    },
    Dir {
        path: PathBuf,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "lowercase", deny_unknown_fields)]
pub enum SinkConfig {
    File { path: PathBuf },
    Tcp { addr: String },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GuardConfig {
    #[serde(default = "default_threshold")]
    pub threshold_c: f64,
    #[serde(default = "default_hysteresis")]
    pub hysteresis_c: f64,
}

fn default_threshold() -> f64 {
    DEFAULT_THRESHOLD_C
}

fn default_hysteresis() -> f64 {
    DEFAULT_HYSTERESIS_C
}

impl Default for GuardConfig {
    fn default() -> Self {
        Self {
            threshold_c: DEFAULT_THRESHOLD_C,
            hysteresis_c: DEFAULT_HYSTERESIS_C,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RetryConfig {
    #[serde(default = "default_retries")]
    pub retries: u32,
    #[serde(default = "default_base_ms")]
    pub base_ms: u64,
}

fn default_retries() -> u32 {
    3
}

fn default_base_ms() -> u64 {
    100
}

impl Default for RetryConfig {
    fn default() -> Self {
        Self {
            retries: default_retries(),
            base_ms: default_base_ms(),
        }
    }
}

fn default_conf() -> f32 {
    DEFAULT_CONF
}

/// Contents of `pipeline.json`. Relative paths are resolved against the
/// directory holding the file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PipelineConfig {
    pub model: ModelRef,
    pub source: SourceConfig,
    /// Frame side length; defaults to the model's input size.
    #[serde(default)]
    pub input_size: Option<usize>,
    /// `constant:C` or a trace file with one reading per frame.
    pub temp_source: String,
    pub sinks: Vec<SinkConfig>,
    #[serde(default = "default_conf")]
    pub conf_thresh: f32,
    pub device_id: String,
    #[serde(default)]
    pub class_names: Option<ClassMap>,
    #[serde(default)]
    pub dead_letter: Option<PathBuf>,
    #[serde(default)]
    pub guard: GuardConfig,
    #[serde(default)]
    pub retry: RetryConfig,
}

fn rebase(dir: &Path, p: &mut PathBuf) {
    if p.is_relative() {
        *p = dir.join(&*p);
    }
}

fn rebase_spec(dir: &Path, spec: &mut String, prefixes: &[&str]) {
    if prefixes.iter().any(|p| spec.starts_with(p)) {
        return;
    }
    let mut p = PathBuf::from(&*spec);
    rebase(dir, &mut p);
    *spec = p.to_string_lossy().into_owned();
}

impl PipelineConfig {
    pub fn parse(path: &Path, text: &str) -> Result<Self> {
        let cfg: Self = serde_json::from_str(text).map_err(|source| EdgeError::Json {
            path: path.to_path_buf(),
            source,
        })?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| EdgeError::io(path, e))?;
        let mut cfg = Self::parse(path, &text)?;
        let dir = path.parent().unwrap_or(Path::new("."));
        cfg.rebase(dir);
        Ok(cfg)
    }

    fn rebase(&mut self, dir: &Path) {
        rebase_spec(dir, &mut self.model.config, &["builtin:"]);
        rebase_spec(dir, &mut self.model.weights, &["random:"]);
        rebase_spec(dir, &mut self.temp_source, &["constant:"]);
        if let SourceConfig::Dir { path } = &mut self.source {
            rebase(dir, path);
        }
        for s in &mut self.sinks {
            if let SinkConfig::File { path } = s {
                rebase(dir, path);
            }
        }
        if let Some(p) = &mut self.dead_letter {
            rebase(dir, p);
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(EdgeError::Config(m));
        if !(0.0..=1.0).contains(&self.conf_thresh) {
            return bad(format!(
                "conf_thresh {} is outside [0, 1]",
                self.conf_thresh
            ));
        }
        if self.device_id.trim().is_empty() {
            return bad("device_id is empty".into());
        }
        if self.sinks.is_empty() {
            return bad("at least one sink is required".into());
        }
        let g = self.guard;
        if !g.threshold_c.is_finite() || !g.hysteresis_c.is_finite() || g.hysteresis_c < 0.0 {
            return bad(format!(
                "guard threshold {} / hysteresis {} must be finite with hysteresis ≥ 0",
                g.threshold_c, g.hysteresis_c
            ));
        }
        if matches!(self.source, SourceConfig::Synthetic { frames: 0, .. }) {
            return bad("synthetic source needs at least one frame".into());
        }
        Ok(())
    }

    /// Dead-letter file: `EDGEPIPE_DEADLETTER` wins over the config value.
    pub fn dead_letter_path(&self) -> PathBuf {
        std::env::var_os(DEADLETTER_ENV)
            .filter(|v| !v.is_empty())
            .map(PathBuf::from)
            .or_else(|| self.dead_letter.clone())
            .unwrap_or_else(|| PathBuf::from(DEFAULT_DEADLETTER))
    }

    pub fn retry_policy(&self) -> RetryPolicy {
        RetryPolicy {
            retries: self.retry.retries,
            base: Duration::from_millis(self.retry.base_ms),
        }
    }

    pub fn build_sinks(&self) -> Vec<Box<dyn Sink>> {
        self.sinks
            .iter()
            .map(|s| -> Box<dyn Sink> {
                match s {
                    SinkConfig::File { path } => Box::new(FileSink::new(path)),
                    SinkConfig::Tcp { addr } => Box::new(TcpSink::new(addr.clone())),
                }
            })
            .collect()
    }

    /// Loads the model and opens every input. Fails before any frame is read.
    pub fn build(&self) -> Result<Pipeline> {
        self.validate()?;
        let graph = load_config(&self.model.config)?;
        let size = self.input_size.unwrap_or(graph.input_size());
        let model = load_model(graph, &self.model.weights)?;
        let source: Box<dyn FrameSource> = match &self.source {
            SourceConfig::Synthetic { frames, seed } => {
                Box::new(SyntheticSource::new(*seed, size, *frames))
            }
            SourceConfig::Dir { path } => Box::new(ImageDirSource::open(path, size)?),
        };
        Ok(Pipeline {
            source,
            detector: Box::new(ModelDetector::new(model, self.conf_thresh)),
            temps: open_temp_source(&self.temp_source)?,
            dispatcher: Dispatcher::new(
                self.build_sinks(),
                self.retry_policy(),
                DeadLetter::new(self.dead_letter_path()),
            ),
            guard: TemperatureGuard::new(self.guard.threshold_c, self.guard.hysteresis_c),
            classes: self.class_names.clone().unwrap_or_default(),
            device_id: self.device_id.clone(),
            conf_thresh: self.conf_thresh,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const MINIMAL: &str = r#"{
        "model": {"config": "builtin:phantom"},
        "source": {"type": "synthetic", "frames": 3},
        "temp_source": "constant:40",
        "sinks": [{"type": "file", "path": "events.jsonl"}, {"type": "tcp", "addr": "127.0.0.1:9"}],
        "device_id": "pi-01"
    }"#;

    #[test]
    fn defaults_fill_in() {
        let c = PipelineConfig::parse(Path::new("p.json"), MINIMAL).unwrap();
        assert_eq!(c.model.weights, "random:0");
        assert_eq!(c.conf_thresh, DEFAULT_CONF);
        assert_eq!(c.guard, GuardConfig::default());
        assert_eq!(c.retry_policy(), RetryPolicy::default());
        assert_eq!(c.build_sinks().len(), 2);
    }

    #[test]
    fn rebases_relative_paths_only() {
        let mut c = PipelineConfig::parse(Path::new("p.json"), MINIMAL).unwrap();
        c.temp_source = "trace.txt".into();
        c.rebase(Path::new("/etc/edge"));
        assert_eq!(c.model.config, "builtin:phantom");
        assert_eq!(c.model.weights, "random:0");
        assert_eq!(c.temp_source, "/etc/edge/trace.txt");
        assert_eq!(
            c.sinks[0],
            SinkConfig::File {
                path: "/etc/edge/events.jsonl".into()
            }
        );
    }

    #[test]
    fn rejects_bad_values() {
        let p = Path::new("p.json");
        let bad_conf = MINIMAL.replace("\"device_id\"", "\"conf_thresh\": 1.5, \"device_id\"");
        assert!(matches!(
            PipelineConfig::parse(p, &bad_conf),
            Err(EdgeError::Config(_))
        ));
        let no_sinks = MINIMAL.replace(
            r#"[{"type": "file", "path": "events.jsonl"}, {"type": "tcp", "addr": "127.0.0.1:9"}]"#,
            "[]",
        );
        assert!(matches!(
            PipelineConfig::parse(p, &no_sinks),
            Err(EdgeError::Config(_))
        ));
        let typo = MINIMAL.replace("device_id", "device");
        assert!(matches!(
            PipelineConfig::parse(p, &typo),
            Err(EdgeError::Json { .. })
        ));
    }
}
