//! Latency/FPS benchmarking of detector graphs and stable report output.
//!
//! The timed window of every iteration covers forward, decode and NMS on one
//! preloaded frame; frame loading and report writing are outside it.

use std::path::{Path, PathBuf};
use std::time::Instant;

use phantom_core::frames::{collect_frames, FrameSource};
use phantom_core::netgraph::{CostReport, Model};
use phantom_core::postprocess::{decode, nms, DEFAULT_CONF, NMS_IOU};
use phantom_core::tensor::FastExec;
use serde::{Deserialize, Serialize};
use thiserror::Error;

pub const CSV_HEADER: &str =
    "model,input,params,gflops,size_mb,fps,lat_ms_mean,lat_ms_p50,lat_ms_p90";

#[derive(Debug, Error)]
pub enum BenchError {
    #[error(transparent)]
    Core(#[from] phantom_core::Error),

    #[error("frame source produced no frames")]
    EmptySource,

    #[error("timed_iters must be at least 1")]
    NoIterations,

    #[error("frames must be square and all the same size; got {0}")]
    FrameShape(String),

    #[error("reports were measured at different input sizes ({a} vs {b})")]
    InputMismatch { a: usize, b: usize },

    #[error("{}: {source}", .path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("{}: {source}", .path.display())]
    Json {
        path: PathBuf,
        #[source]
        source: serde_json::Error,
    },

    #[error("csv: {0}")]
    Csv(#[from] csv::Error),
}

pub type Result<T, E = BenchError> = std::result::Result<T, E>;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LatencyStats {
    pub mean: f64,
    pub p50: f64,
    pub p90: f64,
}

impl LatencyStats {
    /// Mean and nearest-rank percentiles of per-iteration latencies in ms.
    pub fn from_samples(samples: &[f64]) -> Option<Self> {
        if samples.is_empty() {
            return None;
        }
        let mut sorted = samples.to_vec();
        sorted.sort_by(f64::total_cmp);
        let rank =
            |q: f64| sorted[((q * sorted.len() as f64).ceil() as usize).clamp(1, sorted.len()) - 1];
        Some(Self {
            mean: sorted.iter().sum::<f64>() / sorted.len() as f64,
            p50: rank(0.5),
            p90: rank(0.9),
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchReport {
    pub model_name: String,
    pub input_size: usize,
    pub warmup_iters: usize,
    pub timed_iters: usize,
    pub parallel: bool,
    pub latency_ms: LatencyStats,
    pub fps: f64,
    pub cost: CostReport,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BenchOptions {
    pub warmup: usize,
    pub iters: usize,
    pub conf_thresh: f32,
    pub parallel: bool,
}

impl Default for BenchOptions {
    fn default() -> Self {
        Self {
            warmup: 10,
            iters: 100,
            conf_thresh: DEFAULT_CONF,
            parallel: false,
        }
    }
}

/// Times `model` on frames from `source`, cycling through them as needed.
pub fn run_benchmark(
    model_name: &str,
    model: &Model,
    source: &mut dyn FrameSource,
    opts: &BenchOptions,
) -> Result<BenchReport> {
    let mut reports = run_interleaved(&[(model_name, model)], source, opts)?;
    Ok(reports.remove(0))
}

/// Times several models on the same preloaded frames, alternating between
/// them every iteration so that machine-wide slowdowns hit all of them alike.
/// Each model gets `opts.warmup` untimed and `opts.iters` timed iterations.
pub fn run_interleaved(
    models: &[(&str, &Model)],
    source: &mut dyn FrameSource,
    opts: &BenchOptions,
) -> Result<Vec<BenchReport>> {
    if opts.iters == 0 {
        return Err(BenchError::NoIterations);
    }
    let frames = collect_frames(source)?;
    let first = frames
        .first()
        .ok_or(BenchError::EmptySource)?
        .tensor
        .shape();
    if first.h != first.w || frames.iter().any(|f| f.tensor.shape() != first) {
        return Err(BenchError::FrameShape(first.to_string()));
    }
    let exec = FastExec {
        parallel: opts.parallel,
    };
    let step = |model: &Model, i: usize| -> Result<f64> {
        let x = &frames[i % frames.len()].tensor;
        let start = Instant::now();
        let raw = model.forward_with(x, &exec)?;
        let dets = decode(&raw, opts.conf_thresh)?;
        let kept: usize = dets.iter().map(|d| nms(d, NMS_IOU).len()).sum();
        let ms = start.elapsed().as_secs_f64() * 1e3;
        std::hint::black_box(kept);
        Ok(ms)
    };
    for i in 0..opts.warmup {
        for (_, m) in models {
            step(m, i)?;
        }
    }
    let mut samples = vec![Vec::with_capacity(opts.iters); models.len()];
    for i in 0..opts.iters {
        for ((_, m), s) in models.iter().zip(&mut samples) {
            s.push(step(m, opts.warmup + i)?);
        }
    }
    models
        .iter()
        .zip(samples)
        .map(|((name, m), s)| {
            let latency_ms = LatencyStats::from_samples(&s).expect("at least one sample");
            Ok(BenchReport {
                model_name: name.to_string(),
                input_size: first.h,
                warmup_iters: opts.warmup,
                timed_iters: opts.iters,
                parallel: opts.parallel,
                fps: 1000.0 / latency_ms.mean,
                latency_ms,
                cost: m.cost_report(first.h)?,
            })
        })
        .collect()
}

/// Percentage changes going from `a` to `b`: `(b − a) / a · 100`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CostDelta {
    pub params_pct: f64,
    pub flops_pct: f64,
    pub size_pct: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Comparison {
    pub a: String,
    pub b: String,
    pub input_size: usize,
    pub fps_pct: f64,
    pub cost: CostDelta,
}

fn pct(a: f64, b: f64) -> f64 {
    (b - a) / a * 100.0
}

pub fn compare_costs(a: &CostReport, b: &CostReport) -> Result<CostDelta> {
    if a.input_size != b.input_size {
        return Err(BenchError::InputMismatch {
            a: a.input_size,
            b: b.input_size,
        });
    }
    Ok(CostDelta {
        params_pct: pct(a.params as f64, b.params as f64),
        flops_pct: pct(a.flops as f64, b.flops as f64),
        size_pct: pct(a.size_bytes as f64, b.size_bytes as f64),
    })
}

pub fn compare(a: &BenchReport, b: &BenchReport) -> Result<Comparison> {
    if a.input_size != b.input_size {
        return Err(BenchError::InputMismatch {
            a: a.input_size,
            b: b.input_size,
        });
    }
    Ok(Comparison {
        a: a.model_name.clone(),
        b: b.model_name.clone(),
        input_size: a.input_size,
        fps_pct: pct(a.fps, b.fps),
        cost: compare_costs(&a.cost, &b.cost)?,
    })
}

impl Comparison {
    pub fn to_table(&self) -> String {
        let mut s = format!("{} -> {} @ {}px\n", self.a, self.b, self.input_size);
        for (k, v) in [
            ("fps", self.fps_pct),
            ("params", self.cost.params_pct),
            ("gflops", self.cost.flops_pct),
            ("size", self.cost.size_pct),
        ] {
            s.push_str(&format!("{k:<8}{v:>+9.2}%\n"));
        }
        s
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum)]
pub enum Format {
    Json,
    Csv,
    Table,
}

impl Format {
    /// `.json`/`.csv` by extension, anything else is a table.
    pub fn from_path(path: &Path) -> Self {
        match path.extension().and_then(|e| e.to_str()) {
            Some("json") => Format::Json,
            Some("csv") => Format::Csv,
            _ => Format::Table,
        }
    }
}

/// Pretty JSON with keys sorted at every level.
pub fn to_sorted_json<T: Serialize>(v: &T) -> String {
    let value = serde_json::to_value(v).expect("report serializes");
    let mut s = serde_json::to_string_pretty(&value).expect("value serializes");
    s.push('\n');
    s
}

pub fn render_csv(reports: &[BenchReport]) -> Result<String> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(CSV_HEADER.split(','))?;
    for r in reports {
        w.write_record([
            r.model_name.clone(),
            r.input_size.to_string(),
            r.cost.params.to_string(),
            format!("{:.3}", r.cost.gflops()),
            format!("{:.3}", r.cost.size_mb()),
            format!("{:.2}", r.fps),
            format!("{:.3}", r.latency_ms.mean),
            format!("{:.3}", r.latency_ms.p50),
            format!("{:.3}", r.latency_ms.p90),
        ])?;
    }
    let bytes = w
        .into_inner()
        .map_err(|e| csv::Error::from(e.into_error()))?;
    Ok(String::from_utf8(bytes).expect("csv output is utf-8"))
}

pub fn render_table(reports: &[BenchReport]) -> String {
    let mut s = format!(
        "{:<16} {:>5} {:>10} {:>8} {:>8} {:>8} {:>9} {:>9} {:>9}\n",
        "model", "input", "params", "gflops", "size_mb", "fps", "mean_ms", "p50_ms", "p90_ms"
    );
    for r in reports {
        s.push_str(&format!(
            "{:<16} {:>5} {:>10} {:>8.3} {:>8.3} {:>8.2} {:>9.3} {:>9.3} {:>9.3}\n",
            r.model_name,
            r.input_size,
            r.cost.params,
            r.cost.gflops(),
            r.cost.size_mb(),
            r.fps,
            r.latency_ms.mean,
            r.latency_ms.p50,
            r.latency_ms.p90
        ));
    }
    s
}

pub fn render(report: &BenchReport, format: Format) -> Result<String> {
    Ok(match format {
        Format::Json => to_sorted_json(report),
        Format::Csv => render_csv(std::slice::from_ref(report))?,
        Format::Table => render_table(std::slice::from_ref(report)),
    })
}

pub fn emit(report: &BenchReport, path: &Path, format: Format) -> Result<()> {
    let text = render(report, format)?;
    std::fs::write(path, text).map_err(|source| BenchError::Io {
        path: path.to_path_buf(),
        source,
    })
}

pub fn read_report(path: &Path) -> Result<BenchReport> {
    let text = std::fs::read_to_string(path).map_err(|source| BenchError::Io {
        path: path.to_path_buf(),
        source,
    })?;
    serde_json::from_str(&text).map_err(|source| BenchError::Json {
        path: path.to_path_buf(),
        source,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn single_sample_stats() {
        let s = LatencyStats::from_samples(&[4.0]).unwrap();
        assert_eq!((s.mean, s.p50, s.p90), (4.0, 4.0, 4.0));
        assert!(LatencyStats::from_samples(&[]).is_none());
    }

    #[test]
    fn nearest_rank_percentiles() {
        let v: Vec<f64> = (1..=10).rev().map(f64::from).collect();
        let s = LatencyStats::from_samples(&v).unwrap();
        assert_eq!((s.p50, s.p90, s.mean), (5.0, 9.0, 5.5));
    }

    #[test]
    fn format_from_extension() {
        assert_eq!(Format::from_path(Path::new("r.json")), Format::Json);
        assert_eq!(Format::from_path(Path::new("r.csv")), Format::Csv);
        assert_eq!(Format::from_path(Path::new("r.txt")), Format::Table);
    }
}
