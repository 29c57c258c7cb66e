use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use clap::{Parser, Subcommand};
use phantom_bench::{
    compare, compare_costs, read_report, render, render_table, run_interleaved, to_sorted_json,
    BenchOptions, Format,
};
use phantom_core::frames::{FrameSource, ImageDirSource, SyntheticSource};
use phantom_core::netgraph::{count_costs, load_config, load_model, save_weights, Model};
use phantom_core::postprocess::{evaluate_map, read_records, split_records, DEFAULT_CONF};

#[derive(Parser)]
#[command(name = "bench", about = "Benchmark, cost and evaluate detector graphs")]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Time forward + decode + NMS and write a report. With several
    /// `--config`s the models are timed in alternation on the same frames.
    Run {
        /// Config file or `builtin:phantom` / `builtin:baseline`; repeatable.
        #[arg(long, required = true)]
        config: Vec<String>,
        /// Weight manifest path or `random:SEED`.
        #[arg(long, default_value = "random:0")]
        weights: String,
        #[arg(long, default_value_t = 640)]
        size: usize,
        #[arg(long, default_value_t = 100)]
        iters: usize,
        #[arg(long, default_value_t = 10)]
        warmup: usize,
        /// `synthetic` or `dir:PATH` to a directory of PNG/JPEG images.
        #[arg(long, default_value = "synthetic")]
        source: String,
        /// Synthetic frames to cycle through.
        #[arg(long, default_value_t = 4)]
        frames: u64,
        #[arg(long, default_value_t = DEFAULT_CONF)]
        conf: f32,
        /// Let convolutions use all cores.
        #[arg(long)]
        parallel: bool,
        /// Name recorded in each report (defaults to the config spec); repeatable.
        #[arg(long)]
        name: Vec<String>,
        /// Report file. With several configs, one file per model is written
        /// as `<stem>-<name>.<ext>`.
        #[arg(long)]
        out: Option<PathBuf>,
        /// Output format; inferred from `--out` when omitted.
        #[arg(long, value_enum)]
        format: Option<Format>,
    },
    /// Percentage deltas from report A to report B.
    Compare {
        a: PathBuf,
        b: PathBuf,
        #[arg(long)]
        json: bool,
    },
    /// Parameter, GFLOP and size accounting without timing. With several
    /// configs, deltas are reported against the first.
    Cost {
        #[arg(long, required = true)]
        config: Vec<String>,
        #[arg(long)]
        size: Option<usize>,
        /// Print the per-layer table for each config.
        #[arg(long)]
        layers: bool,
        #[arg(long)]
        json: bool,
    },
    /// mAP50 and mAP50-95 from JSON-lines predictions and ground truth.
    Eval {
        #[arg(long)]
        preds: PathBuf,
        #[arg(long)]
        gt: PathBuf,
    },
    /// Write seeded random weights for a config (manifest + `.bin`).
    InitWeights {
        #[arg(long)]
        config: String,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
    },
}

fn per_model_path(path: &Path, name: &str) -> PathBuf {
    let stem = path
        .file_stem()
        .and_then(|s| s.to_str())
        .unwrap_or("report");
    let safe: String = name
        .chars()
        .map(|c| {
            if c.is_alphanumeric() || c == '-' || c == '_' {
                c
            } else {
                '_'
            }
        })
        .collect();
    let file = match path.extension().and_then(|e| e.to_str()) {
        Some(ext) => format!("{stem}-{safe}.{ext}"),
        None => format!("{stem}-{safe}"),
    };
    path.with_file_name(file)
}

fn main() -> Result<()> {
    match Cli::parse().cmd {
        Cmd::Run {
            config,
            weights,
            size,
            iters,
            warmup,
            source,
            frames,
            conf,
            parallel,
            name,
            out,
            format,
        } => {
            if !name.is_empty() && name.len() != config.len() {
                bail!(
                    "give one --name per --config ({} names for {} configs)",
                    name.len(),
                    config.len()
                );
            }
            let mut models = Vec::new();
            for spec in &config {
                let graph = load_config(spec).with_context(|| format!("loading config {spec}"))?;
                models.push(
                    load_model(graph, &weights)
                        .with_context(|| format!("loading weights {weights}"))?,
                );
            }
            let names: Vec<String> = if name.is_empty() {
                config
                    .iter()
                    .map(|c| c.trim_start_matches("builtin:").to_string())
                    .collect()
            } else {
                name
            };
            let mut src: Box<dyn FrameSource> = if source == "synthetic" {
                Box::new(SyntheticSource::new(0, size, frames.max(1)))
            } else {
                Box::new(ImageDirSource::open(
                    source.strip_prefix("dir:").unwrap_or(&source).as_ref(),
                    size,
                )?)
            };
            let opts = BenchOptions {
                warmup,
                iters,
                conf_thresh: conf,
                parallel,
            };
            let pairs: Vec<(&str, &Model)> =
                names.iter().map(String::as_str).zip(&models).collect();
            let reports = run_interleaved(&pairs, src.as_mut(), &opts)?;
            print!("{}", render_table(&reports));
            if let Some(path) = out {
                let fmt = format.unwrap_or_else(|| Format::from_path(&path));
                for r in &reports {
                    let target = if reports.len() == 1 {
                        path.clone()
                    } else {
                        per_model_path(&path, &r.model_name)
                    };
                    phantom_bench::emit(r, &target, fmt)?;
                }
            } else if let Some(fmt) = format {
                for r in &reports {
                    print!("{}", render(r, fmt)?);
                }
            }
        }
        Cmd::Compare { a, b, json } => {
            let (ra, rb) = (read_report(&a)?, read_report(&b)?);
            let c = compare(&ra, &rb)?;
            if json {
                print!("{}", to_sorted_json(&c));
            } else {
                print!("{}", c.to_table());
            }
        }
        Cmd::Cost {
            config,
            size,
            layers,
            json,
        } => {
            let mut reports = Vec::new();
            for spec in &config {
                let g = load_config(spec).with_context(|| format!("loading config {spec}"))?;
                let s = size.unwrap_or(g.input_size());
                reports.push((spec.clone(), count_costs(&g, s)?));
            }
            if json {
                let deltas = reports
                    .iter()
                    .skip(1)
                    .map(|(n, r)| Ok((n.clone(), compare_costs(&reports[0].1, r)?)))
                    .collect::<Result<Vec<_>>>()?;
                let doc = serde_json::json!({
                    "reports": reports.iter().map(|(n, r)| serde_json::json!({"config": n, "report": r})).collect::<Vec<_>>(),
                    "deltas_vs_first": deltas.iter().map(|(n, d)| serde_json::json!({"config": n, "delta": d})).collect::<Vec<_>>(),
                });
                print!("{}", to_sorted_json(&doc));
                return Ok(());
            }
            println!(
                "{:<24} {:>5} {:>10} {:>9} {:>9}",
                "config", "input", "params", "gflops", "size_mb"
            );
            for (n, r) in &reports {
                println!(
                    "{:<24} {:>5} {:>10} {:>9.3} {:>9.3}",
                    n,
                    r.input_size,
                    r.params,
                    r.gflops(),
                    r.size_mb()
                );
            }
            for (n, r) in reports.iter().skip(1) {
                let d = compare_costs(&reports[0].1, r)?;
                println!(
                    "{n} vs {}: params {:+.2}%  gflops {:+.2}%  size {:+.2}%",
                    reports[0].0, d.params_pct, d.flops_pct, d.size_pct
                );
            }
            if layers {
                for (n, r) in &reports {
                    println!("\n{n}\n{}", r.to_table());
                }
            }
        }
        Cmd::Eval { preds, gt } => {
            let read = |p: &PathBuf| -> Result<_> {
                let text = std::fs::read_to_string(p)
                    .with_context(|| format!("reading {}", p.display()))?;
                read_records(&text).with_context(|| format!("parsing {}", p.display()))
            };
            let (p, stray_gt) = split_records(read(&preds)?);
            let (stray_preds, g) = split_records(read(&gt)?);
            if !stray_gt.is_empty() || !stray_preds.is_empty() {
                bail!("prediction lines need a score and ground-truth lines must not have one");
            }
            print!("{}", to_sorted_json(&evaluate_map(&p, &g)));
        }
        Cmd::InitWeights { config, seed, out } => {
            let model = Model::random(load_config(&config)?, seed)?;
            save_weights(&model, &out)?;
            println!(
                "wrote {} parameters to {}",
                model.param_count(),
                out.display()
            );
        }
    }
    Ok(())
}
