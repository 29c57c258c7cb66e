use std::path::PathBuf;
use std::sync::atomic::{AtomicBool, Ordering};
use std::sync::Arc;

use anyhow::{Context, Result};
use clap::{Parser, Subcommand};
use edgepipe::PipelineConfig;

#[derive(Parser)]
#[command(name = "edgepipe", about = "Edge detection and notification daemon")]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Run the pipeline until the source ends or Ctrl-C.
    Run {
        #[arg(long)]
        config: PathBuf,
    },
}

fn main() -> Result<()> {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    match Cli::parse().cmd {
        Cmd::Run { config } => {
            let cfg = PipelineConfig::load(&config)?;
            let pipeline = cfg.build().context("setting up pipeline")?;
            log::info!(
                "device {}: sinks {:?}, dead letter {}",
                cfg.device_id,
                pipeline.dispatcher.sink_names(),
                pipeline.dispatcher.dead_letter_path().display()
            );
            let stop = Arc::new(AtomicBool::new(false));
            let flag = Arc::clone(&stop);
            ctrlc::set_handler(move || flag.store(true, Ordering::Relaxed))
                .context("installing signal handler")?;
            let summary = pipeline.run(&stop);
            println!("{}", serde_json::to_string_pretty(&summary)?);
        }
    }
    Ok(())
}
