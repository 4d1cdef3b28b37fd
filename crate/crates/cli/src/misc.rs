use std::io::Write;
use std::path::PathBuf;

use anyhow::{Context, Result};
use clap::Args;
use delaynet::neuron::{memory_bound_table, write_memory_bound_csv};
use delaynet::tasks::io::generate_dataset;
use delaynet::tasks::CueTaskConfig;

use crate::exit::{load_config, Invalid};

#[derive(Debug, Args)]
pub struct GenerateArgs {
    /// Destination directory.
    #[arg(long, short)]
    pub output: PathBuf,
    /// Config providing the task settings; the standard 7-cue task otherwise.
    #[arg(long, short)]
    pub config: Option<PathBuf>,
    #[arg(long, default_value_t = 16)]
    pub count: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Override the number of cues.
    #[arg(long)]
    pub n_cues: Option<usize>,
    /// Fix the wait time in ms.
    #[arg(long)]
    pub wait_ms: Option<f64>,
}

pub fn generate(args: GenerateArgs) -> Result<()> {
    let mut task = match &args.config {
        Some(p) => load_config(p)?.task.cue,
        None => CueTaskConfig::default(),
    };
    if let Some(n) = args.n_cues {
        task.n_cues = n;
    }
    if let Some(w) = args.wait_ms {
        task.wait_range_ms = [w, w];
    }
    task.validate().map_err(|e| Invalid(e.to_string()))?;
    let m = generate_dataset(&args.output, &task, args.seed, args.count)?;
    println!("wrote {} episodes to {}", m.count, args.output.display());
    Ok(())
}

#[derive(Debug, Args)]
pub struct MemoryBoundArgs {
    /// Comma-separated membrane bit widths.
    #[arg(long, value_delimiter = ',', required = true)]
    pub bits: Vec<u32>,
    /// Comma-separated leak time constants in ms.
    #[arg(long, value_delimiter = ',', required = true)]
    pub tau: Vec<f64>,
    #[arg(long, default_value_t = 1.0)]
    pub dt: f64,
    /// CSV destination; stdout when omitted.
    #[arg(long, short)]
    pub output: Option<PathBuf>,
}

pub fn memory_bound(args: MemoryBoundArgs) -> Result<()> {
    let rows = memory_bound_table(&args.bits, &args.tau, args.dt)?;
    let mut out: Box<dyn Write> = match &args.output {
        Some(p) => Box::new(std::fs::File::create(p).with_context(|| format!("creating {}", p.display()))?),
        None => Box::new(std::io::stdout()),
    };
    write_memory_bound_csv(&mut out, &rows)?;
    out.flush()?;
    Ok(())
}
