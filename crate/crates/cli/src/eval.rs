use std::io::Write;
use std::path::PathBuf;

use anyhow::{Context, Result};
use clap::Args;
use delaynet::checkpoint::load_checkpoint;
use delaynet::experiment::{ExperimentConfig, RunManifest};
use delaynet::seed::derive_indexed;
use delaynet::tasks::{generate_cue_sample, probabilistic_baseline_accuracy, CueTaskConfig, BASELINE_MEMORY};
use delaynet::training::evaluate_with;

use crate::exit::{load_config, Invalid};

#[derive(Debug, Args)]
pub struct EvalArgs {
    /// Checkpoint written by `train`.
    #[arg(long)]
    pub checkpoint: PathBuf,
    /// Config providing the base task settings; the standard 7-cue task otherwise.
    #[arg(long, short)]
    pub config: Option<PathBuf>,
    /// Comma-separated fixed wait times in ms.
    #[arg(long, value_delimiter = ',')]
    pub wait_ms: Vec<f64>,
    /// Comma-separated cue counts.
    #[arg(long, value_delimiter = ',')]
    pub n_cues: Vec<usize>,
    /// Episodes per variant value.
    #[arg(long, default_value_t = 512)]
    pub samples: usize,
    /// Root seed for the evaluation episodes.
    #[arg(long)]
    pub seed: Option<u64>,
    /// CSV destination; stdout when omitted.
    #[arg(long, short)]
    pub output: Option<PathBuf>,
}

/// One row of the long-format sweep table.
#[derive(Debug, Clone, PartialEq)]
pub struct EvalRow {
    pub variant: &'static str,
    pub value: f64,
    pub accuracy: f64,
    pub n_samples: usize,
    pub baseline: Option<f64>,
}

pub fn eval(args: EvalArgs) -> Result<()> {
    if args.samples == 0 {
        return Err(Invalid("--samples must be positive".into()).into());
    }
    if let Some(w) = args.wait_ms.iter().find(|w| !(**w >= 0.0)) {
        return Err(Invalid(format!("--wait-ms values must be ≥ 0, got {w}")).into());
    }
    let config = args.config.as_deref().map(load_config).transpose()?;
    let base = config.as_ref().map_or_else(CueTaskConfig::default, |c| c.task.cue.clone());
    let seed = args.seed.or(config.as_ref().map(|c| c.seed)).unwrap_or(0);
    let ckpt = load_checkpoint(&args.checkpoint)?;
    if ckpt.params.n_in() != base.n_channels() || ckpt.params.n_out() != 2 {
        return Err(Invalid(format!(
            "checkpoint has {} inputs and {} outputs; the cue task needs {} and 2",
            ckpt.params.n_in(),
            ckpt.params.n_out(),
            base.n_channels()
        ))
        .into());
    }

    let mut variants: Vec<(&'static str, f64, CueTaskConfig)> = Vec::new();
    for &w in &args.wait_ms {
        variants.push(("wait_ms", w, CueTaskConfig { wait_range_ms: [w, w], ..base.clone() }));
    }
    for &n in &args.n_cues {
        variants.push(("n_cues", n as f64, CueTaskConfig { n_cues: n, ..base.clone() }));
    }
    if variants.is_empty() {
        variants.push(("standard", base.n_cues as f64, base.clone()));
    }

    let mut rows = Vec::new();
    for (variant, value, task) in variants {
        task.validate().map_err(|e| Invalid(format!("{variant}={value}: {e}")))?;
        let role = format!("eval/{variant}");
        let report = evaluate_with(&ckpt.params, &ckpt.delays, ckpt.reset_mode, args.samples, |j| {
            generate_cue_sample(&task, derive_indexed(seed, &role, j as u64)).map(|s| s.into_episode())
        })?;
        let baseline = (variant != "wait_ms").then(|| probabilistic_baseline_accuracy(task.n_cues, BASELINE_MEMORY));
        log::info!("{variant}={value}: accuracy {:.4}", report.accuracy);
        rows.push(EvalRow { variant, value, accuracy: report.accuracy, n_samples: args.samples, baseline });
    }

    let mut out: Box<dyn Write> = match &args.output {
        Some(p) => Box::new(std::fs::File::create(p).with_context(|| format!("creating {}", p.display()))?),
        None => Box::new(std::io::stdout()),
    };
    writeln!(out, "variant,value,accuracy,n_samples,baseline")?;
    for r in &rows {
        let b = r.baseline.map(|b| b.to_string()).unwrap_or_default();
        writeln!(out, "{},{},{},{},{b}", r.variant, r.value, r.accuracy, r.n_samples)?;
    }
    out.flush()?;

    if let Some(p) = &args.output {
        let dir = p.parent().filter(|d| !d.as_os_str().is_empty()).unwrap_or(std::path::Path::new("."));
        let hash = config.as_ref().map_or_else(|| ExperimentConfig::default().hash(), ExperimentConfig::hash);
        RunManifest {
            name: config.as_ref().map_or_else(|| "eval".into(), |c| c.name.clone()),
            command: "eval".into(),
            config_hash: hash,
            seed,
            files: vec![p.file_name().map(|f| f.to_string_lossy().into_owned()).unwrap_or_default()],
        }
        .save(dir)?;
    }
    Ok(())
}
