use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::PathBuf;

use anyhow::{Context, Result};
use clap::Args;
use delaynet::analysis::{spectral_radius, spike_rate_spectrum, write_spectrum_csv, SpectrumOptions, WindowFn};
use delaynet::checkpoint::load_checkpoint;
use delaynet::experiment::{ExperimentConfig, RunManifest};
use delaynet::network::{forward, readout_decision, write_raster_csv, write_run_file};
use delaynet::seed::derive_indexed;
use delaynet::tasks::{generate_cue_sample, CueTaskConfig};
use serde::Serialize;

use crate::exit::{load_config, Invalid};
use crate::plot::{raster_png, spectrum_png};

#[derive(Debug, Args)]
pub struct AnalyzeArgs {
    /// Checkpoint written by `train`.
    #[arg(long)]
    pub checkpoint: PathBuf,
    /// Config providing the task; the standard 7-cue task otherwise.
    #[arg(long, short)]
    pub config: Option<PathBuf>,
    /// Output directory.
    #[arg(long, short)]
    pub output: PathBuf,
    /// Seed of the analyzed episode.
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Fixed wait in ms for the analyzed episode.
    #[arg(long)]
    pub wait_ms: Option<f64>,
    /// Use a Hann window for the spectrum.
    #[arg(long)]
    pub hann: bool,
    /// Spectrum over steps from here on (default: whole episode).
    #[arg(long)]
    pub from_step: Option<usize>,
    /// Highest frequency drawn in the spectrum image.
    #[arg(long, default_value_t = 100.0)]
    pub max_hz: f64,
}

#[derive(Serialize)]
struct Summary {
    spectral_radius: Option<f64>,
    tau_rec_ms: f64,
    tau_out_ms: f64,
    u_th: f64,
    steps: usize,
    total_spikes: u64,
    mean_rate_hz: f64,
    peak_hz: Option<f64>,
    label: usize,
    decision: usize,
}

pub fn analyze(args: AnalyzeArgs) -> Result<()> {
    let config = args.config.as_deref().map(load_config).transpose()?;
    let mut task = config.as_ref().map_or_else(CueTaskConfig::default, |c| c.task.cue.clone());
    if let Some(w) = args.wait_ms {
        task.wait_range_ms = [w, w];
    }
    task.validate().map_err(|e| Invalid(e.to_string()))?;
    let ckpt = load_checkpoint(&args.checkpoint)?;
    let sample = generate_cue_sample(&task, derive_indexed(args.seed, "analyze", 0))?;
    let ep = sample.into_episode();
    let trace = forward(&ckpt.params, &ckpt.delays, &ep.input, ckpt.reset_mode)
        .map_err(|e| match e {
            delaynet::Error::InvalidArgument(m) => Invalid(m).into(),
            other => anyhow::Error::from(other),
        })?;
    let decision = readout_decision(&trace, &ep.window)?;

    let range = args.from_step.map(|s| s..trace.steps());
    if let Some(r) = &range {
        if r.start >= r.end {
            return Err(Invalid(format!("--from-step {} is past the episode end {}", r.start, r.end)).into());
        }
    }
    let opts = SpectrumOptions { window: if args.hann { WindowFn::Hann } else { WindowFn::Rectangular }, range };
    let spectrum = spike_rate_spectrum(&trace.spikes, &opts)?;
    let rho = spectral_radius(&ckpt.params.w_rec).map_err(|e| log::warn!("spectral radius: {e}")).ok();

    let dir = &args.output;
    fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
    let create = |name: &str| -> Result<BufWriter<File>> {
        let p = dir.join(name);
        Ok(BufWriter::new(File::create(&p).with_context(|| format!("creating {}", p.display()))?))
    };
    let mut w = create("raster.csv")?;
    write_raster_csv(&mut w, &trace.spikes)?;
    w.flush()?;
    let mut w = create("spectrum.csv")?;
    write_spectrum_csv(&mut w, &spectrum)?;
    w.flush()?;
    let mut w = create("run.bin")?;
    write_run_file(&mut w, &trace)?;
    w.flush()?;
    raster_png(&trace.spikes, 1600, &dir.join("raster.png"))?;
    spectrum_png(&spectrum, args.max_hz, &dir.join("spectrum.png"))?;

    let neuron_s = (trace.steps() * trace.n_hidden()) as f64 * trace.dt_ms / 1000.0;
    let summary = Summary {
        spectral_radius: rho,
        tau_rec_ms: ckpt.params.tau_rec,
        tau_out_ms: ckpt.params.tau_out,
        u_th: ckpt.params.u_th,
        steps: trace.steps(),
        total_spikes: trace.spikes.total(),
        mean_rate_hz: trace.spikes.total() as f64 / neuron_s.max(f64::MIN_POSITIVE),
        peak_hz: spectrum.peak_hz(),
        label: ep.label,
        decision,
    };
    fs::write(dir.join("analysis.json"), serde_json::to_string_pretty(&summary)?)?;
    let hash = config.as_ref().map_or_else(|| ExperimentConfig::default().hash(), ExperimentConfig::hash);
    RunManifest {
        name: config.as_ref().map_or_else(|| "analyze".into(), |c| c.name.clone()),
        command: "analyze".into(),
        config_hash: hash,
        seed: args.seed,
        files: ["raster.csv", "spectrum.csv", "run.bin", "raster.png", "spectrum.png", "analysis.json"]
            .map(String::from)
            .to_vec(),
    }
    .save(dir)?;
    println!(
        "spectral radius {}, peak {} Hz, {} spikes over {} steps",
        rho.map_or("n/a".into(), |r| format!("{r:.4}")),
        summary.peak_hz.map_or("n/a".into(), |f| format!("{f:.2}")),
        summary.total_spikes,
        summary.steps
    );
    Ok(())
}
