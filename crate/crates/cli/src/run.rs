use std::fs::{self, File};
use std::io::BufWriter;
use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use clap::Args;
use delaynet::analysis::spectral_radius;
use delaynet::checkpoint::{save_checkpoint, Checkpoint};
use delaynet::experiment::{DelayMode, ExperimentConfig, RunManifest, TrainReport};
use delaynet::topology::DelaySchedule;
use delaynet::training::{
    self as training, write_metrics_csv, BatchInfo, ConstraintAsserter, EpochInfo, TrainObserver, TrainOutcome, TrainStatus,
};

use crate::exit::{load_config, Diverged, Invalid};

#[derive(Debug, Args)]
pub struct TrainArgs {
    /// Experiment config (TOML).
    #[arg(long, short)]
    pub config: PathBuf,
    /// Output directory; overrides `output_dir` from the config.
    #[arg(long, short)]
    pub output: Option<PathBuf>,
    /// Root seed; overrides `seed` from the config.
    #[arg(long)]
    pub seed: Option<u64>,
    /// Number of epochs; overrides `train.epochs`.
    #[arg(long)]
    pub epochs: Option<usize>,
}

#[derive(Debug, Args)]
pub struct AblateArgs {
    #[command(flatten)]
    pub run: TrainArgs,
    /// Give every neuron a zero transmission delay.
    #[arg(long)]
    pub no_delays: bool,
    /// Drop the branching-factor regularizer (beta = 0).
    #[arg(long)]
    pub no_bf: bool,
    /// Remove the recurrent weights.
    #[arg(long)]
    pub no_recurrence: bool,
    /// Pin the hidden time constant at 2000 ms, overriding the clamp.
    #[arg(long)]
    pub long_tau: bool,
    /// Do not train the unmodified model for comparison.
    #[arg(long)]
    pub skip_baseline: bool,
}

pub const LONG_TAU_MS: f64 = 2000.0;

fn apply_overrides(cfg: &mut ExperimentConfig, args: &TrainArgs) {
    if let Some(o) = &args.output {
        cfg.output_dir = o.clone();
    }
    if let Some(s) = args.seed {
        cfg.seed = s;
    }
    if let Some(e) = args.epochs {
        cfg.train.epochs = e;
    }
}

/// Saves the latest checkpoint at the end of every epoch and checks the
/// parameter constraints after every batch.
struct RunObserver<'a> {
    checkpoint: PathBuf,
    delays: &'a DelaySchedule,
    cfg: &'a ExperimentConfig,
    asserter: ConstraintAsserter,
}

impl TrainObserver for RunObserver<'_> {
    fn after_batch(&mut self, info: &BatchInfo<'_>) -> delaynet::Result<()> {
        self.asserter.after_batch(info)
    }

    fn after_epoch(&mut self, info: &EpochInfo<'_>) -> delaynet::Result<()> {
        save_checkpoint(
            &self.checkpoint,
            &Checkpoint {
                params: info.params.clone(),
                delays: self.delays.clone(),
                reset_mode: self.cfg.train.reset_mode,
                optimizer: info.optimizer.clone(),
            },
        )
    }
}

fn write_with<F>(path: &Path, f: F) -> Result<()>
where
    F: FnOnce(&mut BufWriter<File>) -> std::io::Result<()>,
{
    let file = File::create(path).with_context(|| format!("creating {}", path.display()))?;
    let mut w = BufWriter::new(file);
    f(&mut w).and_then(|_| std::io::Write::flush(&mut w)).with_context(|| format!("writing {}", path.display()))
}

/// Trains one configuration and writes its artifacts into `cfg.output_dir`.
pub fn execute(cfg: &ExperimentConfig, command: &str) -> Result<(TrainOutcome, TrainReport)> {
    let dir = &cfg.output_dir;
    fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
    let task = cfg.load_task()?;
    let delays = cfg.build_delays(task.dt_ms())?;
    let hash = cfg.hash();
    log::info!("{}: config {hash}, seed {}, {} hidden neurons", cfg.name, cfg.seed, cfg.network.n_hidden);

    fs::write(dir.join("config.toml"), cfg.to_toml()).context("writing config.toml")?;
    fs::write(dir.join("delays.json"), delays.to_json()).context("writing delays.json")?;
    let mut observer =
        RunObserver { checkpoint: dir.join("checkpoint.bin"), delays: &delays, cfg, asserter: Default::default() };
    let outcome = training::train(&cfg.train, cfg.network.n_hidden, &delays, task.stream(), cfg.seed, &mut observer)?;

    let checkpoint = Checkpoint {
        params: outcome.params.clone(),
        delays: delays.clone(),
        reset_mode: cfg.train.reset_mode,
        optimizer: outcome.optimizer.clone(),
    };
    save_checkpoint(&dir.join("checkpoint.bin"), &checkpoint)?;
    write_with(&dir.join("metrics.csv"), |w| write_metrics_csv(w, &outcome.history))?;

    let rho = match spectral_radius(&outcome.params.w_rec) {
        Ok(r) => Some(r),
        Err(e) => {
            log::warn!("spectral radius: {e}");
            None
        }
    };
    let report = TrainReport {
        status: match &outcome.status {
            TrainStatus::Completed => "completed".into(),
            TrainStatus::Diverged { .. } => "diverged".into(),
        },
        epochs_completed: outcome.history.len(),
        test_accuracy: outcome.history.last().map_or(f64::NAN, |m| m.test_acc),
        tau_rec_ms: outcome.params.tau_rec,
        tau_out_ms: outcome.params.tau_out,
        u_th: outcome.params.u_th,
        spectral_radius: rho,
        config_hash: hash.clone(),
        seed: cfg.seed,
    };
    fs::write(dir.join("report.json"), serde_json::to_string_pretty(&report)?).context("writing report.json")?;
    RunManifest {
        name: cfg.name.clone(),
        command: command.into(),
        config_hash: hash,
        seed: cfg.seed,
        files: ["config.toml", "delays.json", "checkpoint.bin", "metrics.csv", "report.json"]
            .map(String::from)
            .to_vec(),
    }
    .save(dir)?;
    Ok((outcome, report))
}

fn finish(outcome: &TrainOutcome) -> Result<()> {
    match &outcome.status {
        TrainStatus::Completed => Ok(()),
        TrainStatus::Diverged { epoch, batch, message } => Err(Diverged(format!(
            "epoch {epoch}, batch {batch}: {message}; last finite parameters saved"
        ))
        .into()),
    }
}

pub fn train(args: TrainArgs) -> Result<()> {
    let mut cfg = load_config(&args.config)?;
    apply_overrides(&mut cfg, &args);
    cfg.validate().map_err(|e| Invalid(e.to_string()))?;
    let (outcome, report) = execute(&cfg, "train")?;
    println!(
        "{}: test accuracy {:.4} after {} epochs (tau_rec {:.3} ms, tau_out {:.3} ms, u_th {:.4})",
        cfg.name, report.test_accuracy, report.epochs_completed, report.tau_rec_ms, report.tau_out_ms, report.u_th
    );
    finish(&outcome)
}

/// Applies the requested ablations to a copy of `base`.
pub fn ablated(base: &ExperimentConfig, args: &AblateArgs) -> Result<(ExperimentConfig, String)> {
    if !(args.no_delays || args.no_bf || args.no_recurrence || args.long_tau) {
        return Err(Invalid("nothing to ablate: pass at least one of --no-delays, --no-bf, --no-recurrence, --long-tau".into()).into());
    }
    if args.no_delays && args.no_recurrence {
        return Err(Invalid("--no-delays and --no-recurrence contradict: delays only act on recurrent connections".into()).into());
    }
    let mut cfg = base.clone();
    let mut tags = Vec::new();
    if args.no_delays {
        cfg.delays.mode = DelayMode::Uniform;
        cfg.delays.delays_ms = vec![0.0];
        tags.push("no-delays");
    }
    if args.no_bf {
        cfg.train.loss.beta = 0.0;
        tags.push("no-bf");
    }
    if args.no_recurrence {
        cfg.train.recurrent = false;
        tags.push("no-recurrence");
    }
    if args.long_tau {
        cfg.train.init.tau_rec_ms = LONG_TAU_MS;
        cfg.train.constraints.tau_rec_clamp = [LONG_TAU_MS, LONG_TAU_MS];
        tags.push("long-tau");
    }
    let tag = tags.join("+");
    cfg.name = format!("{}-{tag}", base.name);
    cfg.output_dir = base.output_dir.join(&tag);
    Ok((cfg, tag))
}

pub fn ablate(args: AblateArgs) -> Result<()> {
    let mut base = load_config(&args.run.config)?;
    apply_overrides(&mut base, &args.run);
    base.validate().map_err(|e| Invalid(e.to_string()))?;
    let (modified, tag) = ablated(&base, &args)?;

    let mut rows = Vec::new();
    if !args.skip_baseline {
        let mut b = base.clone();
        b.output_dir = base.output_dir.join("baseline");
        let (outcome, report) = execute(&b, "ablate")?;
        finish(&outcome)?;
        rows.push(("baseline".to_string(), report));
    }
    let (outcome, report) = execute(&modified, "ablate")?;
    rows.push((tag, report));

    fs::create_dir_all(&base.output_dir)?;
    write_with(&base.output_dir.join("ablation.csv"), |w| {
        use std::io::Write;
        writeln!(w, "variant,test_accuracy,epochs,tau_rec_ms,status")?;
        for (name, r) in &rows {
            writeln!(w, "{name},{},{},{},{}", r.test_accuracy, r.epochs_completed, r.tau_rec_ms, r.status)?;
        }
        Ok(())
    })?;
    RunManifest {
        name: base.name.clone(),
        command: "ablate".into(),
        config_hash: base.hash(),
        seed: base.seed,
        files: vec!["ablation.csv".into()],
    }
    .save(&base.output_dir)?;
    for (name, r) in &rows {
        println!("{name}: test accuracy {:.4}", r.test_accuracy);
    }
    finish(&outcome)
}
