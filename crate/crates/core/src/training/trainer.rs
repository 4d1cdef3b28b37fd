//! Epoch loop: batched BPTT with clipping, MADGRAD and the constraint pass.

use std::ops::Range;

use rand::seq::SliceRandom;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::constraints::{apply_constraints, ConstraintConfig};
use super::init::{kaiming_uniform_recurrent_init, uniform_fan_in};
use super::loss::{
    branching_factor_grad, branching_factor_loss, cross_entropy, cross_entropy_grad, total_loss, LossConfig,
};
use super::optim::{madgrad_step, OptimizerConfig, OptimizerState};
use crate::bptt::{backward, clip_gradient_norm, Gradients};
use crate::error::{Error, Result};
use crate::matrix::Matrix;
use crate::network::{argmax, forward, readout_logits, NetworkParams};
use crate::neuron::ResetMode;
use crate::seed::{derive_indexed, derive_seed, rng};
use crate::spikes::Input;
use crate::topology::DelaySchedule;

/// One labelled input sequence with its readout window.
#[derive(Clone, Debug)]
pub struct Episode {
    pub input: Input,
    pub label: usize,
    pub window: Range<usize>,
}

/// Source of training and test episodes.
///
/// Generated tasks derive each episode from `seed`; fixed datasets pick by `index`.
/// Both calls must be pure functions of their arguments.
pub trait TaskStream: Sync {
    fn n_in(&self) -> usize;
    fn n_out(&self) -> usize;
    fn train_episode(&self, index: usize, seed: u64) -> Result<Episode>;
    fn test_episode(&self, index: usize, seed: u64) -> Result<Episode>;
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct InitConfig {
    pub tau_rec_ms: f64,
    pub tau_out_ms: f64,
    pub u_th: f64,
    /// Multipliers on the `√6/fan_in` bound. At gain 1 a 125-neuron network driven by
    /// the 40 Hz cue populations stays silent, so the defaults start it spiking.
    pub in_gain: f64,
    pub rec_gain: f64,
    pub out_gain: f64,
}

impl Default for InitConfig {
    fn default() -> Self {
        Self { tau_rec_ms: 20.0, tau_out_ms: 20.0, u_th: 1.0, in_gain: 10.0, rec_gain: 14.0, out_gain: 1.0 }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainConfig {
    pub epochs: usize,
    pub samples_per_epoch: usize,
    pub batch_size: usize,
    pub test_samples: usize,
    pub reset_mode: ResetMode,
    /// When false, `W_r` is held at zero.
    pub recurrent: bool,
    pub init: InitConfig,
    pub loss: LossConfig,
    pub optimizer: OptimizerConfig,
    pub constraints: ConstraintConfig,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            epochs: 40,
            samples_per_epoch: 256,
            batch_size: 64,
            test_samples: 512,
            reset_mode: ResetMode::SoftSubtract,
            recurrent: true,
            init: InitConfig::default(),
            loss: LossConfig::default(),
            optimizer: OptimizerConfig::default(),
            constraints: ConstraintConfig::default(),
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if self.batch_size == 0 {
            return Err(Error::invalid("batch_size must be positive"));
        }
        if self.samples_per_epoch == 0 && self.epochs > 0 {
            return Err(Error::invalid("samples_per_epoch must be positive"));
        }
        let i = &self.init;
        for (name, v) in [("tau_rec_ms", i.tau_rec_ms), ("tau_out_ms", i.tau_out_ms)] {
            if !(v > 0.0 && v.is_finite()) {
                return Err(Error::invalid(format!("init.{name} must be > 0, got {v}")));
            }
        }
        if !i.u_th.is_finite() {
            return Err(Error::invalid("init.u_th must be finite"));
        }
        self.loss.validate()?;
        self.optimizer.validate()?;
        self.constraints.validate()
    }
}

/// Per-epoch summary; the column order of the metrics CSV.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct EpochMetrics {
    pub epoch: usize,
    pub train_loss: f64,
    pub train_acc: f64,
    pub test_acc: f64,
    /// Hz per hidden neuron, averaged over the epoch's training samples.
    pub mean_spike_rate: f64,
    pub bf_loss: f64,
}

pub const METRICS_HEADER: &str = "epoch,train_loss,train_acc,test_acc,mean_spike_rate,bf_loss";

/// Metrics as CSV. Floats use the shortest round-trip form.
pub fn write_metrics_csv<W: std::io::Write>(mut w: W, history: &[EpochMetrics]) -> std::io::Result<()> {
    writeln!(w, "{METRICS_HEADER}")?;
    for m in history {
        writeln!(
            w,
            "{},{},{},{},{},{}",
            m.epoch, m.train_loss, m.train_acc, m.test_acc, m.mean_spike_rate, m.bf_loss
        )?;
    }
    Ok(())
}

/// State handed to observers after each optimizer step.
pub struct BatchInfo<'a> {
    pub epoch: usize,
    pub batch: usize,
    pub params: &'a NetworkParams,
    /// Global gradient norm before clipping.
    pub grad_norm: f64,
    pub loss: f64,
    pub constraints: &'a ConstraintConfig,
}

/// State handed to observers at the end of each epoch.
pub struct EpochInfo<'a> {
    pub metrics: &'a EpochMetrics,
    pub params: &'a NetworkParams,
    pub optimizer: &'a OptimizerState,
}

pub trait TrainObserver {
    fn after_batch(&mut self, _info: &BatchInfo<'_>) -> Result<()> {
        Ok(())
    }
    fn after_epoch(&mut self, _info: &EpochInfo<'_>) -> Result<()> {
        Ok(())
    }
}

pub struct NoopObserver;

impl TrainObserver for NoopObserver {}

/// Fails the run as soon as a constraint is violated after a batch.
#[derive(Default)]
pub struct ConstraintAsserter {
    pub checked: usize,
}

impl TrainObserver for ConstraintAsserter {
    fn after_batch(&mut self, info: &BatchInfo<'_>) -> Result<()> {
        self.checked += 1;
        if !info.constraints.holds(info.params) {
            return Err(Error::invalid(format!(
                "constraint violated after epoch {} batch {}: tau_rec={} tau_out={} diag_zero={}",
                info.epoch,
                info.batch,
                info.params.tau_rec,
                info.params.tau_out,
                info.params.w_rec.diagonal_is_zero()
            )));
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq)]
pub enum TrainStatus {
    Completed,
    /// Stopped on a non-finite value; parameters are the last finite state.
    Diverged { epoch: usize, batch: usize, message: String },
}

#[derive(Clone, Debug)]
pub struct TrainOutcome {
    pub params: NetworkParams,
    pub optimizer: OptimizerState,
    pub history: Vec<EpochMetrics>,
    pub status: TrainStatus,
}

/// Initial parameters for a task with `n_in` inputs and `n_out` classes.
pub fn init_params(n_in: usize, n_hidden: usize, n_out: usize, cfg: &TrainConfig, seed: u64) -> Result<NetworkParams> {
    let i = &cfg.init;
    let mut w_in = uniform_fan_in(n_hidden, n_in, n_in, &mut rng(derive_seed(seed, "init/w_in")))?;
    w_in.scale(i.in_gain);
    let mut w_rec = kaiming_uniform_recurrent_init(n_hidden, derive_seed(seed, "init/w_rec"))?;
    w_rec.scale(if cfg.recurrent { i.rec_gain } else { 0.0 });
    let mut w_out = uniform_fan_in(n_out, n_hidden, n_hidden, &mut rng(derive_seed(seed, "init/w_out")))?;
    w_out.scale(i.out_gain);
    let mut params = NetworkParams { w_in, w_rec, w_out, tau_rec: i.tau_rec_ms, tau_out: i.tau_out_ms, u_th: i.u_th };
    apply_constraints(&mut params, &cfg.constraints);
    Ok(params)
}

/// Loss of one episode and its gradient.
#[derive(Clone, Debug)]
pub struct SampleGradient {
    pub grads: Gradients,
    /// Cross-entropy of the window-averaged readout.
    pub ce: f64,
    /// Branching-factor loss after the configured time reduction.
    pub bf: f64,
    pub correct: bool,
    pub spikes: u64,
    pub neuron_ms: f64,
}

impl SampleGradient {
    pub fn loss(&self, cfg: &LossConfig) -> f64 {
        total_loss(self.ce, self.bf, cfg)
    }
}

/// Forward pass, `CE + β·ξ_bf` and BPTT for one episode.
pub fn episode_gradient(
    params: &NetworkParams,
    delays: &DelaySchedule,
    ep: &Episode,
    reset_mode: ResetMode,
    loss: &LossConfig,
) -> Result<SampleGradient> {
    let trace = forward(params, delays, &ep.input, reset_mode)?;
    let logits = readout_logits(&trace, &ep.window)?;
    let ce = cross_entropy(&logits, ep.label)?;
    let dlogit = cross_entropy_grad(&logits, ep.label)?;
    let mut d_uout = Matrix::zeros(trace.steps(), trace.n_out());
    let inv = 1.0 / ep.window.len() as f64;
    for t in ep.window.clone() {
        d_uout.row_mut(t).iter_mut().zip(&dlogit).for_each(|(d, g)| *d = g * inv);
    }
    let reduce = loss.bf_reduction.factor(trace.steps());
    let bf = branching_factor_loss(&trace.spikes, loss.bf_mode)? * reduce;
    let d_spikes = if loss.beta > 0.0 {
        let mut g = branching_factor_grad(&trace.spikes, loss.bf_mode)?;
        g.scale(loss.beta * reduce);
        Some(g)
    } else {
        None
    };
    let grads = backward(&trace, params, delays, &d_uout, d_spikes.as_ref())?;
    Ok(SampleGradient {
        grads,
        ce,
        bf,
        correct: argmax(&logits) == ep.label,
        spikes: trace.spikes.total(),
        neuron_ms: (trace.steps() * trace.n_hidden()) as f64 * trace.dt_ms,
    })
}

/// Accuracy and mean cross-entropy of a parameter set.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct EvalReport {
    pub accuracy: f64,
    pub loss: f64,
    pub mean_spike_rate: f64,
    pub samples: usize,
}

fn eval_one(params: &NetworkParams, delays: &DelaySchedule, reset: ResetMode, ep: &Episode) -> Result<(bool, f64, u64, f64)> {
    let trace = forward(params, delays, &ep.input, reset)?;
    let logits = readout_logits(&trace, &ep.window)?;
    let ce = cross_entropy(&logits, ep.label)?;
    let neuron_ms = (trace.steps() * trace.n_hidden()) as f64 * trace.dt_ms;
    Ok((argmax(&logits) == ep.label, ce, trace.spikes.total(), neuron_ms))
}

fn summarize(rows: Vec<(bool, f64, u64, f64)>) -> EvalReport {
    let n = rows.len();
    let (mut hits, mut loss, mut spikes, mut ms) = (0usize, 0.0, 0u64, 0.0);
    for (ok, ce, s, m) in rows {
        hits += usize::from(ok);
        loss += ce;
        spikes += s;
        ms += m;
    }
    EvalReport {
        accuracy: hits as f64 / n.max(1) as f64,
        loss: loss / n.max(1) as f64,
        mean_spike_rate: if ms > 0.0 { spikes as f64 * 1000.0 / ms } else { 0.0 },
        samples: n,
    }
}

/// Evaluates on a fixed set of episodes.
pub fn evaluate(params: &NetworkParams, delays: &DelaySchedule, reset: ResetMode, episodes: &[Episode]) -> Result<EvalReport> {
    let rows = episodes
        .par_iter()
        .map(|ep| eval_one(params, delays, reset, ep))
        .collect::<Result<Vec<_>>>()?;
    Ok(summarize(rows))
}

/// Evaluates on `count` test episodes drawn from `make(j)`, generated on the fly.
pub fn evaluate_with<F>(params: &NetworkParams, delays: &DelaySchedule, reset: ResetMode, count: usize, make: F) -> Result<EvalReport>
where
    F: Fn(usize) -> Result<Episode> + Sync,
{
    let rows = (0..count)
        .into_par_iter()
        .map(|j| eval_one(params, delays, reset, &make(j)?))
        .collect::<Result<Vec<_>>>()?;
    Ok(summarize(rows))
}

/// Test-set evaluation used by [`train`]: episode `j` uses seed `derive_indexed(seed, "test", j)`.
pub fn evaluate_stream<S: TaskStream + ?Sized>(
    params: &NetworkParams,
    delays: &DelaySchedule,
    reset: ResetMode,
    stream: &S,
    count: usize,
    seed: u64,
) -> Result<EvalReport> {
    evaluate_with(params, delays, reset, count, |j| stream.test_episode(j, derive_indexed(seed, "test", j as u64)))
}

fn mask_recurrence(g: &mut Gradients, recurrent: bool) {
    if !recurrent {
        g.w_rec.scale(0.0);
    }
}

/// Trains from the seeded initialization.
pub fn train<S: TaskStream + ?Sized>(
    cfg: &TrainConfig,
    n_hidden: usize,
    delays: &DelaySchedule,
    stream: &S,
    seed: u64,
    observer: &mut dyn TrainObserver,
) -> Result<TrainOutcome> {
    cfg.validate()?;
    let params = init_params(stream.n_in(), n_hidden, stream.n_out(), cfg, seed)?;
    train_from(cfg, params, delays, stream, seed, observer)
}

/// Trains starting from `params`. Batch gradients are reduced in sample order,
/// so results do not depend on the worker count.
pub fn train_from<S: TaskStream + ?Sized>(
    cfg: &TrainConfig,
    mut params: NetworkParams,
    delays: &DelaySchedule,
    stream: &S,
    seed: u64,
    observer: &mut dyn TrainObserver,
) -> Result<TrainOutcome> {
    cfg.validate()?;
    params.validate()?;
    if !cfg.recurrent {
        params.w_rec.scale(0.0);
    }
    let mut opt = OptimizerState::for_params(cfg.optimizer, &params);
    let mut history = Vec::with_capacity(cfg.epochs);

    for epoch in 0..cfg.epochs {
        let mut order: Vec<usize> = (0..cfg.samples_per_epoch).collect();
        order.shuffle(&mut rng(derive_indexed(seed, "train/order", epoch as u64)));
        let epoch_seed = derive_indexed(seed, "train/epoch", epoch as u64);

        let (mut ce_sum, mut bf_sum, mut hits, mut spikes, mut neuron_ms) = (0.0, 0.0, 0usize, 0u64, 0.0);
        for (batch, chunk) in order.chunks(cfg.batch_size).enumerate() {
            let results: Vec<Result<SampleGradient>> = chunk
                .par_iter()
                .enumerate()
                .map(|(k, &index)| {
                    let pos = batch * cfg.batch_size + k;
                    let ep = stream.train_episode(index, derive_indexed(epoch_seed, "sample", pos as u64))?;
                    episode_gradient(&params, delays, &ep, cfg.reset_mode, &cfg.loss)
                })
                .collect();

            let mut grads = Gradients::zeros_like(&params);
            let mut batch_loss = 0.0;
            for r in results {
                let r = match r {
                    Ok(r) => r,
                    Err(Error::Divergence { timestep, what }) => {
                        return Ok(diverged(params, opt, history, epoch, batch, format!("{what} at step {timestep}")));
                    }
                    Err(e) => return Err(e),
                };
                grads.add_assign(&r.grads);
                batch_loss += r.loss(&cfg.loss);
                ce_sum += r.ce;
                bf_sum += r.bf;
                hits += usize::from(r.correct);
                spikes += r.spikes;
                neuron_ms += r.neuron_ms;
            }
            let n = chunk.len() as f64;
            grads.scale(1.0 / n);
            batch_loss /= n;
            mask_recurrence(&mut grads, cfg.recurrent);
            let grad_norm = grads.norm();
            if !batch_loss.is_finite() || !grads.all_finite() {
                return Ok(diverged(params, opt, history, epoch, batch, "non-finite loss or gradient".into()));
            }
            let grads = clip_gradient_norm(grads, cfg.loss.clip_max_norm);

            let mut next = params.clone();
            let mut next_opt = opt.clone();
            madgrad_step(&mut next_opt, &mut next, &grads)?;
            apply_constraints(&mut next, &cfg.constraints);
            if !cfg.recurrent {
                next.w_rec.scale(0.0);
            }
            if !next.to_flat().iter().all(|v| v.is_finite()) {
                return Ok(diverged(params, opt, history, epoch, batch, "non-finite parameters after update".into()));
            }
            params = next;
            opt = next_opt;
            observer.after_batch(&BatchInfo {
                epoch,
                batch,
                params: &params,
                grad_norm,
                loss: batch_loss,
                constraints: &cfg.constraints,
            })?;
        }

        let test = if cfg.test_samples > 0 {
            evaluate_stream(&params, delays, cfg.reset_mode, stream, cfg.test_samples, seed)?.accuracy
        } else {
            f64::NAN
        };
        let n = cfg.samples_per_epoch as f64;
        let m = EpochMetrics {
            epoch,
            train_loss: (ce_sum + cfg.loss.beta * bf_sum) / n,
            train_acc: hits as f64 / n,
            test_acc: test,
            mean_spike_rate: if neuron_ms > 0.0 { spikes as f64 * 1000.0 / neuron_ms } else { 0.0 },
            bf_loss: bf_sum / n,
        };
        log::info!(
            "epoch {epoch}: loss {:.4} train_acc {:.3} test_acc {:.3} rate {:.2} Hz",
            m.train_loss,
            m.train_acc,
            m.test_acc,
            m.mean_spike_rate
        );
        observer.after_epoch(&EpochInfo { metrics: &m, params: &params, optimizer: &opt })?;
        history.push(m);
    }

    Ok(TrainOutcome { params, optimizer: opt, history, status: TrainStatus::Completed })
}

fn diverged(
    params: NetworkParams,
    optimizer: OptimizerState,
    history: Vec<EpochMetrics>,
    epoch: usize,
    batch: usize,
    message: String,
) -> TrainOutcome {
    log::warn!("training diverged at epoch {epoch} batch {batch}: {message}");
    TrainOutcome { params, optimizer, history, status: TrainStatus::Diverged { epoch, batch, message } }
}
