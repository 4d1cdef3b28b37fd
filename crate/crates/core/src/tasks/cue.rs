//! Cue-accumulation (evidence accumulation) task.
//!
//! Layout of one episode, in ms:
//!
//! ```text
//! | cue 0 | pause | cue 1 | pause | ... | cue n-1 | pause | wait | recall |
//! ```
//!
//! Channels come in four groups of `group_size`: left cues, right cues,
//! background noise (active throughout) and the recall signal.

use std::ops::Range;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::seed::rng;
use crate::spikes::{Input, SpikeTrain};
use crate::training::{Episode, TaskStream};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Side {
    Left,
    Right,
}

impl Side {
    /// Class index used by the readout: left 0, right 1.
    pub fn class(self) -> usize {
        match self {
            Side::Left => 0,
            Side::Right => 1,
        }
    }

    pub fn from_class(c: usize) -> Option<Side> {
        match c {
            0 => Some(Side::Left),
            1 => Some(Side::Right),
            _ => None,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CueTaskConfig {
    pub n_cues: usize,
    pub cue_duration_ms: f64,
    pub pause_ms: f64,
    /// Inclusive `[lo, hi]`; `lo == hi` fixes the wait.
    pub wait_range_ms: [f64; 2],
    pub recall_duration_ms: f64,
    /// Channels per population (left, right, noise, recall).
    pub group_size: usize,
    pub cue_hz: f64,
    pub noise_hz: f64,
    pub recall_hz: f64,
    pub dt_ms: f64,
    /// Redraw the cue sequence when the two sides tie (needed for even counts).
    pub resample_ties: bool,
}

impl Default for CueTaskConfig {
    fn default() -> Self {
        Self {
            n_cues: 7,
            cue_duration_ms: 150.0,
            pause_ms: 50.0,
            wait_range_ms: [500.0, 1500.0],
            recall_duration_ms: 150.0,
            group_size: 10,
            cue_hz: 40.0,
            noise_hz: 5.0,
            recall_hz: 40.0,
            dt_ms: 1.0,
            resample_ties: true,
        }
    }
}

fn whole_steps(name: &str, ms: f64, dt: f64) -> Result<usize> {
    let steps = ms / dt;
    if !(ms >= 0.0) || !ms.is_finite() || (steps - steps.round()).abs() > 1e-9 {
        return Err(Error::invalid(format!("{name} = {ms} ms must be a non-negative multiple of dt = {dt} ms")));
    }
    Ok(steps.round() as usize)
}

impl CueTaskConfig {
    /// The reduced desk-scale variant: 3 cues and a 200–500 ms wait.
    pub fn simplified() -> Self {
        Self { n_cues: 3, wait_range_ms: [200.0, 500.0], ..Self::default() }
    }

    pub fn n_channels(&self) -> usize {
        4 * self.group_size
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.dt_ms > 0.0 && self.dt_ms.is_finite()) {
            return Err(Error::invalid(format!("dt must be > 0, got {}", self.dt_ms)));
        }
        if self.n_cues == 0 {
            return Err(Error::invalid("n_cues must be at least 1"));
        }
        if self.n_cues % 2 == 0 && !self.resample_ties {
            return Err(Error::invalid(format!("even n_cues = {} needs resample_ties", self.n_cues)));
        }
        if self.group_size == 0 {
            return Err(Error::invalid("group_size must be positive"));
        }
        if whole_steps("cue_duration_ms", self.cue_duration_ms, self.dt_ms)? == 0 {
            return Err(Error::invalid("cue_duration_ms must be positive"));
        }
        whole_steps("pause_ms", self.pause_ms, self.dt_ms)?;
        if whole_steps("recall_duration_ms", self.recall_duration_ms, self.dt_ms)? == 0 {
            return Err(Error::invalid("recall_duration_ms must be positive"));
        }
        let [lo, hi] = self.wait_range_ms;
        whole_steps("wait_range_ms[0]", lo, self.dt_ms)?;
        whole_steps("wait_range_ms[1]", hi, self.dt_ms)?;
        if lo > hi {
            return Err(Error::invalid(format!("wait range [{lo}, {hi}] is reversed")));
        }
        for (name, hz) in [("cue_hz", self.cue_hz), ("noise_hz", self.noise_hz), ("recall_hz", self.recall_hz)] {
            let p = hz * self.dt_ms / 1000.0;
            if !(0.0..=1.0).contains(&p) {
                return Err(Error::invalid(format!("{name} = {hz} gives a per-step probability {p} outside [0, 1]")));
            }
        }
        Ok(())
    }

    /// Episode length in ms for a given wait.
    pub fn episode_ms(&self, wait_ms: f64) -> f64 {
        self.n_cues as f64 * (self.cue_duration_ms + self.pause_ms) + wait_ms + self.recall_duration_ms
    }

    fn steps(&self, ms: f64) -> usize {
        (ms / self.dt_ms).round() as usize
    }

    pub fn left_channels(&self) -> Range<usize> {
        0..self.group_size
    }

    pub fn right_channels(&self) -> Range<usize> {
        self.group_size..2 * self.group_size
    }

    pub fn noise_channels(&self) -> Range<usize> {
        2 * self.group_size..3 * self.group_size
    }

    pub fn recall_channels(&self) -> Range<usize> {
        3 * self.group_size..4 * self.group_size
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct CueSample {
    pub spikes: SpikeTrain,
    pub label: Side,
    pub cue_sequence: Vec<Side>,
    pub wait_ms: f64,
    pub recall_window: Range<usize>,
}

impl CueSample {
    pub fn into_episode(self) -> Episode {
        Episode { label: self.label.class(), window: self.recall_window, input: Input::Spikes(self.spikes) }
    }
}

/// Side with more cues, or `None` on a tie.
pub fn majority(cues: &[Side]) -> Option<Side> {
    let left = cues.iter().filter(|&&s| s == Side::Left).count();
    let right = cues.len() - left;
    match left.cmp(&right) {
        std::cmp::Ordering::Greater => Some(Side::Left),
        std::cmp::Ordering::Less => Some(Side::Right),
        std::cmp::Ordering::Equal => None,
    }
}

fn draw_cues<R: Rng>(n: usize, rng: &mut R) -> (Vec<Side>, Side) {
    loop {
        let cues: Vec<Side> = (0..n).map(|_| if rng.gen::<bool>() { Side::Left } else { Side::Right }).collect();
        if let Some(label) = majority(&cues) {
            return (cues, label);
        }
    }
}

fn bernoulli_fill<R: Rng>(spikes: &mut SpikeTrain, steps: Range<usize>, channels: Range<usize>, p: f64, rng: &mut R) {
    if p <= 0.0 {
        return;
    }
    for t in steps {
        let row = spikes.row_mut(t);
        for ch in channels.clone() {
            if rng.gen::<f64>() < p {
                row[ch] = 1;
            }
        }
    }
}

fn build(cfg: &CueTaskConfig, wait_ms: Option<f64>, seed: u64) -> Result<CueSample> {
    cfg.validate()?;
    let mut rng = rng(seed);
    let (cue_sequence, label) = draw_cues(cfg.n_cues, &mut rng);
    let wait_ms = match wait_ms {
        Some(w) => {
            whole_steps("wait_ms", w, cfg.dt_ms)?;
            w
        }
        None => {
            let [lo, hi] = cfg.wait_range_ms;
            let (a, b) = (cfg.steps(lo), cfg.steps(hi));
            rng.gen_range(a..=b) as f64 * cfg.dt_ms
        }
    };

    let cue = cfg.steps(cfg.cue_duration_ms);
    let slot = cue + cfg.steps(cfg.pause_ms);
    let recall_start = cfg.n_cues * slot + cfg.steps(wait_ms);
    let total = recall_start + cfg.steps(cfg.recall_duration_ms);
    let p = |hz: f64| hz * cfg.dt_ms / 1000.0;

    let mut spikes = SpikeTrain::zeros(total, cfg.n_channels(), cfg.dt_ms);
    for (i, side) in cue_sequence.iter().enumerate() {
        let group = match side {
            Side::Left => cfg.left_channels(),
            Side::Right => cfg.right_channels(),
        };
        bernoulli_fill(&mut spikes, i * slot..i * slot + cue, group, p(cfg.cue_hz), &mut rng);
    }
    bernoulli_fill(&mut spikes, 0..total, cfg.noise_channels(), p(cfg.noise_hz), &mut rng);
    bernoulli_fill(&mut spikes, recall_start..total, cfg.recall_channels(), p(cfg.recall_hz), &mut rng);

    Ok(CueSample { spikes, label, cue_sequence, wait_ms, recall_window: recall_start..total })
}

/// Standard sample with the wait drawn uniformly (in whole steps) from the configured range.
pub fn generate_cue_sample(cfg: &CueTaskConfig, seed: u64) -> Result<CueSample> {
    build(cfg, None, seed)
}

/// Sample with a fixed wait.
pub fn generate_wait_variant(cfg: &CueTaskConfig, wait_ms: f64, seed: u64) -> Result<CueSample> {
    if !(wait_ms >= 0.0) {
        return Err(Error::invalid(format!("wait must be ≥ 0 ms, got {wait_ms}")));
    }
    build(cfg, Some(wait_ms), seed)
}

/// Sample with `n_cues` cues in place of the configured count.
pub fn generate_ncue_variant(cfg: &CueTaskConfig, n_cues: usize, seed: u64) -> Result<CueSample> {
    build(&CueTaskConfig { n_cues, ..cfg.clone() }, None, seed)
}

/// The cue task as a [`TaskStream`]. Test episodes may use a different config
/// (longer waits, more cues) from the training ones.
#[derive(Clone, Debug)]
pub struct CueStream {
    pub train: CueTaskConfig,
    pub test: CueTaskConfig,
}

impl CueStream {
    pub fn new(cfg: CueTaskConfig) -> Result<Self> {
        cfg.validate()?;
        Ok(Self { test: cfg.clone(), train: cfg })
    }
}

impl TaskStream for CueStream {
    fn n_in(&self) -> usize {
        self.train.n_channels()
    }

    fn n_out(&self) -> usize {
        2
    }

    fn train_episode(&self, _index: usize, seed: u64) -> Result<Episode> {
        generate_cue_sample(&self.train, seed).map(CueSample::into_episode)
    }

    fn test_episode(&self, _index: usize, seed: u64) -> Result<Episode> {
        generate_cue_sample(&self.test, seed).map(CueSample::into_episode)
    }
}
