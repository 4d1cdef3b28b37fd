//! Task loss, branching-factor regularizer and their gradients.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::matrix::Matrix;
use crate::spikes::SpikeTrain;

/// Which activity change the branching-factor loss penalizes.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BfMode {
    /// `Σ_t (N[t] - N[t-1])²` with `N[t] = Σ_i n_i[t]`.
    #[default]
    Population,
    /// `Σ_t Σ_i (n_i[t] - n_i[t-1])²`.
    PerNeuron,
}

/// How the per-episode branching-factor sum is reduced over time.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BfReduction {
    Sum,
    /// Divided by the episode length.
    #[default]
    Mean,
}

impl BfReduction {
    /// Factor applied to the summed loss and its gradient for an episode of `steps` steps.
    pub fn factor(self, steps: usize) -> f64 {
        match self {
            BfReduction::Sum => 1.0,
            BfReduction::Mean => 1.0 / steps.max(1) as f64,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct LossConfig {
    pub beta: f64,
    pub clip_max_norm: f64,
    pub bf_mode: BfMode,
    pub bf_reduction: BfReduction,
}

impl Default for LossConfig {
    fn default() -> Self {
        Self { beta: 0.001, clip_max_norm: 0.01, bf_mode: BfMode::Population, bf_reduction: BfReduction::Mean }
    }
}

impl LossConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.beta >= 0.0 && self.beta.is_finite()) {
            return Err(Error::invalid(format!("beta must be ≥ 0, got {}", self.beta)));
        }
        if !(self.clip_max_norm > 0.0) {
            return Err(Error::invalid(format!("clip_max_norm must be > 0, got {}", self.clip_max_norm)));
        }
        Ok(())
    }
}

fn check_binary(spikes: &SpikeTrain) -> Result<()> {
    if !spikes.is_binary() {
        return Err(Error::invalid("branching-factor loss needs a binary spike train"));
    }
    if spikes.steps() == 0 {
        return Err(Error::invalid("empty spike train"));
    }
    Ok(())
}

/// Squared step-to-step change in activity, with silence before `t = 0`.
pub fn branching_factor_loss(spikes: &SpikeTrain, mode: BfMode) -> Result<f64> {
    check_binary(spikes)?;
    Ok(match mode {
        BfMode::Population => {
            let mut prev = 0.0;
            let mut acc = 0.0;
            for t in 0..spikes.steps() {
                let n = f64::from(spikes.count_at(t));
                acc += (n - prev) * (n - prev);
                prev = n;
            }
            acc
        }
        BfMode::PerNeuron => {
            let mut acc = 0u64;
            for t in 0..spikes.steps() {
                for i in 0..spikes.channels() {
                    let prev = if t == 0 { 0 } else { spikes.get(t - 1, i) };
                    acc += u64::from(spikes.get(t, i) != prev);
                }
            }
            acc as f64
        }
    })
}

/// `∂ξ_bf/∂n_i[t]`, treating spikes as real-valued.
pub fn branching_factor_grad(spikes: &SpikeTrain, mode: BfMode) -> Result<Matrix> {
    check_binary(spikes)?;
    let (steps, h) = (spikes.steps(), spikes.channels());
    let mut g = Matrix::zeros(steps, h);
    match mode {
        BfMode::Population => {
            let counts: Vec<f64> = spikes.population_counts().into_iter().map(f64::from).collect();
            for t in 0..steps {
                let prev = if t == 0 { 0.0 } else { counts[t - 1] };
                let mut d = 2.0 * (counts[t] - prev);
                if t + 1 < steps {
                    d -= 2.0 * (counts[t + 1] - counts[t]);
                }
                g.row_mut(t).iter_mut().for_each(|v| *v = d);
            }
        }
        BfMode::PerNeuron => {
            let val = |t: usize, i: usize| f64::from(spikes.get(t, i));
            for t in 0..steps {
                for i in 0..h {
                    let prev = if t == 0 { 0.0 } else { val(t - 1, i) };
                    let mut d = 2.0 * (val(t, i) - prev);
                    if t + 1 < steps {
                        d -= 2.0 * (val(t + 1, i) - val(t, i));
                    }
                    g[(t, i)] = d;
                }
            }
        }
    }
    Ok(g)
}

/// `ξ_net + β·ξ_bf`
pub fn total_loss(net_loss: f64, bf_loss: f64, cfg: &LossConfig) -> f64 {
    net_loss + cfg.beta * bf_loss
}

pub fn softmax(logits: &[f64]) -> Vec<f64> {
    let max = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let exps: Vec<f64> = logits.iter().map(|&l| (l - max).exp()).collect();
    let z: f64 = exps.iter().sum();
    exps.into_iter().map(|e| e / z).collect()
}

fn check_logits(logits: &[f64], label: usize) -> Result<()> {
    if label >= logits.len() {
        return Err(Error::invalid(format!("label {label} out of range for {} classes", logits.len())));
    }
    if logits.iter().any(|l| !l.is_finite()) {
        return Err(Error::invalid("non-finite logit"));
    }
    Ok(())
}

/// `-log softmax(logits)[label]`, via log-sum-exp with the max subtracted.
pub fn cross_entropy(logits: &[f64], label: usize) -> Result<f64> {
    check_logits(logits, label)?;
    let top = crate::network::argmax(logits);
    let max = logits[top];
    // log-sum-exp as max + ln(1 + rest), keeping precision when the label dominates
    let rest: f64 = logits
        .iter()
        .enumerate()
        .filter(|&(k, _)| k != top)
        .map(|(_, &l)| (l - max).exp())
        .sum();
    Ok((max - logits[label]) + rest.ln_1p())
}

/// `∂CE/∂logits = softmax - onehot(label)`
pub fn cross_entropy_grad(logits: &[f64], label: usize) -> Result<Vec<f64>> {
    check_logits(logits, label)?;
    let mut g = softmax(logits);
    g[label] -= 1.0;
    Ok(g)
}
