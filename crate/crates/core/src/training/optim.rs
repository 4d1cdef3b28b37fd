//! MADGRAD (dual-averaged adaptive steps with momentum) and a plain SGD fallback.
//!
//! One MADGRAD step at iteration `k`, per coordinate:
//!
//! ```text
//! λ_k = lr·√(k+1)
//! s  += λ_k·g
//! ν  += λ_k·g²
//! z   = x₀ - s / (∛ν + ε)
//! x   = (1 - c)·x + c·z,     c = 1 - momentum
//! ```

use serde::{Deserialize, Serialize};

use crate::bptt::Gradients;
use crate::error::{Error, Result};
use crate::network::NetworkParams;

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OptimizerKind {
    #[default]
    Madgrad,
    Sgd,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OptimizerConfig {
    pub kind: OptimizerKind,
    pub lr: f64,
    pub momentum: f64,
    pub eps: f64,
}

impl Default for OptimizerConfig {
    fn default() -> Self {
        Self { kind: OptimizerKind::Madgrad, lr: 0.01, momentum: 0.9, eps: 1e-6 }
    }
}

impl OptimizerConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.lr > 0.0 && self.lr.is_finite()) {
            return Err(Error::invalid(format!("learning rate must be > 0, got {}", self.lr)));
        }
        if !(0.0..1.0).contains(&self.momentum) {
            return Err(Error::invalid(format!("momentum must be in [0, 1), got {}", self.momentum)));
        }
        if !(self.eps > 0.0) {
            return Err(Error::invalid(format!("eps must be > 0, got {}", self.eps)));
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct OptimizerState {
    pub config: OptimizerConfig,
    /// Dual average `Σ λ_k g_k`.
    pub s: Vec<f64>,
    /// `Σ λ_k g_k²`.
    pub nu: Vec<f64>,
    pub x0: Vec<f64>,
    pub k: u64,
}

impl OptimizerState {
    /// Fresh state anchored at `x0`.
    pub fn new(config: OptimizerConfig, x0: Vec<f64>) -> Self {
        let n = x0.len();
        Self { config, s: vec![0.0; n], nu: vec![0.0; n], x0, k: 0 }
    }

    pub fn for_params(config: OptimizerConfig, params: &NetworkParams) -> Self {
        Self::new(config, params.to_flat())
    }

    pub fn len(&self) -> usize {
        self.x0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.x0.is_empty()
    }

    /// Applies one step to flat parameters `x`.
    pub fn step_flat(&mut self, x: &mut [f64], grads: &[f64]) -> Result<()> {
        if x.len() != self.len() || grads.len() != self.len() {
            return Err(Error::invalid(format!(
                "optimizer tracks {} parameters, got {} params and {} gradients",
                self.len(),
                x.len(),
                grads.len()
            )));
        }
        let cfg = self.config;
        match cfg.kind {
            OptimizerKind::Madgrad => {
                let lambda = cfg.lr * ((self.k + 1) as f64).sqrt();
                let c = 1.0 - cfg.momentum;
                for i in 0..x.len() {
                    let g = grads[i];
                    self.s[i] += lambda * g;
                    self.nu[i] += lambda * g * g;
                    let z = self.x0[i] - self.s[i] / (self.nu[i].cbrt() + cfg.eps);
                    x[i] = (1.0 - c) * x[i] + c * z;
                }
            }
            OptimizerKind::Sgd => {
                for (xi, g) in x.iter_mut().zip(grads) {
                    *xi -= cfg.lr * g;
                }
            }
        }
        self.k += 1;
        Ok(())
    }
}

/// One optimizer step on the network parameters. Constraints are applied separately.
pub fn madgrad_step(state: &mut OptimizerState, params: &mut NetworkParams, grads: &Gradients) -> Result<()> {
    let mut flat = params.to_flat();
    state.step_flat(&mut flat, &grads.to_flat())?;
    params.set_flat(&flat);
    Ok(())
}
