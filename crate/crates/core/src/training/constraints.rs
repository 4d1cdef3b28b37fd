use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::network::NetworkParams;

/// Parameter constraints applied after every batch.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ConstraintConfig {
    /// `[lo, hi]` in ms for the hidden time constant.
    pub tau_rec_clamp: [f64; 2],
    /// `[lo, hi]` in ms for the readout time constant.
    pub tau_out_clamp: [f64; 2],
}

impl Default for ConstraintConfig {
    fn default() -> Self {
        Self { tau_rec_clamp: [0.1, 50.0], tau_out_clamp: [0.1, 50.0] }
    }
}

impl ConstraintConfig {
    pub fn validate(&self) -> Result<()> {
        for (name, [lo, hi]) in [("tau_rec_clamp", self.tau_rec_clamp), ("tau_out_clamp", self.tau_out_clamp)] {
            if !(lo > 0.0 && lo <= hi && hi.is_finite()) {
                return Err(Error::invalid(format!("{name} must satisfy 0 < lo ≤ hi, got [{lo}, {hi}]")));
            }
        }
        Ok(())
    }

    /// True when the parameters already satisfy every constraint.
    pub fn holds(&self, params: &NetworkParams) -> bool {
        let within = |v: f64, [lo, hi]: [f64; 2]| (lo..=hi).contains(&v);
        params.w_rec.diagonal_is_zero()
            && within(params.tau_rec, self.tau_rec_clamp)
            && within(params.tau_out, self.tau_out_clamp)
    }
}

/// Clamps both time constants and zeroes the recurrent self-connections.
/// The threshold is left free.
pub fn apply_constraints(params: &mut NetworkParams, cfg: &ConstraintConfig) {
    params.tau_rec = params.tau_rec.clamp(cfg.tau_rec_clamp[0], cfg.tau_rec_clamp[1]);
    params.tau_out = params.tau_out.clamp(cfg.tau_out_clamp[0], cfg.tau_out_clamp[1]);
    params.w_rec.zero_diagonal();
}
