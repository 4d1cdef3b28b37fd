//! Leaky integrate-and-fire dynamics, the clamped-linear surrogate derivative,
//! and the integer-precision memory bound of a leaky membrane.
//!
//! The discretized membrane update with soft reset is
//!
//! ```text
//! u[t] = α·u[t-1] + x[t] - u_th·n[t-1],    α = exp(-dt/τ)
//! n[t] = 1 if u[t] ≥ u_th else 0
//! ```

use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// How the membrane is reset after a spike.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ResetMode {
    /// Subtract `u_th` on the step after a spike.
    #[default]
    SoftSubtract,
    /// Discard the decayed membrane on the step after a spike.
    HardZero,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct LifConfig {
    pub tau_ms: f64,
    pub u_th: f64,
    pub dt_ms: f64,
    pub reset_mode: ResetMode,
}

impl LifConfig {
    pub fn new(tau_ms: f64, u_th: f64, dt_ms: f64, reset_mode: ResetMode) -> Result<Self> {
        let cfg = Self { tau_ms, u_th, dt_ms, reset_mode };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        decay_factor(self.tau_ms, self.dt_ms)?;
        if !(self.u_th > 0.0 && self.u_th.is_finite()) {
            return Err(Error::invalid(format!("u_th must be positive, got {}", self.u_th)));
        }
        Ok(())
    }

    pub fn alpha(&self) -> f64 {
        (-self.dt_ms / self.tau_ms).exp()
    }
}

impl Default for LifConfig {
    fn default() -> Self {
        Self { tau_ms: 20.0, u_th: 1.0, dt_ms: 1.0, reset_mode: ResetMode::SoftSubtract }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct MembraneState {
    pub u: Vec<f64>,
    pub last_spike: Vec<u8>,
}

impl MembraneState {
    pub fn resting(n: usize) -> Self {
        Self { u: vec![0.0; n], last_spike: vec![0; n] }
    }

    pub fn len(&self) -> usize {
        self.u.len()
    }

    pub fn is_empty(&self) -> bool {
        self.u.is_empty()
    }
}

/// `exp(-dt/τ)`, the per-step membrane retention.
pub fn decay_factor(tau_ms: f64, dt_ms: f64) -> Result<f64> {
    if !(tau_ms > 0.0 && tau_ms.is_finite()) {
        return Err(Error::invalid(format!("tau must be positive, got {tau_ms}")));
    }
    if !(dt_ms > 0.0 && dt_ms.is_finite()) {
        return Err(Error::invalid(format!("dt must be positive, got {dt_ms}")));
    }
    Ok((-dt_ms / tau_ms).exp())
}

/// `dα/dτ` for `α = exp(-dt/τ)`.
pub fn decay_factor_derivative(tau_ms: f64, dt_ms: f64) -> f64 {
    dt_ms / (tau_ms * tau_ms) * (-dt_ms / tau_ms).exp()
}

/// Advances a population of LIF neurons by one step.
pub fn lif_step(
    state: &MembraneState,
    input_current: &[f64],
    cfg: &LifConfig,
) -> Result<(MembraneState, Vec<u8>)> {
    if state.u.len() != input_current.len() || state.last_spike.len() != state.u.len() {
        return Err(Error::invalid(format!(
            "state has {} neurons but input has {} entries",
            state.u.len(),
            input_current.len()
        )));
    }
    let alpha = cfg.alpha();
    let u: Vec<f64> = state
        .u
        .iter()
        .zip(&state.last_spike)
        .zip(input_current)
        .map(|((&u, &n), &x)| {
            let fired = f64::from(n);
            match cfg.reset_mode {
                ResetMode::SoftSubtract => alpha * u + x - cfg.u_th * fired,
                ResetMode::HardZero => alpha * u * (1.0 - fired) + x,
            }
        })
        .collect();
    let spikes: Vec<u8> = u.iter().map(|&v| u8::from(v >= cfg.u_th)).collect();
    Ok((MembraneState { u, last_spike: spikes.clone() }, spikes))
}

/// Clamped-linear surrogate for the spike derivative: `min(max(u - u_th + 1, 0), 1)`.
#[inline]
pub fn surrogate_derivative(u: f64, u_th: f64) -> f64 {
    (u - u_th + 1.0).max(0.0).min(1.0)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MemoryBoundMode {
    Analytical,
    Empirical,
}

/// Largest bit width accepted by the memory-bound analysis; integer membranes
/// above 2^53 are no longer exactly representable in the decay arithmetic.
pub const MAX_MEMBRANE_BITS: u32 = 53;

/// Time for a leaky membrane stored on `n_bits` to decay from its maximum
/// integer value `2^n_bits - 1` down to 1.
///
/// The analytical value is `τ·ln(2^n_bits - 1)`. The empirical value simulates
/// an integer register, flooring `α·u` each step.
pub fn max_sequence_length(n_bits: u32, tau_ms: f64, dt_ms: f64, mode: MemoryBoundMode) -> Result<f64> {
    if n_bits == 0 || n_bits > MAX_MEMBRANE_BITS {
        return Err(Error::invalid(format!(
            "n_bits must be in 1..={MAX_MEMBRANE_BITS}, got {n_bits}"
        )));
    }
    let alpha = decay_factor(tau_ms, dt_ms)?;
    let top = (1u64 << n_bits) - 1;
    Ok(match mode {
        MemoryBoundMode::Analytical => tau_ms * (top as f64).ln(),
        MemoryBoundMode::Empirical => {
            let mut u = top;
            let mut steps = 0u64;
            while u > 1 {
                // floor(α·u) < u for every integer u ≥ 1, so this terminates
                u = (alpha * u as f64).floor() as u64;
                steps += 1;
            }
            steps as f64 * dt_ms
        }
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct MemoryBoundRow {
    pub n_bits: u32,
    pub tau_ms: f64,
    pub analytical_ms: f64,
    pub empirical_ms: f64,
}

impl MemoryBoundRow {
    /// `(analytical - empirical) / analytical`, zero when the bound itself is zero.
    pub fn relative_gap(&self) -> f64 {
        if self.analytical_ms == 0.0 {
            0.0
        } else {
            (self.analytical_ms - self.empirical_ms) / self.analytical_ms
        }
    }
}

/// Memory bound for every `(bits, τ)` pair, bits-major.
pub fn memory_bound_table(bits: &[u32], taus_ms: &[f64], dt_ms: f64) -> Result<Vec<MemoryBoundRow>> {
    if bits.is_empty() || taus_ms.is_empty() {
        return Err(Error::invalid("bit and tau lists must be non-empty"));
    }
    let mut rows = Vec::with_capacity(bits.len() * taus_ms.len());
    for &n_bits in bits {
        for &tau_ms in taus_ms {
            rows.push(MemoryBoundRow {
                n_bits,
                tau_ms,
                analytical_ms: max_sequence_length(n_bits, tau_ms, dt_ms, MemoryBoundMode::Analytical)?,
                empirical_ms: max_sequence_length(n_bits, tau_ms, dt_ms, MemoryBoundMode::Empirical)?,
            });
        }
    }
    Ok(rows)
}

pub fn write_memory_bound_csv<W: Write>(mut w: W, rows: &[MemoryBoundRow]) -> std::io::Result<()> {
    writeln!(w, "n_bits,tau_ms,analytical_ms,empirical_ms")?;
    for r in rows {
        writeln!(w, "{},{},{},{}", r.n_bits, r.tau_ms, r.analytical_ms, r.empirical_ms)?;
    }
    Ok(())
}
