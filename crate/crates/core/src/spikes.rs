//! Time-major activity containers: binary spike trains and analog current trains.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::matrix::Matrix;

/// Binary activity matrix, `steps × channels`, one byte per entry.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SpikeTrain {
    steps: usize,
    channels: usize,
    dt_ms: f64,
    data: Vec<u8>,
}

impl SpikeTrain {
    pub fn zeros(steps: usize, channels: usize, dt_ms: f64) -> Self {
        Self { steps, channels, dt_ms, data: vec![0; steps * channels] }
    }

    /// Wraps raw row-major data. Entries are not checked for binarity; see [`SpikeTrain::is_binary`].
    pub fn from_raw(steps: usize, channels: usize, dt_ms: f64, data: Vec<u8>) -> Result<Self> {
        if data.len() != steps * channels {
            return Err(Error::invalid(format!(
                "spike data has {} entries, expected {steps}×{channels}",
                data.len()
            )));
        }
        if !(dt_ms > 0.0 && dt_ms.is_finite()) {
            return Err(Error::invalid(format!("dt must be positive, got {dt_ms}")));
        }
        Ok(Self { steps, channels, dt_ms, data })
    }

    #[inline]
    pub fn steps(&self) -> usize {
        self.steps
    }

    #[inline]
    pub fn channels(&self) -> usize {
        self.channels
    }

    #[inline]
    pub fn dt_ms(&self) -> f64 {
        self.dt_ms
    }

    #[inline]
    pub fn get(&self, t: usize, ch: usize) -> u8 {
        self.data[t * self.channels + ch]
    }

    #[inline]
    pub fn set(&mut self, t: usize, ch: usize, v: u8) {
        self.data[t * self.channels + ch] = v;
    }

    #[inline]
    pub fn row(&self, t: usize) -> &[u8] {
        &self.data[t * self.channels..(t + 1) * self.channels]
    }

    #[inline]
    pub fn row_mut(&mut self, t: usize) -> &mut [u8] {
        &mut self.data[t * self.channels..(t + 1) * self.channels]
    }

    pub fn as_slice(&self) -> &[u8] {
        &self.data
    }

    pub fn is_binary(&self) -> bool {
        self.data.iter().all(|&v| v <= 1)
    }

    /// Population count `N[t] = Σ_i n_i[t]`.
    pub fn count_at(&self, t: usize) -> u32 {
        self.row(t).iter().map(|&v| u32::from(v)).sum()
    }

    pub fn population_counts(&self) -> Vec<u32> {
        (0..self.steps).map(|t| self.count_at(t)).collect()
    }

    pub fn total(&self) -> u64 {
        self.data.iter().map(|&v| u64::from(v)).sum()
    }

    /// Indices of channels active at step `t`.
    pub fn active(&self, t: usize) -> impl Iterator<Item = usize> + '_ {
        self.row(t).iter().enumerate().filter(|(_, &v)| v != 0).map(|(i, _)| i)
    }

    /// Reorders channels: output channel `k` is input channel `perm[k]`.
    pub fn permute_channels(&self, perm: &[usize]) -> SpikeTrain {
        assert_eq!(perm.len(), self.channels);
        let mut out = SpikeTrain::zeros(self.steps, self.channels, self.dt_ms());
        for t in 0..self.steps {
            for (k, &src) in perm.iter().enumerate() {
                out.set(t, k, self.get(t, src));
            }
        }
        out
    }
}

/// Analog input currents, `steps × channels`.
#[derive(Clone, Debug, PartialEq)]
pub struct AnalogTrain {
    pub values: Matrix,
    pub dt_ms: f64,
}

/// Network input: binary spikes (cue task) or analog currents (pixel sequences).
#[derive(Clone, Debug, PartialEq)]
pub enum Input {
    Spikes(SpikeTrain),
    Analog(AnalogTrain),
}

impl Input {
    pub fn steps(&self) -> usize {
        match self {
            Input::Spikes(s) => s.steps(),
            Input::Analog(a) => a.values.rows(),
        }
    }

    pub fn channels(&self) -> usize {
        match self {
            Input::Spikes(s) => s.channels(),
            Input::Analog(a) => a.values.cols(),
        }
    }

    pub fn dt_ms(&self) -> f64 {
        match self {
            Input::Spikes(s) => s.dt_ms(),
            Input::Analog(a) => a.dt_ms,
        }
    }

    /// Value of channel `ch` at step `t` as a current.
    #[inline]
    pub fn value(&self, t: usize, ch: usize) -> f64 {
        match self {
            Input::Spikes(s) => f64::from(s.get(t, ch)),
            Input::Analog(a) => a.values[(t, ch)],
        }
    }

    /// Dense copy as a `steps × channels` matrix.
    pub fn to_matrix(&self) -> Matrix {
        match self {
            Input::Spikes(s) => Matrix::from_vec(
                s.steps(),
                s.channels(),
                s.as_slice().iter().map(|&v| f64::from(v)).collect(),
            ),
            Input::Analog(a) => a.values.clone(),
        }
    }
}
