//! Forward simulation of the recurrent spiking layer with per-neuron
//! transmission delays and a leaky-integrator readout.
//!
//! For each step `t` (all states zero before `t = 0`):
//!
//! ```text
//! ñ_j[t]   = n_j[t - d_j]                  (0 when t < d_j)
//! u[t]     = α_R·u[t-1] + W_i·x[t] + W_r·ñ[t-1] - u_th·n[t-1]
//! n[t]     = 1(u[t] ≥ u_th)
//! u_out[t] = α_O·u_out[t-1] + W_o·n[t]
//! ```
//!
//! The recurrent term carries the usual one-step transmission latency, so a
//! schedule of all-zero delays is the plain recurrent network. The soft reset
//! uses the neuron's own undelayed spike.

use std::io::{Read, Write};
use std::ops::Range;

use byteorder::{LittleEndian, ReadBytesExt, WriteBytesExt};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::matrix::Matrix;
use crate::neuron::{decay_factor, ResetMode};
use crate::spikes::{Input, SpikeTrain};
use crate::topology::DelaySchedule;

/// Trainable network parameters. Time constants are in milliseconds.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct NetworkParams {
    /// `n_hidden × n_in`
    pub w_in: Matrix,
    /// `n_hidden × n_hidden`, zero diagonal
    pub w_rec: Matrix,
    /// `n_out × n_hidden`
    pub w_out: Matrix,
    pub tau_rec: f64,
    pub tau_out: f64,
    pub u_th: f64,
}

impl NetworkParams {
    pub fn zeros(n_in: usize, n_hidden: usize, n_out: usize) -> Self {
        Self {
            w_in: Matrix::zeros(n_hidden, n_in),
            w_rec: Matrix::zeros(n_hidden, n_hidden),
            w_out: Matrix::zeros(n_out, n_hidden),
            tau_rec: 20.0,
            tau_out: 20.0,
            u_th: 1.0,
        }
    }

    pub fn n_in(&self) -> usize {
        self.w_in.cols()
    }

    pub fn n_hidden(&self) -> usize {
        self.w_rec.rows()
    }

    pub fn n_out(&self) -> usize {
        self.w_out.rows()
    }

    pub fn validate(&self) -> Result<()> {
        let h = self.n_hidden();
        if !self.w_rec.is_square() || self.w_in.rows() != h || self.w_out.cols() != h {
            return Err(Error::invalid(format!(
                "inconsistent shapes: w_in {}×{}, w_rec {}×{}, w_out {}×{}",
                self.w_in.rows(),
                self.w_in.cols(),
                self.w_rec.rows(),
                self.w_rec.cols(),
                self.w_out.rows(),
                self.w_out.cols()
            )));
        }
        if !(self.w_in.all_finite() && self.w_rec.all_finite() && self.w_out.all_finite()) {
            return Err(Error::invalid("non-finite weight"));
        }
        if !(self.u_th.is_finite() && self.tau_rec > 0.0 && self.tau_out > 0.0) {
            return Err(Error::invalid("time constants must be positive and u_th finite"));
        }
        Ok(())
    }

    /// Number of scalars in [`NetworkParams::to_flat`].
    pub fn len_flat(&self) -> usize {
        self.w_in.as_slice().len() + self.w_rec.as_slice().len() + self.w_out.as_slice().len() + 3
    }

    /// Flat layout `[w_in, w_rec, w_out, tau_rec, tau_out, u_th]`.
    pub fn to_flat(&self) -> Vec<f64> {
        let mut v = Vec::with_capacity(self.len_flat());
        v.extend_from_slice(self.w_in.as_slice());
        v.extend_from_slice(self.w_rec.as_slice());
        v.extend_from_slice(self.w_out.as_slice());
        v.extend_from_slice(&[self.tau_rec, self.tau_out, self.u_th]);
        v
    }

    pub fn set_flat(&mut self, flat: &[f64]) {
        assert_eq!(flat.len(), self.len_flat(), "flat parameter length mismatch");
        let (a, rest) = flat.split_at(self.w_in.as_slice().len());
        let (b, rest) = rest.split_at(self.w_rec.as_slice().len());
        let (c, rest) = rest.split_at(self.w_out.as_slice().len());
        self.w_in.as_mut_slice().copy_from_slice(a);
        self.w_rec.as_mut_slice().copy_from_slice(b);
        self.w_out.as_mut_slice().copy_from_slice(c);
        self.tau_rec = rest[0];
        self.tau_out = rest[1];
        self.u_th = rest[2];
    }
}

/// Ring buffer of past spike vectors; `delayed(j, d)` is neuron `j`'s spike
/// from `d` pushes ago.
#[derive(Clone, Debug)]
pub struct SpikeBuffer {
    width: usize,
    capacity: usize,
    rows: Vec<u8>,
    cursor: usize,
    pushed: usize,
}

impl SpikeBuffer {
    pub fn new(width: usize, max_delay: usize) -> Self {
        let capacity = max_delay + 1;
        Self { width, capacity, rows: vec![0; width * capacity], cursor: 0, pushed: 0 }
    }

    pub fn capacity(&self) -> usize {
        self.capacity
    }

    pub fn push(&mut self, spikes: &[u8]) {
        debug_assert_eq!(spikes.len(), self.width);
        let start = self.cursor * self.width;
        self.rows[start..start + self.width].copy_from_slice(spikes);
        self.cursor = (self.cursor + 1) % self.capacity;
        self.pushed += 1;
    }

    /// Spike of neuron `j` written `d` pushes ago (`d = 0` is the latest push).
    /// Zero before enough history exists.
    pub fn delayed(&self, j: usize, d: usize) -> u8 {
        assert!(d < self.capacity, "delay {d} exceeds buffer capacity {}", self.capacity);
        if d >= self.pushed {
            return 0;
        }
        let slot = (self.cursor + self.capacity - 1 - d) % self.capacity;
        self.rows[slot * self.width + j]
    }
}

/// Unrolled states of one episode, consumed by the backward pass.
#[derive(Clone, Debug)]
pub struct ForwardTrace {
    pub dt_ms: f64,
    pub reset_mode: ResetMode,
    /// `T × n_hidden` membrane potentials
    pub u: Matrix,
    /// `T × n_hidden` emitted spikes `n[t]`
    pub spikes: SpikeTrain,
    /// `T × n_hidden` delayed view `ñ[t]`
    pub delayed: SpikeTrain,
    pub input: Input,
    /// `T × n_out` readout membranes
    pub u_out: Matrix,
}

impl ForwardTrace {
    pub fn steps(&self) -> usize {
        self.u.rows()
    }

    pub fn n_hidden(&self) -> usize {
        self.u.cols()
    }

    pub fn n_out(&self) -> usize {
        self.u_out.cols()
    }
}

fn check_dims(params: &NetworkParams, delays: &DelaySchedule, input: &Input) -> Result<()> {
    params.validate()?;
    if input.channels() != params.n_in() {
        return Err(Error::invalid(format!(
            "input has {} channels, network expects {}",
            input.channels(),
            params.n_in()
        )));
    }
    if delays.len() != params.n_hidden() {
        return Err(Error::invalid(format!(
            "delay schedule covers {} neurons, network has {}",
            delays.len(),
            params.n_hidden()
        )));
    }
    if (delays.dt_ms - input.dt_ms()).abs() > 1e-12 {
        return Err(Error::invalid(format!(
            "delay schedule dt {} ms differs from input dt {} ms",
            delays.dt_ms,
            input.dt_ms()
        )));
    }
    Ok(())
}

/// Simulates one episode.
pub fn forward(
    params: &NetworkParams,
    delays: &DelaySchedule,
    input: &Input,
    reset_mode: ResetMode,
) -> Result<ForwardTrace> {
    check_dims(params, delays, input)?;
    let dt = input.dt_ms();
    let alpha_r = decay_factor(params.tau_rec, dt)?;
    let alpha_o = decay_factor(params.tau_out, dt)?;
    let (steps, h, n_out) = (input.steps(), params.n_hidden(), params.n_out());
    let theta = params.u_th;

    // column access through transposed copies keeps the sparse sums contiguous
    let w_in_t = params.w_in.transpose();
    let w_rec_t = params.w_rec.transpose();
    let w_out_t = params.w_out.transpose();

    let mut u = Matrix::zeros(steps, h);
    let mut spikes = SpikeTrain::zeros(steps, h, dt);
    let mut delayed = SpikeTrain::zeros(steps, h, dt);
    let mut u_out = Matrix::zeros(steps, n_out);
    let mut buffer = SpikeBuffer::new(h, delays.max_steps());

    let mut cur = vec![0.0; h];
    let mut out = vec![0.0; n_out];
    for t in 0..steps {
        if t == 0 {
            cur.iter_mut().for_each(|c| *c = 0.0);
        } else {
            let prev_u = u.row(t - 1);
            let prev_n = spikes.row(t - 1);
            for i in 0..h {
                let fired = f64::from(prev_n[i]);
                cur[i] = match reset_mode {
                    ResetMode::SoftSubtract => alpha_r * prev_u[i] - theta * fired,
                    ResetMode::HardZero => alpha_r * prev_u[i] * (1.0 - fired),
                };
            }
            for j in delayed.active(t - 1) {
                cur.iter_mut().zip(w_rec_t.row(j)).for_each(|(c, w)| *c += w);
            }
        }
        match input {
            Input::Spikes(s) => {
                for ch in s.active(t) {
                    cur.iter_mut().zip(w_in_t.row(ch)).for_each(|(c, w)| *c += w);
                }
            }
            Input::Analog(a) => {
                for (ch, &x) in a.values.row(t).iter().enumerate() {
                    if x != 0.0 {
                        cur.iter_mut().zip(w_in_t.row(ch)).for_each(|(c, w)| *c += w * x);
                    }
                }
            }
        }
        if cur.iter().any(|v| !v.is_finite()) {
            return Err(Error::Divergence { timestep: t, what: "non-finite hidden membrane".into() });
        }
        u.row_mut(t).copy_from_slice(&cur);
        for (n, &v) in spikes.row_mut(t).iter_mut().zip(&cur) {
            *n = u8::from(v >= theta);
        }
        buffer.push(spikes.row(t));
        for (j, &d) in delays.delay_steps.iter().enumerate() {
            let v = buffer.delayed(j, d);
            delayed.set(t, j, v);
        }

        out.iter_mut().for_each(|o| *o *= alpha_o);
        for j in spikes.active(t) {
            out.iter_mut().zip(w_out_t.row(j)).for_each(|(o, w)| *o += w);
        }
        if out.iter().any(|v| !v.is_finite()) {
            return Err(Error::Divergence { timestep: t, what: "non-finite output membrane".into() });
        }
        u_out.row_mut(t).copy_from_slice(&out);
    }

    Ok(ForwardTrace { dt_ms: dt, reset_mode, u, spikes, delayed, input: input.clone(), u_out })
}

fn check_window(trace: &ForwardTrace, window: &Range<usize>) -> Result<()> {
    if window.start >= window.end || window.end > trace.steps() {
        return Err(Error::invalid(format!(
            "readout window {:?} is empty or outside 0..{}",
            window,
            trace.steps()
        )));
    }
    Ok(())
}

/// Mean readout membrane per output neuron over `window`.
pub fn readout_logits(trace: &ForwardTrace, window: &Range<usize>) -> Result<Vec<f64>> {
    check_window(trace, window)?;
    let mut acc = vec![0.0; trace.n_out()];
    for t in window.clone() {
        acc.iter_mut().zip(trace.u_out.row(t)).for_each(|(a, v)| *a += v);
    }
    let len = window.len() as f64;
    Ok(acc.into_iter().map(|a| a / len).collect())
}

/// Index of the largest entry; ties go to the lower index.
pub fn argmax(values: &[f64]) -> usize {
    let mut best = 0;
    for (i, &v) in values.iter().enumerate().skip(1) {
        if v > values[best] {
            best = i;
        }
    }
    best
}

/// Class chosen by the mean readout membrane over the recall window.
pub fn readout_decision(trace: &ForwardTrace, window: &Range<usize>) -> Result<usize> {
    readout_logits(trace, window).map(|l| argmax(&l))
}

/// Raster rows `t,neuron,spike`, one row per emitted spike.
pub fn write_raster_csv<W: Write>(mut w: W, spikes: &SpikeTrain) -> std::io::Result<()> {
    writeln!(w, "t,neuron,spike")?;
    for t in 0..spikes.steps() {
        for i in spikes.active(t) {
            writeln!(w, "{t},{i},1")?;
        }
    }
    Ok(())
}

pub const RUN_MAGIC: &[u8; 8] = b"DLYRUN01";

/// Writes a trace as a run file.
///
/// Layout, little-endian:
///
/// ```text
/// magic      8 bytes  "DLYRUN01"
/// T          u32
/// n_hidden   u32
/// n_out      u32
/// dt_ms      f64
/// u          T·n_hidden f64
/// spikes     T·n_hidden u8
/// u_out      T·n_out f64
/// ```
pub fn write_run_file<W: Write>(mut w: W, trace: &ForwardTrace) -> std::io::Result<()> {
    w.write_all(RUN_MAGIC)?;
    w.write_u32::<LittleEndian>(trace.steps() as u32)?;
    w.write_u32::<LittleEndian>(trace.n_hidden() as u32)?;
    w.write_u32::<LittleEndian>(trace.n_out() as u32)?;
    w.write_f64::<LittleEndian>(trace.dt_ms)?;
    for &v in trace.u.as_slice() {
        w.write_f64::<LittleEndian>(v)?;
    }
    w.write_all(trace.spikes.as_slice())?;
    for &v in trace.u_out.as_slice() {
        w.write_f64::<LittleEndian>(v)?;
    }
    Ok(())
}

/// Contents of a run file.
#[derive(Clone, Debug, PartialEq)]
pub struct RunRecord {
    pub dt_ms: f64,
    pub u: Matrix,
    pub spikes: SpikeTrain,
    pub u_out: Matrix,
}

pub fn read_run_file<R: Read>(mut r: R) -> std::io::Result<RunRecord> {
    use std::io::{Error as IoError, ErrorKind};
    let mut magic = [0u8; 8];
    r.read_exact(&mut magic)?;
    if &magic != RUN_MAGIC {
        return Err(IoError::new(ErrorKind::InvalidData, "not a run file"));
    }
    let steps = r.read_u32::<LittleEndian>()? as usize;
    let h = r.read_u32::<LittleEndian>()? as usize;
    let n_out = r.read_u32::<LittleEndian>()? as usize;
    let dt_ms = r.read_f64::<LittleEndian>()?;
    let mut read_f64s = |n: usize| -> std::io::Result<Vec<f64>> {
        let mut v = vec![0.0; n];
        r.read_f64_into::<LittleEndian>(&mut v)?;
        Ok(v)
    };
    let u = Matrix::from_vec(steps, h, read_f64s(steps * h)?);
    let mut raw = vec![0u8; steps * h];
    r.read_exact(&mut raw)?;
    let u_out = {
        let mut v = vec![0.0; steps * n_out];
        r.read_f64_into::<LittleEndian>(&mut v)?;
        Matrix::from_vec(steps, n_out, v)
    };
    let spikes = SpikeTrain::from_raw(steps, h, dt_ms, raw)
        .map_err(|e| IoError::new(ErrorKind::InvalidData, e.to_string()))?;
    Ok(RunRecord { dt_ms, u, spikes, u_out })
}
