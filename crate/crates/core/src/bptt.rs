//! Reverse-mode gradients through the unrolled network.
//!
//! Adjoints flow backward along both routes of the unrolled graph: through the
//! membrane leak (`α_R`) and through spikes, where the clamped-linear surrogate
//! stands in for the Heaviside derivative. A spike's recurrent contribution
//! returns to its emission time shifted by the emitting neuron's delay, so a
//! delay of `d` steps carries the gradient `d + 1` steps back in one hop.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::matrix::Matrix;
use crate::network::{ForwardTrace, NetworkParams};
use crate::neuron::{decay_factor, decay_factor_derivative, surrogate_derivative, ResetMode};
use crate::spikes::Input;
use crate::topology::DelaySchedule;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Gradients {
    pub w_in: Matrix,
    pub w_rec: Matrix,
    pub w_out: Matrix,
    pub tau_rec: f64,
    pub tau_out: f64,
    pub u_th: f64,
}

impl Gradients {
    pub fn zeros_like(params: &NetworkParams) -> Self {
        Self {
            w_in: Matrix::zeros(params.w_in.rows(), params.w_in.cols()),
            w_rec: Matrix::zeros(params.w_rec.rows(), params.w_rec.cols()),
            w_out: Matrix::zeros(params.w_out.rows(), params.w_out.cols()),
            tau_rec: 0.0,
            tau_out: 0.0,
            u_th: 0.0,
        }
    }

    /// Global L2 norm over every entry.
    pub fn norm(&self) -> f64 {
        (self.w_in.sum_squares()
            + self.w_rec.sum_squares()
            + self.w_out.sum_squares()
            + self.tau_rec * self.tau_rec
            + self.tau_out * self.tau_out
            + self.u_th * self.u_th)
            .sqrt()
    }

    pub fn add_assign(&mut self, other: &Gradients) {
        self.w_in.add_assign(&other.w_in);
        self.w_rec.add_assign(&other.w_rec);
        self.w_out.add_assign(&other.w_out);
        self.tau_rec += other.tau_rec;
        self.tau_out += other.tau_out;
        self.u_th += other.u_th;
    }

    pub fn scale(&mut self, k: f64) {
        self.w_in.scale(k);
        self.w_rec.scale(k);
        self.w_out.scale(k);
        self.tau_rec *= k;
        self.tau_out *= k;
        self.u_th *= k;
    }

    pub fn all_finite(&self) -> bool {
        self.w_in.all_finite()
            && self.w_rec.all_finite()
            && self.w_out.all_finite()
            && self.tau_rec.is_finite()
            && self.tau_out.is_finite()
            && self.u_th.is_finite()
    }

    /// Same layout as [`NetworkParams::to_flat`].
    pub fn to_flat(&self) -> Vec<f64> {
        let mut v = Vec::new();
        v.extend_from_slice(self.w_in.as_slice());
        v.extend_from_slice(self.w_rec.as_slice());
        v.extend_from_slice(self.w_out.as_slice());
        v.extend_from_slice(&[self.tau_rec, self.tau_out, self.u_th]);
        v
    }
}

/// Backpropagates loss adjoints through one recorded episode.
///
/// `d_uout` holds `∂L/∂u_out[t]` (`T × n_out`). `d_spikes`, when present, holds
/// direct `∂L/∂n[t]` terms (`T × n_hidden`) from losses on the hidden activity.
pub fn backward(
    trace: &ForwardTrace,
    params: &NetworkParams,
    delays: &DelaySchedule,
    d_uout: &Matrix,
    d_spikes: Option<&Matrix>,
) -> Result<Gradients> {
    let (steps, h, n_out) = (trace.steps(), trace.n_hidden(), trace.n_out());
    if params.n_hidden() != h || params.n_out() != n_out || delays.len() != h {
        return Err(Error::invalid("trace, parameters and delays disagree on sizes"));
    }
    if d_uout.rows() != steps || d_uout.cols() != n_out {
        return Err(Error::invalid(format!(
            "output adjoints are {}×{}, expected {steps}×{n_out}",
            d_uout.rows(),
            d_uout.cols()
        )));
    }
    if let Some(ds) = d_spikes {
        if ds.rows() != steps || ds.cols() != h {
            return Err(Error::invalid("spike adjoints have the wrong shape"));
        }
    }

    let dt = trace.dt_ms;
    let alpha_r = decay_factor(params.tau_rec, dt)?;
    let alpha_o = decay_factor(params.tau_out, dt)?;
    let theta = params.u_th;
    let soft = trace.reset_mode == ResetMode::SoftSubtract;

    let mut lam_u = vec![0.0; h];
    let mut lam_u_next = vec![0.0; h];
    let mut lam_o = vec![0.0; n_out];
    let mut lam_o_next = vec![0.0; n_out];
    let mut g_spike = vec![0.0; h];
    // rec_back[s] = W_rᵀ·λ_u[s], collected by presynaptic neurons d + 1 steps earlier
    let mut rec_back = Matrix::zeros(steps, h);

    // accumulated transposed so the sparse updates touch contiguous rows
    let mut dw_in_t = Matrix::zeros(params.n_in(), h);
    let mut dw_rec_t = Matrix::zeros(h, h);
    let mut dw_out = Matrix::zeros(n_out, h);
    let (mut d_alpha_r, mut d_alpha_o, mut d_theta) = (0.0, 0.0, 0.0);

    for t in (0..steps).rev() {
        // readout leaky integrator
        for k in 0..n_out {
            lam_o[k] = d_uout[(t, k)] + alpha_o * lam_o_next[k];
        }
        if t > 0 {
            d_alpha_o += lam_o.iter().zip(trace.u_out.row(t - 1)).map(|(l, u)| l * u).sum::<f64>();
        }
        for j in trace.spikes.active(t) {
            for k in 0..n_out {
                dw_out[(k, j)] += lam_o[k];
            }
        }

        // total adjoint of the spike n[t]
        match d_spikes {
            Some(ds) => g_spike.copy_from_slice(ds.row(t)),
            None => g_spike.iter_mut().for_each(|g| *g = 0.0),
        }
        for k in 0..n_out {
            let l = lam_o[k];
            if l != 0.0 {
                g_spike.iter_mut().zip(params.w_out.row(k)).for_each(|(g, w)| *g += w * l);
            }
        }
        if t + 1 < steps {
            let u_t = trace.u.row(t);
            for i in 0..h {
                g_spike[i] -= if soft { theta } else { alpha_r * u_t[i] } * lam_u_next[i];
                let arrival = t + 1 + delays.delay_steps[i];
                if arrival < steps {
                    g_spike[i] += rec_back[(arrival, i)];
                }
            }
        }

        // membrane adjoint
        let u_t = trace.u.row(t);
        let n_t = trace.spikes.row(t);
        for i in 0..h {
            let sg = surrogate_derivative(u_t[i], theta);
            let leak = if soft { alpha_r } else { alpha_r * (1.0 - f64::from(n_t[i])) };
            lam_u[i] = leak * lam_u_next[i] + sg * g_spike[i];
            d_theta -= sg * g_spike[i];
        }
        if lam_u.iter().any(|v| !v.is_finite()) {
            return Err(Error::Divergence { timestep: t, what: "non-finite membrane adjoint".into() });
        }

        if t > 0 {
            let u_prev = trace.u.row(t - 1);
            let n_prev = trace.spikes.row(t - 1);
            for i in 0..h {
                let fired = f64::from(n_prev[i]);
                if soft {
                    d_alpha_r += lam_u[i] * u_prev[i];
                    d_theta -= fired * lam_u[i];
                } else {
                    d_alpha_r += lam_u[i] * u_prev[i] * (1.0 - fired);
                }
            }
            for j in trace.delayed.active(t - 1) {
                dw_rec_t.row_mut(j).iter_mut().zip(&lam_u).for_each(|(d, l)| *d += l);
            }
        }
        match &trace.input {
            Input::Spikes(s) => {
                for ch in s.active(t) {
                    dw_in_t.row_mut(ch).iter_mut().zip(&lam_u).for_each(|(d, l)| *d += l);
                }
            }
            Input::Analog(a) => {
                for (ch, &x) in a.values.row(t).iter().enumerate() {
                    if x != 0.0 {
                        dw_in_t.row_mut(ch).iter_mut().zip(&lam_u).for_each(|(d, l)| *d += x * l);
                    }
                }
            }
        }

        let back = rec_back.row_mut(t);
        for k in 0..h {
            let l = lam_u[k];
            if l != 0.0 {
                back.iter_mut().zip(params.w_rec.row(k)).for_each(|(b, w)| *b += w * l);
            }
        }

        std::mem::swap(&mut lam_u, &mut lam_u_next);
        std::mem::swap(&mut lam_o, &mut lam_o_next);
    }

    let mut w_rec = dw_rec_t.transpose();
    w_rec.zero_diagonal();
    let grads = Gradients {
        w_in: dw_in_t.transpose(),
        w_rec,
        w_out: dw_out,
        tau_rec: d_alpha_r * decay_factor_derivative(params.tau_rec, dt),
        tau_out: d_alpha_o * decay_factor_derivative(params.tau_out, dt),
        u_th: d_theta,
    };
    if !grads.all_finite() {
        return Err(Error::Divergence { timestep: 0, what: "non-finite parameter gradient".into() });
    }
    Ok(grads)
}

/// Rescales all gradients so their global norm is at most `max_norm`.
pub fn clip_gradient_norm(mut grads: Gradients, max_norm: f64) -> Gradients {
    let norm = grads.norm();
    if norm > max_norm && norm > 0.0 {
        grads.scale(max_norm / norm);
    }
    grads
}
