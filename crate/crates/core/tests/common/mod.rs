//! Test oracles shared by the integration suites.
#![allow(dead_code)]

pub mod tape;

use delaynet::neuron::ResetMode;
use delaynet::network::NetworkParams;
use delaynet::topology::DelaySchedule;
use delaynet::training::{BfMode, BfReduction, Episode};
use delaynet::{Input, Matrix};
use tape::{Tape, Var};

/// Gradients from the unrolled scalar graph, in the library's flat order
/// `[w_in, w_rec, w_out, tau_rec, tau_out, u_th]`, with `diag(W_r)` zeroed.
pub struct OracleResult {
    pub loss: f64,
    pub flat_grad: Vec<f64>,
}

fn var_matrix(tape: &mut Tape, m: &Matrix) -> Vec<Vec<Var>> {
    (0..m.rows()).map(|r| (0..m.cols()).map(|c| tape.input(m[(r, c)])).collect()).collect()
}

/// Builds the whole episode as a scalar expression graph and differentiates it
/// in reverse. Shares no code with the library's forward or backward passes.
pub fn oracle_gradient(
    params: &NetworkParams,
    delays: &DelaySchedule,
    ep: &Episode,
    reset: ResetMode,
    beta: f64,
    bf_mode: BfMode,
    bf_reduction: BfReduction,
) -> OracleResult {
    let mut tp = Tape::new();
    let (h, n_in, n_out) = (params.w_rec.rows(), params.w_in.cols(), params.w_out.rows());
    let steps = ep.input.steps();
    let dt = ep.input.dt_ms();

    let w_in = var_matrix(&mut tp, &params.w_in);
    let w_rec = var_matrix(&mut tp, &params.w_rec);
    let w_out = var_matrix(&mut tp, &params.w_out);
    let tau_r = tp.input(params.tau_rec);
    let tau_o = tp.input(params.tau_out);
    let theta = tp.input(params.u_th);

    let minus_dt = tp.constant(-dt);
    let ratio_r = tp.div(minus_dt, tau_r);
    let alpha_r = tp.exp(ratio_r);
    let ratio_o = tp.div(minus_dt, tau_o);
    let alpha_o = tp.exp(ratio_o);
    let zero = tp.constant(0.0);
    let one = tp.constant(1.0);

    let x = |t: usize, c: usize| match &ep.input {
        Input::Spikes(s) => f64::from(s.get(t, c)),
        Input::Analog(a) => a.values[(t, c)],
    };

    let mut u_hist: Vec<Vec<Var>> = Vec::with_capacity(steps);
    let mut n_hist: Vec<Vec<Var>> = Vec::with_capacity(steps);
    let mut out_hist: Vec<Vec<Var>> = Vec::with_capacity(steps);
    for t in 0..steps {
        let mut u_t = Vec::with_capacity(h);
        for i in 0..h {
            let mut acc = zero;
            if t > 0 {
                let prev_u = u_hist[t - 1][i];
                let prev_n = n_hist[t - 1][i];
                match reset {
                    ResetMode::SoftSubtract => {
                        let leak = tp.mul(alpha_r, prev_u);
                        let sub = tp.mul(theta, prev_n);
                        acc = tp.sub(leak, sub);
                    }
                    ResetMode::HardZero => {
                        let keep = tp.sub(one, prev_n);
                        let leak = tp.mul(alpha_r, prev_u);
                        acc = tp.mul(leak, keep);
                    }
                }
                // recurrent input from the delayed view at t - 1
                for j in 0..h {
                    let d = delays.delay_steps[j];
                    if t - 1 >= d {
                        let src = n_hist[t - 1 - d][j];
                        let term = tp.mul(w_rec[i][j], src);
                        acc = tp.add(acc, term);
                    }
                }
            }
            for c in 0..n_in {
                let v = x(t, c);
                if v != 0.0 {
                    let xc = tp.constant(v);
                    let term = tp.mul(w_in[i][c], xc);
                    acc = tp.add(acc, term);
                }
            }
            u_t.push(acc);
        }
        let n_t: Vec<Var> = u_t.iter().map(|&u| tp.spike(u, theta)).collect();
        let mut o_t = Vec::with_capacity(n_out);
        for k in 0..n_out {
            let mut acc = if t > 0 { tp.mul(alpha_o, out_hist[t - 1][k]) } else { zero };
            for j in 0..h {
                let term = tp.mul(w_out[k][j], n_t[j]);
                acc = tp.add(acc, term);
            }
            o_t.push(acc);
        }
        u_hist.push(u_t);
        n_hist.push(n_t);
        out_hist.push(o_t);
    }

    // cross-entropy on the window mean, log-sum-exp written out directly
    let inv = tp.constant(1.0 / ep.window.len() as f64);
    let logits: Vec<Var> = (0..n_out)
        .map(|k| {
            let mut s = zero;
            for t in ep.window.clone() {
                s = tp.add(s, out_hist[t][k]);
            }
            tp.mul(s, inv)
        })
        .collect();
    let mut sum_exp = zero;
    for &l in &logits {
        let e = tp.exp(l);
        sum_exp = tp.add(sum_exp, e);
    }
    let lse = tp.ln(sum_exp);
    let mut loss = tp.sub(lse, logits[ep.label]);

    if beta > 0.0 {
        let mut bf = zero;
        match bf_mode {
            BfMode::Population => {
                let mut prev = zero;
                for t in 0..steps {
                    let mut count = zero;
                    for i in 0..h {
                        count = tp.add(count, n_hist[t][i]);
                    }
                    let diff = tp.sub(count, prev);
                    let sq = tp.mul(diff, diff);
                    bf = tp.add(bf, sq);
                    prev = count;
                }
            }
            BfMode::PerNeuron => {
                for t in 0..steps {
                    for i in 0..h {
                        let prev = if t == 0 { zero } else { n_hist[t - 1][i] };
                        let diff = tp.sub(n_hist[t][i], prev);
                        let sq = tp.mul(diff, diff);
                        bf = tp.add(bf, sq);
                    }
                }
            }
        }
        let scale = match bf_reduction {
            BfReduction::Sum => beta,
            BfReduction::Mean => beta / steps as f64,
        };
        let k = tp.constant(scale);
        let weighted = tp.mul(bf, k);
        loss = tp.add(loss, weighted);
    }

    let adj = tp.backward(loss);
    let mut flat = Vec::new();
    for m in [&w_in, &w_rec, &w_out] {
        for row in m.iter() {
            for v in row {
                flat.push(adj[v.0]);
            }
        }
    }
    // self-connections are held at zero by the training constraints
    let off = n_in * h;
    for i in 0..h {
        flat[off + i * h + i] = 0.0;
    }
    flat.extend([adj[tau_r.0], adj[tau_o.0], adj[theta.0]]);
    OracleResult { loss: tp.value(loss), flat_grad: flat }
}

/// `|a - b| ≤ abs + rel·|b|` for every pair; returns the worst offender otherwise.
pub fn close(a: &[f64], b: &[f64], rel: f64, abs: f64) -> Result<(), String> {
    assert_eq!(a.len(), b.len());
    for (i, (&x, &y)) in a.iter().zip(b).enumerate() {
        if !((x - y).abs() <= abs + rel * y.abs()) {
            return Err(format!("index {i}: library {x:e} vs oracle {y:e}"));
        }
    }
    Ok(())
}

/// A small random network, episode and loss setting for gradient checks.
pub struct Instance {
    pub params: NetworkParams,
    pub delays: DelaySchedule,
    pub episode: Episode,
    pub reset: ResetMode,
    pub beta: f64,
    pub bf_mode: BfMode,
    pub bf_reduction: BfReduction,
}

pub fn random_instance(seed: u64) -> Instance {
    use rand::Rng;
    let mut rng = delaynet::seed::rng(seed);
    let h = rng.gen_range(1..=5);
    let n_in = rng.gen_range(1..=3);
    let n_out = rng.gen_range(2..=3);
    let steps = rng.gen_range(2..=20);
    let uniform = |r: usize, c: usize, s: f64, rng: &mut rand_chacha::ChaCha8Rng| {
        Matrix::from_vec(r, c, (0..r * c).map(|_| rng.gen_range(-s..s)).collect())
    };
    let w_in = uniform(h, n_in, 2.0, &mut rng);
    let mut w_rec = uniform(h, h, 1.5, &mut rng);
    w_rec.zero_diagonal();
    let w_out = uniform(n_out, h, 1.0, &mut rng);
    let params = NetworkParams {
        w_in,
        w_rec,
        w_out,
        tau_rec: rng.gen_range(2.0..30.0),
        tau_out: rng.gen_range(2.0..30.0),
        u_th: rng.gen_range(0.3..1.5),
    };
    let delays = DelaySchedule::from_ms((0..h).map(|_| rng.gen_range(0..=3) as f64).collect(), 1.0).unwrap();
    let input = if rng.gen_bool(0.5) {
        let data = (0..steps * n_in).map(|_| u8::from(rng.gen_bool(0.4))).collect();
        Input::Spikes(delaynet::SpikeTrain::from_raw(steps, n_in, 1.0, data).unwrap())
    } else {
        let values = Matrix::from_vec(steps, n_in, (0..steps * n_in).map(|_| rng.gen_range(0.0..1.0)).collect());
        Input::Analog(delaynet::AnalogTrain { values, dt_ms: 1.0 })
    };
    let start = rng.gen_range(0..steps);
    let end = rng.gen_range(start + 1..=steps);
    let episode = Episode { input, label: rng.gen_range(0..n_out), window: start..end };
    let reset = if rng.gen_bool(0.5) { ResetMode::SoftSubtract } else { ResetMode::HardZero };
    let beta = [0.0, 0.01, 0.1][rng.gen_range(0..3)];
    let bf_mode = if rng.gen_bool(0.5) { BfMode::Population } else { BfMode::PerNeuron };
    let bf_reduction = if rng.gen_bool(0.5) { BfReduction::Sum } else { BfReduction::Mean };
    Instance { params, delays, episode, reset, beta, bf_mode, bf_reduction }
}

impl Instance {
    pub fn loss_config(&self) -> delaynet::training::LossConfig {
        delaynet::training::LossConfig {
            beta: self.beta,
            bf_mode: self.bf_mode,
            bf_reduction: self.bf_reduction,
            ..Default::default()
        }
    }

    pub fn oracle(&self) -> OracleResult {
        oracle_gradient(&self.params, &self.delays, &self.episode, self.reset, self.beta, self.bf_mode, self.bf_reduction)
    }

    /// Library loss and flat gradient.
    pub fn library(&self) -> (f64, Vec<f64>) {
        let cfg = self.loss_config();
        let g = delaynet::training::episode_gradient(&self.params, &self.delays, &self.episode, self.reset, &cfg)
            .unwrap();
        (g.loss(&cfg), g.grads.to_flat())
    }

    /// Library loss at perturbed parameters, from the forward pass only.
    pub fn loss_at(&self, params: &NetworkParams) -> f64 {
        let cfg = self.loss_config();
        let trace = delaynet::network::forward(params, &self.delays, &self.episode.input, self.reset).unwrap();
        let logits = delaynet::network::readout_logits(&trace, &self.episode.window).unwrap();
        let ce = delaynet::training::cross_entropy(&logits, self.episode.label).unwrap();
        let bf = delaynet::training::branching_factor_loss(&trace.spikes, self.bf_mode).unwrap()
            * self.bf_reduction.factor(trace.steps());
        delaynet::training::total_loss(ce, bf, &cfg)
    }

    /// Central differences of the loss with respect to every `W_o` entry.
    pub fn readout_fd(&self, h: f64) -> Vec<f64> {
        let mut out = Vec::new();
        for k in 0..self.params.w_out.rows() {
            for j in 0..self.params.w_out.cols() {
                let mut p = self.params.clone();
                p.w_out[(k, j)] += h;
                let up = self.loss_at(&p);
                p.w_out[(k, j)] -= 2.0 * h;
                let down = self.loss_at(&p);
                out.push((up - down) / (2.0 * h));
            }
        }
        out
    }

    /// Slice of a flat gradient holding `W_o`.
    pub fn readout_slice<'a>(&self, flat: &'a [f64]) -> &'a [f64] {
        let p = &self.params;
        let start = p.w_in.rows() * p.w_in.cols() + p.w_rec.rows() * p.w_rec.cols();
        &flat[start..start + p.w_out.rows() * p.w_out.cols()]
    }
}
