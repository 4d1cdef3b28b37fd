//! Browser bindings. Each exported function takes plain numbers and returns a JSON string;
//! errors come back as `{"error": "..."}` so the page never has to catch exceptions.

use delaynet::analysis::{spike_rate_spectrum, SpectrumOptions, WindowFn};
use delaynet::experiment::DelaySpec;
use delaynet::network::forward;
use delaynet::neuron::{memory_bound_table, MemoryBoundRow, ResetMode};
use delaynet::tasks::cue::{generate_wait_variant, CueTaskConfig};
use delaynet::training::{init_params, TrainConfig};
use delaynet::{Input, SpikeTrain};
use serde::Serialize;
use wasm_bindgen::prelude::*;

/// Sparse raster: one `[t, channel]` pair per spike.
#[derive(Debug, Serialize)]
pub struct Raster {
    pub steps: usize,
    pub channels: usize,
    pub dt_ms: f64,
    pub events: Vec<[u32; 2]>,
}

impl From<&SpikeTrain> for Raster {
    fn from(s: &SpikeTrain) -> Self {
        let mut events = Vec::new();
        for t in 0..s.steps() {
            events.extend(s.active(t).map(|c| [t as u32, c as u32]));
        }
        Self { steps: s.steps(), channels: s.channels(), dt_ms: s.dt_ms(), events }
    }
}

#[derive(Debug, Serialize)]
pub struct CueView {
    pub raster: Raster,
    pub label: String,
    pub cues: Vec<String>,
    pub recall_start: usize,
    pub recall_end: usize,
    /// First channel of each group: left, right, recall, noise.
    pub groups: [usize; 4],
}

#[derive(Debug, Serialize)]
pub struct NetworkView {
    pub input: Raster,
    pub hidden: Raster,
    pub delays_ms: Vec<f64>,
    pub rate_hz: f64,
    pub frequencies_hz: Vec<f64>,
    pub magnitudes: Vec<f64>,
    pub peak_hz: Option<f64>,
}

/// Memory bound for bits `1..=max_bits` at one membrane time constant.
pub fn memory_bound_rows(max_bits: u32, tau_ms: f64, dt_ms: f64) -> delaynet::Result<Vec<MemoryBoundRow>> {
    let bits: Vec<u32> = (1..=max_bits.max(1)).collect();
    memory_bound_table(&bits, &[tau_ms], dt_ms)
}

pub fn cue_view(n_cues: usize, wait_ms: f64, seed: u64) -> delaynet::Result<CueView> {
    let cfg = CueTaskConfig { n_cues, ..CueTaskConfig::simplified() };
    let s = generate_wait_variant(&cfg, wait_ms, seed)?;
    let side = |x: delaynet::tasks::cue::Side| format!("{x:?}").to_lowercase();
    Ok(CueView {
        raster: Raster::from(&s.spikes),
        label: side(s.label),
        cues: s.cue_sequence.iter().map(|&c| side(c)).collect(),
        recall_start: s.recall_window.start,
        recall_end: s.recall_window.end,
        groups: [
            cfg.left_channels().start,
            cfg.right_channels().start,
            cfg.recall_channels().start,
            cfg.noise_channels().start,
        ],
    })
}

/// Untrained network driven by one cue episode. `delays` switches the default delay bands on or off.
pub fn network_view(
    n_hidden: usize,
    in_gain: f64,
    rec_gain: f64,
    delays: bool,
    wait_ms: f64,
    seed: u64,
) -> delaynet::Result<NetworkView> {
    let task = CueTaskConfig::simplified();
    let sample = generate_wait_variant(&task, wait_ms, seed)?;
    let mut cfg = TrainConfig::default();
    cfg.init.in_gain = in_gain;
    cfg.init.rec_gain = rec_gain;
    cfg.validate()?;
    let params = init_params(task.n_channels(), n_hidden, 2, &cfg, seed)?;
    let spec = DelaySpec::default();
    let schedule = if delays {
        spec.build(n_hidden, task.dt_ms, seed)?
    } else {
        delaynet::topology::DelaySchedule::uniform(n_hidden, 0.0, task.dt_ms)?
    };
    let input = Input::Spikes(sample.spikes);
    let trace = forward(&params, &schedule, &input, ResetMode::SoftSubtract)?;
    let spectrum = spike_rate_spectrum(
        &trace.spikes,
        &SpectrumOptions { window: WindowFn::Hann, range: None },
    )?;
    let total = trace.spikes.total() as f64;
    let seconds = trace.steps() as f64 * task.dt_ms / 1000.0;
    // keep the non-negative half of the centered axis
    let (frequencies_hz, magnitudes): (Vec<f64>, Vec<f64>) = spectrum
        .frequencies_hz
        .iter()
        .zip(&spectrum.magnitudes)
        .filter(|(f, _)| **f >= 0.0)
        .map(|(f, m)| (*f, *m))
        .unzip();
    let peak_hz = spectrum.peak_hz();
    let Input::Spikes(input_spikes) = &trace.input else { unreachable!() };
    Ok(NetworkView {
        input: Raster::from(input_spikes),
        hidden: Raster::from(&trace.spikes),
        delays_ms: schedule.delays_ms.clone(),
        rate_hz: total / (n_hidden as f64 * seconds),
        frequencies_hz,
        magnitudes,
        peak_hz,
    })
}

fn to_json<T: Serialize>(r: delaynet::Result<T>) -> String {
    match r {
        Ok(v) => serde_json::to_string(&v).unwrap_or_else(|e| error_json(&e.to_string())),
        Err(e) => error_json(&e.to_string()),
    }
}

fn error_json(msg: &str) -> String {
    serde_json::json!({ "error": msg }).to_string()
}

#[wasm_bindgen]
pub fn memory_bound(max_bits: u32, tau_ms: f64, dt_ms: f64) -> String {
    to_json(memory_bound_rows(max_bits, tau_ms, dt_ms))
}

#[wasm_bindgen]
pub fn cue_sample(n_cues: u32, wait_ms: f64, seed: u32) -> String {
    to_json(cue_view(n_cues as usize, wait_ms, seed as u64))
}

#[wasm_bindgen]
pub fn simulate(n_hidden: u32, in_gain: f64, rec_gain: f64, delays: bool, wait_ms: f64, seed: u32) -> String {
    to_json(network_view(n_hidden as usize, in_gain, rec_gain, delays, wait_ms, seed as u64))
}
