//! End-to-end acceptance run. Prints one PASS/FAIL line per criterion and a summary.
//! Set `DELAYNET_ACCEPTANCE_STRICT=1` to exit non-zero when any criterion fails;
//! otherwise failures are reported without stopping the rest of `cargo test`.
//! The training criteria dominate the runtime.

#[allow(dead_code)]
mod common;

use std::path::Path;
use std::time::Instant;

use delaynet::experiment::DelaySpec;
use delaynet::network::{forward, NetworkParams};
use delaynet::neuron::{memory_bound_table, surrogate_derivative, ResetMode};
use delaynet::seed::{derive_indexed, derive_seed};
use delaynet::tasks::{
    generate_wait_variant, load_psmnist, pixel_permutation, probabilistic_baseline_accuracy, CueStream,
    CueTaskConfig, PsMnistConfig, BASELINE_MEMORY,
};
use delaynet::topology::{assign_delays_by_fraction, DelaySchedule};
use delaynet::training::{
    evaluate_stream, evaluate_with, init_params, train, write_metrics_csv, ConstraintAsserter, TrainConfig,
    TrainOutcome, TrainStatus,
};
use delaynet::{AnalogTrain, Input, Matrix};

use common::{close, random_instance};

const HIDDEN: usize = 125;
const SEEDS: [u64; 3] = [1, 2, 3];
const FRESH_SAMPLES: usize = 512;
const CEILING: f64 = 0.65;

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: impl Into<String>) -> Outcome {
    Outcome { pass, detail: detail.into() }
}

fn desk_config() -> TrainConfig {
    TrainConfig { epochs: 40, samples_per_epoch: 256, batch_size: 8, test_samples: 64, ..TrainConfig::default() }
}

fn desk_stream() -> CueStream {
    CueStream::new(CueTaskConfig::simplified()).unwrap()
}

fn desk_delays(seed: u64) -> DelaySchedule {
    DelaySpec::default().build(HIDDEN, 1.0, seed).unwrap()
}

struct DeskRun {
    seed: u64,
    outcome: TrainOutcome,
    delays: DelaySchedule,
    accuracy: f64,
    batches_checked: usize,
}

/// Trains under the constraint asserter and scores on fresh samples.
fn desk_run(cfg: &TrainConfig, delays: DelaySchedule, seed: u64) -> delaynet::Result<DeskRun> {
    let stream = desk_stream();
    let mut asserter = ConstraintAsserter::default();
    let outcome = train(cfg, HIDDEN, &delays, &stream, seed, &mut asserter)?;
    let report = evaluate_stream(
        &outcome.params,
        &delays,
        cfg.reset_mode,
        &stream,
        FRESH_SAMPLES,
        derive_seed(seed, "acceptance/fresh"),
    )?;
    Ok(DeskRun { seed, outcome, delays, accuracy: report.accuracy, batches_checked: asserter.checked })
}

fn metrics_csv(o: &TrainOutcome) -> Vec<u8> {
    let mut buf = Vec::new();
    write_metrics_csv(&mut buf, &o.history).unwrap();
    buf
}

fn surrogate_exactness() -> Outcome {
    let mut mismatches = 0;
    let n = 10_000;
    for i in 0..n {
        let u = -3.0 + 6.0 * i as f64 / (n - 1) as f64;
        let th = 0.25 + (i % 7) as f64 * 0.25;
        let x = u - th + 1.0;
        let expected = if x < 0.0 {
            0.0
        } else if x > 1.0 {
            1.0
        } else {
            x
        };
        if surrogate_derivative(u, th) != expected {
            mismatches += 1;
        }
    }
    outcome(mismatches == 0, format!("{n} grid points, {mismatches} mismatches"))
}

fn gradient_oracle() -> Outcome {
    let mut worst = String::new();
    let mut failures = 0;
    for seed in 0..50 {
        let inst = random_instance(10_000 + seed);
        let (_, grad) = inst.library();
        if let Err(e) = close(&grad, &inst.oracle().flat_grad, 1e-6, 1e-10) {
            failures += 1;
            worst = format!("; seed {seed}: {e}");
        }
    }
    outcome(failures == 0, format!("50 instances, {failures} mismatches{worst}"))
}

fn readout_finite_differences() -> Outcome {
    let mut failures = 0;
    let mut entries = 0;
    for seed in 0..10 {
        let inst = random_instance(20_000 + seed);
        let (_, grad) = inst.library();
        let fd = inst.readout_fd(1e-5);
        entries += fd.len();
        if close(inst.readout_slice(&grad), &fd, 1e-4, 1e-8).is_err() {
            failures += 1;
        }
    }
    outcome(failures == 0, format!("10 instances, {entries} W_o entries, {failures} mismatches"))
}

/// Neuron 0 fires once at `t0`; neuron 1 listens to it through a subthreshold weight.
fn delay_probe(d: usize) -> Result<(), String> {
    let t0 = 5;
    let steps = t0 + d + 6;
    let mut x = Matrix::zeros(steps, 1);
    x[(t0, 0)] = 1.5;
    let input = Input::Analog(AnalogTrain { values: x, dt_ms: 1.0 });
    let params = NetworkParams {
        w_in: Matrix::from_vec(2, 1, vec![1.0, 0.0]),
        w_rec: Matrix::from_vec(2, 2, vec![0.0, 0.0, 0.5, 0.0]),
        w_out: Matrix::zeros(2, 2),
        tau_rec: 20.0,
        tau_out: 20.0,
        u_th: 1.0,
    };
    let delays = DelaySchedule::from_ms(vec![d as f64, 0.0], 1.0).unwrap();
    let trace = forward(&params, &delays, &input, ResetMode::SoftSubtract).map_err(|e| e.to_string())?;
    let fired: Vec<usize> = (0..steps).filter(|&t| trace.spikes.get(t, 0) == 1).collect();
    if fired != [t0] {
        return Err(format!("d={d}: source fired at {fired:?}"));
    }
    let seen: Vec<usize> = (0..steps).filter(|&t| trace.delayed.get(t, 0) == 1).collect();
    if seen != [t0 + d] {
        return Err(format!("d={d}: transmitted at {seen:?}, expected {}", t0 + d));
    }
    let first = (0..steps).find(|&t| trace.u[(t, 1)] != 0.0);
    if first != Some(t0 + d + 1) || (trace.u[(t0 + d + 1, 1)] - 0.5).abs() > 1e-15 {
        return Err(format!("d={d}: target membrane first moves at {first:?}"));
    }
    Ok(())
}

fn delay_semantics() -> Outcome {
    let errors: Vec<String> = (0..=100).filter_map(|d| delay_probe(d).err()).collect();
    outcome(
        errors.is_empty(),
        format!(
            "d=0..100: spike at t transmitted at t+d, integrated by the target at t+d+1; {} failures{}",
            errors.len(),
            errors.first().map(|e| format!(" ({e})")).unwrap_or_default()
        ),
    )
}

fn memory_bound() -> Outcome {
    let bits: Vec<u32> = (2..=16).collect();
    let taus = [20.0, 200.0, 2000.0];
    let rows = memory_bound_table(&bits, &taus, 1.0).unwrap();
    let bounded = rows.iter().all(|r| r.empirical_ms <= r.analytical_ms);
    let mut ordered = true;
    let mut notes = Vec::new();
    for &tau in &taus {
        let gap = |b: u32| rows.iter().find(|r| r.n_bits == b && r.tau_ms == tau).unwrap().relative_gap();
        let at16 = gap(16);
        let smallest_below = (2..16).map(gap).fold(f64::INFINITY, f64::min);
        ordered &= smallest_below > at16;
        notes.push(format!("τ={tau}: min gap<16 {smallest_below:.3} vs 16 {at16:.3}"));
    }
    outcome(bounded && ordered, format!("empirical ≤ analytical: {bounded}; {}", notes.join(", ")))
}

/// Majority of the last `memory` cues over every tie-free sequence of `n` cues.
fn enumerated_baseline(n: usize, memory: usize) -> f64 {
    let (mut total, mut score) = (0.0, 0.0);
    for mask in 0u32..(1 << n) {
        let left = mask.count_ones() as usize;
        if 2 * left == n {
            continue;
        }
        let truth = 2 * left > n;
        let window = memory.min(n);
        let recent_left = (mask & ((1u32 << window) - 1)).count_ones() as usize;
        total += 1.0;
        score += if 2 * recent_left == window {
            0.5
        } else if (2 * recent_left > window) == truth {
            1.0
        } else {
            0.0
        };
    }
    score / total
}

fn cue_baseline() -> Outcome {
    let mut max_err: f64 = 0.0;
    for n in 1..=15 {
        let a = probabilistic_baseline_accuracy(n, BASELINE_MEMORY);
        max_err = max_err.max((a - enumerated_baseline(n, BASELINE_MEMORY)).abs());
    }
    let ones = (1..=7).all(|n| probabilistic_baseline_accuracy(n, BASELINE_MEMORY) == 1.0);
    let v: Vec<f64> = [7, 9, 11, 13].iter().map(|&n| probabilistic_baseline_accuracy(n, BASELINE_MEMORY)).collect();
    let decreasing = v.windows(2).all(|w| w[1] < w[0]);
    outcome(
        ones && decreasing && max_err <= 1e-12,
        format!(
            "n≤7 all 1.0: {ones}; n=9,11,13: {:.6} {:.6} {:.6}; max |Δ| vs enumeration {max_err:.1e}",
            v[1], v[2], v[3]
        ),
    )
}

fn psmnist() -> Outcome {
    let perm = pixel_permutation(784, 7);
    let mut seen = vec![false; 784];
    perm.iter().for_each(|&p| seen[p] = true);
    let bijective = perm.len() == 784 && seen.iter().all(|&s| s);

    let dir = Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/data/psmnist");
    let data = match load_psmnist(&dir, &PsMnistConfig { max_train: Some(1000), max_test: Some(200), ..Default::default() }) {
        Ok(d) => d,
        Err(e) => return outcome(false, format!("fixture: {e}")),
    };
    let ep = data.train_episode_at(0).unwrap();
    let shaped = ep.input.steps() == 784 && ep.input.channels() == 1 && ep.window == (784 - 28..784);

    let seed = 1;
    let mut cfg = TrainConfig { epochs: 3, samples_per_epoch: 1000, batch_size: 25, test_samples: 50, ..TrainConfig::default() };
    cfg.init.in_gain = 1.0;
    cfg.init.rec_gain = 10.0;
    cfg.loss.clip_max_norm = 1.0;
    let delays = assign_delays_by_fraction(216, &[0.176, 0.424, 0.4], &[0.0, 25.0, 86.0], 1.0, seed).unwrap();
    let subset = |p: &NetworkParams| {
        evaluate_with(p, &delays, cfg.reset_mode, 1000, |i| data.train_episode_at(i)).map(|r| r.loss)
    };
    let before = subset(&init_params(1, 216, 10, &cfg, seed).unwrap()).unwrap();
    let mut asserter = ConstraintAsserter::default();
    let trained = train(&cfg, 216, &delays, &data, seed, &mut asserter).unwrap();
    let after = subset(&trained.params).unwrap();
    let drop = 1.0 - after / before;
    outcome(
        bijective && shaped && drop >= 0.20 && trained.status == TrainStatus::Completed,
        format!(
            "bijective: {bijective}; 784×1 episodes: {shaped}; subset loss {before:.4} → {after:.4} ({:.1}% drop)",
            100.0 * drop
        ),
    )
}

fn main() {
    let mut results: Vec<(usize, &str, Outcome, f64)> = Vec::new();
    let mut record = |id: usize, name: &'static str, f: &mut dyn FnMut() -> Outcome| {
        let t = Instant::now();
        let o = f();
        let secs = t.elapsed().as_secs_f64();
        println!("{} {:>2} {:<28} [{secs:.0}s] {}", if o.pass { "PASS" } else { "FAIL" }, id, name, o.detail);
        results.push((id, name, o, secs));
    };

    record(1, "surrogate exactness", &mut surrogate_exactness);
    record(2, "gradient oracle", &mut gradient_oracle);
    record(3, "readout finite differences", &mut readout_finite_differences);
    record(4, "delay semantics", &mut delay_semantics);
    record(5, "memory bound", &mut memory_bound);

    let cfg = desk_config();
    let mut runs: Vec<DeskRun> = Vec::new();
    let mut checked = 0usize;
    let mut constraint_errors = Vec::new();
    record(6, "desk-scale training", &mut || {
        let mut accs = Vec::new();
        for &seed in &SEEDS {
            match desk_run(&cfg, desk_delays(seed), seed) {
                Ok(r) => {
                    accs.push(r.accuracy);
                    checked += r.batches_checked;
                    runs.push(r);
                }
                Err(e) => {
                    accs.push(0.0);
                    constraint_errors.push(format!("seed {seed}: {e}"));
                }
            }
        }
        let passing = accs.iter().filter(|&&a| a >= 0.90).count();
        let shown: Vec<String> = accs.iter().map(|a| format!("{a:.3}")).collect();
        outcome(passing >= 2, format!("seeds {SEEDS:?} accuracy {} on {FRESH_SAMPLES} fresh samples", shown.join(" / ")))
    });

    let best = runs.iter().max_by(|a, b| a.accuracy.total_cmp(&b.accuracy));
    let seed0 = SEEDS[0];

    record(7, "ablation", &mut || {
        let mut no_bf_cfg = cfg.clone();
        no_bf_cfg.loss.beta = 0.0;
        let (mut no_delays, mut no_bf) = (Vec::new(), Vec::new());
        for &seed in &SEEDS {
            let variants = [
                (&mut no_delays, desk_run(&cfg, DelaySchedule::uniform(HIDDEN, 0.0, 1.0).unwrap(), seed)),
                (&mut no_bf, desk_run(&no_bf_cfg, desk_delays(seed), seed)),
            ];
            for (accs, r) in variants {
                match r {
                    Ok(r) => {
                        accs.push(r.accuracy);
                        checked += r.batches_checked;
                    }
                    Err(e) => {
                        accs.push(f64::NAN);
                        constraint_errors.push(format!("seed {seed}: {e}"));
                    }
                }
            }
        }
        let show = |v: &[f64]| v.iter().map(|a| format!("{a:.3}")).collect::<Vec<_>>().join(" / ");
        outcome(
            no_delays.iter().chain(&no_bf).all(|&a| a <= CEILING),
            format!("seeds {SEEDS:?}: no delays {}, β=0 {} (ceiling {CEILING})", show(&no_delays), show(&no_bf)),
        )
    });

    record(8, "feed-forward time constant", &mut || {
        let mut accs = [0.0; 2];
        for (slot, tau) in accs.iter_mut().zip([2000.0, 20.0]) {
            let mut ff = cfg.clone();
            ff.recurrent = false;
            ff.init.tau_rec_ms = tau;
            ff.constraints.tau_rec_clamp = [tau, tau];
            match desk_run(&ff, desk_delays(seed0), seed0) {
                Ok(r) => *slot = r.accuracy,
                Err(e) => constraint_errors.push(e.to_string()),
            }
        }
        outcome(
            accs[0] >= 0.85 && accs[1] <= CEILING,
            format!("τ_R=2000 ms {:.3} (≥0.85), τ_R=20 ms {:.3} (≤{CEILING})", accs[0], accs[1]),
        )
    });

    record(9, "wait-time generalization", &mut || {
        let Some(run) = best else { return outcome(false, "no trained model") };
        let task = CueTaskConfig::simplified();
        let at_wait = |wait: f64, count: usize| {
            evaluate_with(&run.outcome.params, &run.delays, cfg.reset_mode, count, |j| {
                let s = derive_indexed(seed0, "acceptance/wait", j as u64);
                Ok(generate_wait_variant(&task, wait, s)?.into_episode())
            })
            .map(|r| r.accuracy)
            .unwrap_or(0.0)
        };
        let long = 5.0 * task.wait_range_ms[1];
        let acc_long = at_wait(long, FRESH_SAMPLES);
        let acc_30s = at_wait(30_000.0, 32);
        let loss_pp = 100.0 * (run.accuracy - acc_long);
        outcome(
            loss_pp <= 5.0 && acc_30s > 0.5,
            format!(
                "trained-range {:.3}, wait {long} ms {acc_long:.3} ({loss_pp:.1} pp lost), 30 s smoke {acc_30s:.3}",
                run.accuracy
            ),
        )
    });

    record(10, "cue-count baseline", &mut cue_baseline);
    record(11, "psMNIST properties", &mut psmnist);

    record(12, "determinism", &mut || {
        let Some(first) = runs.iter().find(|r| r.seed == seed0) else {
            return outcome(false, "no reference run");
        };
        match desk_run(&cfg, desk_delays(seed0), seed0) {
            Ok(again) => {
                let same = metrics_csv(&first.outcome) == metrics_csv(&again.outcome);
                outcome(same, format!("seed {seed0} metrics CSV bit-identical: {same}"))
            }
            Err(e) => outcome(false, e.to_string()),
        }
    });

    record(13, "constraint invariants", &mut || {
        outcome(
            constraint_errors.is_empty() && checked > 0,
            format!("{checked} batches checked in criteria 6-7, {} violations{}", constraint_errors.len(),
                constraint_errors.first().map(|e| format!(" ({e})")).unwrap_or_default()),
        )
    });

    let failed: Vec<usize> = results.iter().filter(|r| !r.2.pass).map(|r| r.0).collect();
    let total: f64 = results.iter().map(|r| r.3).sum();
    println!("{} of {} criteria passed in {total:.0}s", results.len() - failed.len(), results.len());
    if !failed.is_empty() {
        println!("failed: {failed:?}");
        if std::env::var("DELAYNET_ACCEPTANCE_STRICT").is_ok_and(|v| v == "1") {
            std::process::exit(1);
        }
    }
}
