//! Spike-rate spectra and the spectral radius of the recurrent weights.

use std::io::Write;
use std::ops::Range;

use rustfft::num_complex::Complex;
use rustfft::FftPlanner;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::matrix::Matrix;
use crate::spikes::SpikeTrain;

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum WindowFn {
    #[default]
    Rectangular,
    Hann,
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct SpectrumOptions {
    pub window: WindowFn,
    /// Restrict to these timesteps; the whole train when `None`.
    pub range: Option<Range<usize>>,
}

/// DFT magnitudes on a frequency axis centered at 0 Hz (negative frequencies first).
#[derive(Clone, Debug, PartialEq)]
pub struct Spectrum {
    pub frequencies_hz: Vec<f64>,
    pub magnitudes: Vec<f64>,
}

impl Spectrum {
    /// Frequency of the largest magnitude at `f > 0`.
    pub fn peak_hz(&self) -> Option<f64> {
        self.frequencies_hz
            .iter()
            .zip(&self.magnitudes)
            .filter(|(&f, _)| f > 0.0)
            .fold(None, |best: Option<(f64, f64)>, (&f, &m)| match best {
                Some((_, bm)) if bm >= m => best,
                _ => Some((f, m)),
            })
            .map(|(f, _)| f)
    }

    pub fn magnitude_at(&self, hz: f64) -> Option<f64> {
        self.frequencies_hz.iter().position(|&f| (f - hz).abs() < 1e-9).map(|i| self.magnitudes[i])
    }
}

/// Spectrum of the mean-subtracted population count `N[t] = Σ_i n_i[t]`.
pub fn spike_rate_spectrum(spikes: &SpikeTrain, opts: &SpectrumOptions) -> Result<Spectrum> {
    let counts = spikes.population_counts();
    let range = opts.range.clone().unwrap_or(0..counts.len());
    if range.end > counts.len() || range.start > range.end {
        return Err(Error::invalid(format!("range {range:?} outside 0..{}", counts.len())));
    }
    let signal: Vec<f64> = counts[range].iter().map(|&c| f64::from(c)).collect();
    signal_spectrum(&signal, spikes.dt_ms(), opts.window)
}

/// Spectrum of an arbitrary real signal sampled every `dt_ms`.
pub fn signal_spectrum(signal: &[f64], dt_ms: f64, window: WindowFn) -> Result<Spectrum> {
    let n = signal.len();
    if n < 2 {
        return Err(Error::invalid(format!("need at least 2 samples, got {n}")));
    }
    if !(dt_ms > 0.0) {
        return Err(Error::invalid("dt must be positive"));
    }
    let mean = signal.iter().sum::<f64>() / n as f64;
    let mut buf: Vec<Complex<f64>> = signal
        .iter()
        .enumerate()
        .map(|(t, &x)| {
            let w = match window {
                WindowFn::Rectangular => 1.0,
                WindowFn::Hann => 0.5 - 0.5 * (2.0 * std::f64::consts::PI * t as f64 / (n - 1) as f64).cos(),
            };
            Complex::new((x - mean) * w, 0.0)
        })
        .collect();
    FftPlanner::new().plan_fft_forward(n).process(&mut buf);

    let fs = 1000.0 / dt_ms;
    let half = n / 2;
    let mut frequencies_hz = Vec::with_capacity(n);
    let mut magnitudes = Vec::with_capacity(n);
    // bins ⌈n/2⌉..n are the negative frequencies
    for k in (half + n % 2..n).chain(0..half + n % 2) {
        let signed = if k >= half + n % 2 { k as f64 - n as f64 } else { k as f64 };
        frequencies_hz.push(signed * fs / n as f64);
        magnitudes.push(buf[k].norm());
    }
    Ok(Spectrum { frequencies_hz, magnitudes })
}

pub fn write_spectrum_csv<W: Write>(mut w: W, s: &Spectrum) -> std::io::Result<()> {
    writeln!(w, "frequency_hz,magnitude")?;
    for (f, m) in s.frequencies_hz.iter().zip(&s.magnitudes) {
        writeln!(w, "{f},{m}")?;
    }
    Ok(())
}

pub const SPECTRAL_TOL: f64 = 1e-8;
pub const SPECTRAL_MAX_ITER: usize = 100_000;
/// Relative eigen-fit residual required before the estimate is accepted.
pub const SPECTRAL_FIT_TOL: f64 = 1e-10;

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn norm(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

/// Longest recurrence fitted to the Krylov iterates; covers up to four dominant
/// eigenvalues of (nearly) equal modulus.
const SPECTRAL_MAX_TERMS: usize = 4;

/// Least-squares fit `ys[m] ≈ Σ_{i<m} c_i·ys[i]` by modified Gram-Schmidt.
/// Returns the coefficients and relative residual, or `None` when the first
/// `m` iterates are numerically dependent (a shorter recurrence already fits).
fn fit_recurrence(ys: &[Vec<f64>], m: usize) -> Option<(Vec<f64>, f64)> {
    let mut q: Vec<Vec<f64>> = Vec::with_capacity(m);
    let mut r = vec![vec![0.0; m]; m];
    for j in 0..m {
        let mut v = ys[j].clone();
        for (i, qi) in q.iter().enumerate() {
            r[i][j] = dot(qi, &v);
            v.iter_mut().zip(qi).for_each(|(x, y)| *x -= r[i][j] * y);
        }
        let nv = norm(&v);
        if nv <= 1e-9 * norm(&ys[j]) {
            return None;
        }
        r[j][j] = nv;
        q.push(v.into_iter().map(|x| x / nv).collect());
    }
    let mut rhs = ys[m].clone();
    let mut b = vec![0.0; m];
    for (i, qi) in q.iter().enumerate() {
        b[i] = dot(qi, &rhs);
        rhs.iter_mut().zip(qi).for_each(|(x, y)| *x -= b[i] * y);
    }
    let resid = norm(&rhs) / norm(&ys[m]);
    let mut c = vec![0.0; m];
    for i in (0..m).rev() {
        let tail: f64 = (i + 1..m).map(|k| r[i][k] * c[k]).sum();
        c[i] = (b[i] - tail) / r[i][i];
    }
    Some((c, resid))
}

/// Largest root modulus of `z^m - Σ c_i z^i` (Durand-Kerner).
fn max_root_modulus(c: &[f64]) -> f64 {
    let m = c.len();
    if m == 1 {
        return c[0].abs();
    }
    let eval = |z: Complex<f64>| {
        let mut acc = Complex::new(1.0, 0.0);
        for i in (0..m).rev() {
            acc = acc * z - c[i];
        }
        acc
    };
    let bound = 1.0 + c.iter().fold(0.0f64, |a, &x| a.max(x.abs()));
    let seed = Complex::new(0.4, 0.9);
    let mut roots: Vec<Complex<f64>> = (0..m).map(|k| seed.powu(k as u32) * bound).collect();
    for _ in 0..500 {
        let mut moved = 0.0f64;
        for k in 0..m {
            let mut den = Complex::new(1.0, 0.0);
            for j in 0..m {
                if j != k {
                    den *= roots[k] - roots[j];
                }
            }
            let step = eval(roots[k]) / den;
            roots[k] -= step;
            moved = moved.max(step.norm());
        }
        if moved <= 1e-15 * bound {
            break;
        }
    }
    roots.iter().map(|z| z.norm()).fold(0.0, f64::max)
}

/// Dominant-eigenvalue modulus from the iterates `y_0 … y_M` of one power step.
///
/// A single dominant real eigenvalue gives `y_1 ≈ λ·y_0`; a complex pair, a `±λ`
/// pair or several eigenvalues of nearly equal modulus give a longer linear
/// recurrence whose characteristic roots carry the moduli. The shortest
/// recurrence meeting [`SPECTRAL_FIT_TOL`] is used.
fn fit_modulus(ys: &[Vec<f64>]) -> Option<f64> {
    (1..=SPECTRAL_MAX_TERMS).find_map(|m| match fit_recurrence(ys, m) {
        Some((c, resid)) if resid < SPECTRAL_FIT_TOL => Some(max_root_modulus(&c)),
        _ => None,
    })
}

/// Largest eigenvalue modulus of a square matrix by power iteration, without
/// complex matrix arithmetic. Converges when consecutive estimates agree to
/// [`SPECTRAL_TOL`] (relative) and a short recurrence fits the iterates to
/// [`SPECTRAL_FIT_TOL`]. The fit error shrinks like `(|λ_next|/|λ_dominant|)^k`,
/// so close subdominant moduli cost iterations, not accuracy.
pub fn spectral_radius(w: &Matrix) -> Result<f64> {
    if !w.is_square() {
        return Err(Error::invalid(format!("spectral radius needs a square matrix, got {}×{}", w.rows(), w.cols())));
    }
    if !w.all_finite() {
        return Err(Error::invalid("matrix has non-finite entries"));
    }
    let n = w.rows();
    if n == 0 {
        return Ok(0.0);
    }
    // deterministic start with no special alignment to coordinate axes
    let mut v: Vec<f64> = (0..n).map(|i| 1.0 + ((i as f64 + 1.0) * 0.618_033_988_749_895).fract()).collect();
    let nv = norm(&v);
    v.iter_mut().for_each(|x| *x /= nv);

    let mut prev = f64::NAN;
    for _ in 0..SPECTRAL_MAX_ITER {
        let mut ys = vec![v];
        for _ in 0..SPECTRAL_MAX_TERMS {
            let next = w.matvec(ys.last().unwrap());
            if norm(&next) == 0.0 {
                // nilpotent on the Krylov space of the start vector
                return Ok(0.0);
            }
            ys.push(next);
        }
        if let Some(rho) = fit_modulus(&ys) {
            if (rho - prev).abs() <= SPECTRAL_TOL * rho.max(f64::MIN_POSITIVE) {
                return Ok(rho);
            }
            prev = rho;
        }
        let y1 = ys.swap_remove(1);
        let n1 = norm(&y1);
        v = y1.into_iter().map(|x| x / n1).collect();
        if v.iter().any(|x| !x.is_finite()) {
            break;
        }
    }
    Err(Error::NonConvergence { iterations: SPECTRAL_MAX_ITER, estimate: prev })
}
