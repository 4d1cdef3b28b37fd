//! Accuracy of an observer that remembers only the last few cues.

/// Cue memory of the reference observer.
pub const BASELINE_MEMORY: usize = 7;

fn binomial_row(n: usize) -> Vec<u128> {
    let mut row = vec![1u128; n + 1];
    for k in 1..n {
        row[k] = row[k - 1] * (n - k + 1) as u128 / k as u128;
    }
    row
}

fn ln_binomial_row(n: usize) -> Vec<f64> {
    let mut ln_fact = vec![0.0; n + 1];
    for i in 1..=n {
        ln_fact[i] = ln_fact[i - 1] + (i as f64).ln();
    }
    (0..=n).map(|k| ln_fact[n] - ln_fact[k] - ln_fact[n - k]).collect()
}

/// Probability that the majority of the last `min(memory, n_cues)` cues names the
/// true majority side, over equiprobable tie-free sequences. A tie inside the
/// window counts as a coin flip.
///
/// Sequences are grouped by how many left cues fall inside and outside the
/// window, so the cost is quadratic in `n_cues` instead of exponential.
pub fn probabilistic_baseline_accuracy(n_cues: usize, memory: usize) -> f64 {
    if n_cues == 0 {
        return 0.5;
    }
    let w = memory.min(n_cues).max(1);
    let m = n_cues - w;
    // credit in half-units: 2 for a hit, 1 for a coin flip
    let credit = |kw: usize, kp: usize| -> Option<u8> {
        let left = kw + kp;
        if 2 * left == n_cues {
            return None;
        }
        let truth_left = 2 * left > n_cues;
        Some(match (2 * kw).cmp(&w) {
            std::cmp::Ordering::Equal => 1,
            std::cmp::Ordering::Greater => 2 * u8::from(truth_left),
            std::cmp::Ordering::Less => 2 * u8::from(!truth_left),
        })
    };

    if n_cues <= 120 {
        let (bw, bp) = (binomial_row(w), binomial_row(m));
        let (mut num, mut den) = (0u128, 0u128);
        for kw in 0..=w {
            for kp in 0..=m {
                if let Some(c) = credit(kw, kp) {
                    let count = bw[kw] * bp[kp];
                    num += count * u128::from(c);
                    den += 2 * count;
                }
            }
        }
        return num as f64 / den as f64;
    }

    let (lw, lp) = (ln_binomial_row(w), ln_binomial_row(m));
    let shift = lw.iter().copied().fold(f64::MIN, f64::max) + lp.iter().copied().fold(f64::MIN, f64::max);
    let (mut num, mut den) = (0.0, 0.0);
    for kw in 0..=w {
        for kp in 0..=m {
            if let Some(c) = credit(kw, kp) {
                let weight = (lw[kw] + lp[kp] - shift).exp();
                num += weight * f64::from(c);
                den += 2.0 * weight;
            }
        }
    }
    num / den
}
