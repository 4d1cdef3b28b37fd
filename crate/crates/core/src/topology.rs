//! Neuron placement on a noisy cubic lattice and per-neuron transmission delays.

use std::io::Write;

use rand::seq::SliceRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::seed;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct NeuronPositions {
    pub coords: Vec<[f64; 3]>,
    pub lattice_side: usize,
}

impl NeuronPositions {
    pub fn len(&self) -> usize {
        self.coords.len()
    }

    pub fn is_empty(&self) -> bool {
        self.coords.is_empty()
    }

    pub fn centroid(&self) -> [f64; 3] {
        let n = self.coords.len() as f64;
        let mut c = [0.0; 3];
        for p in &self.coords {
            for k in 0..3 {
                c[k] += p[k];
            }
        }
        c.map(|v| v / n)
    }

    /// Euclidean distance of every neuron to the centroid.
    pub fn radii(&self) -> Vec<f64> {
        let c = self.centroid();
        self.coords
            .iter()
            .map(|p| ((p[0] - c[0]).powi(2) + (p[1] - c[1]).powi(2) + (p[2] - c[2]).powi(2)).sqrt())
            .collect()
    }
}

/// Per-neuron transmission delay.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DelaySchedule {
    pub dt_ms: f64,
    pub delays_ms: Vec<f64>,
    pub delay_steps: Vec<usize>,
}

impl DelaySchedule {
    pub fn from_ms(delays_ms: Vec<f64>, dt_ms: f64) -> Result<Self> {
        if !(dt_ms > 0.0 && dt_ms.is_finite()) {
            return Err(Error::invalid(format!("dt must be positive, got {dt_ms}")));
        }
        let delay_steps = delays_ms
            .iter()
            .map(|&d| delay_to_steps(d, dt_ms))
            .collect::<Result<Vec<_>>>()?;
        Ok(Self { dt_ms, delays_ms, delay_steps })
    }

    /// Every neuron transmits with the same delay.
    pub fn uniform(n: usize, delay_ms: f64, dt_ms: f64) -> Result<Self> {
        Self::from_ms(vec![delay_ms; n], dt_ms)
    }

    pub fn len(&self) -> usize {
        self.delay_steps.len()
    }

    pub fn is_empty(&self) -> bool {
        self.delay_steps.is_empty()
    }

    pub fn max_steps(&self) -> usize {
        self.delay_steps.iter().copied().max().unwrap_or(0)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("delay schedule serializes")
    }

    pub fn from_json(s: &str) -> Result<Self> {
        let raw: Self = serde_json::from_str(s).map_err(|e| Error::invalid(format!("delay schedule: {e}")))?;
        let check = Self::from_ms(raw.delays_ms.clone(), raw.dt_ms)?;
        if check.delay_steps != raw.delay_steps {
            return Err(Error::invalid("delay_steps inconsistent with delays_ms / dt_ms"));
        }
        Ok(raw)
    }
}

/// Round-to-nearest (ties away from zero) conversion of a delay to whole steps.
pub fn delay_to_steps(delay_ms: f64, dt_ms: f64) -> Result<usize> {
    if !(delay_ms >= 0.0 && delay_ms.is_finite()) {
        return Err(Error::invalid(format!("delay must be non-negative, got {delay_ms}")));
    }
    Ok((delay_ms / dt_ms).round() as usize)
}

/// Places `n` neurons on the smallest cubic lattice that holds them, filled in
/// row-major order, each site jittered by uniform noise in `[0, 0.5)` per axis.
pub fn place_neurons(n: usize, seed: u64) -> Result<NeuronPositions> {
    if n == 0 {
        return Err(Error::invalid("cannot place zero neurons"));
    }
    let side = lattice_side(n);
    let mut rng = seed::rng(seed);
    let coords = (0..n)
        .map(|i| {
            let site = [i / (side * side), (i / side) % side, i % side];
            site.map(|s| s as f64 + rng.gen_range(0.0..0.5))
        })
        .collect();
    Ok(NeuronPositions { coords, lattice_side: side })
}

/// `⌈n^(1/3)⌉`, computed in integers.
pub fn lattice_side(n: usize) -> usize {
    let mut s = (n as f64).cbrt().round() as usize;
    while s * s * s < n {
        s += 1;
    }
    while s > 1 && (s - 1).pow(3) >= n {
        s -= 1;
    }
    s.max(1)
}

/// Assigns delays by distance from the centroid. Neuron `i` falls in the first
/// band `k` with `r_i ≤ radius_fracs[k] · r_max`, otherwise in the last band.
pub fn assign_delays_by_radius(
    pos: &NeuronPositions,
    radius_fracs: &[f64],
    delays_ms: &[f64],
    dt_ms: f64,
) -> Result<DelaySchedule> {
    if pos.is_empty() {
        return Err(Error::invalid("no neuron positions"));
    }
    if radius_fracs.len() + 1 != delays_ms.len() {
        return Err(Error::invalid(format!(
            "{} radius fractions need {} delays, got {}",
            radius_fracs.len(),
            radius_fracs.len() + 1,
            delays_ms.len()
        )));
    }
    if radius_fracs.windows(2).any(|w| w[0] >= w[1]) {
        return Err(Error::invalid("radius fractions must be strictly increasing"));
    }
    let radii = pos.radii();
    let r_max = radii.iter().copied().fold(0.0, f64::max);
    let per_neuron = radii
        .iter()
        .map(|&r| {
            let band = radius_fracs
                .iter()
                .position(|&f| r <= f * r_max)
                .unwrap_or(radius_fracs.len());
            delays_ms[band]
        })
        .collect();
    DelaySchedule::from_ms(per_neuron, dt_ms)
}

/// Assigns `⌊f_k·n⌋` neurons to band `k` (remainder to the last band), then
/// shuffles which neuron gets which band.
pub fn assign_delays_by_fraction(
    n: usize,
    fracs: &[f64],
    delays_ms: &[f64],
    dt_ms: f64,
    seed: u64,
) -> Result<DelaySchedule> {
    if fracs.len() != delays_ms.len() || fracs.is_empty() {
        return Err(Error::invalid("need one fraction per delay"));
    }
    if fracs.iter().any(|&f| !(0.0..=1.0).contains(&f)) {
        return Err(Error::invalid("fractions must lie in [0, 1]"));
    }
    let total: f64 = fracs.iter().sum();
    if (total - 1.0).abs() > 1e-9 {
        return Err(Error::invalid(format!("fractions sum to {total}, expected 1")));
    }
    let mut per_neuron = Vec::with_capacity(n);
    for (&f, &d) in fracs.iter().zip(delays_ms).take(fracs.len() - 1) {
        let count = (f * n as f64).floor() as usize;
        per_neuron.extend(std::iter::repeat(d).take(count));
    }
    let last = delays_ms[delays_ms.len() - 1];
    per_neuron.resize(n, last);
    per_neuron.shuffle(&mut seed::rng(seed));
    DelaySchedule::from_ms(per_neuron, dt_ms)
}

/// Population of each distinct delay, in the order given.
pub fn band_counts(schedule: &DelaySchedule, delays_ms: &[f64]) -> Vec<usize> {
    delays_ms
        .iter()
        .map(|&d| schedule.delays_ms.iter().filter(|&&x| x == d).count())
        .collect()
}

/// `x,y,z,delay_ms` rows.
pub fn write_positions_csv<W: Write>(mut w: W, pos: &NeuronPositions, delays: &DelaySchedule) -> std::io::Result<()> {
    writeln!(w, "x,y,z,delay_ms")?;
    for (p, d) in pos.coords.iter().zip(&delays.delays_ms) {
        writeln!(w, "{},{},{},{}", p[0], p[1], p[2], d)?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use proptest::prelude::*;

    use super::*;

    #[test]
    fn lattice_sizes() {
        assert_eq!(lattice_side(1), 1);
        assert_eq!(lattice_side(8), 2);
        assert_eq!(lattice_side(9), 3);
        assert_eq!(lattice_side(100), 5);
        assert_eq!(lattice_side(125), 5);
        assert_eq!(lattice_side(1000), 10);
    }

    #[test]
    fn single_neuron_in_unit_noise_cell() {
        let p = place_neurons(1, 3).unwrap();
        assert_eq!(p.lattice_side, 1);
        assert!(p.coords[0].iter().all(|&c| (0.0..0.5).contains(&c)));
        assert!(place_neurons(0, 3).is_err());
    }

    #[test]
    fn perfect_cube_fills_every_site() {
        let p = place_neurons(8, 11).unwrap();
        let mut sites: Vec<[i64; 3]> = p.coords.iter().map(|c| c.map(|v| v.floor() as i64)).collect();
        sites.sort();
        sites.dedup();
        assert_eq!(sites.len(), 8);
    }

    #[test]
    fn hundred_neurons_leave_sites_empty() {
        let p = place_neurons(100, 1).unwrap();
        assert_eq!(p.lattice_side, 5);
        assert_eq!(p.len(), 100);
        // row-major: the last neuron sits at site (3, 4, 4)
        assert_eq!(p.coords[99].map(|v| v.floor() as i64), [3, 4, 4]);
    }

    #[test]
    fn centroid_and_outermost_neurons() {
        let pos = NeuronPositions {
            coords: vec![[0.0, 0.0, 0.0], [1.0, 0.0, 0.0], [-1.0, 0.0, 0.0], [0.0, 3.0, 0.0], [0.0, -3.0, 0.0]],
            lattice_side: 2,
        };
        let s = assign_delays_by_radius(&pos, &[0.2, 0.3], &[0.0, 80.0, 100.0], 1.0).unwrap();
        assert_eq!(s.delays_ms, vec![0.0, 100.0, 100.0, 100.0, 100.0]);
        // band boundary is inclusive: r = 0.3 · 10 lands in the middle band
        let pos = NeuronPositions { coords: vec![[0.0; 3], [3.0, 0.0, 0.0], [-3.0, 0.0, 0.0], [0.0, 10.0, 0.0], [0.0, -10.0, 0.0]], lattice_side: 2 };
        let s = assign_delays_by_radius(&pos, &[0.2, 0.3], &[0.0, 80.0, 100.0], 1.0).unwrap();
        assert_eq!(s.delays_ms[1], 80.0);
        assert_eq!(s.delay_steps, vec![0, 80, 80, 100, 100]);
    }

    #[test]
    fn radius_assignment_errors() {
        let empty = NeuronPositions { coords: vec![], lattice_side: 0 };
        assert!(assign_delays_by_radius(&empty, &[0.2, 0.3], &[0.0, 80.0, 100.0], 1.0).is_err());
        let p = place_neurons(8, 0).unwrap();
        assert!(assign_delays_by_radius(&p, &[0.3, 0.2], &[0.0, 80.0, 100.0], 1.0).is_err());
        assert!(assign_delays_by_radius(&p, &[0.2], &[0.0, 80.0, 100.0], 1.0).is_err());
    }

    #[test]
    fn fraction_assignment_counts() {
        let s = assign_delays_by_fraction(125, &[0.176, 0.424, 0.4], &[0.0, 80.0, 100.0], 1.0, 5).unwrap();
        assert_eq!(band_counts(&s, &[0.0, 80.0, 100.0]), vec![22, 53, 50]);
        let s = assign_delays_by_fraction(10, &[1.0, 0.0, 0.0], &[7.0, 80.0, 100.0], 1.0, 5).unwrap();
        assert!(s.delays_ms.iter().all(|&d| d == 7.0));
        let s = assign_delays_by_fraction(216, &[0.176, 0.424, 0.4], &[0.0, 25.0, 86.0], 1.0, 9).unwrap();
        assert_eq!(band_counts(&s, &[0.0, 25.0, 86.0]), vec![38, 91, 87]);
        assert!(assign_delays_by_fraction(10, &[0.5, 0.6], &[0.0, 1.0], 1.0, 0).is_err());
    }

    #[test]
    fn delay_schedule_json_roundtrip() {
        let s = DelaySchedule::from_ms(vec![0.0, 80.0, 100.0], 1.0).unwrap();
        let json = s.to_json();
        assert!(json.contains("\"dt_ms\""));
        assert!(json.contains("\"delay_steps\""));
        assert_eq!(DelaySchedule::from_json(&json).unwrap(), s);
        let bad = json.replace("100\n", "99\n");
        assert!(DelaySchedule::from_json(&bad).is_err());
    }

    #[test]
    fn ms_to_steps_rounding() {
        assert_eq!(delay_to_steps(2.5, 1.0).unwrap(), 3);
        assert_eq!(delay_to_steps(2.49, 1.0).unwrap(), 2);
        assert_eq!(delay_to_steps(80.0, 0.5).unwrap(), 160);
        assert!(delay_to_steps(-1.0, 1.0).is_err());
    }

    #[test]
    fn positions_csv_has_header() {
        let p = place_neurons(2, 0).unwrap();
        let d = DelaySchedule::uniform(2, 80.0, 1.0).unwrap();
        let mut buf = Vec::new();
        write_positions_csv(&mut buf, &p, &d).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert_eq!(text.lines().count(), 3);
        assert!(text.starts_with("x,y,z,delay_ms\n"));
    }

    proptest! {
        #[test]
        fn assignments_are_deterministic_and_total(n in 1usize..300, seed in any::<u64>()) {
            let delays = [0.0, 80.0, 100.0];
            let a = assign_delays_by_fraction(n, &[0.176, 0.424, 0.4], &delays, 1.0, seed).unwrap();
            let b = assign_delays_by_fraction(n, &[0.176, 0.424, 0.4], &delays, 1.0, seed).unwrap();
            prop_assert_eq!(&a, &b);
            prop_assert_eq!(a.len(), n);
            prop_assert!(a.delays_ms.iter().all(|d| delays.contains(d)));

            let pos = place_neurons(n, seed).unwrap();
            prop_assert_eq!(&pos, &place_neurons(n, seed).unwrap());
            let r = assign_delays_by_radius(&pos, &[0.2, 0.3], &delays, 1.0).unwrap();
            prop_assert_eq!(r.len(), n);
            prop_assert!(r.delays_ms.iter().all(|d| delays.contains(d)));
        }

        #[test]
        fn integer_multiples_roundtrip(k in 0usize..10_000, dt in prop::sample::select(vec![0.25, 0.5, 1.0, 2.0])) {
            let d = k as f64 * dt;
            let s = DelaySchedule::from_ms(vec![d], dt).unwrap();
            prop_assert_eq!(s.delay_steps[0] as f64 * dt, d);
        }
    }
}
