//! PNG rendering of rasters and spectra.

use std::path::Path;

use anyhow::{Context, Result};
use delaynet::analysis::Spectrum;
use delaynet::SpikeTrain;
use image::{Rgb, RgbImage};

const BG: Rgb<u8> = Rgb([255, 255, 255]);
const INK: Rgb<u8> = Rgb([20, 20, 30]);
const ACCENT: Rgb<u8> = Rgb([200, 60, 40]);
const GRID: Rgb<u8> = Rgb([225, 225, 225]);

/// One pixel row per neuron (at least 2 px), time squeezed to at most `max_width` columns.
pub fn raster_png(spikes: &SpikeTrain, max_width: u32, path: &Path) -> Result<()> {
    let steps = spikes.steps().max(1) as u32;
    let width = steps.min(max_width).max(1);
    let row_h = (600 / spikes.channels().max(1) as u32).clamp(2, 8);
    let height = (spikes.channels() as u32 * row_h).max(1);
    let mut img = RgbImage::from_pixel(width, height, BG);
    for t in 0..spikes.steps() {
        let x = (t as u64 * width as u64 / steps as u64) as u32;
        for i in spikes.active(t) {
            for dy in 0..row_h.saturating_sub(1).max(1) {
                img.put_pixel(x, i as u32 * row_h + dy, INK);
            }
        }
    }
    img.save(path).with_context(|| format!("writing {}", path.display()))
}

fn line(img: &mut RgbImage, (x0, y0): (i64, i64), (x1, y1): (i64, i64), c: Rgb<u8>) {
    let (dx, dy) = ((x1 - x0).abs(), -(y1 - y0).abs());
    let (sx, sy) = (if x0 < x1 { 1 } else { -1 }, if y0 < y1 { 1 } else { -1 });
    let (mut x, mut y, mut err) = (x0, y0, dx + dy);
    loop {
        if x >= 0 && y >= 0 && (x as u32) < img.width() && (y as u32) < img.height() {
            img.put_pixel(x as u32, y as u32, c);
        }
        if x == x1 && y == y1 {
            break;
        }
        let e2 = 2 * err;
        if e2 >= dy {
            err += dy;
            x += sx;
        }
        if e2 <= dx {
            err += dx;
            y += sy;
        }
    }
}

/// Magnitude against frequency for `0 ≤ f ≤ max_hz`, with grid lines every 10 Hz.
pub fn spectrum_png(s: &Spectrum, max_hz: f64, path: &Path) -> Result<()> {
    let (w, h, pad) = (900u32, 400u32, 20i64);
    let mut img = RgbImage::from_pixel(w, h, BG);
    let pts: Vec<(f64, f64)> = s
        .frequencies_hz
        .iter()
        .zip(&s.magnitudes)
        .filter(|(&f, _)| (0.0..=max_hz).contains(&f))
        .map(|(&f, &m)| (f, m))
        .collect();
    let top = pts.iter().map(|p| p.1).fold(0.0, f64::max).max(1e-12);
    let fmax = pts.last().map_or(1.0, |p| p.0).max(1e-12);
    let sx = |f: f64| pad + ((f / fmax) * (w as i64 - 2 * pad) as f64) as i64;
    let sy = |m: f64| h as i64 - pad - ((m / top) * (h as i64 - 2 * pad) as f64) as i64;
    let mut g = 0.0;
    while g <= fmax {
        line(&mut img, (sx(g), pad), (sx(g), h as i64 - pad), GRID);
        g += 10.0;
    }
    line(&mut img, (pad, h as i64 - pad), (w as i64 - pad, h as i64 - pad), INK);
    for pair in pts.windows(2) {
        line(&mut img, (sx(pair[0].0), sy(pair[0].1)), (sx(pair[1].0), sy(pair[1].1)), ACCENT);
    }
    img.save(path).with_context(|| format!("writing {}", path.display()))
}
