//! Permuted sequential digits: each 28×28 image becomes a 784-step analog
//! sequence, with one pixel order shared by the whole run.

use std::fs;
use std::path::{Path, PathBuf};

use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::idx::{read_idx_images, read_idx_labels, IdxImages};
use crate::error::{Error, Result};
use crate::matrix::Matrix;
use crate::seed::rng;
use crate::spikes::{AnalogTrain, Input};
use crate::training::{Episode, TaskStream};

pub const TRAIN_IMAGES: &str = "train-images-idx3-ubyte";
pub const TRAIN_LABELS: &str = "train-labels-idx1-ubyte";
pub const TEST_IMAGES: &str = "t10k-images-idx3-ubyte";
pub const TEST_LABELS: &str = "t10k-labels-idx1-ubyte";

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PsMnistConfig {
    pub permutation_seed: u64,
    /// Use only the first `n` training images.
    pub max_train: Option<usize>,
    pub max_test: Option<usize>,
    /// Readout averages the last `readout_steps` steps of each sequence.
    pub readout_steps: usize,
    pub dt_ms: f64,
}

impl Default for PsMnistConfig {
    fn default() -> Self {
        Self { permutation_seed: 0, max_train: None, max_test: None, readout_steps: 28, dt_ms: 1.0 }
    }
}

#[derive(Clone, Debug)]
pub struct PsMnist {
    pub permutation: Vec<usize>,
    train: (IdxImages, Vec<u8>),
    test: (IdxImages, Vec<u8>),
    readout_steps: usize,
    dt_ms: f64,
}

/// Pixel order used for a given seed; a bijection on `0..n`.
pub fn pixel_permutation(n: usize, seed: u64) -> Vec<usize> {
    let mut p: Vec<usize> = (0..n).collect();
    p.shuffle(&mut rng(seed));
    p
}

/// Compares a file against `<file>.sha256` when that sidecar exists.
/// A mismatch is logged, not fatal. Returns `Some(matches)` when a sidecar was found.
pub fn check_sidecar(path: &Path) -> Result<Option<bool>> {
    let mut side = path.as_os_str().to_owned();
    side.push(".sha256");
    let side = PathBuf::from(side);
    let Ok(expected) = fs::read_to_string(&side) else {
        return Ok(None);
    };
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    let actual: String = Sha256::digest(&bytes).iter().map(|b| format!("{b:02x}")).collect();
    let expected = expected.split_whitespace().next().unwrap_or("").to_ascii_lowercase();
    let ok = expected == actual;
    if !ok {
        log::warn!("{}: checksum {actual} does not match {}", path.display(), side.display());
    }
    Ok(Some(ok))
}

fn load_pair(dir: &Path, images: &str, labels: &str, limit: Option<usize>) -> Result<(IdxImages, Vec<u8>)> {
    let (ip, lp) = (dir.join(images), dir.join(labels));
    check_sidecar(&ip)?;
    check_sidecar(&lp)?;
    let mut imgs = read_idx_images(&ip)?;
    let mut lbls = read_idx_labels(&lp)?;
    if imgs.len() != lbls.len() {
        return Err(Error::format(&lp, format!("{} labels for {} images", lbls.len(), imgs.len())));
    }
    if let Some(&bad) = lbls.iter().find(|&&l| l > 9) {
        return Err(Error::format(&lp, format!("label {bad} is not a digit")));
    }
    if let Some(n) = limit {
        let n = n.min(lbls.len());
        imgs.pixels.truncate(n * imgs.rows * imgs.cols);
        lbls.truncate(n);
    }
    Ok((imgs, lbls))
}

/// Reads the four IDX files from `dir`.
pub fn load_psmnist(dir: &Path, cfg: &PsMnistConfig) -> Result<PsMnist> {
    let train = load_pair(dir, TRAIN_IMAGES, TRAIN_LABELS, cfg.max_train)?;
    let test = load_pair(dir, TEST_IMAGES, TEST_LABELS, cfg.max_test)?;
    let size = train.0.rows * train.0.cols;
    if test.0.rows * test.0.cols != size {
        return Err(Error::format(dir.join(TEST_IMAGES), "image size differs from the training set"));
    }
    if cfg.readout_steps == 0 || cfg.readout_steps > size {
        return Err(Error::invalid(format!("readout_steps must be in 1..={size}")));
    }
    Ok(PsMnist {
        permutation: pixel_permutation(size, cfg.permutation_seed),
        train,
        test,
        readout_steps: cfg.readout_steps,
        dt_ms: cfg.dt_ms,
    })
}

impl PsMnist {
    pub fn sequence_len(&self) -> usize {
        self.permutation.len()
    }

    pub fn train_len(&self) -> usize {
        self.train.1.len()
    }

    pub fn test_len(&self) -> usize {
        self.test.1.len()
    }

    /// Pixels in presentation order, scaled to `[0, 1]`.
    pub fn sequence(&self, image: &[u8]) -> Vec<f64> {
        self.permutation.iter().map(|&p| f64::from(image[p]) / 255.0).collect()
    }

    fn episode(&self, set: &(IdxImages, Vec<u8>), index: usize) -> Result<Episode> {
        if set.1.is_empty() {
            return Err(Error::invalid("empty image set"));
        }
        let i = index % set.1.len();
        let seq = self.sequence(set.0.image(i));
        let steps = seq.len();
        Ok(Episode {
            input: Input::Analog(AnalogTrain { values: Matrix::from_vec(steps, 1, seq), dt_ms: self.dt_ms }),
            label: usize::from(set.1[i]),
            window: steps - self.readout_steps..steps,
        })
    }

    pub fn train_episode_at(&self, index: usize) -> Result<Episode> {
        self.episode(&self.train, index)
    }

    pub fn test_episode_at(&self, index: usize) -> Result<Episode> {
        self.episode(&self.test, index)
    }
}

impl TaskStream for PsMnist {
    fn n_in(&self) -> usize {
        1
    }

    fn n_out(&self) -> usize {
        10
    }

    fn train_episode(&self, index: usize, _seed: u64) -> Result<Episode> {
        self.train_episode_at(index)
    }

    fn test_episode(&self, index: usize, _seed: u64) -> Result<Episode> {
        self.test_episode_at(index)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn permutation_is_a_seeded_bijection() {
        let p = pixel_permutation(784, 7);
        let mut seen = vec![false; 784];
        for &i in &p {
            assert!(!seen[i]);
            seen[i] = true;
        }
        assert_eq!(p, pixel_permutation(784, 7));
        assert_ne!(p, pixel_permutation(784, 8));
    }

    #[test]
    fn sidecar_mismatch_is_reported() {
        let dir = tempfile::tempdir().unwrap();
        let f = dir.path().join("data");
        fs::write(&f, b"abc").unwrap();
        assert_eq!(check_sidecar(&f).unwrap(), None);
        let good = "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad";
        fs::write(dir.path().join("data.sha256"), format!("{good}  data\n")).unwrap();
        assert_eq!(check_sidecar(&f).unwrap(), Some(true));
        fs::write(dir.path().join("data.sha256"), "00").unwrap();
        assert_eq!(check_sidecar(&f).unwrap(), Some(false));
    }
}
