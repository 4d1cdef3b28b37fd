//! Task generators and dataset ingestion.

pub mod baseline;
pub mod cue;
pub mod idx;
pub mod io;
pub mod psmnist;

pub use baseline::{probabilistic_baseline_accuracy, BASELINE_MEMORY};
pub use cue::{
    generate_cue_sample, generate_ncue_variant, generate_wait_variant, majority, CueSample, CueStream,
    CueTaskConfig, Side,
};
pub use psmnist::{load_psmnist, pixel_permutation, PsMnist, PsMnistConfig};
