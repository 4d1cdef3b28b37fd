pub mod analysis;
pub mod bptt;
pub mod checkpoint;
pub mod error;
pub mod experiment;
pub mod matrix;
pub mod network;
pub mod neuron;
pub mod seed;
pub mod spikes;
pub mod tasks;
pub mod topology;
pub mod training;

pub use error::{Error, Result};
pub use matrix::Matrix;
pub use spikes::{AnalogTrain, Input, SpikeTrain};
