//! Losses, initialization, optimization and the epoch loop.

pub mod constraints;
pub mod init;
pub mod loss;
pub mod optim;
pub mod trainer;

pub use constraints::{apply_constraints, ConstraintConfig};
pub use init::{kaiming_uniform_recurrent_init, uniform_fan_in};
pub use loss::{
    branching_factor_grad, branching_factor_loss, cross_entropy, cross_entropy_grad, softmax, total_loss, BfMode,
    BfReduction,
    LossConfig,
};
pub use optim::{madgrad_step, OptimizerConfig, OptimizerKind, OptimizerState};
pub use trainer::{
    episode_gradient, evaluate, evaluate_stream, evaluate_with, init_params, train, train_from, write_metrics_csv, BatchInfo,
    ConstraintAsserter, EpochInfo, EpochMetrics, Episode, EvalReport, InitConfig, SampleGradient, NoopObserver, TaskStream, TrainConfig,
    TrainObserver, TrainOutcome, TrainStatus, METRICS_HEADER,
};
