use std::path::Path;

use delaynet::experiment::{ExperimentConfig, TaskKind};

fn shipped(name: &str) -> ExperimentConfig {
    let path = Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs").join(name);
    let cfg = ExperimentConfig::load(&path).unwrap_or_else(|e| panic!("{name}: {e}"));
    cfg.validate().unwrap();
    cfg
}

#[test]
fn desk_config_matches_library_defaults_for_training() {
    let cfg = shipped("desk_cue.toml");
    assert_eq!(cfg.task.kind, TaskKind::Cue);
    assert_eq!(cfg.task.cue.n_cues, 3);
    assert_eq!(cfg.task.cue.wait_range_ms, [200.0, 500.0]);
    assert_eq!(cfg.train.init, delaynet::training::TrainConfig::default().init);
    assert_eq!(cfg.build_delays(1.0).unwrap().len(), 125);
}

#[test]
fn psmnist_config_loads_fixture() {
    let mut cfg = shipped("psmnist.toml");
    assert_eq!(cfg.task.kind, TaskKind::Psmnist);
    assert_eq!(cfg.task.psmnist.config.max_train, Some(1000));
    assert_eq!(cfg.network.n_hidden, 216);
    cfg.task.psmnist.data_dir = Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/data/psmnist");
    let task = cfg.load_task().unwrap();
    assert_eq!(task.dt_ms(), 1.0);
}
