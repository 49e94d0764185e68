#![allow(dead_code)]

use std::path::{Path, PathBuf};

use flcc::config::ExperimentConfig;

pub fn repo_root() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../..")
}

pub fn mnist(name: &str) -> PathBuf {
    repo_root().join("data/mnist").join(name)
}

/// Points the dataset paths at the bundled MNIST files regardless of cwd.
pub fn with_bundled_data(mut cfg: ExperimentConfig) -> ExperimentConfig {
    cfg.data.train_images = mnist("train-images-idx3-ubyte.gz");
    cfg.data.train_labels = mnist("train-labels-idx1-ubyte.gz");
    cfg.data.test_images = mnist("t10k-images-idx3-ubyte.gz");
    cfg.data.test_labels = mnist("t10k-labels-idx1-ubyte.gz");
    cfg
}

pub fn parse(text: &str) -> ExperimentConfig {
    with_bundled_data(ExperimentConfig::parse_text(text).unwrap())
}

/// `configs/desk.conf` with absolute data paths.
pub fn desk_config() -> ExperimentConfig {
    with_bundled_data(ExperimentConfig::load(&repo_root().join("configs/desk.conf")).unwrap())
}
