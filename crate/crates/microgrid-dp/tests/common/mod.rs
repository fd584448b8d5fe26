#![allow(dead_code)]

use std::path::{Path, PathBuf};

use microgrid_dp::ModelConfig;

/// Four one-hour steps on a 6 x 4 x 4 grid.
pub fn small_config() -> ModelConfig {
    let mut cfg = ModelConfig::default();
    cfg.discretization.steps = 4;
    cfg.discretization.horizon = 4.0;
    cfg.discretization.z_intervals = 5;
    cfg.discretization.q_intervals = 3;
    cfg.discretization.g_intervals = 3;
    cfg
}

/// Eight steps on the reference z resolution with a coarse q/g grid.
pub fn medium_config() -> ModelConfig {
    let mut cfg = ModelConfig::default();
    cfg.discretization.steps = 8;
    cfg.discretization.horizon = 8.0;
    cfg.discretization.q_intervals = 5;
    cfg.discretization.g_intervals = 4;
    cfg
}

pub fn write_config(dir: &Path, cfg: &ModelConfig) -> PathBuf {
    let path = dir.join("config.toml");
    std::fs::write(&path, microgrid_dp::io::config_to_toml(cfg)).unwrap();
    path
}
