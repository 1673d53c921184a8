#![allow(dead_code)]

use mfl_chaos::harness::ExperimentConfig;

pub const POC_CONFIG: &str = include_str!("../../examples/configs/poc_sweep.json");

pub fn poc_config() -> ExperimentConfig {
    ExperimentConfig::from_json(POC_CONFIG).unwrap()
}

/// The sweep configuration shrunk to a few seconds of work.
pub fn small_config(n_list: &[usize], replicas: usize, t_end: f64) -> ExperimentConfig {
    let mut cfg = poc_config();
    cfg.n_list = n_list.to_vec();
    cfg.replicas = replicas;
    cfg.grid.cells = 512;
    cfg.integrator.dt = 0.01;
    cfg.integrator.dt_max = 0.01;
    cfg.integrator.t_end = t_end;
    cfg.integrator.halving_check = false;
    cfg.analysis.sup_window = [0.2 * t_end, t_end];
    cfg.analysis.plateau_window = [0.5 * t_end, t_end];
    cfg.analysis.early_window = [0.0, 0.5 * t_end];
    cfg.analysis.slope_times = vec![t_end];
    cfg.chain.joints = 50;
    cfg.validate().unwrap();
    cfg
}
