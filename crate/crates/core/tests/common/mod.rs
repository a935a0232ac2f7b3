#![allow(dead_code)]

use contraplan::bench::RunConfig;
use contraplan::executor::{ExecutorConfig, Method};

/// Shelf preset shrunk so a full run takes well under a second.
pub fn tiny_executor() -> ExecutorConfig {
    let mut cfg = ExecutorConfig::shelf_benchmark();
    cfg.planner.params.samples = 2;
    cfg.planner.params.max_iterations = 2;
    cfg.planner.metrics.n_samples = 2;
    cfg.planner.metrics.n_worlds = 1;
    cfg.cc_max_steps = 3;
    cfg
}

pub fn tiny_run_config() -> RunConfig {
    RunConfig {
        generated_scenes: 2,
        scene_seed: 11,
        methods: vec![Method::Ol, Method::Ocl],
        seeds: vec![0, 1],
        executor: tiny_executor(),
        ..Default::default()
    }
}
