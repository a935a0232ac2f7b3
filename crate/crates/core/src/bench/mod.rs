//! Scene generation, the scenes × methods × seeds benchmark, reports and
//! SVG rendering of execution logs.

mod config;
mod generate;
mod render;
mod report;

use std::path::Path;

use rayon::prelude::*;

pub use config::{load_named, NamedScene, RunConfig};
pub use generate::{generate_random_scene, ray_blockers, GeneratorParams};
pub use render::{render_trace, SvgTransform};
pub use report::{
    emit_report, report_to_string, rows_from_csv, rows_to_csv, BenchReport, BenchRow, CellError,
    MethodAggregate, ReportFormat, Stat, CSV_COLUMNS,
};

use crate::error::Result;
use crate::executor::{run_baseline, AuditCounts, ExecutionLog, ExecutorConfig, Method};
use crate::parallel::with_jobs;

/// Outcome of one benchmark cell.
pub struct CellRun {
    pub row: BenchRow,
    pub log: std::result::Result<ExecutionLog, String>,
}

/// Runs every (scene, method, seed) cell, in parallel on up to `jobs`
/// threads. Results come back in scene, method, seed order regardless of
/// scheduling.
pub fn run_cells(
    scenes: &[NamedScene],
    methods: &[Method],
    seeds: &[u64],
    cfg: &ExecutorConfig,
    jobs: Option<usize>,
) -> Result<Vec<CellRun>> {
    cfg.validate()?;
    let cells: Vec<(&NamedScene, Method, u64)> = scenes
        .iter()
        .flat_map(|s| {
            methods
                .iter()
                .flat_map(move |&m| seeds.iter().map(move |&seed| (s, m, seed)))
        })
        .collect();
    with_jobs(jobs, || {
        cells
            .into_par_iter()
            .map(|(s, method, seed)| match run_baseline(method, &s.scene, &s.id, cfg, seed) {
                Ok(log) => CellRun {
                    row: BenchRow::from_log(&log),
                    log: Ok(log),
                },
                Err(e) => CellRun {
                    row: BenchRow::failed(&s.id, method, seed),
                    log: Err(e.to_string()),
                },
            })
            .collect()
    })
}

/// Full benchmark of `cfg`. Logs are written to `log_dir` when given.
pub fn run_benchmark(cfg: &RunConfig, log_dir: Option<&Path>) -> Result<BenchReport> {
    cfg.validate()?;
    let scenes = cfg.bench_scenes()?;
    let runs = run_cells(&scenes, &cfg.methods, &cfg.seeds, &cfg.executor, cfg.jobs)?;
    if let Some(dir) = log_dir {
        std::fs::create_dir_all(dir).map_err(|e| crate::Error::io(dir, e))?;
        for run in &runs {
            if let Ok(log) = &run.log {
                log.save(dir.join(log_file_name(log)))?;
            }
        }
    }
    Ok(assemble_report(cfg, runs))
}

pub fn log_file_name(log: &ExecutionLog) -> String {
    format!("{}_{}_{}.jsonl", log.scene_id, log.method, log.seed)
}

pub fn assemble_report(cfg: &RunConfig, runs: Vec<CellRun>) -> BenchReport {
    let mut audit = AuditCounts::default();
    let mut errors = Vec::new();
    let mut rows = Vec::with_capacity(runs.len());
    for run in runs {
        match &run.log {
            Ok(log) => {
                audit.planner_reads += log.summary.audit.planner_reads;
                audit.harness_reads += log.summary.audit.harness_reads;
            }
            Err(message) => errors.push(CellError {
                scene_id: run.row.scene_id.clone(),
                method: run.row.method,
                seed: run.row.seed,
                message: message.clone(),
            }),
        }
        rows.push(run.row);
    }
    BenchReport {
        seeds: cfg.seeds.clone(),
        scene_seed: cfg.scene_seed,
        aggregates: BenchReport::aggregate(&rows),
        rows,
        audit,
        errors,
    }
}
