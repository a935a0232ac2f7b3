use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use contraplan::bench::{
    emit_report, generate_random_scene, load_named, render_trace, run_benchmark, ReportFormat,
    RunConfig,
};
use contraplan::executor::{run_baseline, ExecutionLog, Method};
use contraplan::graph::{get_segments, SegmentPlan};
use contraplan::metrics::DivergenceProfile;
use contraplan::optimizer::robust_sto;
use contraplan::parallel::{jobs_from_env, with_jobs};
use contraplan::world::{Control, SceneDescription, SystemState};
use contraplan::{Error, Result};

#[derive(Parser)]
#[command(name = "contraplan", version, about = "Robust open/closed-loop pushing planner")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Common {
    /// JSON run configuration; missing fields take their defaults.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    /// Worker threads. CONTRAPLAN_JOBS takes precedence.
    #[arg(long)]
    jobs: Option<usize>,
}

#[derive(Subcommand)]
enum Command {
    /// Plan once on a scene and print controls, segments and metrics.
    Plan {
        #[arg(long)]
        scene: Option<PathBuf>,
        #[arg(long)]
        out: Option<PathBuf>,
        #[command(flatten)]
        common: Common,
    },
    /// Run one method against a simulated hidden world and write its log.
    Execute {
        #[arg(long)]
        scene: Option<PathBuf>,
        #[arg(long)]
        method: Option<Method>,
        #[arg(long)]
        out: Option<PathBuf>,
        #[command(flatten)]
        common: Common,
    },
    /// Run the scenes x methods x seeds matrix and write a report.
    Bench {
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long, default_value = "csv")]
        format: ReportFormat,
        /// Write no per-run logs.
        #[arg(long)]
        no_logs: bool,
        #[command(flatten)]
        common: Common,
    },
    /// Render an execution log to SVG frames and a summary.
    Render {
        log: PathBuf,
        /// Scene to draw instead of the one stored in the log.
        #[arg(long)]
        scene: Option<PathBuf>,
        #[arg(long, default_value = "render")]
        out: PathBuf,
    },
    /// Scene utilities.
    Scene {
        #[command(subcommand)]
        command: SceneCommand,
    },
}

#[derive(Subcommand)]
enum SceneCommand {
    /// Generate a random cluttered shelf scene.
    Gen {
        #[arg(long)]
        out: Option<PathBuf>,
        #[command(flatten)]
        common: Common,
    },
}

impl Common {
    fn load(&self) -> Result<RunConfig> {
        let mut cfg = match &self.config {
            Some(p) => RunConfig::load(p)?,
            None => RunConfig::default(),
        };
        if let Some(seed) = self.seed {
            cfg.seed = seed;
            cfg.seeds = vec![seed];
        }
        cfg.jobs = jobs_from_env(self.jobs.or(cfg.jobs))?;
        cfg.validate()?;
        Ok(cfg)
    }
}

fn scene_for(cli_scene: &Option<PathBuf>, cfg: &RunConfig) -> Result<(String, SceneDescription)> {
    let path = cli_scene
        .as_ref()
        .or(cfg.scene.as_ref())
        .ok_or_else(|| Error::Config("no scene given (--scene or \"scene\" in the config)".into()))?;
    let named = load_named(path)?;
    Ok((named.id, named.scene))
}

fn write_or_print(out: Option<&Path>, text: &str) -> Result<()> {
    match out {
        Some(p) => std::fs::write(p, text).map_err(|e| Error::Io {
            path: p.to_path_buf(),
            source: e,
        }),
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

#[derive(Serialize)]
struct PlanOutput {
    scene_id: String,
    seed: u64,
    controls: Vec<Control>,
    states: Vec<SystemState>,
    profile: Option<DivergenceProfile>,
    segments: Option<SegmentPlan>,
    feasible: bool,
    robust: bool,
    iterations_used: usize,
    task_cost: f64,
    objective: f64,
}

fn plan(scene: &Option<PathBuf>, out: Option<&Path>, common: &Common) -> Result<()> {
    let cfg = common.load()?;
    let (scene_id, scene) = scene_for(scene, &cfg)?;
    scene.validate()?;
    let ex = &cfg.executor;
    let p = &ex.planner.params;
    let x0 = SystemState::initial(&scene);
    let init = ex.initial_guess.controls(&scene, &x0, p.horizon, p.dt, &p.limits);
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let result = with_jobs(cfg.jobs, || robust_sto(&x0, &init, &scene, &ex.planner, &mut rng))??;
    let segments = match &result.profile {
        Some(prof) => Some(get_segments(&prof.per_step_expected, ex.c_ro, ex.c_nr)?),
        None => None,
    };
    let output = PlanOutput {
        scene_id,
        seed: cfg.seed,
        controls: result.controls,
        states: result.states,
        profile: result.profile,
        segments,
        feasible: result.feasible,
        robust: result.robust,
        iterations_used: result.iterations_used,
        task_cost: result.task_cost,
        objective: result.objective,
    };
    let text = serde_json::to_string_pretty(&output).expect("plan serializes") + "\n";
    write_or_print(out, &text)
}

fn execute(
    scene: &Option<PathBuf>,
    method: Option<Method>,
    out: Option<&Path>,
    common: &Common,
) -> Result<()> {
    let cfg = common.load()?;
    let (scene_id, scene) = scene_for(scene, &cfg)?;
    let method = method.unwrap_or(cfg.method);
    let log: ExecutionLog = with_jobs(cfg.jobs, || {
        run_baseline(method, &scene, &scene_id, &cfg.executor, cfg.seed)
    })??;
    let s = &log.summary;
    eprintln!(
        "{method} {scene_id} seed {}: success={} steps={} open-loop={:.1}% invocations={} \
         planning={:.3}s execution={:.3}s (virtual {:.3}s / {:.3}s)",
        cfg.seed,
        s.success,
        log.steps.len(),
        s.percent_open_loop,
        s.optimizer_invocations,
        s.planning_time_s,
        s.execution_time_s,
        s.virtual_planning_time_s,
        s.virtual_execution_time_s,
    );
    match out {
        Some(p) => log.save(p),
        None => write_or_print(None, &log.to_jsonl()),
    }
}

fn bench(out: Option<&Path>, format: ReportFormat, no_logs: bool, common: &Common) -> Result<()> {
    let cfg = common.load()?;
    let dir = cfg.output_dir.clone();
    std::fs::create_dir_all(&dir).map_err(|e| Error::Io {
        path: dir.clone(),
        source: e,
    })?;
    let logs = dir.join("logs");
    let report = run_benchmark(&cfg, (!no_logs).then_some(logs.as_path()))?;
    let ext = match format {
        ReportFormat::Csv => "csv",
        ReportFormat::Json => "json",
    };
    let path = out.map_or_else(|| dir.join(format!("report.{ext}")), Path::to_path_buf);
    emit_report(&report, format, &path)?;
    for a in &report.aggregates {
        let mean = |s: &Option<contraplan::bench::Stat>| s.map_or(f64::NAN, |s| s.mean);
        eprintln!(
            "{:>3}: runs={} success={:.2} open-loop={:.1}% planning={:.3}s execution={:.3}s",
            a.method,
            a.runs,
            mean(&a.success),
            mean(&a.percent_open_loop),
            mean(&a.planning_time_s),
            mean(&a.execution_time_s),
        );
    }
    for e in &report.errors {
        eprintln!("run error {} {} {}: {}", e.scene_id, e.method, e.seed, e.message);
    }
    eprintln!("report written to {}", path.display());
    Ok(())
}

fn render(log: &Path, scene: &Option<PathBuf>, out: &Path) -> Result<()> {
    let log = ExecutionLog::load(log)?;
    let scene = match scene {
        Some(p) => SceneDescription::load(p)?,
        None => log.scene.clone(),
    };
    let files = render_trace(&log, &scene, out)?;
    eprintln!("wrote {} files to {}", files.len(), out.display());
    Ok(())
}

fn scene_gen(out: Option<&Path>, common: &Common) -> Result<()> {
    let cfg = common.load()?;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let scene = generate_random_scene(&cfg.generator, &mut rng)?;
    match out {
        Some(p) => scene.save(p),
        None => write_or_print(None, &(scene.to_json() + "\n")),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match &cli.command {
        Command::Plan { scene, out, common } => plan(scene, out.as_deref(), common),
        Command::Execute {
            scene,
            method,
            out,
            common,
        } => execute(scene, *method, out.as_deref(), common),
        Command::Bench {
            out,
            format,
            no_logs,
            common,
        } => bench(out.as_deref(), *format, *no_logs, common),
        Command::Render { log, scene, out } => render(log, scene, out),
        Command::Scene {
            command: SceneCommand::Gen { out, common },
        } => scene_gen(out.as_deref(), common),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}
