use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::SegmentPlan;
use crate::metrics::DivergenceProfile;
use crate::world::{Control, SceneDescription, SystemState, WorldRealization};

use super::harness::AuditCounts;
use super::Method;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StepMode {
    OpenLoop,
    Mpc,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StepRecord {
    pub step: usize,
    pub mode: StepMode,
    pub control: Control,
    /// True state after the step.
    pub true_state: SystemState,
    /// Observation taken before choosing this control; open-loop steps
    /// observe nothing.
    pub observed_state: Option<SystemState>,
    /// State the initial plan predicted after this step, if any.
    pub planned_state: Option<SystemState>,
    /// Wall-clock optimizer time spent right before this step.
    pub planning_wall_s: f64,
}

/// The plan committed to before the first action.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PlanRecord {
    pub controls: Vec<Control>,
    pub states: Vec<SystemState>,
    pub profile: Option<DivergenceProfile>,
    pub segments: Option<SegmentPlan>,
    pub iterations_used: usize,
    pub feasible: bool,
    pub robust: bool,
    pub task_cost: f64,
    pub objective: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExecutionSummary {
    pub success: bool,
    pub failure: Option<String>,
    pub optimizer_invocations: usize,
    pub open_loop_steps: usize,
    pub mpc_steps: usize,
    pub percent_open_loop: f64,
    /// Wall clock before the first action.
    pub planning_time_s: f64,
    /// Wall clock from the first action to the end.
    pub execution_time_s: f64,
    /// Planning physics steps charged at the virtual step cost.
    pub virtual_planning_time_s: f64,
    /// Executed steps times `dt` plus execution-phase optimizer physics steps
    /// charged at the virtual step cost.
    pub virtual_execution_time_s: f64,
    pub planning_physics_steps: usize,
    pub execution_physics_steps: usize,
    /// Metrics of the committed plan (or, for CC, of the executed controls).
    pub real_expected: Option<f64>,
    pub nominal_expected: Option<f64>,
    pub audit: AuditCounts,
    /// Revealed after execution, for analysis only.
    pub hidden_realization: WorldRealization,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExecutionLog {
    pub method: Method,
    pub seed: u64,
    pub scene_id: String,
    pub scene: SceneDescription,
    pub dt: f64,
    pub initial_true_state: SystemState,
    pub initial_observed_state: SystemState,
    pub plan: Option<PlanRecord>,
    pub steps: Vec<StepRecord>,
    pub summary: ExecutionSummary,
}

#[derive(Serialize, Deserialize)]
struct Header {
    method: Method,
    seed: u64,
    scene_id: String,
    scene: SceneDescription,
    dt: f64,
    initial_true_state: SystemState,
    initial_observed_state: SystemState,
    plan: Option<PlanRecord>,
}

#[derive(Serialize, Deserialize)]
#[serde(tag = "record", rename_all = "snake_case")]
enum Record {
    Header(Box<Header>),
    Step(Box<StepRecord>),
    Summary(Box<ExecutionSummary>),
}

impl ExecutionLog {
    pub fn final_true_state(&self) -> &SystemState {
        self.steps
            .last()
            .map_or(&self.initial_true_state, |s| &s.true_state)
    }

    /// True states from the start through every step.
    pub fn true_states(&self) -> Vec<&SystemState> {
        std::iter::once(&self.initial_true_state)
            .chain(self.steps.iter().map(|s| &s.true_state))
            .collect()
    }

    /// One JSON object per line: a header, one line per step, a summary.
    pub fn to_jsonl(&self) -> String {
        let header = Record::Header(Box::new(Header {
            method: self.method,
            seed: self.seed,
            scene_id: self.scene_id.clone(),
            scene: self.scene.clone(),
            dt: self.dt,
            initial_true_state: self.initial_true_state.clone(),
            initial_observed_state: self.initial_observed_state.clone(),
            plan: self.plan.clone(),
        }));
        let mut out = String::new();
        let mut push = |r: &Record| {
            out.push_str(&serde_json::to_string(r).expect("log records serialize"));
            out.push('\n');
        };
        push(&header);
        for s in &self.steps {
            push(&Record::Step(Box::new(s.clone())));
        }
        push(&Record::Summary(Box::new(self.summary.clone())));
        out
    }

    pub fn from_jsonl(text: &str) -> Result<Self> {
        Self::parse_lines(text.lines().map(|l| Ok(l.to_string())), Path::new("<log>"))
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let mut w = BufWriter::new(File::create(path).map_err(|e| Error::io(path, e))?);
        w.write_all(self.to_jsonl().as_bytes())
            .and_then(|_| w.flush())
            .map_err(|e| Error::io(path, e))
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let f = File::open(path).map_err(|e| Error::io(path, e))?;
        Self::parse_lines(
            BufReader::new(f).lines().map(|l| l.map_err(|e| Error::io(path, e))),
            path,
        )
    }

    fn parse_lines(lines: impl Iterator<Item = Result<String>>, path: &Path) -> Result<Self> {
        let mut header = None;
        let mut steps = Vec::new();
        let mut summary = None;
        for line in lines {
            let line = line?;
            if line.trim().is_empty() {
                continue;
            }
            match serde_json::from_str(&line).map_err(|e| Error::json(path, e))? {
                Record::Header(h) => header = Some(h),
                Record::Step(s) => steps.push(*s),
                Record::Summary(s) => summary = Some(s),
            }
        }
        let missing = |what: &str| Error::Config(format!("{}: log has no {what}", path.display()));
        let h = header.ok_or_else(|| missing("header"))?;
        let summary = *summary.ok_or_else(|| missing("summary"))?;
        Ok(ExecutionLog {
            method: h.method,
            seed: h.seed,
            scene_id: h.scene_id,
            scene: h.scene,
            dt: h.dt,
            initial_true_state: h.initial_true_state,
            initial_observed_state: h.initial_observed_state,
            plan: h.plan,
            steps,
            summary,
        })
    }
}
