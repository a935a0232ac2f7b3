//! Running plans against a simulated "real" world whose physics parameters
//! the planner never sees.
//!
//! Five strategies are supported: plain open-loop execution of a task-cost
//! plan (OL), open-loop execution of a robust plan (ROL) or of a plan that
//! only knows the nominal metrics (CP), replanning at every step (CC), and
//! the mixed strategy (OCL) that runs contracting segments open-loop and the
//! rest under MPC.

mod harness;
mod log;

use std::fmt;
use std::str::FromStr;
use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

pub use harness::{Audit, AuditCounts, HiddenWorld, RealWorldHarness};
pub use log::{ExecutionLog, ExecutionSummary, PlanRecord, StepMode, StepRecord};

use crate::error::{Error, Result};
use crate::graph::{get_segments, SegmentPlan};
use crate::metrics::compute_metrics;
use crate::optimizer::{
    deterministic_sto, robust_sto_with, InitialGuess, MetricSource, OptimizationResult,
    PlannerConfig,
};
use crate::world::{
    check_static_collision, Control, NoiseSpec, ParameterBounds, SceneDescription, Simulator,
    SystemState,
};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Method {
    Ol,
    Rol,
    Cp,
    Cc,
    Ocl,
}

impl Method {
    pub const ALL: [Method; 5] = [Method::Ol, Method::Rol, Method::Cp, Method::Cc, Method::Ocl];

    pub fn as_str(&self) -> &'static str {
        match self {
            Method::Ol => "ol",
            Method::Rol => "rol",
            Method::Cp => "cp",
            Method::Cc => "cc",
            Method::Ocl => "ocl",
        }
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Method {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Method::ALL
            .into_iter()
            .find(|m| m.as_str().eq_ignore_ascii_case(s))
            .ok_or_else(|| Error::Config(format!("unknown method {s:?} (expected ol, rol, cp, cc or ocl)")))
    }
}

/// Optimization horizon of the MPC steps inside a non-robust segment.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MpcHorizon {
    /// Always the planner's horizon `N`.
    Fixed,
    /// The steps left until the segment ends, so the segment-end target is
    /// aimed at the time the plan reaches it.
    #[default]
    ToSegmentEnd,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ExecutorConfig {
    pub planner: PlannerConfig,
    pub c_ro: f64,
    pub c_nr: f64,
    /// Bounds the hidden realization is drawn from.
    pub harness_bounds: ParameterBounds,
    pub observation_noise: NoiseSpec,
    /// Virtual seconds charged per simulated physics step of optimization.
    pub virtual_step_cost_s: f64,
    pub mpc_horizon: MpcHorizon,
    /// Step limit of the CC baseline; it stops earlier once the observed
    /// state is a success.
    pub cc_max_steps: usize,
    /// Initial candidate of every from-scratch planning call.
    pub initial_guess: InitialGuess,
}

impl Default for ExecutorConfig {
    fn default() -> Self {
        ExecutorConfig {
            planner: PlannerConfig::default(),
            c_ro: 1.0,
            c_nr: 1000.0,
            harness_bounds: ParameterBounds::default(),
            observation_noise: NoiseSpec::observation(),
            virtual_step_cost_s: 5e-4,
            mpc_horizon: MpcHorizon::ToSegmentEnd,
            cc_max_steps: 10,
            initial_guess: InitialGuess::Zero,
        }
    }
}

impl ExecutorConfig {
    /// Settings for cluttered-shelf scenes in SI units. Harness bounds,
    /// observation noise, edge costs and the remaining weights keep their
    /// defaults.
    ///
    /// * `v_f = 1e6`: a 3 cm goal miss then costs about as much as
    ///   disturbing a couple of objects (`v_d = 1000` on squared m/s).
    /// * `alpha = 1e-3`: terminal set of roughly 3 cm around the target.
    /// * `nu = [0.02, 0.02, 0.005]`: perturbations of 0.14 m/s and
    ///   0.07 rad/s, a fraction of one straight reach.
    /// * `S = 8`, `I_max = 20`, starting from the straight-line guess.
    pub fn shelf_benchmark() -> Self {
        let mut cfg = ExecutorConfig::default();
        let w = &mut cfg.planner.weights;
        w.v_f = 1e6;
        w.alpha = 1e-3;
        let p = &mut cfg.planner.params;
        p.nu = [0.02, 0.02, 0.005];
        p.samples = 8;
        p.max_iterations = 20;
        cfg.initial_guess = InitialGuess::StraightLine;
        cfg
    }

    pub fn validate(&self) -> Result<()> {
        self.planner.validate()?;
        self.harness_bounds.validate()?;
        if !(self.c_ro > 0.0 && self.c_nr > self.c_ro) {
            return Err(Error::Config("edge costs must satisfy 0 < c_ro < c_nr".into()));
        }
        if !(self.virtual_step_cost_s >= 0.0) || self.cc_max_steps == 0 {
            return Err(Error::Config(
                "virtual step cost must be >= 0 and cc_max_steps >= 1".into(),
            ));
        }
        Ok(())
    }

    fn dt(&self) -> f64 {
        self.planner.params.dt
    }
}

/// Target centre inside the capture region, no other object there, nothing
/// toppled and the gripper clear of static geometry.
pub fn evaluate_success(state: &SystemState, scene: &SceneDescription) -> bool {
    let captured = |i: usize| {
        scene
            .gripper
            .in_capture(&state.robot_pose, &state.objects[i].pose.position())
    };
    captured(scene.target_object)
        && (0..state.objects.len()).all(|i| i == scene.target_object || !captured(i))
        && state.toppled_count() == 0
        && !check_static_collision(scene, state)
}

/// Steps and optimizer work produced by one execution phase.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct Fragment {
    pub steps: Vec<StepRecord>,
    pub optimizer_invocations: usize,
    /// Optimizer physics steps spent before the harness's first action.
    pub planning_physics_steps: usize,
    /// Optimizer physics steps spent after it.
    pub execution_physics_steps: usize,
    pub planning_wall_s: f64,
    pub execution_wall_s: f64,
    /// Harness error that ended the fragment early.
    pub failure: Option<String>,
    /// Last MPC solution, for warm-starting a later call.
    pub last_plan: Vec<Control>,
}

impl Fragment {
    fn absorb(&mut self, other: Fragment) {
        self.steps.extend(other.steps);
        self.optimizer_invocations += other.optimizer_invocations;
        self.planning_physics_steps += other.planning_physics_steps;
        self.execution_physics_steps += other.execution_physics_steps;
        self.planning_wall_s += other.planning_wall_s;
        self.execution_wall_s += other.execution_wall_s;
        self.failure = self.failure.take().or(other.failure);
        self.last_plan = other.last_plan;
    }

    /// Runs one optimizer call with the audit in planning mode and books
    /// its cost before or after the first action.
    fn optimize<F>(&mut self, harness: &RealWorldHarness<'_>, f: F) -> Result<(OptimizationResult, f64)>
    where
        F: FnOnce() -> Result<OptimizationResult>,
    {
        let start = Instant::now();
        let result = harness.audit().planning(f)?;
        let wall = start.elapsed().as_secs_f64();
        self.optimizer_invocations += 1;
        if harness.steps() == 0 {
            self.planning_physics_steps += result.physics_steps;
            self.planning_wall_s += wall;
        } else {
            self.execution_physics_steps += result.physics_steps;
            self.execution_wall_s += wall;
        }
        Ok((result, wall))
    }
}

/// Streams `controls` to the harness without observing.
pub fn execute_open_loop(
    controls: &[Control],
    planned: Option<&[SystemState]>,
    first_step: usize,
    harness: &mut RealWorldHarness<'_>,
    dt: f64,
) -> Fragment {
    let mut frag = Fragment::default();
    for (k, u) in controls.iter().enumerate() {
        if let Err(e) = harness.apply(u, dt) {
            frag.failure = Some(e.to_string());
            break;
        }
        frag.steps.push(StepRecord {
            step: first_step + k,
            mode: StepMode::OpenLoop,
            control: *u,
            true_state: harness.true_state().clone(),
            observed_state: None,
            planned_state: planned.and_then(|p| p.get(k + 1)).cloned(),
            planning_wall_s: 0.0,
        });
    }
    frag
}

fn resize_plan(mut u: Vec<Control>, len: usize) -> Vec<Control> {
    let fill = u.last().copied().unwrap_or(Control::ZERO);
    u.resize(len, fill);
    u
}

/// Inputs of one MPC phase.
pub struct MpcRequest<'s> {
    /// Observation to plan the first step from.
    pub observed: SystemState,
    /// Terminal target; the task goal when `None`.
    pub desired: Option<&'s SystemState>,
    /// Number of steps to execute.
    pub length: usize,
    pub horizon: MpcHorizon,
    pub warm_start: Vec<Control>,
    /// Plan states aligned with the start of this phase, for the log.
    pub planned: Option<&'s [SystemState]>,
    pub first_step: usize,
    /// Stop as soon as the observation is a success.
    pub stop_on_success: bool,
}

/// Replans with the task-cost optimizer before every step and applies the
/// first control of each solution.
pub fn execute_mpc<R: Rng + ?Sized>(
    scene: &SceneDescription,
    cfg: &ExecutorConfig,
    req: MpcRequest<'_>,
    harness: &mut RealWorldHarness<'_>,
    rng: &mut R,
) -> Result<Fragment> {
    let n = cfg.planner.params.horizon;
    let mut frag = Fragment::default();
    let mut observed = req.observed;
    let mut warm = req.warm_start;
    for k in 0..req.length {
        if req.stop_on_success && evaluate_success(&observed, scene) {
            break;
        }
        let h = match req.horizon {
            MpcHorizon::Fixed => n,
            MpcHorizon::ToSegmentEnd => req.length - k,
        };
        let mut pc = cfg.planner;
        pc.params.horizon = h;
        let init: Vec<Control> = resize_plan(warm.clone(), h)
            .iter()
            .map(|u| pc.params.limits.clamp(u))
            .collect();
        let (sol, wall) = frag.optimize(harness, || {
            deterministic_sto(&observed, &init, scene, &pc, req.desired, rng)
        })?;
        let u = sol.controls[0];
        if let Err(e) = harness.apply(&u, cfg.dt()) {
            frag.failure = Some(e.to_string());
            break;
        }
        frag.steps.push(StepRecord {
            step: req.first_step + k,
            mode: StepMode::Mpc,
            control: u,
            true_state: harness.true_state().clone(),
            observed_state: Some(observed.clone()),
            planned_state: req.planned.and_then(|p| p.get(k + 1)).cloned(),
            planning_wall_s: wall,
        });
        warm = sol.controls[1..].to_vec();
        if warm.is_empty() {
            warm.push(u);
        }
        frag.last_plan = sol.controls;
        observed = harness.observe();
    }
    Ok(frag)
}

fn plan_record(r: &OptimizationResult, segments: Option<SegmentPlan>) -> PlanRecord {
    PlanRecord {
        controls: r.controls.clone(),
        states: r.states.clone(),
        profile: r.profile.clone(),
        segments,
        iterations_used: r.iterations_used,
        feasible: r.feasible,
        robust: r.robust,
        task_cost: r.task_cost,
        objective: r.objective,
    }
}

/// Robust plan, segmentation, then each segment open-loop or under MPC.
pub fn execute_ocl<R: Rng + ?Sized>(
    x0_observed: &SystemState,
    scene: &SceneDescription,
    cfg: &ExecutorConfig,
    harness: &mut RealWorldHarness<'_>,
    rng: &mut R,
) -> Result<(Fragment, PlanRecord)> {
    let p = &cfg.planner.params;
    let mut frag = Fragment::default();
    let init = cfg
        .initial_guess
        .controls(scene, x0_observed, p.horizon, p.dt, &p.limits);
    let (plan, _) = frag.optimize(harness, || {
        robust_sto_with(x0_observed, &init, scene, &cfg.planner, MetricSource::Real, rng)
    })?;
    let profile = plan.profile.as_ref().expect("robust plans carry a profile");
    let segments = get_segments(&profile.per_step_expected, cfg.c_ro, cfg.c_nr)?;
    let part = execute_segments(&plan.controls, &plan.states, &segments, scene, cfg, harness, rng)?;
    frag.absorb(part);
    let record = plan_record(&plan, Some(segments));
    Ok((frag, record))
}

/// Executes a segmented plan: robust segments open-loop, non-robust ones
/// under MPC toward the plan's state at the segment end, or toward the task
/// goal for a segment that ends the plan.
pub fn execute_segments<R: Rng + ?Sized>(
    controls: &[Control],
    states: &[SystemState],
    segments: &SegmentPlan,
    scene: &SceneDescription,
    cfg: &ExecutorConfig,
    harness: &mut RealWorldHarness<'_>,
    rng: &mut R,
) -> Result<Fragment> {
    let dt = cfg.dt();
    let n = controls.len();
    if states.len() != n + 1 || !segments.is_contiguous(n) {
        return Err(Error::Config(format!(
            "segments covering {} steps do not match a plan of {n} controls and {} states",
            segments.steps(),
            states.len()
        )));
    }
    let mut frag = Fragment::default();
    for seg in &segments.segments {
        if frag.failure.is_some() {
            break;
        }
        let (a, b) = (seg.start, seg.end);
        let planned = Some(&states[a..]);
        if seg.is_robust() {
            frag.absorb(execute_open_loop(&controls[a..b], planned, a, harness, dt));
        } else {
            let observed = harness.observe();
            let desired = (b < n).then(|| &states[b]);
            let part = execute_mpc(
                scene,
                cfg,
                MpcRequest {
                    observed,
                    desired,
                    length: b - a,
                    horizon: cfg.mpc_horizon,
                    warm_start: controls[a..].to_vec(),
                    planned,
                    first_step: a,
                    stop_on_success: false,
                },
                harness,
                rng,
            )?;
            frag.absorb(part);
        }
    }
    Ok(frag)
}

/// Seeds derived from one run seed: hidden world, planner, reporting.
fn derive_seeds(seed: u64) -> [u64; 3] {
    let mut master = ChaCha8Rng::seed_from_u64(seed);
    [master.random(), master.random(), master.random()]
}

/// Runs one method on one scene against a freshly sampled hidden world.
/// The hidden world depends only on `seed`, so every method faces the same
/// one for the same seed.
pub fn run_baseline(
    method: Method,
    scene: &SceneDescription,
    scene_id: &str,
    cfg: &ExecutorConfig,
    seed: u64,
) -> Result<ExecutionLog> {
    cfg.validate()?;
    scene.validate()?;
    let [harness_seed, planner_seed, report_seed] = derive_seeds(seed);
    let mut harness = RealWorldHarness::new(
        scene,
        cfg.planner.physics,
        &cfg.harness_bounds,
        cfg.observation_noise,
        harness_seed,
    )?;
    let mut rng = ChaCha8Rng::seed_from_u64(planner_seed);
    let p = &cfg.planner.params;
    let initial_true_state = harness.true_state().clone();
    let x0 = harness.observe();
    let initial = cfg.initial_guess.controls(scene, &x0, p.horizon, p.dt, &p.limits);

    let open_loop_plan =
        |frag: &mut Fragment, harness: &mut RealWorldHarness<'_>, rng: &mut ChaCha8Rng| {
            let plan = match method {
                Method::Ol => frag.optimize(harness, || {
                    deterministic_sto(&x0, &initial, scene, &cfg.planner, None, rng)
                }),
                Method::Rol => frag.optimize(harness, || {
                    robust_sto_with(&x0, &initial, scene, &cfg.planner, MetricSource::Real, rng)
                }),
                _ => frag.optimize(harness, || {
                    robust_sto_with(&x0, &initial, scene, &cfg.planner, MetricSource::Nominal, rng)
                }),
            }?
            .0;
            let part = execute_open_loop(&plan.controls, Some(&plan.states), 0, harness, p.dt);
            frag.absorb(part);
            Ok::<_, Error>(plan_record(&plan, None))
        };

    let started = Instant::now();
    let mut frag = Fragment::default();
    let plan = match method {
        Method::Ol | Method::Rol | Method::Cp => Some(open_loop_plan(&mut frag, &mut harness, &mut rng)?),
        Method::Cc => {
            let part = execute_mpc(
                scene,
                cfg,
                MpcRequest {
                    observed: x0.clone(),
                    desired: None,
                    length: cfg.cc_max_steps,
                    horizon: MpcHorizon::Fixed,
                    warm_start: initial.clone(),
                    planned: None,
                    first_step: 0,
                    stop_on_success: true,
                },
                &mut harness,
                &mut rng,
            )?;
            frag.absorb(part);
            None
        }
        Method::Ocl => {
            let (part, record) = execute_ocl(&x0, scene, cfg, &mut harness, &mut rng)?;
            frag.absorb(part);
            Some(record)
        }
    };

    let elapsed = started.elapsed().as_secs_f64();

    // Divergence metrics for the report, computed from planner-side
    // information only.
    let mut report_rng = ChaCha8Rng::seed_from_u64(report_seed);
    let sim = Simulator::new(scene, cfg.planner.physics);
    let profile = match &plan {
        Some(PlanRecord {
            profile: Some(prof), ..
        }) => Some(prof.clone()),
        Some(plan) => Some(compute_metrics(&sim, &x0, &plan.controls, &cfg.planner.metrics, p.dt, &mut report_rng)?),
        None if !frag.steps.is_empty() => {
            let executed: Vec<Control> = frag.steps.iter().map(|s| s.control).collect();
            Some(compute_metrics(&sim, &x0, &executed, &cfg.planner.metrics, p.dt, &mut report_rng)?)
        }
        None => None,
    };

    let open_loop_steps = frag.steps.iter().filter(|s| s.mode == StepMode::OpenLoop).count();
    let total = frag.steps.len();
    let final_state = frag
        .steps
        .last()
        .map_or(&initial_true_state, |s| &s.true_state)
        .clone();
    let success = frag.failure.is_none() && evaluate_success(&final_state, scene);
    let hidden_realization = harness.reveal();
    let summary = ExecutionSummary {
        success,
        failure: frag.failure.clone(),
        optimizer_invocations: frag.optimizer_invocations,
        open_loop_steps,
        mpc_steps: total - open_loop_steps,
        percent_open_loop: if total == 0 {
            0.0
        } else {
            100.0 * open_loop_steps as f64 / total as f64
        },
        planning_time_s: frag.planning_wall_s,
        execution_time_s: (elapsed - frag.planning_wall_s).max(0.0),
        virtual_planning_time_s: frag.planning_physics_steps as f64 * cfg.virtual_step_cost_s,
        virtual_execution_time_s: total as f64 * p.dt
            + frag.execution_physics_steps as f64 * cfg.virtual_step_cost_s,
        planning_physics_steps: frag.planning_physics_steps,
        execution_physics_steps: frag.execution_physics_steps,
        real_expected: profile.as_ref().map(|p| p.path_expected_real),
        nominal_expected: profile.as_ref().map(|p| p.path_expected_nominal),
        audit: harness.audit().counts(),
        hidden_realization,
    };
    Ok(ExecutionLog {
        method,
        seed,
        scene_id: scene_id.to_string(),
        scene: scene.clone(),
        dt: p.dt,
        initial_true_state,
        initial_observed_state: x0,
        plan,
        steps: frag.steps,
        summary,
    })
}
