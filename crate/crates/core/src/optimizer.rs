//! Greedy sampling-based trajectory optimization.
//!
//! Each iteration perturbs the incumbent control sequence `S` times with
//! Gaussian noise, evaluates every sample and keeps the cheapest one only if
//! it strictly improves on the incumbent. The robust variant adds the
//! divergence metrics of every candidate to its cost.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::cost::{assess_feasibility, cost_breakdown, robust_cost, Feasibility, ObjectiveWeights};
use crate::error::{Error, Result};
use crate::geometry::{wrap_angle, Pose2, Vec2};
use crate::metrics::{compute_metrics_reusing, DivergenceProfile, MetricSettings};
use crate::world::{
    Control, ControlLimits, ControlSequence, PhysicsConfig, SceneDescription, Simulator,
    SystemState, Trajectory, WorldRealization, CONTROL_DIM,
};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct OptimizerParams {
    /// Noisy samples per iteration.
    pub samples: usize,
    /// Per-dimension variance of the control perturbation.
    pub nu: [f64; CONTROL_DIM],
    pub max_iterations: usize,
    pub horizon: usize,
    pub dt: f64,
    /// Keep iterating until the full-path real expected metric is at most 1,
    /// not only until the plan is feasible.
    pub require_robust: bool,
    pub limits: ControlLimits,
}

impl Default for OptimizerParams {
    fn default() -> Self {
        OptimizerParams {
            samples: 4,
            nu: [0.4; CONTROL_DIM],
            max_iterations: 10,
            horizon: 5,
            dt: 0.2,
            require_robust: true,
            limits: ControlLimits::default(),
        }
    }
}

impl OptimizerParams {
    pub fn validate(&self) -> Result<()> {
        if self.samples < 1 || self.horizon < 1 {
            return Err(Error::Config("samples and horizon must be at least 1".into()));
        }
        if self.nu.iter().any(|v| !(*v >= 0.0) || !v.is_finite()) {
            return Err(Error::Config("nu must be finite and >= 0".into()));
        }
        if !(self.dt > 0.0) || !self.dt.is_finite() {
            return Err(Error::Config("dt must be > 0".into()));
        }
        if (0..CONTROL_DIM).any(|k| !(self.limits.lower[k] <= self.limits.upper[k])) {
            return Err(Error::Config("control lower bound exceeds upper bound".into()));
        }
        Ok(())
    }
}

/// Everything the optimizer needs besides the scene and start state.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PlannerConfig {
    pub physics: PhysicsConfig,
    pub weights: ObjectiveWeights,
    pub metrics: MetricSettings,
    pub params: OptimizerParams,
}

impl PlannerConfig {
    pub fn validate(&self) -> Result<()> {
        self.weights.validate()?;
        self.metrics.validate()?;
        self.params.validate()
    }
}

/// Which divergence metrics enter the robust objective.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MetricSource {
    /// Worst case over sampled world realizations.
    #[default]
    Real,
    /// Nominal model only.
    Nominal,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct IterationRecord {
    pub iteration: usize,
    /// Objective of the cheapest sample of this iteration.
    pub best_sample_cost: f64,
    pub best_sample: usize,
    pub accepted: bool,
    /// Incumbent objective after this iteration.
    pub incumbent_cost: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct OptimizationResult {
    pub controls: ControlSequence,
    pub states: Trajectory,
    /// Divergence metrics of the returned plan; `None` for the deterministic
    /// optimizer.
    pub profile: Option<DivergenceProfile>,
    /// Incumbent objective before the first and after every iteration.
    pub cost_history: Vec<f64>,
    pub iterations: Vec<IterationRecord>,
    /// Task cost of the returned plan.
    pub task_cost: f64,
    /// Objective (robust or task cost) of the returned plan.
    pub objective: f64,
    pub feasible: bool,
    pub feasibility: Feasibility,
    pub robust: bool,
    pub iterations_used: usize,
    pub rollouts_evaluated: usize,
    pub physics_steps: usize,
    pub metric_source: Option<MetricSource>,
    /// `(E_e, E_m)` pairs fed into the robust objective, one per evaluated
    /// candidate in evaluation order.
    pub metric_trace: Vec<[f64; 2]>,
}

impl OptimizationResult {
    /// Full-path real expected metric of the returned plan, if computed.
    pub fn real_expected(&self) -> Option<f64> {
        self.profile.as_ref().map(|p| p.path_expected_real)
    }
}

/// Starting guess for a planning call.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum InitialGuess {
    /// All-zero controls.
    #[default]
    Zero,
    /// Constant velocity that carries the grasp point onto the target and
    /// turns the gripper toward it over the horizon.
    StraightLine,
}

impl InitialGuess {
    pub fn controls(
        &self,
        scene: &SceneDescription,
        x0: &SystemState,
        horizon: usize,
        dt: f64,
        limits: &ControlLimits,
    ) -> ControlSequence {
        match self {
            InitialGuess::Zero => vec![Control::ZERO; horizon],
            InitialGuess::StraightLine => straight_line_controls(scene, x0, horizon, dt, limits),
        }
    }
}

/// Constant control moving the grasp point to the target centre in
/// `horizon` steps while rotating the gripper to face it, clamped to the
/// limits.
pub fn straight_line_controls(
    scene: &SceneDescription,
    x0: &SystemState,
    horizon: usize,
    dt: f64,
    limits: &ControlLimits,
) -> ControlSequence {
    let t = horizon as f64 * dt;
    let pose = &x0.robot_pose;
    let target = x0.objects[scene.target_object].pose.position();
    let to_target = target - pose.position();
    let turn = wrap_angle(to_target.y.atan2(to_target.x) - pose.theta);
    // Move the origin so that the grasp point, after turning, lands on the
    // target.
    let heading = pose.theta + turn;
    let offset = Pose2::new(0.0, 0.0, heading)
        .to_world(&Vec2::new(scene.grasp_offset[0], scene.grasp_offset[1]));
    let travel = target - offset - pose.position();
    let u = limits.clamp(&Control::new(travel.x / t, travel.y / t, turn / t));
    vec![u; horizon]
}

/// `N` i.i.d. draws from `N(0, diag(nu))`.
pub fn sample_control_perturbation<R: Rng + ?Sized>(
    nu: &[f64; CONTROL_DIM],
    n: usize,
    rng: &mut R,
) -> ControlSequence {
    let normals: Vec<Normal<f64>> = nu
        .iter()
        .map(|v| Normal::new(0.0, v.max(0.0).sqrt()).expect("finite variance"))
        .collect();
    (0..n)
        .map(|_| {
            Control::new(
                normals[0].sample(rng),
                normals[1].sample(rng),
                normals[2].sample(rng),
            )
        })
        .collect()
}

pub fn clamp_controls(controls: &[Control], limits: &ControlLimits) -> ControlSequence {
    controls.iter().map(|u| limits.clamp(u)).collect()
}

struct Candidate {
    controls: ControlSequence,
    states: Trajectory,
    task_cost: f64,
    objective: f64,
    feasibility: Feasibility,
    profile: Option<DivergenceProfile>,
    fed: Option<[f64; 2]>,
    rollouts: usize,
}

impl Candidate {
    fn robust_enough(&self, source: MetricSource) -> bool {
        match &self.profile {
            None => true,
            Some(p) => {
                let e = match source {
                    MetricSource::Real => p.path_expected_real,
                    MetricSource::Nominal => p.path_expected_nominal,
                };
                e <= 1.0
            }
        }
    }
}

enum Mode<'d> {
    Robust(MetricSource),
    Deterministic(Option<&'d SystemState>),
}

struct Evaluator<'a, 'd> {
    sim: Simulator<'a>,
    nominal_world: WorldRealization,
    cfg: &'a PlannerConfig,
    mode: Mode<'d>,
}

impl Evaluator<'_, '_> {
    fn evaluate(&self, x0: &SystemState, controls: ControlSequence, seed: u64) -> Result<Candidate> {
        let p = &self.cfg.params;
        let states = self.sim.rollout(x0, &controls, &self.nominal_world, p.dt)?;
        let desired = match self.mode {
            Mode::Deterministic(d) => d,
            Mode::Robust(_) => None,
        };
        let scene = self.sim.scene();
        let w = &self.cfg.weights;
        let breakdown = cost_breakdown(&states, &controls, scene, w, desired)?;
        let feasibility = assess_feasibility(&states, &controls, &breakdown, scene, w, &p.limits);
        let mut rollouts = 1;
        let (objective, profile, fed) = match self.mode {
            Mode::Deterministic(_) => (breakdown.total, None, None),
            Mode::Robust(source) => {
                let mut rng = ChaCha8Rng::seed_from_u64(seed);
                let (profile, n) = compute_metrics_reusing(
                    &self.sim,
                    x0,
                    &controls,
                    Some(&states),
                    &self.cfg.metrics,
                    p.dt,
                    &mut rng,
                )?;
                rollouts += n;
                let fed = match source {
                    MetricSource::Real => [profile.path_expected_real, profile.path_maximal_real],
                    MetricSource::Nominal => {
                        [profile.path_expected_nominal, profile.path_maximal_nominal]
                    }
                };
                let j_r = robust_cost(breakdown.total, fed[0], fed[1], w);
                (j_r, Some(profile), Some(fed))
            }
        };
        Ok(Candidate {
            controls,
            states,
            task_cost: breakdown.total,
            objective,
            feasibility,
            profile,
            fed,
            rollouts,
        })
    }

    fn done(&self, c: &Candidate) -> bool {
        let robust = match self.mode {
            Mode::Robust(source) if self.cfg.params.require_robust => c.robust_enough(source),
            _ => true,
        };
        c.feasibility.feasible && robust
    }
}

fn optimize<R: Rng + ?Sized>(
    x0: &SystemState,
    u_init: &[Control],
    scene: &SceneDescription,
    cfg: &PlannerConfig,
    mode: Mode<'_>,
    rng: &mut R,
) -> Result<OptimizationResult> {
    cfg.validate()?;
    let p = &cfg.params;
    if u_init.len() != p.horizon {
        return Err(Error::DegenerateInput(format!(
            "initial controls have length {} but the horizon is {}",
            u_init.len(),
            p.horizon
        )));
    }
    if let Some(u) = u_init.iter().find(|u| !p.limits.contains(u)) {
        return Err(Error::DegenerateInput(format!(
            "initial control {:?} violates the control limits",
            u.to_array()
        )));
    }
    let source = match mode {
        Mode::Robust(s) => Some(s),
        Mode::Deterministic(_) => None,
    };
    let ev = Evaluator {
        sim: Simulator::new(scene, cfg.physics),
        nominal_world: WorldRealization::nominal(scene),
        cfg,
        mode,
    };

    let mut trace = Vec::new();
    let mut rollouts = 0;
    let mut incumbent = ev.evaluate(x0, u_init.to_vec(), rng.random())?;
    rollouts += incumbent.rollouts;
    trace.extend(incumbent.fed);
    let mut history = vec![incumbent.objective];
    let mut records = Vec::new();

    let mut iteration = 0;
    while iteration < p.max_iterations && !ev.done(&incumbent) {
        // All randomness is drawn here, in sample order, before the
        // parallel evaluation.
        let draws: Vec<(ControlSequence, u64)> = (0..p.samples)
            .map(|_| {
                let delta = sample_control_perturbation(&p.nu, p.horizon, rng);
                let u: Vec<Control> = incumbent
                    .controls
                    .iter()
                    .zip(&delta)
                    .map(|(u, d)| p.limits.clamp(&(*u + *d)))
                    .collect();
                (u, rng.random())
            })
            .collect();
        let samples = draws
            .into_par_iter()
            .map(|(u, seed)| ev.evaluate(x0, u, seed))
            .collect::<Result<Vec<_>>>()?;

        let mut best = 0;
        for (s, c) in samples.iter().enumerate() {
            rollouts += c.rollouts;
            trace.extend(c.fed);
            if c.objective < samples[best].objective {
                best = s;
            }
        }
        let best_cost = samples[best].objective;
        let accepted = best_cost < incumbent.objective;
        if accepted {
            incumbent = samples.into_iter().nth(best).expect("best index");
        }
        records.push(IterationRecord {
            iteration,
            best_sample_cost: best_cost,
            best_sample: best,
            accepted,
            incumbent_cost: incumbent.objective,
        });
        history.push(incumbent.objective);
        iteration += 1;
    }

    let robust = match source {
        Some(s) => incumbent.robust_enough(s),
        None => false,
    };
    Ok(OptimizationResult {
        physics_steps: rollouts * p.horizon,
        controls: incumbent.controls,
        states: incumbent.states,
        profile: incumbent.profile,
        cost_history: history,
        iterations: records,
        task_cost: incumbent.task_cost,
        objective: incumbent.objective,
        feasible: incumbent.feasibility.feasible,
        feasibility: incumbent.feasibility,
        robust,
        iterations_used: iteration,
        rollouts_evaluated: rollouts,
        metric_source: source,
        metric_trace: trace,
    })
}

/// Minimizes the robust objective with real-world metrics.
pub fn robust_sto<R: Rng + ?Sized>(
    x0: &SystemState,
    u_init: &[Control],
    scene: &SceneDescription,
    cfg: &PlannerConfig,
    rng: &mut R,
) -> Result<OptimizationResult> {
    robust_sto_with(x0, u_init, scene, cfg, MetricSource::Real, rng)
}

/// Minimizes the robust objective with the chosen metrics.
pub fn robust_sto_with<R: Rng + ?Sized>(
    x0: &SystemState,
    u_init: &[Control],
    scene: &SceneDescription,
    cfg: &PlannerConfig,
    source: MetricSource,
    rng: &mut R,
) -> Result<OptimizationResult> {
    optimize(x0, u_init, scene, cfg, Mode::Robust(source), rng)
}

/// Minimizes the task cost only, optionally toward a desired final state.
pub fn deterministic_sto<R: Rng + ?Sized>(
    x0: &SystemState,
    u_init: &[Control],
    scene: &SceneDescription,
    cfg: &PlannerConfig,
    desired: Option<&SystemState>,
    rng: &mut R,
) -> Result<OptimizationResult> {
    optimize(x0, u_init, scene, cfg, Mode::Deterministic(desired), rng)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::parallel::with_jobs;
    use crate::scenes::demo_scene;

    fn quick_cfg() -> PlannerConfig {
        let mut cfg = PlannerConfig::default();
        cfg.params.max_iterations = 3;
        cfg
    }

    fn zero_plan(n: usize) -> Vec<Control> {
        vec![Control::ZERO; n]
    }

    #[test]
    fn zero_variance_gives_zero_delta() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let d = sample_control_perturbation(&[0.0; 3], 5, &mut rng);
        assert!(d.iter().all(|u| *u == Control::ZERO));
    }

    #[test]
    fn perturbation_is_seeded() {
        let a = sample_control_perturbation(&[0.4; 3], 5, &mut ChaCha8Rng::seed_from_u64(2));
        let b = sample_control_perturbation(&[0.4; 3], 5, &mut ChaCha8Rng::seed_from_u64(2));
        assert_eq!(a, b);
    }

    #[test]
    fn perturbation_variance_matches() {
        let nu = [0.4, 0.1, 1.5];
        let n = 10_000;
        let d = sample_control_perturbation(&nu, n, &mut ChaCha8Rng::seed_from_u64(3));
        for k in 0..3 {
            let xs: Vec<f64> = d.iter().map(|u| u.to_array()[k]).collect();
            let mean = xs.iter().sum::<f64>() / n as f64;
            let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1) as f64;
            assert!((var / nu[k] - 1.0).abs() < 0.05, "dim {k}: {var}");
        }
    }

    #[test]
    fn clamp_examples() {
        let lim = ControlLimits::default();
        let inside = vec![Control::new(0.1, -2.0, 3.0)];
        assert_eq!(clamp_controls(&inside, &lim), inside);
        let out = clamp_controls(&[Control::new(4.0, -4.0, 0.0)], &lim);
        assert_eq!(out[0].vx, std::f64::consts::PI);
        assert_eq!(out[0].vy, -std::f64::consts::PI);
        assert_eq!(clamp_controls(&out, &lim), out);
    }

    #[test]
    fn zero_iterations_returns_initial_plan() {
        let scene = demo_scene();
        let x0 = SystemState::initial(&scene);
        let mut cfg = quick_cfg();
        cfg.params.max_iterations = 0;
        let u0 = vec![Control::new(0.0, 0.2, 0.0); 5];
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let r = robust_sto(&x0, &u0, &scene, &cfg, &mut rng).unwrap();
        assert_eq!(r.controls, u0);
        assert_eq!(r.iterations_used, 0);
        assert_eq!(r.cost_history.len(), 1);
        let r = deterministic_sto(&x0, &u0, &scene, &cfg, None, &mut rng).unwrap();
        assert_eq!(r.controls, u0);
        assert!(r.profile.is_none());
    }

    #[test]
    fn greedy_history_is_monotone() {
        let scene = demo_scene();
        let x0 = SystemState::initial(&scene);
        let mut cfg = quick_cfg();
        cfg.params.max_iterations = 10;
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let r = deterministic_sto(&x0, &zero_plan(5), &scene, &cfg, None, &mut rng).unwrap();
        for w in r.cost_history.windows(2) {
            assert!(w[1] <= w[0]);
        }
        for rec in &r.iterations {
            if rec.accepted {
                assert!(rec.best_sample_cost < r.cost_history[rec.iteration]);
            }
        }
        assert!(r.controls.iter().all(|u| cfg.params.limits.contains(u)));
    }

    #[test]
    fn deterministic_step_accounting() {
        let scene = demo_scene();
        let x0 = SystemState::initial(&scene);
        let cfg = quick_cfg();
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        let r = deterministic_sto(&x0, &zero_plan(5), &scene, &cfg, None, &mut rng).unwrap();
        let p = &cfg.params;
        assert_eq!(r.physics_steps, p.horizon * (p.samples * r.iterations_used + 1));
    }

    #[test]
    fn robust_rollout_accounting() {
        let scene = demo_scene();
        let x0 = SystemState::initial(&scene);
        let cfg = quick_cfg();
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let r = robust_sto(&x0, &zero_plan(5), &scene, &cfg, &mut rng).unwrap();
        let m = &cfg.metrics;
        let per_eval = (m.n_worlds + 1) * (m.n_samples + 1);
        let evals = cfg.params.samples * r.iterations_used + 1;
        assert_eq!(r.rollouts_evaluated, evals * per_eval);
        assert_eq!(r.metric_trace.len(), evals);
        assert!(r.profile.is_some());
    }

    #[test]
    fn rejects_bad_initial_plan() {
        let scene = demo_scene();
        let x0 = SystemState::initial(&scene);
        let cfg = quick_cfg();
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        assert!(robust_sto(&x0, &zero_plan(4), &scene, &cfg, &mut rng).is_err());
        let bad = vec![Control::new(5.0, 0.0, 0.0); 5];
        assert!(deterministic_sto(&x0, &bad, &scene, &cfg, None, &mut rng).is_err());
    }

    #[test]
    fn nominal_source_feeds_nominal_metrics() {
        let scene = demo_scene();
        let x0 = SystemState::initial(&scene);
        let mut cfg = quick_cfg();
        cfg.params.max_iterations = 0;
        let u0 = vec![Control::new(0.0, 0.3, 0.0); 5];
        let run = |source| {
            let mut rng = ChaCha8Rng::seed_from_u64(9);
            robust_sto_with(&x0, &u0, &scene, &cfg, source, &mut rng).unwrap()
        };
        let real = run(MetricSource::Real);
        let nominal = run(MetricSource::Nominal);
        let p = real.profile.as_ref().unwrap();
        assert_eq!(real.profile, nominal.profile);
        assert_eq!(real.metric_trace, vec![[p.path_expected_real, p.path_maximal_real]]);
        assert_eq!(
            nominal.metric_trace,
            vec![[p.path_expected_nominal, p.path_maximal_nominal]]
        );
    }

    #[test]
    fn thread_count_does_not_change_result() {
        let scene = demo_scene();
        let x0 = SystemState::initial(&scene);
        let cfg = quick_cfg();
        let run = |jobs| {
            with_jobs(Some(jobs), || {
                let mut rng = ChaCha8Rng::seed_from_u64(10);
                robust_sto(&x0, &zero_plan(5), &scene, &cfg, &mut rng).unwrap()
            })
            .unwrap()
        };
        assert_eq!(run(1), run(4));
    }
}
