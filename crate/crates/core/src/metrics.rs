//! Sampled divergence metrics.
//!
//! A cloud of perturbed initial states is rolled out under the nominal
//! controls and compared against the nominal trajectory. The ratio of final
//! to initial spread says whether the trajectory contracts (`< 1`) or
//! diverges (`> 1`). Repeating this in several randomized physics
//! realizations and taking the worst case gives the real-world metrics.

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::wrap_angle;
use crate::world::{
    sample_initial_states, sample_world_realization, Control, NoiseSpec, ParameterBounds,
    Simulator, SystemState, Trajectory, WorldRealization,
};

/// Weights of the squared component differences in [`state_distance`].
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct DistanceWeights {
    pub robot_pose: [f64; 3],
    pub robot_velocity: [f64; 3],
    pub object_pose: [f64; 3],
    pub object_velocity: [f64; 3],
}

impl Default for DistanceWeights {
    fn default() -> Self {
        DistanceWeights {
            robot_pose: [1.0; 3],
            robot_velocity: [0.1; 3],
            object_pose: [1.0; 3],
            object_velocity: [0.1; 3],
        }
    }
}

impl DistanceWeights {
    pub fn unit() -> Self {
        DistanceWeights {
            robot_pose: [1.0; 3],
            robot_velocity: [1.0; 3],
            object_pose: [1.0; 3],
            object_velocity: [1.0; 3],
        }
    }

    pub fn validate(&self) -> Result<()> {
        let all: Vec<f64> = [
            self.robot_pose,
            self.robot_velocity,
            self.object_pose,
            self.object_velocity,
        ]
        .concat();
        if all.iter().any(|w| !(*w >= 0.0) || !w.is_finite()) {
            return Err(Error::Config("distance weights must be finite and >= 0".into()));
        }
        if !all.iter().any(|w| *w > 0.0) {
            return Err(Error::Config("at least one distance weight must be positive".into()));
        }
        Ok(())
    }
}

fn weighted_sq(w: &[f64; 3], d: [f64; 3]) -> f64 {
    w.iter().zip(d).map(|(w, d)| w * d * d).sum()
}

/// Weighted Euclidean distance between two states of the same scene.
/// Heading differences are wrapped to `(-π, π]`.
pub fn state_distance(a: &SystemState, b: &SystemState, w: &DistanceWeights) -> f64 {
    let pose_diff = |p: &crate::geometry::Pose2, q: &crate::geometry::Pose2| {
        [p.x - q.x, p.y - q.y, wrap_angle(p.theta - q.theta)]
    };
    let vel_diff = |p: &crate::world::Twist2, q: &crate::world::Twist2| {
        [p.vx - q.vx, p.vy - q.vy, p.omega - q.omega]
    };
    let mut sum = weighted_sq(&w.robot_pose, pose_diff(&a.robot_pose, &b.robot_pose))
        + weighted_sq(
            &w.robot_velocity,
            vel_diff(&a.robot_velocity, &b.robot_velocity),
        );
    for (oa, ob) in a.objects.iter().zip(&b.objects) {
        sum += weighted_sq(&w.object_pose, pose_diff(&oa.pose, &ob.pose));
        sum += weighted_sq(&w.object_velocity, vel_diff(&oa.velocity, &ob.velocity));
    }
    sum.sqrt()
}

fn mean_distance<'s, S: 's, D>(samples: impl Iterator<Item = &'s S>, nominal: &S, dist: &D) -> f64
where
    D: Fn(&S, &S) -> f64,
{
    let (sum, n) = samples.fold((0.0, 0usize), |(s, n), x| (s + dist(x, nominal), n + 1));
    sum / n as f64
}

fn expected_ratio(mean_before: f64, mean_after: f64) -> Result<f64> {
    if !(mean_before > 0.0) {
        return Err(Error::DegenerateInput(
            "mean initial sample distance is zero".into(),
        ));
    }
    Ok(mean_after / mean_before)
}

fn check_counts(before: usize, after: usize) -> Result<()> {
    if before == 0 || before != after {
        return Err(Error::DegenerateInput(format!(
            "sample sets must be non-empty and equal in size ({before} vs {after})"
        )));
    }
    Ok(())
}

/// Ratio of mean sample distances from the nominal state after and before
/// one step.
pub fn one_step_expected_metric<S, D>(
    samples_t: &[S],
    samples_t1: &[S],
    nominal_t: &S,
    nominal_t1: &S,
    dist: D,
) -> Result<f64>
where
    D: Fn(&S, &S) -> f64,
{
    check_counts(samples_t.len(), samples_t1.len())?;
    expected_ratio(
        mean_distance(samples_t.iter(), nominal_t, &dist),
        mean_distance(samples_t1.iter(), nominal_t1, &dist),
    )
}

/// Expected path metric: mean final over mean initial sample distance.
pub fn path_metric_expected<S, D>(
    samples_0: &[S],
    samples_n: &[S],
    nominal_0: &S,
    nominal_n: &S,
    dist: D,
) -> Result<f64>
where
    D: Fn(&S, &S) -> f64,
{
    one_step_expected_metric(samples_0, samples_n, nominal_0, nominal_n, dist)
}

/// Maximal path metric: the largest per-sample distance ratio. Samples that
/// start exactly on the nominal state are skipped.
pub fn path_metric_maximal<S, D>(
    samples_0: &[S],
    samples_n: &[S],
    nominal_0: &S,
    nominal_n: &S,
    dist: D,
) -> Result<f64>
where
    D: Fn(&S, &S) -> f64,
{
    check_counts(samples_0.len(), samples_n.len())?;
    maximal_ratio(samples_0.iter().zip(samples_n), nominal_0, nominal_n, &dist)
}

fn maximal_ratio<'s, S: 's, D>(
    pairs: impl Iterator<Item = (&'s S, &'s S)>,
    nominal_0: &S,
    nominal_n: &S,
    dist: &D,
) -> Result<f64>
where
    D: Fn(&S, &S) -> f64,
{
    pairs
        .filter_map(|(a, b)| {
            let d0 = dist(a, nominal_0);
            (d0 > 0.0).then(|| dist(b, nominal_n) / d0)
        })
        .reduce(f64::max)
        .ok_or_else(|| {
            Error::DegenerateInput("every sample starts on the nominal state".into())
        })
}

/// Nominal and perturbed rollouts in one world.
#[derive(Clone, Debug)]
pub struct WorldRollouts<S> {
    pub nominal: Vec<S>,
    pub samples: Vec<Vec<S>>,
}

/// Divergence metrics of one nominal trajectory.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DivergenceProfile {
    /// Entry `t` is the expected metric of step `t -> t+1`, taken from the
    /// world with the largest expected path metric.
    pub per_step_expected: Vec<f64>,
    pub path_expected_nominal: f64,
    pub path_maximal_nominal: f64,
    pub path_expected_real: f64,
    pub path_maximal_real: f64,
    pub n_samples: usize,
    pub n_worlds: usize,
    /// Index of the world that supplied `per_step_expected` (0 = nominal).
    pub worst_world: usize,
    /// Expected and maximal path metric of every world, nominal first.
    pub world_expected: Vec<f64>,
    pub world_maximal: Vec<f64>,
}

impl DivergenceProfile {
    pub fn horizon(&self) -> usize {
        self.per_step_expected.len()
    }
}

fn world_metrics<S, D>(w: &WorldRollouts<S>, dist: &D) -> Result<(f64, f64, Vec<f64>)>
where
    D: Fn(&S, &S) -> f64,
{
    let steps = w.nominal.len().saturating_sub(1);
    if steps == 0 {
        return Err(Error::DegenerateInput("trajectory has no steps".into()));
    }
    if w.samples.is_empty() || w.samples.iter().any(|s| s.len() != w.nominal.len()) {
        return Err(Error::DegenerateInput(
            "sample trajectories must match the nominal length".into(),
        ));
    }
    let mean_at = |t: usize| mean_distance(w.samples.iter().map(|s| &s[t]), &w.nominal[t], dist);
    let means: Vec<f64> = (0..=steps).map(mean_at).collect();
    let per_step = means
        .windows(2)
        .map(|m| expected_ratio(m[0], m[1]))
        .collect::<Result<Vec<_>>>()?;
    let expected = expected_ratio(means[0], means[steps])?;
    let maximal = maximal_ratio(
        w.samples.iter().map(|s| (&s[0], &s[steps])),
        &w.nominal[0],
        &w.nominal[steps],
        dist,
    )?;
    Ok((expected, maximal, per_step))
}

/// Builds the profile from rollouts of every world; `worlds[0]` must be the
/// nominal model. Real-world metrics are maxima over all worlds including
/// the nominal one; ties go to the lowest world index.
pub fn profile_from_worlds<S, D>(worlds: &[WorldRollouts<S>], dist: D) -> Result<DivergenceProfile>
where
    D: Fn(&S, &S) -> f64,
{
    let per_world = worlds
        .iter()
        .map(|w| world_metrics(w, &dist))
        .collect::<Result<Vec<_>>>()?;
    let (nominal_e, nominal_m, _) = per_world
        .first()
        .ok_or_else(|| Error::DegenerateInput("no worlds".into()))?;

    let mut worst = 0;
    for (j, (e, _, _)) in per_world.iter().enumerate() {
        if *e > per_world[worst].0 {
            worst = j;
        }
    }
    let max_m = per_world.iter().map(|w| w.1).fold(f64::NEG_INFINITY, f64::max);
    Ok(DivergenceProfile {
        per_step_expected: per_world[worst].2.clone(),
        path_expected_nominal: *nominal_e,
        path_maximal_nominal: *nominal_m,
        path_expected_real: per_world[worst].0,
        path_maximal_real: max_m,
        n_samples: worlds[0].samples.len(),
        n_worlds: worlds.len() - 1,
        worst_world: worst,
        world_expected: per_world.iter().map(|w| w.0).collect(),
        world_maximal: per_world.iter().map(|w| w.1).collect(),
    })
}

/// Product of the per-step metrics over steps `p..q`. A segment is robust
/// iff this is strictly below one.
pub fn segment_metric(profile: &DivergenceProfile, p: usize, q: usize) -> Result<f64> {
    segment_product(&profile.per_step_expected, p, q)
}

pub fn segment_product(per_step: &[f64], p: usize, q: usize) -> Result<f64> {
    if p >= q || q > per_step.len() {
        return Err(Error::Index(format!(
            "segment ({p}, {q}) is not within 0 <= p < q <= {}",
            per_step.len()
        )));
    }
    Ok(per_step[p..q].iter().product())
}

/// Sampling configuration for [`compute_metrics`].
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct MetricSettings {
    pub n_samples: usize,
    pub n_worlds: usize,
    pub bounds: ParameterBounds,
    pub initial_noise: NoiseSpec,
    pub distance: DistanceWeights,
}

impl Default for MetricSettings {
    fn default() -> Self {
        MetricSettings {
            n_samples: 4,
            n_worlds: 4,
            bounds: ParameterBounds::default(),
            initial_noise: NoiseSpec::initial_state(),
            distance: DistanceWeights::default(),
        }
    }
}

impl MetricSettings {
    pub fn validate(&self) -> Result<()> {
        if self.n_samples < 2 || self.n_worlds < 1 {
            return Err(Error::Config(format!(
                "need at least 2 samples and 1 world (got {} and {})",
                self.n_samples, self.n_worlds
            )));
        }
        self.bounds.validate()?;
        self.distance.validate()
    }

    /// Rollouts performed by one metric computation when the nominal-world
    /// nominal trajectory is already known.
    pub fn rollouts_per_evaluation(&self) -> usize {
        (self.n_worlds + 1) * (self.n_samples + 1) - 1
    }
}

/// Rolls out the nominal controls from `x0` and from `N_c` perturbed copies
/// of it, in the nominal world and in `N_w` sampled realizations, and
/// reduces the results to a [`DivergenceProfile`].
///
/// All random draws happen up front on the calling thread; the rollouts
/// themselves run in parallel and are reduced in a fixed order, so the
/// result does not depend on the thread count.
pub fn compute_metrics<R: Rng + ?Sized>(
    sim: &Simulator<'_>,
    x0: &SystemState,
    controls: &[Control],
    settings: &MetricSettings,
    dt: f64,
    rng: &mut R,
) -> Result<DivergenceProfile> {
    compute_metrics_reusing(sim, x0, controls, None, settings, dt, rng).map(|(p, _)| p)
}

/// Same as [`compute_metrics`], reusing an already computed nominal-world
/// nominal trajectory. Also returns the number of rollouts simulated.
pub(crate) fn compute_metrics_reusing<R: Rng + ?Sized>(
    sim: &Simulator<'_>,
    x0: &SystemState,
    controls: &[Control],
    nominal: Option<&Trajectory>,
    settings: &MetricSettings,
    dt: f64,
    rng: &mut R,
) -> Result<(DivergenceProfile, usize)> {
    settings.validate()?;
    let scene = sim.scene();
    let mut worlds = vec![WorldRealization::nominal(scene)];
    worlds.extend(
        (1..=settings.n_worlds)
            .map(|id| sample_world_realization(&settings.bounds, scene.objects.len(), id, rng)),
    );
    let starts = sample_initial_states(scene, x0, &settings.initial_noise, settings.n_samples, rng);

    // Job (w, 0) is the nominal start in world w, (w, i) sample i - 1.
    let jobs: Vec<(usize, usize)> = (0..worlds.len())
        .flat_map(|w| (0..=starts.len()).map(move |i| (w, i)))
        .filter(|&(w, i)| !(w == 0 && i == 0 && nominal.is_some()))
        .collect();
    let results: Vec<Result<Trajectory>> = jobs
        .par_iter()
        .map(|&(w, i)| {
            let start = if i == 0 { x0 } else { &starts[i - 1] };
            sim.rollout(start, controls, &worlds[w], dt)
        })
        .collect();
    let rollouts = results.len();

    let mut results = results.into_iter();
    let mut grouped = Vec::with_capacity(worlds.len());
    for w in 0..worlds.len() {
        let nominal_traj = match (w, nominal) {
            (0, Some(t)) => t.clone(),
            _ => results.next().expect("job count")?,
        };
        let samples = (0..starts.len())
            .map(|_| results.next().expect("job count"))
            .collect::<Result<Vec<_>>>()?;
        grouped.push(WorldRollouts {
            nominal: nominal_traj,
            samples,
        });
    }
    let weights = settings.distance;
    let profile = profile_from_worlds(&grouped, |a, b| state_distance(a, b, &weights))?;
    Ok((profile, rollouts))
}
