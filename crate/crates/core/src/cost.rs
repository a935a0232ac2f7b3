//! Task objective for reaching in clutter, the robust objective built on
//! top of it, and feasibility checks.

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::metrics::{state_distance, DistanceWeights};
use crate::world::{check_static_collision, Control, ControlLimits, SceneDescription, SystemState};

/// Below this gripper-to-target distance the heading term is dropped.
const ALIGNMENT_EPS: f64 = 1e-6;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ObjectiveWeights {
    /// Control change (acceleration).
    pub v_a: f64,
    /// Robot contact with static geometry.
    pub v_c: f64,
    /// Disturbance of movable objects.
    pub v_d: f64,
    /// Toppled objects.
    pub v_y: f64,
    /// Heading misalignment in the goal cost.
    pub v_phi: f64,
    /// Terminal cost.
    pub v_f: f64,
    pub v_e: f64,
    pub v_m: f64,
    pub v_j: f64,
    /// Terminal set threshold.
    pub alpha: f64,
    /// Total cost threshold.
    pub beta: f64,
    /// Norm used when a desired terminal state is given.
    pub terminal_distance: DistanceWeights,
}

impl Default for ObjectiveWeights {
    fn default() -> Self {
        ObjectiveWeights {
            v_a: 0.001,
            v_c: 200.0,
            v_d: 1000.0,
            v_y: 200.0,
            v_phi: 0.019,
            v_f: 10.0,
            v_e: 2.0,
            v_m: 0.5,
            v_j: 1.0,
            alpha: 10.0,
            beta: 50.0,
            terminal_distance: DistanceWeights::default(),
        }
    }
}

impl ObjectiveWeights {
    pub fn validate(&self) -> Result<()> {
        let named = [
            ("v_a", self.v_a),
            ("v_c", self.v_c),
            ("v_d", self.v_d),
            ("v_y", self.v_y),
            ("v_phi", self.v_phi),
            ("v_f", self.v_f),
            ("v_e", self.v_e),
            ("v_m", self.v_m),
            ("v_j", self.v_j),
        ];
        for (name, v) in named {
            if !(v >= 0.0) || !v.is_finite() {
                return Err(Error::Config(format!("weight {name} = {v} must be finite and >= 0")));
            }
        }
        if !(self.alpha > 0.0) || !(self.beta > 0.0) {
            return Err(Error::Config("alpha and beta must be > 0".into()));
        }
        self.terminal_distance.validate()
    }
}

/// Weighted components of one running-cost term, before weighting.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct StepCost {
    pub accel: f64,
    pub collision: f64,
    pub disturbance: f64,
    pub toppled: f64,
    pub total: f64,
}

fn disturbance(a: &SystemState, b: &SystemState) -> f64 {
    a.objects
        .iter()
        .zip(&b.objects)
        .map(|(p, q)| {
            let d = [
                q.pose.x - p.pose.x,
                q.pose.y - p.pose.y,
                crate::geometry::wrap_angle(q.pose.theta - p.pose.theta),
                q.velocity.vx - p.velocity.vx,
                q.velocity.vy - p.velocity.vy,
                q.velocity.omega - p.velocity.omega,
            ];
            d.iter().map(|v| v * v).sum::<f64>()
        })
        .sum()
}

/// Running cost of the transition `x_t -> x_t1` under `u_t`, with the
/// previous control `u_prev`.
pub fn running_cost_terms(
    x_t: &SystemState,
    x_t1: &SystemState,
    u_prev: &Control,
    u_t: &Control,
    scene: &SceneDescription,
    w: &ObjectiveWeights,
) -> StepCost {
    let accel = u_t.squared_distance(u_prev);
    let collision = if check_static_collision(scene, x_t1) { 1.0 } else { 0.0 };
    let dist = disturbance(x_t, x_t1);
    let toppled = x_t1.toppled_count() as f64;
    StepCost {
        accel,
        collision,
        disturbance: dist,
        toppled,
        total: w.v_a * accel + w.v_c * collision + w.v_d * dist + w.v_y * toppled,
    }
}

pub fn running_cost(
    x_t: &SystemState,
    x_t1: &SystemState,
    u_prev: &Control,
    u_t: &Control,
    scene: &SceneDescription,
    w: &ObjectiveWeights,
) -> f64 {
    running_cost_terms(x_t, x_t1, u_prev, u_t, scene, w).total
}

/// Squared distance from the grasp point to the target centre plus the
/// weighted squared angle between the gripper heading and that direction.
pub fn goal_cost(x_n: &SystemState, scene: &SceneDescription, v_phi: f64) -> f64 {
    let g = scene.grasp_point(&x_n.robot_pose);
    let o = x_n.objects[scene.target_object].pose.position();
    let r = o - g;
    let d = r.norm();
    if d < ALIGNMENT_EPS {
        return d * d;
    }
    let cos = (x_n.robot_pose.heading().dot(&r) / d).clamp(-1.0, 1.0);
    let phi = cos.acos();
    d * d + v_phi * phi * phi
}

/// Squared distance to `desired` if given, the goal cost otherwise.
pub fn terminal_cost(
    x_n: &SystemState,
    scene: &SceneDescription,
    desired: Option<&SystemState>,
    w: &ObjectiveWeights,
) -> f64 {
    match desired {
        Some(d) => state_distance(d, x_n, &w.terminal_distance).powi(2),
        None => goal_cost(x_n, scene, w.v_phi),
    }
}

/// Term-by-term cost of a trajectory.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct CostBreakdown {
    pub steps: Vec<StepCost>,
    /// Unweighted terminal cost.
    pub terminal: f64,
    /// `v_f * terminal + Σ steps.total`.
    pub total: f64,
}

pub fn cost_breakdown(
    states: &[SystemState],
    controls: &[Control],
    scene: &SceneDescription,
    w: &ObjectiveWeights,
    desired: Option<&SystemState>,
) -> Result<CostBreakdown> {
    if states.len() != controls.len() + 1 {
        return Err(Error::DegenerateInput(format!(
            "{} states for {} controls",
            states.len(),
            controls.len()
        )));
    }
    let mut u_prev = Control::ZERO;
    let mut steps = Vec::with_capacity(controls.len());
    for (t, u) in controls.iter().enumerate() {
        steps.push(running_cost_terms(&states[t], &states[t + 1], &u_prev, u, scene, w));
        u_prev = *u;
    }
    let terminal = terminal_cost(states.last().expect("non-empty"), scene, desired, w);
    let total = w.v_f * terminal + steps.iter().map(|s| s.total).sum::<f64>();
    Ok(CostBreakdown {
        steps,
        terminal,
        total,
    })
}

/// `v_f * L_N(x_N) + Σ_t L_t`.
pub fn trajectory_cost(
    states: &[SystemState],
    controls: &[Control],
    scene: &SceneDescription,
    w: &ObjectiveWeights,
    desired: Option<&SystemState>,
) -> Result<f64> {
    cost_breakdown(states, controls, scene, w, desired).map(|b| b.total)
}

pub fn robust_cost(j: f64, e_expected: f64, e_maximal: f64, w: &ObjectiveWeights) -> f64 {
    w.v_e * e_expected * e_expected + w.v_m * e_maximal * e_maximal + w.v_j * j
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Infeasibility {
    TerminalSet,
    ControlBounds,
    CostThreshold,
    Toppled,
    StaticCollision,
}

impl fmt::Display for Infeasibility {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Infeasibility::TerminalSet => "terminal set",
            Infeasibility::ControlBounds => "control bounds",
            Infeasibility::CostThreshold => "cost threshold",
            Infeasibility::Toppled => "toppled object",
            Infeasibility::StaticCollision => "static collision",
        })
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct Feasibility {
    pub feasible: bool,
    /// Every violated condition, in a fixed order.
    pub reasons: Vec<Infeasibility>,
}

impl Feasibility {
    pub fn reason(&self) -> Option<Infeasibility> {
        self.reasons.first().copied()
    }
}

/// Feasibility from an already computed cost breakdown.
pub fn assess_feasibility(
    states: &[SystemState],
    controls: &[Control],
    breakdown: &CostBreakdown,
    scene: &SceneDescription,
    w: &ObjectiveWeights,
    limits: &ControlLimits,
) -> Feasibility {
    let mut reasons = Vec::new();
    if !(breakdown.terminal <= w.alpha) {
        reasons.push(Infeasibility::TerminalSet);
    }
    if !controls.iter().all(|u| limits.contains(u)) {
        reasons.push(Infeasibility::ControlBounds);
    }
    if !(breakdown.total < w.beta) {
        reasons.push(Infeasibility::CostThreshold);
    }
    if states.iter().any(|x| x.toppled_count() > 0) {
        reasons.push(Infeasibility::Toppled);
    }
    let start_collides = states.first().is_some_and(|x| check_static_collision(scene, x));
    if start_collides || breakdown.steps.iter().any(|s| s.collision > 0.0) {
        reasons.push(Infeasibility::StaticCollision);
    }
    Feasibility {
        feasible: reasons.is_empty(),
        reasons,
    }
}

pub fn is_feasible(
    states: &[SystemState],
    controls: &[Control],
    scene: &SceneDescription,
    w: &ObjectiveWeights,
    limits: &ControlLimits,
    desired: Option<&SystemState>,
) -> Result<Feasibility> {
    let b = cost_breakdown(states, controls, scene, w, desired)?;
    Ok(assess_feasibility(states, controls, &b, scene, w, limits))
}
