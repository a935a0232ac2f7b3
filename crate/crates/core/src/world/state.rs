use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::geometry::{wrap_angle, Pose2};

use super::scene::SceneDescription;

/// Planar velocity `(ẋ, ẏ, θ̇)` in the world frame.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(from = "[f64; 3]", into = "[f64; 3]")]
pub struct Twist2 {
    pub vx: f64,
    pub vy: f64,
    pub omega: f64,
}

impl From<[f64; 3]> for Twist2 {
    fn from(v: [f64; 3]) -> Self {
        Twist2 {
            vx: v[0],
            vy: v[1],
            omega: v[2],
        }
    }
}

impl From<Twist2> for [f64; 3] {
    fn from(t: Twist2) -> Self {
        [t.vx, t.vy, t.omega]
    }
}

impl Twist2 {
    pub fn is_finite(&self) -> bool {
        self.vx.is_finite() && self.vy.is_finite() && self.omega.is_finite()
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct ObjectState {
    pub pose: Pose2,
    pub velocity: Twist2,
    #[serde(default)]
    pub toppled: bool,
}

/// Poses and velocities of the gripper and every movable object.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct SystemState {
    pub robot_pose: Pose2,
    pub robot_velocity: Twist2,
    pub objects: Vec<ObjectState>,
}

impl SystemState {
    /// Scene at rest in its nominal configuration.
    pub fn initial(scene: &SceneDescription) -> Self {
        SystemState {
            robot_pose: scene.robot_start,
            robot_velocity: Twist2::default(),
            objects: scene
                .objects
                .iter()
                .map(|o| ObjectState {
                    pose: o.nominal_pose,
                    ..Default::default()
                })
                .collect(),
        }
    }

    pub fn is_finite(&self) -> bool {
        self.robot_pose.is_finite()
            && self.robot_velocity.is_finite()
            && self
                .objects
                .iter()
                .all(|o| o.pose.is_finite() && o.velocity.is_finite())
    }

    pub fn toppled_count(&self) -> usize {
        self.objects.iter().filter(|o| o.toppled).count()
    }

    /// Applies the same offset to the robot and every object.
    pub fn translated(&self, dx: f64, dy: f64) -> Self {
        let mut out = self.clone();
        out.robot_pose.x += dx;
        out.robot_pose.y += dy;
        for o in &mut out.objects {
            o.pose.x += dx;
            o.pose.y += dy;
        }
        out
    }

    pub(crate) fn wrap_angles(&mut self) {
        self.robot_pose.theta = wrap_angle(self.robot_pose.theta);
        for o in &mut self.objects {
            o.pose.theta = wrap_angle(o.pose.theta);
        }
    }
}

/// Commanded gripper velocity `(v_x, v_y, ω)` in the world frame, held for
/// one control interval.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(from = "[f64; 3]", into = "[f64; 3]")]
pub struct Control {
    pub vx: f64,
    pub vy: f64,
    pub omega: f64,
}

pub const CONTROL_DIM: usize = 3;

impl From<[f64; 3]> for Control {
    fn from(v: [f64; 3]) -> Self {
        Control::new(v[0], v[1], v[2])
    }
}

impl From<Control> for [f64; 3] {
    fn from(c: Control) -> Self {
        c.to_array()
    }
}

impl Control {
    pub const ZERO: Control = Control {
        vx: 0.0,
        vy: 0.0,
        omega: 0.0,
    };

    pub const fn new(vx: f64, vy: f64, omega: f64) -> Self {
        Control { vx, vy, omega }
    }

    pub fn to_array(&self) -> [f64; CONTROL_DIM] {
        [self.vx, self.vy, self.omega]
    }

    pub fn is_finite(&self) -> bool {
        self.to_array().iter().all(|v| v.is_finite())
    }

    pub fn squared_distance(&self, other: &Control) -> f64 {
        self.to_array()
            .iter()
            .zip(other.to_array())
            .map(|(a, b)| (a - b) * (a - b))
            .sum()
    }
}

impl std::ops::Add for Control {
    type Output = Control;

    fn add(self, rhs: Control) -> Control {
        Control::new(self.vx + rhs.vx, self.vy + rhs.vy, self.omega + rhs.omega)
    }
}

pub type ControlSequence = Vec<Control>;
pub type Trajectory = Vec<SystemState>;

/// Per-component control limits `[b_l, b_u]`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ControlLimits {
    pub lower: [f64; CONTROL_DIM],
    pub upper: [f64; CONTROL_DIM],
}

impl Default for ControlLimits {
    fn default() -> Self {
        ControlLimits::symmetric(PI)
    }
}

impl ControlLimits {
    pub fn symmetric(bound: f64) -> Self {
        ControlLimits {
            lower: [-bound; CONTROL_DIM],
            upper: [bound; CONTROL_DIM],
        }
    }

    pub fn contains(&self, u: &Control) -> bool {
        u.to_array()
            .iter()
            .enumerate()
            .all(|(k, v)| *v >= self.lower[k] && *v <= self.upper[k])
    }

    pub fn clamp(&self, u: &Control) -> Control {
        let a = u.to_array();
        let c = |k: usize| a[k].clamp(self.lower[k], self.upper[k]);
        Control::new(c(0), c(1), c(2))
    }
}
