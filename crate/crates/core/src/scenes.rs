//! Small hand-built scenes used by the examples and tests.

use std::f64::consts::FRAC_PI_2;

use crate::geometry::{Pose2, Rect};
use crate::world::{Gripper, ObjectSpec, SceneDescription, Shape};

pub const SHELF: Rect = Rect {
    min: [-0.3, 0.0],
    max: [0.3, 0.45],
};

/// Back and side walls of the shelf; the front edge (low y) is open.
pub fn shelf_walls(b: &Rect) -> Vec<[[f64; 2]; 2]> {
    vec![
        [[b.min[0], b.max[1]], [b.max[0], b.max[1]]],
        [[b.min[0], b.min[1]], [b.min[0], b.max[1]]],
        [[b.max[0], b.min[1]], [b.max[0], b.max[1]]],
    ]
}

pub fn disc(x: f64, y: f64, radius: f64) -> ObjectSpec {
    ObjectSpec {
        shape: Shape::Disc { radius },
        nominal_mass: 0.65,
        nominal_friction: 0.3,
        nominal_pose: Pose2::new(x, y, 0.0),
    }
}

pub fn block(x: f64, y: f64, theta: f64, half_x: f64, half_y: f64) -> ObjectSpec {
    ObjectSpec {
        shape: Shape::Box { half_x, half_y },
        nominal_mass: 0.65,
        nominal_friction: 0.3,
        nominal_pose: Pose2::new(x, y, theta),
    }
}

/// Gripper at the open front of the shelf, facing into it.
pub fn robot_start() -> Pose2 {
    Pose2::new(0.0, 0.03, FRAC_PI_2)
}

fn shelf_scene(objects: Vec<ObjectSpec>, target: usize) -> SceneDescription {
    SceneDescription {
        boundary: SHELF,
        walls: shelf_walls(&SHELF),
        objects,
        robot_start: robot_start(),
        target_object: target,
        grasp_offset: [0.04, 0.0],
        gripper: Gripper::default(),
    }
}

/// One target disc of radius 0.03 m at `(x, y)`.
pub fn single_disc_scene(x: f64, y: f64) -> SceneDescription {
    shelf_scene(vec![disc(x, y, 0.03)], 0)
}

/// Target disc behind a disc and a box.
pub fn demo_scene() -> SceneDescription {
    shelf_scene(
        vec![
            disc(0.0, 0.34, 0.03),
            disc(-0.01, 0.22, 0.035),
            block(0.075, 0.24, 0.3, 0.03, 0.025),
        ],
        0,
    )
}

/// Free-space reaching toy: a small disc 0.12 m straight ahead of point G.
pub fn reaching_toy() -> SceneDescription {
    let mut scene = shelf_scene(vec![disc(0.0, 0.26, 0.02)], 0);
    scene.robot_start = Pose2::new(0.0, 0.1, FRAC_PI_2);
    scene
}
