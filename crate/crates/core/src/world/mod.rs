//! Planar shelf world: scene description, system state, uncertain physics
//! parameters and the contact dynamics that advance it.

mod params;
mod physics;
mod scene;
mod state;

pub use params::{
    sample_initial_states, sample_world_realization, Interval, NoiseSpec, ObjectParams,
    ParameterBounds, WorldRealization,
};
pub use physics::{check_static_collision, rollout, PhysicsConfig, Simulator};
pub use scene::{Gripper, ObjectSpec, SceneDescription, Shape};
pub use state::{
    Control, ControlLimits, ControlSequence, ObjectState, SystemState, Trajectory, Twist2,
    CONTROL_DIM,
};
