//! Physics-parameter uncertainty: bounds, sampled world realizations and
//! perturbed initial states.

use rand::Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

use super::scene::SceneDescription;
use super::state::SystemState;

/// Closed interval, serialized as `[lo, hi]`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(from = "[f64; 2]", into = "[f64; 2]")]
pub struct Interval {
    pub lo: f64,
    pub hi: f64,
}

impl From<[f64; 2]> for Interval {
    fn from(v: [f64; 2]) -> Self {
        Interval { lo: v[0], hi: v[1] }
    }
}

impl From<Interval> for [f64; 2] {
    fn from(i: Interval) -> Self {
        [i.lo, i.hi]
    }
}

impl Interval {
    pub const fn new(lo: f64, hi: f64) -> Self {
        Interval { lo, hi }
    }

    pub const fn point(v: f64) -> Self {
        Interval { lo: v, hi: v }
    }

    pub fn contains(&self, v: f64) -> bool {
        v >= self.lo && v <= self.hi
    }

    pub fn midpoint(&self) -> f64 {
        0.5 * (self.lo + self.hi)
    }

    fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        if self.lo == self.hi {
            self.lo
        } else {
            rng.random_range(self.lo..=self.hi)
        }
    }
}

/// Bounds on the uncertain per-object physics parameters. Size is a scalar
/// multiplier on the nominal shape dimensions.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ParameterBounds {
    pub mass: Interval,
    pub friction: Interval,
    pub size_scale: Interval,
}

impl Default for ParameterBounds {
    fn default() -> Self {
        ParameterBounds {
            mass: Interval::new(0.5, 0.8),
            friction: Interval::new(0.2, 0.4),
            size_scale: Interval::new(0.95, 1.05),
        }
    }
}

impl ParameterBounds {
    /// Bounds collapsed onto single values.
    pub fn degenerate(mass: f64, friction: f64, size_scale: f64) -> Self {
        ParameterBounds {
            mass: Interval::point(mass),
            friction: Interval::point(friction),
            size_scale: Interval::point(size_scale),
        }
    }

    pub fn validate(&self) -> Result<()> {
        for (name, i) in [
            ("mass", self.mass),
            ("friction", self.friction),
            ("size_scale", self.size_scale),
        ] {
            if !(i.lo <= i.hi) || !(i.lo > 0.0) || !i.hi.is_finite() {
                return Err(Error::Config(format!(
                    "{name} bounds [{}, {}] must satisfy 0 < lo <= hi",
                    i.lo, i.hi
                )));
            }
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ObjectParams {
    pub mass: f64,
    pub friction: f64,
    pub size_scale: f64,
}

/// One concrete assignment of physics parameters. Realization 0 is the
/// nominal model.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct WorldRealization {
    pub id: usize,
    pub objects: Vec<ObjectParams>,
}

impl WorldRealization {
    pub fn nominal(scene: &SceneDescription) -> Self {
        WorldRealization {
            id: 0,
            objects: scene
                .objects
                .iter()
                .map(|o| ObjectParams {
                    mass: o.nominal_mass,
                    friction: o.nominal_friction,
                    size_scale: 1.0,
                })
                .collect(),
        }
    }
}

/// Draws every parameter of every object independently and uniformly from
/// its interval.
pub fn sample_world_realization<R: Rng + ?Sized>(
    bounds: &ParameterBounds,
    object_count: usize,
    id: usize,
    rng: &mut R,
) -> WorldRealization {
    let objects = (0..object_count)
        .map(|_| ObjectParams {
            mass: bounds.mass.sample(rng),
            friction: bounds.friction.sample(rng),
            size_scale: bounds.size_scale.sample(rng),
        })
        .collect();
    WorldRealization { id, objects }
}

/// Gaussian uncertainty on object poses.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct NoiseSpec {
    /// Standard deviation of each position coordinate, meters.
    pub sigma_pos: f64,
    /// Standard deviation of the heading, radians.
    pub sigma_theta: f64,
}

impl NoiseSpec {
    pub const ZERO: NoiseSpec = NoiseSpec {
        sigma_pos: 0.0,
        sigma_theta: 0.0,
    };

    /// Initial-state uncertainty used for divergence sampling.
    pub fn initial_state() -> Self {
        NoiseSpec {
            sigma_pos: 0.01,
            sigma_theta: 5f64.to_radians(),
        }
    }

    /// Motion-capture style observation noise.
    pub fn observation() -> Self {
        NoiseSpec {
            sigma_pos: 0.005,
            sigma_theta: 2f64.to_radians(),
        }
    }

    /// Perturbs object poses of `state` in place. Disc headings are left
    /// alone: a disc's orientation is unobservable and has no effect on its
    /// contacts.
    pub fn perturb<R: Rng + ?Sized>(
        &self,
        scene: &SceneDescription,
        state: &mut SystemState,
        rng: &mut R,
    ) {
        let pos = gaussian(self.sigma_pos);
        let ang = gaussian(self.sigma_theta);
        for (o, spec) in state.objects.iter_mut().zip(&scene.objects) {
            o.pose.x += pos.sample(rng);
            o.pose.y += pos.sample(rng);
            if !spec.shape.is_disc() {
                o.pose.theta = crate::geometry::wrap_angle(o.pose.theta + ang.sample(rng));
            }
        }
    }
}

fn gaussian(sigma: f64) -> Normal<f64> {
    Normal::new(0.0, sigma.max(0.0)).expect("finite standard deviation")
}

/// Draws `n` initial states around `x0`. Only object poses are perturbed;
/// the robot pose and all velocities are copied unchanged.
pub fn sample_initial_states<R: Rng + ?Sized>(
    scene: &SceneDescription,
    x0: &SystemState,
    noise: &NoiseSpec,
    n: usize,
    rng: &mut R,
) -> Vec<SystemState> {
    (0..n)
        .map(|_| {
            let mut s = x0.clone();
            noise.perturb(scene, &mut s, rng);
            s
        })
        .collect()
}
