use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{collide, Collider, Polygon, Pose2, Rect, Vec2};
use crate::scenes::{robot_start, shelf_walls, SHELF};
use crate::world::{Gripper, ObjectSpec, SceneDescription, Shape};

/// Knobs of the cluttered-shelf generator. Lengths in metres.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct GeneratorParams {
    pub boundary: Rect,
    pub robot_start: Pose2,
    pub min_objects: usize,
    pub max_objects: usize,
    /// Objects that must cover the start-to-target ray.
    pub min_blockers: usize,
    pub target_radius: [f64; 2],
    /// Range of the target's y coordinate.
    pub target_depth: [f64; 2],
    /// Range of the target's x coordinate.
    pub target_lateral: [f64; 2],
    pub disc_radius: [f64; 2],
    pub box_half: [f64; 2],
    pub box_probability: f64,
    /// Lateral offset of a blocker from the ray, as a fraction of the
    /// radius of its inscribed circle; values below one keep it on the ray.
    pub blocker_offset: [f64; 2],
    /// Minimum gap between bounding circles and to the boundary.
    pub clearance: f64,
    pub mass: f64,
    pub friction: f64,
    pub max_attempts: usize,
}

impl Default for GeneratorParams {
    fn default() -> Self {
        GeneratorParams {
            boundary: SHELF,
            robot_start: robot_start(),
            min_objects: 3,
            max_objects: 10,
            min_blockers: 2,
            target_radius: [0.025, 0.035],
            target_depth: [0.3, 0.38],
            target_lateral: [-0.1, 0.1],
            disc_radius: [0.025, 0.04],
            box_half: [0.02, 0.035],
            box_probability: 0.5,
            blocker_offset: [0.0, 0.8],
            clearance: 0.005,
            mass: 0.65,
            friction: 0.3,
            max_attempts: 1000,
        }
    }
}

fn ordered(r: &[f64; 2], what: &str) -> Result<()> {
    if r[0] <= r[1] && r[0].is_finite() && r[1].is_finite() {
        Ok(())
    } else {
        Err(Error::Config(format!("generator {what} range {r:?} is not ordered")))
    }
}

impl GeneratorParams {
    pub fn validate(&self) -> Result<()> {
        if self.min_objects < 1 + self.min_blockers || self.min_objects > self.max_objects {
            return Err(Error::Config(format!(
                "generator object count [{}, {}] cannot hold the target and {} blockers",
                self.min_objects, self.max_objects, self.min_blockers
            )));
        }
        ordered(&self.target_radius, "target_radius")?;
        ordered(&self.target_depth, "target_depth")?;
        ordered(&self.target_lateral, "target_lateral")?;
        ordered(&self.disc_radius, "disc_radius")?;
        ordered(&self.box_half, "box_half")?;
        ordered(&self.blocker_offset, "blocker_offset")?;
        if self.target_radius[0] <= 0.0 || self.disc_radius[0] <= 0.0 || self.box_half[0] <= 0.0 {
            return Err(Error::Config("generator sizes must be positive".into()));
        }
        if !(0.0..=1.0).contains(&self.box_probability) {
            return Err(Error::Config("box_probability must lie in [0, 1]".into()));
        }
        if self.blocker_offset[0] < 0.0 || self.blocker_offset[1] >= 1.0 {
            return Err(Error::Config("blocker_offset must lie in [0, 1)".into()));
        }
        if !(self.clearance >= 0.0 && self.mass > 0.0 && self.friction >= 0.0) {
            return Err(Error::Config("clearance, mass and friction must be valid".into()));
        }
        if self.max_attempts == 0 {
            return Err(Error::Config("max_attempts must be positive".into()));
        }
        Ok(())
    }
}

fn uniform<R: Rng + ?Sized>(rng: &mut R, r: [f64; 2]) -> f64 {
    if r[0] == r[1] {
        r[0]
    } else {
        rng.random_range(r[0]..r[1])
    }
}

struct Placer<'a> {
    params: &'a GeneratorParams,
    gripper: Vec<Collider>,
    placed: Vec<ObjectSpec>,
    attempts: usize,
}

impl Placer<'_> {
    fn fits(&self, shape: &Shape, pose: &Pose2) -> bool {
        let b = &self.params.boundary;
        let r = shape.bounding_radius() + self.params.clearance;
        let inside = pose.x - r >= b.min[0]
            && pose.x + r <= b.max[0]
            && pose.y - r >= b.min[1]
            && pose.y + r <= b.max[1];
        if !inside {
            return false;
        }
        let free = self.placed.iter().all(|o| {
            let d = (o.nominal_pose.position() - pose.position()).norm();
            d >= r + o.shape.bounding_radius()
        });
        let collider = shape.collider(pose);
        free && self.gripper.iter().all(|g| collide(g, &collider).is_none())
    }

    /// Draws poses from `propose` until one fits or the budget runs out.
    fn place<R: Rng + ?Sized>(
        &mut self,
        rng: &mut R,
        what: &str,
        mut propose: impl FnMut(&mut R) -> (Shape, Pose2),
    ) -> Result<()> {
        loop {
            if self.attempts >= self.params.max_attempts {
                return Err(Error::Generation(format!(
                    "could not place {what} within {} attempts",
                    self.params.max_attempts
                )));
            }
            self.attempts += 1;
            let (shape, pose) = propose(rng);
            if self.fits(&shape, &pose) {
                self.placed.push(ObjectSpec {
                    shape,
                    nominal_mass: self.params.mass,
                    nominal_friction: self.params.friction,
                    nominal_pose: pose,
                });
                return Ok(());
            }
        }
    }
}

/// Indices of non-target objects whose footprint the straight segment from
/// the robot start to the target centre passes through.
pub fn ray_blockers(scene: &SceneDescription) -> Vec<usize> {
    let target = scene.objects[scene.target_object].nominal_pose.position();
    let ray = Collider::Polygon(Polygon::segment(scene.robot_start.position(), target));
    scene
        .objects
        .iter()
        .enumerate()
        .filter(|(i, o)| {
            *i != scene.target_object && collide(&ray, &o.shape.collider(&o.nominal_pose)).is_some()
        })
        .map(|(i, _)| i)
        .collect()
}

/// Random shelf scene: a target disc at the back with at least
/// `min_blockers` objects on the straight line to it, plus free clutter.
/// Object 0 is the target.
pub fn generate_random_scene<R: Rng + ?Sized>(
    params: &GeneratorParams,
    rng: &mut R,
) -> Result<SceneDescription> {
    params.validate()?;
    let gripper = Gripper::default();
    let mut placer = Placer {
        params,
        gripper: gripper
            .parts(&params.robot_start)
            .into_iter()
            .map(Collider::Polygon)
            .collect(),
        placed: Vec::new(),
        attempts: 0,
    };
    let count = rng.random_range(params.min_objects..=params.max_objects);
    let start = params.robot_start.position();

    placer.place(rng, "the target", |rng| {
        let shape = Shape::Disc {
            radius: uniform(rng, params.target_radius),
        };
        let pose = Pose2::new(
            uniform(rng, params.target_lateral),
            uniform(rng, params.target_depth),
            0.0,
        );
        (shape, pose)
    })?;
    let target = placer.placed[0].nominal_pose.position();
    let target_r = placer.placed[0].shape.bounding_radius();
    let along = target - start;
    let length = along.norm();
    let dir = along / length;
    let normal = Vec2::new(-dir.y, dir.x);

    for _ in 0..params.min_blockers {
        placer.place(rng, "a blocker", |rng| {
            let shape = placer_shape(params, rng);
            let r = shape.bounding_radius();
            // Keep the blocker strictly shallower than the target.
            let far = length - target_r - r - params.clearance;
            let near = r + params.clearance;
            let s = if far > near {
                rng.random_range(near..far)
            } else {
                near
            };
            let side = if rng.random_bool(0.5) { 1.0 } else { -1.0 };
            let lateral = side * uniform(rng, params.blocker_offset) * inscribed(&shape);
            let c = start + dir * s + normal * lateral;
            let theta = rng.random_range(-std::f64::consts::PI..std::f64::consts::PI);
            let theta = if shape.is_disc() { 0.0 } else { theta };
            (shape, Pose2::new(c.x, c.y, theta))
        })?;
    }

    let b = params.boundary;
    while placer.placed.len() < count {
        placer.place(rng, "clutter", |rng| {
            let shape = placer_shape(params, rng);
            let theta = if shape.is_disc() {
                0.0
            } else {
                rng.random_range(-std::f64::consts::PI..std::f64::consts::PI)
            };
            let pose = Pose2::new(
                rng.random_range(b.min[0]..b.max[0]),
                rng.random_range(b.min[1]..b.max[1]),
                theta,
            );
            (shape, pose)
        })?;
    }

    let scene = SceneDescription {
        boundary: b,
        walls: shelf_walls(&b),
        objects: placer.placed,
        robot_start: params.robot_start,
        target_object: 0,
        grasp_offset: [0.04, 0.0],
        gripper,
    };
    scene.validate()?;
    let blockers = ray_blockers(&scene);
    if blockers.len() < params.min_blockers {
        return Err(Error::Generation(format!(
            "only {} objects block the target",
            blockers.len()
        )));
    }
    Ok(scene)
}

fn placer_shape<R: Rng + ?Sized>(params: &GeneratorParams, rng: &mut R) -> Shape {
    if rng.random_bool(params.box_probability) {
        Shape::Box {
            half_x: uniform(rng, params.box_half),
            half_y: uniform(rng, params.box_half),
        }
    } else {
        Shape::Disc {
            radius: uniform(rng, params.disc_radius),
        }
    }
}

/// Radius of the largest centred circle inside the shape.
fn inscribed(shape: &Shape) -> f64 {
    match *shape {
        Shape::Disc { radius } => radius,
        Shape::Box { half_x, half_y } => half_x.min(half_y),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn no_overlaps(scene: &SceneDescription) -> bool {
        let objs = &scene.objects;
        (0..objs.len()).all(|i| {
            (i + 1..objs.len()).all(|j| {
                let a = objs[i].shape.collider(&objs[i].nominal_pose);
                let b = objs[j].shape.collider(&objs[j].nominal_pose);
                collide(&a, &b).is_none()
            })
        })
    }

    #[test]
    fn three_objects_is_deterministic_and_overlap_free() {
        let params = GeneratorParams {
            min_objects: 3,
            max_objects: 3,
            ..Default::default()
        };
        let a = generate_random_scene(&params, &mut ChaCha8Rng::seed_from_u64(4)).unwrap();
        let b = generate_random_scene(&params, &mut ChaCha8Rng::seed_from_u64(4)).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.objects.len(), 3);
        assert!(no_overlaps(&a));
    }

    #[test]
    fn target_is_blocked_and_deepest_on_the_ray() {
        for seed in 0..30 {
            let scene = generate_random_scene(
                &GeneratorParams::default(),
                &mut ChaCha8Rng::seed_from_u64(seed),
            )
            .unwrap();
            assert!((3..=10).contains(&scene.objects.len()));
            assert!(no_overlaps(&scene));
            let blockers = ray_blockers(&scene);
            assert!(blockers.len() >= 2, "seed {seed}");
            let start = scene.robot_start.position();
            let target = scene.objects[0].nominal_pose.position();
            let target_dist = (target - start).norm();
            let shallower = blockers
                .iter()
                .filter(|&&i| (scene.objects[i].nominal_pose.position() - start).norm() < target_dist)
                .count();
            assert!(shallower >= 2, "seed {seed}");
        }
    }

    #[test]
    fn twenty_seeds_give_distinct_scenes() {
        let scenes: Vec<_> = (0..20)
            .map(|s| {
                generate_random_scene(&GeneratorParams::default(), &mut ChaCha8Rng::seed_from_u64(s))
                    .unwrap()
            })
            .collect();
        for i in 0..20 {
            for j in i + 1..20 {
                assert_ne!(scenes[i], scenes[j]);
            }
        }
    }

    #[test]
    fn impossible_layout_is_a_generation_error() {
        let params = GeneratorParams {
            disc_radius: [0.2, 0.2],
            box_probability: 0.0,
            ..Default::default()
        };
        let err = generate_random_scene(&params, &mut ChaCha8Rng::seed_from_u64(0)).unwrap_err();
        assert!(matches!(err, Error::Generation(_)));
    }
}
