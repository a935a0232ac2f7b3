//! Deterministic planar contact dynamics.
//!
//! The gripper is kinematic: it follows the commanded velocity exactly and
//! pushes objects through inelastic contact impulses with Coulomb friction.
//! Objects slide on the shelf surface and are slowed by ground friction.
//! Each control interval is integrated with a fixed number of substeps and a
//! fixed number of contact passes per substep, visiting contacts in a fixed
//! order, so identical inputs produce bit-identical outputs.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{collide, cross, cross_scalar, Collider, Contact, Polygon, Pose2, Vec2};

use super::params::WorldRealization;
use super::scene::{SceneDescription, Shape};
use super::state::{Control, ControlSequence, ObjectState, SystemState, Trajectory, Twist2};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PhysicsConfig {
    pub substeps: usize,
    pub contact_iterations: usize,
    pub gravity: f64,
}

impl Default for PhysicsConfig {
    fn default() -> Self {
        PhysicsConfig {
            substeps: 10,
            contact_iterations: 4,
            gravity: 9.81,
        }
    }
}

/// Per-object constants for one realization.
#[derive(Clone, Copy, Debug)]
struct Body {
    shape: Shape,
    inv_mass: f64,
    inv_inertia: f64,
    friction: f64,
    /// Angular deceleration per unit of `μ g`.
    spin_factor: f64,
}

impl Body {
    fn collider(&self, pose: &Pose2) -> Collider {
        self.shape.collider(pose)
    }
}

/// Velocity and mass properties of one side of a contact.
#[derive(Clone, Copy, Debug)]
struct Kinematics {
    pos: Vec2,
    v: Vec2,
    w: f64,
    inv_mass: f64,
    inv_inertia: f64,
}

impl Kinematics {
    const STATIC: Kinematics = Kinematics {
        pos: Vec2::new(0.0, 0.0),
        v: Vec2::new(0.0, 0.0),
        w: 0.0,
        inv_mass: 0.0,
        inv_inertia: 0.0,
    };

    fn of(o: &ObjectState, b: &Body) -> Self {
        Kinematics {
            pos: o.pose.position(),
            v: Vec2::new(o.velocity.vx, o.velocity.vy),
            w: o.velocity.omega,
            inv_mass: b.inv_mass,
            inv_inertia: b.inv_inertia,
        }
    }

    fn store(&self, o: &mut ObjectState) {
        o.pose.x = self.pos.x;
        o.pose.y = self.pos.y;
        o.velocity.vx = self.v.x;
        o.velocity.vy = self.v.y;
        o.velocity.omega = self.w;
    }

    fn point_velocity(&self, r: &Vec2) -> Vec2 {
        self.v + cross_scalar(self.w, r)
    }

    fn apply_impulse(&mut self, j: &Vec2, r: &Vec2) {
        self.v += j * self.inv_mass;
        self.w += self.inv_inertia * cross(r, j);
    }
}

/// Inelastic normal impulse, Coulomb friction impulse and full positional
/// projection, distributed by inverse mass. `c.normal` points from `a` to `b`.
fn solve_contact(a: &mut Kinematics, b: &mut Kinematics, c: &Contact, mu: f64) {
    let n = c.normal;
    let ra = c.point - a.pos;
    let rb = c.point - b.pos;
    let rel = b.point_velocity(&rb) - a.point_velocity(&ra);
    let vn = rel.dot(&n);
    if vn < 0.0 {
        let k = a.inv_mass
            + b.inv_mass
            + cross(&ra, &n).powi(2) * a.inv_inertia
            + cross(&rb, &n).powi(2) * b.inv_inertia;
        if k > 0.0 {
            let jn = -vn / k;
            a.apply_impulse(&(-n * jn), &ra);
            b.apply_impulse(&(n * jn), &rb);

            let rel = b.point_velocity(&rb) - a.point_velocity(&ra);
            let tangential = rel - n * rel.dot(&n);
            let speed = tangential.norm();
            if speed > 1e-12 {
                let t = tangential / speed;
                let kt = a.inv_mass
                    + b.inv_mass
                    + cross(&ra, &t).powi(2) * a.inv_inertia
                    + cross(&rb, &t).powi(2) * b.inv_inertia;
                let jt = (speed / kt).min(mu * jn);
                a.apply_impulse(&(t * jt), &ra);
                b.apply_impulse(&(-t * jt), &rb);
            }
        }
    }
    let total = a.inv_mass + b.inv_mass;
    if total > 0.0 {
        a.pos -= n * (c.depth * a.inv_mass / total);
        b.pos += n * (c.depth * b.inv_mass / total);
    }
}

fn ground_friction(o: &mut ObjectState, b: &Body, g: f64, h: f64) {
    let dv = b.friction * g * h;
    let speed = o.velocity.vx.hypot(o.velocity.vy);
    if speed <= dv {
        o.velocity.vx = 0.0;
        o.velocity.vy = 0.0;
    } else {
        let s = (speed - dv) / speed;
        o.velocity.vx *= s;
        o.velocity.vy *= s;
    }
    let dw = dv * b.spin_factor;
    if o.velocity.omega.abs() <= dw {
        o.velocity.omega = 0.0;
    } else {
        o.velocity.omega -= dw * o.velocity.omega.signum();
    }
}

/// Integrates the scene dynamics for one scene description.
#[derive(Clone, Debug)]
pub struct Simulator<'a> {
    scene: &'a SceneDescription,
    walls: Vec<Polygon>,
    config: PhysicsConfig,
}

impl<'a> Simulator<'a> {
    pub fn new(scene: &'a SceneDescription, config: PhysicsConfig) -> Self {
        Simulator {
            scene,
            walls: scene.wall_polygons(),
            config,
        }
    }

    pub fn scene(&self) -> &'a SceneDescription {
        self.scene
    }

    pub fn config(&self) -> &PhysicsConfig {
        &self.config
    }

    fn bodies(&self, world: &WorldRealization) -> Vec<Body> {
        self.scene
            .objects
            .iter()
            .zip(&world.objects)
            .map(|(spec, p)| {
                let shape = spec.shape.scaled(p.size_scale);
                let ipm = shape.inertia_per_mass();
                let lever = match shape {
                    Shape::Disc { radius } => 2.0 * radius / 3.0,
                    Shape::Box { half_x, half_y } => 0.77 * (0.5 * (half_x * half_x + half_y * half_y)).sqrt(),
                };
                Body {
                    shape,
                    inv_mass: 1.0 / p.mass,
                    inv_inertia: 1.0 / (p.mass * ipm),
                    friction: p.friction,
                    spin_factor: lever / ipm,
                }
            })
            .collect()
    }

    /// Advances `state` by `dt` seconds under `control` in the given world.
    pub fn step(
        &self,
        state: &SystemState,
        control: &Control,
        world: &WorldRealization,
        dt: f64,
    ) -> Result<SystemState> {
        if !(dt > 0.0) || !dt.is_finite() {
            return Err(Error::NumericDomain(format!("time step {dt} must be positive")));
        }
        if !state.is_finite() {
            return Err(Error::NumericDomain("state has non-finite components".into()));
        }
        if !control.is_finite() {
            return Err(Error::NumericDomain(format!("control {control:?} is not finite")));
        }
        let n = self.scene.objects.len();
        if state.objects.len() != n || world.objects.len() != n {
            return Err(Error::InvalidScene(format!(
                "scene has {n} objects but state has {} and realization {}",
                state.objects.len(),
                world.objects.len()
            )));
        }

        let bodies = self.bodies(world);
        let substeps = self.config.substeps.max(1);
        let h = dt / substeps as f64;
        let g = self.config.gravity;

        let mut s = state.clone();
        s.robot_velocity = Twist2 {
            vx: control.vx,
            vy: control.vy,
            omega: control.omega,
        };

        for _ in 0..substeps {
            s.robot_pose.x += control.vx * h;
            s.robot_pose.y += control.vy * h;
            s.robot_pose.theta += control.omega * h;

            for (o, b) in s.objects.iter_mut().zip(&bodies) {
                if o.toppled {
                    continue;
                }
                ground_friction(o, b, g, h);
                o.pose.x += o.velocity.vx * h;
                o.pose.y += o.velocity.vy * h;
                o.pose.theta += o.velocity.omega * h;
            }

            for _ in 0..self.config.contact_iterations {
                self.resolve_contacts(&mut s, &bodies, control);
            }

            for o in &mut s.objects {
                if !o.toppled && !self.scene.boundary.contains(&o.pose.position()) {
                    o.toppled = true;
                    o.velocity = Twist2::default();
                }
            }
        }
        s.wrap_angles();
        Ok(s)
    }

    fn resolve_contacts(&self, s: &mut SystemState, bodies: &[Body], control: &Control) {
        let robot = Kinematics {
            pos: s.robot_pose.position(),
            v: Vec2::new(control.vx, control.vy),
            w: control.omega,
            inv_mass: 0.0,
            inv_inertia: 0.0,
        };
        let parts = self.scene.gripper.parts(&s.robot_pose);

        for (o, b) in s.objects.iter_mut().zip(bodies) {
            if o.toppled {
                continue;
            }
            for part in &parts {
                if let Some(c) = collide(&Collider::Polygon(*part), &b.collider(&o.pose)) {
                    let mut k = Kinematics::of(o, b);
                    solve_contact(&mut robot.clone(), &mut k, &c, b.friction);
                    k.store(o);
                }
            }
        }

        let n = s.objects.len();
        for i in 0..n {
            for j in (i + 1)..n {
                let (head, tail) = s.objects.split_at_mut(j);
                let (oi, oj) = (&mut head[i], &mut tail[0]);
                if oi.toppled || oj.toppled {
                    continue;
                }
                let (bi, bj) = (&bodies[i], &bodies[j]);
                if let Some(c) = collide(&bi.collider(&oi.pose), &bj.collider(&oj.pose)) {
                    let mu = (bi.friction * bj.friction).sqrt();
                    let mut ki = Kinematics::of(oi, bi);
                    let mut kj = Kinematics::of(oj, bj);
                    solve_contact(&mut ki, &mut kj, &c, mu);
                    ki.store(oi);
                    kj.store(oj);
                }
            }
        }

        for (o, b) in s.objects.iter_mut().zip(bodies) {
            if o.toppled {
                continue;
            }
            for wall in &self.walls {
                if let Some(c) = collide(&b.collider(&o.pose), &Collider::Polygon(*wall)) {
                    let mut k = Kinematics::of(o, b);
                    solve_contact(&mut k, &mut Kinematics::STATIC.clone(), &c, b.friction);
                    k.store(o);
                }
            }
        }
    }

    /// Applies each control in turn; returns `N + 1` states starting at `x0`.
    pub fn rollout(
        &self,
        x0: &SystemState,
        controls: &[Control],
        world: &WorldRealization,
        dt: f64,
    ) -> Result<Trajectory> {
        let mut states = Vec::with_capacity(controls.len() + 1);
        states.push(x0.clone());
        for u in controls {
            let next = self.step(states.last().expect("non-empty"), u, world, dt)?;
            states.push(next);
        }
        Ok(states)
    }
}

/// Convenience wrapper around [`Simulator::rollout`].
pub fn rollout(
    scene: &SceneDescription,
    physics: &PhysicsConfig,
    x0: &SystemState,
    controls: &ControlSequence,
    world: &WorldRealization,
    dt: f64,
) -> Result<Trajectory> {
    Simulator::new(scene, *physics).rollout(x0, controls, world, dt)
}

/// True iff any gripper part strictly overlaps a wall, or the gripper origin
/// has left the shelf boundary.
pub fn check_static_collision(scene: &SceneDescription, state: &SystemState) -> bool {
    if !scene.boundary.contains(&state.robot_pose.position()) {
        return true;
    }
    let walls = scene.wall_polygons();
    scene.gripper.parts(&state.robot_pose).iter().any(|part| {
        walls
            .iter()
            .any(|w| collide(&Collider::Polygon(*part), &Collider::Polygon(*w)).is_some())
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::Rect;
    use crate::scenes::{demo_scene, single_disc_scene};
    use crate::world::WorldRealization;
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    fn sim(scene: &SceneDescription) -> Simulator<'_> {
        Simulator::new(scene, PhysicsConfig::default())
    }

    #[test]
    fn free_space_kinematics() {
        let mut scene = single_disc_scene(0.2, 0.2);
        scene.robot_start = Pose2::new(0.0, 0.0, 0.0);
        let x0 = SystemState::initial(&scene);
        let w = WorldRealization::nominal(&scene);
        let x1 = sim(&scene)
            .step(&x0, &Control::new(0.1, 0.0, 0.0), &w, 0.2)
            .unwrap();
        assert_relative_eq!(x1.robot_pose.x, 0.02, epsilon = 1e-15);
        assert_eq!(x1.robot_pose.y, 0.0);
        assert_eq!(x1.objects, x0.objects);
    }

    #[test]
    fn rest_is_a_fixed_point() {
        let scene = demo_scene();
        let x0 = SystemState::initial(&scene);
        let w = WorldRealization::nominal(&scene);
        let x1 = sim(&scene).step(&x0, &Control::ZERO, &w, 0.2).unwrap();
        assert_eq!(x1, x0);
    }

    #[test]
    fn rejects_non_finite() {
        let scene = demo_scene();
        let mut x0 = SystemState::initial(&scene);
        let w = WorldRealization::nominal(&scene);
        x0.objects[0].pose.x = f64::NAN;
        assert!(matches!(
            sim(&scene).step(&x0, &Control::ZERO, &w, 0.2),
            Err(Error::NumericDomain(_))
        ));
        let x0 = SystemState::initial(&scene);
        assert!(matches!(
            sim(&scene).step(&x0, &Control::new(f64::INFINITY, 0.0, 0.0), &w, 0.2),
            Err(Error::NumericDomain(_))
        ));
        assert!(sim(&scene).step(&x0, &Control::ZERO, &w, 0.0).is_err());
    }

    fn head_on_push(substeps: usize) -> f64 {
        // Disc 1 cm ahead of the palm front, pushed straight on for 1 s.
        let scene = single_disc_scene(0.0, 0.08);
        let x0 = SystemState::initial(&scene);
        let w = WorldRealization::nominal(&scene);
        let cfg = PhysicsConfig {
            substeps,
            ..PhysicsConfig::default()
        };
        let u = vec![Control::new(0.0, 0.05, 0.0); 5];
        let x = Simulator::new(&scene, cfg).rollout(&x0, &u, &w, 0.2).unwrap();
        x.last().unwrap().objects[0].pose.y - x0.objects[0].pose.y
    }

    #[test]
    fn head_on_push_converges_with_substeps() {
        let coarse = head_on_push(10);
        let fine = head_on_push(100);
        assert!(coarse > 0.0, "disc should be pushed forward");
        assert!(coarse > 0.035, "coarse {coarse}");
        assert!((coarse - fine).abs() < 1e-3, "coarse {coarse} fine {fine}");
    }

    #[test]
    fn rollout_length_and_determinism() {
        let scene = demo_scene();
        let x0 = SystemState::initial(&scene);
        let w = WorldRealization::nominal(&scene);
        let u = vec![Control::new(0.05, 0.3, 0.2); 5];
        let a = sim(&scene).rollout(&x0, &u, &w, 0.2).unwrap();
        let b = sim(&scene).rollout(&x0, &u, &w, 0.2).unwrap();
        assert_eq!(a.len(), 6);
        assert_eq!(a, b);
        let zeros = sim(&scene).rollout(&x0, &[Control::ZERO; 5], &w, 0.2).unwrap();
        assert!(zeros.iter().all(|s| *s == x0));
    }

    #[test]
    fn free_space_rollout_advances_robot() {
        let mut scene = single_disc_scene(0.2, 0.3);
        scene.robot_start = Pose2::new(0.0, 0.05, 0.0);
        let x0 = SystemState::initial(&scene);
        let w = WorldRealization::nominal(&scene);
        let x = sim(&scene)
            .rollout(&x0, &[Control::new(0.1, 0.0, 0.0); 5], &w, 0.2)
            .unwrap();
        assert_relative_eq!(x[5].robot_pose.x, 0.1, epsilon = 1e-12);
    }

    #[test]
    fn toppled_objects_stay_toppled() {
        let scene = single_disc_scene(0.0, 0.08);
        let mut x0 = SystemState::initial(&scene);
        // Disc sliding fast towards the open front edge.
        x0.objects[0].velocity = Twist2 {
            vx: 0.0,
            vy: -2.0,
            omega: 0.0,
        };
        x0.robot_pose = Pose2::new(0.25, 0.2, 0.0);
        let w = WorldRealization::nominal(&scene);
        let x = sim(&scene)
            .rollout(&x0, &[Control::ZERO; 4], &w, 0.2)
            .unwrap();
        let flags: Vec<bool> = x.iter().map(|s| s.objects[0].toppled).collect();
        assert!(flags.last().copied().unwrap());
        let first = flags.iter().position(|f| *f).unwrap();
        assert!(flags[first..].iter().all(|f| *f));
        assert_eq!(x[first].objects[0].pose, x.last().unwrap().objects[0].pose);
    }

    #[test]
    fn walls_stop_objects() {
        let scene = single_disc_scene(0.0, 0.3);
        let mut x0 = SystemState::initial(&scene);
        x0.objects[0].velocity = Twist2 {
            vx: 0.0,
            vy: 1.5,
            omega: 0.0,
        };
        x0.robot_pose = Pose2::new(0.25, 0.05, 0.0);
        let w = WorldRealization::nominal(&scene);
        let x = sim(&scene).rollout(&x0, &[Control::ZERO; 3], &w, 0.2).unwrap();
        let last = &x.last().unwrap().objects[0];
        assert!(!last.toppled);
        assert!(last.pose.y <= scene.boundary.max[1] - 0.03 + 1e-9);
    }

    fn collision_scene() -> SceneDescription {
        // Dyadic dimensions so that tangency is exact in floating point.
        let mut scene = single_disc_scene(0.0, 0.25);
        scene.boundary = Rect::new([-0.5, 0.0], [0.5, 0.5]);
        scene.walls = vec![[[0.5, 0.0], [0.5, 0.5]]];
        scene.gripper.palm_half = [0.015625, 0.0625];
        scene.gripper.finger_centre = [0.0625, 0.0546875];
        scene.gripper.finger_half = [0.046875, 0.0078125];
        scene
    }

    #[test]
    fn static_collision_convention() {
        let scene = collision_scene();
        let mut x = SystemState::initial(&scene);
        x.robot_pose = Pose2::new(0.0, 0.25, 0.0);
        assert!(!check_static_collision(&scene, &x));
        // Finger tips reach x + 0.109375: overlapping the wall at x = 0.5.
        x.robot_pose = Pose2::new(0.4375, 0.25, 0.0);
        assert!(check_static_collision(&scene, &x));
        // Exactly tangent.
        x.robot_pose = Pose2::new(0.5 - 0.109375, 0.25, 0.0);
        assert!(!check_static_collision(&scene, &x));
        // Gripper origin outside the shelf.
        x.robot_pose = Pose2::new(0.0, -0.01, 0.0);
        assert!(check_static_collision(&scene, &x));
    }

    #[test]
    fn heavier_worlds_still_deterministic() {
        let scene = demo_scene();
        let x0 = SystemState::initial(&scene);
        let mut w = WorldRealization::nominal(&scene);
        for p in &mut w.objects {
            p.mass *= 1.3;
            p.friction *= 0.7;
            p.size_scale = 1.04;
        }
        w.id = 3;
        let u = vec![Control::new(0.0, 0.4, 0.0); 5];
        let a = sim(&scene).rollout(&x0, &u, &w, 0.2).unwrap();
        let b = sim(&scene).rollout(&x0, &u, &w, 0.2).unwrap();
        assert_eq!(a, b);
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(48))]

        #[test]
        fn translation_equivariance_in_free_space(
            dx in -0.05f64..0.05, dy in -0.05f64..0.05,
            vx in -0.3f64..0.3, vy in -0.3f64..0.3, w in -1.0f64..1.0,
        ) {
            let mut scene = single_disc_scene(0.25, 0.4);
            scene.robot_start = Pose2::new(-0.1, 0.15, 0.3);
            let x0 = SystemState::initial(&scene);
            let mut shifted = scene.clone();
            shifted.robot_start.x += dx;
            shifted.robot_start.y += dy;
            shifted.objects[0].nominal_pose.x += dx;
            shifted.objects[0].nominal_pose.y += dy;
            let real = WorldRealization::nominal(&scene);
            let u = vec![Control::new(vx, vy, w); 2];
            let a = sim(&scene).rollout(&x0, &u, &real, 0.2).unwrap();
            let b = sim(&shifted).rollout(&x0.translated(dx, dy), &u, &real, 0.2).unwrap();
            for (sa, sb) in a.iter().zip(&b) {
                prop_assert!((sa.robot_pose.x + dx - sb.robot_pose.x).abs() < 1e-12);
                prop_assert!((sa.robot_pose.y + dy - sb.robot_pose.y).abs() < 1e-12);
                prop_assert!((sa.robot_pose.theta - sb.robot_pose.theta).abs() < 1e-12);
                prop_assert_eq!(sa.objects[0].velocity, sb.objects[0].velocity);
            }
        }

        #[test]
        fn pushed_disc_moves_along_push(angle in -0.6f64..0.6, speed in 0.05f64..0.6) {
            let scene = single_disc_scene(0.0, 0.13);
            let x0 = SystemState::initial(&scene);
            let real = WorldRealization::nominal(&scene);
            let dir = Vec2::new(angle.sin(), angle.cos());
            let u = Control::new(dir.x * speed, dir.y * speed, 0.0);
            let x1 = sim(&scene).step(&x0, &u, &real, 0.2).unwrap();
            let d = x1.objects[0].pose.position() - x0.objects[0].pose.position();
            prop_assert!(d.y >= -1e-12, "disc moved backwards: {:?}", d);
        }
    }
}
