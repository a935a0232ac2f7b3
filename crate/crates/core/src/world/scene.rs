use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{Collider, Polygon, Pose2, Rect, Vec2};

/// Object footprint. Dimensions are nominal; world realizations scale them.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Shape {
    Disc { radius: f64 },
    Box { half_x: f64, half_y: f64 },
}

impl Shape {
    pub fn scaled(&self, s: f64) -> Shape {
        match *self {
            Shape::Disc { radius } => Shape::Disc { radius: radius * s },
            Shape::Box { half_x, half_y } => Shape::Box {
                half_x: half_x * s,
                half_y: half_y * s,
            },
        }
    }

    /// Mass moment of inertia divided by mass.
    pub fn inertia_per_mass(&self) -> f64 {
        match *self {
            Shape::Disc { radius } => 0.5 * radius * radius,
            Shape::Box { half_x, half_y } => (half_x * half_x + half_y * half_y) / 3.0,
        }
    }

    /// Radius of the smallest circle around the centre that covers the shape.
    pub fn bounding_radius(&self) -> f64 {
        match *self {
            Shape::Disc { radius } => radius,
            Shape::Box { half_x, half_y } => half_x.hypot(half_y),
        }
    }

    /// World-space footprint at `pose`.
    pub fn collider(&self, pose: &Pose2) -> Collider {
        match *self {
            Shape::Disc { radius } => Collider::Circle {
                centre: pose.position(),
                radius,
            },
            Shape::Box { half_x, half_y } => {
                Collider::Polygon(Polygon::oriented_box(pose, half_x, half_y))
            }
        }
    }

    pub fn is_disc(&self) -> bool {
        matches!(self, Shape::Disc { .. })
    }

    fn validate(&self) -> Result<()> {
        let ok = match *self {
            Shape::Disc { radius } => radius > 0.0 && radius.is_finite(),
            Shape::Box { half_x, half_y } => {
                half_x > 0.0 && half_y > 0.0 && half_x.is_finite() && half_y.is_finite()
            }
        };
        if ok {
            Ok(())
        } else {
            Err(Error::InvalidScene(format!("non-positive shape dimensions {self:?}")))
        }
    }
}

/// Movable object with its nominal physics parameters.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "ObjectRecord", into = "ObjectRecord")]
pub struct ObjectSpec {
    pub shape: Shape,
    pub nominal_mass: f64,
    pub nominal_friction: f64,
    pub nominal_pose: Pose2,
}

#[derive(Serialize, Deserialize)]
struct ObjectRecord {
    shape: String,
    dims: Vec<f64>,
    mass: f64,
    friction: f64,
    pose: Pose2,
}

impl TryFrom<ObjectRecord> for ObjectSpec {
    type Error = String;

    fn try_from(r: ObjectRecord) -> std::result::Result<Self, String> {
        let shape = match (r.shape.as_str(), r.dims.as_slice()) {
            ("disc", [radius]) => Shape::Disc { radius: *radius },
            ("box", [half_x, half_y]) => Shape::Box {
                half_x: *half_x,
                half_y: *half_y,
            },
            (s, d) => {
                return Err(format!(
                    "unsupported shape {s:?} with {} dims (expected disc[r] or box[hx, hy])",
                    d.len()
                ))
            }
        };
        Ok(ObjectSpec {
            shape,
            nominal_mass: r.mass,
            nominal_friction: r.friction,
            nominal_pose: r.pose,
        })
    }
}

impl From<ObjectSpec> for ObjectRecord {
    fn from(o: ObjectSpec) -> Self {
        let (shape, dims) = match o.shape {
            Shape::Disc { radius } => ("disc", vec![radius]),
            Shape::Box { half_x, half_y } => ("box", vec![half_x, half_y]),
        };
        ObjectRecord {
            shape: shape.to_string(),
            dims,
            mass: o.nominal_mass,
            friction: o.nominal_friction,
            pose: o.nominal_pose,
        }
    }
}

/// Planar parallel gripper: a palm bar with two forward fingers, all boxes in
/// the gripper frame (+x is the forward direction).
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct Gripper {
    pub palm_half: [f64; 2],
    /// Finger centre as (forward offset, lateral offset); the second finger
    /// is mirrored across the x axis.
    pub finger_centre: [f64; 2],
    pub finger_half: [f64; 2],
    /// Region between the fingers that counts as "in the gripper".
    pub capture: Rect,
}

impl Default for Gripper {
    fn default() -> Self {
        Gripper {
            palm_half: [0.01, 0.05],
            finger_centre: [0.045, 0.044],
            finger_half: [0.035, 0.006],
            capture: Rect::new([0.01, -0.038], [0.08, 0.038]),
        }
    }
}

impl Gripper {
    /// The palm and both fingers as world-space boxes.
    pub fn parts(&self, pose: &Pose2) -> [Polygon; 3] {
        let [fx, fy] = self.finger_centre;
        let finger = |y: f64| {
            let c = pose.to_world(&Vec2::new(fx, y));
            Polygon::oriented_box(
                &Pose2::new(c.x, c.y, pose.theta),
                self.finger_half[0],
                self.finger_half[1],
            )
        };
        [
            Polygon::oriented_box(pose, self.palm_half[0], self.palm_half[1]),
            finger(fy),
            finger(-fy),
        ]
    }

    pub fn in_capture(&self, pose: &Pose2, world_point: &Vec2) -> bool {
        self.capture.contains(&pose.to_local(world_point))
    }

    /// Radius around the gripper origin covering every part.
    pub fn reach(&self) -> f64 {
        let palm = self.palm_half[0].hypot(self.palm_half[1]);
        let finger = (self.finger_centre[0] + self.finger_half[0])
            .hypot(self.finger_centre[1] + self.finger_half[1]);
        palm.max(finger)
    }
}

fn default_grasp_offset() -> [f64; 2] {
    [0.04, 0.0]
}

/// Static shelf, movable objects and the robot's start pose.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SceneDescription {
    pub boundary: Rect,
    #[serde(default)]
    pub walls: Vec<[[f64; 2]; 2]>,
    pub objects: Vec<ObjectSpec>,
    pub robot_start: Pose2,
    #[serde(rename = "target_index")]
    pub target_object: usize,
    /// Point G in the gripper frame.
    #[serde(default = "default_grasp_offset")]
    pub grasp_offset: [f64; 2],
    #[serde(default)]
    pub gripper: Gripper,
}

#[derive(Serialize, Deserialize)]
struct SceneFile {
    scene: SceneDescription,
}

impl SceneDescription {
    pub fn validate(&self) -> Result<()> {
        let b = &self.boundary;
        if !(b.min[0] < b.max[0] && b.min[1] < b.max[1]) {
            return Err(Error::InvalidScene("empty boundary rectangle".into()));
        }
        if self.target_object >= self.objects.len() {
            return Err(Error::InvalidScene(format!(
                "target index {} out of range for {} objects",
                self.target_object,
                self.objects.len()
            )));
        }
        for (i, o) in self.objects.iter().enumerate() {
            o.shape.validate()?;
            if !(o.nominal_mass > 0.0) || !(o.nominal_friction >= 0.0) {
                return Err(Error::InvalidScene(format!(
                    "object {i}: mass must be > 0 and friction >= 0"
                )));
            }
            if !o.nominal_pose.is_finite() || !b.contains(&o.nominal_pose.position()) {
                return Err(Error::InvalidScene(format!(
                    "object {i}: nominal pose outside the boundary"
                )));
            }
        }
        if !self.robot_start.is_finite() {
            return Err(Error::InvalidScene("robot start is not finite".into()));
        }
        Ok(())
    }

    pub fn wall_polygons(&self) -> Vec<Polygon> {
        self.walls
            .iter()
            .map(|[a, b]| Polygon::segment(Vec2::new(a[0], a[1]), Vec2::new(b[0], b[1])))
            .collect()
    }

    /// Point G in world coordinates for the given gripper pose.
    pub fn grasp_point(&self, robot: &Pose2) -> Vec2 {
        robot.to_world(&Vec2::new(self.grasp_offset[0], self.grasp_offset[1]))
    }

    /// Reads a scene file (`{"scene": {...}}`).
    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_json(&text).map_err(|e| match e {
            Error::Json { source, .. } => Error::json(path, source),
            other => other,
        })
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let file: SceneFile = serde_json::from_str(text).map_err(|e| Error::json("<scene>", e))?;
        file.scene.validate()?;
        Ok(file.scene)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(&SceneFile {
            scene: self.clone(),
        })
        .expect("scene serialization is infallible")
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        std::fs::write(path, self.to_json()).map_err(|e| Error::io(path, e))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const SCENE: &str = r#"{
      "scene": {
        "boundary": {"min": [-0.3, 0.0], "max": [0.3, 0.45]},
        "walls": [[[-0.3, 0.45], [0.3, 0.45]]],
        "objects": [
          {"shape": "disc", "dims": [0.03], "mass": 0.6, "friction": 0.3, "pose": [0.0, 0.3, 0.0]},
          {"shape": "box", "dims": [0.02, 0.03], "mass": 0.7, "friction": 0.25, "pose": [0.1, 0.2, 0.5]}
        ],
        "robot_start": [0.0, 0.03, 1.5707963267948966],
        "target_index": 0
      }
    }"#;

    #[test]
    fn parses_scene_file() {
        let scene = SceneDescription::from_json(SCENE).unwrap();
        assert_eq!(scene.objects.len(), 2);
        assert_eq!(scene.objects[1].shape, Shape::Box { half_x: 0.02, half_y: 0.03 });
        assert_eq!(scene.grasp_offset, [0.04, 0.0]);
        let again = SceneDescription::from_json(&scene.to_json()).unwrap();
        assert_eq!(again, scene);
    }

    #[test]
    fn rejects_bad_target_index() {
        let bad = SCENE.replace("\"target_index\": 0", "\"target_index\": 5");
        assert!(matches!(
            SceneDescription::from_json(&bad),
            Err(Error::InvalidScene(_))
        ));
    }

    #[test]
    fn rejects_object_outside_boundary() {
        let bad = SCENE.replace("[0.1, 0.2, 0.5]", "[0.9, 0.2, 0.5]");
        assert!(SceneDescription::from_json(&bad).is_err());
    }

    #[test]
    fn rejects_unknown_shape() {
        let bad = SCENE.replace("\"box\"", "\"cone\"");
        assert!(SceneDescription::from_json(&bad).is_err());
    }
}
