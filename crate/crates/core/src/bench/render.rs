use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use crate::error::{Error, Result};
use crate::executor::{ExecutionLog, StepMode};
use crate::geometry::{Polygon, Rect, Vec2};
use crate::world::{SceneDescription, Shape, SystemState};

const OPEN_LOOP: &str = "#1f77b4";
const MPC: &str = "#ff7f0e";
const TARGET: &str = "#2ca02c";
const OBJECT: &str = "#8c8c8c";

/// World metres to SVG pixels, y pointing down.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SvgTransform {
    pub x_min: f64,
    pub y_max: f64,
    pub scale: f64,
    pub margin: f64,
    pub width: f64,
    pub height: f64,
}

impl SvgTransform {
    /// Fits `bounds` with `margin` pixels on every side.
    pub fn fit(bounds: &Rect, scale: f64, margin: f64) -> Self {
        SvgTransform {
            x_min: bounds.min[0],
            y_max: bounds.max[1],
            scale,
            margin,
            width: bounds.width() * scale + 2.0 * margin,
            height: bounds.height() * scale + 2.0 * margin,
        }
    }

    pub fn to_pixel(&self, p: &Vec2) -> [f64; 2] {
        [
            self.margin + (p.x - self.x_min) * self.scale,
            self.margin + (self.y_max - p.y) * self.scale,
        ]
    }

    pub fn to_world(&self, px: [f64; 2]) -> Vec2 {
        Vec2::new(
            (px[0] - self.margin) / self.scale + self.x_min,
            self.y_max - (px[1] - self.margin) / self.scale,
        )
    }

    /// Transform used by [`render_trace`]: the scene boundary grown to
    /// include the robot start.
    pub fn for_scene(scene: &SceneDescription) -> Self {
        let b = scene.boundary;
        let r = scene.robot_start.position();
        let reach = scene.gripper.reach();
        let bounds = Rect::new(
            [b.min[0].min(r.x - reach), b.min[1].min(r.y - reach)],
            [b.max[0].max(r.x + reach), b.max[1].max(r.y + reach)],
        );
        Self::fit(&bounds, 1000.0, 20.0)
    }
}

struct Canvas<'a> {
    t: &'a SvgTransform,
    body: String,
}

impl<'a> Canvas<'a> {
    fn new(t: &'a SvgTransform) -> Self {
        Canvas { t, body: String::new() }
    }

    fn point(&self, p: &Vec2) -> String {
        let [x, y] = self.t.to_pixel(p);
        format!("{x:.6},{y:.6}")
    }

    fn polygon(&mut self, poly: &Polygon, style: &str) {
        let pts: Vec<String> = poly.vertices().iter().map(|v| self.point(v)).collect();
        let _ = writeln!(self.body, r#"<polygon points="{}" {style}/>"#, pts.join(" "));
    }

    fn line(&mut self, a: &Vec2, b: &Vec2, style: &str) {
        let [x1, y1] = self.t.to_pixel(a);
        let [x2, y2] = self.t.to_pixel(b);
        let _ = writeln!(
            self.body,
            r#"<line x1="{x1:.6}" y1="{y1:.6}" x2="{x2:.6}" y2="{y2:.6}" {style}/>"#
        );
    }

    fn centre(&mut self, p: &Vec2, id: &str) {
        let [x, y] = self.t.to_pixel(p);
        let _ = writeln!(
            self.body,
            r#"<circle class="centre" data-object="{id}" cx="{x:.6}" cy="{y:.6}" r="1.5" fill="black"/>"#
        );
    }

    fn objects(&mut self, scene: &SceneDescription, state: &SystemState, style: &str, markers: bool) {
        for (i, (spec, obj)) in scene.objects.iter().zip(&state.objects).enumerate() {
            let fill = if i == scene.target_object { TARGET } else { OBJECT };
            match spec.shape {
                Shape::Disc { radius } => {
                    let [x, y] = self.t.to_pixel(&obj.pose.position());
                    let _ = writeln!(
                        self.body,
                        r#"<circle cx="{x:.6}" cy="{y:.6}" r="{:.6}" fill="{fill}" {style}/>"#,
                        radius * self.t.scale
                    );
                }
                Shape::Box { half_x, half_y } => {
                    let poly = Polygon::oriented_box(&obj.pose, half_x, half_y);
                    self.polygon(&poly, &format!(r#"fill="{fill}" {style}"#));
                }
            }
            if markers {
                self.centre(&obj.pose.position(), &i.to_string());
            }
        }
    }

    fn gripper(&mut self, scene: &SceneDescription, state: &SystemState, style: &str, marker: bool) {
        for part in scene.gripper.parts(&state.robot_pose) {
            self.polygon(&part, style);
        }
        if marker {
            self.centre(&state.robot_pose.position(), "robot");
        }
    }

    fn walls(&mut self, scene: &SceneDescription) {
        for [a, b] in &scene.walls {
            self.line(
                &Vec2::new(a[0], a[1]),
                &Vec2::new(b[0], b[1]),
                r#"stroke="black" stroke-width="4""#,
            );
        }
    }

    fn text(&mut self, s: &str) {
        let _ = writeln!(
            self.body,
            r#"<text x="{:.6}" y="14" font-family="monospace" font-size="12">{s}</text>"#,
            self.t.margin
        );
    }

    fn finish(self) -> String {
        format!(
            "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{:.0}\" height=\"{:.0}\">\n\
             <rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n{}</svg>\n",
            self.t.width, self.t.height, self.body
        )
    }
}

fn mode_colour(mode: StepMode) -> &'static str {
    match mode {
        StepMode::OpenLoop => OPEN_LOOP,
        StepMode::Mpc => MPC,
    }
}

/// Path of point G, each segment coloured by the mode of the step that
/// produced it, up to `upto` steps.
fn trail(c: &mut Canvas<'_>, log: &ExecutionLog, upto: usize) {
    let states = log.true_states();
    for k in 0..upto {
        let a = log.scene.grasp_point(&states[k].robot_pose);
        let b = log.scene.grasp_point(&states[k + 1].robot_pose);
        let style = format!(
            r#"stroke="{}" stroke-width="3" data-mode="{:?}""#,
            mode_colour(log.steps[k].mode),
            log.steps[k].mode
        );
        c.line(&a, &b, &style);
    }
}

fn write(path: PathBuf, text: String) -> Result<PathBuf> {
    std::fs::write(&path, text).map_err(|e| Error::io(&path, e))?;
    Ok(path)
}

/// Writes `frame_000.svg` .. `frame_NNN.svg` (one per state, initial state
/// included) and `summary.svg` into `dir`; returns the paths, frames first.
/// Scene geometry comes from `scene`, which is normally `log.scene`.
pub fn render_trace(log: &ExecutionLog, scene: &SceneDescription, dir: &Path) -> Result<Vec<PathBuf>> {
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let t = SvgTransform::for_scene(scene);
    let states = log.true_states();
    let mut out = Vec::with_capacity(states.len() + 1);
    let log = &ExecutionLog {
        scene: scene.clone(),
        ..log.clone()
    };

    for (k, state) in states.iter().enumerate() {
        let mut c = Canvas::new(&t);
        c.walls(scene);
        if let Some(planned) = k.checked_sub(1).and_then(|i| log.steps[i].planned_state.as_ref()) {
            c.objects(scene, planned, r#"fill-opacity="0.15" stroke="black" stroke-dasharray="3 2""#, false);
            c.gripper(scene, planned, r#"fill="none" stroke="black" stroke-dasharray="3 2""#, false);
        }
        c.objects(scene, state, r#"fill-opacity="0.8""#, true);
        trail(&mut c, log, k);
        let colour = k
            .checked_sub(1)
            .map_or("#444444", |i| mode_colour(log.steps[i].mode));
        c.gripper(scene, state, &format!(r#"fill="{colour}" fill-opacity="0.6""#), true);
        let label = match k.checked_sub(1).map(|i| log.steps[i].mode) {
            None => "initial".to_string(),
            Some(m) => format!("{m:?}"),
        };
        c.text(&format!("{} step {k}/{} {label}", log.method, log.steps.len()));
        out.push(write(dir.join(format!("frame_{k:03}.svg")), c.finish())?);
    }

    let mut c = Canvas::new(&t);
    c.walls(scene);
    c.objects(scene, &log.initial_true_state, r#"fill-opacity="0.2""#, false);
    if let Some(plan) = &log.plan {
        for w in plan.states.windows(2) {
            c.line(
                &scene.grasp_point(&w[0].robot_pose),
                &scene.grasp_point(&w[1].robot_pose),
                r#"stroke="black" stroke-width="1.5" stroke-dasharray="4 3""#,
            );
        }
    }
    let last = log.final_true_state();
    c.objects(scene, last, r#"fill-opacity="0.8""#, true);
    trail(&mut c, log, log.steps.len());
    c.gripper(scene, last, r##"fill="#444444" fill-opacity="0.5""##, true);
    c.text(&format!(
        "{} {} success={} open-loop {:.1}%",
        log.method, log.scene_id, log.summary.success, log.summary.percent_open_loop
    ));
    out.push(write(dir.join("summary.svg"), c.finish())?);
    Ok(out)
}
