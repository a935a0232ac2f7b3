mod common;

use contraplan::bench::{render_trace, SvgTransform};
use contraplan::executor::{run_baseline, Method};
use contraplan::scenes::demo_scene;

fn centres(svg: &str) -> Vec<(String, [f64; 2])> {
    svg.lines()
        .filter(|l| l.contains(r#"class="centre""#))
        .map(|l| {
            let attr = |name: &str| {
                let start = l.find(&format!("{name}=\"")).unwrap() + name.len() + 2;
                let end = start + l[start..].find('"').unwrap();
                l[start..end].to_string()
            };
            (attr("data-object"), [attr("cx").parse().unwrap(), attr("cy").parse().unwrap()])
        })
        .collect()
}

#[test]
fn one_frame_per_state_and_markers_match_poses() {
    let scene = demo_scene();
    let log = run_baseline(Method::Ocl, &scene, "shelf", &common::tiny_executor(), 0).unwrap();
    let dir = tempfile::tempdir().unwrap();
    let files = render_trace(&log, &scene, dir.path()).unwrap();
    assert_eq!(files.len(), log.steps.len() + 2);
    assert!(files.last().unwrap().ends_with("summary.svg"));

    let t = SvgTransform::for_scene(&scene);
    for (k, state) in log.true_states().into_iter().enumerate() {
        let svg = std::fs::read_to_string(&files[k]).unwrap();
        let marks = centres(&svg);
        assert_eq!(marks.len(), scene.objects.len() + 1);
        for (id, px) in marks {
            let want = match id.as_str() {
                "robot" => state.robot_pose.position(),
                i => state.objects[i.parse::<usize>().unwrap()].pose.position(),
            };
            assert!((t.to_world(px) - want).norm() <= 2e-6, "{id} in frame {k}");
        }
    }
}

#[test]
fn zero_step_log_renders_a_single_frame() {
    let scene = demo_scene();
    let mut log = run_baseline(Method::Ol, &scene, "shelf", &common::tiny_executor(), 0).unwrap();
    log.steps.clear();
    let dir = tempfile::tempdir().unwrap();
    let files = render_trace(&log, &scene, dir.path()).unwrap();
    let frames = files.iter().filter(|p| p.file_name().unwrap().to_string_lossy().starts_with("frame_")).count();
    assert_eq!(frames, 1);
}
