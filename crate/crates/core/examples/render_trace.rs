//! Executes OCL on the demo scene and renders the run as SVG frames plus a
//! summary with open-loop and MPC steps in different colours.

use contraplan::bench::render_trace;
use contraplan::executor::{run_baseline, ExecutorConfig, Method};
use contraplan::scenes::demo_scene;

fn main() -> contraplan::Result<()> {
    let scene = demo_scene();
    let log = run_baseline(Method::Ocl, &scene, "demo", &ExecutorConfig::shelf_benchmark(), 1)?;
    let dir = std::env::temp_dir().join("contraplan-render");
    let files = render_trace(&log, &scene, &dir)?;
    for f in &files {
        println!("{}", f.display());
    }
    Ok(())
}
