//! Runs all five methods on one generated scene against the same hidden
//! world and prints what each of them did.

use contraplan::bench::{generate_random_scene, GeneratorParams};
use contraplan::executor::{run_baseline, ExecutorConfig, Method, StepMode};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn main() -> contraplan::Result<()> {
    let scene = generate_random_scene(&GeneratorParams::default(), &mut ChaCha8Rng::seed_from_u64(3))?;
    let cfg = ExecutorConfig::shelf_benchmark();
    println!("method  success  steps  modes   invocations  open-loop  plan(s)  exec(s)");
    for method in Method::ALL {
        let log = run_baseline(method, &scene, "gen-3", &cfg, 0)?;
        let s = &log.summary;
        let modes: String = log
            .steps
            .iter()
            .map(|st| if st.mode == StepMode::OpenLoop { 'o' } else { 'm' })
            .collect();
        println!(
            "{:<6}  {:<7}  {:>5}  {:<10}  {:>3}  {:>8.0}%  {:>7.3}  {:>7.3}",
            method.as_str(),
            s.success,
            log.steps.len(),
            modes,
            s.optimizer_invocations,
            s.percent_open_loop,
            s.virtual_planning_time_s,
            s.virtual_execution_time_s,
        );
        if let Some(segs) = log.plan.as_ref().and_then(|p| p.segments.as_ref()) {
            println!("        segments {:?}", segs.spans());
        }
    }
    Ok(())
}
