//! Plans a reach into clutter with the deterministic objective and with the
//! robust objective, and compares cost, feasibility and divergence.

use contraplan::executor::ExecutorConfig;
use contraplan::metrics::compute_metrics;
use contraplan::optimizer::{deterministic_sto, robust_sto, OptimizationResult};
use contraplan::scenes::demo_scene;
use contraplan::world::{Simulator, SystemState};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn summary(name: &str, r: &OptimizationResult, real_expected: f64) {
    println!(
        "{name:>13}: task cost {:>10.1}  objective {:>10.1}  feasible {:<5}  robust {:<5}  iterations {:>2}  E_r {:.3}",
        r.task_cost, r.objective, r.feasible, r.robust, r.iterations_used, real_expected
    );
}

fn main() -> contraplan::Result<()> {
    let scene = demo_scene();
    let cfg = ExecutorConfig::shelf_benchmark();
    let planner = &cfg.planner;
    let p = &planner.params;
    let x0 = SystemState::initial(&scene);
    let init = cfg.initial_guess.controls(&scene, &x0, p.horizon, p.dt, &p.limits);

    let det = deterministic_sto(&x0, &init, &scene, planner, None, &mut ChaCha8Rng::seed_from_u64(3))?;
    let sim = Simulator::new(&scene, planner.physics);
    let det_metrics = compute_metrics(&sim, &x0, &det.controls, &planner.metrics, p.dt, &mut ChaCha8Rng::seed_from_u64(4))?;
    summary("deterministic", &det, det_metrics.path_expected_real);

    let rob = robust_sto(&x0, &init, &scene, planner, &mut ChaCha8Rng::seed_from_u64(3))?;
    summary("robust", &rob, rob.real_expected().unwrap_or(f64::NAN));

    println!("robust cost history:");
    for (i, c) in rob.cost_history.iter().enumerate() {
        println!("  {i:>2} {c:.1}");
    }
    Ok(())
}
