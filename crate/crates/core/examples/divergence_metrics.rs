//! Divergence metrics of a pushing plan: how far perturbed rollouts drift
//! apart relative to how far apart they started, per step and over the
//! whole path, in the nominal model and in the worst sampled world.

use contraplan::metrics::{compute_metrics, segment_metric, MetricSettings};
use contraplan::scenes::{demo_scene, reaching_toy};
use contraplan::world::{Control, PhysicsConfig, SceneDescription, Simulator, SystemState};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn show(name: &str, scene: &SceneDescription, u: Control) -> contraplan::Result<()> {
    let sim = Simulator::new(scene, PhysicsConfig::default());
    let x0 = SystemState::initial(scene);
    let controls = vec![u; 5];
    let settings = MetricSettings::default();
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let p = compute_metrics(&sim, &x0, &controls, &settings, 0.2, &mut rng)?;
    println!("{name}");
    println!("  per-step expected  {:.3?}", p.per_step_expected);
    println!("  path expected      nominal {:.3}  real {:.3}", p.path_expected_nominal, p.path_expected_real);
    println!("  path maximal       nominal {:.3}  real {:.3}", p.path_maximal_nominal, p.path_maximal_real);
    println!("  worst world        {}", p.worst_world);
    println!("  segment (0,2)      {:.3}", segment_metric(&p, 0, 2)?);
    Ok(())
}

fn main() -> contraplan::Result<()> {
    show("free-space reach", &reaching_toy(), Control::new(0.0, 0.1, 0.0))?;
    show("push through clutter", &demo_scene(), Control::new(0.0, 0.25, 0.0))?;
    Ok(())
}
