//! Pushes a row of objects with a constant gripper velocity, first in the
//! nominal world and then in a few sampled realizations of the uncertain
//! mass, friction and size.

use contraplan::scenes::demo_scene;
use contraplan::world::{
    sample_world_realization, Control, ParameterBounds, PhysicsConfig, Simulator, SystemState,
    WorldRealization,
};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn main() -> contraplan::Result<()> {
    let scene = demo_scene();
    let sim = Simulator::new(&scene, PhysicsConfig::default());
    let x0 = SystemState::initial(&scene);
    let controls = vec![Control::new(0.0, 0.25, 0.0); 5];
    let dt = 0.2;

    let report = |label: &str, world: &WorldRealization| -> contraplan::Result<()> {
        let traj = sim.rollout(&x0, &controls, world, dt)?;
        let last = traj.last().unwrap();
        print!("{label:>8}:");
        for (start, end) in x0.objects.iter().zip(&last.objects) {
            let d = end.pose.position() - start.pose.position();
            print!("  ({:+.3}, {:+.3})", d.x, d.y);
        }
        println!();
        Ok(())
    };

    println!("object displacement after 1 s of pushing at 0.25 m/s");
    report("nominal", &WorldRealization::nominal(&scene))?;
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    for id in 1..=4 {
        let world = sample_world_realization(&ParameterBounds::default(), scene.objects.len(), id, &mut rng);
        report(&format!("world {id}"), &world)?;
    }
    Ok(())
}
