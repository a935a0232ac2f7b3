//! Generates cluttered shelf scenes with the target hidden behind other
//! objects, and writes one to a JSON scene file.

use contraplan::bench::{generate_random_scene, ray_blockers, GeneratorParams};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn main() -> contraplan::Result<()> {
    let params = GeneratorParams::default();
    for seed in 0..5 {
        let scene = generate_random_scene(&params, &mut ChaCha8Rng::seed_from_u64(seed))?;
        let t = scene.objects[scene.target_object].nominal_pose;
        println!(
            "seed {seed}: {} objects, target at ({:.3}, {:.3}), blockers on the line {:?}",
            scene.objects.len(),
            t.x,
            t.y,
            ray_blockers(&scene)
        );
    }
    let scene = generate_random_scene(&params, &mut ChaCha8Rng::seed_from_u64(0))?;
    let path = std::env::temp_dir().join("contraplan-scene.json");
    scene.save(&path)?;
    println!("wrote {}", path.display());
    Ok(())
}
