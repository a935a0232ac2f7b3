use std::sync::atomic::{AtomicBool, AtomicUsize, Ordering};
use std::sync::Arc;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::world::{
    sample_world_realization, Control, NoiseSpec, ParameterBounds, PhysicsConfig,
    SceneDescription, Simulator, SystemState, WorldRealization,
};

/// Counts reads of the hidden realization, split by who was running at the
/// time. The executor flips the phase to `planner` around every optimizer
/// call.
#[derive(Debug, Default)]
pub struct Audit {
    planning: AtomicBool,
    planner_reads: AtomicUsize,
    harness_reads: AtomicUsize,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct AuditCounts {
    pub planner_reads: usize,
    pub harness_reads: usize,
}

impl Audit {
    pub fn counts(&self) -> AuditCounts {
        AuditCounts {
            planner_reads: self.planner_reads.load(Ordering::SeqCst),
            harness_reads: self.harness_reads.load(Ordering::SeqCst),
        }
    }

    pub fn is_planning(&self) -> bool {
        self.planning.load(Ordering::SeqCst)
    }

    /// Runs `f` with the phase set to planning.
    pub fn planning<T>(&self, f: impl FnOnce() -> T) -> T {
        let was = self.planning.swap(true, Ordering::SeqCst);
        let out = f();
        self.planning.store(was, Ordering::SeqCst);
        out
    }

    fn record_read(&self) {
        if self.is_planning() {
            self.planner_reads.fetch_add(1, Ordering::SeqCst);
        } else {
            self.harness_reads.fetch_add(1, Ordering::SeqCst);
        }
    }
}

/// A world realization that can only be read through an audited accessor.
#[derive(Debug)]
pub struct HiddenWorld {
    realization: WorldRealization,
    audit: Arc<Audit>,
}

impl HiddenWorld {
    pub fn new(realization: WorldRealization, audit: Arc<Audit>) -> Self {
        HiddenWorld { realization, audit }
    }

    pub fn read(&self) -> &WorldRealization {
        self.audit.record_read();
        &self.realization
    }
}

/// Simulated "real" system: advances a hidden true state under a hidden
/// physics realization and hands out noisy observations.
pub struct RealWorldHarness<'a> {
    sim: Simulator<'a>,
    world: HiddenWorld,
    state: SystemState,
    noise: NoiseSpec,
    rng: ChaCha8Rng,
    audit: Arc<Audit>,
    steps: usize,
}

impl<'a> RealWorldHarness<'a> {
    /// Samples the hidden realization from `bounds` and starts the scene at
    /// rest in its nominal configuration.
    pub fn new(
        scene: &'a SceneDescription,
        physics: PhysicsConfig,
        bounds: &ParameterBounds,
        noise: NoiseSpec,
        seed: u64,
    ) -> Result<Self> {
        bounds.validate()?;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let realization = sample_world_realization(bounds, scene.objects.len(), 1, &mut rng);
        Ok(Self::with_realization(scene, physics, realization, noise, rng))
    }

    pub fn with_realization(
        scene: &'a SceneDescription,
        physics: PhysicsConfig,
        realization: WorldRealization,
        noise: NoiseSpec,
        rng: ChaCha8Rng,
    ) -> Self {
        let audit = Arc::new(Audit::default());
        RealWorldHarness {
            sim: Simulator::new(scene, physics),
            world: HiddenWorld::new(realization, audit.clone()),
            state: SystemState::initial(scene),
            noise,
            rng,
            audit,
            steps: 0,
        }
    }

    pub fn audit(&self) -> &Arc<Audit> {
        &self.audit
    }

    pub fn scene(&self) -> &'a SceneDescription {
        self.sim.scene()
    }

    /// Hidden true state; for logging and success evaluation only.
    pub fn true_state(&self) -> &SystemState {
        &self.state
    }

    pub fn steps(&self) -> usize {
        self.steps
    }

    /// Applies one control for `dt` seconds.
    pub fn apply(&mut self, u: &Control, dt: f64) -> Result<()> {
        self.state = self.sim.step(&self.state, u, self.world.read(), dt)?;
        self.steps += 1;
        Ok(())
    }

    /// Robot state exactly, object poses with Gaussian noise, velocities as
    /// they are.
    pub fn observe(&mut self) -> SystemState {
        let mut obs = self.state.clone();
        self.noise.perturb(self.sim.scene(), &mut obs, &mut self.rng);
        obs
    }

    /// Realization for post-run reporting. Counted like any other read.
    pub fn reveal(&self) -> WorldRealization {
        self.world.read().clone()
    }
}
