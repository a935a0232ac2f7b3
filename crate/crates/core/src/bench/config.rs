use std::path::{Path, PathBuf};

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::executor::{ExecutorConfig, Method};
use crate::world::SceneDescription;

use super::generate::{generate_random_scene, GeneratorParams};

/// One run or a whole benchmark matrix. Every field has a default, so a
/// config file only needs the values it changes.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct RunConfig {
    /// Scene file for single runs; also used by the benchmark when `scenes`
    /// is empty and no scenes are generated.
    pub scene: Option<PathBuf>,
    /// Scene files for the benchmark. When empty, scenes are generated.
    pub scenes: Vec<PathBuf>,
    pub generator: GeneratorParams,
    pub generated_scenes: usize,
    /// Scene `i` of the generated set uses generator seed `scene_seed + i`.
    pub scene_seed: u64,
    /// Method of single runs.
    pub method: Method,
    /// Methods of the benchmark matrix.
    pub methods: Vec<Method>,
    /// Seed of single runs.
    pub seed: u64,
    /// Seeds of the benchmark matrix.
    pub seeds: Vec<u64>,
    pub executor: ExecutorConfig,
    pub output_dir: PathBuf,
    pub jobs: Option<usize>,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            scene: None,
            scenes: Vec::new(),
            generator: GeneratorParams::default(),
            generated_scenes: 20,
            scene_seed: 0,
            method: Method::Ocl,
            methods: Method::ALL.to_vec(),
            seed: 0,
            seeds: vec![0],
            executor: ExecutorConfig::default(),
            output_dir: PathBuf::from("out"),
            jobs: None,
        }
    }
}

/// A scene together with the identifier used in reports.
#[derive(Clone, Debug, PartialEq)]
pub struct NamedScene {
    pub id: String,
    pub scene: SceneDescription,
}

impl RunConfig {
    /// Default matrix with [`ExecutorConfig::shelf_benchmark`].
    pub fn shelf_benchmark() -> Self {
        RunConfig {
            executor: ExecutorConfig::shelf_benchmark(),
            ..Default::default()
        }
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let cfg: RunConfig = serde_json::from_str(&text).map_err(|e| Error::json(path, e))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("config serializes")
    }

    pub fn validate(&self) -> Result<()> {
        self.executor.validate()?;
        self.generator.validate()?;
        if self.jobs == Some(0) {
            return Err(Error::Config("jobs must be at least 1".into()));
        }
        Ok(())
    }

    /// Scenes of the benchmark matrix: the listed files, else the single
    /// scene file if `generated_scenes` is zero, else generated scenes.
    pub fn bench_scenes(&self) -> Result<Vec<NamedScene>> {
        if !self.scenes.is_empty() {
            return self.scenes.iter().map(|p| load_named(p)).collect();
        }
        if self.generated_scenes == 0 {
            return self.scene.iter().map(|p| load_named(p)).collect();
        }
        (0..self.generated_scenes as u64)
            .map(|i| {
                let seed = self.scene_seed + i;
                let mut rng = ChaCha8Rng::seed_from_u64(seed);
                Ok(NamedScene {
                    id: format!("gen-{seed}"),
                    scene: generate_random_scene(&self.generator, &mut rng)?,
                })
            })
            .collect()
    }
}

pub fn load_named(path: &Path) -> Result<NamedScene> {
    let scene = SceneDescription::load(path)?;
    let id = path
        .file_stem()
        .map_or_else(|| path.display().to_string(), |s| s.to_string_lossy().into_owned());
    Ok(NamedScene { id, scene })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_file_gives_defaults() {
        let cfg: RunConfig = serde_json::from_str("{}").unwrap();
        assert_eq!(cfg, RunConfig::default());
        let back: RunConfig = serde_json::from_str(&cfg.to_json()).unwrap();
        assert_eq!(back, cfg);
    }

    #[test]
    fn partial_file_overrides_nested_values() {
        let cfg: RunConfig = serde_json::from_str(
            r#"{"methods": ["ol", "ocl"], "executor": {"c_nr": 500.0, "planner": {"params": {"samples": 6}}}}"#,
        )
        .unwrap();
        assert_eq!(cfg.methods, vec![Method::Ol, Method::Ocl]);
        assert_eq!(cfg.executor.c_nr, 500.0);
        assert_eq!(cfg.executor.planner.params.samples, 6);
        assert_eq!(cfg.executor.c_ro, 1.0);
    }

    #[test]
    fn generated_scenes_are_named_by_seed() {
        let cfg = RunConfig {
            generated_scenes: 3,
            scene_seed: 7,
            ..Default::default()
        };
        let scenes = cfg.bench_scenes().unwrap();
        let ids: Vec<_> = scenes.iter().map(|s| s.id.as_str()).collect();
        assert_eq!(ids, ["gen-7", "gen-8", "gen-9"]);
    }
}
