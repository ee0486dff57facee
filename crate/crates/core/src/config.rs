//! Run configuration and render manifests, both stored as TOML.

use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scene::{ring_lights, Camera, LightSource, Medium, Vec3};
use crate::solver::BiCgStabParams;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CameraConfig {
    pub width: usize,
    pub height: usize,
    /// Focal length in pixels.
    pub focal: f64,
}

impl CameraConfig {
    pub fn camera(&self) -> Result<Camera> {
        Camera::centered(self.width, self.height, self.focal)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LightsConfig {
    pub intensity: f64,
    /// Ring layout used when `positions` is absent.
    pub count: usize,
    pub radius: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub positions: Option<Vec<[f64; 3]>>,
}

impl LightsConfig {
    pub fn lights(&self) -> Result<Vec<LightSource>> {
        match &self.positions {
            Some(ps) => ps
                .iter()
                .map(|p| LightSource::new(Vec3::new(p[0], p[1], p[2]), self.intensity))
                .collect(),
            None => ring_lights(self.count, self.radius, self.intensity),
        }
    }
}

/// Synthetic sphere recipe.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SceneConfig {
    pub center: [f64; 3],
    pub radius: f64,
    pub albedo: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RenderConfig {
    /// Far end of the object-free backscatter integral.
    pub d_max: f64,
    pub noise_sigma: f64,
    pub seed: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct KernelConfig {
    /// Odd window side `r`.
    pub support: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SolverConfig {
    pub tolerance: f64,
    pub max_iterations: usize,
}

impl SolverConfig {
    pub fn params(&self) -> BiCgStabParams {
        BiCgStabParams {
            tolerance: self.tolerance,
            max_iterations: self.max_iterations,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PipelineConfig {
    pub max_iterations: usize,
    /// Stop once the mean angular change between iterations drops below this (degrees).
    pub convergence_deg: f64,
    /// Depth of the initial plane; defaults to the working distance.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub init_depth: Option<f64>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct IoConfig {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub tables: Option<PathBuf>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub manifest: Option<PathBuf>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub camera: CameraConfig,
    pub medium: Medium,
    pub lights: LightsConfig,
    pub scene: SceneConfig,
    pub render: RenderConfig,
    pub kernel: KernelConfig,
    pub solver: SolverConfig,
    pub pipeline: PipelineConfig,
    pub io: IoConfig,
}

impl Default for RunConfig {
    /// The synthetic sphere preset: 128×128, 8 ring lights, `b = c = 5e-3`/mm, `r = 81`.
    fn default() -> Self {
        RunConfig {
            camera: CameraConfig {
                width: 128,
                height: 128,
                focal: 330.0,
            },
            medium: Medium::new(0.0, 5e-3).expect("valid preset medium"),
            lights: LightsConfig {
                intensity: 1e6,
                count: 8,
                radius: 100.0,
                positions: None,
            },
            scene: SceneConfig {
                center: [0.0, 0.0, 400.0],
                radius: 60.0,
                albedo: 1.0,
            },
            render: RenderConfig {
                d_max: 1200.0,
                noise_sigma: 0.0,
                seed: 0,
            },
            kernel: KernelConfig { support: 81 },
            solver: SolverConfig {
                tolerance: 1e-8,
                max_iterations: 2000,
            },
            pipeline: PipelineConfig {
                max_iterations: 10,
                convergence_deg: 0.1,
                init_depth: None,
            },
            io: IoConfig::default(),
        }
    }
}

impl RunConfig {
    pub fn parse(text: &str) -> Result<Self> {
        let cfg: RunConfig = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn to_toml(&self) -> Result<String> {
        toml::to_string_pretty(self).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        RunConfig::parse(&text).map_err(|e| match e {
            Error::Config(m) => Error::Config(format!("{}: {m}", path.display())),
            other => other,
        })
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        fs::write(path, self.to_toml()?).map_err(|e| Error::io(path, e))
    }

    pub fn validate(&self) -> Result<()> {
        self.camera.camera()?;
        self.lights.lights()?;
        if self.kernel.support % 2 == 0 {
            return Err(Error::Config(format!("kernel.support {} must be odd", self.kernel.support)));
        }
        if !(self.solver.tolerance > 0.0) || self.solver.max_iterations == 0 {
            return Err(Error::Config("solver needs tolerance > 0 and max_iterations > 0".into()));
        }
        if self.pipeline.max_iterations == 0 || !(self.pipeline.convergence_deg >= 0.0) {
            return Err(Error::Config("pipeline needs max_iterations > 0 and convergence_deg >= 0".into()));
        }
        if let Some(d) = self.pipeline.init_depth {
            if !(d > 0.0) {
                return Err(Error::Config(format!("pipeline.init_depth {d} must be positive")));
            }
        }
        if !(self.render.noise_sigma >= 0.0) || !(self.render.d_max > 0.0) {
            return Err(Error::Config("render needs d_max > 0 and noise_sigma >= 0".into()));
        }
        if !(self.scene.radius > 0.0) || !(self.scene.albedo >= 0.0) {
            return Err(Error::Config("scene needs radius > 0 and albedo >= 0".into()));
        }
        Ok(())
    }

    /// Plane initialization depth: the configured value or the distance to the sphere centre.
    pub fn init_depth(&self) -> f64 {
        self.pipeline.init_depth.unwrap_or(self.scene.center[2])
    }
}

/// Per-light entry of a manifest.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ManifestImage {
    pub observed: PathBuf,
    pub no_object: PathBuf,
    pub position: [f64; 3],
    pub intensity: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GroundTruthFiles {
    pub normals: PathBuf,
    pub depth: PathBuf,
}

/// Everything a reconstruction needs to interpret a rendered stack. Paths are
/// relative to the manifest's directory.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Manifest {
    pub d_max: f64,
    pub mask: PathBuf,
    pub camera: Camera,
    pub medium: Medium,
    pub images: Vec<ManifestImage>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub ground_truth: Option<GroundTruthFiles>,
}

impl Manifest {
    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let m: Manifest =
            toml::from_str(&text).map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
        m.camera.validate()?;
        if m.images.is_empty() {
            return Err(Error::Config(format!("{}: manifest lists no images", path.display())));
        }
        for light in m.lights() {
            light.validate()?;
        }
        Ok(m)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let text = toml::to_string_pretty(self).map_err(|e| Error::Config(e.to_string()))?;
        fs::write(path, text).map_err(|e| Error::io(path, e))
    }

    pub fn lights(&self) -> Vec<LightSource> {
        self.images
            .iter()
            .map(|i| LightSource {
                position: i.position,
                intensity: i.intensity,
            })
            .collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn default_config_round_trips() {
        let cfg = RunConfig::default();
        let text = cfg.to_toml().unwrap();
        assert_eq!(RunConfig::parse(&text).unwrap(), cfg);
    }

    #[test]
    fn missing_sections_take_preset_values() {
        let text = "[camera]\nwidth = 64\nheight = 64\nfocal = 165.0\n\n[kernel]\nsupport = 41\n";
        let cfg = RunConfig::parse(text).unwrap();
        assert_eq!((cfg.camera.width, cfg.camera.focal, cfg.kernel.support), (64, 165.0, 41));
        let preset = RunConfig::default();
        assert_eq!((cfg.medium, cfg.lights, cfg.pipeline), (preset.medium, preset.lights, preset.pipeline));
        assert!(RunConfig::parse("[camera]\nwidth = 64\n").is_err());
    }

    #[test]
    fn unknown_keys_and_even_support_are_rejected() {
        let mut text = RunConfig::default().to_toml().unwrap();
        text.push_str("\n[extra]\nkey = 1\n");
        assert!(matches!(RunConfig::parse(&text), Err(Error::Config(_))));
        let mut cfg = RunConfig::default();
        cfg.kernel.support = 10;
        assert!(RunConfig::parse(&cfg.to_toml().unwrap()).is_err());
    }

    #[test]
    fn inconsistent_extinction_is_rejected() {
        let text = RunConfig::default()
            .to_toml()
            .unwrap()
            .replace("extinction = 0.005", "extinction = 0.006");
        assert!(RunConfig::parse(&text).is_err());
    }
}
