//! Rendered or captured image stacks on disk: PFM images plus a manifest.

use std::fs;
use std::path::{Path, PathBuf};

use crate::config::{GroundTruthFiles, Manifest, ManifestImage};
use crate::error::{Error, Result};
use crate::grid::Grid;
use crate::pfm;
use crate::scene::{Camera, ImageStack, Medium, Vec3};

pub const MANIFEST_FILE: &str = "manifest.toml";

#[derive(Debug, Clone)]
pub struct GroundTruth {
    pub normals: Grid<Vec3>,
    pub depth: Grid<f64>,
}

#[derive(Debug, Clone)]
pub struct Dataset {
    pub observed: ImageStack,
    pub no_object: ImageStack,
    pub camera: Camera,
    pub medium: Medium,
    pub d_max: f64,
    pub ground_truth: Option<GroundTruth>,
}

impl Dataset {
    /// Writes every image as PFM next to a manifest and returns the manifest path.
    pub fn save(&self, dir: &Path) -> Result<PathBuf> {
        fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        let mask = PathBuf::from("mask.pfm");
        pfm::write_mask(&dir.join(&mask), &self.observed.mask)?;
        let mut images = Vec::with_capacity(self.observed.len());
        for (k, light) in self.observed.lights.iter().enumerate() {
            let observed = PathBuf::from(format!("observed_{k:02}.pfm"));
            let no_object = PathBuf::from(format!("no_object_{k:02}.pfm"));
            pfm::write_scalar(&dir.join(&observed), &self.observed.images[k])?;
            pfm::write_scalar(&dir.join(&no_object), &self.no_object.images[k])?;
            images.push(ManifestImage {
                observed,
                no_object,
                position: light.position,
                intensity: light.intensity,
            });
        }
        let ground_truth = match &self.ground_truth {
            Some(gt) => {
                let files = GroundTruthFiles {
                    normals: PathBuf::from("gt_normals.pfm"),
                    depth: PathBuf::from("gt_depth.pfm"),
                };
                pfm::write_normals(&dir.join(&files.normals), &gt.normals)?;
                pfm::write_scalar(&dir.join(&files.depth), &gt.depth)?;
                Some(files)
            }
            None => None,
        };
        let manifest = Manifest {
            d_max: self.d_max,
            mask,
            camera: self.camera,
            medium: self.medium,
            images,
            ground_truth,
        };
        let path = dir.join(MANIFEST_FILE);
        manifest.save(&path)?;
        Ok(path)
    }

    pub fn load(manifest_path: &Path) -> Result<Self> {
        let manifest = Manifest::load(manifest_path)?;
        let base = manifest_path.parent().unwrap_or(Path::new("."));
        let mask = pfm::read_mask(&base.join(&manifest.mask))?;
        if mask.dims() != (manifest.camera.width, manifest.camera.height) {
            return Err(Error::Dimension("mask does not match the manifest camera".into()));
        }
        let mut observed = Vec::with_capacity(manifest.images.len());
        let mut no_object = Vec::with_capacity(manifest.images.len());
        for img in &manifest.images {
            observed.push(pfm::read_scalar(&base.join(&img.observed))?);
            no_object.push(pfm::read_scalar(&base.join(&img.no_object))?);
        }
        let lights = manifest.lights();
        let ground_truth = match &manifest.ground_truth {
            Some(files) => Some(GroundTruth {
                normals: pfm::read_normals(&base.join(&files.normals))?,
                depth: pfm::read_scalar(&base.join(&files.depth))?,
            }),
            None => None,
        };
        Ok(Dataset {
            observed: ImageStack::new(observed, lights.clone(), mask.clone())?,
            no_object: ImageStack::new(no_object, lights, mask)?,
            camera: manifest.camera,
            medium: manifest.medium,
            d_max: manifest.d_max,
            ground_truth,
        })
    }
}
