//! Dataset generation, the manifest format, and loading.
//!
//! Directory layout: `manifest.toml`, `t<k>/img_<id>.png`,
//! `t<k>/mask_<id>.png`. The manifest is versioned TOML; readers reject
//! unknown major versions. Cameras are stored at full precision; pixels are
//! 8-bit PNG.

use std::fs;
use std::path::{Path, PathBuf};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::img::{ImageBuf, MaskBuf};
use crate::math::{derive_seed, Aabb, Rgb, Vec3};
use crate::render::CameraParams;
use crate::scenes::{make_transient_mask, oracle_render, oracle_render_with, SceneSpec};

pub const MANIFEST_VERSION: u32 = 1;
pub const MANIFEST_NAME: &str = "manifest.toml";
pub const CAMERA_CONVENTION: &str =
    "right-handed; camera looks down -z, y up; pose = axis-angle + translation (camera-to-world)";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Split {
    Train,
    Test,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ManifestImage {
    pub file: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub mask: Option<String>,
    pub split: Split,
    pub camera: CameraParams,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetManifest {
    pub version: u32,
    pub camera_convention: String,
    pub width: usize,
    pub height: usize,
    pub bbox: Aabb,
    pub background: Rgb,
    pub timesteps: usize,
    pub images: Vec<ManifestImage>,
}

impl DatasetManifest {
    pub fn validate(&self, manifest_path: &Path) -> Result<()> {
        let err = |msg: String| Error::format(manifest_path, msg);
        if self.version != MANIFEST_VERSION {
            return Err(err(format!(
                "unsupported manifest version {} (reader supports {})",
                self.version, MANIFEST_VERSION
            )));
        }
        if self.timesteps == 0 {
            return Err(err("manifest declares zero timesteps".into()));
        }
        if self.images.is_empty() {
            return Err(err("manifest lists no images".into()));
        }
        let n = self.images.len();
        let expected_test = (n / 8).max(1);
        let actual_test = self
            .images
            .iter()
            .filter(|i| i.split == Split::Test)
            .count();
        if actual_test != expected_test {
            return Err(err(format!(
                "test split holds {actual_test} of {n} images; expected {expected_test} (1/8 rounded down, at least 1)"
            )));
        }
        for img in &self.images {
            img.camera
                .validate()
                .map_err(|e| err(format!("image {}: {e}", img.camera.image_id)))?;
            if img.camera.timestep >= self.timesteps {
                return Err(err(format!(
                    "image {}: timestep {} out of range ({} timesteps)",
                    img.camera.image_id, img.camera.timestep, self.timesteps
                )));
            }
            if img.camera.width != self.width || img.camera.height != self.height {
                return Err(err(format!(
                    "image {}: camera size {}x{} does not match dataset {}x{}",
                    img.camera.image_id,
                    img.camera.width,
                    img.camera.height,
                    self.width,
                    self.height
                )));
            }
        }
        Ok(())
    }
}

/// Knobs for [`generate_dataset`].
#[derive(Debug, Clone, Copy)]
pub struct GenConfig {
    pub cameras_per_step: usize,
    pub width: usize,
    pub height: usize,
    /// Sample count for the reference renderer (>= 256 for converged refs).
    pub oracle_samples: usize,
    pub seed: u64,
}

impl Default for GenConfig {
    fn default() -> Self {
        GenConfig {
            cameras_per_step: 8,
            width: 64,
            height: 64,
            oracle_samples: 256,
            seed: 0,
        }
    }
}

/// Camera on a per-timestep orbit arc. Steps cover disjoint azimuth ranges so
/// scene coverage expands over time; the seed adds small pose jitter.
fn place_camera(
    spec: &SceneSpec,
    cfg: &GenConfig,
    t: usize,
    k: usize,
    image_id: u64,
) -> CameraParams {
    let steps = spec.timestep_count() as f64;
    let seg = std::f64::consts::TAU / steps;
    let denom = (cfg.cameras_per_step - 1).max(1) as f64;
    let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(cfg.seed, &[t as u64, k as u64]));
    let az = seg * (t as f64 + 0.05 + 0.85 * k as f64 / denom) + rng.random_range(-0.02..0.02);
    let el: f64 =
        0.32 + if k % 2 == 0 { 0.1 } else { -0.06 } + rng.random_range(-0.02..0.02f64);
    let radius = 1.55 * spec.bbox.max_extent() * (1.0 + rng.random_range(-0.02..0.02));
    let center = spec.bbox.center();
    let eye = center
        + Vec3::new(
            radius * el.cos() * az.sin(),
            radius * el.sin(),
            radius * el.cos() * az.cos(),
        );
    CameraParams {
        pose: CameraParams::look_at_pose(eye, center, Vec3::new(0.0, 1.0, 0.0)),
        fx: 0.75 * cfg.width as f64,
        fy: 0.75 * cfg.width as f64,
        cx: cfg.width as f64 / 2.0,
        cy: cfg.height as f64 / 2.0,
        skew: None,
        width: cfg.width,
        height: cfg.height,
        image_id,
        timestep: t,
        intrinsics_group: Some(0),
    }
}

fn is_test(index: usize, total: usize) -> bool {
    if total < 8 {
        index == total - 1
    } else {
        index % 8 == 7
    }
}

/// Generates a multi-timestep dataset: orbit cameras per step, reference
/// renders, transient masks, and an atomically-written manifest. Training
/// plates include that scan's transients (masked); test plates are clean.
pub fn generate_dataset(spec: &SceneSpec, cfg: &GenConfig, out_dir: &Path) -> Result<DatasetManifest> {
    spec.validate()?;
    if cfg.cameras_per_step < 2 {
        return Err(Error::config("generate_dataset needs cameras_per_step >= 2"));
    }
    fs::create_dir_all(out_dir).map_err(|e| Error::io(out_dir, e))?;

    let steps = spec.timestep_count();
    let total = steps * cfg.cameras_per_step;
    let mut entries = Vec::with_capacity(total);
    for t in 0..steps {
        for k in 0..cfg.cameras_per_step {
            let index = t * cfg.cameras_per_step + k;
            let cam = place_camera(spec, cfg, t, k, index as u64);
            let split = if is_test(index, total) {
                Split::Test
            } else {
                Split::Train
            };
            entries.push((t, k, cam, split));
        }
    }

    for t in 0..steps {
        fs::create_dir_all(out_dir.join(format!("t{t}")))
            .map_err(|e| Error::io(out_dir.join(format!("t{t}")), e))?;
    }

    let denom = (cfg.cameras_per_step - 1).max(1) as f64;
    let images: Vec<ManifestImage> = entries
        .par_iter()
        .map(|(t, k, cam, split)| -> Result<ManifestImage> {
            let id = cam.image_id;
            let file = format!("t{t}/img_{id:04}.png");
            let progress = *k as f64 / denom;
            let has_transient = !spec.transients_at(*t, progress).is_empty();
            let (img, mask_file) = match split {
                Split::Test => (oracle_render(spec, *t, cam, cfg.oracle_samples)?, None),
                Split::Train => {
                    let transients = spec.transients_at(*t, progress);
                    let img =
                        oracle_render_with(spec, *t, cam, cfg.oracle_samples, &transients)?;
                    let mask_file = if has_transient {
                        let mask =
                            make_transient_mask(spec, *t, cam, progress, cfg.oracle_samples)?;
                        let mf = format!("t{t}/mask_{id:04}.png");
                        mask.save_png(&out_dir.join(&mf))?;
                        Some(mf)
                    } else {
                        None
                    };
                    (img, mask_file)
                }
            };
            img.save_png(&out_dir.join(&file))?;
            Ok(ManifestImage {
                file,
                mask: mask_file,
                split: *split,
                camera: cam.clone(),
            })
        })
        .collect::<Result<Vec<_>>>()?;

    let manifest = DatasetManifest {
        version: MANIFEST_VERSION,
        camera_convention: CAMERA_CONVENTION.to_string(),
        width: cfg.width,
        height: cfg.height,
        bbox: spec.bbox,
        background: spec.background,
        timesteps: steps,
        images,
    };
    let manifest_path = out_dir.join(MANIFEST_NAME);
    manifest.validate(&manifest_path)?;
    let text = toml::to_string(&manifest)
        .map_err(|e| Error::format(&manifest_path, format!("manifest serialization: {e}")))?;
    // Write-temp-then-rename so a crash never leaves a half manifest.
    let tmp = out_dir.join(format!("{MANIFEST_NAME}.tmp"));
    fs::write(&tmp, text).map_err(|e| Error::io(&tmp, e))?;
    fs::rename(&tmp, &manifest_path).map_err(|e| Error::io(&manifest_path, e))?;
    Ok(manifest)
}

/// One loaded view: camera, pixels, optional transient mask.
#[derive(Debug, Clone)]
pub struct LoadedImage {
    pub camera: CameraParams,
    pub pixels: ImageBuf,
    pub mask: Option<MaskBuf>,
    pub split: Split,
}

impl LoadedImage {
    pub fn image_id(&self) -> u64 {
        self.camera.image_id
    }

    pub fn timestep(&self) -> usize {
        self.camera.timestep
    }
}

/// A dataset in memory, ordered as the manifest lists it.
#[derive(Debug, Clone)]
pub struct Dataset {
    pub root: PathBuf,
    pub manifest: DatasetManifest,
    pub images: Vec<LoadedImage>,
}

impl Dataset {
    pub fn timestep_count(&self) -> usize {
        self.manifest.timesteps
    }

    pub fn train_at(&self, t: usize) -> Vec<&LoadedImage> {
        self.images
            .iter()
            .filter(|i| i.timestep() == t && i.split == Split::Train)
            .collect()
    }

    pub fn test_at(&self, t: usize) -> Vec<&LoadedImage> {
        self.images
            .iter()
            .filter(|i| i.timestep() == t && i.split == Split::Test)
            .collect()
    }

    pub fn train_image_count(&self) -> usize {
        self.images
            .iter()
            .filter(|i| i.split == Split::Train)
            .count()
    }
}

/// Loads and validates a dataset from its manifest path. Round-trips
/// [`generate_dataset`] output exactly: pixels to 8-bit precision, cameras to
/// full precision.
pub fn load_dataset(manifest_path: &Path) -> Result<Dataset> {
    let text = fs::read_to_string(manifest_path).map_err(|e| Error::io(manifest_path, e))?;
    let manifest: DatasetManifest = toml::from_str(&text)
        .map_err(|e| Error::format(manifest_path, format!("manifest parse: {e}")))?;
    manifest.validate(manifest_path)?;
    let root = manifest_path
        .parent()
        .unwrap_or_else(|| Path::new("."))
        .to_path_buf();

    let images = manifest
        .images
        .iter()
        .map(|entry| -> Result<LoadedImage> {
            let img_path = root.join(&entry.file);
            let pixels = ImageBuf::load_png(&img_path)?;
            if pixels.width != manifest.width || pixels.height != manifest.height {
                return Err(Error::format(
                    &img_path,
                    format!(
                        "image {} is {}x{}, manifest says {}x{}",
                        entry.camera.image_id,
                        pixels.width,
                        pixels.height,
                        manifest.width,
                        manifest.height
                    ),
                ));
            }
            let mask = match &entry.mask {
                None => None,
                Some(mf) => {
                    let mask_path = root.join(mf);
                    let mask = MaskBuf::load_png(&mask_path)?;
                    if mask.width != pixels.width || mask.height != pixels.height {
                        return Err(Error::format(
                            &mask_path,
                            format!(
                                "mask for image {} does not match image dimensions",
                                entry.camera.image_id
                            ),
                        ));
                    }
                    Some(mask)
                }
            };
            Ok(LoadedImage {
                camera: entry.camera.clone(),
                pixels,
                mask,
                split: entry.split,
            })
        })
        .collect::<Result<Vec<_>>>()?;

    Ok(Dataset {
        root,
        manifest,
        images,
    })
}

/// SHA-256 over the manifest bytes and every referenced file, in manifest
/// order. Identifies a dataset for run compatibility checks.
pub fn dataset_hash(manifest_path: &Path) -> Result<String> {
    let bytes = fs::read(manifest_path).map_err(|e| Error::io(manifest_path, e))?;
    let manifest: DatasetManifest = toml::from_str(
        std::str::from_utf8(&bytes)
            .map_err(|_| Error::format(manifest_path, "manifest is not utf-8"))?,
    )
    .map_err(|e| Error::format(manifest_path, format!("manifest parse: {e}")))?;
    let root = manifest_path
        .parent()
        .unwrap_or_else(|| Path::new("."))
        .to_path_buf();
    let mut hasher = Sha256::new();
    hasher.update(&bytes);
    for entry in &manifest.images {
        let p = root.join(&entry.file);
        hasher.update(fs::read(&p).map_err(|e| Error::io(&p, e))?);
        if let Some(mf) = &entry.mask {
            let p = root.join(mf);
            hasher.update(fs::read(&p).map_err(|e| Error::io(&p, e))?);
        }
    }
    let digest = hasher.finalize();
    Ok(digest.iter().map(|b| format!("{b:02x}")).collect())
}
