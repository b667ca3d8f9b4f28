//! Synthetic multi-timestep scenes with an analytic reference renderer.
//!
//! Scenes are unions of constant-density primitives (spheres and boxes) with
//! a smooth falloff band at their boundaries. Per-timestep change sets alter
//! appearance (color multipliers) and geometry (add/remove/translate), and
//! transient primitives sweep through single scans along a motion path. The
//! reference renderer evaluates the density/color fields analytically and
//! composites them with a straight-line transmittance loop, doubling as the
//! brute-force oracle for the differentiable render pipeline.

pub mod dataset;
pub mod presets;

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::img::{ImageBuf, MaskBuf};
use crate::math::{Aabb, Rgb, Vec3};
use crate::render::{sample_depths, CameraParams, Ray};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PrimitiveKind {
    Sphere,
    Box,
}

/// A constant-density solid. `size.x` is the radius for spheres; boxes use
/// all three components as half-extents.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Primitive {
    pub kind: PrimitiveKind,
    pub center: Vec3,
    pub size: Vec3,
    pub color: Rgb,
    pub density: f64,
}

impl Primitive {
    /// Signed distance to the surface (negative inside).
    fn signed_distance(&self, p: Vec3) -> f64 {
        let rel = p - self.center;
        match self.kind {
            PrimitiveKind::Sphere => rel.norm() - self.size.x,
            PrimitiveKind::Box => {
                let q = Vec3::new(
                    rel.x.abs() - self.size.x,
                    rel.y.abs() - self.size.y,
                    rel.z.abs() - self.size.z,
                );
                let outside = Vec3::new(q.x.max(0.0), q.y.max(0.0), q.z.max(0.0)).norm();
                let inside = q.x.max(q.y).max(q.z).min(0.0);
                outside + inside
            }
        }
    }

    /// Density at `p`: full inside, zero outside, a smoothstep band of width
    /// `falloff` just inside the surface.
    fn density_at(&self, p: Vec3, falloff: f64) -> f64 {
        let sd = self.signed_distance(p);
        if sd >= 0.0 {
            return 0.0;
        }
        let u = (-sd / falloff).min(1.0);
        self.density * u * u * (3.0 - 2.0 * u)
    }
}

/// Per-timestep deltas relative to the previous timestep's scene.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct ChangeSet {
    /// Per-primitive color multipliers (lighting changes); results clamp
    /// to [0, 1].
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub color_scale: BTreeMap<usize, Rgb>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub add: Vec<Primitive>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub remove: Vec<usize>,
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub translate: BTreeMap<usize, Vec3>,
}

impl ChangeSet {
    pub fn is_appearance_only(&self) -> bool {
        self.add.is_empty() && self.remove.is_empty() && self.translate.is_empty()
    }
}

/// A within-scan dynamic object: present only at `timestep`, moving from
/// `path_from` to `path_to` across that scan's images.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TransientSpec {
    pub timestep: usize,
    pub primitive: Primitive,
    pub path_from: Vec3,
    pub path_to: Vec3,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SceneSpec {
    pub bbox: Aabb,
    pub background: Rgb,
    /// Width of the smooth density band at primitive boundaries, world units.
    pub falloff: f64,
    pub primitives: Vec<Primitive>,
    /// One change set per timestep; entry 0 applies to the base primitives.
    pub timesteps: Vec<ChangeSet>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub transients: Vec<TransientSpec>,
}

/// The scene at one timestep with all change sets folded in.
#[derive(Debug, Clone)]
pub struct ResolvedScene {
    pub bbox: Aabb,
    pub background: Rgb,
    pub falloff: f64,
    pub primitives: Vec<Primitive>,
}

impl SceneSpec {
    pub fn timestep_count(&self) -> usize {
        self.timesteps.len()
    }

    pub fn validate(&self) -> Result<()> {
        if self.timesteps.is_empty() {
            return Err(Error::config("scene needs at least one timestep"));
        }
        if !(self.falloff > 0.0) {
            return Err(Error::config("scene falloff must be positive"));
        }
        for (i, p) in self.primitives.iter().enumerate() {
            validate_primitive(p, i, &self.bbox)?;
        }
        // Replay the change sets to catch dangling primitive ids.
        let mut active: BTreeMap<usize, Primitive> = self
            .primitives
            .iter()
            .cloned()
            .enumerate()
            .collect();
        let mut next_id = self.primitives.len();
        for (t, cs) in self.timesteps.iter().enumerate() {
            for p in &cs.add {
                validate_primitive(p, next_id, &self.bbox)?;
                active.insert(next_id, p.clone());
                next_id += 1;
            }
            for id in cs.remove.iter().chain(cs.translate.keys()).chain(cs.color_scale.keys()) {
                if !active.contains_key(id) && *id >= next_id {
                    return Err(Error::config(format!(
                        "timestep {t} references unknown primitive id {id}"
                    )));
                }
            }
            for id in &cs.remove {
                active.remove(id);
            }
        }
        for tr in &self.transients {
            if tr.timestep >= self.timesteps.len() {
                return Err(Error::config(format!(
                    "transient references timestep {} of {}",
                    tr.timestep,
                    self.timesteps.len()
                )));
            }
            validate_primitive(&tr.primitive, usize::MAX, &self.bbox)?;
        }
        Ok(())
    }

    /// Applies change sets 0..=t to the base primitives.
    pub fn resolve(&self, t: usize) -> Result<ResolvedScene> {
        if t >= self.timesteps.len() {
            return Err(Error::domain(format!(
                "timestep {t} out of range ({} timesteps)",
                self.timesteps.len()
            )));
        }
        let mut active: BTreeMap<usize, Primitive> = self
            .primitives
            .iter()
            .cloned()
            .enumerate()
            .collect();
        let mut next_id = self.primitives.len();
        for cs in &self.timesteps[..=t] {
            for p in &cs.add {
                active.insert(next_id, p.clone());
                next_id += 1;
            }
            for id in &cs.remove {
                active.remove(id);
            }
            for (id, delta) in &cs.translate {
                if let Some(p) = active.get_mut(id) {
                    p.center = p.center + *delta;
                }
            }
            for (id, scale) in &cs.color_scale {
                if let Some(p) = active.get_mut(id) {
                    for c in 0..3 {
                        p.color[c] = (p.color[c] * scale[c]).clamp(0.0, 1.0);
                    }
                }
            }
        }
        Ok(ResolvedScene {
            bbox: self.bbox,
            background: self.background,
            falloff: self.falloff,
            primitives: active.into_values().collect(),
        })
    }

    /// Transient primitives for timestep `t`, positioned at `progress` in
    /// [0, 1] along their motion paths.
    pub fn transients_at(&self, t: usize, progress: f64) -> Vec<Primitive> {
        self.transients
            .iter()
            .filter(|tr| tr.timestep == t)
            .map(|tr| {
                let mut p = tr.primitive.clone();
                let path = tr.path_to - tr.path_from;
                p.center = tr.primitive.center + tr.path_from + path * progress;
                p
            })
            .collect()
    }
}

fn validate_primitive(p: &Primitive, id: usize, bbox: &Aabb) -> Result<()> {
    if p.density < 0.0 {
        return Err(Error::config(format!(
            "primitive {id} has negative density {}",
            p.density
        )));
    }
    if !bbox.contains(p.center) {
        return Err(Error::config(format!(
            "primitive {id} center outside the scene bounding box"
        )));
    }
    if !(p.size.x > 0.0 && p.size.y > 0.0 && p.size.z > 0.0) {
        return Err(Error::config(format!("primitive {id} has nonpositive size")));
    }
    Ok(())
}

impl ResolvedScene {
    /// Analytic density and color at a point: densities add, colors mix
    /// density-weighted.
    pub fn sample(&self, p: Vec3, extra: &[Primitive]) -> (f64, Rgb) {
        let mut sigma = 0.0;
        let mut color = [0.0; 3];
        for prim in self.primitives.iter().chain(extra.iter()) {
            let d = prim.density_at(p, self.falloff);
            if d > 0.0 {
                sigma += d;
                for c in 0..3 {
                    color[c] += d * prim.color[c];
                }
            }
        }
        if sigma > 0.0 {
            for c in color.iter_mut() {
                *c /= sigma;
            }
        }
        (sigma, color)
    }
}

/// Analytic evaluation of one ray: depths at uniform bin centers plus the
/// scene's density/color at each. Returns `(depths with terminal, sigmas,
/// colors)`, or `None` when the ray misses the scene bounds.
pub fn oracle_samples(
    scene: &ResolvedScene,
    ray: &Ray,
    n_samples: usize,
    extra: &[Primitive],
) -> Option<(Vec<f64>, Vec<f64>, Vec<Rgb>)> {
    let clipped = ray.clipped_to(&scene.bbox)?;
    let samples = sample_depths(&clipped, n_samples, false, 0);
    let mut sigmas = Vec::with_capacity(n_samples);
    let mut colors = Vec::with_capacity(n_samples);
    for &t in &samples.depths {
        let (s, c) = scene.sample(clipped.point_at(t), extra);
        sigmas.push(s);
        colors.push(c);
    }
    Some((samples.with_terminal(), sigmas, colors))
}

fn oracle_pixel(scene: &ResolvedScene, ray: &Ray, n_samples: usize, extra: &[Primitive]) -> Rgb {
    // Straight-line transmittance loop, independent of the render module's
    // compositor on purpose: the two must agree to 1e-10.
    match oracle_samples(scene, ray, n_samples, extra) {
        None => scene.background,
        Some((depths, sigmas, colors)) => {
            let mut transmittance = 1.0;
            let mut out = [0.0; 3];
            for i in 0..sigmas.len() {
                let delta = depths[i + 1] - depths[i];
                let alpha = 1.0 - (-sigmas[i] * delta).exp();
                for c in 0..3 {
                    out[c] += transmittance * alpha * colors[i][c];
                }
                transmittance *= 1.0 - alpha;
            }
            for c in 0..3 {
                out[c] += transmittance * scene.background[c];
            }
            out
        }
    }
}

/// Ground-truth render of the scene at timestep `t` (no transients).
/// Deterministic; use `n_samples >= 256` for converged references.
pub fn oracle_render(
    spec: &SceneSpec,
    t: usize,
    cam: &CameraParams,
    n_samples: usize,
) -> Result<ImageBuf> {
    oracle_render_with(spec, t, cam, n_samples, &[])
}

/// Ground-truth render including transient instances (see
/// [`SceneSpec::transients_at`]).
pub fn oracle_render_with(
    spec: &SceneSpec,
    t: usize,
    cam: &CameraParams,
    n_samples: usize,
    transients: &[Primitive],
) -> Result<ImageBuf> {
    cam.validate()?;
    let scene = spec.resolve(t)?;
    let mut img = ImageBuf::new(cam.width, cam.height);
    for row in 0..cam.height {
        for col in 0..cam.width {
            let ray = cam.ray(row, col)?;
            img.set(row, col, oracle_pixel(&scene, &ray, n_samples, transients));
        }
    }
    Ok(img)
}

/// Binary transient mask: 1 where the transients' own accumulated opacity
/// along the pixel ray exceeds 0.01.
pub fn make_transient_mask(
    spec: &SceneSpec,
    t: usize,
    cam: &CameraParams,
    progress: f64,
    n_samples: usize,
) -> Result<MaskBuf> {
    cam.validate()?;
    let scene = spec.resolve(t)?;
    let transients = spec.transients_at(t, progress);
    let mut mask = MaskBuf::new(cam.width, cam.height);
    if transients.is_empty() {
        return Ok(mask);
    }
    let transient_scene = ResolvedScene {
        primitives: Vec::new(),
        ..scene
    };
    for row in 0..cam.height {
        for col in 0..cam.width {
            let ray = cam.ray(row, col)?;
            let opacity = match oracle_samples(&transient_scene, &ray, n_samples, &transients) {
                None => 0.0,
                Some((depths, sigmas, _)) => {
                    let total: f64 = sigmas
                        .iter()
                        .zip(depths.windows(2))
                        .map(|(s, w)| s * (w[1] - w[0]))
                        .sum();
                    1.0 - (-total).exp()
                }
            };
            mask.set(row, col, opacity > 0.01);
        }
    }
    Ok(mask)
}

/// Depth of the first sample whose accumulated opacity crosses 0.5, or None
/// for a see-through pixel. Used to check that appearance-only changes leave
/// geometry untouched.
pub fn oracle_median_depth(
    scene: &ResolvedScene,
    ray: &Ray,
    n_samples: usize,
) -> Option<f64> {
    let (depths, sigmas, _) = oracle_samples(scene, ray, n_samples, &[])?;
    let mut transmittance = 1.0;
    for i in 0..sigmas.len() {
        let delta = depths[i + 1] - depths[i];
        transmittance *= (-sigmas[i] * delta).exp();
        if 1.0 - transmittance > 0.5 {
            return Some(depths[i]);
        }
    }
    None
}

#[cfg(test)]
mod tests {
    use super::*;

    fn empty_scene() -> SceneSpec {
        SceneSpec {
            bbox: Aabb::new(Vec3::new(-1.0, -1.0, -1.0), Vec3::new(1.0, 1.0, 1.0)),
            background: [0.2, 0.3, 0.4],
            falloff: 0.05,
            primitives: Vec::new(),
            timesteps: vec![ChangeSet::default()],
            transients: Vec::new(),
        }
    }

    fn looking_cam() -> CameraParams {
        CameraParams {
            pose: CameraParams::look_at_pose(
                Vec3::new(0.0, 0.0, 3.0),
                Vec3::ZERO,
                Vec3::new(0.0, 1.0, 0.0),
            ),
            fx: 20.0,
            fy: 20.0,
            cx: 8.0,
            cy: 8.0,
            skew: None,
            width: 16,
            height: 16,
            image_id: 0,
            timestep: 0,
            intrinsics_group: None,
        }
    }

    #[test]
    fn empty_scene_renders_background() {
        let spec = empty_scene();
        let img = oracle_render(&spec, 0, &looking_cam(), 32).unwrap();
        for p in &img.pixels {
            assert_eq!(*p, spec.background);
        }
    }

    #[test]
    fn opaque_sphere_saturates_center_pixel() {
        let mut spec = empty_scene();
        spec.primitives.push(Primitive {
            kind: PrimitiveKind::Sphere,
            center: Vec3::ZERO,
            size: Vec3::new(0.5, 0.5, 0.5),
            color: [0.8, 0.1, 0.2],
            density: 1e4,
        });
        let cam = looking_cam();
        let img = oracle_render(&spec, 0, &cam, 256).unwrap();
        let center = img.get(8, 8);
        for c in 0..3 {
            assert!(
                (center[c] - spec.primitives[0].color[c]).abs() < 1e-6,
                "channel {c}: {center:?}"
            );
        }
    }

    #[test]
    fn sample_count_refinement_converges() {
        let mut spec = empty_scene();
        spec.primitives.push(Primitive {
            kind: PrimitiveKind::Sphere,
            center: Vec3::new(0.1, -0.2, 0.0),
            size: Vec3::new(0.6, 0.6, 0.6),
            color: [0.4, 0.7, 0.3],
            density: 8.0,
        });
        spec.primitives.push(Primitive {
            kind: PrimitiveKind::Box,
            center: Vec3::new(-0.4, 0.3, 0.2),
            size: Vec3::new(0.25, 0.3, 0.2),
            color: [0.9, 0.9, 0.1],
            density: 20.0,
        });
        let cam = looking_cam();
        let coarse = oracle_render(&spec, 0, &cam, 256).unwrap();
        let fine = oracle_render(&spec, 0, &cam, 512).unwrap();
        // Spot-check scattered pixels for convergence.
        for (row, col) in [(8, 8), (3, 12), (12, 3), (5, 5), (10, 9), (0, 0), (15, 15), (7, 2), (2, 9), (14, 6)] {
            let a = coarse.get(row, col);
            let b = fine.get(row, col);
            for c in 0..3 {
                assert!(
                    (a[c] - b[c]).abs() < 1e-3,
                    "pixel ({row},{col}) channel {c}: {} vs {}",
                    a[c],
                    b[c]
                );
            }
        }
    }

    #[test]
    fn changesets_resolve_cumulatively() {
        let mut spec = empty_scene();
        spec.primitives.push(Primitive {
            kind: PrimitiveKind::Sphere,
            center: Vec3::ZERO,
            size: Vec3::new(0.3, 0.3, 0.3),
            color: [0.5, 0.5, 0.5],
            density: 5.0,
        });
        spec.timesteps = vec![
            ChangeSet::default(),
            ChangeSet {
                color_scale: [(0usize, [2.0, 1.0, 0.5])].into_iter().collect(),
                ..ChangeSet::default()
            },
            ChangeSet {
                translate: [(0usize, Vec3::new(0.2, 0.0, 0.0))].into_iter().collect(),
                remove: vec![],
                ..ChangeSet::default()
            },
        ];
        let t1 = spec.resolve(1).unwrap();
        assert_eq!(t1.primitives[0].color, [1.0, 0.5, 0.25]);
        assert_eq!(t1.primitives[0].center, Vec3::ZERO);
        let t2 = spec.resolve(2).unwrap();
        assert_eq!(t2.primitives[0].center, Vec3::new(0.2, 0.0, 0.0));
        assert_eq!(t2.primitives[0].color, [1.0, 0.5, 0.25]);
    }

    #[test]
    fn appearance_only_changes_preserve_opacity_and_depth() {
        let mut spec = empty_scene();
        spec.primitives.push(Primitive {
            kind: PrimitiveKind::Sphere,
            center: Vec3::new(0.0, 0.1, -0.1),
            size: Vec3::new(0.5, 0.5, 0.5),
            color: [0.5, 0.4, 0.3],
            density: 9.0,
        });
        spec.timesteps = vec![
            ChangeSet::default(),
            ChangeSet {
                color_scale: [(0usize, [1.6, 0.4, 1.0])].into_iter().collect(),
                ..ChangeSet::default()
            },
        ];
        assert!(spec.timesteps[1].is_appearance_only());
        let s0 = spec.resolve(0).unwrap();
        let s1 = spec.resolve(1).unwrap();
        let cam = looking_cam();
        for (row, col) in [(8, 8), (4, 11), (12, 5)] {
            let ray = cam.ray(row, col).unwrap();
            let d0 = oracle_median_depth(&s0, &ray, 256);
            let d1 = oracle_median_depth(&s1, &ray, 256);
            assert_eq!(d0, d1);
            let o0 = oracle_samples(&s0, &ray, 64, &[]).map(|(_, s, _)| s);
            let o1 = oracle_samples(&s1, &ray, 64, &[]).map(|(_, s, _)| s);
            assert_eq!(o0, o1, "density profile changed at ({row},{col})");
        }
    }

    #[test]
    fn no_transients_means_empty_mask() {
        let spec = empty_scene();
        let mask = make_transient_mask(&spec, 0, &looking_cam(), 0.5, 64).unwrap();
        assert!(!mask.any());
    }

    #[test]
    fn transient_sphere_masks_a_matching_disc() {
        let mut spec = empty_scene();
        spec.transients.push(TransientSpec {
            timestep: 0,
            primitive: Primitive {
                kind: PrimitiveKind::Sphere,
                center: Vec3::ZERO,
                size: Vec3::new(0.3, 0.3, 0.3),
                color: [1.0, 1.0, 1.0],
                density: 50.0,
            },
            path_from: Vec3::ZERO,
            path_to: Vec3::ZERO,
        });
        let cam = looking_cam();
        let mask = make_transient_mask(&spec, 0, &cam, 0.0, 512).unwrap();
        assert!(mask.any());
        // Compare the mask's disc against the analytic silhouette: project
        // sphere center, radius scales by fx / depth.
        let depth = 3.0;
        let radius_px = 0.3 / depth * cam.fx;
        let (crow, ccol) = cam.project(Vec3::ZERO).unwrap();
        for row in 0..cam.height {
            for col in 0..cam.width {
                let dr = row as f64 - crow;
                let dc = col as f64 - ccol;
                let dist = (dr * dr + dc * dc).sqrt();
                if dist < radius_px - 1.0 {
                    assert!(mask.get(row, col), "inside silhouette at ({row},{col})");
                }
                if dist > radius_px + 1.0 {
                    assert!(!mask.get(row, col), "outside silhouette at ({row},{col})");
                }
            }
        }
    }

    #[test]
    fn validation_catches_bad_references() {
        let mut spec = empty_scene();
        spec.timesteps.push(ChangeSet {
            remove: vec![5],
            ..ChangeSet::default()
        });
        assert!(spec.validate().is_err());
        let mut spec = empty_scene();
        spec.timesteps.clear();
        assert!(spec.validate().is_err());
    }
}
