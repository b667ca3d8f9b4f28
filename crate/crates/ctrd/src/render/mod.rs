//! Camera model, depth sampling, and differentiable volume rendering.

pub mod camera;
pub mod composite;
pub mod sampling;

use rayon::prelude::*;

pub use camera::{CameraParams, Mat3, Ray, RaySource};
pub use composite::{composite, composite_backward, CompositeOutput};
pub use sampling::{sample_depths, RaySamples};

use crate::error::Result;
use crate::field::{EmbIndex, FieldParams, FieldScratch, ParamVec};
use crate::img::ImageBuf;
use crate::math::{derive_seed, Rgb};

/// How a ray is sampled when rendering.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RenderOptions {
    pub n_samples: usize,
    /// Jitter depths within their bins (keyed by the render seed). Off by
    /// default: deployment renders use deterministic bin centers.
    pub stratified: bool,
}

impl Default for RenderOptions {
    fn default() -> Self {
        RenderOptions {
            n_samples: 64,
            stratified: false,
        }
    }
}

impl RenderOptions {
    pub fn new(n_samples: usize) -> Self {
        RenderOptions {
            n_samples,
            stratified: false,
        }
    }
}

/// Everything the forward pass of one ray produced, kept alive so the
/// backward pass can run without re-evaluating the field.
#[derive(Debug, Clone, Default)]
pub struct RayState {
    /// Sample depths plus the terminal depth (n + 1 entries when hit).
    pub depths: Vec<f64>,
    pub colors: Vec<Rgb>,
    pub sigmas: Vec<f64>,
    pub weights: Vec<f64>,
    pub opacity: f64,
    pub rgb: Rgb,
    /// False when the ray misses the scene bounds (background returned).
    pub hit: bool,
    d_colors: Vec<Rgb>,
    d_sigmas: Vec<f64>,
}

/// Renders one ray through the field: depth sampling, per-sample field
/// queries with timestep embeddings, then compositing. The full evaluation
/// tape stays in `scratch`/`state` for [`backward_ray`].
pub(crate) fn render_ray_state(
    field: &FieldParams,
    ray: &Ray,
    emb: EmbIndex,
    opts: RenderOptions,
    seed: u64,
    scratch: &mut FieldScratch,
    state: &mut RayState,
) {
    let cfg = field.config();
    let clipped = match ray.clipped_to(&cfg.aabb) {
        Some(r) => r,
        None => {
            state.hit = false;
            state.rgb = cfg.background;
            state.depths.clear();
            state.colors.clear();
            state.sigmas.clear();
            state.weights.clear();
            state.opacity = 0.0;
            return;
        }
    };
    let n = opts.n_samples;
    let samples = sample_depths(&clipped, n, opts.stratified, seed);

    field.ensure_samples(scratch, n);
    field.encode_dir(clipped.dir, scratch);
    state.depths.clear();
    state.colors.clear();
    state.sigmas.clear();
    for i in 0..n {
        let p = clipped.point_at(samples.depths[i]);
        field.eval_sample(cfg.aabb.to_unit(p), emb, scratch, i);
        let s = &scratch.samples[i];
        state.depths.push(samples.depths[i]);
        state.colors.push(s.rgb);
        state.sigmas.push(s.sigma);
    }
    state.depths.push(samples.terminal);

    let out = composite(&state.colors, &state.sigmas, &state.depths, cfg.background)
        .expect("composite over sampler output cannot fail");
    state.weights = out.weights;
    state.opacity = out.opacity;
    state.rgb = out.color;
    state.hit = true;
}

/// Back-propagates a gradient w.r.t. the rendered pixel color into parameter
/// gradients. Must follow a [`render_ray_state`] call on the same buffers.
pub(crate) fn backward_ray(
    field: &FieldParams,
    scratch: &mut FieldScratch,
    state: &mut RayState,
    d_rgb: Rgb,
    grads: &mut ParamVec,
) {
    if !state.hit {
        return;
    }
    let n = state.colors.len();
    state.d_colors.clear();
    state.d_colors.resize(n, [0.0; 3]);
    state.d_sigmas.clear();
    state.d_sigmas.resize(n, 0.0);
    composite_backward(
        &state.colors,
        &state.depths,
        field.config().background,
        &state.weights,
        state.opacity,
        d_rgb,
        &mut state.d_colors,
        &mut state.d_sigmas,
    );
    for i in 0..n {
        field.backward_sample(scratch, i, state.d_colors[i], state.d_sigmas[i], grads);
    }
}

/// Renders a single ray. Protocol error if timestep `t` has no embeddings.
pub fn render_ray(
    field: &FieldParams,
    ray: &Ray,
    t: usize,
    image_id: Option<u64>,
    opts: RenderOptions,
    seed: u64,
) -> Result<Rgb> {
    let emb = field.emb_index(t, image_id)?;
    let mut scratch = field.scratch();
    let mut state = RayState::default();
    render_ray_state(field, ray, emb, opts, seed, &mut scratch, &mut state);
    Ok(state.rgb)
}

/// Per-pixel seed used by [`render_image`]; exposed so callers can reproduce
/// individual pixels with [`render_ray`].
pub fn pixel_seed(seed: u64, image_id: u64, row: usize, col: usize) -> u64 {
    derive_seed(seed, &[image_id, row as u64, col as u64])
}

/// Renders a full image, one independent ray per pixel. Rows are computed in
/// parallel; per-pixel randomness is keyed by `(seed, image_id, row, col)`,
/// so the output is identical for any worker count.
pub fn render_image(
    field: &FieldParams,
    cam: &CameraParams,
    t: usize,
    opts: RenderOptions,
    seed: u64,
) -> Result<ImageBuf> {
    cam.validate()?;
    let emb = field.emb_index(t, Some(cam.image_id))?;
    let mut img = ImageBuf::new(cam.width, cam.height);
    let width = cam.width;
    img.pixels
        .par_chunks_mut(width)
        .enumerate()
        .for_each(|(row, out_row)| {
            let mut scratch = field.scratch();
            let mut state = RayState::default();
            for (col, out) in out_row.iter_mut().enumerate() {
                let ray = cam.ray(row, col).expect("pixel in bounds");
                let px_seed = pixel_seed(seed, cam.image_id, row, col);
                render_ray_state(field, &ray, emb, opts, px_seed, &mut scratch, &mut state);
                *out = state.rgb;
            }
        });
    Ok(img)
}
