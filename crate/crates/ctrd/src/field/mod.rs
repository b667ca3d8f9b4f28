//! The radiance-field model: spatial encoders, color/opacity decoders, and
//! per-timestep appearance/geometry embeddings, with forward evaluation and
//! analytic gradients.
//!
//! All trainable scalars live in a [`ParamVec`] (grid tables, two decoder
//! MLPs, two embedding tables). Gradients, optimizer moments, and Fisher
//! estimates reuse the same block layout so they stay aligned as embedding
//! tables grow over timesteps.

pub mod frequency;
pub mod hash_grid;
pub mod mlp;

use std::collections::BTreeMap;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::math::{Aabb, Rgb, Vec3};
pub use frequency::frequency_encode;
pub use hash_grid::{hash_encode, HashGridConfig};
use hash_grid::GridTape;
use mlp::{sigmoid, softplus, MlpScratch, MlpSpec, MlpTape};

/// Spatial encoder choice; swapping it changes only the encoder state and the
/// decoder input width.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum EncoderConfig {
    HashGrid(HashGridConfig),
    Frequency { n_freqs: usize },
}

impl EncoderConfig {
    pub fn feature_dim(&self) -> usize {
        match self {
            EncoderConfig::HashGrid(cfg) => cfg.feature_dim(),
            EncoderConfig::Frequency { n_freqs } => frequency::frequency_dim(*n_freqs),
        }
    }

    pub fn param_len(&self) -> usize {
        match self {
            EncoderConfig::HashGrid(cfg) => cfg.table_len(),
            EncoderConfig::Frequency { .. } => 0,
        }
    }

    pub fn kind_name(&self) -> &'static str {
        match self {
            EncoderConfig::HashGrid(_) => "hash_grid",
            EncoderConfig::Frequency { .. } => "frequency",
        }
    }

    fn validate(&self) -> Result<()> {
        match self {
            EncoderConfig::HashGrid(cfg) => cfg.validate(),
            EncoderConfig::Frequency { n_freqs } => {
                if *n_freqs < 1 {
                    Err(Error::config("frequency encoder needs n_freqs >= 1"))
                } else {
                    Ok(())
                }
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FieldConfig {
    pub encoder: EncoderConfig,
    /// Frequencies for the view-direction encoding fed to the color decoder.
    pub dir_freqs: usize,
    pub hidden_width: usize,
    /// Appearance embedding width; 0 disables appearance conditioning.
    pub appearance_dim: usize,
    /// Geometry embedding width; 0 disables geometry conditioning.
    pub geometry_dim: usize,
    /// Index appearance embeddings by image id instead of timestep.
    pub appearance_per_image: bool,
    /// World-space bounds; points are mapped affinely into the unit cube.
    pub aabb: Aabb,
    pub background: Rgb,
}

impl Default for FieldConfig {
    fn default() -> Self {
        FieldConfig {
            encoder: EncoderConfig::HashGrid(HashGridConfig::default()),
            dir_freqs: 4,
            hidden_width: 64,
            appearance_dim: 48,
            geometry_dim: 16,
            appearance_per_image: false,
            aabb: Aabb::new(Vec3::new(-1.0, -1.0, -1.0), Vec3::new(1.0, 1.0, 1.0)),
            background: [0.0, 0.0, 0.0],
        }
    }
}

impl FieldConfig {
    /// Frequency-encoder variant with the same decoders and embeddings.
    pub fn frequency_backbone() -> Self {
        FieldConfig {
            encoder: EncoderConfig::Frequency { n_freqs: 8 },
            ..FieldConfig::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.encoder.validate()?;
        if self.dir_freqs < 1 {
            return Err(Error::config("dir_freqs must be >= 1"));
        }
        if self.hidden_width < 1 {
            return Err(Error::config("hidden_width must be >= 1"));
        }
        let e = self.aabb.extent();
        if !(e.x > 0.0 && e.y > 0.0 && e.z > 0.0) {
            return Err(Error::config("aabb must have positive extent"));
        }
        Ok(())
    }

    fn dir_dim(&self) -> usize {
        frequency::frequency_dim(self.dir_freqs)
    }

    fn sigma_spec(&self) -> MlpSpec {
        MlpSpec::new(vec![
            self.encoder.feature_dim() + self.geometry_dim,
            self.hidden_width,
            1,
        ])
    }

    fn color_spec(&self) -> MlpSpec {
        MlpSpec::new(vec![
            self.encoder.feature_dim() + self.dir_dim() + self.appearance_dim,
            self.hidden_width,
            3,
        ])
    }
}

/// All trainable scalars, split into named blocks. Gradients, moments, and
/// Fisher diagonals follow the same layout; embedding blocks are append-only
/// so prefixes stay aligned across timesteps.
#[derive(Debug, Clone, PartialEq)]
pub struct ParamVec {
    pub grid: Vec<f64>,
    pub sigma_mlp: Vec<f64>,
    pub color_mlp: Vec<f64>,
    pub app_emb: Vec<f64>,
    pub geo_emb: Vec<f64>,
}

/// Identifies a parameter block; used by the optimizer for per-block
/// learning rates.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BlockId {
    Grid,
    SigmaMlp,
    ColorMlp,
    AppEmb,
    GeoEmb,
}

impl BlockId {
    pub const ALL: [BlockId; 5] = [
        BlockId::Grid,
        BlockId::SigmaMlp,
        BlockId::ColorMlp,
        BlockId::AppEmb,
        BlockId::GeoEmb,
    ];

    /// Encoder tables and embeddings train faster than decoder weights.
    pub fn is_encoding(self) -> bool {
        matches!(self, BlockId::Grid | BlockId::AppEmb | BlockId::GeoEmb)
    }
}

impl ParamVec {
    pub fn zeros(grid: usize, sigma: usize, color: usize, app: usize, geo: usize) -> Self {
        ParamVec {
            grid: vec![0.0; grid],
            sigma_mlp: vec![0.0; sigma],
            color_mlp: vec![0.0; color],
            app_emb: vec![0.0; app],
            geo_emb: vec![0.0; geo],
        }
    }

    pub fn zeros_like(other: &ParamVec) -> Self {
        ParamVec::zeros(
            other.grid.len(),
            other.sigma_mlp.len(),
            other.color_mlp.len(),
            other.app_emb.len(),
            other.geo_emb.len(),
        )
    }

    pub fn len(&self) -> usize {
        self.grid.len()
            + self.sigma_mlp.len()
            + self.color_mlp.len()
            + self.app_emb.len()
            + self.geo_emb.len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn block(&self, id: BlockId) -> &[f64] {
        match id {
            BlockId::Grid => &self.grid,
            BlockId::SigmaMlp => &self.sigma_mlp,
            BlockId::ColorMlp => &self.color_mlp,
            BlockId::AppEmb => &self.app_emb,
            BlockId::GeoEmb => &self.geo_emb,
        }
    }

    pub fn block_mut(&mut self, id: BlockId) -> &mut Vec<f64> {
        match id {
            BlockId::Grid => &mut self.grid,
            BlockId::SigmaMlp => &mut self.sigma_mlp,
            BlockId::ColorMlp => &mut self.color_mlp,
            BlockId::AppEmb => &mut self.app_emb,
            BlockId::GeoEmb => &mut self.geo_emb,
        }
    }

    pub fn fill(&mut self, v: f64) {
        for id in BlockId::ALL {
            self.block_mut(id).iter_mut().for_each(|x| *x = v);
        }
    }

    pub fn is_finite(&self) -> bool {
        BlockId::ALL
            .iter()
            .all(|&id| self.block(id).iter().all(|v| v.is_finite()))
    }

    /// Appends zeros so the layout matches `other` (used when embeddings grow
    /// between optimizer steps). Shrinking or non-suffix changes are bugs.
    pub fn grow_to_match(&mut self, other: &ParamVec) {
        for id in BlockId::ALL {
            let want = other.block(id).len();
            let b = self.block_mut(id);
            assert!(b.len() <= want, "parameter block shrank");
            b.resize(want, 0.0);
        }
    }

    /// Adds `scale * other` elementwise; layouts must match.
    pub fn axpy(&mut self, scale: f64, other: &ParamVec) {
        for id in BlockId::ALL {
            let src = other.block(id);
            let dst = self.block_mut(id);
            assert_eq!(src.len(), dst.len(), "param block mismatch");
            for (d, s) in dst.iter_mut().zip(src.iter()) {
                *d += scale * s;
            }
        }
    }
}

/// Color and opacity returned by a field query.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FieldOutput {
    pub color: Rgb,
    pub sigma: f64,
}

/// Resolved embedding row indices for a query.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct EmbIndex {
    pub app: usize,
    pub geo: usize,
}

/// Cached intermediates for one field evaluation, enough to run the backward
/// pass without re-doing the forward math.
#[derive(Debug, Clone, Default)]
pub struct SampleTape {
    grid_tape: GridTape,
    feat: Vec<f64>,
    sigma_in: Vec<f64>,
    sigma_tape: MlpTape,
    color_in: Vec<f64>,
    color_tape: MlpTape,
    emb: Option<EmbIndex>,
    pub sigma_pre: f64,
    pub sigma: f64,
    pub rgb_pre: [f64; 3],
    pub rgb: [f64; 3],
}

/// Reusable buffers for evaluating and back-propagating rays.
#[derive(Debug, Clone)]
pub struct FieldScratch {
    pub(crate) dir_enc: Vec<f64>,
    pub(crate) samples: Vec<SampleTape>,
    mlp_scratch: MlpScratch,
    d_color_in: Vec<f64>,
    d_sigma_in: Vec<f64>,
    d_feat: Vec<f64>,
}

/// All trainable state of the radiance field.
#[derive(Debug, Clone)]
pub struct FieldParams {
    pub(crate) cfg: FieldConfig,
    pub(crate) values: ParamVec,
    pub(crate) sigma_spec: MlpSpec,
    pub(crate) color_spec: MlpSpec,
    pub(crate) timesteps: usize,
    pub(crate) app_entries: usize,
    /// Per-image appearance mode: image id -> appearance row.
    pub(crate) image_index: BTreeMap<u64, usize>,
    /// Per-image appearance mode: first appearance row of each timestep,
    /// used as the fallback for images unseen during training.
    pub(crate) timestep_first_app: Vec<Option<usize>>,
}

impl FieldParams {
    /// Randomly initializes all parameters: MLP weights uniform in
    /// +-1/sqrt(fan_in), grid tables uniform in +-1e-4, no timesteps
    /// registered yet. Deterministic given `seed`.
    pub fn init(cfg: FieldConfig, seed: u64) -> Result<Self> {
        cfg.validate()?;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let sigma_spec = cfg.sigma_spec();
        let color_spec = cfg.color_spec();
        let grid: Vec<f64> = (0..cfg.encoder.param_len())
            .map(|_| rng.random_range(-1e-4..1e-4))
            .collect();
        let sigma_mlp = sigma_spec.init_weights(&mut rng);
        let color_mlp = color_spec.init_weights(&mut rng);
        Ok(FieldParams {
            cfg,
            values: ParamVec {
                grid,
                sigma_mlp,
                color_mlp,
                app_emb: Vec::new(),
                geo_emb: Vec::new(),
            },
            sigma_spec,
            color_spec,
            timesteps: 0,
            app_entries: 0,
            image_index: BTreeMap::new(),
            timestep_first_app: Vec::new(),
        })
    }

    pub fn config(&self) -> &FieldConfig {
        &self.cfg
    }

    pub fn timesteps(&self) -> usize {
        self.timesteps
    }

    /// Total trainable scalar count.
    pub fn param_count(&self) -> usize {
        self.values.len()
    }

    pub fn values(&self) -> &ParamVec {
        &self.values
    }

    /// Registers the next timestep, growing the embedding tables by one row
    /// each. New rows copy the previous timestep's rows (zeros for t = 0);
    /// nothing else changes, so outputs for existing timesteps are untouched.
    pub fn register_timestep(&mut self, t: usize) -> Result<()> {
        if t != self.timesteps {
            return Err(Error::protocol(format!(
                "register_timestep({t}) out of order; {} timesteps registered",
                self.timesteps
            )));
        }
        let geo = self.cfg.geometry_dim;
        if geo > 0 {
            let prev: Vec<f64> = if t == 0 {
                vec![0.0; geo]
            } else {
                self.values.geo_emb[(t - 1) * geo..t * geo].to_vec()
            };
            self.values.geo_emb.extend_from_slice(&prev);
        }
        if !self.cfg.appearance_per_image {
            let app = self.cfg.appearance_dim;
            if app > 0 {
                let prev: Vec<f64> = if t == 0 {
                    vec![0.0; app]
                } else {
                    self.values.app_emb[(t - 1) * app..t * app].to_vec()
                };
                self.values.app_emb.extend_from_slice(&prev);
            }
            self.app_entries += 1;
        }
        self.timestep_first_app.push(None);
        self.timesteps += 1;
        Ok(())
    }

    /// Per-image appearance mode: adds an appearance row for `image_id`
    /// belonging to timestep `t`. No-op in per-timestep mode.
    pub fn register_image(&mut self, t: usize, image_id: u64) -> Result<()> {
        if !self.cfg.appearance_per_image {
            return Ok(());
        }
        if t >= self.timesteps {
            return Err(Error::protocol(format!(
                "register_image: timestep {t} not registered"
            )));
        }
        if self.image_index.contains_key(&image_id) {
            return Err(Error::protocol(format!(
                "register_image: image {image_id} already registered"
            )));
        }
        let app = self.cfg.appearance_dim;
        if app > 0 {
            let prev: Vec<f64> = if self.app_entries == 0 {
                vec![0.0; app]
            } else {
                let last = self.app_entries - 1;
                self.values.app_emb[last * app..(last + 1) * app].to_vec()
            };
            self.values.app_emb.extend_from_slice(&prev);
        }
        self.image_index.insert(image_id, self.app_entries);
        if self.timestep_first_app[t].is_none() {
            self.timestep_first_app[t] = Some(self.app_entries);
        }
        self.app_entries += 1;
        Ok(())
    }

    /// Resolves the embedding rows used for a query at timestep `t`. In
    /// per-image mode, unknown image ids fall back to the timestep's first
    /// registered image.
    pub fn emb_index(&self, t: usize, image_id: Option<u64>) -> Result<EmbIndex> {
        if t >= self.timesteps {
            return Err(Error::protocol(format!(
                "timestep {t} not registered ({} available)",
                self.timesteps
            )));
        }
        let app = if self.cfg.appearance_per_image {
            match image_id.and_then(|id| self.image_index.get(&id).copied()) {
                Some(idx) => idx,
                None => self.timestep_first_app[t].ok_or_else(|| {
                    Error::protocol(format!("no appearance entry registered for timestep {t}"))
                })?,
            }
        } else {
            t
        };
        Ok(EmbIndex { app, geo: t })
    }

    pub fn appearance(&self, row: usize) -> &[f64] {
        let d = self.cfg.appearance_dim;
        &self.values.app_emb[row * d..(row + 1) * d]
    }

    pub fn geometry(&self, row: usize) -> &[f64] {
        let d = self.cfg.geometry_dim;
        &self.values.geo_emb[row * d..(row + 1) * d]
    }

    /// Fresh evaluation scratch sized for this model.
    pub fn scratch(&self) -> FieldScratch {
        FieldScratch {
            dir_enc: vec![0.0; self.cfg.dir_dim()],
            samples: Vec::new(),
            mlp_scratch: MlpScratch::default(),
            d_color_in: vec![0.0; self.color_spec.input_dim()],
            d_sigma_in: vec![0.0; self.sigma_spec.input_dim()],
            d_feat: vec![0.0; self.cfg.encoder.feature_dim()],
        }
    }

    fn blank_sample(&self) -> SampleTape {
        SampleTape {
            grid_tape: match &self.cfg.encoder {
                EncoderConfig::HashGrid(g) => GridTape::for_config(g),
                EncoderConfig::Frequency { .. } => GridTape::default(),
            },
            feat: vec![0.0; self.cfg.encoder.feature_dim()],
            sigma_in: vec![0.0; self.sigma_spec.input_dim()],
            sigma_tape: self.sigma_spec.tape(),
            color_in: vec![0.0; self.color_spec.input_dim()],
            color_tape: self.color_spec.tape(),
            emb: None,
            sigma_pre: 0.0,
            sigma: 0.0,
            rgb_pre: [0.0; 3],
            rgb: [0.0; 3],
        }
    }

    pub(crate) fn ensure_samples(&self, scratch: &mut FieldScratch, n: usize) {
        while scratch.samples.len() < n {
            scratch.samples.push(self.blank_sample());
        }
    }

    /// Writes the direction encoding for `dir` into the scratch buffer.
    pub(crate) fn encode_dir(&self, dir: Vec3, scratch: &mut FieldScratch) {
        frequency::encode_into(dir, self.cfg.dir_freqs, &mut scratch.dir_enc);
    }

    /// Evaluates the field at a unit-cube point. `dir_enc` must already be in
    /// the scratch (see [`FieldParams::encode_dir`]); results and tape land in
    /// `scratch.samples[slot]`.
    pub(crate) fn eval_sample(
        &self,
        u: Vec3,
        emb: EmbIndex,
        scratch: &mut FieldScratch,
        slot: usize,
    ) {
        let s = &mut scratch.samples[slot];
        s.emb = Some(emb);
        match &self.cfg.encoder {
            EncoderConfig::HashGrid(g) => {
                hash_grid::encode_into(g, &self.values.grid, u, &mut s.feat, &mut s.grid_tape);
            }
            EncoderConfig::Frequency { n_freqs } => {
                frequency::encode_into(u, *n_freqs, &mut s.feat);
            }
        }
        let fd = s.feat.len();

        // sigma = softplus(D_sigma(f, e_g))
        s.sigma_in[..fd].copy_from_slice(&s.feat);
        if self.cfg.geometry_dim > 0 {
            let g = self.geometry(emb.geo);
            s.sigma_in[fd..].copy_from_slice(g);
        }
        let out = self
            .sigma_spec
            .forward(&self.values.sigma_mlp, &s.sigma_in, &mut s.sigma_tape);
        s.sigma_pre = out[0];
        s.sigma = softplus(s.sigma_pre);

        // c = sigmoid(D_c(f, enc(d), e_a))
        let dd = scratch.dir_enc.len();
        s.color_in[..fd].copy_from_slice(&s.feat);
        s.color_in[fd..fd + dd].copy_from_slice(&scratch.dir_enc);
        if self.cfg.appearance_dim > 0 {
            let a = self.appearance(emb.app);
            s.color_in[fd + dd..].copy_from_slice(a);
        }
        let out = self
            .color_spec
            .forward(&self.values.color_mlp, &s.color_in, &mut s.color_tape);
        s.rgb_pre = [out[0], out[1], out[2]];
        s.rgb = [sigmoid(out[0]), sigmoid(out[1]), sigmoid(out[2])];
    }

    /// Accumulates parameter gradients for one evaluated sample given
    /// upstream gradients w.r.t. its color and sigma outputs.
    pub(crate) fn backward_sample(
        &self,
        scratch: &mut FieldScratch,
        slot: usize,
        d_rgb: [f64; 3],
        d_sigma: f64,
        grads: &mut ParamVec,
    ) {
        let FieldScratch {
            samples,
            mlp_scratch,
            d_color_in,
            d_sigma_in,
            d_feat,
            ..
        } = scratch;
        let s = &samples[slot];
        let emb = s.emb.expect("backward before eval");
        let fd = s.feat.len();
        let dd = self.cfg.dir_dim();

        // Through the sigmoid color map and the color decoder.
        let d_pre = [
            d_rgb[0] * s.rgb[0] * (1.0 - s.rgb[0]),
            d_rgb[1] * s.rgb[1] * (1.0 - s.rgb[1]),
            d_rgb[2] * s.rgb[2] * (1.0 - s.rgb[2]),
        ];
        self.color_spec.backward(
            &self.values.color_mlp,
            &s.color_in,
            &s.color_tape,
            &d_pre,
            &mut grads.color_mlp,
            d_color_in,
            mlp_scratch,
        );
        d_feat.copy_from_slice(&d_color_in[..fd]);
        if self.cfg.appearance_dim > 0 {
            let a = self.cfg.appearance_dim;
            let dst = &mut grads.app_emb[emb.app * a..(emb.app + 1) * a];
            for (g, d) in dst.iter_mut().zip(d_color_in[fd + dd..].iter()) {
                *g += d;
            }
        }

        // Through the softplus sigma map and the sigma decoder.
        let d_sig_pre = [d_sigma * sigmoid(s.sigma_pre)];
        self.sigma_spec.backward(
            &self.values.sigma_mlp,
            &s.sigma_in,
            &s.sigma_tape,
            &d_sig_pre,
            &mut grads.sigma_mlp,
            d_sigma_in,
            mlp_scratch,
        );
        for (f, d) in d_feat.iter_mut().zip(d_sigma_in[..fd].iter()) {
            *f += d;
        }
        if self.cfg.geometry_dim > 0 {
            let g = self.cfg.geometry_dim;
            let dst = &mut grads.geo_emb[emb.geo * g..(emb.geo + 1) * g];
            for (gd, d) in dst.iter_mut().zip(d_sigma_in[fd..].iter()) {
                *gd += d;
            }
        }

        // Into the encoder tables (frequency encoding has no parameters).
        if let EncoderConfig::HashGrid(g) = &self.cfg.encoder {
            hash_grid::encode_backward(g, &s.grid_tape, d_feat, &mut grads.grid);
        }
    }

    /// Single-point field query in world coordinates. The view direction must
    /// be unit length within 1e-6.
    pub fn forward(
        &self,
        x: Vec3,
        dir: Vec3,
        t: usize,
        image_id: Option<u64>,
    ) -> Result<FieldOutput> {
        if (dir.norm() - 1.0).abs() > 1e-6 {
            return Err(Error::domain(format!(
                "view direction has norm {}, expected 1",
                dir.norm()
            )));
        }
        if !self.cfg.aabb.contains(x) {
            return Err(Error::domain(
                "query point outside the scene bounding box".to_string(),
            ));
        }
        let emb = self.emb_index(t, image_id)?;
        let mut scratch = self.scratch();
        self.ensure_samples(&mut scratch, 1);
        self.encode_dir(dir, &mut scratch);
        self.eval_sample(self.cfg.aabb.to_unit(x), emb, &mut scratch, 0);
        let s = &scratch.samples[0];
        Ok(FieldOutput {
            color: s.rgb,
            sigma: s.sigma,
        })
    }
}

/// Color decoder: `c = sigmoid(D_c(f, enc(d), e_a))`. The direction must be
/// unit length within 1e-6; shapes must match the decoder spec.
pub fn decode_color(
    spec: &MlpSpec,
    weights: &[f64],
    feat: &[f64],
    dir: Vec3,
    dir_freqs: usize,
    e_a: &[f64],
) -> Result<Rgb> {
    if (dir.norm() - 1.0).abs() > 1e-6 {
        return Err(Error::domain(format!(
            "view direction has norm {}, expected 1",
            dir.norm()
        )));
    }
    let dir_enc = frequency_encode(dir, dir_freqs);
    if feat.len() + dir_enc.len() + e_a.len() != spec.input_dim() {
        return Err(Error::domain(format!(
            "decode_color input {}+{}+{} does not match decoder width {}",
            feat.len(),
            dir_enc.len(),
            e_a.len(),
            spec.input_dim()
        )));
    }
    if weights.len() != spec.weight_count() || spec.output_dim() != 3 {
        return Err(Error::domain("decode_color weight shape mismatch"));
    }
    let mut input = Vec::with_capacity(spec.input_dim());
    input.extend_from_slice(feat);
    input.extend_from_slice(&dir_enc);
    input.extend_from_slice(e_a);
    let mut tape = spec.tape();
    let out = spec.forward(weights, &input, &mut tape);
    Ok([sigmoid(out[0]), sigmoid(out[1]), sigmoid(out[2])])
}

/// Opacity decoder: `sigma = softplus(D_sigma(f, e_g))`; always nonnegative.
pub fn decode_sigma(spec: &MlpSpec, weights: &[f64], feat: &[f64], e_g: &[f64]) -> Result<f64> {
    if feat.len() + e_g.len() != spec.input_dim() {
        return Err(Error::domain(format!(
            "decode_sigma input {}+{} does not match decoder width {}",
            feat.len(),
            e_g.len(),
            spec.input_dim()
        )));
    }
    if weights.len() != spec.weight_count() || spec.output_dim() != 1 {
        return Err(Error::domain("decode_sigma weight shape mismatch"));
    }
    let mut input = Vec::with_capacity(spec.input_dim());
    input.extend_from_slice(feat);
    input.extend_from_slice(e_g);
    let mut tape = spec.tape();
    let out = spec.forward(weights, &input, &mut tape);
    Ok(softplus(out[0]))
}
