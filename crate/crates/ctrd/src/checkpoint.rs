//! Binary checkpoint format for field parameters and optimizer state.
//!
//! Layout: magic `CTRD`, format version, encoder kind, a config block
//! (encoder shape, decoder widths, embedding bookkeeping, scene bounds),
//! then every parameter array as little-endian f32 in declaration order
//! (grid, sigma decoder, color decoder, appearance embeddings, geometry
//! embeddings). An optional trailing section carries optimizer state with
//! the same conventions. Files round-trip bitwise: parameters are quantized
//! to f32 exactly once, on the first save.

use std::collections::BTreeMap;
use std::fs;
use std::io::{Cursor, Read, Write};
use std::path::Path;

use crate::error::{Error, Result};
use crate::field::{EncoderConfig, FieldConfig, FieldParams, HashGridConfig, ParamVec};
use crate::math::{Aabb, Vec3};
use crate::optim::OptimState;

pub const MAGIC: &[u8; 4] = b"CTRD";
pub const FORMAT_VERSION: u32 = 1;

const ENCODER_HASH: u8 = 0;
const ENCODER_FREQ: u8 = 1;

struct Writer {
    buf: Vec<u8>,
}

impl Writer {
    fn new() -> Self {
        Writer { buf: Vec::new() }
    }
    fn u8(&mut self, v: u8) {
        self.buf.push(v);
    }
    fn u32(&mut self, v: u32) {
        self.buf.extend_from_slice(&v.to_le_bytes());
    }
    fn u64(&mut self, v: u64) {
        self.buf.extend_from_slice(&v.to_le_bytes());
    }
    fn f64(&mut self, v: f64) {
        self.buf.extend_from_slice(&v.to_le_bytes());
    }
    fn params(&mut self, vals: &[f64]) {
        self.u64(vals.len() as u64);
        for &v in vals {
            self.buf.extend_from_slice(&(v as f32).to_le_bytes());
        }
    }
}

struct Reader<'a> {
    cur: Cursor<&'a [u8]>,
    path: &'a Path,
}

impl<'a> Reader<'a> {
    fn err(&self, msg: impl Into<String>) -> Error {
        Error::format(self.path, msg)
    }
    fn bytes(&mut self, n: usize) -> Result<Vec<u8>> {
        let mut out = vec![0u8; n];
        self.cur
            .read_exact(&mut out)
            .map_err(|_| self.err("unexpected end of checkpoint"))?;
        Ok(out)
    }
    fn u8(&mut self) -> Result<u8> {
        Ok(self.bytes(1)?[0])
    }
    fn u32(&mut self) -> Result<u32> {
        Ok(u32::from_le_bytes(self.bytes(4)?.try_into().unwrap()))
    }
    fn u64(&mut self) -> Result<u64> {
        Ok(u64::from_le_bytes(self.bytes(8)?.try_into().unwrap()))
    }
    fn f64(&mut self) -> Result<f64> {
        Ok(f64::from_le_bytes(self.bytes(8)?.try_into().unwrap()))
    }
    fn params(&mut self) -> Result<Vec<f64>> {
        let n = self.u64()? as usize;
        let raw = self.bytes(n * 4)?;
        Ok(raw
            .chunks_exact(4)
            .map(|c| f32::from_le_bytes(c.try_into().unwrap()) as f64)
            .collect())
    }
}

fn write_param_vec(w: &mut Writer, v: &ParamVec) {
    w.params(&v.grid);
    w.params(&v.sigma_mlp);
    w.params(&v.color_mlp);
    w.params(&v.app_emb);
    w.params(&v.geo_emb);
}

fn read_param_vec(r: &mut Reader) -> Result<ParamVec> {
    Ok(ParamVec {
        grid: r.params()?,
        sigma_mlp: r.params()?,
        color_mlp: r.params()?,
        app_emb: r.params()?,
        geo_emb: r.params()?,
    })
}

fn encode(field: &FieldParams, optim: Option<&OptimState>) -> Vec<u8> {
    let mut w = Writer::new();
    w.buf.extend_from_slice(MAGIC);
    w.u32(FORMAT_VERSION);
    let cfg = field.config();
    match &cfg.encoder {
        EncoderConfig::HashGrid(g) => {
            w.u8(ENCODER_HASH);
            w.u32(g.levels as u32);
            w.u32(g.table_size as u32);
            w.u32(g.features_per_level as u32);
            w.u32(g.base_resolution as u32);
            w.f64(g.growth_factor);
        }
        EncoderConfig::Frequency { n_freqs } => {
            w.u8(ENCODER_FREQ);
            w.u32(*n_freqs as u32);
        }
    }
    w.u32(cfg.dir_freqs as u32);
    w.u32(cfg.hidden_width as u32);
    w.u32(cfg.appearance_dim as u32);
    w.u32(cfg.geometry_dim as u32);
    w.u8(u8::from(cfg.appearance_per_image));
    for v in [cfg.aabb.min, cfg.aabb.max] {
        w.f64(v.x);
        w.f64(v.y);
        w.f64(v.z);
    }
    for c in cfg.background {
        w.f64(c);
    }
    w.u32(field.timesteps as u32);
    w.u32(field.app_entries as u32);
    w.u32(field.image_index.len() as u32);
    for (id, idx) in &field.image_index {
        w.u64(*id);
        w.u32(*idx as u32);
    }
    for t in &field.timestep_first_app {
        match t {
            None => w.u32(u32::MAX),
            Some(i) => w.u32(*i as u32),
        }
    }
    write_param_vec(&mut w, &field.values);
    match optim {
        None => w.u8(0),
        Some(o) => {
            w.u8(1);
            w.u64(o.step);
            w.f64(o.lr_encoding);
            w.f64(o.lr_decoder);
            w.f64(o.beta1);
            w.f64(o.beta2);
            w.f64(o.epsilon);
            write_param_vec(&mut w, &o.m);
            write_param_vec(&mut w, &o.v);
        }
    }
    w.buf
}

fn decode(bytes: &[u8], path: &Path) -> Result<(FieldParams, Option<OptimState>)> {
    let mut r = Reader {
        cur: Cursor::new(bytes),
        path,
    };
    let magic = r.bytes(4)?;
    if magic != MAGIC {
        return Err(r.err("bad magic bytes: not a checkpoint file"));
    }
    let version = r.u32()?;
    if version != FORMAT_VERSION {
        return Err(r.err(format!(
            "unsupported checkpoint version {version} (reader supports {FORMAT_VERSION})"
        )));
    }
    let encoder = match r.u8()? {
        ENCODER_HASH => EncoderConfig::HashGrid(HashGridConfig {
            levels: r.u32()? as usize,
            table_size: r.u32()? as usize,
            features_per_level: r.u32()? as usize,
            base_resolution: r.u32()? as usize,
            growth_factor: r.f64()?,
        }),
        ENCODER_FREQ => EncoderConfig::Frequency {
            n_freqs: r.u32()? as usize,
        },
        k => return Err(r.err(format!("unknown encoder kind {k}"))),
    };
    let dir_freqs = r.u32()? as usize;
    let hidden_width = r.u32()? as usize;
    let appearance_dim = r.u32()? as usize;
    let geometry_dim = r.u32()? as usize;
    let appearance_per_image = r.u8()? != 0;
    let aabb = Aabb::new(
        Vec3::new(r.f64()?, r.f64()?, r.f64()?),
        Vec3::new(r.f64()?, r.f64()?, r.f64()?),
    );
    let background = [r.f64()?, r.f64()?, r.f64()?];
    let timesteps = r.u32()? as usize;
    let app_entries = r.u32()? as usize;
    let n_images = r.u32()? as usize;
    let mut image_index = BTreeMap::new();
    for _ in 0..n_images {
        let id = r.u64()?;
        let idx = r.u32()? as usize;
        image_index.insert(id, idx);
    }
    let mut timestep_first_app = Vec::with_capacity(timesteps);
    for _ in 0..timesteps {
        let v = r.u32()?;
        timestep_first_app.push(if v == u32::MAX { None } else { Some(v as usize) });
    }
    let cfg = FieldConfig {
        encoder,
        dir_freqs,
        hidden_width,
        appearance_dim,
        geometry_dim,
        appearance_per_image,
        aabb,
        background,
    };
    cfg.validate().map_err(|e| r.err(format!("bad config block: {e}")))?;
    let values = read_param_vec(&mut r)?;

    let mut field = FieldParams::init(cfg, 0).map_err(|e| r.err(e.to_string()))?;
    if values.sigma_mlp.len() != field.values.sigma_mlp.len()
        || values.color_mlp.len() != field.values.color_mlp.len()
        || values.grid.len() != field.values.grid.len()
        || values.app_emb.len() != app_entries * field.config().appearance_dim
        || values.geo_emb.len() != timesteps * field.config().geometry_dim
    {
        return Err(r.err("parameter array lengths disagree with the config block"));
    }
    field.values = values;
    field.timesteps = timesteps;
    field.app_entries = app_entries;
    field.image_index = image_index;
    field.timestep_first_app = timestep_first_app;

    let optim = match r.u8()? {
        0 => None,
        _ => {
            let step = r.u64()?;
            let lr_encoding = r.f64()?;
            let lr_decoder = r.f64()?;
            let beta1 = r.f64()?;
            let beta2 = r.f64()?;
            let epsilon = r.f64()?;
            let m = read_param_vec(&mut r)?;
            let v = read_param_vec(&mut r)?;
            let mut o = OptimState::new(&field.values, lr_encoding, lr_decoder);
            o.step = step;
            o.beta1 = beta1;
            o.beta2 = beta2;
            o.epsilon = epsilon;
            o.m = m;
            o.v = v;
            Some(o)
        }
    };
    Ok((field, optim))
}

/// Saves field parameters (and optionally optimizer state) to `path`.
pub fn save(field: &FieldParams, optim: Option<&OptimState>, path: &Path) -> Result<()> {
    fs::write(path, encode(field, optim)).map_err(|e| Error::io(path, e))
}

/// Loads a checkpoint. Parameters come back as the f32 values stored on
/// disk, so a following [`save`] reproduces the file bitwise.
pub fn load(path: &Path) -> Result<(FieldParams, Option<OptimState>)> {
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    decode(&bytes, path)
}

/// Serializes to bytes without touching the filesystem.
pub fn to_bytes(field: &FieldParams, optim: Option<&OptimState>) -> Vec<u8> {
    encode(field, optim)
}
