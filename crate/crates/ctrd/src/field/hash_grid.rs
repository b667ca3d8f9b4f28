//! Multiresolution hash-grid encoder.
//!
//! Each level covers the unit cube at a geometrically growing resolution.
//! A query point is trilinearly interpolated from the 8 surrounding lattice
//! vertices; vertices map into a fixed-size feature table through a spatial
//! hash (XOR of coordinates times large primes, masked to the table size).
//! Collisions are resolved by training, exactly as in grid-hash encoders.

use crate::error::{Error, Result};
use crate::math::Vec3;
use serde::{Deserialize, Serialize};

const PRIMES: [u32; 3] = [1, 2_654_435_761, 805_459_861];

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HashGridConfig {
    pub levels: usize,
    /// Feature-table entries per level; must be a power of two.
    pub table_size: usize,
    pub features_per_level: usize,
    pub base_resolution: usize,
    pub growth_factor: f64,
}

impl Default for HashGridConfig {
    fn default() -> Self {
        HashGridConfig {
            levels: 8,
            table_size: 1 << 14,
            features_per_level: 2,
            base_resolution: 16,
            growth_factor: 1.382,
        }
    }
}

impl HashGridConfig {
    pub fn validate(&self) -> Result<()> {
        if self.levels < 1 {
            return Err(Error::config("hash grid needs levels >= 1"));
        }
        if !self.table_size.is_power_of_two() {
            return Err(Error::config(format!(
                "hash grid table_size {} is not a power of two",
                self.table_size
            )));
        }
        if self.base_resolution < 2 {
            return Err(Error::config("hash grid base_resolution must be >= 2"));
        }
        if !(self.growth_factor > 1.0) {
            return Err(Error::config("hash grid growth_factor must be > 1"));
        }
        if self.features_per_level < 1 {
            return Err(Error::config("hash grid needs features_per_level >= 1"));
        }
        Ok(())
    }

    /// Cells per axis at `level`.
    pub fn resolution(&self, level: usize) -> u32 {
        (self.base_resolution as f64 * self.growth_factor.powi(level as i32)).floor() as u32
    }

    /// Total scalar count of the feature tables.
    pub fn table_len(&self) -> usize {
        self.levels * self.table_size * self.features_per_level
    }

    /// Output feature dimension.
    pub fn feature_dim(&self) -> usize {
        self.levels * self.features_per_level
    }

    #[inline]
    fn hash(&self, v: [u32; 3]) -> usize {
        let h = (v[0].wrapping_mul(PRIMES[0]))
            ^ (v[1].wrapping_mul(PRIMES[1]))
            ^ (v[2].wrapping_mul(PRIMES[2]));
        (h as usize) & (self.table_size - 1)
    }
}

/// Per-sample record of which table entries were touched and with what
/// interpolation weights; enough to run the backward scatter.
#[derive(Debug, Clone, Default)]
pub struct GridTape {
    /// Global scalar offset of each corner's first feature, 8 per level.
    pub(crate) corner_base: Vec<u32>,
    /// Trilinear weight of each corner, 8 per level.
    pub(crate) corner_w: Vec<f64>,
}

impl GridTape {
    pub fn for_config(cfg: &HashGridConfig) -> Self {
        GridTape {
            corner_base: vec![0; cfg.levels * 8],
            corner_w: vec![0.0; cfg.levels * 8],
        }
    }
}

/// Encodes a unit-cube point against the tables; the fast path used by the
/// renderer. `out` must have length `cfg.feature_dim()`.
pub(crate) fn encode_into(
    cfg: &HashGridConfig,
    tables: &[f64],
    x: Vec3,
    out: &mut [f64],
    tape: &mut GridTape,
) {
    let f = cfg.features_per_level;
    let per_level = cfg.table_size * f;
    for level in 0..cfg.levels {
        let res = cfg.resolution(level) as f64;
        let px = x.x * res;
        let py = x.y * res;
        let pz = x.z * res;
        let ix = px.floor();
        let iy = py.floor();
        let iz = pz.floor();
        let fx = px - ix;
        let fy = py - iy;
        let fz = pz - iz;
        let (ix, iy, iz) = (ix as u32, iy as u32, iz as u32);

        let feat = &mut out[level * f..(level + 1) * f];
        for v in feat.iter_mut() {
            *v = 0.0;
        }
        for corner in 0..8u32 {
            let dx = corner & 1;
            let dy = (corner >> 1) & 1;
            let dz = (corner >> 2) & 1;
            let w = (if dx == 1 { fx } else { 1.0 - fx })
                * (if dy == 1 { fy } else { 1.0 - fy })
                * (if dz == 1 { fz } else { 1.0 - fz });
            let idx = cfg.hash([ix + dx, iy + dy, iz + dz]);
            let base = level * per_level + idx * f;
            let slot = level * 8 + corner as usize;
            tape.corner_base[slot] = base as u32;
            tape.corner_w[slot] = w;
            let entry = &tables[base..base + f];
            for (o, e) in feat.iter_mut().zip(entry.iter()) {
                *o += w * e;
            }
        }
    }
}

/// Scatters `d_feat` back into table gradients recorded on the tape.
pub(crate) fn encode_backward(
    cfg: &HashGridConfig,
    tape: &GridTape,
    d_feat: &[f64],
    d_tables: &mut [f64],
) {
    let f = cfg.features_per_level;
    for level in 0..cfg.levels {
        let df = &d_feat[level * f..(level + 1) * f];
        for corner in 0..8 {
            let slot = level * 8 + corner;
            let w = tape.corner_w[slot];
            let base = tape.corner_base[slot] as usize;
            let grad = &mut d_tables[base..base + f];
            for (g, d) in grad.iter_mut().zip(df.iter()) {
                *g += w * d;
            }
        }
    }
}

/// Multi-level hash encoding of a point in the unit cube.
///
/// Rejects points outside `[0,1]^3`; callers normalize scene coordinates
/// first. Deterministic for fixed tables and differentiable in the table
/// entries (see [`encode_backward`]).
pub fn hash_encode(x: Vec3, cfg: &HashGridConfig, tables: &[f64]) -> Result<Vec<f64>> {
    if !(0.0..=1.0).contains(&x.x) || !(0.0..=1.0).contains(&x.y) || !(0.0..=1.0).contains(&x.z) {
        return Err(Error::domain(format!(
            "hash_encode input ({}, {}, {}) outside the unit cube",
            x.x, x.y, x.z
        )));
    }
    if tables.len() != cfg.table_len() {
        return Err(Error::domain(format!(
            "hash_encode table length {} does not match config ({})",
            tables.len(),
            cfg.table_len()
        )));
    }
    let mut out = vec![0.0; cfg.feature_dim()];
    let mut tape = GridTape::for_config(cfg);
    encode_into(cfg, tables, x, &mut out, &mut tape);
    Ok(out)
}
