//! Depth sampling along rays.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::math::Vec3;
use crate::render::camera::Ray;

/// Strictly increasing sample depths along a ray plus the terminal depth
/// closing the last compositing interval.
#[derive(Debug, Clone, PartialEq)]
pub struct RaySamples {
    /// tau_1 .. tau_n, strictly increasing, within [near, far].
    pub depths: Vec<f64>,
    /// tau_{n+1} = far + (far - near) / n: a uniform final bin.
    pub terminal: f64,
}

impl RaySamples {
    pub fn len(&self) -> usize {
        self.depths.len()
    }

    pub fn is_empty(&self) -> bool {
        self.depths.is_empty()
    }

    pub fn point(&self, ray: &Ray, i: usize) -> Vec3 {
        ray.point_at(self.depths[i])
    }

    /// Depths including the terminal entry, as the compositor expects.
    pub fn with_terminal(&self) -> Vec<f64> {
        let mut d = self.depths.clone();
        d.push(self.terminal);
        d
    }
}

/// Splits [near, far] into `n` uniform bins and samples one depth per bin:
/// the bin center when `stratified` is false, a seeded uniform jitter within
/// the bin otherwise. Deterministic given `seed`.
pub fn sample_depths(ray: &Ray, n: usize, stratified: bool, seed: u64) -> RaySamples {
    assert!(n >= 1, "sample_depths needs n >= 1");
    let span = ray.far - ray.near;
    let bin = span / n as f64;
    let mut depths = Vec::with_capacity(n);
    if stratified {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        for k in 0..n {
            let u: f64 = rng.random_range(0.0..1.0);
            depths.push(ray.near + (k as f64 + u) * bin);
        }
    } else {
        for k in 0..n {
            depths.push(ray.near + (k as f64 + 0.5) * bin);
        }
    }
    RaySamples {
        depths,
        terminal: ray.far + bin,
    }
}
