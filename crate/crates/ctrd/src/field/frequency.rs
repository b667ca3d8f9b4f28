//! Sinusoidal positional encoding, used by the non-grid backbone and for
//! view directions.

use crate::math::Vec3;

/// Feature dimension produced by [`frequency_encode`] for 3 coordinates.
pub fn frequency_dim(n_freqs: usize) -> usize {
    3 * n_freqs * 2
}

/// Writes `[sin(2^k pi x_j), cos(2^k pi x_j)]` for `k < n_freqs` per
/// coordinate `j`, in coordinate-major order.
pub(crate) fn encode_into(x: Vec3, n_freqs: usize, out: &mut [f64]) {
    debug_assert_eq!(out.len(), frequency_dim(n_freqs));
    let coords = x.to_array();
    let mut o = 0;
    for &c in coords.iter() {
        let mut arg = std::f64::consts::PI * c;
        for _ in 0..n_freqs {
            out[o] = arg.sin();
            out[o + 1] = arg.cos();
            o += 2;
            arg *= 2.0;
        }
    }
}

/// Sinusoidal encoding of a point: `[sin(2^k pi x_j), cos(2^k pi x_j)]`
/// for `k < n_freqs`, each coordinate `j`. Deterministic, no parameters.
pub fn frequency_encode(x: Vec3, n_freqs: usize) -> Vec<f64> {
    assert!(n_freqs >= 1, "frequency_encode needs n_freqs >= 1");
    let mut out = vec![0.0; frequency_dim(n_freqs)];
    encode_into(x, n_freqs, &mut out);
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::Rng;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn origin_gives_zero_sin_unit_cos() {
        let f = frequency_encode(Vec3::ZERO, 3);
        for pair in f.chunks(2) {
            assert_eq!(pair[0], 0.0);
            assert_eq!(pair[1], 1.0);
        }
    }

    #[test]
    fn half_at_first_frequency() {
        let f = frequency_encode(Vec3::new(0.5, 0.0, 0.0), 1);
        assert!((f[0] - 1.0).abs() < 1e-15); // sin(pi/2)
        assert!(f[1].abs() < 1e-15); // cos(pi/2)
    }

    #[test]
    fn matches_direct_formula_on_random_points() {
        let mut rng = ChaCha8Rng::seed_from_u64(77);
        for _ in 0..20 {
            let x = Vec3::new(
                rng.random_range(-2.0..2.0),
                rng.random_range(-2.0..2.0),
                rng.random_range(-2.0..2.0),
            );
            let n = rng.random_range(1..6);
            let f = frequency_encode(x, n);
            let mut o = 0;
            for &c in x.to_array().iter() {
                for k in 0..n {
                    let arg = (1u64 << k) as f64 * std::f64::consts::PI * c;
                    assert!((f[o] - arg.sin()).abs() < 1e-12);
                    assert!((f[o + 1] - arg.cos()).abs() < 1e-12);
                    o += 2;
                }
            }
        }
    }
}
