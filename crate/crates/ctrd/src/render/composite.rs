//! Differentiable alpha compositing along a ray.
//!
//! Weights follow the transmittance form
//! `w_i = exp(-sum_{j<i} sigma_j d_j) * (1 - exp(-sigma_i d_i))` with
//! `d_i = tau_{i+1} - tau_i`; the residual transmittance is filled with a
//! background color.

use crate::error::{Error, Result};
use crate::math::Rgb;

#[derive(Debug, Clone, PartialEq)]
pub struct CompositeOutput {
    pub color: Rgb,
    pub weights: Vec<f64>,
    /// Total opacity `sum_i w_i = 1 - exp(-sum_i sigma_i d_i)`.
    pub opacity: f64,
}

fn validate(colors: &[Rgb], sigmas: &[f64], depths: &[f64]) -> Result<usize> {
    let n = colors.len();
    if n == 0 {
        return Err(Error::domain("composite needs at least one sample"));
    }
    if sigmas.len() != n {
        return Err(Error::domain(format!(
            "composite shape mismatch: {} colors vs {} sigmas",
            n,
            sigmas.len()
        )));
    }
    if depths.len() != n + 1 {
        return Err(Error::domain(format!(
            "composite needs {} depths (n+1), got {}",
            n + 1,
            depths.len()
        )));
    }
    if !depths.windows(2).all(|w| w[0] < w[1]) {
        return Err(Error::domain("composite depths must be strictly increasing"));
    }
    Ok(n)
}

/// Composites per-sample colors and densities into a pixel color. `depths`
/// carries `n + 1` entries: the sample depths plus the terminal depth closing
/// the last interval.
pub fn composite(
    colors: &[Rgb],
    sigmas: &[f64],
    depths: &[f64],
    background: Rgb,
) -> Result<CompositeOutput> {
    let n = validate(colors, sigmas, depths)?;
    let mut weights = Vec::with_capacity(n);
    let mut color = [0.0; 3];
    let mut transmittance = 1.0;
    let mut opacity = 0.0;
    for i in 0..n {
        let delta = depths[i + 1] - depths[i];
        let decay = (-sigmas[i] * delta).exp();
        let w = transmittance * (1.0 - decay);
        for c in 0..3 {
            color[c] += w * colors[i][c];
        }
        opacity += w;
        weights.push(w);
        transmittance *= decay;
    }
    for c in 0..3 {
        color[c] += (1.0 - opacity) * background[c];
    }
    Ok(CompositeOutput {
        color,
        weights,
        opacity,
    })
}

/// Reverse pass of [`composite`] for a gradient w.r.t. the output color.
/// Takes the `weights`/`opacity` produced by the forward pass and accumulates
/// into `d_colors`/`d_sigmas` (both length n).
///
/// Uses `T_{i+1} = 1 - sum_{k<=i} w_k` and the suffix sum
/// `sum_{k>i} w_k (c_k - bg)`, so no transmittance needs recomputing.
pub fn composite_backward(
    colors: &[Rgb],
    depths: &[f64],
    background: Rgb,
    weights: &[f64],
    opacity: f64,
    d_color: Rgb,
    d_colors: &mut [Rgb],
    d_sigmas: &mut [f64],
) {
    let n = colors.len();
    debug_assert_eq!(weights.len(), n);
    debug_assert_eq!(d_colors.len(), n);
    debug_assert_eq!(d_sigmas.len(), n);

    let mut suffix = 0.0;
    let mut weight_after = 0.0;
    for i in (0..n).rev() {
        let delta = depths[i + 1] - depths[i];
        let t_next = 1.0 - opacity + weight_after;
        let mut dot_i = 0.0;
        for c in 0..3 {
            d_colors[i][c] += d_color[c] * weights[i];
            dot_i += d_color[c] * (colors[i][c] - background[c]);
        }
        d_sigmas[i] += delta * (t_next * dot_i - suffix);
        suffix += weights[i] * dot_i;
        weight_after += weights[i];
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn opaque_single_sample_returns_its_color() {
        let out = composite(&[[0.2, 0.4, 0.8]], &[1e6], &[0.0, 1.0], [0.0; 3]).unwrap();
        assert!((out.weights[0] - 1.0).abs() < 1e-12);
        assert!((out.opacity - 1.0).abs() < 1e-12);
        for c in 0..3 {
            assert!((out.color[c] - [0.2, 0.4, 0.8][c]).abs() < 1e-12);
        }
    }

    #[test]
    fn empty_space_returns_background() {
        let bg = [0.1, 0.2, 0.3];
        let colors = [[0.9; 3], [0.8; 3], [0.7; 3]];
        let out = composite(&colors, &[0.0; 3], &[0.0, 1.0, 2.0, 3.0], bg).unwrap();
        assert!(out.weights.iter().all(|&w| w == 0.0));
        assert_eq!(out.opacity, 0.0);
        assert_eq!(out.color, bg);
    }

    #[test]
    fn three_sample_weights_match_direct_formula() {
        // sigma = (0.5, 1.0, 2.0), all deltas 1.
        let sigmas = [0.5, 1.0, 2.0];
        let depths = [0.0, 1.0, 2.0, 3.0];
        let colors = [[1.0, 0.0, 0.0], [0.0, 1.0, 0.0], [0.0, 0.0, 1.0]];
        let out = composite(&colors, &sigmas, &depths, [0.0; 3]).unwrap();
        // Direct scalar evaluation of the weight formula.
        let w1 = 1.0 - (-0.5f64).exp();
        let w2 = (-0.5f64).exp() * (1.0 - (-1.0f64).exp());
        let w3 = (-1.5f64).exp() * (1.0 - (-2.0f64).exp());
        assert!((out.weights[0] - w1).abs() < 1e-12);
        assert!((out.weights[1] - w2).abs() < 1e-12);
        assert!((out.weights[2] - w3).abs() < 1e-12);
        assert!((out.color[0] - w1).abs() < 1e-12);
        assert!((out.color[1] - w2).abs() < 1e-12);
        assert!((out.color[2] - w3).abs() < 1e-12);
    }

    #[test]
    fn opacity_matches_closed_form() {
        let sigmas = [0.3, 0.9, 0.1, 2.5];
        let depths = [0.5, 0.8, 1.9, 2.2, 4.0];
        let colors = [[0.5; 3]; 4];
        let out = composite(&colors, &sigmas, &depths, [0.0; 3]).unwrap();
        let total: f64 = sigmas
            .iter()
            .zip(depths.windows(2))
            .map(|(s, w)| s * (w[1] - w[0]))
            .sum();
        let closed = 1.0 - (-total).exp();
        assert!((out.opacity - closed).abs() < 1e-12);
        assert!(out.weights.iter().all(|&w| (0.0..=1.0).contains(&w)));
    }

    #[test]
    fn constant_color_blends_with_background_by_opacity() {
        let c = [0.25, 0.5, 0.75];
        let bg = [0.9, 0.1, 0.4];
        let sigmas = [0.7, 0.2, 1.1];
        let depths = [0.0, 0.5, 1.5, 2.0];
        let out = composite(&[c, c, c], &sigmas, &depths, bg).unwrap();
        for ch in 0..3 {
            let expect = out.opacity * c[ch] + (1.0 - out.opacity) * bg[ch];
            assert!((out.color[ch] - expect).abs() < 1e-12);
        }
    }

    #[test]
    fn non_increasing_depths_rejected() {
        let err = composite(&[[0.0; 3]; 2], &[1.0; 2], &[0.0, 1.0, 1.0], [0.0; 3]);
        assert!(err.is_err());
        let err = composite(&[[0.0; 3]; 2], &[1.0; 2], &[0.0, 2.0, 1.0], [0.0; 3]);
        assert!(err.is_err());
    }

    #[test]
    fn increasing_any_sigma_never_decreases_opacity() {
        let depths = [0.0, 0.7, 1.1, 2.3, 2.9];
        let colors = [[0.5; 3]; 4];
        let base = [0.4, 0.0, 1.3, 0.2];
        let o0 = composite(&colors, &base, &depths, [0.0; 3]).unwrap().opacity;
        for i in 0..4 {
            let mut s = base;
            s[i] += 0.5;
            let o1 = composite(&colors, &s, &depths, [0.0; 3]).unwrap().opacity;
            assert!(o1 >= o0, "opacity decreased when raising sigma {i}");
        }
    }

    #[test]
    fn backward_matches_finite_differences() {
        let sigmas = vec![0.4, 1.2, 0.05, 2.0];
        let depths = vec![0.2, 0.9, 1.4, 2.0, 2.6];
        let colors = vec![
            [0.9, 0.1, 0.3],
            [0.2, 0.8, 0.5],
            [0.4, 0.4, 0.9],
            [0.6, 0.2, 0.1],
        ];
        let bg = [0.15, 0.25, 0.05];
        let d_color = [0.7, -0.3, 0.5];

        let loss = |colors: &[Rgb], sigmas: &[f64]| -> f64 {
            let out = composite(colors, sigmas, &depths, bg).unwrap();
            (0..3).map(|c| d_color[c] * out.color[c]).sum()
        };

        let fwd = composite(&colors, &sigmas, &depths, bg).unwrap();
        let mut d_colors = vec![[0.0; 3]; 4];
        let mut d_sigmas = vec![0.0; 4];
        composite_backward(
            &colors,
            &depths,
            bg,
            &fwd.weights,
            fwd.opacity,
            d_color,
            &mut d_colors,
            &mut d_sigmas,
        );

        let h = 1e-6;
        for i in 0..4 {
            let mut s = sigmas.clone();
            s[i] += h;
            let lp = loss(&colors, &s);
            s[i] -= 2.0 * h;
            let lm = loss(&colors, &s);
            let num = (lp - lm) / (2.0 * h);
            let diff = (d_sigmas[i] - num).abs();
            assert!(
                diff < 1e-9 || diff / num.abs().max(d_sigmas[i].abs()) < 1e-4,
                "sigma {i}: analytic {} numeric {num}",
                d_sigmas[i]
            );
            for ch in 0..3 {
                let mut cc = colors.clone();
                cc[i][ch] += h;
                let lp = loss(&cc, &sigmas);
                cc[i][ch] -= 2.0 * h;
                let lm = loss(&cc, &sigmas);
                let num = (lp - lm) / (2.0 * h);
                let diff = (d_colors[i][ch] - num).abs();
                assert!(
                    diff < 1e-9 || diff / num.abs().max(d_colors[i][ch].abs()) < 1e-4,
                    "color {i}.{ch}: analytic {} numeric {num}",
                    d_colors[i][ch]
                );
            }
        }
    }
}
