//! Minimal dense MLP on flat weight slices, with reverse-mode gradients.
//!
//! Weights for all layers live in one `Vec<f64>` owned by the caller
//! (see `ParamVec`), laid out `[W0, b0, W1, b1, ...]` with `W` row-major
//! `(out, in)`. Hidden layers use squareplus, a smooth ReLU-like map; the
//! final layer is linear and callers apply their own output map.

/// Squareplus activation: `(x + sqrt(x^2 + 1)) / 2`.
#[inline]
pub fn squareplus(x: f64) -> f64 {
    0.5 * (x + (x * x + 1.0).sqrt())
}

/// Derivative of [`squareplus`].
#[inline]
pub fn squareplus_grad(x: f64) -> f64 {
    0.5 * (1.0 + x / (x * x + 1.0).sqrt())
}

#[inline]
pub fn sigmoid(x: f64) -> f64 {
    1.0 / (1.0 + (-x).exp())
}

/// Numerically stable softplus `ln(1 + e^x)`.
#[inline]
pub fn softplus(x: f64) -> f64 {
    if x > 30.0 {
        x
    } else {
        x.exp().ln_1p()
    }
}

/// Architecture of a dense MLP: `dims = [in, hidden.., out]`.
#[derive(Debug, Clone, PartialEq)]
pub struct MlpSpec {
    pub dims: Vec<usize>,
}

/// Cached forward activations for one input, reused across samples.
#[derive(Debug, Clone, Default)]
pub struct MlpTape {
    /// Pre-activation values per layer (final layer included).
    pre: Vec<Vec<f64>>,
    /// Post-activation values per hidden layer.
    post: Vec<Vec<f64>>,
}

impl MlpSpec {
    pub fn new(dims: Vec<usize>) -> Self {
        assert!(dims.len() >= 2, "mlp needs at least one layer");
        MlpSpec { dims }
    }

    pub fn input_dim(&self) -> usize {
        self.dims[0]
    }

    pub fn output_dim(&self) -> usize {
        *self.dims.last().unwrap()
    }

    pub fn layers(&self) -> usize {
        self.dims.len() - 1
    }

    /// Total scalar count of all weights and biases.
    pub fn weight_count(&self) -> usize {
        (0..self.layers())
            .map(|l| self.dims[l] * self.dims[l + 1] + self.dims[l + 1])
            .sum()
    }

    /// Offset of layer `l`'s weight matrix in the flat weight slice.
    fn layer_offset(&self, l: usize) -> usize {
        (0..l)
            .map(|k| self.dims[k] * self.dims[k + 1] + self.dims[k + 1])
            .sum()
    }

    /// Initializes weights uniformly in +-1/sqrt(fan_in), biases zero.
    pub fn init_weights(&self, rng: &mut impl rand::Rng) -> Vec<f64> {
        let mut w = Vec::with_capacity(self.weight_count());
        for l in 0..self.layers() {
            let (fan_in, fan_out) = (self.dims[l], self.dims[l + 1]);
            let bound = 1.0 / (fan_in as f64).sqrt();
            for _ in 0..fan_in * fan_out {
                w.push(rng.random_range(-bound..bound));
            }
            w.extend(std::iter::repeat(0.0).take(fan_out));
        }
        w
    }

    pub fn tape(&self) -> MlpTape {
        MlpTape {
            pre: (1..self.dims.len()).map(|i| vec![0.0; self.dims[i]]).collect(),
            post: (1..self.dims.len() - 1)
                .map(|i| vec![0.0; self.dims[i]])
                .collect(),
        }
    }

    /// Forward pass; returns the linear output slice (held by the tape).
    pub fn forward<'t>(&self, weights: &[f64], input: &[f64], tape: &'t mut MlpTape) -> &'t [f64] {
        debug_assert_eq!(weights.len(), self.weight_count());
        debug_assert_eq!(input.len(), self.input_dim());
        for l in 0..self.layers() {
            let (n_in, n_out) = (self.dims[l], self.dims[l + 1]);
            let off = self.layer_offset(l);
            let w = &weights[off..off + n_in * n_out];
            let b = &weights[off + n_in * n_out..off + n_in * n_out + n_out];
            // Split so we can read the previous layer while writing this one.
            let (done, rest) = tape.pre.split_at_mut(l);
            let x: &[f64] = if l == 0 { input } else { &tape.post[l - 1] };
            let _ = done;
            let pre = &mut rest[0];
            for o in 0..n_out {
                let row = &w[o * n_in..(o + 1) * n_in];
                let mut acc = b[o];
                for (wi, xi) in row.iter().zip(x.iter()) {
                    acc += wi * xi;
                }
                pre[o] = acc;
            }
            if l + 1 < self.layers() {
                let (pre_ro, post) = (&tape.pre[l], &mut tape.post[l]);
                for (p, q) in pre_ro.iter().zip(post.iter_mut()) {
                    *q = squareplus(*p);
                }
            }
        }
        tape.pre.last().unwrap()
    }

    /// Reverse pass. `d_out` is the gradient w.r.t. the linear output.
    /// Accumulates into `d_weights` (`+=`), overwrites `d_input`.
    pub fn backward(
        &self,
        weights: &[f64],
        input: &[f64],
        tape: &MlpTape,
        d_out: &[f64],
        d_weights: &mut [f64],
        d_input: &mut [f64],
        scratch: &mut MlpScratch,
    ) {
        debug_assert_eq!(d_out.len(), self.output_dim());
        debug_assert_eq!(d_weights.len(), self.weight_count());
        debug_assert_eq!(d_input.len(), self.input_dim());
        // `cur` holds dL/d(pre-activation) of the layer being processed.
        let MlpScratch { cur, prev } = scratch;
        cur.clear();
        cur.extend_from_slice(d_out);
        for l in (0..self.layers()).rev() {
            let (n_in, n_out) = (self.dims[l], self.dims[l + 1]);
            let off = self.layer_offset(l);
            let w = &weights[off..off + n_in * n_out];
            let x: &[f64] = if l == 0 { input } else { &tape.post[l - 1] };

            let (dw, db) = d_weights[off..off + n_in * n_out + n_out].split_at_mut(n_in * n_out);
            for o in 0..n_out {
                let g = cur[o];
                db[o] += g;
                let row = &mut dw[o * n_in..(o + 1) * n_in];
                for (r, xi) in row.iter_mut().zip(x.iter()) {
                    *r += g * xi;
                }
            }

            let d_prev: &mut [f64] = if l == 0 {
                d_input
            } else {
                prev.clear();
                prev.resize(n_in, 0.0);
                prev
            };
            for v in d_prev.iter_mut() {
                *v = 0.0;
            }
            for o in 0..n_out {
                let g = cur[o];
                let row = &w[o * n_in..(o + 1) * n_in];
                for (v, wi) in d_prev.iter_mut().zip(row.iter()) {
                    *v += g * wi;
                }
            }
            if l > 0 {
                // Through the activation into the next iteration's `cur`.
                let pre_prev = &tape.pre[l - 1];
                cur.clear();
                cur.extend(
                    prev.iter()
                        .zip(pre_prev.iter())
                        .map(|(g, p)| g * squareplus_grad(*p)),
                );
            }
        }
    }
}

/// Reusable buffers for [`MlpSpec::backward`].
#[derive(Debug, Clone, Default)]
pub struct MlpScratch {
    cur: Vec<f64>,
    prev: Vec<f64>,
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn fd_check(spec: &MlpSpec, seed: u64) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut w = spec.init_weights(&mut rng);
        let input: Vec<f64> = (0..spec.input_dim())
            .map(|_| rng.random_range(-1.0..1.0))
            .collect();
        let target: Vec<f64> = (0..spec.output_dim())
            .map(|_| rng.random_range(-1.0..1.0))
            .collect();

        let loss = |w: &[f64], tape: &mut MlpTape| -> f64 {
            let out = spec.forward(w, &input, tape);
            out.iter()
                .zip(target.iter())
                .map(|(o, t)| (o - t) * (o - t))
                .sum::<f64>()
        };

        let mut tape = spec.tape();
        let mut scratch = MlpScratch::default();
        let _ = loss(&w, &mut tape);
        let d_out: Vec<f64> = tape
            .pre
            .last()
            .unwrap()
            .iter()
            .zip(target.iter())
            .map(|(o, t)| 2.0 * (o - t))
            .collect();
        let mut dw = vec![0.0; spec.weight_count()];
        let mut dx = vec![0.0; spec.input_dim()];
        spec.backward(&w, &input, &tape, &d_out, &mut dw, &mut dx, &mut scratch);

        let h = 1e-5;
        for p in 0..w.len() {
            let orig = w[p];
            w[p] = orig + h;
            let lp = loss(&w, &mut tape);
            w[p] = orig - h;
            let lm = loss(&w, &mut tape);
            w[p] = orig;
            let numeric = (lp - lm) / (2.0 * h);
            let diff = (dw[p] - numeric).abs();
            let scale = dw[p].abs().max(numeric.abs()).max(1e-6);
            assert!(
                diff / scale < 1e-5,
                "param {p}: analytic {} numeric {}",
                dw[p],
                numeric
            );
        }
    }

    #[test]
    fn gradients_match_finite_differences() {
        fd_check(&MlpSpec::new(vec![5, 8, 3]), 1);
        fd_check(&MlpSpec::new(vec![7, 16, 1]), 2);
    }

    #[test]
    fn squareplus_is_positive_and_smooth() {
        for i in -100..100 {
            let x = i as f64 * 0.1;
            assert!(squareplus(x) > 0.0);
            let h = 1e-6;
            let num = (squareplus(x + h) - squareplus(x - h)) / (2.0 * h);
            assert!((num - squareplus_grad(x)).abs() < 1e-8);
        }
    }

    #[test]
    fn init_is_seed_deterministic() {
        let spec = MlpSpec::new(vec![4, 8, 2]);
        let a = spec.init_weights(&mut ChaCha8Rng::seed_from_u64(3));
        let b = spec.init_weights(&mut ChaCha8Rng::seed_from_u64(3));
        let c = spec.init_weights(&mut ChaCha8Rng::seed_from_u64(4));
        assert_eq!(a, b);
        assert_ne!(a, c);
    }
}
