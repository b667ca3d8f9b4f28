//! Elastic weight consolidation: Fisher-diagonal estimation and the
//! quadratic anchor penalty.

use crate::error::{Error, Result};
use crate::field::{BlockId, ParamVec};

/// Diagonal Fisher estimate together with the reference parameters it was
/// taken at. Embedding rows created after this snapshot carry no penalty.
#[derive(Debug, Clone)]
pub struct FisherDiag {
    pub diag: ParamVec,
    pub reference: ParamVec,
}

impl FisherDiag {
    fn check_alignment(&self, params: &ParamVec) -> Result<()> {
        for id in BlockId::ALL {
            let f = self.diag.block(id).len();
            let r = self.reference.block(id).len();
            let p = params.block(id).len();
            if f != r {
                return Err(Error::domain(format!(
                    "fisher diagonal and reference disagree on {id:?}: {f} vs {r}"
                )));
            }
            let emb = matches!(id, BlockId::AppEmb | BlockId::GeoEmb);
            if (emb && f > p) || (!emb && f != p) {
                return Err(Error::domain(format!(
                    "fisher block {id:?} of length {f} misaligned with parameters ({p})"
                )));
            }
        }
        Ok(())
    }
}

/// Quadratic consolidation penalty `sum_i (lambda/2) F_i (p_i - ref_i)^2`.
/// Embedding entries beyond the snapshot length are excluded.
pub fn ewc_penalty(params: &ParamVec, fisher: &FisherDiag, lambda: f64) -> Result<f64> {
    fisher.check_alignment(params)?;
    if lambda == 0.0 {
        return Ok(0.0);
    }
    let mut acc = 0.0;
    for id in BlockId::ALL {
        let f = fisher.diag.block(id);
        let r = fisher.reference.block(id);
        let p = params.block(id);
        for i in 0..f.len() {
            let d = p[i] - r[i];
            acc += f[i] * d * d;
        }
    }
    Ok(0.5 * lambda * acc)
}

/// Total consolidated loss: `base + penalty`. Bitwise equal to `base` when
/// `lambda` is zero or the parameters sit exactly at the reference.
pub fn ewc_loss(base: f64, params: &ParamVec, fisher: &FisherDiag, lambda: f64) -> Result<f64> {
    let penalty = ewc_penalty(params, fisher, lambda)?;
    if penalty == 0.0 {
        return Ok(base);
    }
    Ok(base + penalty)
}

/// Accumulates the penalty gradient `lambda F_i (p_i - ref_i)` into `grads`.
pub fn ewc_penalty_grad(
    params: &ParamVec,
    fisher: &FisherDiag,
    lambda: f64,
    grads: &mut ParamVec,
) -> Result<()> {
    fisher.check_alignment(params)?;
    if lambda == 0.0 {
        return Ok(());
    }
    for id in BlockId::ALL {
        let f = fisher.diag.block(id);
        let r = fisher.reference.block(id);
        let p = params.block(id).to_vec();
        let g = grads.block_mut(id);
        for i in 0..f.len() {
            g[i] += lambda * f[i] * (p[i] - r[i]);
        }
    }
    Ok(())
}

/// Empirical Fisher diagonal: the mean over batches of squared data-loss
/// gradients. `grad_of_batch(b, out)` must write batch `b`'s gradient into
/// `out` (already zeroed). Batches are reduced in index order, so the result
/// is independent of scheduling.
pub fn estimate_fisher<F>(params: &ParamVec, n_batches: usize, mut grad_of_batch: F) -> FisherDiag
where
    F: FnMut(usize, &mut ParamVec),
{
    assert!(n_batches >= 1, "estimate_fisher needs n_batches >= 1");
    let mut diag = ParamVec::zeros_like(params);
    let mut g = ParamVec::zeros_like(params);
    for b in 0..n_batches {
        g.fill(0.0);
        grad_of_batch(b, &mut g);
        for id in BlockId::ALL {
            let src = g.block(id);
            let dst = diag.block_mut(id);
            for (d, s) in dst.iter_mut().zip(src.iter()) {
                *d += s * s;
            }
        }
    }
    let scale = 1.0 / n_batches as f64;
    for id in BlockId::ALL {
        diag.block_mut(id).iter_mut().for_each(|v| *v *= scale);
    }
    FisherDiag {
        diag,
        reference: params.clone(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn three_param() -> ParamVec {
        ParamVec::zeros(0, 3, 0, 0, 0)
    }

    #[test]
    fn hand_computed_toy_penalty() {
        // F = (1, 2, 0), delta = (0.1, 0.1, 5), lambda = 2
        // penalty = (2/2) * (1*0.01 + 2*0.01 + 0) = 0.03
        let mut params = three_param();
        params.sigma_mlp.copy_from_slice(&[0.1, 0.1, 5.0]);
        let mut diag = three_param();
        diag.sigma_mlp.copy_from_slice(&[1.0, 2.0, 0.0]);
        let fisher = FisherDiag {
            diag,
            reference: three_param(),
        };
        let p = ewc_penalty(&params, &fisher, 2.0).unwrap();
        assert!((p - 0.03).abs() < 1e-15);
    }

    #[test]
    fn lambda_zero_returns_base_bitwise() {
        let params = three_param();
        let fisher = FisherDiag {
            diag: three_param(),
            reference: three_param(),
        };
        let base = 0.123456789;
        assert_eq!(ewc_loss(base, &params, &fisher, 0.0).unwrap(), base);
    }

    #[test]
    fn at_reference_returns_base_bitwise() {
        let mut params = three_param();
        params.sigma_mlp.copy_from_slice(&[1.0, -2.0, 3.0]);
        let mut diag = three_param();
        diag.sigma_mlp.fill(5.0);
        let fisher = FisherDiag {
            diag,
            reference: params.clone(),
        };
        let base = 0.777;
        assert_eq!(ewc_loss(base, &params, &fisher, 1e5).unwrap(), base);
    }

    #[test]
    fn misaligned_fisher_is_domain_error() {
        let params = three_param();
        let fisher = FisherDiag {
            diag: ParamVec::zeros(0, 4, 0, 0, 0),
            reference: ParamVec::zeros(0, 4, 0, 0, 0),
        };
        assert!(ewc_penalty(&params, &fisher, 1.0).is_err());
    }

    #[test]
    fn embeddings_created_after_snapshot_are_excluded() {
        let mut params = ParamVec::zeros(0, 1, 0, 2, 0);
        params.app_emb.copy_from_slice(&[0.5, 0.5]);
        let fisher = FisherDiag {
            diag: {
                let mut d = params.clone();
                d.fill(1.0);
                d
            },
            reference: params.clone(),
        };
        // Two new embedding scalars appear after the snapshot and drift far.
        params.app_emb.extend_from_slice(&[100.0, -100.0]);
        let p = ewc_penalty(&params, &fisher, 2.0).unwrap();
        assert_eq!(p, 0.0);
        let mut g = ParamVec::zeros_like(&params);
        ewc_penalty_grad(&params, &fisher, 2.0, &mut g).unwrap();
        assert_eq!(&g.app_emb[2..], &[0.0, 0.0]);
    }

    #[test]
    fn single_batch_fisher_is_squared_gradient() {
        let params = three_param();
        let fisher = estimate_fisher(&params, 1, |_, g| {
            g.sigma_mlp.copy_from_slice(&[0.5, -2.0, 3.0]);
        });
        assert_eq!(fisher.diag.sigma_mlp, vec![0.25, 4.0, 9.0]);
    }

    #[test]
    fn zero_gradient_gives_zero_fisher_and_doubling_quadruples() {
        let params = three_param();
        let base = estimate_fisher(&params, 4, |b, g| {
            g.sigma_mlp[0] = b as f64;
            // sigma_mlp[1] stays zero in every batch.
            g.sigma_mlp[2] = 1.0;
        });
        assert_eq!(base.diag.sigma_mlp[1], 0.0);
        let doubled = estimate_fisher(&params, 4, |b, g| {
            g.sigma_mlp[0] = 2.0 * b as f64;
            g.sigma_mlp[2] = 2.0;
        });
        for i in 0..3 {
            assert!((doubled.diag.sigma_mlp[i] - 4.0 * base.diag.sigma_mlp[i]).abs() < 1e-12);
        }
    }
}
