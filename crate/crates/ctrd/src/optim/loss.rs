//! Training losses: photometric MSE, the consolidation penalty pieces, and
//! the distillation schedule used by the biased-sampling baseline.

use crate::error::{Error, Result};
use crate::math::Rgb;

/// Mean squared error over all channels of a ray batch; the standard
/// photometric NeRF loss.
pub fn nerf_loss(pred: &[Rgb], target: &[Rgb]) -> Result<f64> {
    if pred.len() != target.len() {
        return Err(Error::domain(format!(
            "nerf_loss batch mismatch: {} predictions vs {} targets",
            pred.len(),
            target.len()
        )));
    }
    if pred.is_empty() {
        return Err(Error::domain("nerf_loss needs a nonempty batch"));
    }
    let mut acc = 0.0;
    for (p, t) in pred.iter().zip(target.iter()) {
        for c in 0..3 {
            let r = p[c] - t[c];
            acc += r * r;
        }
    }
    Ok(acc / (3 * pred.len()) as f64)
}

/// Charbonnier penalty `sqrt(x^2 + eps^2)`: smooth, even, and >= eps.
pub fn charbonnier(x: f64, eps: f64) -> f64 {
    assert!(eps > 0.0, "charbonnier needs eps > 0");
    (x * x + eps * eps).sqrt()
}

/// Distillation weight schedule `(cos(pi (1 + r)) + 1) / 2` over training
/// progress `r in [0, 1]`: 0 at the start, 1 at the end, nondecreasing.
pub fn meil_lambda(r: f64) -> Result<f64> {
    if !(0.0..=1.0).contains(&r) {
        return Err(Error::domain(format!(
            "training progress {r} outside [0, 1]"
        )));
    }
    Ok(((std::f64::consts::PI * (1.0 + r)).cos() + 1.0) / 2.0)
}

/// Loss for the biased-sampling replay baseline: photometric MSE on new rays
/// plus a scheduled per-channel Charbonnier between the frozen teacher's and
/// the student's renders of old rays. Teacher colors are constants.
///
/// With no old rays this reduces exactly to [`nerf_loss`] on the new rays.
pub fn meil_loss(
    new_pred: &[Rgb],
    new_target: &[Rgb],
    old_student: &[Rgb],
    old_teacher: &[Rgb],
    r: f64,
    eps: f64,
) -> Result<f64> {
    let mut loss = nerf_loss(new_pred, new_target)?;
    if old_student.len() != old_teacher.len() {
        return Err(Error::domain(format!(
            "meil_loss old-ray mismatch: {} student vs {} teacher",
            old_student.len(),
            old_teacher.len()
        )));
    }
    if !old_student.is_empty() {
        let lambda = meil_lambda(r)?;
        let mut old = 0.0;
        for (s, t) in old_student.iter().zip(old_teacher.iter()) {
            for c in 0..3 {
                old += charbonnier(t[c] - s[c], eps);
            }
        }
        loss += lambda * old / old_student.len() as f64;
    }
    Ok(loss)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn zero_residual_gives_zero_loss() {
        let batch = vec![[0.3, 0.4, 0.5]; 7];
        assert_eq!(nerf_loss(&batch, &batch).unwrap(), 0.0);
    }

    #[test]
    fn constant_residual() {
        let pred = vec![[0.6, 0.6, 0.6]; 5];
        let target = vec![[0.5, 0.5, 0.5]; 5];
        let l = nerf_loss(&pred, &target).unwrap();
        assert!((l - 0.01).abs() < 1e-15);
    }

    #[test]
    fn matches_scalar_loop() {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(4);
        let pred: Vec<[f64; 3]> = (0..64)
            .map(|_| std::array::from_fn(|_| rng.random_range(0.0..1.0)))
            .collect();
        let target: Vec<[f64; 3]> = (0..64)
            .map(|_| std::array::from_fn(|_| rng.random_range(0.0..1.0)))
            .collect();
        let fast = nerf_loss(&pred, &target).unwrap();
        let mut acc = 0.0;
        let mut count = 0;
        for i in 0..pred.len() {
            for c in 0..3 {
                acc += (pred[i][c] - target[i][c]).powi(2);
                count += 1;
            }
        }
        assert!((fast - acc / count as f64).abs() < 1e-12);
    }

    #[test]
    fn shape_mismatch_is_domain_error() {
        let a = vec![[0.0; 3]; 2];
        let b = vec![[0.0; 3]; 3];
        assert!(nerf_loss(&a, &b).is_err());
    }

    #[test]
    fn charbonnier_known_values() {
        assert_eq!(charbonnier(0.0, 1e-3), 1e-3);
        assert_eq!(charbonnier(3.0, 4.0), 5.0);
        // Asymptotically |x|: within 1% at x = 100 eps.
        let eps = 1e-3;
        let x = 100.0 * eps;
        assert!((charbonnier(x, eps) - x).abs() / x < 0.01);
    }

    #[test]
    fn meil_lambda_endpoints_and_midpoint() {
        assert_eq!(meil_lambda(0.0).unwrap(), 0.0);
        assert!((meil_lambda(0.5).unwrap() - 0.5).abs() < 1e-15);
        assert_eq!(meil_lambda(1.0).unwrap(), 1.0);
        assert!(meil_lambda(-0.01).is_err());
        assert!(meil_lambda(1.01).is_err());
    }

    #[test]
    fn meil_lambda_is_monotone_on_grid() {
        let mut prev = -1.0;
        for k in 0..=1000 {
            let v = meil_lambda(k as f64 / 1000.0).unwrap();
            assert!(v >= prev);
            prev = v;
        }
    }

    #[test]
    fn meil_loss_without_old_rays_is_nerf_loss() {
        let pred = vec![[0.2, 0.3, 0.4]; 4];
        let target = vec![[0.1, 0.3, 0.9]; 4];
        let a = meil_loss(&pred, &target, &[], &[], 0.7, 1e-3).unwrap();
        assert_eq!(a, nerf_loss(&pred, &target).unwrap());
    }

    #[test]
    fn meil_loss_old_term_vanishes_at_r_zero() {
        let pred = vec![[0.2; 3]; 2];
        let target = vec![[0.25; 3]; 2];
        let student = vec![[0.9; 3]; 3];
        let teacher = vec![[0.1; 3]; 3];
        let with_old = meil_loss(&pred, &target, &student, &teacher, 0.0, 1e-3).unwrap();
        assert_eq!(with_old, nerf_loss(&pred, &target).unwrap());
    }

    #[test]
    fn meil_loss_matched_teacher_gives_lambda_times_eps() {
        let pred = vec![[0.2; 3]; 2];
        let target = vec![[0.2; 3]; 2];
        let old = vec![[0.4, 0.5, 0.6]; 5];
        let eps = 1e-3;
        let r = 0.6;
        let got = meil_loss(&pred, &target, &old, &old, r, eps).unwrap();
        // rho(0) = eps per channel, 3 channels, averaged over rays.
        let expect = meil_lambda(r).unwrap() * 3.0 * eps;
        assert!((got - expect).abs() < 1e-15);
    }

    proptest! {
        #[test]
        fn charbonnier_is_even_and_at_least_eps(x in -10.0f64..10.0, eps in 1e-6f64..1.0) {
            let v = charbonnier(x, eps);
            prop_assert!(v >= eps);
            prop_assert!((v - charbonnier(-x, eps)).abs() < 1e-12);
            prop_assert!(v >= x.abs());
        }
    }
}
