//! Training losses for the noise, velocity and autoencoder objectives, plus
//! the spectral variant that compares magnitude and phase of the signal
//! estimate.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fft::fft2_mag_phase;
use crate::image::Image;

/// Residual norm used inside the losses. Mean absolute error is the default;
/// mean squared error sits behind this flag.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum LossNorm {
    #[default]
    L1,
    L2,
}

fn mean_residual(target: &Image, pred: &Image, norm: LossNorm) -> Result<f64> {
    if target.height() != pred.height() || target.width() != pred.width() {
        return Err(Error::Shape(format!(
            "{}x{} vs {}x{}",
            target.height(),
            target.width(),
            pred.height(),
            pred.width()
        )));
    }
    let n = target.pixels().len() as f64;
    let sum: f64 = target
        .pixels()
        .iter()
        .zip(pred.pixels())
        .map(|(&t, &p)| match norm {
            LossNorm::L1 => (t - p).abs(),
            LossNorm::L2 => (t - p) * (t - p),
        })
        .sum();
    Ok(sum / n)
}

/// Noise-prediction loss: mean residual between added and predicted noise.
pub fn loss_dm(eps: &Image, eps_pred: &Image, norm: LossNorm) -> Result<f64> {
    mean_residual(eps, eps_pred, norm)
}

/// Velocity-prediction loss.
pub fn loss_fm(v_target: &Image, v_pred: &Image, norm: LossNorm) -> Result<f64> {
    mean_residual(v_target, v_pred, norm)
}

/// Plain mean absolute error, the autoencoder baseline objective.
pub fn loss_mae(target: &Image, pred: &Image) -> Result<f64> {
    mean_residual(target, pred, LossNorm::L1)
}

/// Wrap an angle difference into (−π, π].
pub(crate) fn wrap_phase(d: f64) -> f64 {
    let w = (d + std::f64::consts::PI).rem_euclid(std::f64::consts::TAU) - std::f64::consts::PI;
    if w <= -std::f64::consts::PI {
        w + std::f64::consts::TAU
    } else {
        w
    }
}

/// Mean spectral magnitude gap and mean wrapped phase gap between two images
/// of equal shape.
pub fn spectral_distance(a: &Image, b: &Image) -> Result<(f64, f64)> {
    if a.height() != b.height() || a.width() != b.width() {
        return Err(Error::Shape(format!(
            "{}x{} vs {}x{}",
            a.height(),
            a.width(),
            b.height(),
            b.width()
        )));
    }
    let (mag_a, phase_a) = fft2_mag_phase(a)?;
    let (mag_b, phase_b) = fft2_mag_phase(b)?;
    let n = (a.height() * a.width()) as f64;
    let mag_gap: f64 = mag_a
        .pixels()
        .iter()
        .zip(mag_b.pixels())
        .map(|(&x, &y)| (x - y).abs())
        .sum::<f64>()
        / n;
    let phase_gap: f64 = phase_a
        .pixels()
        .iter()
        .zip(phase_b.pixels())
        .map(|(&x, &y)| wrap_phase(x - y).abs())
        .sum::<f64>()
        / n;
    Ok((mag_gap, phase_gap))
}

/// Spectrum-regularized noise loss:
/// ½·noise residual + ¼·mean magnitude gap + ¼·mean wrapped phase gap, where
/// `x0_recon` is the signal estimate implied by the predicted noise.
pub fn loss_fft_dm(
    x0: &Image,
    x0_recon: &Image,
    eps: &Image,
    eps_pred: &Image,
    norm: LossNorm,
) -> Result<f64> {
    let dm = loss_dm(eps, eps_pred, norm)?;
    let (mag_gap, phase_gap) = spectral_distance(x0, x0_recon)?;
    Ok(0.5 * dm + 0.25 * mag_gap + 0.25 * phase_gap)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::image::NormState;
    use rand::Rng;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn rand_image(h: usize, w: usize, seed: u64) -> Image {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        Image::from_fn(h, w, NormState::Raw, |_, _| rng.random_range(-1.0..1.0)).unwrap()
    }

    #[test]
    fn zero_at_target_for_all_losses() {
        let a = rand_image(6, 6, 1);
        assert_eq!(loss_dm(&a, &a, LossNorm::L1).unwrap(), 0.0);
        assert_eq!(loss_dm(&a, &a, LossNorm::L2).unwrap(), 0.0);
        assert_eq!(loss_fm(&a, &a, LossNorm::L1).unwrap(), 0.0);
        assert_eq!(loss_mae(&a, &a).unwrap(), 0.0);
        assert_eq!(loss_fft_dm(&a, &a, &a, &a, LossNorm::L1).unwrap(), 0.0);
    }

    #[test]
    fn constant_offset_gives_the_offset() {
        let a = rand_image(5, 7, 2);
        let b = Image::from_fn(5, 7, NormState::Raw, |r, c| a.get(r, c) + 0.1).unwrap();
        assert!((loss_dm(&a, &b, LossNorm::L1).unwrap() - 0.1).abs() < 1e-12);
        assert!((loss_dm(&a, &b, LossNorm::L2).unwrap() - 0.01).abs() < 1e-12);
        assert!((loss_mae(&a, &b).unwrap() - 0.1).abs() < 1e-12);
    }

    #[test]
    fn losses_match_scalar_oracles() {
        let a = rand_image(6, 4, 3);
        let b = rand_image(6, 4, 4);
        let mut l1 = 0.0;
        let mut l2 = 0.0;
        for r in 0..6 {
            for c in 0..4 {
                let d = a.get(r, c) - b.get(r, c);
                l1 += d.abs();
                l2 += d * d;
            }
        }
        l1 /= 24.0;
        l2 /= 24.0;
        assert!((loss_dm(&a, &b, LossNorm::L1).unwrap() - l1).abs() < 1e-15);
        assert!((loss_dm(&a, &b, LossNorm::L2).unwrap() - l2).abs() < 1e-15);
        assert!((loss_fm(&a, &b, LossNorm::L1).unwrap() - l1).abs() < 1e-15);
        assert!((loss_mae(&a, &b).unwrap() - l1).abs() < 1e-15);
    }

    #[test]
    fn shape_mismatch_is_rejected() {
        let a = rand_image(4, 4, 5);
        let b = rand_image(4, 5, 6);
        assert!(loss_dm(&a, &b, LossNorm::L1).is_err());
        assert!(spectral_distance(&a, &b).is_err());
    }

    #[test]
    fn wrap_phase_lands_in_half_open_interval() {
        use std::f64::consts::PI;
        for d in [-7.0, -PI, -0.1, 0.0, 0.1, PI, 2.0 * PI, 6.9] {
            let w = wrap_phase(d);
            assert!(w > -PI && w <= PI, "{d} -> {w}");
            // Same angle modulo 2π.
            assert!(((d - w) / (2.0 * PI) - ((d - w) / (2.0 * PI)).round()).abs() < 1e-12);
        }
        assert!((wrap_phase(3.0 * PI) - PI).abs() < 1e-12);
        assert!((wrap_phase(-1.5 * PI) - 0.5 * PI).abs() < 1e-12);
    }

    #[test]
    fn matching_spectra_reduce_to_half_the_noise_loss() {
        let x0 = rand_image(8, 8, 7);
        let eps = rand_image(8, 8, 8);
        let eps_pred = rand_image(8, 8, 9);
        let full = loss_fft_dm(&x0, &x0, &eps, &eps_pred, LossNorm::L1).unwrap();
        let dm = loss_dm(&eps, &eps_pred, LossNorm::L1).unwrap();
        assert!((full - 0.5 * dm).abs() < 1e-12);
    }

    #[test]
    fn circular_shift_keeps_magnitude_and_moves_phase() {
        let x0 = rand_image(8, 8, 10);
        let shifted = Image::from_fn(8, 8, NormState::Raw, |r, c| {
            x0.get((r + 1) % 8, (c + 2) % 8)
        })
        .unwrap();
        let (mag_gap, phase_gap) = spectral_distance(&x0, &shifted).unwrap();
        assert!(mag_gap < 1e-12, "magnitude gap {mag_gap}");
        assert!(phase_gap > 0.01, "phase gap {phase_gap}");
    }

    #[test]
    fn spectral_loss_matches_naive_dft_oracle() {
        let x0 = rand_image(8, 8, 11);
        let x0_recon = rand_image(8, 8, 12);
        let eps = rand_image(8, 8, 13);
        let eps_pred = rand_image(8, 8, 14);

        // Independent O(N^4) DFT.
        let dft = |img: &Image, k: usize, l: usize| -> (f64, f64) {
            let (mut re, mut im) = (0.0, 0.0);
            for r in 0..8 {
                for c in 0..8 {
                    let ang = -std::f64::consts::TAU
                        * (k as f64 * r as f64 / 8.0 + l as f64 * c as f64 / 8.0);
                    re += img.get(r, c) * ang.cos();
                    im += img.get(r, c) * ang.sin();
                }
            }
            (re, im)
        };
        let mut mag_gap = 0.0;
        let mut phase_gap = 0.0;
        for k in 0..8 {
            for l in 0..8 {
                let (re_a, im_a) = dft(&x0, k, l);
                let (re_b, im_b) = dft(&x0_recon, k, l);
                mag_gap += ((re_a * re_a + im_a * im_a).sqrt()
                    - (re_b * re_b + im_b * im_b).sqrt())
                .abs();
                phase_gap += wrap_phase(im_a.atan2(re_a) - im_b.atan2(re_b)).abs();
            }
        }
        mag_gap /= 64.0;
        phase_gap /= 64.0;
        let mut dm = 0.0;
        for (e, p) in eps.pixels().iter().zip(eps_pred.pixels()) {
            dm += (e - p).abs();
        }
        dm /= 64.0;
        let expect = 0.5 * dm + 0.25 * mag_gap + 0.25 * phase_gap;

        let got = loss_fft_dm(&x0, &x0_recon, &eps, &eps_pred, LossNorm::L1).unwrap();
        assert!((got - expect).abs() < 1e-6, "{got} vs {expect}");
    }
}
