//! Peak signal-to-noise ratio and structural similarity.
//!
//! Both scores compare images on the unit range: symmetric-normalized inputs
//! are affinely remapped to [0, 1] first, raw inputs are rejected, so the
//! peak value is always 1.

use crate::error::{Error, Result};
use crate::image::{Image, NormState};

fn check_shapes(a: &Image, b: &Image) -> Result<()> {
    if a.height() != b.height() || a.width() != b.width() {
        return Err(Error::Shape(format!(
            "{}x{} vs {}x{}",
            a.height(),
            a.width(),
            b.height(),
            b.width()
        )));
    }
    Ok(())
}

/// View on the unit range. Exact at the endpoints: -1 maps to 0 and 1 to 1.
pub(crate) fn unit_view(img: &Image) -> Result<Vec<f64>> {
    match img.norm_state() {
        NormState::Unit => Ok(img.pixels().to_vec()),
        NormState::Symmetric => Ok(img.pixels().iter().map(|&v| (v + 1.0) / 2.0).collect()),
        NormState::Raw => Err(Error::InvalidParam(
            "scores need unit or symmetric normalized images, got raw values".into(),
        )),
    }
}

pub fn psnr_with_max(a: &Image, b: &Image, max_value: f64) -> Result<f64> {
    check_shapes(a, b)?;
    if !(max_value > 0.0) {
        return Err(Error::InvalidParam(format!("peak value {max_value} must be positive")));
    }
    let av = unit_view(a)?;
    let bv = unit_view(b)?;
    let n = av.len() as f64;
    let mse: f64 = av
        .iter()
        .zip(&bv)
        .map(|(&x, &y)| (x - y) * (x - y))
        .sum::<f64>()
        / n;
    if mse == 0.0 {
        return Ok(f64::INFINITY);
    }
    Ok(10.0 * (max_value * max_value / mse).log10())
}

/// PSNR in decibels on the unit range; identical images give +infinity.
pub fn psnr(a: &Image, b: &Image) -> Result<f64> {
    psnr_with_max(a, b, 1.0)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum SsimMode {
    /// One evaluation of the formula over the whole image.
    Global,
    /// Mean over 11x11 Gaussian-weighted windows (sigma 1.5), fully inside
    /// the image.
    Windowed,
}

const C1: f64 = 0.01 * 0.01;
const C2: f64 = 0.03 * 0.03;
const WINDOW: usize = 11;
const WINDOW_SIGMA: f64 = 1.5;

fn ssim_formula(mx: f64, my: f64, vx: f64, vy: f64, cov: f64) -> f64 {
    ((2.0 * mx * my + C1) * (2.0 * cov + C2)) / ((mx * mx + my * my + C1) * (vx + vy + C2))
}

fn window_taps() -> Vec<f64> {
    let half = (WINDOW / 2) as i64;
    let mut taps: Vec<f64> = (-half..=half)
        .map(|i| (-(i as f64 * i as f64) / (2.0 * WINDOW_SIGMA * WINDOW_SIGMA)).exp())
        .collect();
    let sum: f64 = taps.iter().sum();
    for t in &mut taps {
        *t /= sum;
    }
    taps
}

/// Horizontal then vertical valid-mode weighted filtering; output is
/// (h-10) x (w-10).
fn filter_valid(data: &[f64], h: usize, w: usize, taps: &[f64]) -> Vec<f64> {
    let ow = w - WINDOW + 1;
    let oh = h - WINDOW + 1;
    let mut horiz = vec![0.0; h * ow];
    for r in 0..h {
        for c in 0..ow {
            let mut acc = 0.0;
            for (k, &t) in taps.iter().enumerate() {
                acc += t * data[r * w + c + k];
            }
            horiz[r * ow + c] = acc;
        }
    }
    let mut out = vec![0.0; oh * ow];
    for r in 0..oh {
        for c in 0..ow {
            let mut acc = 0.0;
            for (k, &t) in taps.iter().enumerate() {
                acc += t * horiz[(r + k) * ow + c];
            }
            out[r * ow + c] = acc;
        }
    }
    out
}

/// Structural similarity on the unit range.
pub fn ssim(a: &Image, b: &Image, mode: SsimMode) -> Result<f64> {
    check_shapes(a, b)?;
    let x = unit_view(a)?;
    let y = unit_view(b)?;
    match mode {
        SsimMode::Global => {
            let n = x.len() as f64;
            let mx = x.iter().sum::<f64>() / n;
            let my = y.iter().sum::<f64>() / n;
            let vx = x.iter().map(|&v| (v - mx) * (v - mx)).sum::<f64>() / n;
            let vy = y.iter().map(|&v| (v - my) * (v - my)).sum::<f64>() / n;
            let cov = x
                .iter()
                .zip(&y)
                .map(|(&u, &v)| (u - mx) * (v - my))
                .sum::<f64>()
                / n;
            Ok(ssim_formula(mx, my, vx, vy, cov))
        }
        SsimMode::Windowed => {
            let (h, w) = (a.height(), a.width());
            if h < WINDOW || w < WINDOW {
                return Err(Error::Shape(format!(
                    "windowed mode needs at least {WINDOW}x{WINDOW} pixels, got {h}x{w}"
                )));
            }
            let taps = window_taps();
            let xx: Vec<f64> = x.iter().map(|&v| v * v).collect();
            let yy: Vec<f64> = y.iter().map(|&v| v * v).collect();
            let xy: Vec<f64> = x.iter().zip(&y).map(|(&u, &v)| u * v).collect();
            let mx = filter_valid(&x, h, w, &taps);
            let my = filter_valid(&y, h, w, &taps);
            let mxx = filter_valid(&xx, h, w, &taps);
            let myy = filter_valid(&yy, h, w, &taps);
            let mxy = filter_valid(&xy, h, w, &taps);
            let mut total = 0.0;
            for i in 0..mx.len() {
                let vx = mxx[i] - mx[i] * mx[i];
                let vy = myy[i] - my[i] * my[i];
                let cov = mxy[i] - mx[i] * my[i];
                total += ssim_formula(mx[i], my[i], vx, vy, cov);
            }
            Ok(total / mx.len() as f64)
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::Rng;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn rand_unit(h: usize, w: usize, seed: u64) -> Image {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        Image::from_fn(h, w, NormState::Unit, |_, _| rng.random::<f64>()).unwrap()
    }

    #[test]
    fn psnr_twenty_db_case() {
        // Uniform squared error of 0.01.
        let a = Image::new(10, 10, vec![0.5; 100], NormState::Unit).unwrap();
        let b = Image::new(10, 10, vec![0.6; 100], NormState::Unit).unwrap();
        let got = psnr(&a, &b).unwrap();
        assert!((got - 20.0).abs() < 1e-12, "{got}");
    }

    #[test]
    fn psnr_identical_is_infinite() {
        let a = rand_unit(8, 8, 1);
        assert_eq!(psnr(&a, &a).unwrap(), f64::INFINITY);
    }

    #[test]
    fn psnr_matches_double_loop_oracle() {
        let a = rand_unit(9, 7, 2);
        let b = rand_unit(9, 7, 3);
        let mut mse = 0.0;
        for r in 0..9 {
            for c in 0..7 {
                let d = a.get(r, c) - b.get(r, c);
                mse += d * d;
            }
        }
        mse /= 63.0;
        let expect = 10.0 * (1.0 / mse).log10();
        assert!((psnr(&a, &b).unwrap() - expect).abs() < 1e-9);
    }

    #[test]
    fn psnr_is_symmetric_and_rejects_bad_inputs() {
        let a = rand_unit(6, 6, 4);
        let b = rand_unit(6, 6, 5);
        assert_eq!(psnr(&a, &b).unwrap(), psnr(&b, &a).unwrap());
        let c = rand_unit(6, 7, 6);
        assert!(psnr(&a, &c).is_err());
        let raw = Image::new(6, 6, vec![3.0; 36], NormState::Raw).unwrap();
        assert!(psnr(&a, &raw).is_err());
        assert!(psnr_with_max(&a, &b, 0.0).is_err());
    }

    #[test]
    fn symmetric_images_are_scored_on_the_unit_range() {
        // The same underlying signal in both normalizations scores equally.
        let a = rand_unit(8, 8, 7);
        let b = rand_unit(8, 8, 8);
        let to_sym = |img: &Image| {
            Image::new(
                8,
                8,
                img.pixels().iter().map(|&v| 2.0 * v - 1.0).collect(),
                NormState::Symmetric,
            )
            .unwrap()
        };
        let p_unit = psnr(&a, &b).unwrap();
        let p_sym = psnr(&to_sym(&a), &to_sym(&b)).unwrap();
        assert!((p_unit - p_sym).abs() < 1e-9);
        let s_unit = ssim(&a, &b, SsimMode::Global).unwrap();
        let s_sym = ssim(&to_sym(&a), &to_sym(&b), SsimMode::Global).unwrap();
        assert!((s_unit - s_sym).abs() < 1e-9);
    }

    #[test]
    fn ssim_identical_images_score_one() {
        let a = rand_unit(16, 16, 9);
        assert!((ssim(&a, &a, SsimMode::Global).unwrap() - 1.0).abs() < 1e-12);
        assert!((ssim(&a, &a, SsimMode::Windowed).unwrap() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn ssim_constant_zero_vs_one() {
        let a = Image::new(12, 12, vec![0.0; 144], NormState::Unit).unwrap();
        let b = Image::new(12, 12, vec![1.0; 144], NormState::Unit).unwrap();
        let got = ssim(&a, &b, SsimMode::Global).unwrap();
        let expect = C1 / (1.0 + C1);
        assert!((got - expect).abs() < 1e-12, "{got} vs {expect}");
        assert!((got - 9.999e-5).abs() < 1e-8);
    }

    #[test]
    fn ssim_is_symmetric() {
        let a = rand_unit(16, 16, 10);
        let b = rand_unit(16, 16, 11);
        for mode in [SsimMode::Global, SsimMode::Windowed] {
            let xy = ssim(&a, &b, mode).unwrap();
            let yx = ssim(&b, &a, mode).unwrap();
            assert!((xy - yx).abs() < 1e-12);
            assert!((-1.0..=1.0).contains(&xy));
        }
    }

    #[test]
    fn windowed_ssim_matches_naive_per_window_oracle() {
        let a = rand_unit(14, 13, 12);
        let b = rand_unit(14, 13, 13);

        // Direct per-window weighted statistics with an outer-product window.
        let taps = window_taps();
        let mut weights = vec![0.0; WINDOW * WINDOW];
        for i in 0..WINDOW {
            for j in 0..WINDOW {
                weights[i * WINDOW + j] = taps[i] * taps[j];
            }
        }
        let mut total = 0.0;
        let mut count = 0;
        for top in 0..=14 - WINDOW {
            for left in 0..=13 - WINDOW {
                let (mut mx, mut my) = (0.0, 0.0);
                for i in 0..WINDOW {
                    for j in 0..WINDOW {
                        let wgt = weights[i * WINDOW + j];
                        mx += wgt * a.get(top + i, left + j);
                        my += wgt * b.get(top + i, left + j);
                    }
                }
                let (mut vx, mut vy, mut cov) = (0.0, 0.0, 0.0);
                for i in 0..WINDOW {
                    for j in 0..WINDOW {
                        let wgt = weights[i * WINDOW + j];
                        let dx = a.get(top + i, left + j) - mx;
                        let dy = b.get(top + i, left + j) - my;
                        vx += wgt * dx * dx;
                        vy += wgt * dy * dy;
                        cov += wgt * dx * dy;
                    }
                }
                total += ssim_formula(mx, my, vx, vy, cov);
                count += 1;
            }
        }
        let expect = total / count as f64;
        let got = ssim(&a, &b, SsimMode::Windowed).unwrap();
        assert!((got - expect).abs() < 1e-6, "{got} vs {expect}");
    }

    #[test]
    fn windowed_mode_needs_room_for_the_window() {
        let a = rand_unit(10, 16, 14);
        assert!(ssim(&a, &a, SsimMode::Windowed).is_err());
        assert!(ssim(&a, &a, SsimMode::Global).is_ok());
    }
}
