//! 2-D discrete Fourier transforms.
//!
//! Thin wrapper over `rustfft` plus the magnitude/phase split used by the
//! frequency-domain training loss. The forward transform is unnormalized
//! (plain DFT sums), matching the convention used by the loss gradients.

use rustfft::num_complex::Complex;
use rustfft::FftPlanner;

use crate::error::Result;
use crate::image::{Image, NormState};

/// Unnormalized forward 2-D DFT of a real grid, row-major output.
pub(crate) fn fft2(data: &[f64], h: usize, w: usize) -> Vec<Complex<f64>> {
    let mut buf: Vec<Complex<f64>> = data.iter().map(|&v| Complex::new(v, 0.0)).collect();
    let mut planner = FftPlanner::<f64>::new();
    let row_fft = planner.plan_fft_forward(w);
    for r in 0..h {
        row_fft.process(&mut buf[r * w..(r + 1) * w]);
    }
    let col_fft = planner.plan_fft_forward(h);
    let mut col = vec![Complex::new(0.0, 0.0); h];
    for c in 0..w {
        for r in 0..h {
            col[r] = buf[r * w + c];
        }
        col_fft.process(&mut col);
        for r in 0..h {
            buf[r * w + c] = col[r];
        }
    }
    buf
}

/// Unnormalized inverse 2-D DFT (no 1/(h*w) factor).
pub(crate) fn ifft2_unnorm(spec: &[Complex<f64>], h: usize, w: usize) -> Vec<Complex<f64>> {
    let mut buf = spec.to_vec();
    let mut planner = FftPlanner::<f64>::new();
    let row_fft = planner.plan_fft_inverse(w);
    for r in 0..h {
        row_fft.process(&mut buf[r * w..(r + 1) * w]);
    }
    let col_fft = planner.plan_fft_inverse(h);
    let mut col = vec![Complex::new(0.0, 0.0); h];
    for c in 0..w {
        for r in 0..h {
            col[r] = buf[r * w + c];
        }
        col_fft.process(&mut col);
        for r in 0..h {
            buf[r * w + c] = col[r];
        }
    }
    buf
}

/// Magnitude and phase grids of the 2-D DFT. Phase lies in `(-pi, pi]`.
pub fn fft2_mag_phase(img: &Image) -> Result<(Image, Image)> {
    let (h, w) = (img.height(), img.width());
    let spec = fft2(img.pixels(), h, w);
    let mut mag = Vec::with_capacity(h * w);
    let mut phase = Vec::with_capacity(h * w);
    for z in &spec {
        mag.push(z.norm());
        let mut p = z.im.atan2(z.re);
        if p <= -std::f64::consts::PI {
            p += 2.0 * std::f64::consts::PI;
        }
        phase.push(p);
    }
    Ok((
        Image::from_parts(h, w, mag, NormState::Raw),
        Image::from_parts(h, w, phase, NormState::Raw),
    ))
}
