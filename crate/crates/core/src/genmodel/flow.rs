//! Flow matching on the straight path from noise to signal, integrated with
//! the midpoint Runge-Kutta rule.
//!
//! Time runs over s in [0, 1] with x(0) = noise and x(1) = signal, so the
//! target velocity field is the constant x0 - eps along each straight path.

use crate::error::{Error, Result};
use crate::genmodel::denoiser::Denoiser;
use crate::genmodel::diffusion::seeded_noise;
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

/// Interpolated state x_s = s·x0 + (1−s)·ε.
pub fn fm_forward(x0: &Image, eps: &Image, s: f64) -> Result<Image> {
    check_shapes(x0, eps)?;
    if !(0.0..=1.0).contains(&s) {
        return Err(Error::InvalidParam(format!("interpolation time {s} outside [0, 1]")));
    }
    let data = x0
        .pixels()
        .iter()
        .zip(eps.pixels())
        .map(|(&x, &e)| s * x + (1.0 - s) * e)
        .collect();
    Ok(Image::from_parts(x0.height(), x0.width(), data, NormState::Raw))
}

/// Velocity target v = x0 − ε, constant along each straight path.
pub fn fm_target_velocity(x0: &Image, eps: &Image) -> Result<Image> {
    check_shapes(x0, eps)?;
    let data = x0
        .pixels()
        .iter()
        .zip(eps.pixels())
        .map(|(&x, &e)| x - e)
        .collect();
    Ok(Image::from_parts(x0.height(), x0.width(), data, NormState::Raw))
}

/// Integrate the learned field from s = 0 (seeded noise) to s = 1 with the
/// midpoint rule: k1 = v(x, s); k2 = v(x + (Δs/2)·k1, s + Δs/2); x += Δs·k2.
pub fn fm_sample_rk2<M: Denoiser + ?Sized>(
    model: &M,
    condition: &Image,
    steps: usize,
    seed: u64,
) -> Result<Image> {
    if steps < 1 {
        return Err(Error::InvalidParam("need at least one integration step".into()));
    }
    let (h, w) = (condition.height(), condition.width());
    let ds = 1.0 / steps as f64;
    let mut x = seeded_noise(h, w, seed);
    for i in 0..steps {
        let s = i as f64 * ds;
        let k1 = model.predict(&x, s, condition);
        let mid_data: Vec<f64> = x
            .pixels()
            .iter()
            .zip(k1.pixels())
            .map(|(&xv, &kv)| xv + 0.5 * ds * kv)
            .collect();
        let mid = Image::from_parts(h, w, mid_data, NormState::Raw);
        let k2 = model.predict(&mid, s + 0.5 * ds, condition);
        for (xv, &kv) in x.pixels_mut().iter_mut().zip(k2.pixels()) {
            *xv += ds * kv;
        }
    }
    Ok(x)
}
