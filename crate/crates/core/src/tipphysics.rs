//! Tunneling model for a double tip.
//!
//! A secondary micro-tip at lateral separation `s` adds a sigmoidal ghost of
//! the surface to the measured height profile: the ghost saturates where the
//! displaced surface is high (the secondary junction takes over) and vanishes
//! where it is low. The same functional form, re-expressed through amplitude
//! `A`, offset `c` and slope `d`, drives the multi-tip artefact in `degrade`;
//! `map_physical_to_eq1` is that re-expression and the two routes are held to
//! agree to 1e-9 by the acceptance suite.

use crate::error::{Error, Result};
use crate::image::{Image, NormState};

/// Physical double-tip junction parameters.
///
/// `i_t` is the tunneling current setpoint, `gamma` the log ratio of the two
/// junction conductances, `kappa` the vacuum decay constant, `a` the height
/// offset of the secondary tip and `s` its lateral separation along the fast
/// scan axis, in pixels.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct PhysicalTipParams {
    pub i_t: f64,
    pub gamma: f64,
    pub kappa: f64,
    pub a: f64,
    pub s: f64,
}

impl PhysicalTipParams {
    fn validate(&self) -> Result<()> {
        for (name, v) in [
            ("i_t", self.i_t),
            ("gamma", self.gamma),
            ("kappa", self.kappa),
            ("a", self.a),
            ("s", self.s),
        ] {
            if !v.is_finite() {
                return Err(Error::NonFinite(format!("tip parameter {name}")));
            }
        }
        if self.i_t <= 0.0 {
            return Err(Error::InvalidParam(format!("i_t must be positive, got {}", self.i_t)));
        }
        if self.kappa <= 0.0 {
            return Err(Error::InvalidParam(format!(
                "kappa must be positive, got {}",
                self.kappa
            )));
        }
        if self.s < 0.0 {
            return Err(Error::InvalidParam(format!("separation must be >= 0, got {}", self.s)));
        }
        Ok(())
    }

    fn integer_separation(&self) -> Result<usize> {
        let rounded = self.s.round();
        if (self.s - rounded).abs() > 1e-9 {
            return Err(Error::InvalidParam(format!(
                "sampled profiles need an integer separation, got {}",
                self.s
            )));
        }
        Ok(rounded as usize)
    }
}

#[inline]
fn ghost_term(p: &PhysicalTipParams, b_shifted: f64) -> f64 {
    let amp = p.i_t * p.gamma.exp();
    amp / (1.0 + (-2.0 * p.kappa * (b_shifted - p.gamma / (2.0 * p.kappa) - p.a)).exp())
}

/// Measured 1-D height profile under a double tip. The surface `b` is shifted
/// by the integer separation with edge replication.
pub fn double_tip_profile(b: &[f64], p: &PhysicalTipParams) -> Result<Vec<f64>> {
    p.validate()?;
    if b.is_empty() {
        return Err(Error::Shape("empty profile".into()));
    }
    if let Some(v) = b.iter().find(|v| !v.is_finite()) {
        return Err(Error::NonFinite(format!("profile value {v}")));
    }
    let sep = p.integer_separation()? as i64;
    let n = b.len() as i64;
    let mut out = Vec::with_capacity(b.len());
    for i in 0..n {
        let shifted = b[(i - sep).clamp(0, n - 1) as usize];
        out.push(ghost_term(p, shifted) + b[i as usize]);
    }
    Ok(out)
}

/// Row-wise application of [`double_tip_profile`] to a height grid: the
/// separation runs along the fast scan axis (columns).
pub fn double_tip_height(b: &Image, p: &PhysicalTipParams) -> Result<Image> {
    p.validate()?;
    let sep = p.integer_separation()? as i64;
    let (h, w) = (b.height(), b.width());
    let mut out = vec![0.0; h * w];
    for r in 0..h {
        for c in 0..w {
            let shifted = b.get_clamped(r as i64, c as i64 - sep);
            out[r * w + c] = ghost_term(p, shifted) + b.get(r, c);
        }
    }
    Ok(Image::from_parts(h, w, out, NormState::Raw))
}

/// Sigmoid-form parameters equivalent to a physical double tip.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Eq1Params {
    pub amplitude: f64,
    pub c: f64,
    pub d: f64,
    pub dx: i64,
    pub dy: i64,
}

/// Re-express physical parameters in sigmoid form:
/// `A = I_T e^gamma`, `c = gamma + 2 kappa a`, `d = 2 kappa`, and the
/// separation decomposed into integer grid offsets with `dx^2 + dy^2 = s^2`.
/// Fails when no integer decomposition exists.
pub fn map_physical_to_eq1(p: &PhysicalTipParams) -> Result<Eq1Params> {
    p.validate()?;
    lattice_decompose(p.s).map(|(dx, dy)| Eq1Params {
        amplitude: p.i_t * p.gamma.exp(),
        c: p.gamma + 2.0 * p.kappa * p.a,
        d: 2.0 * p.kappa,
        dx,
        dy,
    })
}

/// Largest-x integer lattice point at distance `s` from the origin, so an
/// integer `s` maps to `(s, 0)`.
fn lattice_decompose(s: f64) -> Result<(i64, i64)> {
    let target = s * s;
    let mut x = s.floor() as i64 + 1;
    while x >= 0 {
        let rem = target - (x * x) as f64;
        if rem >= -1e-6 {
            let y = rem.max(0.0).sqrt().round() as i64;
            let dist = (((x * x + y * y) as f64).sqrt() - s).abs();
            if dist <= 1e-9 {
                return Ok((x, y));
            }
        }
        x -= 1;
    }
    Err(Error::InvalidParam(format!(
        "separation {s} has no integer grid decomposition"
    )))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn flat_surface_gives_half_amplitude_ghost() {
        let p = PhysicalTipParams { i_t: 1.0, gamma: 0.0, kappa: 1.0, a: 0.0, s: 0.0 };
        let out = double_tip_profile(&[0.0; 8], &p).unwrap();
        for v in out {
            assert!((v - 0.5).abs() < 1e-15);
        }
    }

    #[test]
    fn matches_scalar_transcription_of_the_closed_form() {
        let p = PhysicalTipParams { i_t: 0.7, gamma: 0.9, kappa: 2.3, a: 0.15, s: 3.0 };
        let mut state = 0.37f64;
        let b: Vec<f64> = (0..32)
            .map(|_| {
                state = (state * 91.17).fract();
                state * 0.6
            })
            .collect();
        let out = double_tip_profile(&b, &p).unwrap();
        for i in 0..32usize {
            let shifted = b[i.saturating_sub(3)];
            let expect = p.i_t * p.gamma.exp()
                / (1.0
                    + (-2.0 * p.kappa * (shifted - p.gamma / (2.0 * p.kappa) - p.a)).exp())
                + b[i];
            assert!((out[i] - expect).abs() < 1e-12);
        }
    }

    #[test]
    fn ghost_is_bounded_by_full_amplitude() {
        let p = PhysicalTipParams { i_t: 1.3, gamma: 0.4, kappa: 1.7, a: 0.2, s: 2.0 };
        let b: Vec<f64> = (0..64).map(|i| ((i as f64) * 0.37).sin()).collect();
        let out = double_tip_profile(&b, &p).unwrap();
        let amp = p.i_t * p.gamma.exp();
        for (i, v) in out.iter().enumerate() {
            let ghost = v - b[i];
            assert!(ghost > 0.0 && ghost < amp);
        }
    }

    #[test]
    fn monotone_in_the_surface() {
        let p = PhysicalTipParams { i_t: 1.0, gamma: 0.5, kappa: 2.0, a: 0.1, s: 1.0 };
        let lo: Vec<f64> = (0..16).map(|i| (i as f64 * 0.21).cos() * 0.3).collect();
        let hi: Vec<f64> = lo.iter().map(|v| v + 0.25).collect();
        let out_lo = double_tip_profile(&lo, &p).unwrap();
        let out_hi = double_tip_profile(&hi, &p).unwrap();
        for (a, b) in out_lo.iter().zip(&out_hi) {
            assert!(a < b);
        }
    }

    #[test]
    fn parameter_map_matches_hand_computation() {
        let p = PhysicalTipParams { i_t: 1.0, gamma: 1.0, kappa: 4.0, a: 0.5, s: 5.0 };
        let m = map_physical_to_eq1(&p).unwrap();
        assert!((m.c - 5.0).abs() < 1e-15);
        assert!((m.d - 8.0).abs() < 1e-15);
        assert!((m.amplitude - 1.0f64.exp()).abs() < 1e-15);
        assert_eq!((m.dx, m.dy), (5, 0));
    }

    #[test]
    fn non_lattice_separation_is_rejected() {
        let p = PhysicalTipParams { i_t: 1.0, gamma: 0.0, kappa: 1.0, a: 0.0, s: 2.5 };
        assert!(map_physical_to_eq1(&p).is_err());
        // sqrt(2) decomposes as (1, 1).
        let q = PhysicalTipParams { s: std::f64::consts::SQRT_2, ..p };
        let m = map_physical_to_eq1(&q).unwrap();
        assert_eq!((m.dx, m.dy), (1, 1));
    }

    #[test]
    fn invalid_parameters_are_rejected() {
        let ok = PhysicalTipParams { i_t: 1.0, gamma: 0.0, kappa: 1.0, a: 0.0, s: 0.0 };
        assert!(double_tip_profile(&[0.0], &ok).is_ok());
        assert!(double_tip_profile(&[], &ok).is_err());
        let bad_kappa = PhysicalTipParams { kappa: 0.0, ..ok };
        assert!(double_tip_profile(&[0.0], &bad_kappa).is_err());
        let bad_s = PhysicalTipParams { s: -1.0, ..ok };
        assert!(double_tip_profile(&[0.0], &bad_s).is_err());
        let frac_s = PhysicalTipParams { s: 1.25, ..ok };
        assert!(double_tip_profile(&[0.0], &frac_s).is_err());
    }
}
