//! Synthetic surface generator.
//!
//! Produces dimer-row style test surfaces: a sinusoidal row pattern at a
//! chosen orientation plus randomly seeded bright/dark point defects. Used by
//! the desk-scale dataset paths and by calibration tests; real microscope
//! frames enter through `io` instead.

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::image::{Image, NormState};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum LatticeOrientation {
    /// Rows run horizontally: value depends on the row index only.
    Horizontal,
    /// Rows run vertically: value depends on the column index only.
    Vertical,
    /// Rows run at 45 degrees.
    Diagonal,
}

/// A stamped point defect.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Defect {
    pub row: usize,
    pub col: usize,
    pub bright: bool,
}

const DEFECT_AMPLITUDE: f64 = 0.35;
const DEFECT_SIGMA: f64 = 0.8;
const DEFECT_RADIUS: i64 = 2;

/// Deterministic lattice surface, values in `[0, 1]`.
pub fn synth_lattice(
    height: usize,
    width: usize,
    period: f64,
    orientation: LatticeOrientation,
    defect_density: f64,
    seed: u64,
) -> Result<Image> {
    synth_lattice_with_defects(height, width, period, orientation, defect_density, seed)
        .map(|(img, _)| img)
}

/// Same as [`synth_lattice`] but also reports the stamped defects, which the
/// calibration tests count against the Bernoulli expectation.
pub fn synth_lattice_with_defects(
    height: usize,
    width: usize,
    period: f64,
    orientation: LatticeOrientation,
    defect_density: f64,
    seed: u64,
) -> Result<(Image, Vec<Defect>)> {
    if height == 0 || width == 0 {
        return Err(Error::Shape(format!("empty lattice {height}x{width}")));
    }
    if !(period >= 2.0) || !period.is_finite() {
        return Err(Error::InvalidParam(format!("lattice period must be >= 2, got {period}")));
    }
    if !(0.0..=1.0).contains(&defect_density) {
        return Err(Error::InvalidParam(format!(
            "defect density must lie in [0, 1], got {defect_density}"
        )));
    }

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let phase: f64 = rng.random_range(0.0..std::f64::consts::TAU);

    let mut data = vec![0.0; height * width];
    for r in 0..height {
        for c in 0..width {
            let u = match orientation {
                LatticeOrientation::Horizontal => r as f64,
                LatticeOrientation::Vertical => c as f64,
                LatticeOrientation::Diagonal => (r + c) as f64 / std::f64::consts::SQRT_2,
            };
            data[r * width + c] =
                0.5 + 0.45 * (std::f64::consts::TAU * u / period + phase).cos();
        }
    }

    let mut defects = Vec::new();
    for r in 0..height {
        for c in 0..width {
            if rng.random_bool(defect_density) {
                let bright = rng.random_bool(0.5);
                let sign = if bright { 1.0 } else { -1.0 };
                defects.push(Defect { row: r, col: c, bright });
                for dr in -DEFECT_RADIUS..=DEFECT_RADIUS {
                    for dc in -DEFECT_RADIUS..=DEFECT_RADIUS {
                        let rr = r as i64 + dr;
                        let cc = c as i64 + dc;
                        if rr < 0 || cc < 0 || rr >= height as i64 || cc >= width as i64 {
                            continue;
                        }
                        let falloff = (-((dr * dr + dc * dc) as f64)
                            / (2.0 * DEFECT_SIGMA * DEFECT_SIGMA))
                            .exp();
                        data[rr as usize * width + cc as usize] +=
                            sign * DEFECT_AMPLITUDE * falloff;
                    }
                }
            }
        }
    }

    for v in &mut data {
        *v = v.clamp(0.0, 1.0);
    }
    Ok((Image::from_parts(height, width, data, NormState::Unit), defects))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn deterministic_per_seed() {
        let a = synth_lattice(32, 32, 6.0, LatticeOrientation::Horizontal, 0.02, 9).unwrap();
        let b = synth_lattice(32, 32, 6.0, LatticeOrientation::Horizontal, 0.02, 9).unwrap();
        let c = synth_lattice(32, 32, 6.0, LatticeOrientation::Horizontal, 0.02, 10).unwrap();
        assert_eq!(a, b);
        assert_ne!(a, c);
    }

    #[test]
    fn zero_density_is_exactly_periodic_along_one_axis() {
        let a = synth_lattice(24, 24, 5.5, LatticeOrientation::Horizontal, 0.0, 3).unwrap();
        for r in 0..24 {
            for c in 1..24 {
                assert_eq!(a.get(r, c), a.get(r, 0));
            }
        }
        let b = synth_lattice(24, 24, 5.5, LatticeOrientation::Vertical, 0.0, 3).unwrap();
        for c in 0..24 {
            for r in 1..24 {
                assert_eq!(b.get(r, c), b.get(0, c));
            }
        }
    }

    #[test]
    fn rejects_bad_parameters() {
        assert!(synth_lattice(0, 8, 4.0, LatticeOrientation::Horizontal, 0.0, 1).is_err());
        assert!(synth_lattice(8, 8, 1.0, LatticeOrientation::Horizontal, 0.0, 1).is_err());
        assert!(synth_lattice(8, 8, 4.0, LatticeOrientation::Horizontal, 1.5, 1).is_err());
    }

    #[test]
    fn defect_count_tracks_binomial_expectation() {
        // 128x128 at density 0.01: mean 163.84, sigma ~12.74.
        let (_, defects) =
            synth_lattice_with_defects(128, 128, 6.0, LatticeOrientation::Diagonal, 0.01, 42)
                .unwrap();
        let n = (128 * 128) as f64;
        let p = 0.01;
        let mean = n * p;
        let sigma = (n * p * (1.0 - p)).sqrt();
        let count = defects.len() as f64;
        assert!(
            (count - mean).abs() < 3.0 * sigma,
            "defect count {count} outside 3 sigma of {mean}"
        );
    }

    #[test]
    fn values_stay_in_unit_range() {
        let a = synth_lattice(40, 40, 4.0, LatticeOrientation::Diagonal, 0.05, 7).unwrap();
        let (lo, hi) = a.min_max();
        assert!(lo >= 0.0 && hi <= 1.0);
        assert_eq!(a.norm_state(), NormState::Unit);
    }
}
