//! Wall-clock timing of patch-based restoration across sampler step counts.
//!
//! Sampling cost should be linear in the number of steps; [`linear_fit`]
//! quantifies how well the measured totals follow that line.

use std::time::Instant;

use crate::error::{Error, Result};
use crate::genmodel::{Denoiser, NoiseSchedule};
use crate::image::Image;
use crate::patchwork::{restore_image_with, DdimPatchModel, FmPatchModel};

/// Which sampler the benchmark drives.
#[derive(Clone, Copy, Debug)]
pub enum BenchSampler<'a> {
    Ddim(&'a NoiseSchedule),
    Fm,
}

/// Timing for one step count: the best wall time over `repeats` full-image
/// restorations, plus that total divided by the step count.
#[derive(Clone, Copy, Debug)]
pub struct BenchRow {
    pub steps: usize,
    pub repeats: usize,
    pub total_secs: f64,
    pub per_step_secs: f64,
}

/// Least-squares line through (x, y) with its coefficient of determination.
#[derive(Clone, Copy, Debug)]
pub struct LineFit {
    pub slope: f64,
    pub intercept: f64,
    pub r_squared: f64,
}

/// Ordinary least squares. Needs at least two distinct x values. A constant
/// y is reported as a perfect fit of the horizontal line.
pub fn linear_fit(xs: &[f64], ys: &[f64]) -> Result<LineFit> {
    if xs.len() != ys.len() {
        return Err(Error::Shape(format!("{} xs vs {} ys", xs.len(), ys.len())));
    }
    let n = xs.len() as f64;
    let mean_x = xs.iter().sum::<f64>() / n;
    let mean_y = ys.iter().sum::<f64>() / n;
    let sxx: f64 = xs.iter().map(|&x| (x - mean_x) * (x - mean_x)).sum();
    if !(sxx > 0.0) {
        return Err(Error::InvalidParam("need at least two distinct x values".into()));
    }
    let sxy: f64 = xs.iter().zip(ys).map(|(&x, &y)| (x - mean_x) * (y - mean_y)).sum();
    let slope = sxy / sxx;
    let intercept = mean_y - slope * mean_x;
    let ss_tot: f64 = ys.iter().map(|&y| (y - mean_y) * (y - mean_y)).sum();
    let ss_res: f64 = xs
        .iter()
        .zip(ys)
        .map(|(&x, &y)| {
            let e = y - (slope * x + intercept);
            e * e
        })
        .sum();
    let r_squared = if ss_tot > 0.0 { 1.0 - ss_res / ss_tot } else { 1.0 };
    Ok(LineFit { slope, intercept, r_squared })
}

#[derive(Clone, Debug)]
pub struct BenchReport {
    pub rows: Vec<BenchRow>,
    /// Total seconds regressed on step count; `None` with fewer than two
    /// distinct step counts.
    pub fit: Option<LineFit>,
}

impl BenchReport {
    pub fn to_csv(&self) -> String {
        let mut out = String::from("steps,repeats,total_secs,per_step_secs\n");
        for row in &self.rows {
            out.push_str(&format!(
                "{},{},{},{}\n",
                row.steps, row.repeats, row.total_secs, row.per_step_secs
            ));
        }
        out
    }
}

/// Times a full restoration of `img` for each step count, repeating each
/// measurement and keeping the fastest run (least scheduler noise). The
/// restorations themselves are the real pipeline, so the timing includes
/// tiling, normalization and blending.
#[allow(clippy::too_many_arguments)]
pub fn run_bench<M: Denoiser + Sync + ?Sized>(
    model: &M,
    sampler: BenchSampler,
    img: &Image,
    steps_list: &[usize],
    repeat: usize,
    patch: usize,
    overlap: usize,
    seed: u64,
) -> Result<BenchReport> {
    if steps_list.is_empty() {
        return Err(Error::InvalidParam("no step counts to benchmark".into()));
    }
    if repeat == 0 {
        return Err(Error::InvalidParam("repeat count must be positive".into()));
    }
    let mut rows = Vec::with_capacity(steps_list.len());
    for &steps in steps_list {
        if steps == 0 {
            return Err(Error::InvalidParam("step counts must be positive".into()));
        }
        let mut best = f64::INFINITY;
        for _ in 0..repeat {
            let start = Instant::now();
            match sampler {
                BenchSampler::Ddim(schedule) => {
                    let m = DdimPatchModel { model, schedule, steps };
                    restore_image_with(&m, img, patch, overlap, seed)?;
                }
                BenchSampler::Fm => {
                    let m = FmPatchModel { model, steps };
                    restore_image_with(&m, img, patch, overlap, seed)?;
                }
            }
            best = best.min(start.elapsed().as_secs_f64());
        }
        rows.push(BenchRow {
            steps,
            repeats: repeat,
            total_secs: best,
            per_step_secs: best / steps as f64,
        });
    }
    let fit = {
        let xs: Vec<f64> = rows.iter().map(|r| r.steps as f64).collect();
        let ys: Vec<f64> = rows.iter().map(|r| r.total_secs).collect();
        linear_fit(&xs, &ys).ok()
    };
    Ok(BenchReport { rows, fit })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::genmodel::{cosine_schedule, TinyDenoiser};
    use crate::image::{normalize_sym, NormState};

    #[test]
    fn exact_line_recovered() {
        let xs = [2.0, 5.0, 10.0];
        let ys: Vec<f64> = xs.iter().map(|x| 3.0 * x + 2.0).collect();
        let fit = linear_fit(&xs, &ys).unwrap();
        assert!((fit.slope - 3.0).abs() < 1e-12);
        assert!((fit.intercept - 2.0).abs() < 1e-12);
        assert!((fit.r_squared - 1.0).abs() < 1e-12);
    }

    #[test]
    fn quadratic_residue_matches_hand_r2() {
        // y = x² over {1,2,3}: slope 4, intercept −10/3, R² = 48/49.
        let fit = linear_fit(&[1.0, 2.0, 3.0], &[1.0, 4.0, 9.0]).unwrap();
        assert!((fit.slope - 4.0).abs() < 1e-12);
        assert!((fit.intercept + 10.0 / 3.0).abs() < 1e-12);
        assert!((fit.r_squared - 48.0 / 49.0).abs() < 1e-12);
    }

    #[test]
    fn degenerate_fits_rejected() {
        assert!(linear_fit(&[1.0, 1.0], &[2.0, 3.0]).is_err());
        assert!(linear_fit(&[1.0], &[2.0]).is_err());
        assert!(linear_fit(&[1.0, 2.0], &[2.0]).is_err());
        let flat = linear_fit(&[1.0, 2.0], &[5.0, 5.0]).unwrap();
        assert!((flat.r_squared - 1.0).abs() < 1e-12);
        assert!(flat.slope.abs() < 1e-12);
    }

    #[test]
    fn bench_rows_and_csv_shape() {
        let model = TinyDenoiser::with_config([2, 2, 2], 4, 0).unwrap();
        let unit = Image::from_fn(8, 8, NormState::Unit, |r, c| {
            ((r * 8 + c) % 9) as f64 / 9.0
        })
        .unwrap();
        let img = normalize_sym(&unit).unwrap();
        let report = run_bench(&model, BenchSampler::Fm, &img, &[1, 2], 2, 8, 2, 0).unwrap();
        assert_eq!(report.rows.len(), 2);
        for row in &report.rows {
            assert!(row.total_secs > 0.0);
            assert!((row.per_step_secs - row.total_secs / row.steps as f64).abs() < 1e-15);
            assert_eq!(row.repeats, 2);
        }
        assert!(report.fit.is_some());
        let csv = report.to_csv();
        assert!(csv.starts_with("steps,repeats,total_secs,per_step_secs\n"));
        assert_eq!(csv.trim_end().lines().count(), 3);

        let schedule = cosine_schedule(10).unwrap();
        let ddim = run_bench(
            &model,
            BenchSampler::Ddim(&schedule),
            &img,
            &[2],
            1,
            8,
            2,
            0,
        )
        .unwrap();
        assert_eq!(ddim.rows.len(), 1);
        assert!(ddim.fit.is_none());
    }

    #[test]
    fn bench_validates_inputs() {
        let model = TinyDenoiser::with_config([2, 2, 2], 4, 0).unwrap();
        let unit = Image::from_fn(8, 8, NormState::Unit, |r, c| {
            ((r + c) % 3) as f64 / 3.0
        })
        .unwrap();
        let img = normalize_sym(&unit).unwrap();
        assert!(run_bench(&model, BenchSampler::Fm, &img, &[], 1, 8, 2, 0).is_err());
        assert!(run_bench(&model, BenchSampler::Fm, &img, &[1], 0, 8, 2, 0).is_err());
        assert!(run_bench(&model, BenchSampler::Fm, &img, &[0], 1, 8, 2, 0).is_err());
    }
}
