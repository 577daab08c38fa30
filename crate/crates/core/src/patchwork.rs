//! Whole-image restoration by overlapping tiles.
//!
//! Large scans are cut into fixed-size patches on a uniform stride, each
//! patch is restored independently, and the results are blended back with
//! squared-cosine cross-fade windows. The window weights at every pixel sum
//! to one, so a model that returns its input reassembles the original image.

use rayon::prelude::*;

use crate::degrade::dataset::child_seed;
use crate::error::{Error, Result};
use crate::genmodel::{ddim_sample, fm_sample_rk2, Denoiser, NoiseSchedule};
use crate::image::{self, Image, NormState, ResampleDir};

pub const DEFAULT_PATCH: usize = 128;
pub const DEFAULT_OVERLAP: usize = 32;

/// Stream salt separating per-patch sampling seeds from other derived seeds.
const PATCH_SALT: u64 = 0x7061_7463;

/// Tiling of an image into equal square patches plus the blending weights
/// used to recombine them.
#[derive(Clone, Debug)]
pub struct PatchPlan {
    height: usize,
    width: usize,
    patch: usize,
    overlap: usize,
    placements: Vec<(usize, usize)>,
    windows: Vec<Vec<f64>>,
}

impl PatchPlan {
    pub fn shape(&self) -> (usize, usize) {
        (self.height, self.width)
    }

    pub fn patch(&self) -> usize {
        self.patch
    }

    pub fn overlap(&self) -> usize {
        self.overlap
    }

    pub fn n_patches(&self) -> usize {
        self.placements.len()
    }

    /// Top-left corners, row-major over the tile grid.
    pub fn placements(&self) -> &[(usize, usize)] {
        &self.placements
    }

    /// Blending weights for placement `i`, row-major `patch × patch`.
    pub fn window(&self, i: usize) -> &[f64] {
        &self.windows[i]
    }
}

/// Rising half of the cross-fade: sample `i` of `overlap` on a sin² ramp,
/// placed half a sample in from the ends so mirrored ramps sum to one.
fn ramp(i: usize, overlap: usize) -> f64 {
    let s = (std::f64::consts::PI * (i as f64 + 0.5) / (2.0 * overlap as f64)).sin();
    s * s
}

/// One axis of a separable window: 1 in the core, ramps over `overlap`
/// samples on whichever ends face a neighboring patch.
fn cos2_profile(patch: usize, overlap: usize, lead: bool, trail: bool) -> Vec<f64> {
    let mut p = vec![1.0; patch];
    for i in 0..overlap {
        if lead {
            p[i] = ramp(i, overlap);
        }
        if trail {
            p[patch - 1 - i] = ramp(i, overlap);
        }
    }
    p
}

/// Full 2-D blending window with ramps on all four edges: the separable
/// product of two squared-cosine profiles. Symmetric under 180° rotation,
/// and the ramps of two patches offset by `patch − overlap` sum to one
/// across the shared band.
pub fn cos2_window(patch: usize, overlap: usize) -> Vec<f64> {
    assert!(overlap > 0 && 2 * overlap <= patch, "overlap {overlap} outside (0, {}]", patch / 2);
    let p = cos2_profile(patch, overlap, true, true);
    let mut grid = Vec::with_capacity(patch * patch);
    for r in 0..patch {
        for c in 0..patch {
            grid.push(p[r] * p[c]);
        }
    }
    grid
}

/// Uniform-stride corner positions along one axis, with the final position
/// clamped so the last patch ends exactly at the border.
fn axis_positions(dim: usize, patch: usize, stride: usize) -> Vec<usize> {
    let mut at = vec![0];
    loop {
        let last = *at.last().unwrap();
        if last + patch >= dim {
            break;
        }
        at.push((last + stride).min(dim - patch));
    }
    at
}

/// Plans a tiling of an `height × width` image. Placements step by
/// `patch − overlap` and the last row/column clamps to the border, so every
/// pixel is covered. Windows ramp only toward neighboring patches and are
/// then renormalized by the accumulated weight at each pixel, which makes
/// the per-pixel weight sum exactly one even where the clamped final
/// placement widens the overlap.
pub fn plan_patches(height: usize, width: usize, patch: usize, overlap: usize) -> Result<PatchPlan> {
    if patch == 0 {
        return Err(Error::InvalidParam("patch size must be positive".into()));
    }
    if height < patch || width < patch {
        return Err(Error::Shape(format!(
            "{height}x{width} image smaller than a {patch}x{patch} patch"
        )));
    }
    if overlap == 0 || 2 * overlap > patch {
        return Err(Error::InvalidParam(format!(
            "overlap {overlap} outside (0, {}]",
            patch / 2
        )));
    }
    let stride = patch - overlap;
    let tops = axis_positions(height, patch, stride);
    let lefts = axis_positions(width, patch, stride);
    let row_profiles: Vec<Vec<f64>> = (0..tops.len())
        .map(|i| cos2_profile(patch, overlap, i > 0, i + 1 < tops.len()))
        .collect();
    let col_profiles: Vec<Vec<f64>> = (0..lefts.len())
        .map(|j| cos2_profile(patch, overlap, j > 0, j + 1 < lefts.len()))
        .collect();

    let mut placements = Vec::with_capacity(tops.len() * lefts.len());
    let mut raw = Vec::with_capacity(tops.len() * lefts.len());
    let mut total = vec![0.0; height * width];
    for (ti, &top) in tops.iter().enumerate() {
        for (lj, &left) in lefts.iter().enumerate() {
            let mut win = Vec::with_capacity(patch * patch);
            for r in 0..patch {
                for c in 0..patch {
                    let w = row_profiles[ti][r] * col_profiles[lj][c];
                    win.push(w);
                    total[(top + r) * width + (left + c)] += w;
                }
            }
            placements.push((top, left));
            raw.push(win);
        }
    }
    let windows = placements
        .iter()
        .zip(raw)
        .map(|(&(top, left), mut win)| {
            for r in 0..patch {
                for c in 0..patch {
                    win[r * patch + c] /= total[(top + r) * width + (left + c)];
                }
            }
            win
        })
        .collect();
    Ok(PatchPlan { height, width, patch, overlap, placements, windows })
}

/// Weighted recombination: each output pixel is the window-weighted sum of
/// the patches covering it, accumulated in placement order.
pub fn assemble(patches: &[Image], plan: &PatchPlan) -> Result<Image> {
    if patches.len() != plan.placements.len() {
        return Err(Error::Shape(format!(
            "{} patches for a plan of {}",
            patches.len(),
            plan.placements.len()
        )));
    }
    let p = plan.patch;
    let mut out = vec![0.0; plan.height * plan.width];
    for (i, img) in patches.iter().enumerate() {
        if img.height() != p || img.width() != p {
            return Err(Error::Shape(format!(
                "patch {i} is {}x{}, plan expects {p}x{p}",
                img.height(),
                img.width()
            )));
        }
        let (top, left) = plan.placements[i];
        let win = &plan.windows[i];
        for r in 0..p {
            for c in 0..p {
                out[(top + r) * plan.width + (left + c)] += win[r * p + c] * img.get(r, c);
            }
        }
    }
    Ok(Image::from_parts(plan.height, plan.width, out, NormState::Raw))
}

/// Restores one patch given its condition image; implementations draw any
/// randomness from the provided seed only.
pub trait PatchModel: Sync {
    fn restore_patch(&self, condition: &Image, seed: u64) -> Result<Image>;
}

/// Passes the condition through unchanged. Exists to exercise the tiling
/// round trip and as a do-nothing baseline.
pub struct IdentityPatchModel;

impl PatchModel for IdentityPatchModel {
    fn restore_patch(&self, condition: &Image, _seed: u64) -> Result<Image> {
        Ok(condition.clone())
    }
}

/// Denoiser driven through the deterministic reverse-diffusion sampler.
pub struct DdimPatchModel<'a, M: Denoiser + Sync + ?Sized> {
    pub model: &'a M,
    pub schedule: &'a NoiseSchedule,
    pub steps: usize,
}

impl<M: Denoiser + Sync + ?Sized> PatchModel for DdimPatchModel<'_, M> {
    fn restore_patch(&self, condition: &Image, seed: u64) -> Result<Image> {
        ddim_sample(self.model, condition, self.steps, self.schedule, seed)
    }
}

/// Velocity-field model integrated from noise with midpoint steps.
pub struct FmPatchModel<'a, M: Denoiser + Sync + ?Sized> {
    pub model: &'a M,
    pub steps: usize,
}

impl<M: Denoiser + Sync + ?Sized> PatchModel for FmPatchModel<'_, M> {
    fn restore_patch(&self, condition: &Image, seed: u64) -> Result<Image> {
        fm_sample_rk2(self.model, condition, self.steps, seed)
    }
}

fn clamp_to_norm(values: Vec<f64>, h: usize, w: usize, norm: NormState) -> Image {
    let (lo, hi) = match norm {
        NormState::Raw => return Image::from_parts(h, w, values, NormState::Raw),
        NormState::Unit => (0.0, 1.0),
        NormState::Symmetric => (-1.0, 1.0),
    };
    let clamped = values.into_iter().map(|v| v.clamp(lo, hi)).collect();
    Image::from_parts(h, w, clamped, norm)
}

/// Restores an image patch by patch with an explicit tiling geometry.
///
/// Each patch condition is affinely mapped onto `[-1, 1]` before the model
/// sees it (models train on symmetric-normalized crops) and the output is
/// mapped back through the inverse, so blended values stay on the scale of
/// the input. Patch seeds derive from `seed` and the patch index; patches
/// run in parallel and the blend accumulates in a fixed order, so results
/// do not depend on thread count. The output keeps the input's declared
/// value range, clamping anything the model pushed outside it.
pub fn restore_image_with<P: PatchModel + ?Sized>(
    model: &P,
    img: &Image,
    patch: usize,
    overlap: usize,
    seed: u64,
) -> Result<Image> {
    let plan = plan_patches(img.height(), img.width(), patch, overlap)?;
    let restored: Vec<Result<Image>> = plan
        .placements()
        .par_iter()
        .enumerate()
        .map(|(i, &(top, left))| -> Result<Image> {
            let cut = image::crop(img, top, left, patch, patch)?;
            let (lo, hi) = cut.min_max();
            let mid = (lo + hi) / 2.0;
            let half = (hi - lo) / 2.0;
            let cond = if half > 0.0 {
                image::normalize_sym(&cut)?
            } else {
                Image::from_parts(patch, patch, vec![0.0; patch * patch], NormState::Symmetric)
            };
            let out = model.restore_patch(&cond, child_seed(seed, PATCH_SALT, i as u64))?;
            if out.height() != patch || out.width() != patch {
                return Err(Error::Shape(format!(
                    "model returned {}x{} for a {patch}x{patch} patch",
                    out.height(),
                    out.width()
                )));
            }
            let denormed = out.pixels().iter().map(|&v| v * half + mid).collect();
            Ok(Image::from_parts(patch, patch, denormed, NormState::Raw))
        })
        .collect();
    let restored = restored.into_iter().collect::<Result<Vec<Image>>>()?;
    let blended = assemble(&restored, &plan)?;
    let (h, w) = (blended.height(), blended.width());
    Ok(clamp_to_norm(blended.pixels().to_vec(), h, w, img.norm_state()))
}

/// [`restore_image_with`] at the default 128-pixel patch and 32-pixel
/// overlap.
pub fn restore_image<P: PatchModel + ?Sized>(model: &P, img: &Image, seed: u64) -> Result<Image> {
    restore_image_with(model, img, DEFAULT_PATCH, DEFAULT_OVERLAP, seed)
}

/// Super-resolves along the slow scan axis: rows are nearest-upsampled by
/// `factor` (2 or 4) onto the target grid and the result is restored patch
/// by patch. Output height is `factor ×` the input height.
pub fn super_resolve_with<P: PatchModel + ?Sized>(
    model: &P,
    img: &Image,
    factor: usize,
    patch: usize,
    overlap: usize,
    seed: u64,
) -> Result<Image> {
    let up = image::resample_y(img, factor, ResampleDir::UpNearest)?;
    restore_image_with(model, &up, patch, overlap, seed)
}

/// [`super_resolve_with`] at the default patch geometry.
pub fn super_resolve<P: PatchModel + ?Sized>(
    model: &P,
    img: &Image,
    factor: usize,
    seed: u64,
) -> Result<Image> {
    super_resolve_with(model, img, factor, DEFAULT_PATCH, DEFAULT_OVERLAP, seed)
}
