//! Subcommand implementations plus the option-parsing helpers they share.

pub mod bench;
pub mod eval;
pub mod generate;
pub mod physics_check;
pub mod restore;
pub mod sr;
pub mod targeted;
pub mod train_toy;

use anyhow::Result;
use stmforge_core::degrade::{Task, TargetedKind};
use stmforge_core::genmodel::{cosine_schedule, LossNorm, TinyDenoiser};
use stmforge_core::metrics::SsimMode;
use stmforge_core::patchwork::{restore_image_with, super_resolve_with, DdimPatchModel, FmPatchModel};
use stmforge_core::Image;

use crate::UsageError;

pub(crate) fn parse_task(s: &str) -> Result<Task> {
    match s {
        "restore" => Ok(Task::Restore),
        "sr2" => Ok(Task::Sr2),
        "sr4" => Ok(Task::Sr4),
        other => Err(UsageError(format!("unknown task {other:?} (restore, sr2, sr4)")).into()),
    }
}

pub(crate) fn parse_targeted_kind(s: &str) -> Result<TargetedKind> {
    TargetedKind::ALL
        .into_iter()
        .find(|k| k.as_str() == s)
        .ok_or_else(|| {
            let names: Vec<&str> = TargetedKind::ALL.iter().map(|k| k.as_str()).collect();
            UsageError(format!("unknown degradation {s:?} (one of {})", names.join(", "))).into()
        })
}

pub(crate) fn parse_loss_norm(s: &str) -> Result<LossNorm> {
    match s {
        "l1" => Ok(LossNorm::L1),
        "l2" => Ok(LossNorm::L2),
        other => Err(UsageError(format!("unknown loss norm {other:?} (l1, l2)")).into()),
    }
}

pub(crate) fn parse_ssim_mode(s: &str) -> Result<SsimMode> {
    match s {
        "global" => Ok(SsimMode::Global),
        "windowed" => Ok(SsimMode::Windowed),
        other => Err(UsageError(format!("unknown ssim mode {other:?} (global, windowed)")).into()),
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub(crate) enum SamplerChoice {
    Fm,
    Ddim,
}

impl SamplerChoice {
    pub(crate) fn as_str(self) -> &'static str {
        match self {
            SamplerChoice::Fm => "fm",
            SamplerChoice::Ddim => "ddim",
        }
    }
}

pub(crate) fn parse_sampler(s: &str) -> Result<SamplerChoice> {
    match s {
        "fm" => Ok(SamplerChoice::Fm),
        "ddim" => Ok(SamplerChoice::Ddim),
        other => Err(UsageError(format!("unknown sampler {other:?} (fm, ddim)")).into()),
    }
}

/// Patch-restore or super-resolve `img` with the chosen sampler.
#[allow(clippy::too_many_arguments)]
pub(crate) fn apply_model(
    model: &TinyDenoiser,
    sampler: SamplerChoice,
    steps: usize,
    t_steps: usize,
    img: &Image,
    sr_factor: Option<usize>,
    patch: usize,
    overlap: usize,
    seed: u64,
) -> Result<Image> {
    let out = match sampler {
        SamplerChoice::Fm => {
            let pm = FmPatchModel { model, steps };
            match sr_factor {
                None => restore_image_with(&pm, img, patch, overlap, seed)?,
                Some(f) => super_resolve_with(&pm, img, f, patch, overlap, seed)?,
            }
        }
        SamplerChoice::Ddim => {
            let sched = cosine_schedule(t_steps)?;
            let pm = DdimPatchModel { model, schedule: &sched, steps };
            match sr_factor {
                None => restore_image_with(&pm, img, patch, overlap, seed)?,
                Some(f) => super_resolve_with(&pm, img, f, patch, overlap, seed)?,
            }
        }
    };
    Ok(out)
}
