use anyhow::{Context, Result};
use stmforge_core::genmodel::TinyDenoiser;
use stmforge_core::io::{read_stmi, write_stmi};
use stmforge_core::patchwork::{DEFAULT_OVERLAP, DEFAULT_PATCH};

use crate::config::{pick, pick_required, RunConfig, SrSection};
use crate::{stamp, SrArgs, UsageError};

use super::{apply_model, parse_sampler};

pub fn run(args: SrArgs, cfg: &RunConfig) -> Result<()> {
    let sec = cfg.sr.clone().unwrap_or_default();
    let factor = pick(args.factor, sec.factor, 2);
    if factor != 2 && factor != 4 {
        return Err(UsageError(format!("--factor must be 2 or 4, got {factor}")).into());
    }
    let sampler_name = pick(args.sampler, sec.sampler, "fm".to_string());
    let sampler = parse_sampler(&sampler_name)?;
    let steps = pick(args.steps, sec.steps, 2);
    let patch = pick(args.patch, sec.patch, DEFAULT_PATCH);
    let overlap = pick(args.overlap, sec.overlap, DEFAULT_OVERLAP);
    let seed = pick(args.seed, sec.seed, 0);
    let t_steps = pick(args.t_steps, sec.t_steps, 1000);
    let model_path = pick_required("model", args.model, sec.model)?;
    let input = pick_required("in", args.input, sec.input)?;
    let output = pick_required("out", args.out, sec.output)?;

    let effective = RunConfig {
        sr: Some(SrSection {
            factor: Some(factor),
            sampler: Some(sampler.as_str().to_string()),
            steps: Some(steps),
            patch: Some(patch),
            overlap: Some(overlap),
            seed: Some(seed),
            t_steps: Some(t_steps),
            model: None,
            input: None,
            output: None,
        }),
        ..RunConfig::default()
    };

    let img = read_stmi(&input).with_context(|| format!("reading {}", input.display()))?;
    let model = TinyDenoiser::load(&model_path)
        .with_context(|| format!("loading model {}", model_path.display()))?;
    let upsampled =
        apply_model(&model, sampler, steps, t_steps, &img, Some(factor), patch, overlap, seed)?;
    write_stmi(&output, &upsampled)?;
    let stamp_path = stamp::write(&output, false, "sr", seed, &effective)?;
    println!(
        "super-resolved {}x{} -> {}x{} ({})",
        img.height(),
        img.width(),
        upsampled.height(),
        upsampled.width(),
        output.display()
    );
    println!("stamp {}", stamp_path.display());
    Ok(())
}
