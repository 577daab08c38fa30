use anyhow::{Context, Result};
use stmforge_core::genmodel::TinyDenoiser;
use stmforge_core::io::{read_stmi, write_stmi};
use stmforge_core::patchwork::{DEFAULT_OVERLAP, DEFAULT_PATCH};

use crate::config::{pick, pick_required, RestoreSection, RunConfig};
use crate::{stamp, RestoreArgs};

use super::{apply_model, parse_sampler};

pub fn run(args: RestoreArgs, cfg: &RunConfig) -> Result<()> {
    let sec = cfg.restore.clone().unwrap_or_default();
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
        restore: Some(RestoreSection {
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
    let restored = apply_model(&model, sampler, steps, t_steps, &img, None, patch, overlap, seed)?;
    write_stmi(&output, &restored)?;
    let stamp_path = stamp::write(&output, false, "restore", seed, &effective)?;
    println!(
        "restored {}x{} -> {}",
        restored.height(),
        restored.width(),
        output.display()
    );
    println!("stamp {}", stamp_path.display());
    Ok(())
}
