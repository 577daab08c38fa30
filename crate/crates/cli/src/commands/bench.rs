use std::fs;

use anyhow::{Context, Result};
use stmforge_core::bench::{run_bench, BenchSampler};
use stmforge_core::genmodel::{cosine_schedule, TinyDenoiser};
use stmforge_core::patchwork::{DEFAULT_OVERLAP, DEFAULT_PATCH};

use crate::config::{pick, pick_required, BenchSection, RunConfig};
use crate::{sources, stamp, BenchArgs};

use super::{parse_sampler, SamplerChoice};

pub fn run(args: BenchArgs, cfg: &RunConfig) -> Result<()> {
    let sec = cfg.bench.clone().unwrap_or_default();
    let sampler_name = pick(args.sampler, sec.sampler, "fm".to_string());
    let sampler = parse_sampler(&sampler_name)?;
    let steps = pick(args.steps, sec.steps, vec![2, 5, 10]);
    let repeat = pick(args.repeat, sec.repeat, 3);
    let size = pick(args.size, sec.size, 256);
    let patch = pick(args.patch, sec.patch, DEFAULT_PATCH);
    let overlap = pick(args.overlap, sec.overlap, DEFAULT_OVERLAP);
    let seed = pick(args.seed, sec.seed, 0);
    let t_steps = pick(args.t_steps, sec.t_steps, 1000);
    let model_path = pick_required("model", args.model, sec.model)?;
    let out = pick_required("out", args.out, sec.out)?;

    let effective = RunConfig {
        bench: Some(BenchSection {
            sampler: Some(sampler.as_str().to_string()),
            steps: Some(steps.clone()),
            repeat: Some(repeat),
            size: Some(size),
            patch: Some(patch),
            overlap: Some(overlap),
            seed: Some(seed),
            t_steps: Some(t_steps),
            model: None,
            out: None,
        }),
        ..RunConfig::default()
    };

    let model = TinyDenoiser::load(&model_path)
        .with_context(|| format!("loading model {}", model_path.display()))?;
    let img = sources::targeted_pool(size, 1, seed)?.remove(0);
    let report = match sampler {
        SamplerChoice::Fm => {
            run_bench(&model, BenchSampler::Fm, &img, &steps, repeat, patch, overlap, seed)?
        }
        SamplerChoice::Ddim => {
            let sched = cosine_schedule(t_steps)?;
            run_bench(
                &model,
                BenchSampler::Ddim(&sched),
                &img,
                &steps,
                repeat,
                patch,
                overlap,
                seed,
            )?
        }
    };
    for row in &report.rows {
        println!(
            "steps {}: total {:.4} s, per-step {:.5} s",
            row.steps, row.total_secs, row.per_step_secs
        );
    }
    if let Some(fit) = &report.fit {
        println!(
            "fit: slope {:.6} s/step, intercept {:.6} s, r_squared {:.6}",
            fit.slope, fit.intercept, fit.r_squared
        );
    }
    fs::write(&out, report.to_csv()).with_context(|| format!("writing {}", out.display()))?;
    let stamp_path = stamp::write(&out, false, "bench", seed, &effective)?;
    println!("report {}", out.display());
    println!("stamp {}", stamp_path.display());
    Ok(())
}
