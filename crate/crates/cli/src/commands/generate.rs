use anyhow::Result;
use stmforge_core::degrade::{generate_dataset, SplitCounts};

use crate::config::{pick, pick_required, GenerateSection, PipelineSection, RunConfig};
use crate::{sources, stamp, GenerateArgs};

use super::parse_task;

pub fn run(args: GenerateArgs, cfg: &RunConfig) -> Result<()> {
    let sec = cfg.generate.clone().unwrap_or_default();
    let task_name = pick(args.task, sec.task, "restore".to_string());
    let task = parse_task(&task_name)?;
    let seed = pick(args.seed, sec.seed, 0);
    let counts = pick(args.counts, sec.counts, [100, 10, 10]);
    let source_size = pick(args.source_size, sec.source_size, 256);
    let source_counts = pick(args.sources, sec.sources, [36, 12, 6]);
    let out = pick_required("out", args.out, sec.out)?;
    let pipeline = cfg.pipeline();

    let effective = RunConfig {
        pipeline: Some(PipelineSection::echo(&pipeline)),
        generate: Some(GenerateSection {
            task: Some(task.as_str().to_string()),
            seed: Some(seed),
            counts: Some(counts),
            source_size: Some(source_size),
            sources: Some(source_counts),
            out: None,
        }),
        ..RunConfig::default()
    };

    let pools = sources::pristine_pools(source_size, source_counts, seed)?;
    let split_counts = SplitCounts { train: counts[0], val: counts[1], test: counts[2] };
    let manifests = generate_dataset(&out, &pools, task, &pipeline, split_counts, seed)?;
    let stamp_path = stamp::write(&out, true, "generate", seed, &effective)?;
    for m in &manifests {
        println!("{}: {} samples", m.split, m.entries.len());
    }
    println!("stamp {}", stamp_path.display());
    Ok(())
}
