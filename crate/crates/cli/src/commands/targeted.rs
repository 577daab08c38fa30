use anyhow::Result;
use stmforge_core::degrade::{generate_targeted_set, Task, TargetedKind};

use crate::config::{pick, pick_required, PipelineSection, RunConfig, TargetedSection};
use crate::{sources, stamp, TargetedArgs, UsageError};

use super::{parse_targeted_kind, parse_task};

pub fn run(args: TargetedArgs, cfg: &RunConfig) -> Result<()> {
    let sec = cfg.targeted.clone().unwrap_or_default();
    let kind_name = pick_required("degradation", args.degradation, sec.degradation)?;
    let kind = parse_targeted_kind(&kind_name)?;
    let task_name = pick(args.task, sec.task, "restore".to_string());
    let task = parse_task(&task_name)?;
    if kind == TargetedKind::LowresOnly && task == Task::Restore {
        return Err(UsageError("lowres_only needs --task sr2 or sr4".into()).into());
    }
    let n = pick(args.n, sec.n, 8);
    let seed = pick(args.seed, sec.seed, 0);
    let source_size = pick(args.source_size, sec.source_size, 256);
    let source_count = pick(args.sources, sec.sources, 6);
    let out = pick_required("out", args.out, sec.out)?;
    let pipeline = cfg.pipeline();

    let effective = RunConfig {
        pipeline: Some(PipelineSection::echo(&pipeline)),
        targeted: Some(TargetedSection {
            degradation: Some(kind.as_str().to_string()),
            task: Some(task.as_str().to_string()),
            n: Some(n),
            seed: Some(seed),
            source_size: Some(source_size),
            sources: Some(source_count),
            out: None,
        }),
        ..RunConfig::default()
    };

    let pool = sources::targeted_pool(source_size, source_count, seed)?;
    let manifest = generate_targeted_set(&out, &pool, kind, task, &pipeline, n, seed)?;
    let stamp_path = stamp::write(&out, true, "targeted", seed, &effective)?;
    println!("{}: {} samples", manifest.split, manifest.entries.len());
    println!("stamp {}", stamp_path.display());
    Ok(())
}
