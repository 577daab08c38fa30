use anyhow::{Context, Result};
use stmforge_core::degrade::{load_split, SampleRecord};
use stmforge_core::genmodel::{train_toy, Objective, TrainConfig};

use crate::config::{pick, pick_required, RunConfig, TrainToySection};
use crate::{stamp, TrainToyArgs, UsageError};

use super::parse_loss_norm;

pub fn run(args: TrainToyArgs, cfg: &RunConfig) -> Result<()> {
    let sec = cfg.train_toy.clone().unwrap_or_default();
    let objective_name = pick(args.objective, sec.objective, "fm".to_string());
    let objective = Objective::parse(&objective_name)
        .map_err(|e| UsageError(e.to_string()))?;
    let split = pick(args.split, sec.split, "train".to_string());
    let defaults = TrainConfig::default();
    let epochs = pick(args.epochs, sec.epochs, defaults.epochs);
    let batch = pick(args.batch, sec.batch, defaults.batch);
    let lr = pick(args.lr, sec.lr, defaults.lr);
    let seed = pick(args.seed, sec.seed, defaults.seed);
    let t_steps = pick(args.t_steps, sec.t_steps, defaults.t_steps);
    let draws = pick(args.draws_per_sample, sec.draws_per_sample, defaults.draws_per_sample);
    let norm_name = pick(args.loss_norm, sec.loss_norm, "l1".to_string());
    let loss_norm = parse_loss_norm(&norm_name)?;
    let data = pick_required("data", args.data, sec.data)?;
    let out = pick_required("out", args.out, sec.out)?;

    let effective = RunConfig {
        train_toy: Some(TrainToySection {
            objective: Some(objective.as_str().to_string()),
            split: Some(split.clone()),
            epochs: Some(epochs),
            batch: Some(batch),
            lr: Some(lr),
            seed: Some(seed),
            t_steps: Some(t_steps),
            draws_per_sample: Some(draws),
            loss_norm: Some(norm_name),
            data: None,
            out: None,
        }),
        ..RunConfig::default()
    };

    let (manifest, pairs) = load_split(&data, &split)
        .with_context(|| format!("loading split {split:?} from {}", data.display()))?;
    let records: Vec<SampleRecord> = manifest
        .entries
        .iter()
        .zip(pairs)
        .map(|(entry, (ground_truth, degraded))| SampleRecord {
            ground_truth,
            degraded,
            trace: entry.trace.clone(),
            task: manifest.task,
        })
        .collect();
    println!("training on {} samples from {}", records.len(), data.display());

    let tcfg = TrainConfig { epochs, batch, lr, seed, t_steps, draws_per_sample: draws, loss_norm };
    let (model, curve) = train_toy(&records, objective, &tcfg)?;
    for (i, loss) in curve.iter().enumerate() {
        println!("epoch {i}: loss {loss:.6}");
    }
    model.save(&out)?;
    let stamp_path = stamp::write(&out, false, "train-toy", seed, &effective)?;
    println!("model {}", out.display());
    println!("stamp {}", stamp_path.display());
    Ok(())
}
