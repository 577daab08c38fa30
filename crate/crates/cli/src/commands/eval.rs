use std::fs;
use std::path::Path;

use anyhow::{bail, Context, Result};
use stmforge_core::io::read_stmi;
use stmforge_core::metrics::{
    cmmd, embed_set, evaluate_pairs, kid, BuiltinEmbedder, EmbeddingSet, DEFAULT_CMMD_SIGMA,
};
use stmforge_core::Image;

use crate::config::{pick, pick_required, EvalSection, RunConfig};
use crate::{stamp, EvalArgs, UsageError};

use super::parse_ssim_mode;

const KNOWN_METRICS: [&str; 4] = ["psnr", "ssim", "kid", "cmmd"];

fn parse_metrics(list: &str) -> Result<Vec<String>> {
    let mut seen = Vec::new();
    for raw in list.split(',') {
        let name = raw.trim().to_string();
        if !KNOWN_METRICS.contains(&name.as_str()) {
            return Err(UsageError(format!(
                "unknown metric {name:?} (one of {})",
                KNOWN_METRICS.join(", ")
            ))
            .into());
        }
        if !seen.contains(&name) {
            seen.push(name);
        }
    }
    if seen.is_empty() {
        return Err(UsageError("no metrics requested".into()).into());
    }
    Ok(seen)
}

/// Sorted (file name, image) list of every `.stmi` file directly in `dir`.
fn load_dir(dir: &Path) -> Result<Vec<(String, Image)>> {
    let mut names = Vec::new();
    for entry in fs::read_dir(dir).with_context(|| format!("reading {}", dir.display()))? {
        let path = entry?.path();
        if path.extension().and_then(|e| e.to_str()) == Some("stmi") {
            let name = path
                .file_name()
                .and_then(|n| n.to_str())
                .map(str::to_string)
                .with_context(|| format!("non-UTF-8 file name in {}", dir.display()))?;
            names.push((name, path));
        }
    }
    names.sort_by(|a, b| a.0.cmp(&b.0));
    if names.is_empty() {
        bail!("no .stmi files in {}", dir.display());
    }
    names
        .into_iter()
        .map(|(name, path)| Ok((name, read_stmi(&path)?)))
        .collect()
}

fn embeddings_for(
    spec: Option<&str>,
    gt: &[(String, Image)],
    pred: &[(String, Image)],
) -> Result<(EmbeddingSet, EmbeddingSet)> {
    match spec {
        Some(paths) => {
            let parts: Vec<&str> = paths.split(',').collect();
            if parts.len() != 2 {
                return Err(UsageError(
                    "--embeddings needs two comma-separated STME paths: GT.stme,PRED.stme".into(),
                )
                .into());
            }
            let a = EmbeddingSet::load(Path::new(parts[0].trim()))?;
            let b = EmbeddingSet::load(Path::new(parts[1].trim()))?;
            if a.dim() != b.dim() {
                bail!("embedding dimension mismatch: {} vs {}", a.dim(), b.dim());
            }
            Ok((a, b))
        }
        None => {
            let embedder = BuiltinEmbedder::new();
            let gt_imgs: Vec<Image> = gt.iter().map(|(_, i)| i.clone()).collect();
            let pred_imgs: Vec<Image> = pred.iter().map(|(_, i)| i.clone()).collect();
            Ok((embed_set(&embedder, &gt_imgs)?, embed_set(&embedder, &pred_imgs)?))
        }
    }
}

pub fn run(args: EvalArgs, cfg: &RunConfig) -> Result<()> {
    let sec = cfg.eval.clone().unwrap_or_default();
    let metrics = parse_metrics(&pick(args.metrics, sec.metrics, "psnr,ssim".to_string()))?;
    let mode_name = pick(args.ssim_mode, sec.ssim_mode, "windowed".to_string());
    let mode = parse_ssim_mode(&mode_name)?;
    let sigma = pick(args.cmmd_sigma, sec.cmmd_sigma, DEFAULT_CMMD_SIGMA);
    let gt_dir = pick_required("gt", args.gt, sec.gt)?;
    let pred_dir = pick_required("pred", args.pred, sec.pred)?;
    let out = pick_required("out", args.out, sec.out)?;
    let embeddings_spec = args.embeddings.or(sec.embeddings);

    let effective = RunConfig {
        eval: Some(EvalSection {
            metrics: Some(metrics.join(",")),
            ssim_mode: Some(mode_name),
            cmmd_sigma: Some(sigma),
            gt: None,
            pred: None,
            embeddings: None,
            out: None,
        }),
        ..RunConfig::default()
    };

    let gt = load_dir(&gt_dir)?;
    let pred = load_dir(&pred_dir)?;
    if gt.len() != pred.len() || gt.iter().zip(&pred).any(|(a, b)| a.0 != b.0) {
        bail!(
            "gt and pred directories must hold the same file names ({} vs {} images)",
            gt.len(),
            pred.len()
        );
    }

    let mut csv = String::from("metric,index,value\n");
    let want = |m: &str| metrics.iter().any(|x| x == m);

    if want("psnr") || want("ssim") {
        let pairs: Vec<(Image, Image)> = gt
            .iter()
            .zip(&pred)
            .map(|((_, g), (_, p))| (g.clone(), p.clone()))
            .collect();
        let report = evaluate_pairs(&pairs, mode)?;
        if want("psnr") {
            for row in &report.rows {
                csv.push_str(&format!("psnr,{},{}\n", row.index, row.psnr));
            }
            csv.push_str(&format!("psnr,mean,{}\n", report.mean_psnr));
            csv.push_str(&format!("psnr,median,{}\n", report.median_psnr));
            println!("psnr_mean {}", report.mean_psnr);
        }
        if want("ssim") {
            for row in &report.rows {
                csv.push_str(&format!("ssim,{},{}\n", row.index, row.ssim));
            }
            csv.push_str(&format!("ssim,mean,{}\n", report.mean_ssim));
            csv.push_str(&format!("ssim,median,{}\n", report.median_ssim));
            println!("ssim_mean {}", report.mean_ssim);
        }
    }

    if want("kid") || want("cmmd") {
        let (emb_gt, emb_pred) = embeddings_for(embeddings_spec.as_deref(), &gt, &pred)?;
        if want("kid") {
            let v = kid(&emb_gt, &emb_pred)?;
            csv.push_str(&format!("kid,all,{v}\n"));
            println!("kid {v}");
        }
        if want("cmmd") {
            let v = cmmd(&emb_gt, &emb_pred, sigma)?;
            csv.push_str(&format!("cmmd,all,{v}\n"));
            println!("cmmd {v}");
        }
    }

    if let Some(parent) = out.parent() {
        if !parent.as_os_str().is_empty() {
            fs::create_dir_all(parent)?;
        }
    }
    fs::write(&out, &csv).with_context(|| format!("writing {}", out.display()))?;
    let seed = 0;
    let stamp_path = stamp::write(&out, false, "eval", seed, &effective)?;
    println!("report {}", out.display());
    println!("stamp {}", stamp_path.display());
    Ok(())
}
