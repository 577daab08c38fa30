//! `stmforge`: dataset generation, toy training, restoration,
//! super-resolution, evaluation and benchmarking for synthetic STM imagery.
//!
//! Every subcommand layers flags over an optional `--config` TOML file and
//! writes a reproducibility stamp alongside its outputs. Exit codes: 0 on
//! success, 2 for usage errors, 1 for runtime failures.

mod commands;
mod config;
mod sources;
mod stamp;

use std::fmt;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

/// A bad invocation (missing/invalid settings) as opposed to a runtime
/// failure; mapped to exit code 2 like clap's own parse errors.
#[derive(Debug)]
pub struct UsageError(pub String);

impl fmt::Display for UsageError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for UsageError {}

#[derive(Parser)]
#[command(name = "stmforge", version, about = "Synthetic STM image pipeline")]
struct Cli {
    /// TOML config file; command-line flags override its values.
    #[arg(long, global = true, value_name = "FILE")]
    config: Option<PathBuf>,
    /// Worker thread count. Outputs never depend on it.
    #[arg(long, global = true, value_name = "N")]
    jobs: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate train/val/test splits of degraded samples plus manifests.
    Generate(GenerateArgs),
    /// Generate an evaluation set where one chosen degradation always fires.
    Targeted(TargetedArgs),
    /// Train the small reference denoiser on a generated split.
    TrainToy(TrainToyArgs),
    /// Restore a degraded image with a trained model.
    Restore(RestoreArgs),
    /// Super-resolve an image along the slow scan axis.
    Sr(SrArgs),
    /// Score a directory of predictions against ground-truth images.
    Eval(EvalArgs),
    /// Sweep the analytic double-tip model against the ghost pipeline step.
    PhysicsCheck(PhysicsCheckArgs),
    /// Time patch restoration across sampler step counts.
    Bench(BenchArgs),
}

#[derive(Args)]
struct GenerateArgs {
    /// restore, sr2 or sr4.
    #[arg(long)]
    task: Option<String>,
    #[arg(long)]
    seed: Option<u64>,
    /// Sample counts as train,val,test.
    #[arg(long, value_parser = parse_triple)]
    counts: Option<[usize; 3]>,
    /// Side length of the synthesized pristine source images.
    #[arg(long)]
    source_size: Option<usize>,
    /// Pristine pool sizes as train,val,test.
    #[arg(long, value_parser = parse_triple)]
    sources: Option<[usize; 3]>,
    /// Output dataset directory.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct TargetedArgs {
    /// multitip, misalign, tipchange, blunt, scanline or lowres_only.
    #[arg(long)]
    degradation: Option<String>,
    /// restore, sr2 or sr4 (lowres_only needs an SR task).
    #[arg(long)]
    task: Option<String>,
    /// Number of samples.
    #[arg(long)]
    n: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    source_size: Option<usize>,
    /// Pristine pool size.
    #[arg(long)]
    sources: Option<usize>,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct TrainToyArgs {
    /// fm, ddim, ddim_fft or mae.
    #[arg(long)]
    objective: Option<String>,
    /// Dataset directory produced by `generate`.
    #[arg(long)]
    data: Option<PathBuf>,
    /// Which split to train on.
    #[arg(long)]
    split: Option<String>,
    #[arg(long)]
    epochs: Option<usize>,
    #[arg(long)]
    batch: Option<usize>,
    #[arg(long)]
    lr: Option<f64>,
    #[arg(long)]
    seed: Option<u64>,
    /// Diffusion schedule length for the noise objectives.
    #[arg(long)]
    t_steps: Option<usize>,
    /// Fixed (time, noise) draws per sample.
    #[arg(long)]
    draws_per_sample: Option<usize>,
    /// l1 or l2.
    #[arg(long)]
    loss_norm: Option<String>,
    /// Weight checkpoint to write.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct RestoreArgs {
    /// Weight checkpoint (.stmw).
    #[arg(long)]
    model: Option<PathBuf>,
    /// fm or ddim.
    #[arg(long)]
    sampler: Option<String>,
    #[arg(long)]
    steps: Option<usize>,
    #[arg(long)]
    patch: Option<usize>,
    #[arg(long)]
    overlap: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    /// Diffusion schedule length for the ddim sampler.
    #[arg(long)]
    t_steps: Option<usize>,
    /// Input image (.stmi).
    #[arg(long = "in")]
    input: Option<PathBuf>,
    /// Output image (.stmi).
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct SrArgs {
    /// Upsampling factor along the slow axis: 2 or 4.
    #[arg(long)]
    factor: Option<usize>,
    #[arg(long)]
    model: Option<PathBuf>,
    #[arg(long)]
    sampler: Option<String>,
    #[arg(long)]
    steps: Option<usize>,
    #[arg(long)]
    patch: Option<usize>,
    #[arg(long)]
    overlap: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    t_steps: Option<usize>,
    #[arg(long = "in")]
    input: Option<PathBuf>,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct EvalArgs {
    /// Directory of ground-truth .stmi images.
    #[arg(long)]
    gt: Option<PathBuf>,
    /// Directory of prediction .stmi images with matching file names.
    #[arg(long)]
    pred: Option<PathBuf>,
    /// Comma list from psnr,ssim,kid,cmmd.
    #[arg(long)]
    metrics: Option<String>,
    /// global or windowed.
    #[arg(long)]
    ssim_mode: Option<String>,
    /// Gaussian kernel bandwidth for cmmd.
    #[arg(long)]
    cmmd_sigma: Option<f64>,
    /// Precomputed embeddings as GT.stme,PRED.stme; omitted = built-in embedder.
    #[arg(long)]
    embeddings: Option<String>,
    /// Report CSV to write.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct PhysicsCheckArgs {
    /// Number of random parameter draws.
    #[arg(long)]
    draws: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    /// Maximum acceptable pixel deviation.
    #[arg(long)]
    tolerance: Option<f64>,
    /// Optional CSV to write the sweep result to.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct BenchArgs {
    #[arg(long)]
    model: Option<PathBuf>,
    /// fm or ddim.
    #[arg(long)]
    sampler: Option<String>,
    /// Comma list of sampler step counts.
    #[arg(long, value_parser = parse_steps)]
    steps: Option<std::vec::Vec<usize>>,
    /// Repeats per step count; best wall time is kept.
    #[arg(long)]
    repeat: Option<usize>,
    /// Side length of the synthetic benchmark image.
    #[arg(long)]
    size: Option<usize>,
    #[arg(long)]
    patch: Option<usize>,
    #[arg(long)]
    overlap: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    t_steps: Option<usize>,
    /// Timing CSV to write.
    #[arg(long)]
    out: Option<PathBuf>,
}

fn parse_triple(s: &str) -> Result<[usize; 3], String> {
    let parts: Vec<&str> = s.split(',').collect();
    if parts.len() != 3 {
        return Err(format!("expected three comma-separated counts, got {s:?}"));
    }
    let mut out = [0usize; 3];
    for (slot, part) in out.iter_mut().zip(&parts) {
        *slot = part.trim().parse().map_err(|e| format!("bad count {part:?}: {e}"))?;
    }
    Ok(out)
}

fn parse_steps(s: &str) -> Result<Vec<usize>, String> {
    s.split(',')
        .map(|p| p.trim().parse().map_err(|e| format!("bad step count {p:?}: {e}")))
        .collect()
}

fn run(cli: Cli) -> anyhow::Result<()> {
    let file_cfg = config::RunConfig::load(cli.config.as_deref())?;
    match cli.command {
        Command::Generate(args) => commands::generate::run(args, &file_cfg),
        Command::Targeted(args) => commands::targeted::run(args, &file_cfg),
        Command::TrainToy(args) => commands::train_toy::run(args, &file_cfg),
        Command::Restore(args) => commands::restore::run(args, &file_cfg),
        Command::Sr(args) => commands::sr::run(args, &file_cfg),
        Command::Eval(args) => commands::eval::run(args, &file_cfg),
        Command::PhysicsCheck(args) => commands::physics_check::run(args, &file_cfg),
        Command::Bench(args) => commands::bench::run(args, &file_cfg),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    if let Some(jobs) = cli.jobs {
        if jobs == 0 {
            eprintln!("error: --jobs must be at least 1");
            return ExitCode::from(2);
        }
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(jobs).build_global() {
            eprintln!("error: thread pool: {e}");
            return ExitCode::from(1);
        }
    }
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            if e.downcast_ref::<UsageError>().is_some() {
                ExitCode::from(2)
            } else {
                ExitCode::from(1)
            }
        }
    }
}
