use std::fs;

use anyhow::{bail, Result};
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use stmforge_core::degrade::{apply_multi_tip, KernelChoice, MultiTipParams, TipCopyParams};
use stmforge_core::tipphysics::{double_tip_height, map_physical_to_eq1, PhysicalTipParams};
use stmforge_core::{Image, NormState};

use crate::config::{pick, PhysicsCheckSection, RunConfig};
use crate::{stamp, PhysicsCheckArgs};

/// Maximum pixel deviation between the analytic double-tip surface and the
/// pipeline's single-ghost step with an identity kernel, over random
/// parameter draws and random height grids.
fn sweep(draws: usize, seed: u64) -> Result<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut worst = 0.0f64;
    for _ in 0..draws {
        let phys = PhysicalTipParams {
            i_t: rng.random_range(0.1..2.0),
            gamma: rng.random_range(-1.0..1.5),
            kappa: rng.random_range(0.5..3.0),
            a: rng.random_range(-0.3..0.5),
            s: rng.random_range(0..=8) as f64,
        };
        let eq1 = map_physical_to_eq1(&phys)?;
        let surface =
            Image::from_fn(32, 32, NormState::Raw, |_, _| rng.random_range(-1.0..1.0))?;
        let copy = TipCopyParams {
            amplitude: eq1.amplitude,
            c: eq1.c,
            d: eq1.d,
            dx: eq1.dx,
            dy: eq1.dy,
            kernel: KernelChoice::Random { size: 1, weights: vec![1.0] },
        };
        let via_pipeline = apply_multi_tip(&surface, &MultiTipParams { copies: vec![copy] })?;
        let via_physics = double_tip_height(&surface, &phys)?;
        for (a, b) in via_pipeline.pixels().iter().zip(via_physics.pixels()) {
            worst = worst.max((a - b).abs());
        }
    }
    Ok(worst)
}

pub fn run(args: PhysicsCheckArgs, cfg: &RunConfig) -> Result<()> {
    let sec = cfg.physics_check.clone().unwrap_or_default();
    let draws = pick(args.draws, sec.draws, 1000);
    let seed = pick(args.seed, sec.seed, 0);
    let tolerance = pick(args.tolerance, sec.tolerance, 1e-9);

    let effective = RunConfig {
        physics_check: Some(PhysicsCheckSection {
            draws: Some(draws),
            seed: Some(seed),
            tolerance: Some(tolerance),
        }),
        ..RunConfig::default()
    };

    let worst = sweep(draws, seed)?;
    println!("max deviation {worst:.3e} over {draws} draws (tolerance {tolerance:.1e})");
    if let Some(out) = args.out {
        let csv = format!("draws,max_deviation,tolerance\n{draws},{worst},{tolerance}\n");
        fs::write(&out, csv)?;
        let stamp_path = stamp::write(&out, false, "physics-check", seed, &effective)?;
        println!("report {}", out.display());
        println!("stamp {}", stamp_path.display());
    }
    if worst > tolerance {
        bail!("deviation {worst:.3e} exceeds tolerance {tolerance:.1e}");
    }
    Ok(())
}
