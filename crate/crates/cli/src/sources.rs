//! Deterministic pristine-source pools: synthetic lattice images with
//! per-image parameter draws tied to the dataset seed.

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use anyhow::Result;
use stmforge_core::degrade::{child_seed, PristineSet};
use stmforge_core::lattice::{synth_lattice, LatticeOrientation};
use stmforge_core::Image;

const SALT_TRAIN: u64 = 0x5352_43_1;
const SALT_VAL: u64 = 0x5352_43_2;
const SALT_TEST: u64 = 0x5352_43_3;
const SALT_TARGETED: u64 = 0x5352_43_4;

fn lattice(size: usize, seed: u64) -> Result<Image> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let period = rng.random_range(4.5..9.5);
    let orientation = match rng.random_range(0..3u8) {
        0 => LatticeOrientation::Horizontal,
        1 => LatticeOrientation::Vertical,
        _ => LatticeOrientation::Diagonal,
    };
    Ok(synth_lattice(size, size, period, orientation, 0.02, rng.random())?)
}

fn pool(size: usize, count: usize, seed: u64, salt: u64) -> Result<Vec<Image>> {
    (0..count)
        .map(|i| lattice(size, child_seed(seed, salt, i as u64)))
        .collect()
}

/// Three disjoint pools (train/val/test) of `counts` lattice images.
pub fn pristine_pools(size: usize, counts: [usize; 3], seed: u64) -> Result<PristineSet> {
    Ok(PristineSet {
        train: pool(size, counts[0], seed, SALT_TRAIN)?,
        val: pool(size, counts[1], seed, SALT_VAL)?,
        test: pool(size, counts[2], seed, SALT_TEST)?,
    })
}

/// One pool for targeted single-degradation sets.
pub fn targeted_pool(size: usize, count: usize, seed: u64) -> Result<Vec<Image>> {
    pool(size, count, seed, SALT_TARGETED)
}
