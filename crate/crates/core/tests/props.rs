//! Randomized invariants: blending weights always partition unity, affine
//! normalizations hit their endpoints, rotations are exact bijections,
//! kernel two-sample distances behave like distances, and the diffusion
//! forward map inverts exactly when the true noise is known.

use proptest::prelude::*;
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use stmforge_core::genmodel::{cosine_schedule, ddim_forward, ddim_reconstruct_x0};
use stmforge_core::image::{normalize_sym, normalize_unit, rotate_quarter};
use stmforge_core::metrics::{mmd2, Estimator, GaussianKernel, LinearKernel, PolyCubicKernel};
use stmforge_core::metrics::EmbeddingSet;
use stmforge_core::patchwork::{plan_patches, restore_image_with, IdentityPatchModel};
use stmforge_core::{Image, NormState};

fn rand_image(h: usize, w: usize, seed: u64) -> Image {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    Image::from_fn(h, w, NormState::Raw, |r, c| {
        // Index ramp keeps the range non-degenerate for any draw.
        rng.random_range(-3.0..3.0) + (r + c) as f64 * 1e-6
    })
    .unwrap()
}

fn rand_set(n: usize, d: usize, seed: u64) -> EmbeddingSet {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let data = (0..n * d).map(|_| rng.random_range(-2.0..2.0)).collect();
    EmbeddingSet::new("prop", d, data).unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn blending_weights_partition_unity(
        h in 128usize..=384,
        w in 128usize..=384,
        overlap in 1usize..=64,
    ) {
        let plan = plan_patches(h, w, 128, overlap).unwrap();
        let mut total = vec![0.0f64; h * w];
        for (i, &(top, left)) in plan.placements().iter().enumerate() {
            let win = plan.window(i);
            for r in 0..128 {
                for c in 0..128 {
                    total[(top + r) * w + (left + c)] += win[r * 128 + c];
                }
            }
        }
        for (i, &t) in total.iter().enumerate() {
            prop_assert!((t - 1.0).abs() < 1e-9, "pixel {i}: {t}");
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn normalization_hits_endpoints_and_preserves_order(
        h in 2usize..=24,
        w in 2usize..=24,
        seed in any::<u64>(),
    ) {
        let img = rand_image(h, w, seed);
        let unit = normalize_unit(&img).unwrap();
        let (lo, hi) = unit.min_max();
        prop_assert_eq!(lo, 0.0);
        prop_assert_eq!(hi, 1.0);
        let sym = normalize_sym(&img).unwrap();
        let (lo, hi) = sym.min_max();
        prop_assert_eq!(lo, -1.0);
        prop_assert_eq!(hi, 1.0);
        // Affine maps preserve pixel ordering.
        let raw = img.pixels();
        let mapped = unit.pixels();
        for i in 1..raw.len() {
            prop_assert_eq!(
                raw[i] > raw[i - 1],
                mapped[i] > mapped[i - 1],
            );
        }
    }

    #[test]
    fn quarter_turns_are_exact_bijections(
        h in 1usize..=17,
        w in 1usize..=17,
        seed in any::<u64>(),
        turns in 0u8..=7,
    ) {
        let img = rand_image(h, w, seed);
        let spun = rotate_quarter(&img, turns);
        // Undoing with the complementary turn count restores every pixel.
        let back = rotate_quarter(&spun, 4 - turns % 4);
        prop_assert_eq!(back.pixels(), img.pixels());
        // Rotation permutes, never rescales.
        let mut a = img.pixels().to_vec();
        let mut b = spun.pixels().to_vec();
        a.sort_by(f64::total_cmp);
        b.sort_by(f64::total_cmp);
        prop_assert_eq!(a, b);
    }

    #[test]
    fn mmd_behaves_like_a_distance(
        n in 2usize..=8,
        m in 2usize..=8,
        d in 1usize..=6,
        seed in any::<u64>(),
    ) {
        let x = rand_set(n, d, seed);
        let y = rand_set(m, d, seed.wrapping_add(1));
        let gaussian = GaussianKernel { sigma: 3.0 };
        let poly = PolyCubicKernel { d };

        let self_lin = mmd2(&x, &x, &LinearKernel, Estimator::Biased).unwrap();
        let self_gau = mmd2(&x, &x, &gaussian, Estimator::Biased).unwrap();
        let self_pol = mmd2(&x, &x, &poly, Estimator::Biased).unwrap();
        prop_assert!(self_lin.abs() < 1e-9);
        prop_assert!(self_gau.abs() < 1e-9);
        prop_assert!(self_pol.abs() < 1e-9);

        let xy = mmd2(&x, &y, &gaussian, Estimator::Biased).unwrap();
        let yx = mmd2(&y, &x, &gaussian, Estimator::Biased).unwrap();
        prop_assert!((xy - yx).abs() < 1e-12);
        prop_assert!(xy >= -1e-12);

        let uxy = mmd2(&x, &y, &gaussian, Estimator::Unbiased).unwrap();
        let uyx = mmd2(&y, &x, &gaussian, Estimator::Unbiased).unwrap();
        prop_assert!((uxy - uyx).abs() < 1e-12);
    }

    #[test]
    fn forward_noising_inverts_with_known_noise(
        h in 2usize..=12,
        w in 2usize..=12,
        t in 1usize..=1000,
        seed in any::<u64>(),
    ) {
        let sched = cosine_schedule(1000).unwrap();
        let x0 = rand_image(h, w, seed);
        let eps = rand_image(h, w, seed.wrapping_add(9));
        let xt = ddim_forward(&x0, &eps, t, &sched).unwrap();
        let back = ddim_reconstruct_x0(&xt, &eps, t, &sched).unwrap();
        for (a, b) in back.pixels().iter().zip(x0.pixels()) {
            prop_assert!((a - b).abs() < 1e-6, "{a} vs {b} at t={t}");
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(12))]

    #[test]
    fn identity_restoration_round_trips(
        h in 128usize..=220,
        w in 128usize..=220,
        seed in any::<u64>(),
    ) {
        let raw = rand_image(h, w, seed);
        let img = normalize_sym(&raw).unwrap();
        let out = restore_image_with(&IdentityPatchModel, &img, 128, 32, seed).unwrap();
        let worst = img
            .pixels()
            .iter()
            .zip(out.pixels())
            .map(|(&a, &b)| (a - b).abs())
            .fold(0.0f64, f64::max);
        prop_assert!(worst < 1e-6, "max abs error {worst}");
    }
}
