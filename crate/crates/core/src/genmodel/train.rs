//! Toy training loop: Adam over the reference denoiser on a list of sample
//! pairs, with fixed per-sample noise/time draws so loss curves are
//! comparable across epochs and runs are reproducible to the bit.

use rand::seq::SliceRandom;
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use rustfft::num_complex::Complex;
use serde::{Deserialize, Serialize};

use crate::degrade::{child_seed, SampleRecord};
use crate::error::{Error, Result};
use crate::fft::{fft2, ifft2_unnorm};
use crate::genmodel::denoiser::TinyDenoiser;
use crate::genmodel::diffusion::{ddim_forward, ddim_reconstruct_x0};
use crate::genmodel::flow::{fm_forward, fm_target_velocity};
use crate::genmodel::losses::{loss_dm, loss_fft_dm, loss_fm, loss_mae, wrap_phase, LossNorm};
use crate::genmodel::schedule::{cosine_schedule, NoiseSchedule};
use crate::image::{Image, NormState};

/// Training objective: velocity field, noise prediction, noise prediction
/// with the spectral term, or the plain autoencoder baseline.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Objective {
    Fm,
    Ddim,
    DdimFft,
    Mae,
}

impl Objective {
    pub const ALL: [Objective; 4] = [Objective::Fm, Objective::Ddim, Objective::DdimFft, Objective::Mae];

    pub fn as_str(self) -> &'static str {
        match self {
            Objective::Fm => "fm",
            Objective::Ddim => "ddim",
            Objective::DdimFft => "ddim_fft",
            Objective::Mae => "mae",
        }
    }

    pub fn parse(s: &str) -> Result<Self> {
        Objective::ALL
            .into_iter()
            .find(|o| o.as_str() == s)
            .ok_or_else(|| Error::InvalidParam(format!("unknown objective {s:?}")))
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainConfig {
    pub epochs: usize,
    pub batch: usize,
    pub lr: f64,
    pub seed: u64,
    /// Diffusion schedule length for the noise objectives.
    pub t_steps: usize,
    /// Fixed (time, noise) draws held per sample across all epochs.
    pub draws_per_sample: usize,
    pub loss_norm: LossNorm,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            epochs: 3,
            batch: 8,
            lr: 1e-3,
            seed: 0,
            t_steps: 1000,
            draws_per_sample: 1,
            loss_norm: LossNorm::L1,
        }
    }
}

impl TrainConfig {
    fn validate(&self) -> Result<()> {
        if self.batch == 0 {
            return Err(Error::InvalidParam("batch size must be positive".into()));
        }
        if self.draws_per_sample == 0 {
            return Err(Error::InvalidParam("need at least one draw per sample".into()));
        }
        if self.t_steps == 0 {
            return Err(Error::InvalidParam("schedule needs at least one step".into()));
        }
        if !(self.lr.is_finite() && self.lr >= 0.0) {
            return Err(Error::InvalidParam(format!("learning rate {} invalid", self.lr)));
        }
        Ok(())
    }
}

/// One training item: a sample plus its frozen stochastic draws.
struct Item {
    sample: usize,
    /// Interpolation time s for the velocity objective, or the fraction t/T.
    time: f64,
    /// Discrete step for the noise objectives.
    t_step: usize,
    eps: Image,
}

const SALT_DRAWS: u64 = 101;
const SALT_SHUFFLE: u64 = 102;
const SALT_INIT: u64 = 103;

fn make_items(
    dataset: &[SampleRecord],
    objective: Objective,
    config: &TrainConfig,
) -> Vec<Item> {
    let mut items = Vec::with_capacity(dataset.len() * config.draws_per_sample);
    for (i, record) in dataset.iter().enumerate() {
        let (h, w) = (record.ground_truth.height(), record.ground_truth.width());
        for j in 0..config.draws_per_sample {
            let idx = (i * config.draws_per_sample + j) as u64;
            let mut rng = ChaCha8Rng::seed_from_u64(child_seed(config.seed, SALT_DRAWS, idx));
            let eps_data: Vec<f64> =
                (0..h * w).map(|_| StandardNormal.sample(&mut rng)).collect();
            let eps = Image::from_parts(h, w, eps_data, NormState::Raw);
            let (time, t_step) = match objective {
                Objective::Fm => (rng.random::<f64>(), 0),
                Objective::Ddim | Objective::DdimFft => {
                    let t = rng.random_range(1..=config.t_steps);
                    (t as f64 / config.t_steps as f64, t)
                }
                Objective::Mae => (0.0, 0),
            };
            items.push(Item { sample: i, time, t_step, eps });
        }
    }
    items
}

fn residual_grad(target: &Image, pred: &Image, norm: LossNorm) -> Vec<f64> {
    let n = target.pixels().len() as f64;
    target
        .pixels()
        .iter()
        .zip(pred.pixels())
        .map(|(&t, &p)| match norm {
            LossNorm::L1 => {
                if p > t {
                    1.0 / n
                } else if p < t {
                    -1.0 / n
                } else {
                    0.0
                }
            }
            LossNorm::L2 => 2.0 * (p - t) / n,
        })
        .collect()
}

/// Gradient of ¼·(mean magnitude gap + mean wrapped phase gap) between the
/// spectra of `x0` and `x0_hat`, with respect to the pixels of `x0_hat`.
fn spectral_grad(x0: &Image, x0_hat: &Image) -> Vec<f64> {
    let (h, w) = (x0.height(), x0.width());
    let n = (h * w) as f64;
    let spec0 = fft2(x0.pixels(), h, w);
    let spec = fft2(x0_hat.pixels(), h, w);
    let mut g: Vec<Complex<f64>> = Vec::with_capacity(h * w);
    for (z0, z) in spec0.iter().zip(&spec) {
        let m0 = z0.norm();
        let m = z.norm();
        if m < 1e-300 {
            g.push(Complex::new(0.0, 0.0));
            continue;
        }
        let d_mag = 0.25 / n * (m - m0).signum();
        let d_phase = 0.25 / n * wrap_phase(z.arg() - z0.arg()).signum();
        // d|z|/dz spreads along z/|z|; dArg(z)/dz along i·z/|z|².
        let grad_bin = Complex::new(d_mag, 0.0) * (z / m)
            + Complex::new(d_phase, 0.0) * Complex::new(0.0, 1.0) * z / (m * m);
        g.push(grad_bin);
    }
    ifft2_unnorm(&g, h, w).into_iter().map(|c| c.re).collect()
}

struct Adam {
    m: Vec<f64>,
    v: Vec<f64>,
    step: u64,
}

impl Adam {
    const BETA1: f64 = 0.9;
    const BETA2: f64 = 0.999;
    const EPS: f64 = 1e-8;

    fn new(n: usize) -> Adam {
        Adam { m: vec![0.0; n], v: vec![0.0; n], step: 0 }
    }

    fn update(&mut self, params: &mut [f64], grads: &[f64], lr: f64) {
        self.step += 1;
        let bc1 = 1.0 - Self::BETA1.powi(self.step as i32);
        let bc2 = 1.0 - Self::BETA2.powi(self.step as i32);
        for ((p, &g), (m, v)) in params
            .iter_mut()
            .zip(grads)
            .zip(self.m.iter_mut().zip(self.v.iter_mut()))
        {
            *m = Self::BETA1 * *m + (1.0 - Self::BETA1) * g;
            *v = Self::BETA2 * *v + (1.0 - Self::BETA2) * g * g;
            let m_hat = *m / bc1;
            let v_hat = *v / bc2;
            *p -= lr * m_hat / (v_hat.sqrt() + Self::EPS);
        }
    }
}

/// Loss and parameter gradient of one item under the current weights.
fn eval_item(
    model: &TinyDenoiser,
    record: &SampleRecord,
    item: &Item,
    objective: Objective,
    sched: Option<&NoiseSchedule>,
    norm: LossNorm,
) -> Result<(f64, Vec<f64>)> {
    let gt = &record.ground_truth;
    let cond = &record.degraded;
    let (h, w) = (gt.height(), gt.width());
    match objective {
        Objective::Fm => {
            let x_s = fm_forward(gt, &item.eps, item.time)?;
            let v_target = fm_target_velocity(gt, &item.eps)?;
            let (pred, cache) = model.forward_cached(&x_s, item.time, cond)?;
            let loss = loss_fm(&v_target, &pred, norm)?;
            let grad_out =
                Image::from_parts(h, w, residual_grad(&v_target, &pred, norm), NormState::Raw);
            Ok((loss, model.backward(&cache, &grad_out)))
        }
        Objective::Ddim => {
            let sched = sched.expect("schedule present for noise objectives");
            let x_t = ddim_forward(gt, &item.eps, item.t_step, sched)?;
            let (pred, cache) = model.forward_cached(&x_t, item.time, cond)?;
            let loss = loss_dm(&item.eps, &pred, norm)?;
            let grad_out =
                Image::from_parts(h, w, residual_grad(&item.eps, &pred, norm), NormState::Raw);
            Ok((loss, model.backward(&cache, &grad_out)))
        }
        Objective::DdimFft => {
            let sched = sched.expect("schedule present for noise objectives");
            let x_t = ddim_forward(gt, &item.eps, item.t_step, sched)?;
            let (pred, cache) = model.forward_cached(&x_t, item.time, cond)?;
            let x0_hat = ddim_reconstruct_x0(&x_t, &pred, item.t_step, sched)?;
            let loss = loss_fft_dm(gt, &x0_hat, &item.eps, &pred, norm)?;
            // Chain rule through x̂0 = (x_t − √(1−ᾱ)·ε̂)/√ᾱ.
            let scale = -sched.sqrt_one_minus_alpha_bar(item.t_step)
                / sched.sqrt_alpha_bar(item.t_step);
            let fft_g = spectral_grad(gt, &x0_hat);
            let dm_g = residual_grad(&item.eps, &pred, norm);
            let data = dm_g
                .iter()
                .zip(&fft_g)
                .map(|(&d, &f)| 0.5 * d + scale * f)
                .collect();
            let grad_out = Image::from_parts(h, w, data, NormState::Raw);
            Ok((loss, model.backward(&cache, &grad_out)))
        }
        Objective::Mae => {
            let zeros = Image::zeros(h, w);
            let (pred, cache) = model.forward_cached(&zeros, item.time, cond)?;
            let loss = loss_mae(gt, &pred)?;
            let grad_out =
                Image::from_parts(h, w, residual_grad(gt, &pred, LossNorm::L1), NormState::Raw);
            Ok((loss, model.backward(&cache, &grad_out)))
        }
    }
}

/// Train the reference denoiser. Returns the trained model and the per-epoch
/// mean training loss.
///
/// Stochastic draws are frozen per sample index before the first epoch, so a
/// zero learning rate yields a perfectly flat loss curve and equal seeds give
/// bit-identical runs.
pub fn train_toy(
    dataset: &[SampleRecord],
    objective: Objective,
    config: &TrainConfig,
) -> Result<(TinyDenoiser, Vec<f64>)> {
    config.validate()?;
    if dataset.is_empty() {
        return Err(Error::InvalidParam("training dataset is empty".into()));
    }
    let sched = match objective {
        Objective::Ddim | Objective::DdimFft => Some(cosine_schedule(config.t_steps)?),
        _ => None,
    };
    let items = make_items(dataset, objective, config);
    let mut model = TinyDenoiser::new(child_seed(config.seed, SALT_INIT, 0));
    let mut adam = Adam::new(model.param_count());
    let mut curve = Vec::with_capacity(config.epochs);

    let mut order: Vec<usize> = (0..items.len()).collect();
    for epoch in 0..config.epochs {
        let mut rng =
            ChaCha8Rng::seed_from_u64(child_seed(config.seed, SALT_SHUFFLE, epoch as u64));
        order.shuffle(&mut rng);
        // Per-item losses keyed by item index so the epoch mean does not
        // depend on the visit order.
        let mut losses = vec![0.0; items.len()];
        for batch in order.chunks(config.batch) {
            let mut grad_sum = vec![0.0; model.param_count()];
            for &idx in batch {
                let item = &items[idx];
                let (loss, grads) =
                    eval_item(&model, &dataset[item.sample], item, objective, sched.as_ref(), config.loss_norm)?;
                losses[idx] = loss;
                for (s, g) in grad_sum.iter_mut().zip(&grads) {
                    *s += g;
                }
            }
            let scale = 1.0 / batch.len() as f64;
            for g in &mut grad_sum {
                *g *= scale;
            }
            adam.update(model.params_mut(), &grad_sum, config.lr);
        }
        curve.push(losses.iter().sum::<f64>() / losses.len() as f64);
    }
    Ok((model, curve))
}
