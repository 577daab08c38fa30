//! Diffusion (DDIM) and flow-matching processes over a pluggable conditioned
//! denoiser, their training losses, and a small reference network with a toy
//! training loop.

pub mod denoiser;
pub mod diffusion;
pub mod flow;
pub mod losses;
pub mod schedule;
pub mod train;

pub use denoiser::{Denoiser, TinyDenoiser};
pub use diffusion::{
    ddim_forward, ddim_reconstruct_x0, ddim_reverse_step, ddim_sample, ddim_timesteps,
};
pub use flow::{fm_forward, fm_sample_rk2, fm_target_velocity};
pub use losses::{loss_dm, loss_fft_dm, loss_fm, loss_mae, LossNorm};
pub use schedule::{cosine_schedule, NoiseSchedule};
pub use train::{train_toy, Objective, TrainConfig};
