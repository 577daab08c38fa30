//! Core library for `stmforge`: physics-informed synthetic degradation of
//! scanning tunneling microscopy (STM) images, diffusion/flow-matching
//! restoration over a pluggable denoiser, overlapping-patch reconstruction
//! and distribution-level evaluation metrics.
//!
//! Layout:
//! - [`image`]: grid container plus the raster primitives everything else uses
//! - [`fft`]: 2-D spectra (magnitude/phase)
//! - [`lattice`]: synthetic surface generator for tests and desk-scale runs
//! - [`tipphysics`]: tunneling double-tip model and its sigmoid parameter map
//! - [`degrade`]: the artefact pipeline, traces and dataset generation
//! - [`genmodel`]: noise schedules, DDIM/flow-matching samplers, losses and a
//!   small trainable convolutional denoiser
//! - [`metrics`]: PSNR/SSIM and kernel two-sample scores (KID/CMMD)
//! - [`patchwork`]: windowed patch stitching for large-image restoration
//! - [`io`]: binary file formats (images, sample pairs, embeddings, weights)
//! - [`bench`]: sampler timing helpers

pub mod bench;
pub mod degrade;
pub mod error;
pub mod fft;
pub mod genmodel;
pub mod image;
pub mod io;
pub mod lattice;
pub mod metrics;
pub mod patchwork;
pub mod tipphysics;

pub use error::{Error, Result};
pub use image::{Image, Kernel, NormState};
