//! Reference-based scores (PSNR, SSIM) and distribution distances (MMD²,
//! KID, CMMD) over pluggable image embeddings.

pub mod embed;
pub mod mmd;
pub mod reference;
pub mod report;

pub use embed::{embed_set, BuiltinEmbedder, EmbeddingProvider, EmbeddingSet};
pub use mmd::{
    cmmd, kid, kid_blocked, mmd2, Estimator, GaussianKernel, LinearKernel, MmdKernel,
    PolyCubicKernel, DEFAULT_CMMD_SIGMA,
};
pub use reference::{psnr, psnr_with_max, ssim, SsimMode};
pub use report::{evaluate_pairs, EvalReport, PairScore};
