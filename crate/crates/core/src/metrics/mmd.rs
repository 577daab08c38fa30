//! Squared maximum mean discrepancy with pluggable kernels, and the two
//! derived scores used for distribution evaluation.

use crate::error::{Error, Result};
use crate::metrics::embed::EmbeddingSet;

pub trait MmdKernel {
    fn eval(&self, x: &[f64], y: &[f64]) -> f64;
}

/// Plain dot product, mostly useful for algebraic sanity checks.
#[derive(Clone, Copy, Debug)]
pub struct LinearKernel;

impl MmdKernel for LinearKernel {
    fn eval(&self, x: &[f64], y: &[f64]) -> f64 {
        x.iter().zip(y).map(|(&a, &b)| a * b).sum()
    }
}

/// Cubic polynomial kernel ((1/d)·xᵀy + 1)³ over d-dimensional features.
#[derive(Clone, Copy, Debug)]
pub struct PolyCubicKernel {
    pub d: usize,
}

impl MmdKernel for PolyCubicKernel {
    fn eval(&self, x: &[f64], y: &[f64]) -> f64 {
        let dot: f64 = x.iter().zip(y).map(|(&a, &b)| a * b).sum();
        (dot / self.d as f64 + 1.0).powi(3)
    }
}

/// Gaussian kernel exp(−‖x − y‖²/σ²).
#[derive(Clone, Copy, Debug)]
pub struct GaussianKernel {
    pub sigma: f64,
}

impl MmdKernel for GaussianKernel {
    fn eval(&self, x: &[f64], y: &[f64]) -> f64 {
        let sq: f64 = x
            .iter()
            .zip(y)
            .map(|(&a, &b)| (a - b) * (a - b))
            .sum();
        (-sq / (self.sigma * self.sigma)).exp()
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Estimator {
    /// V-statistic: all pairs including self pairs. Non-negative for
    /// positive-definite kernels.
    Biased,
    /// U-statistic: self terms exclude the diagonal. Needs two points per
    /// set.
    Unbiased,
}

fn self_term<K: MmdKernel + ?Sized>(set: &EmbeddingSet, kernel: &K, estimator: Estimator) -> f64 {
    let n = set.n();
    let mut sum = 0.0;
    let mut diag = 0.0;
    for i in 0..n {
        for j in 0..n {
            let k = kernel.eval(set.row(i), set.row(j));
            sum += k;
            if i == j {
                diag += k;
            }
        }
    }
    match estimator {
        Estimator::Biased => sum / (n * n) as f64,
        Estimator::Unbiased => (sum - diag) / (n * (n - 1)) as f64,
    }
}

fn cross_term<K: MmdKernel + ?Sized>(x: &EmbeddingSet, y: &EmbeddingSet, kernel: &K) -> f64 {
    let mut sum = 0.0;
    for i in 0..x.n() {
        for j in 0..y.n() {
            sum += kernel.eval(x.row(i), y.row(j));
        }
    }
    sum / (x.n() * y.n()) as f64
}

/// Squared maximum mean discrepancy between two embedding sets.
pub fn mmd2<K: MmdKernel + ?Sized>(
    x: &EmbeddingSet,
    y: &EmbeddingSet,
    kernel: &K,
    estimator: Estimator,
) -> Result<f64> {
    if x.dim() != y.dim() {
        return Err(Error::Shape(format!(
            "embedding dimensions differ: {} vs {}",
            x.dim(),
            y.dim()
        )));
    }
    if x.n() == 0 || y.n() == 0 {
        return Err(Error::InvalidParam("embedding sets must be nonempty".into()));
    }
    if estimator == Estimator::Unbiased && (x.n() < 2 || y.n() < 2) {
        return Err(Error::InvalidParam(
            "unbiased estimator needs at least two points per set".into(),
        ));
    }
    Ok(self_term(x, kernel, estimator) + self_term(y, kernel, estimator)
        - 2.0 * cross_term(x, y, kernel))
}

/// Kernel inception-style distance: MMD² with the cubic polynomial kernel,
/// unbiased over the full sets.
pub fn kid(x: &EmbeddingSet, y: &EmbeddingSet) -> Result<f64> {
    mmd2(x, y, &PolyCubicKernel { d: x.dim() }, Estimator::Unbiased)
}

/// Block-averaged variant: both sets are cut into consecutive blocks of
/// `block` points and the unbiased estimate is averaged over block pairs.
pub fn kid_blocked(x: &EmbeddingSet, y: &EmbeddingSet, block: usize) -> Result<f64> {
    if block < 2 {
        return Err(Error::InvalidParam("block size must be at least 2".into()));
    }
    let nb = (x.n() / block).min(y.n() / block);
    if nb == 0 {
        return Err(Error::InvalidParam(format!(
            "block size {block} exceeds a set of {} and {} points",
            x.n(),
            y.n()
        )));
    }
    let mut total = 0.0;
    for b in 0..nb {
        let xb = x.slice(b * block, block)?;
        let yb = y.slice(b * block, block)?;
        total += kid(&xb, &yb)?;
    }
    Ok(total / nb as f64)
}

pub const DEFAULT_CMMD_SIGMA: f64 = 10.0;

/// Gaussian-kernel MMD² with the biased estimator, so single-point and
/// identical sets behave like the defining expectation expression.
pub fn cmmd(x: &EmbeddingSet, y: &EmbeddingSet, sigma: f64) -> Result<f64> {
    if !(sigma > 0.0) {
        return Err(Error::InvalidParam(format!("bandwidth {sigma} must be positive")));
    }
    mmd2(x, y, &GaussianKernel { sigma }, Estimator::Biased)
}
