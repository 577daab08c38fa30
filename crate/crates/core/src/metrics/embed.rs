//! Embedding sets for distribution metrics, plus a self-contained embedder
//! so the metrics work without any external model weights.

use std::path::Path;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::error::{Error, Result};
use crate::image::Image;
use crate::io;
use crate::metrics::reference::unit_view;

/// A stack of n feature vectors of equal dimension, stored row-major.
#[derive(Clone, Debug)]
pub struct EmbeddingSet {
    provider_id: String,
    d: usize,
    vectors: Vec<f64>,
}

impl EmbeddingSet {
    pub fn new(provider_id: impl Into<String>, d: usize, vectors: Vec<f64>) -> Result<Self> {
        if d == 0 {
            return Err(Error::InvalidParam("embedding dimension must be positive".into()));
        }
        if vectors.len() % d != 0 {
            return Err(Error::Shape(format!(
                "{} values do not tile into rows of {d}",
                vectors.len()
            )));
        }
        if !vectors.iter().all(|v| v.is_finite()) {
            return Err(Error::InvalidParam("embeddings must be finite".into()));
        }
        Ok(Self { provider_id: provider_id.into(), d, vectors })
    }

    pub fn n(&self) -> usize {
        self.vectors.len() / self.d
    }

    pub fn dim(&self) -> usize {
        self.d
    }

    pub fn provider_id(&self) -> &str {
        &self.provider_id
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.vectors[i * self.d..(i + 1) * self.d]
    }

    /// Copy of `len` consecutive rows starting at `start`.
    pub fn slice(&self, start: usize, len: usize) -> Result<Self> {
        if start + len > self.n() {
            return Err(Error::Shape(format!(
                "rows {start}..{} out of bounds for {} rows",
                start + len,
                self.n()
            )));
        }
        Ok(Self {
            provider_id: self.provider_id.clone(),
            d: self.d,
            vectors: self.vectors[start * self.d..(start + len) * self.d].to_vec(),
        })
    }

    /// Writes the vectors as an STME file (binary32 payload).
    pub fn save(&self, path: &Path) -> Result<()> {
        io::write_stme(path, self.n(), self.d, &self.vectors)
    }

    /// Reads an STME file; the provider id records the file name since the
    /// format does not store one.
    pub fn load(path: &Path) -> Result<Self> {
        let (_, d, rows) = io::read_stme(path)?;
        let label = path
            .file_name()
            .map(|s| s.to_string_lossy().into_owned())
            .unwrap_or_else(|| path.display().to_string());
        Self::new(format!("file:{label}"), d, rows)
    }
}

pub trait EmbeddingProvider {
    /// Stable identifier stored alongside the embeddings.
    fn id(&self) -> &str;
    fn dim(&self) -> usize;
    fn embed(&self, img: &Image) -> Result<Vec<f64>>;
}

/// Embeds every image with `provider`, preserving order.
pub fn embed_set<P: EmbeddingProvider + ?Sized>(
    provider: &P,
    images: &[Image],
) -> Result<EmbeddingSet> {
    let mut vectors = Vec::with_capacity(images.len() * provider.dim());
    for img in images {
        let v = provider.embed(img)?;
        if v.len() != provider.dim() {
            return Err(Error::Shape(format!(
                "provider {} returned {} features, expected {}",
                provider.id(),
                v.len(),
                provider.dim()
            )));
        }
        vectors.extend(v);
    }
    EmbeddingSet::new(provider.id(), provider.dim(), vectors)
}

/// Seed for the builtin projection matrix. Fixed so every process produces
/// the same embedder; change it and all stored builtin embeddings go stale.
const PROJECTION_SEED: u64 = 0x53_54_4d_45;

pub const BUILTIN_DIM: usize = 64;
const POOL: usize = 8;

/// Mean-pools an image onto an 8×8 grid, then applies a fixed Gaussian
/// random projection to 64 features. Works on the unit-range view of the
/// image, so both unit- and symmetric-normalized inputs embed consistently.
///
/// This is test plumbing, not a perceptual feature extractor: scores from it
/// are only comparable to other scores from it.
pub struct BuiltinEmbedder {
    // Row-major BUILTIN_DIM × POOL² projection, entries N(0,1)/√BUILTIN_DIM.
    projection: Vec<f64>,
}

impl BuiltinEmbedder {
    pub fn new() -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(PROJECTION_SEED);
        let scale = 1.0 / (BUILTIN_DIM as f64).sqrt();
        let projection = (0..BUILTIN_DIM * POOL * POOL)
            .map(|_| {
                let z: f64 = StandardNormal.sample(&mut rng);
                z * scale
            })
            .collect();
        Self { projection }
    }
}

impl Default for BuiltinEmbedder {
    fn default() -> Self {
        Self::new()
    }
}

/// Means over an 8×8 grid of cells with floor bucket boundaries, so cell
/// (i, j) covers rows ⌊ih/8⌋..⌊(i+1)h/8⌋ and likewise for columns.
pub(crate) fn mean_pool8(values: &[f64], h: usize, w: usize) -> Result<Vec<f64>> {
    if h < POOL || w < POOL {
        return Err(Error::Shape(format!(
            "{h}x{w} image too small to pool onto {POOL}x{POOL}"
        )));
    }
    let mut out = Vec::with_capacity(POOL * POOL);
    for bi in 0..POOL {
        let r0 = bi * h / POOL;
        let r1 = (bi + 1) * h / POOL;
        for bj in 0..POOL {
            let c0 = bj * w / POOL;
            let c1 = (bj + 1) * w / POOL;
            let mut sum = 0.0;
            for r in r0..r1 {
                for c in c0..c1 {
                    sum += values[r * w + c];
                }
            }
            out.push(sum / ((r1 - r0) * (c1 - c0)) as f64);
        }
    }
    Ok(out)
}

impl EmbeddingProvider for BuiltinEmbedder {
    fn id(&self) -> &str {
        "builtin-pool8-rp64"
    }

    fn dim(&self) -> usize {
        BUILTIN_DIM
    }

    fn embed(&self, img: &Image) -> Result<Vec<f64>> {
        let unit = unit_view(img)?;
        let pooled = mean_pool8(&unit, img.height(), img.width())?;
        let mut out = Vec::with_capacity(BUILTIN_DIM);
        for k in 0..BUILTIN_DIM {
            let row = &self.projection[k * POOL * POOL..(k + 1) * POOL * POOL];
            out.push(row.iter().zip(&pooled).map(|(&p, &v)| p * v).sum());
        }
        Ok(out)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::image::NormState;
    use crate::lattice::{synth_lattice, LatticeOrientation};

    #[test]
    fn set_validation() {
        assert!(EmbeddingSet::new("p", 0, vec![]).is_err());
        assert!(EmbeddingSet::new("p", 3, vec![1.0, 2.0]).is_err());
        assert!(EmbeddingSet::new("p", 2, vec![1.0, f64::NAN]).is_err());
        let s = EmbeddingSet::new("p", 2, vec![1.0, 2.0, 3.0, 4.0]).unwrap();
        assert_eq!(s.n(), 2);
        assert_eq!(s.dim(), 2);
        assert_eq!(s.row(1), &[3.0, 4.0]);
        assert_eq!(s.provider_id(), "p");
    }

    #[test]
    fn slice_bounds() {
        let s = EmbeddingSet::new("p", 1, vec![0.0, 1.0, 2.0, 3.0]).unwrap();
        let mid = s.slice(1, 2).unwrap();
        assert_eq!(mid.n(), 2);
        assert_eq!(mid.row(0), &[1.0]);
        assert_eq!(mid.row(1), &[2.0]);
        assert!(s.slice(3, 2).is_err());
    }

    #[test]
    fn pooling_means_blocks_with_floor_boundaries() {
        // 16×16: every cell is an exact 2×2 block.
        let img = Image::from_fn(16, 16, NormState::Unit, |r, c| ((r * 16 + c) % 7) as f64 / 7.0)
            .unwrap();
        let pooled = mean_pool8(img.pixels(), 16, 16).unwrap();
        for bi in 0..8 {
            for bj in 0..8 {
                let mut sum = 0.0;
                for r in 2 * bi..2 * bi + 2 {
                    for c in 2 * bj..2 * bj + 2 {
                        sum += img.get(r, c);
                    }
                }
                assert!((pooled[bi * 8 + bj] - sum / 4.0).abs() < 1e-12);
            }
        }

        // 9×9: first seven buckets are single rows/cols, the last spans two.
        let img = Image::from_fn(9, 9, NormState::Unit, |r, c| ((r * 9 + c) % 11) as f64 / 11.0)
            .unwrap();
        let pooled = mean_pool8(img.pixels(), 9, 9).unwrap();
        let bounds = |i: usize| (i * 9 / 8, (i + 1) * 9 / 8);
        assert_eq!(bounds(7), (7, 9));
        for bi in 0..8 {
            for bj in 0..8 {
                let (r0, r1) = bounds(bi);
                let (c0, c1) = bounds(bj);
                let mut sum = 0.0;
                for r in r0..r1 {
                    for c in c0..c1 {
                        sum += img.get(r, c);
                    }
                }
                let mean = sum / ((r1 - r0) * (c1 - c0)) as f64;
                assert!((pooled[bi * 8 + bj] - mean).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn builtin_embedder_is_deterministic_and_linear_in_pooled_values() {
        let embedder = BuiltinEmbedder::new();
        assert_eq!(embedder.dim(), BUILTIN_DIM);
        let img = synth_lattice(16, 16, 5.0, LatticeOrientation::Diagonal, 0.0, 3).unwrap();
        let a = embedder.embed(&img).unwrap();
        let b = BuiltinEmbedder::new().embed(&img).unwrap();
        assert_eq!(a, b);

        // Pool and projection are linear, so constant images embed
        // proportionally to their value.
        let flat = |v: f64| Image::from_fn(8, 8, NormState::Unit, |_, _| v).unwrap();
        let e1 = embedder.embed(&flat(0.2)).unwrap();
        let e2 = embedder.embed(&flat(0.8)).unwrap();
        for (u, v) in e1.iter().zip(&e2) {
            assert!((u * 4.0 - v).abs() < 1e-12, "{u} {v}");
        }
    }

    #[test]
    fn builtin_embedder_maps_symmetric_onto_unit_scale() {
        let embedder = BuiltinEmbedder::new();
        // Full-range unit image, so the symmetric remap is exactly 2v − 1.
        let lat = synth_lattice(12, 12, 4.0, LatticeOrientation::Horizontal, 0.0, 4).unwrap();
        let unit = crate::image::normalize_unit(&lat).unwrap();
        let sym = crate::image::normalize_sym(&unit).unwrap();
        let a = embedder.embed(&unit).unwrap();
        let b = embedder.embed(&sym).unwrap();
        for (u, v) in a.iter().zip(&b) {
            assert!((u - v).abs() < 1e-9);
        }
    }

    #[test]
    fn builtin_embedder_rejects_tiny_and_raw_images() {
        let embedder = BuiltinEmbedder::new();
        let tiny = Image::from_fn(4, 12, NormState::Unit, |_, _| 0.5).unwrap();
        assert!(embedder.embed(&tiny).is_err());
        let raw = Image::zeros(16, 16);
        assert!(embedder.embed(&raw).is_err());
    }

    #[test]
    fn embed_set_preserves_order_and_ids() {
        let embedder = BuiltinEmbedder::new();
        let images: Vec<Image> = (0..3)
            .map(|i| synth_lattice(16, 16, 4.5, LatticeOrientation::Vertical, 0.0, i).unwrap())
            .collect();
        let set = embed_set(&embedder, &images).unwrap();
        assert_eq!(set.n(), 3);
        assert_eq!(set.dim(), BUILTIN_DIM);
        assert_eq!(set.provider_id(), "builtin-pool8-rp64");
        assert_eq!(set.row(2), embedder.embed(&images[2]).unwrap().as_slice());
        let empty = embed_set(&embedder, &[]).unwrap();
        assert_eq!(empty.n(), 0);
    }

    #[test]
    fn stme_round_trip_quantizes_to_binary32() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("vectors.stme");
        let raw = vec![0.123456789_f64, -1.5, 2.25, 1.0 / 3.0, 0.0, 9.75];
        let set = EmbeddingSet::new("p", 3, raw.clone()).unwrap();
        set.save(&path).unwrap();
        let back = EmbeddingSet::load(&path).unwrap();
        assert_eq!(back.n(), 2);
        assert_eq!(back.dim(), 3);
        assert!(back.provider_id().starts_with("file:"));
        for (i, &v) in raw.iter().enumerate() {
            assert_eq!(back.row(i / 3)[i % 3], v as f32 as f64);
        }
    }
}
