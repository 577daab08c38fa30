//! Grid container and raster primitives.
//!
//! Pixels are `f64`, row-major. Every operation that looks outside the image
//! uses edge replication, and every operation is deterministic: no global
//! state, no hidden RNG.

use crate::error::{Error, Result};

/// Which affine normalization the pixel values currently satisfy.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum NormState {
    /// No range guarantee.
    Raw,
    /// Values lie in `[0, 1]`.
    Unit,
    /// Values lie in `[-1, 1]`.
    Symmetric,
}

impl NormState {
    pub fn to_code(self) -> u8 {
        match self {
            NormState::Raw => 0,
            NormState::Unit => 1,
            NormState::Symmetric => 2,
        }
    }

    pub fn from_code(code: u8) -> Result<Self> {
        match code {
            0 => Ok(NormState::Raw),
            1 => Ok(NormState::Unit),
            2 => Ok(NormState::Symmetric),
            other => Err(Error::Format(format!("unknown norm state code {other}"))),
        }
    }
}

/// A single-channel image. Height and width are non-zero and all values are
/// finite; both are checked on construction.
#[derive(Clone, Debug, PartialEq)]
pub struct Image {
    height: usize,
    width: usize,
    norm: NormState,
    data: Vec<f64>,
}

// Slack for range checks: filtering a unit image can land a hair outside
// [0, 1] purely from rounding.
const RANGE_EPS: f64 = 1e-9;

impl Image {
    pub fn new(height: usize, width: usize, data: Vec<f64>, norm: NormState) -> Result<Self> {
        if height == 0 || width == 0 {
            return Err(Error::Shape(format!("empty image {height}x{width}")));
        }
        if data.len() != height * width {
            return Err(Error::Shape(format!(
                "buffer length {} does not match {height}x{width}",
                data.len()
            )));
        }
        if let Some(v) = data.iter().find(|v| !v.is_finite()) {
            return Err(Error::NonFinite(format!("pixel value {v}")));
        }
        let (lo, hi) = match norm {
            NormState::Raw => (f64::NEG_INFINITY, f64::INFINITY),
            NormState::Unit => (0.0, 1.0),
            NormState::Symmetric => (-1.0, 1.0),
        };
        if data.iter().any(|&v| v < lo - RANGE_EPS || v > hi + RANGE_EPS) {
            return Err(Error::InvalidParam(format!(
                "pixel outside declared {norm:?} range"
            )));
        }
        Ok(Image { height, width, norm, data })
    }

    /// Internal constructor for values produced by already-validated ops.
    pub(crate) fn from_parts(height: usize, width: usize, data: Vec<f64>, norm: NormState) -> Self {
        debug_assert_eq!(data.len(), height * width);
        Image { height, width, norm, data }
    }

    pub fn zeros(height: usize, width: usize) -> Self {
        Image::from_parts(height, width, vec![0.0; height * width], NormState::Raw)
    }

    pub fn from_fn<F: FnMut(usize, usize) -> f64>(
        height: usize,
        width: usize,
        norm: NormState,
        mut f: F,
    ) -> Result<Self> {
        let mut data = Vec::with_capacity(height * width);
        for r in 0..height {
            for c in 0..width {
                data.push(f(r, c));
            }
        }
        Image::new(height, width, data, norm)
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn norm_state(&self) -> NormState {
        self.norm
    }

    pub fn pixels(&self) -> &[f64] {
        &self.data
    }

    pub(crate) fn pixels_mut(&mut self) -> &mut [f64] {
        &mut self.data
    }

    #[inline]
    pub fn get(&self, row: usize, col: usize) -> f64 {
        self.data[row * self.width + col]
    }

    /// Pixel at (row, col) with indices clamped to the image, i.e. edge
    /// replication for out-of-range coordinates.
    #[inline]
    pub fn get_clamped(&self, row: i64, col: i64) -> f64 {
        let r = row.clamp(0, self.height as i64 - 1) as usize;
        let c = col.clamp(0, self.width as i64 - 1) as usize;
        self.data[r * self.width + c]
    }

    pub fn min_max(&self) -> (f64, f64) {
        let mut lo = f64::INFINITY;
        let mut hi = f64::NEG_INFINITY;
        for &v in &self.data {
            if v < lo {
                lo = v;
            }
            if v > hi {
                hi = v;
            }
        }
        (lo, hi)
    }

    pub fn mean(&self) -> f64 {
        self.data.iter().sum::<f64>() / self.data.len() as f64
    }
}

/// Affine map onto `[0, 1]` hitting both endpoints exactly.
pub fn normalize_unit(img: &Image) -> Result<Image> {
    let (lo, hi) = img.min_max();
    if hi <= lo {
        return Err(Error::DegenerateRange);
    }
    let scale = hi - lo;
    let data = img.data.iter().map(|&v| (v - lo) / scale).collect();
    Ok(Image::from_parts(img.height, img.width, data, NormState::Unit))
}

/// Affine map onto `[-1, 1]` hitting both endpoints exactly.
pub fn normalize_sym(img: &Image) -> Result<Image> {
    let (lo, hi) = img.min_max();
    if hi <= lo {
        return Err(Error::DegenerateRange);
    }
    let scale = hi - lo;
    let data = img
        .data
        .iter()
        .map(|&v| 2.0 * ((v - lo) / scale) - 1.0)
        .collect();
    Ok(Image::from_parts(img.height, img.width, data, NormState::Symmetric))
}

/// Rotate by `turns` quarter turns counter-clockwise (Cartesian orientation,
/// y up). One turn maps input pixel `(r, c)` of an HxW image to output pixel
/// `(c, H-1-r)` of the WxH result.
pub fn rotate_quarter(img: &Image, turns: u8) -> Image {
    let (h, w) = (img.height, img.width);
    match turns % 4 {
        0 => img.clone(),
        1 => {
            let mut data = vec![0.0; w * h];
            for r in 0..w {
                for c in 0..h {
                    data[r * h + c] = img.get(h - 1 - c, r);
                }
            }
            Image::from_parts(w, h, data, img.norm)
        }
        2 => {
            let mut data = vec![0.0; h * w];
            for r in 0..h {
                for c in 0..w {
                    data[r * w + c] = img.get(h - 1 - r, w - 1 - c);
                }
            }
            Image::from_parts(h, w, data, img.norm)
        }
        _ => {
            let mut data = vec![0.0; w * h];
            for r in 0..w {
                for c in 0..h {
                    data[r * h + c] = img.get(c, w - 1 - r);
                }
            }
            Image::from_parts(w, h, data, img.norm)
        }
    }
}

pub fn crop(img: &Image, top: usize, left: usize, height: usize, width: usize) -> Result<Image> {
    if height == 0 || width == 0 {
        return Err(Error::Shape("empty crop".into()));
    }
    if top + height > img.height || left + width > img.width {
        return Err(Error::Shape(format!(
            "crop {top},{left} {height}x{width} exceeds {}x{}",
            img.height, img.width
        )));
    }
    let mut data = Vec::with_capacity(height * width);
    for r in 0..height {
        let start = (top + r) * img.width + left;
        data.extend_from_slice(&img.data[start..start + width]);
    }
    Ok(Image::from_parts(height, width, data, img.norm))
}

/// 1-D Gaussian taps for `sigma`, radius `ceil(3 sigma)`, normalized to sum 1.
pub fn gaussian_taps(sigma: f64) -> Result<Vec<f64>> {
    if !(sigma > 0.0) || !sigma.is_finite() {
        return Err(Error::InvalidParam(format!("sigma must be positive, got {sigma}")));
    }
    let radius = (3.0 * sigma).ceil() as i64;
    let mut taps = Vec::with_capacity((2 * radius + 1) as usize);
    for k in -radius..=radius {
        taps.push((-((k * k) as f64) / (2.0 * sigma * sigma)).exp());
    }
    let sum: f64 = taps.iter().sum();
    for t in &mut taps {
        *t /= sum;
    }
    Ok(taps)
}

/// Separable Gaussian blur with edge replication. Values stay inside the
/// input's value hull, so the normalization state is preserved.
pub fn gaussian_blur(img: &Image, sigma: f64) -> Result<Image> {
    let taps = gaussian_taps(sigma)?;
    let radius = (taps.len() / 2) as i64;
    let (h, w) = (img.height, img.width);

    // Horizontal pass.
    let mut tmp = vec![0.0; h * w];
    for r in 0..h {
        let row = &img.data[r * w..(r + 1) * w];
        for c in 0..w {
            let mut acc = 0.0;
            for (k, &t) in taps.iter().enumerate() {
                let cc = (c as i64 + k as i64 - radius).clamp(0, w as i64 - 1) as usize;
                acc += t * row[cc];
            }
            tmp[r * w + c] = acc;
        }
    }
    // Vertical pass.
    let mut out = vec![0.0; h * w];
    for r in 0..h {
        for c in 0..w {
            let mut acc = 0.0;
            for (k, &t) in taps.iter().enumerate() {
                let rr = (r as i64 + k as i64 - radius).clamp(0, h as i64 - 1) as usize;
                acc += t * tmp[rr * w + c];
            }
            out[r * w + c] = acc;
        }
    }
    Ok(Image::from_parts(h, w, out, img.norm))
}

/// k x k median with edge replication. `k` must be odd.
pub fn median_filter(img: &Image, k: usize) -> Result<Image> {
    if k == 0 || k % 2 == 0 {
        return Err(Error::InvalidParam(format!("median window must be odd, got {k}")));
    }
    let (h, w) = (img.height, img.width);
    let half = (k / 2) as i64;
    let mut out = vec![0.0; h * w];
    let mut window = vec![0.0; k * k];
    for r in 0..h {
        for c in 0..w {
            let mut n = 0;
            for dr in -half..=half {
                for dc in -half..=half {
                    window[n] = img.get_clamped(r as i64 + dr, c as i64 + dc);
                    n += 1;
                }
            }
            let mid = n / 2;
            window[..n].select_nth_unstable_by(mid, |a, b| a.total_cmp(b));
            out[r * w + c] = window[mid];
        }
    }
    Ok(Image::from_parts(h, w, out, img.norm))
}

/// A dense filter kernel with an explicit anchor (row, col).
#[derive(Clone, Debug, PartialEq)]
pub struct Kernel {
    size: usize,
    anchor: (usize, usize),
    weights: Vec<f64>,
}

impl Kernel {
    pub fn new(size: usize, weights: Vec<f64>, anchor: (usize, usize)) -> Result<Self> {
        if size == 0 {
            return Err(Error::Shape("kernel size must be positive".into()));
        }
        if weights.len() != size * size {
            return Err(Error::Shape(format!(
                "kernel buffer {} does not match {size}x{size}",
                weights.len()
            )));
        }
        if anchor.0 >= size || anchor.1 >= size {
            return Err(Error::InvalidParam(format!(
                "anchor {anchor:?} outside {size}x{size} kernel"
            )));
        }
        if weights.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("kernel weight".into()));
        }
        Ok(Kernel { size, anchor, weights })
    }

    /// Centered kernel; for even sizes the anchor is `(size/2 - 1, size/2 - 1)`.
    pub fn centered(size: usize, weights: Vec<f64>) -> Result<Self> {
        let a = if size % 2 == 1 { size / 2 } else { size / 2 - 1 };
        Kernel::new(size, weights, (a, a))
    }

    pub fn identity() -> Self {
        Kernel { size: 1, anchor: (0, 0), weights: vec![1.0] }
    }

    pub fn size(&self) -> usize {
        self.size
    }

    pub fn anchor(&self) -> (usize, usize) {
        self.anchor
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }
}

/// Correlation with edge replication: the anchor tap is aligned with the
/// output pixel and no kernel flip is performed.
pub fn convolve(img: &Image, kernel: &Kernel) -> Image {
    let (h, w) = (img.height, img.width);
    let k = kernel.size;
    let (ar, ac) = (kernel.anchor.0 as i64, kernel.anchor.1 as i64);
    let mut out = vec![0.0; h * w];
    for r in 0..h {
        for c in 0..w {
            let mut acc = 0.0;
            for kr in 0..k {
                for kc in 0..k {
                    let vr = r as i64 + kr as i64 - ar;
                    let vc = c as i64 + kc as i64 - ac;
                    acc += kernel.weights[kr * k + kc] * img.get_clamped(vr, vc);
                }
            }
            out[r * w + c] = acc;
        }
    }
    Image::from_parts(h, w, out, NormState::Raw)
}

/// Translate content by `dx` columns (rightward) and `dy` rows (downward),
/// filling uncovered pixels by edge replication.
pub fn shift(img: &Image, dx: i64, dy: i64) -> Image {
    let (h, w) = (img.height, img.width);
    let mut out = vec![0.0; h * w];
    for r in 0..h {
        for c in 0..w {
            out[r * w + c] = img.get_clamped(r as i64 - dy, c as i64 - dx);
        }
    }
    Image::from_parts(h, w, out, img.norm)
}

/// Shift each row independently by its own horizontal offset.
pub fn shift_rows(img: &Image, offsets: &[i64]) -> Result<Image> {
    if offsets.len() != img.height {
        return Err(Error::Shape(format!(
            "{} row offsets for {} rows",
            offsets.len(),
            img.height
        )));
    }
    let (h, w) = (img.height, img.width);
    let mut out = vec![0.0; h * w];
    for r in 0..h {
        let dx = offsets[r];
        for c in 0..w {
            out[r * w + c] = img.get_clamped(r as i64, c as i64 - dx);
        }
    }
    Ok(Image::from_parts(h, w, out, img.norm))
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ResampleDir {
    /// Keep rows 0, f, 2f, ...; height must divide by the factor.
    Down,
    /// Repeat every row `factor` times.
    UpNearest,
}

/// Vertical-only resampling; the slow scan axis of an STM runs along y.
pub fn resample_y(img: &Image, factor: usize, dir: ResampleDir) -> Result<Image> {
    if factor != 2 && factor != 4 {
        return Err(Error::InvalidParam(format!("resample factor must be 2 or 4, got {factor}")));
    }
    let (h, w) = (img.height, img.width);
    match dir {
        ResampleDir::Down => {
            if h % factor != 0 {
                return Err(Error::Shape(format!("height {h} not divisible by {factor}")));
            }
            let nh = h / factor;
            let mut data = Vec::with_capacity(nh * w);
            for r in 0..nh {
                let start = r * factor * w;
                data.extend_from_slice(&img.data[start..start + w]);
            }
            Ok(Image::from_parts(nh, w, data, img.norm))
        }
        ResampleDir::UpNearest => {
            let nh = h * factor;
            let mut data = Vec::with_capacity(nh * w);
            for r in 0..h {
                let row = &img.data[r * w..(r + 1) * w];
                for _ in 0..factor {
                    data.extend_from_slice(row);
                }
            }
            Ok(Image::from_parts(nh, w, data, img.norm))
        }
    }
}
