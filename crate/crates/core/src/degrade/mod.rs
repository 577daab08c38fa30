//! Tip artefact pipeline.
//!
//! A pristine topograph passes through nine ordered steps: quarter-turn
//! rotation, multi-tip ghosts, scan-line misalignment, random crop, blunt-tip
//! blur, mid-scan tip change, vertical resampling (super-resolution tasks),
//! scan-line noise and final symmetric normalization. Steps two, three, five,
//! six and eight fire stochastically; every draw is captured in a
//! [`DegradationTrace`] so any sample can be replayed bit for bit from its
//! source image.
//!
//! Ground truth is the same source after rotation, crop and normalization
//! only, so a model is always trained against the clean channel.

pub mod dataset;

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::image::{
    convolve, crop, gaussian_blur, median_filter, normalize_sym, normalize_unit, resample_y,
    rotate_quarter, shift, shift_rows, Image, Kernel, NormState, ResampleDir,
};

pub use dataset::{
    child_seed, generate_dataset, generate_targeted_set, load_split, Manifest, ManifestEntry,
    PristineSet, Split, SplitCounts, TargetedKind,
};

/// What the degraded channel is for.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Task {
    Restore,
    Sr2,
    Sr4,
}

impl Task {
    pub fn sr_factor(self) -> Option<usize> {
        match self {
            Task::Restore => None,
            Task::Sr2 => Some(2),
            Task::Sr4 => Some(4),
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Task::Restore => "restore",
            Task::Sr2 => "sr2",
            Task::Sr4 => "sr4",
        }
    }
}

/// Firing probabilities and crop size for the mixed pipeline.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PipelineConfig {
    /// Output sample side length.
    pub crop: usize,
    pub p_multi_tip: f64,
    pub p_misalign: f64,
    pub p_blunt: f64,
    pub p_tip_change: f64,
    pub p_scanline: f64,
    /// Probability that a tip change also jumps the start row.
    pub p_tip_change_offset: f64,
    /// Standard deviation of the per-row misalignment shift, in pixels.
    pub misalign_sigma: f64,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        PipelineConfig {
            crop: 128,
            p_multi_tip: 1.0,
            p_misalign: 0.3,
            p_blunt: 0.6,
            p_tip_change: 0.6,
            p_scanline: 0.6,
            p_tip_change_offset: 0.5,
            misalign_sigma: 0.8,
        }
    }
}

impl PipelineConfig {
    fn validate(&self) -> Result<()> {
        if self.crop == 0 {
            return Err(Error::InvalidParam("crop size must be positive".into()));
        }
        for (name, p) in [
            ("p_multi_tip", self.p_multi_tip),
            ("p_misalign", self.p_misalign),
            ("p_blunt", self.p_blunt),
            ("p_tip_change", self.p_tip_change),
            ("p_scanline", self.p_scanline),
            ("p_tip_change_offset", self.p_tip_change_offset),
        ] {
            if !(0.0..=1.0).contains(&p) {
                return Err(Error::InvalidParam(format!("{name} must lie in [0, 1], got {p}")));
            }
        }
        if !(self.misalign_sigma >= 0.0) {
            return Err(Error::InvalidParam("misalign_sigma must be >= 0".into()));
        }
        Ok(())
    }
}

/// Ghost smoothing kernel attached to one extra tip.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum KernelChoice {
    Gaussian { sigma: f64 },
    Median { k: usize },
    Random { size: usize, weights: Vec<f64> },
}

/// One displaced sigmoid ghost: `amplitude / (1 + exp(c - d * h(x - dx, y - dy)))`
/// passed through the kernel and added to the surface.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TipCopyParams {
    pub amplitude: f64,
    pub c: f64,
    pub d: f64,
    pub dx: i64,
    pub dy: i64,
    pub kernel: KernelChoice,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MultiTipParams {
    pub copies: Vec<TipCopyParams>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MisalignParams {
    /// Horizontal shift per row, one entry per image row.
    pub row_shifts: Vec<i64>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct CropParams {
    pub top: usize,
    pub left: usize,
    pub size: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TipChangeParams {
    /// First row measured by the changed tip.
    pub start_row: usize,
    pub sigma: f64,
    /// Constant height jump added to `start_row`, as a fraction of the unit
    /// range.
    pub offset: Option<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ScanlineKind {
    Constant { offset: f64 },
    LogNormal { mu: f64, sigma: f64, peak: f64 },
    Sinusoid { amplitude: f64, period: f64, phase: f64 },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ScanlineSegment {
    pub row: usize,
    pub start: usize,
    pub len: usize,
    /// +1 or -1, multiplies the perturbation.
    pub sign: f64,
    #[serde(flatten)]
    pub kind: ScanlineKind,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ScanlineParams {
    pub segments: Vec<ScanlineSegment>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum StepId {
    Rotate,
    Multitip,
    Misalign,
    Crop,
    Blunt,
    Tipchange,
    Resample,
    Scanlinenoise,
    Normalize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum StepParams {
    Rotate { turns: u8 },
    MultiTip(MultiTipParams),
    Misalign(MisalignParams),
    Crop(CropParams),
    Blunt { sigma: f64 },
    TipChange(TipChangeParams),
    Resample { factor: usize },
    Scanline(ScanlineParams),
    Normalize,
}

/// One pipeline step as recorded in a trace. Fired steps carry every sampled
/// parameter needed to replay them exactly.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StepRecord {
    pub step: StepId,
    pub fired: bool,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub params: Option<StepParams>,
}

/// Full record of one degraded sample.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DegradationTrace {
    pub seed: u64,
    pub applied: Vec<StepRecord>,
}

impl DegradationTrace {
    pub fn fired(&self, step: StepId) -> bool {
        self.applied.iter().any(|r| r.step == step && r.fired)
    }

    pub fn params(&self, step: StepId) -> Option<&StepParams> {
        self.applied
            .iter()
            .find(|r| r.step == step && r.fired)
            .and_then(|r| r.params.as_ref())
    }
}

/// A generated training/evaluation pair. Both channels are symmetric
/// normalized and share the crop window.
#[derive(Clone, Debug)]
pub struct SampleRecord {
    pub ground_truth: Image,
    pub degraded: Image,
    pub trace: DegradationTrace,
    pub task: Task,
}

// ---------------------------------------------------------------------------
// Parameter sampling
// ---------------------------------------------------------------------------

fn sample_kernel_choice<R: Rng>(rng: &mut R) -> KernelChoice {
    let u: f64 = rng.random();
    if u < 0.3 {
        KernelChoice::Gaussian { sigma: rng.random_range(1.0..3.0) }
    } else if u < 0.7 {
        let mut k: usize = rng.random_range(1..=9);
        if k % 2 == 0 {
            k += 1;
        }
        KernelChoice::Median { k }
    } else {
        let size = if rng.random_bool(0.5) { 5 } else { 6 };
        // Resample until the weight sum is safely away from zero, then
        // normalize to sum one.
        loop {
            let mut weights: Vec<f64> =
                (0..size * size).map(|_| rng.random_range(-0.5..1.0)).collect();
            let sum: f64 = weights.iter().sum();
            if sum.abs() > 0.1 {
                for w in &mut weights {
                    *w /= sum;
                }
                return KernelChoice::Random { size, weights };
            }
        }
    }
}

fn sample_multi_tip<R: Rng>(rng: &mut R) -> MultiTipParams {
    let u: f64 = rng.random();
    let n_tips = if u < 0.5 {
        2
    } else if u < 0.8 {
        3
    } else {
        4
    };
    let copies = (0..n_tips - 1)
        .map(|_| TipCopyParams {
            amplitude: rng.random_range(1.0..2.5),
            c: rng.random_range(5.0..9.0),
            d: rng.random_range(7.0..10.0),
            dx: rng.random_range(1.0..11.0f64).round() as i64,
            dy: rng.random_range(1.0..11.0f64).round() as i64,
            kernel: sample_kernel_choice(rng),
        })
        .collect();
    MultiTipParams { copies }
}

fn sample_misalign<R: Rng>(rng: &mut R, rows: usize, sigma: f64) -> MisalignParams {
    let row_shifts = (0..rows)
        .map(|_| {
            let z: f64 = StandardNormal.sample(rng);
            (z * sigma).round() as i64
        })
        .collect();
    MisalignParams { row_shifts }
}

fn sample_tip_change<R: Rng>(rng: &mut R, rows: usize, p_offset: f64) -> TipChangeParams {
    let start_row = rng.random_range(0..rows);
    let sigma = rng.random_range(0.3..0.6);
    let offset = if rng.random_bool(p_offset) {
        let sign = if rng.random_bool(0.5) { 1.0 } else { -1.0 };
        Some(sign * rng.random_range(0.05..0.4))
    } else {
        None
    };
    TipChangeParams { start_row, sigma, offset }
}

const SCANLINE_MAX_LEN: f64 = 102.0;

fn sample_scanline<R: Rng>(rng: &mut R, rows: usize, cols: usize) -> ScanlineParams {
    let m = rng.random_range(25..=35usize).min(rows);
    let mut picked = rand::seq::index::sample(rng, rows, m).into_vec();
    picked.sort_unstable();
    let segments = picked
        .into_iter()
        .map(|row| {
            let len = (rng.random_range(0.0..SCANLINE_MAX_LEN).floor() as usize).min(cols);
            let start = rng.random_range(0..=cols - len);
            let u: f64 = rng.random();
            let kind = if u < 0.3 {
                ScanlineKind::Constant { offset: rng.random_range(0.0..0.4) }
            } else if u < 0.75 {
                ScanlineKind::LogNormal {
                    mu: rng.random_range(1.0..2.0),
                    sigma: rng.random_range(0.5..1.0),
                    peak: rng.random_range(0.1..0.4),
                }
            } else {
                ScanlineKind::Sinusoid {
                    amplitude: rng.random_range(0.05..0.4),
                    period: rng.random_range(8.0..64.0),
                    phase: rng.random_range(0.0..std::f64::consts::TAU),
                }
            };
            let sign = if rng.random_bool(0.5) { 1.0 } else { -1.0 };
            ScanlineSegment { row, start, len, sign, kind }
        })
        .collect();
    ScanlineParams { segments }
}

/// Which optional steps are allowed to fire.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
enum FiringMode {
    /// Bernoulli draws with the configured probabilities.
    Mixed,
    /// Exactly the named step fires (None: no optional step at all).
    Exactly(Option<StepId>),
}

fn sample_trace_inner(
    height: usize,
    width: usize,
    task: Task,
    config: &PipelineConfig,
    seed: u64,
    mode: FiringMode,
) -> Result<DegradationTrace> {
    config.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut applied = Vec::with_capacity(9);

    let fires = |rng: &mut ChaCha8Rng, step: StepId, p: f64| -> bool {
        match mode {
            FiringMode::Mixed => rng.random_bool(p),
            FiringMode::Exactly(which) => which == Some(step),
        }
    };

    // (1) rotation
    let turns: u8 = rng.random_range(0..4);
    applied.push(StepRecord {
        step: StepId::Rotate,
        fired: true,
        params: Some(StepParams::Rotate { turns }),
    });
    let (mut h, mut w) = if turns % 2 == 1 { (width, height) } else { (height, width) };

    // (2) multi-tip ghosts
    let fired = fires(&mut rng, StepId::Multitip, config.p_multi_tip);
    applied.push(StepRecord {
        step: StepId::Multitip,
        fired,
        params: fired.then(|| StepParams::MultiTip(sample_multi_tip(&mut rng))),
    });

    // (3) scan-line misalignment
    let fired = fires(&mut rng, StepId::Misalign, config.p_misalign);
    applied.push(StepRecord {
        step: StepId::Misalign,
        fired,
        params: fired
            .then(|| StepParams::Misalign(sample_misalign(&mut rng, h, config.misalign_sigma))),
    });

    // (4) crop
    let size = config.crop;
    if h < size || w < size {
        return Err(Error::Shape(format!(
            "source {h}x{w} smaller than {size}x{size} crop after rotation"
        )));
    }
    let top = rng.random_range(0..=h - size);
    let left = rng.random_range(0..=w - size);
    applied.push(StepRecord {
        step: StepId::Crop,
        fired: true,
        params: Some(StepParams::Crop(CropParams { top, left, size })),
    });
    h = size;
    w = size;

    // (5) blunt tip
    let fired = fires(&mut rng, StepId::Blunt, config.p_blunt);
    applied.push(StepRecord {
        step: StepId::Blunt,
        fired,
        params: fired.then(|| StepParams::Blunt { sigma: rng.random_range(0.3..0.6) }),
    });

    // (6) tip change
    let fired = fires(&mut rng, StepId::Tipchange, config.p_tip_change);
    applied.push(StepRecord {
        step: StepId::Tipchange,
        fired,
        params: fired.then(|| {
            StepParams::TipChange(sample_tip_change(&mut rng, h, config.p_tip_change_offset))
        }),
    });

    // (7) vertical resampling, deterministic per task
    let factor = task.sr_factor();
    applied.push(StepRecord {
        step: StepId::Resample,
        fired: factor.is_some(),
        params: factor.map(|factor| StepParams::Resample { factor }),
    });

    // (8) scan-line noise
    let fired = fires(&mut rng, StepId::Scanlinenoise, config.p_scanline);
    applied.push(StepRecord {
        step: StepId::Scanlinenoise,
        fired,
        params: fired.then(|| StepParams::Scanline(sample_scanline(&mut rng, h, w))),
    });

    // (9) normalization
    applied.push(StepRecord {
        step: StepId::Normalize,
        fired: true,
        params: Some(StepParams::Normalize),
    });

    Ok(DegradationTrace { seed, applied })
}

/// Sample the full mixed pipeline for a `height x width` source.
pub fn sample_trace(
    height: usize,
    width: usize,
    task: Task,
    config: &PipelineConfig,
    seed: u64,
) -> Result<DegradationTrace> {
    sample_trace_inner(height, width, task, config, seed, FiringMode::Mixed)
}

// ---------------------------------------------------------------------------
// Step application
// ---------------------------------------------------------------------------

fn kernel_apply(img: &Image, choice: &KernelChoice) -> Result<Image> {
    match choice {
        KernelChoice::Gaussian { sigma } => gaussian_blur(img, *sigma),
        KernelChoice::Median { k } => median_filter(img, *k),
        KernelChoice::Random { size, weights } => {
            Ok(convolve(img, &Kernel::centered(*size, weights.clone())?))
        }
    }
}

/// Add the displaced sigmoid ghosts to a unit-normalized surface.
pub fn apply_multi_tip(img: &Image, p: &MultiTipParams) -> Result<Image> {
    let (h, w) = (img.height(), img.width());
    let mut out = img.pixels().to_vec();
    for copy in &p.copies {
        let shifted = shift(img, copy.dx, copy.dy);
        let mut ghost = vec![0.0; h * w];
        for (g, &v) in ghost.iter_mut().zip(shifted.pixels()) {
            *g = copy.amplitude / (1.0 + (copy.c - copy.d * v).exp());
        }
        let ghost = Image::from_parts(h, w, ghost, NormState::Raw);
        let filtered = kernel_apply(&ghost, &copy.kernel)?;
        for (o, &g) in out.iter_mut().zip(filtered.pixels()) {
            *o += g;
        }
    }
    Ok(Image::from_parts(h, w, out, NormState::Raw))
}

/// Sample per-row shifts and apply them; returns the shifted image and the
/// drawn parameters for the trace.
pub fn apply_misalignment<R: Rng>(img: &Image, sigma: f64, rng: &mut R) -> (Image, MisalignParams) {
    let params = sample_misalign(rng, img.height(), sigma);
    let out = shift_rows(img, &params.row_shifts).expect("shift count matches row count");
    (out, params)
}

/// Gaussian blur standing in for a blunt apex.
pub fn apply_blunt_tip(img: &Image, sigma: f64) -> Result<Image> {
    gaussian_blur(img, sigma)
}

/// Blur every row from `start_row` onward; earlier rows are untouched. An
/// optional constant jump is added to the start row.
pub fn apply_tip_change(img: &Image, p: &TipChangeParams) -> Result<Image> {
    let (h, w) = (img.height(), img.width());
    if p.start_row >= h {
        return Err(Error::InvalidParam(format!(
            "tip change row {} outside image of height {h}",
            p.start_row
        )));
    }
    let blurred = gaussian_blur(img, p.sigma)?;
    let mut out = img.pixels().to_vec();
    out[p.start_row * w..].copy_from_slice(&blurred.pixels()[p.start_row * w..]);
    let norm = if let Some(delta) = p.offset {
        for v in &mut out[p.start_row * w..(p.start_row + 1) * w] {
            *v += delta;
        }
        NormState::Raw
    } else {
        img.norm_state()
    };
    Ok(Image::from_parts(h, w, out, norm))
}

/// Sample scan-line segments and apply them.
pub fn apply_scanline_noise<R: Rng>(img: &Image, rng: &mut R) -> (Image, ScanlineParams) {
    let params = sample_scanline(rng, img.height(), img.width());
    let out = apply_scanline_segments(img, &params).expect("sampled segments are in range");
    (out, params)
}

/// Add the recorded per-row perturbations.
pub fn apply_scanline_segments(img: &Image, p: &ScanlineParams) -> Result<Image> {
    let (h, w) = (img.height(), img.width());
    let mut out = img.pixels().to_vec();
    for seg in &p.segments {
        if seg.row >= h || seg.start + seg.len > w {
            return Err(Error::TraceMismatch(format!(
                "scan-line segment row {} [{}, {}) outside {h}x{w}",
                seg.row,
                seg.start,
                seg.start + seg.len
            )));
        }
        let base = seg.row * w + seg.start;
        match &seg.kind {
            ScanlineKind::Constant { offset } => {
                for v in &mut out[base..base + seg.len] {
                    *v += seg.sign * offset;
                }
            }
            ScanlineKind::LogNormal { mu, sigma, peak } => {
                if seg.len == 0 {
                    continue;
                }
                let mut vals = Vec::with_capacity(seg.len);
                let norm = 1.0 / (sigma * (2.0 * std::f64::consts::PI).sqrt());
                for i in 0..seg.len {
                    let x = (i + 1) as f64;
                    let z = (x.ln() - mu) / sigma;
                    vals.push(norm / x * (-0.5 * z * z).exp());
                }
                let max = vals.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
                let scale = peak / max;
                for (v, val) in out[base..base + seg.len].iter_mut().zip(&vals) {
                    *v += seg.sign * scale * val;
                }
            }
            ScanlineKind::Sinusoid { amplitude, period, phase } => {
                for (i, v) in out[base..base + seg.len].iter_mut().enumerate() {
                    *v += seg.sign
                        * amplitude
                        * (std::f64::consts::TAU * i as f64 / period + phase).sin();
                }
            }
        }
    }
    Ok(Image::from_parts(h, w, out, NormState::Raw))
}

// ---------------------------------------------------------------------------
// Trace replay and sample generation
// ---------------------------------------------------------------------------

fn expect_params<'a>(
    rec: &'a StepRecord,
    what: &str,
) -> Result<&'a StepParams> {
    rec.params
        .as_ref()
        .ok_or_else(|| Error::TraceMismatch(format!("fired {what} step without parameters")))
}

/// Replay a trace on its source image. Returns `(ground_truth, degraded)`,
/// both symmetric normalized. Bitwise reproducible.
pub fn apply_trace(pristine: &Image, trace: &DegradationTrace) -> Result<(Image, Image)> {
    let unit = normalize_unit(pristine)?;
    let mut cur = unit;
    let mut rotated: Option<Image> = None;
    let mut crop_params: Option<CropParams> = None;

    for rec in &trace.applied {
        if !rec.fired {
            continue;
        }
        match (rec.step, expect_params(rec, "pipeline")?) {
            (StepId::Rotate, StepParams::Rotate { turns }) => {
                cur = rotate_quarter(&cur, *turns);
                rotated = Some(cur.clone());
            }
            (StepId::Multitip, StepParams::MultiTip(p)) => {
                cur = apply_multi_tip(&cur, p)?;
            }
            (StepId::Misalign, StepParams::Misalign(p)) => {
                cur = shift_rows(&cur, &p.row_shifts).map_err(|_| {
                    Error::TraceMismatch(format!(
                        "{} row shifts for {} rows",
                        p.row_shifts.len(),
                        cur.height()
                    ))
                })?;
            }
            (StepId::Crop, StepParams::Crop(p)) => {
                cur = crop(&cur, p.top, p.left, p.size, p.size)
                    .map_err(|e| Error::TraceMismatch(e.to_string()))?;
                crop_params = Some(*p);
            }
            (StepId::Blunt, StepParams::Blunt { sigma }) => {
                cur = apply_blunt_tip(&cur, *sigma)?;
            }
            (StepId::Tipchange, StepParams::TipChange(p)) => {
                cur = apply_tip_change(&cur, p)?;
            }
            (StepId::Resample, StepParams::Resample { factor }) => {
                let down = resample_y(&cur, *factor, ResampleDir::Down)?;
                cur = resample_y(&down, *factor, ResampleDir::UpNearest)?;
            }
            (StepId::Scanlinenoise, StepParams::Scanline(p)) => {
                cur = apply_scanline_segments(&cur, p)?;
            }
            (StepId::Normalize, StepParams::Normalize) => {
                cur = normalize_sym(&cur)?;
            }
            (step, _) => {
                return Err(Error::TraceMismatch(format!(
                    "step {step:?} carries parameters of a different kind"
                )));
            }
        }
    }

    let rotated = rotated.ok_or_else(|| Error::TraceMismatch("trace lacks rotate step".into()))?;
    let cp =
        crop_params.ok_or_else(|| Error::TraceMismatch("trace lacks crop step".into()))?;
    let gt_crop = crop(&rotated, cp.top, cp.left, cp.size, cp.size)
        .map_err(|e| Error::TraceMismatch(e.to_string()))?;
    let ground_truth = normalize_sym(&gt_crop)?;
    Ok((ground_truth, cur))
}

/// Draw a trace and realize it: the everyday path for making one sample.
pub fn degrade_sample(
    pristine: &Image,
    task: Task,
    config: &PipelineConfig,
    seed: u64,
) -> Result<SampleRecord> {
    let trace = sample_trace(pristine.height(), pristine.width(), task, config, seed)?;
    let (ground_truth, degraded) = apply_trace(pristine, &trace)?;
    Ok(SampleRecord { ground_truth, degraded, trace, task })
}

/// Make a sample where exactly one degradation fires (or none for the
/// low-resolution-only baseline, which is meaningful for SR tasks only).
pub fn degrade_sample_targeted(
    pristine: &Image,
    kind: TargetedKind,
    task: Task,
    config: &PipelineConfig,
    seed: u64,
) -> Result<SampleRecord> {
    let step = match kind {
        TargetedKind::MultiTip => Some(StepId::Multitip),
        TargetedKind::Misalign => Some(StepId::Misalign),
        TargetedKind::Blunt => Some(StepId::Blunt),
        TargetedKind::TipChange => Some(StepId::Tipchange),
        TargetedKind::Scanline => Some(StepId::Scanlinenoise),
        TargetedKind::LowresOnly => {
            if task.sr_factor().is_none() {
                return Err(Error::InvalidParam(
                    "lowres_only is defined for super-resolution tasks only".into(),
                ));
            }
            None
        }
    };
    let trace = sample_trace_inner(
        pristine.height(),
        pristine.width(),
        task,
        config,
        seed,
        FiringMode::Exactly(step),
    )?;
    let (ground_truth, degraded) = apply_trace(pristine, &trace)?;
    Ok(SampleRecord { ground_truth, degraded, trace, task })
}
