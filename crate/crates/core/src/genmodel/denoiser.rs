//! Conditioned denoiser interface and a small reference network.
//!
//! The reference network is a three-level convolutional encoder-decoder over
//! the channel pair (state, condition): 3x3 zero-padded convolutions, SiLU
//! activations, 2x2 average-pool downsampling, nearest-neighbour upsampling
//! and skip concatenations, with a sinusoidal time embedding projected into
//! every convolution block as a per-channel bias. All parameters live in one
//! flat vector behind a named layout so optimizers, checkpoints and gradient
//! checks share the same view.

use std::path::Path;

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::image::{Image, NormState};
use crate::io::{read_stmw, write_stmw, WeightEntry};

/// A conditional model mapping (state, time, condition) to a field of the
/// same shape: noise for the diffusion parameterization, velocity for flow
/// matching. Implementations must be deterministic in their inputs.
pub trait Denoiser {
    fn predict(&self, x_t: &Image, time: f64, condition: &Image) -> Image;
}

/// One named tensor inside the flat parameter vector.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ParamSpec {
    pub name: String,
    pub dims: Vec<usize>,
    pub offset: usize,
}

impl ParamSpec {
    pub fn len(&self) -> usize {
        self.dims.iter().product()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

/// Channel-major feature map used inside the network.
#[derive(Clone, Debug)]
struct Feat {
    ch: usize,
    h: usize,
    w: usize,
    data: Vec<f64>,
}

impl Feat {
    fn zeros(ch: usize, h: usize, w: usize) -> Feat {
        Feat { ch, h, w, data: vec![0.0; ch * h * w] }
    }

    #[inline]
    fn at(&self, c: usize, y: usize, x: usize) -> f64 {
        self.data[(c * self.h + y) * self.w + x]
    }

    #[inline]
    fn at_mut(&mut self, c: usize, y: usize, x: usize) -> &mut f64 {
        &mut self.data[(c * self.h + y) * self.w + x]
    }
}

#[inline]
fn sigmoid(z: f64) -> f64 {
    1.0 / (1.0 + (-z).exp())
}

#[inline]
fn silu(z: f64) -> f64 {
    z * sigmoid(z)
}

#[inline]
fn silu_grad(z: f64) -> f64 {
    let s = sigmoid(z);
    s * (1.0 + z * (1.0 - s))
}

/// Everything the backward pass needs from one forward evaluation.
pub struct TinyCache {
    emb: Vec<f64>,
    conv_inputs: [Feat; 6],
    pre_acts: [Feat; 5],
}

/// Small reference encoder-decoder denoiser.
#[derive(Clone, Debug)]
pub struct TinyDenoiser {
    widths: [usize; 3],
    emb_dim: usize,
    layout: Vec<ParamSpec>,
    params: Vec<f64>,
}

const CONV_NAMES: [&str; 6] = ["enc0", "enc1", "enc2", "dec1", "dec0", "head"];
const TEMB_NAMES: [&str; 5] = ["temb0", "temb1", "temb2", "temb3", "temb4"];

impl TinyDenoiser {
    /// Network with the default widths [8, 16, 32] and a 16-feature time
    /// embedding.
    pub fn new(seed: u64) -> TinyDenoiser {
        TinyDenoiser::with_config([8, 16, 32], 16, seed).expect("default configuration is valid")
    }

    pub fn with_config(widths: [usize; 3], emb_dim: usize, seed: u64) -> Result<TinyDenoiser> {
        if widths.iter().any(|&w| w == 0) {
            return Err(Error::InvalidParam("channel widths must be positive".into()));
        }
        if emb_dim < 2 || emb_dim % 2 != 0 {
            return Err(Error::InvalidParam(format!(
                "time embedding size must be even and at least 2, got {emb_dim}"
            )));
        }
        let layout = TinyDenoiser::build_layout(widths, emb_dim);
        let total = layout.iter().map(ParamSpec::len).sum();
        let mut model = TinyDenoiser { widths, emb_dim, layout, params: vec![0.0; total] };
        model.init_params(seed);
        Ok(model)
    }

    fn conv_shapes(widths: [usize; 3]) -> [(usize, usize); 6] {
        let [w0, w1, w2] = widths;
        [
            (w0, 2),       // enc0
            (w1, w0),      // enc1
            (w2, w1),      // enc2
            (w1, w2 + w1), // dec1 after skip concat
            (w0, w1 + w0), // dec0 after skip concat
            (1, w0),       // head
        ]
    }

    fn temb_widths(widths: [usize; 3]) -> [usize; 5] {
        let [w0, w1, w2] = widths;
        [w0, w1, w2, w1, w0]
    }

    fn build_layout(widths: [usize; 3], emb_dim: usize) -> Vec<ParamSpec> {
        let mut layout = Vec::new();
        let mut offset = 0;
        let mut push = |name: String, dims: Vec<usize>, offset: &mut usize| {
            let len: usize = dims.iter().product();
            layout.push(ParamSpec { name, dims, offset: *offset });
            *offset += len;
        };
        for (name, (out_ch, in_ch)) in CONV_NAMES.iter().zip(TinyDenoiser::conv_shapes(widths)) {
            push(format!("{name}.weight"), vec![out_ch, in_ch, 3, 3], &mut offset);
            push(format!("{name}.bias"), vec![out_ch], &mut offset);
        }
        for (name, ch) in TEMB_NAMES.iter().zip(TinyDenoiser::temb_widths(widths)) {
            push(format!("{name}.weight"), vec![ch, emb_dim], &mut offset);
            push(format!("{name}.bias"), vec![ch], &mut offset);
        }
        layout
    }

    fn init_params(&mut self, seed: u64) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        for i in 0..self.layout.len() {
            let spec = self.layout[i].clone();
            let slice = &mut self.params[spec.offset..spec.offset + spec.len()];
            if spec.name.ends_with(".bias") {
                slice.fill(0.0);
            } else if spec.name == "head.weight" {
                // A zero head makes the untrained model predict the zero
                // field, a sane starting estimate for noise and velocity.
                slice.fill(0.0);
            } else {
                // Fan-in scaled uniform init; for convolutions the fan-in is
                // in_ch * 3 * 3, for embedding projections the feature size.
                let fan_in: usize = spec.dims[1..].iter().product();
                let bound = (6.0 / fan_in as f64).sqrt();
                for v in slice {
                    *v = rng.random_range(-bound..bound);
                }
            }
        }
    }

    pub fn widths(&self) -> [usize; 3] {
        self.widths
    }

    pub fn emb_dim(&self) -> usize {
        self.emb_dim
    }

    pub fn param_count(&self) -> usize {
        self.params.len()
    }

    pub fn params(&self) -> &[f64] {
        &self.params
    }

    pub fn params_mut(&mut self) -> &mut [f64] {
        &mut self.params
    }

    pub fn layout(&self) -> &[ParamSpec] {
        &self.layout
    }

    fn spec(&self, name: &str) -> &ParamSpec {
        self.layout
            .iter()
            .find(|s| s.name == name)
            .expect("parameter name from the fixed layout")
    }

    fn tensor(&self, name: &str) -> &[f64] {
        let spec = self.spec(name);
        &self.params[spec.offset..spec.offset + spec.len()]
    }

    /// Sinusoidal features of the scalar time input.
    fn embed_time(&self, time: f64) -> Vec<f64> {
        let half = self.emb_dim / 2;
        let mut emb = vec![0.0; self.emb_dim];
        for i in 0..half {
            let exponent = if half > 1 { i as f64 / (half - 1) as f64 } else { 0.0 };
            let freq = 10_000.0f64.powf(-exponent);
            let angle = time * 1000.0 * freq;
            emb[i] = angle.sin();
            emb[half + i] = angle.cos();
        }
        emb
    }

    /// Per-channel additive terms projected from the time embedding.
    fn temb_add(&self, level: usize, emb: &[f64]) -> Vec<f64> {
        let name = TEMB_NAMES[level];
        let w = self.tensor(&format!("{name}.weight"));
        let b = self.tensor(&format!("{name}.bias"));
        let ch = b.len();
        (0..ch)
            .map(|c| {
                let row = &w[c * self.emb_dim..(c + 1) * self.emb_dim];
                row.iter().zip(emb).map(|(a, e)| a * e).sum::<f64>() + b[c]
            })
            .collect()
    }

    /// 3x3 zero-padded convolution plus bias and per-channel additive term.
    ///
    /// Each kernel tap becomes one shifted row-slice update so the inner
    /// loops run over contiguous memory. Per-pixel terms accumulate in the
    /// same (channel, tap) order as the direct nested loop would use.
    fn conv_forward(&self, conv: usize, input: &Feat, add: Option<&[f64]>) -> Feat {
        let name = CONV_NAMES[conv];
        let w = self.tensor(&format!("{name}.weight"));
        let b = self.tensor(&format!("{name}.bias"));
        let (out_ch, in_ch) = TinyDenoiser::conv_shapes(self.widths)[conv];
        debug_assert_eq!(in_ch, input.ch);
        let (h, wid) = (input.h, input.w);
        let mut out = Feat::zeros(out_ch, h, wid);
        for o in 0..out_ch {
            let base = add.map_or(0.0, |a| a[o]) + b[o];
            let plane = &mut out.data[o * h * wid..(o + 1) * h * wid];
            plane.fill(base);
            for c in 0..in_ch {
                let src = &input.data[c * h * wid..(c + 1) * h * wid];
                for ky in 0..3usize {
                    let y0 = 1usize.saturating_sub(ky);
                    let y1 = (h + 1 - ky).min(h);
                    for kx in 0..3usize {
                        let x0 = 1usize.saturating_sub(kx);
                        let x1 = (wid + 1 - kx).min(wid);
                        if y0 >= y1 || x0 >= x1 {
                            continue;
                        }
                        let wv = w[((o * in_ch + c) * 3 + ky) * 3 + kx];
                        for y in y0..y1 {
                            let yy = y + ky - 1;
                            axpy(
                                wv,
                                &src[yy * wid + x0 + kx - 1..yy * wid + x1 + kx - 1],
                                &mut plane[y * wid + x0..y * wid + x1],
                            );
                        }
                    }
                }
            }
        }
        out
    }

    /// Gradients of a convolution: accumulates weight/bias gradients into
    /// `grad_params` and returns the gradient with respect to the input.
    fn conv_backward(
        &self,
        conv: usize,
        input: &Feat,
        grad_out: &Feat,
        grad_params: &mut [f64],
    ) -> Feat {
        let name = CONV_NAMES[conv];
        let w_spec = self.spec(&format!("{name}.weight"));
        let b_spec = self.spec(&format!("{name}.bias"));
        let w = &self.params[w_spec.offset..w_spec.offset + w_spec.len()];
        let (out_ch, in_ch) = TinyDenoiser::conv_shapes(self.widths)[conv];
        let (h, wid) = (input.h, input.w);
        let mut grad_in = Feat::zeros(in_ch, h, wid);
        for o in 0..out_ch {
            let gplane = &grad_out.data[o * h * wid..(o + 1) * h * wid];
            grad_params[b_spec.offset + o] += gplane.iter().sum::<f64>();
            for c in 0..in_ch {
                let src = &input.data[c * h * wid..(c + 1) * h * wid];
                let gin = &mut grad_in.data[c * h * wid..(c + 1) * h * wid];
                for ky in 0..3usize {
                    let y0 = 1usize.saturating_sub(ky);
                    let y1 = (h + 1 - ky).min(h);
                    for kx in 0..3usize {
                        let x0 = 1usize.saturating_sub(kx);
                        let x1 = (wid + 1 - kx).min(wid);
                        if y0 >= y1 || x0 >= x1 {
                            continue;
                        }
                        let wi = ((o * in_ch + c) * 3 + ky) * 3 + kx;
                        let wv = w[wi];
                        let mut gw = 0.0;
                        for y in y0..y1 {
                            let yy = y + ky - 1;
                            let g_row = &gplane[y * wid + x0..y * wid + x1];
                            let s0 = yy * wid + x0 + kx - 1;
                            let s1 = yy * wid + x1 + kx - 1;
                            gw += dot(g_row, &src[s0..s1]);
                            axpy(wv, g_row, &mut gin[s0..s1]);
                        }
                        grad_params[w_spec.offset + wi] += gw;
                    }
                }
            }
        }
        grad_in
    }

    fn temb_backward(
        &self,
        level: usize,
        emb: &[f64],
        grad_pre: &Feat,
        grad_params: &mut [f64],
    ) {
        let name = TEMB_NAMES[level];
        let w_spec = self.spec(&format!("{name}.weight"));
        let b_spec = self.spec(&format!("{name}.bias"));
        for c in 0..grad_pre.ch {
            let mut g_add = 0.0;
            for y in 0..grad_pre.h {
                for x in 0..grad_pre.w {
                    g_add += grad_pre.at(c, y, x);
                }
            }
            grad_params[b_spec.offset + c] += g_add;
            for (j, &e) in emb.iter().enumerate() {
                grad_params[w_spec.offset + c * self.emb_dim + j] += g_add * e;
            }
        }
    }

    /// Forward pass keeping everything the backward pass needs.
    pub fn forward_cached(
        &self,
        x_t: &Image,
        time: f64,
        condition: &Image,
    ) -> Result<(Image, TinyCache)> {
        let (h, w) = (x_t.height(), x_t.width());
        if condition.height() != h || condition.width() != w {
            return Err(Error::Shape(format!(
                "state {h}x{w} vs condition {}x{}",
                condition.height(),
                condition.width()
            )));
        }
        if h % 4 != 0 || w % 4 != 0 || h == 0 || w == 0 {
            return Err(Error::Shape(format!(
                "denoiser needs positive dimensions divisible by 4, got {h}x{w}"
            )));
        }
        if !time.is_finite() {
            return Err(Error::NonFinite(format!("time input {time}")));
        }

        let mut input = Feat::zeros(2, h, w);
        input.data[..h * w].copy_from_slice(x_t.pixels());
        input.data[h * w..].copy_from_slice(condition.pixels());
        let emb = self.embed_time(time);

        let z0 = self.conv_forward(0, &input, Some(&self.temb_add(0, &emb)));
        let h0 = map_feat(&z0, silu);
        let p1 = avgpool2(&h0);
        let z1 = self.conv_forward(1, &p1, Some(&self.temb_add(1, &emb)));
        let h1 = map_feat(&z1, silu);
        let p2 = avgpool2(&h1);
        let z2 = self.conv_forward(2, &p2, Some(&self.temb_add(2, &emb)));
        let h2 = map_feat(&z2, silu);
        let u1 = upsample2(&h2);
        let cat1 = concat(&u1, &h1);
        let zd1 = self.conv_forward(3, &cat1, Some(&self.temb_add(3, &emb)));
        let d1 = map_feat(&zd1, silu);
        let u0 = upsample2(&d1);
        let cat0 = concat(&u0, &h0);
        let zd0 = self.conv_forward(4, &cat0, Some(&self.temb_add(4, &emb)));
        let d0 = map_feat(&zd0, silu);
        let out = self.conv_forward(5, &d0, None);

        let img = Image::from_parts(h, w, out.data, NormState::Raw);
        let cache = TinyCache {
            emb,
            conv_inputs: [input, p1, p2, cat1, cat0, d0],
            pre_acts: [z0, z1, z2, zd1, zd0],
        };
        Ok((img, cache))
    }

    /// Parameter gradient for a scalar loss with the given gradient with
    /// respect to the network output.
    pub fn backward(&self, cache: &TinyCache, grad_out: &Image) -> Vec<f64> {
        let [input, p1, p2, cat1, cat0, d0] = &cache.conv_inputs;
        let [z0, z1, z2, zd1, zd0] = &cache.pre_acts;
        let [w0, w1, w2] = self.widths;
        let mut grads = vec![0.0; self.params.len()];

        let g_out = Feat {
            ch: 1,
            h: grad_out.height(),
            w: grad_out.width(),
            data: grad_out.pixels().to_vec(),
        };
        let g_d0 = self.conv_backward(5, d0, &g_out, &mut grads);
        let g_zd0 = mul_silu_grad(&g_d0, zd0);
        self.temb_backward(4, &cache.emb, &g_zd0, &mut grads);
        let g_cat0 = self.conv_backward(4, cat0, &g_zd0, &mut grads);
        let (g_u0, g_h0_skip) = split(&g_cat0, w1, w0);
        let g_d1 = upsample2_backward(&g_u0);
        let g_zd1 = mul_silu_grad(&g_d1, zd1);
        self.temb_backward(3, &cache.emb, &g_zd1, &mut grads);
        let g_cat1 = self.conv_backward(3, cat1, &g_zd1, &mut grads);
        let (g_u1, g_h1_skip) = split(&g_cat1, w2, w1);
        let g_h2 = upsample2_backward(&g_u1);
        let g_z2 = mul_silu_grad(&g_h2, z2);
        self.temb_backward(2, &cache.emb, &g_z2, &mut grads);
        let g_p2 = self.conv_backward(2, p2, &g_z2, &mut grads);
        let g_h1 = add_feat(&avgpool2_backward(&g_p2), &g_h1_skip);
        let g_z1 = mul_silu_grad(&g_h1, z1);
        self.temb_backward(1, &cache.emb, &g_z1, &mut grads);
        let g_p1 = self.conv_backward(1, p1, &g_z1, &mut grads);
        let g_h0 = add_feat(&avgpool2_backward(&g_p1), &g_h0_skip);
        let g_z0 = mul_silu_grad(&g_h0, z0);
        self.temb_backward(0, &cache.emb, &g_z0, &mut grads);
        let _ = self.conv_backward(0, input, &g_z0, &mut grads);
        grads
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let entries: Vec<WeightEntry> = self
            .layout
            .iter()
            .map(|spec| WeightEntry {
                name: spec.name.clone(),
                dims: spec.dims.clone(),
                data: self.params[spec.offset..spec.offset + spec.len()].to_vec(),
            })
            .collect();
        write_stmw(path, &entries)
    }

    /// Rebuild a network from a checkpoint, inferring widths and embedding
    /// size from the stored tensor shapes.
    pub fn load(path: &Path) -> Result<TinyDenoiser> {
        let entries = read_stmw(path)?;
        let find = |name: &str| -> Result<&WeightEntry> {
            entries
                .iter()
                .find(|e| e.name == name)
                .ok_or_else(|| Error::Format(format!("checkpoint lacks tensor {name}")))
        };
        let w0 = find("enc0.weight")?.dims[0];
        let w1 = find("enc1.weight")?.dims[0];
        let w2 = find("enc2.weight")?.dims[0];
        let emb_dim = *find("temb0.weight")?
            .dims
            .get(1)
            .ok_or_else(|| Error::Format("temb0.weight needs two dims".into()))?;
        let mut model = TinyDenoiser::with_config([w0, w1, w2], emb_dim, 0)?;
        let layout = model.layout.clone();
        for spec in &layout {
            let entry = find(&spec.name)?;
            if entry.dims != spec.dims {
                return Err(Error::Format(format!(
                    "tensor {} has dims {:?}, expected {:?}",
                    spec.name, entry.dims, spec.dims
                )));
            }
            model.params[spec.offset..spec.offset + spec.len()].copy_from_slice(&entry.data);
        }
        Ok(model)
    }
}

impl Denoiser for TinyDenoiser {
    /// Panics on inputs whose dimensions are not positive multiples of 4 or
    /// whose shapes disagree; use [`TinyDenoiser::forward_cached`] for a
    /// fallible call.
    fn predict(&self, x_t: &Image, time: f64, condition: &Image) -> Image {
        let (out, _) = self
            .forward_cached(x_t, time, condition)
            .expect("denoiser input must be valid");
        out
    }
}

/// `dst += k * src` over matching slices.
#[inline]
fn axpy(k: f64, src: &[f64], dst: &mut [f64]) {
    for (d, s) in dst.iter_mut().zip(src) {
        *d += k * s;
    }
}

/// Dot product with four running sums so the reduction can vectorize.
fn dot(a: &[f64], b: &[f64]) -> f64 {
    let mut lanes = [0.0f64; 4];
    let mut qa = a.chunks_exact(4);
    let mut qb = b.chunks_exact(4);
    for (ca, cb) in qa.by_ref().zip(qb.by_ref()) {
        lanes[0] += ca[0] * cb[0];
        lanes[1] += ca[1] * cb[1];
        lanes[2] += ca[2] * cb[2];
        lanes[3] += ca[3] * cb[3];
    }
    let tail: f64 = qa.remainder().iter().zip(qb.remainder()).map(|(x, y)| x * y).sum();
    (lanes[0] + lanes[1]) + (lanes[2] + lanes[3]) + tail
}

fn map_feat(f: &Feat, op: fn(f64) -> f64) -> Feat {
    Feat { ch: f.ch, h: f.h, w: f.w, data: f.data.iter().map(|&v| op(v)).collect() }
}

fn mul_silu_grad(grad: &Feat, pre: &Feat) -> Feat {
    Feat {
        ch: grad.ch,
        h: grad.h,
        w: grad.w,
        data: grad
            .data
            .iter()
            .zip(&pre.data)
            .map(|(&g, &z)| g * silu_grad(z))
            .collect(),
    }
}

fn add_feat(a: &Feat, b: &Feat) -> Feat {
    debug_assert_eq!(a.data.len(), b.data.len());
    Feat {
        ch: a.ch,
        h: a.h,
        w: a.w,
        data: a.data.iter().zip(&b.data).map(|(&x, &y)| x + y).collect(),
    }
}

fn avgpool2(f: &Feat) -> Feat {
    let (h2, w2) = (f.h / 2, f.w / 2);
    let mut out = Feat::zeros(f.ch, h2, w2);
    for c in 0..f.ch {
        for y in 0..h2 {
            for x in 0..w2 {
                *out.at_mut(c, y, x) = 0.25
                    * (f.at(c, 2 * y, 2 * x)
                        + f.at(c, 2 * y, 2 * x + 1)
                        + f.at(c, 2 * y + 1, 2 * x)
                        + f.at(c, 2 * y + 1, 2 * x + 1));
            }
        }
    }
    out
}

fn avgpool2_backward(grad: &Feat) -> Feat {
    let (h, w) = (grad.h * 2, grad.w * 2);
    let mut out = Feat::zeros(grad.ch, h, w);
    for c in 0..grad.ch {
        for y in 0..grad.h {
            for x in 0..grad.w {
                let g = 0.25 * grad.at(c, y, x);
                *out.at_mut(c, 2 * y, 2 * x) += g;
                *out.at_mut(c, 2 * y, 2 * x + 1) += g;
                *out.at_mut(c, 2 * y + 1, 2 * x) += g;
                *out.at_mut(c, 2 * y + 1, 2 * x + 1) += g;
            }
        }
    }
    out
}

fn upsample2(f: &Feat) -> Feat {
    let (h, w) = (f.h * 2, f.w * 2);
    let mut out = Feat::zeros(f.ch, h, w);
    for c in 0..f.ch {
        for y in 0..h {
            for x in 0..w {
                *out.at_mut(c, y, x) = f.at(c, y / 2, x / 2);
            }
        }
    }
    out
}

fn upsample2_backward(grad: &Feat) -> Feat {
    let (h2, w2) = (grad.h / 2, grad.w / 2);
    let mut out = Feat::zeros(grad.ch, h2, w2);
    for c in 0..grad.ch {
        for y in 0..grad.h {
            for x in 0..grad.w {
                *out.at_mut(c, y / 2, x / 2) += grad.at(c, y, x);
            }
        }
    }
    out
}

fn concat(a: &Feat, b: &Feat) -> Feat {
    debug_assert_eq!((a.h, a.w), (b.h, b.w));
    let mut data = Vec::with_capacity((a.ch + b.ch) * a.h * a.w);
    data.extend_from_slice(&a.data);
    data.extend_from_slice(&b.data);
    Feat { ch: a.ch + b.ch, h: a.h, w: a.w, data }
}

fn split(f: &Feat, ch_a: usize, ch_b: usize) -> (Feat, Feat) {
    debug_assert_eq!(f.ch, ch_a + ch_b);
    let cut = ch_a * f.h * f.w;
    (
        Feat { ch: ch_a, h: f.h, w: f.w, data: f.data[..cut].to_vec() },
        Feat { ch: ch_b, h: f.h, w: f.w, data: f.data[cut..].to_vec() },
    )
}
