//! Binary file formats.
//!
//! - `STMI`: single image (magic, version, dims, norm state, f32 pixels)
//! - sample pair: two concatenated STMI blocks, ground truth then degraded
//! - 16-bit PGM (P5, maxval 65535) for interchange with other tools
//! - `STME`: embedding matrix (magic, n, d, f32 rows)
//! - `STMW`: named weight tensors (magic, version, self-delimiting entries)
//!
//! All multi-byte integers and f32 payloads are little-endian; PGM samples
//! are big-endian per the Netpbm convention.

use std::fs::File;
use std::io::{BufWriter, Read, Write};
use std::path::Path;

use crate::error::{Error, Result};
use crate::image::{Image, NormState};

const STMI_MAGIC: &[u8; 4] = b"STMI";
const STME_MAGIC: &[u8; 4] = b"STME";
const STMW_MAGIC: &[u8; 4] = b"STMW";
const STMI_VERSION: u8 = 1;
const STMW_VERSION: u8 = 1;

struct Cursor<'a> {
    buf: &'a [u8],
    pos: usize,
}

impl<'a> Cursor<'a> {
    fn new(buf: &'a [u8]) -> Self {
        Cursor { buf, pos: 0 }
    }

    fn remaining(&self) -> usize {
        self.buf.len() - self.pos
    }

    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        if self.remaining() < n {
            return Err(Error::Format(format!(
                "truncated payload: wanted {n} bytes, {} left",
                self.remaining()
            )));
        }
        let s = &self.buf[self.pos..self.pos + n];
        self.pos += n;
        Ok(s)
    }

    fn u8(&mut self) -> Result<u8> {
        Ok(self.take(1)?[0])
    }

    fn u16(&mut self) -> Result<u16> {
        let b = self.take(2)?;
        Ok(u16::from_le_bytes([b[0], b[1]]))
    }

    fn u32(&mut self) -> Result<u32> {
        let b = self.take(4)?;
        Ok(u32::from_le_bytes([b[0], b[1], b[2], b[3]]))
    }

    fn f32(&mut self) -> Result<f32> {
        let b = self.take(4)?;
        Ok(f32::from_le_bytes([b[0], b[1], b[2], b[3]]))
    }
}

pub fn stmi_bytes(img: &Image) -> Vec<u8> {
    let mut out = Vec::with_capacity(14 + 4 * img.pixels().len());
    out.extend_from_slice(STMI_MAGIC);
    out.push(STMI_VERSION);
    out.extend_from_slice(&(img.height() as u32).to_le_bytes());
    out.extend_from_slice(&(img.width() as u32).to_le_bytes());
    out.push(img.norm_state().to_code());
    for &v in img.pixels() {
        out.extend_from_slice(&(v as f32).to_le_bytes());
    }
    out
}

fn parse_stmi(cur: &mut Cursor) -> Result<Image> {
    let magic = cur.take(4)?;
    if magic != STMI_MAGIC {
        return Err(Error::Format("bad STMI magic".into()));
    }
    let version = cur.u8()?;
    if version != STMI_VERSION {
        return Err(Error::Format(format!("unsupported STMI version {version}")));
    }
    let h = cur.u32()? as usize;
    let w = cur.u32()? as usize;
    let norm = NormState::from_code(cur.u8()?)?;
    let mut data = Vec::with_capacity(h * w);
    for _ in 0..h * w {
        data.push(cur.f32()? as f64);
    }
    Image::new(h, w, data, norm)
}

pub fn write_stmi(path: &Path, img: &Image) -> Result<()> {
    let mut f = BufWriter::new(File::create(path)?);
    f.write_all(&stmi_bytes(img))?;
    f.flush()?;
    Ok(())
}

pub fn read_stmi(path: &Path) -> Result<Image> {
    let mut buf = Vec::new();
    File::open(path)?.read_to_end(&mut buf)?;
    let mut cur = Cursor::new(&buf);
    let img = parse_stmi(&mut cur)?;
    if cur.remaining() != 0 {
        return Err(Error::Format("trailing bytes after STMI payload".into()));
    }
    Ok(img)
}

/// Ground truth followed by the degraded channel, concatenated STMI blocks.
pub fn write_sample(path: &Path, ground_truth: &Image, degraded: &Image) -> Result<()> {
    let mut f = BufWriter::new(File::create(path)?);
    f.write_all(&stmi_bytes(ground_truth))?;
    f.write_all(&stmi_bytes(degraded))?;
    f.flush()?;
    Ok(())
}

pub fn read_sample(path: &Path) -> Result<(Image, Image)> {
    let mut buf = Vec::new();
    File::open(path)?.read_to_end(&mut buf)?;
    let mut cur = Cursor::new(&buf);
    let gt = parse_stmi(&mut cur)?;
    let degraded = parse_stmi(&mut cur)?;
    if cur.remaining() != 0 {
        return Err(Error::Format("trailing bytes after sample pair".into()));
    }
    Ok((gt, degraded))
}

/// Export as 16-bit binary PGM. The image must carry a normalized state so
/// the affine map onto [0, 65535] is well defined.
pub fn write_pgm16(path: &Path, img: &Image) -> Result<()> {
    let to_unit: Box<dyn Fn(f64) -> f64> = match img.norm_state() {
        NormState::Unit => Box::new(|v| v),
        NormState::Symmetric => Box::new(|v| (v + 1.0) / 2.0),
        NormState::Raw => {
            return Err(Error::InvalidParam(
                "PGM export requires a unit or symmetric normalized image".into(),
            ))
        }
    };
    let mut f = BufWriter::new(File::create(path)?);
    write!(f, "P5\n{} {}\n65535\n", img.width(), img.height())?;
    for &v in img.pixels() {
        let q = (to_unit(v).clamp(0.0, 1.0) * 65535.0).round() as u16;
        f.write_all(&q.to_be_bytes())?;
    }
    f.flush()?;
    Ok(())
}

/// Import a 16-bit binary PGM as a unit-normalized image.
pub fn read_pgm16(path: &Path) -> Result<Image> {
    let mut buf = Vec::new();
    File::open(path)?.read_to_end(&mut buf)?;

    // Header: three whitespace-separated tokens after the P5 tag, with
    // comment lines allowed.
    let mut pos = 0usize;
    let mut token = |buf: &[u8]| -> Result<String> {
        let mut t = String::new();
        while pos < buf.len() {
            let b = buf[pos];
            if b == b'#' {
                while pos < buf.len() && buf[pos] != b'\n' {
                    pos += 1;
                }
            } else if b.is_ascii_whitespace() {
                if !t.is_empty() {
                    break;
                }
                pos += 1;
            } else {
                t.push(b as char);
                pos += 1;
            }
        }
        if t.is_empty() {
            return Err(Error::Format("truncated PGM header".into()));
        }
        Ok(t)
    };

    if token(&buf)? != "P5" {
        return Err(Error::Format("not a binary PGM (P5) file".into()));
    }
    let w: usize = token(&buf)?
        .parse()
        .map_err(|_| Error::Format("bad PGM width".into()))?;
    let h: usize = token(&buf)?
        .parse()
        .map_err(|_| Error::Format("bad PGM height".into()))?;
    let maxval: u32 = token(&buf)?
        .parse()
        .map_err(|_| Error::Format("bad PGM maxval".into()))?;
    if maxval != 65535 {
        return Err(Error::Format(format!("expected 16-bit PGM (maxval 65535), got {maxval}")));
    }
    pos += 1; // single whitespace byte after maxval

    let need = h * w * 2;
    if buf.len() < pos + need {
        return Err(Error::Format("truncated PGM payload".into()));
    }
    let mut data = Vec::with_capacity(h * w);
    for i in 0..h * w {
        let hi = buf[pos + 2 * i] as u16;
        let lo = buf[pos + 2 * i + 1] as u16;
        data.push(((hi << 8) | lo) as f64 / 65535.0);
    }
    Image::new(h, w, data, NormState::Unit)
}

/// Embedding matrix: n vectors of dimension d, row-major f32.
pub fn write_stme(path: &Path, n: usize, d: usize, rows: &[f64]) -> Result<()> {
    if rows.len() != n * d {
        return Err(Error::Shape(format!("{} values for {n}x{d} embeddings", rows.len())));
    }
    let mut f = BufWriter::new(File::create(path)?);
    f.write_all(STME_MAGIC)?;
    f.write_all(&(n as u32).to_le_bytes())?;
    f.write_all(&(d as u32).to_le_bytes())?;
    for &v in rows {
        f.write_all(&(v as f32).to_le_bytes())?;
    }
    f.flush()?;
    Ok(())
}

pub fn read_stme(path: &Path) -> Result<(usize, usize, Vec<f64>)> {
    let mut buf = Vec::new();
    File::open(path)?.read_to_end(&mut buf)?;
    let mut cur = Cursor::new(&buf);
    if cur.take(4)? != STME_MAGIC {
        return Err(Error::Format("bad STME magic".into()));
    }
    let n = cur.u32()? as usize;
    let d = cur.u32()? as usize;
    let mut rows = Vec::with_capacity(n * d);
    for _ in 0..n * d {
        let v = cur.f32()? as f64;
        if !v.is_finite() {
            return Err(Error::NonFinite("embedding value".into()));
        }
        rows.push(v);
    }
    if cur.remaining() != 0 {
        return Err(Error::Format("trailing bytes after STME payload".into()));
    }
    Ok((n, d, rows))
}

/// One named tensor in a weight checkpoint.
#[derive(Clone, Debug, PartialEq)]
pub struct WeightEntry {
    pub name: String,
    pub dims: Vec<usize>,
    pub data: Vec<f64>,
}

pub fn write_stmw(path: &Path, entries: &[WeightEntry]) -> Result<()> {
    let mut f = BufWriter::new(File::create(path)?);
    f.write_all(STMW_MAGIC)?;
    f.write_all(&[STMW_VERSION])?;
    for e in entries {
        let count: usize = e.dims.iter().product();
        if count != e.data.len() {
            return Err(Error::Shape(format!(
                "tensor {} has {} values for dims {:?}",
                e.name,
                e.data.len(),
                e.dims
            )));
        }
        let name = e.name.as_bytes();
        if name.len() > u16::MAX as usize {
            return Err(Error::InvalidParam(format!("tensor name too long: {}", e.name)));
        }
        f.write_all(&(name.len() as u16).to_le_bytes())?;
        f.write_all(name)?;
        f.write_all(&[e.dims.len() as u8])?;
        for &d in &e.dims {
            f.write_all(&(d as u32).to_le_bytes())?;
        }
        for &v in &e.data {
            f.write_all(&(v as f32).to_le_bytes())?;
        }
    }
    f.flush()?;
    Ok(())
}

pub fn read_stmw(path: &Path) -> Result<Vec<WeightEntry>> {
    let mut buf = Vec::new();
    File::open(path)?.read_to_end(&mut buf)?;
    let mut cur = Cursor::new(&buf);
    if cur.take(4)? != STMW_MAGIC {
        return Err(Error::Format("bad STMW magic".into()));
    }
    let version = cur.u8()?;
    if version != STMW_VERSION {
        return Err(Error::Format(format!("unsupported STMW version {version}")));
    }
    let mut entries = Vec::new();
    while cur.remaining() > 0 {
        let name_len = cur.u16()? as usize;
        let name = String::from_utf8(cur.take(name_len)?.to_vec())
            .map_err(|_| Error::Format("tensor name is not UTF-8".into()))?;
        let rank = cur.u8()? as usize;
        let mut dims = Vec::with_capacity(rank);
        for _ in 0..rank {
            dims.push(cur.u32()? as usize);
        }
        let count: usize = dims.iter().product();
        let mut data = Vec::with_capacity(count);
        for _ in 0..count {
            let v = cur.f32()? as f64;
            if !v.is_finite() {
                return Err(Error::NonFinite(format!("weight value in tensor {name}")));
            }
            data.push(v);
        }
        entries.push(WeightEntry { name, dims, data });
    }
    Ok(entries)
}

#[cfg(test)]
mod tests {
    use super::*;
    use tempfile::tempdir;

    fn sample_image() -> Image {
        Image::from_fn(5, 7, NormState::Unit, |r, c| {
            ((r * 7 + c) as f64 / 34.0 * 1024.0).round() / 1024.0
        })
        .unwrap()
    }

    #[test]
    fn stmi_round_trip_preserves_f32_payload() {
        let dir = tempdir().unwrap();
        let p = dir.path().join("a.stmi");
        let img = sample_image();
        write_stmi(&p, &img).unwrap();
        let back = read_stmi(&p).unwrap();
        assert_eq!(back.height(), 5);
        assert_eq!(back.width(), 7);
        assert_eq!(back.norm_state(), NormState::Unit);
        for (a, b) in img.pixels().iter().zip(back.pixels()) {
            assert_eq!(*a as f32, *b as f32);
        }
    }

    #[test]
    fn stmi_rejects_bad_magic_and_nan() {
        let dir = tempdir().unwrap();
        let p = dir.path().join("bad.stmi");
        std::fs::write(&p, b"NOPE").unwrap();
        assert!(read_stmi(&p).is_err());

        let img = Image::new(1, 1, vec![0.5], NormState::Unit).unwrap();
        let mut bytes = stmi_bytes(&img);
        let n = bytes.len();
        bytes[n - 4..].copy_from_slice(&f32::NAN.to_le_bytes());
        std::fs::write(&p, &bytes).unwrap();
        assert!(matches!(read_stmi(&p), Err(Error::NonFinite(_))));
    }

    #[test]
    fn sample_pair_round_trip() {
        let dir = tempdir().unwrap();
        let p = dir.path().join("pair.stms");
        let gt = sample_image();
        let mut deg = gt.clone();
        deg.pixels_mut()[0] = 1.0;
        write_sample(&p, &gt, &deg).unwrap();
        let (g, d) = read_sample(&p).unwrap();
        assert_eq!(g.pixels()[1], gt.pixels()[1]);
        assert_eq!(d.pixels()[0], 1.0);
    }

    #[test]
    fn pgm16_round_trip_and_raw_rejection() {
        let dir = tempdir().unwrap();
        let p = dir.path().join("a.pgm");
        let img = sample_image();
        write_pgm16(&p, &img).unwrap();
        let back = read_pgm16(&p).unwrap();
        assert_eq!(back.norm_state(), NormState::Unit);
        for (a, b) in img.pixels().iter().zip(back.pixels()) {
            assert!((a - b).abs() < 1.0 / 65535.0);
        }
        let raw = Image::new(2, 2, vec![0.0, 5.0, 1.0, 3.0], NormState::Raw).unwrap();
        assert!(write_pgm16(&p, &raw).is_err());
    }

    #[test]
    fn stmw_round_trip_keeps_names_shapes_and_f32_values() {
        let dir = tempdir().unwrap();
        let p = dir.path().join("w.stmw");
        let entries = vec![
            WeightEntry {
                name: "conv.weight".into(),
                dims: vec![2, 3],
                data: vec![0.5, -1.25, 3.0, 0.0, 7.5, -0.125],
            },
            WeightEntry { name: "conv.bias".into(), dims: vec![2], data: vec![1.0, 2.0] },
        ];
        write_stmw(&p, &entries).unwrap();
        let back = read_stmw(&p).unwrap();
        assert_eq!(back, entries);
    }

    #[test]
    fn stme_round_trip() {
        let dir = tempdir().unwrap();
        let p = dir.path().join("e.stme");
        let rows = vec![0.25, -0.5, 1.0, 2.0, 3.0, -4.0];
        write_stme(&p, 2, 3, &rows).unwrap();
        let (n, d, back) = read_stme(&p).unwrap();
        assert_eq!((n, d), (2, 3));
        assert_eq!(back, rows);
    }
}
