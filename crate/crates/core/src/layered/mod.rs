//! Two-layer backward-compatible HDR container.
//!
//! The base layer is a tone-mapped 8-bit PPM that any PPM reader can show
//! on its own. The extension layer holds what is needed to rebuild the HDR
//! image from it.
//!
//! Container, all integers little-endian:
//!
//! ```text
//! 0   4  magic "HDRL"
//! 4   1  version (1)
//! 5   1  mode: 0 lossless, 1 lossy16, 2 lossy8
//! 6   1  calibration: 0 relative, 1 absolute
//! 7   1  flags: bit 0 = negative samples present
//! 8   4  width
//! 12  4  height
//! 16  8  tone map key (f64)
//! 24  8  tone map white point (f64, 0 = image maximum)
//! 32  8  luminance error bound (f64, relative)
//! 40  1  plane count P
//! 41     P * (min f64, max f64, bits u8)
//!    32  base offset, base length, extension offset, extension length (u64)
//!        base bytes, extension bytes
//! ```
//!
//! Lossy extension planes are the log2 luminance ratio
//! `r = log2((L + eps) / (L_B + eps))` with `eps = 2^-16`, then the chroma
//! residuals `R/S - R_B/S_B` and `G/S - G_B/S_B` with `S = R + G + B`, each
//! quantized uniformly over its `[min, max]`. `L_B` is the luminance of the
//! sRGB-decoded base. Lossless mode stores the exact `f32` samples as 12
//! byte planes (channel-major, least significant byte first). Every
//! byte plane is compressed with [`entropy::encode`] and prefixed by its
//! `u32` length.

pub mod entropy;

use std::fmt;
use std::str::FromStr;

use crate::color::{widen, ColorSpace};
use crate::error::LayeredError;
use crate::formats::{read_ppm, write_ppm};
use crate::image::{Calibration, HdrImage, SdrImage};
use crate::tonemap::{decode_display, tonemap_global, GlobalParams};

pub const MAGIC: &[u8; 4] = b"HDRL";
pub const VERSION: u8 = 1;
pub const EPSILON: f64 = 1.0 / 65536.0;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Default)]
pub enum Mode {
    #[default]
    Lossless,
    Lossy16,
    Lossy8,
}

impl Mode {
    fn code(self) -> u8 {
        match self {
            Self::Lossless => 0,
            Self::Lossy16 => 1,
            Self::Lossy8 => 2,
        }
    }

    fn from_code(c: u8) -> Option<Self> {
        [Self::Lossless, Self::Lossy16, Self::Lossy8].into_iter().find(|m| m.code() == c)
    }

    fn bits(self) -> u8 {
        match self {
            Self::Lossless => 32,
            Self::Lossy16 => 16,
            Self::Lossy8 => 8,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Self::Lossless => "lossless",
            Self::Lossy16 => "lossy16",
            Self::Lossy8 => "lossy8",
        }
    }
}

impl fmt::Display for Mode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Mode {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        [Self::Lossless, Self::Lossy16, Self::Lossy8]
            .into_iter()
            .find(|m| m.name() == s)
            .ok_or_else(|| format!("unknown mode '{s}', expected lossless, lossy16 or lossy8"))
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct PlaneRange {
    pub min: f64,
    pub max: f64,
    pub bits: u8,
}

impl PlaneRange {
    pub fn step(&self) -> f64 {
        let levels = ((1u32 << self.bits) - 1) as f64;
        (self.max - self.min) / levels
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Header {
    pub mode: Mode,
    pub calibration: Calibration,
    pub negative: bool,
    pub width: u32,
    pub height: u32,
    pub key: f64,
    pub white_point: f64,
    /// Bound on the relative error of `L + eps`: `2^(step / 2) - 1`.
    pub error_bound: f64,
    pub planes: Vec<PlaneRange>,
}

impl Header {
    fn len(&self) -> usize {
        41 + self.planes.len() * 17 + 32
    }
}

/// Parsed container. `extension` is `None` when the extension bytes are
/// missing or truncated.
#[derive(Clone, Debug, PartialEq)]
pub struct LayeredStream {
    pub header: Header,
    pub base: Vec<u8>,
    pub extension: Option<Vec<u8>>,
}

impl LayeredStream {
    pub fn to_bytes(&self) -> Vec<u8> {
        let h = &self.header;
        let mut out = Vec::with_capacity(h.len() + self.base.len() + self.extension.as_ref().map_or(0, Vec::len));
        out.extend_from_slice(MAGIC);
        out.extend_from_slice(&[
            VERSION,
            h.mode.code(),
            (h.calibration == Calibration::Absolute) as u8,
            h.negative as u8,
        ]);
        out.extend_from_slice(&h.width.to_le_bytes());
        out.extend_from_slice(&h.height.to_le_bytes());
        for v in [h.key, h.white_point, h.error_bound] {
            out.extend_from_slice(&v.to_le_bytes());
        }
        out.push(h.planes.len() as u8);
        for p in &h.planes {
            out.extend_from_slice(&p.min.to_le_bytes());
            out.extend_from_slice(&p.max.to_le_bytes());
            out.push(p.bits);
        }
        let base_offset = h.len() as u64;
        let ext = self.extension.as_deref().unwrap_or(&[]);
        let ext_offset = base_offset + self.base.len() as u64;
        for v in [base_offset, self.base.len() as u64, ext_offset, ext.len() as u64] {
            out.extend_from_slice(&v.to_le_bytes());
        }
        out.extend_from_slice(&self.base);
        out.extend_from_slice(ext);
        out
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self, LayeredError> {
        let corrupt = |what: &str| LayeredError::CorruptStream(what.to_string());
        let get = |at: usize, n: usize| bytes.get(at..at + n).ok_or_else(|| corrupt("header is truncated"));
        let f64_at = |at: usize| get(at, 8).map(|b| f64::from_le_bytes(b.try_into().unwrap()));
        let u32_at = |at: usize| get(at, 4).map(|b| u32::from_le_bytes(b.try_into().unwrap()));
        let u64_at = |at: usize| get(at, 8).map(|b| u64::from_le_bytes(b.try_into().unwrap()));

        if get(0, 4)? != MAGIC {
            return Err(corrupt("missing HDRL magic"));
        }
        let fixed = get(4, 4)?;
        if fixed[0] != VERSION {
            return Err(corrupt("unsupported version"));
        }
        let mode = Mode::from_code(fixed[1]).ok_or_else(|| corrupt("unknown mode"))?;
        let calibration = match fixed[2] {
            0 => Calibration::Relative,
            1 => Calibration::Absolute,
            _ => return Err(corrupt("unknown calibration")),
        };
        let negative = match fixed[3] {
            0 => false,
            1 => true,
            _ => return Err(corrupt("unknown flags")),
        };
        let (width, height) = (u32_at(8)?, u32_at(12)?);
        let (key, white_point, error_bound) = (f64_at(16)?, f64_at(24)?, f64_at(32)?);
        let count = get(40, 1)?[0] as usize;
        let expected_planes = if mode == Mode::Lossless { 0 } else { 3 };
        if count != expected_planes {
            return Err(corrupt("wrong plane count for mode"));
        }
        let mut planes = Vec::with_capacity(count);
        for i in 0..count {
            let at = 41 + i * 17;
            let p = PlaneRange { min: f64_at(at)?, max: f64_at(at + 8)?, bits: get(at + 16, 1)?[0] };
            if !(p.min.is_finite() && p.max.is_finite() && p.min <= p.max) || p.bits != mode.bits() {
                return Err(corrupt("bad plane range"));
            }
            planes.push(p);
        }
        let header = Header { mode, calibration, negative, width, height, key, white_point, error_bound, planes };
        let at = 41 + count * 17;
        let (base_offset, base_len, ext_offset, ext_len) =
            (u64_at(at)?, u64_at(at + 8)?, u64_at(at + 16)?, u64_at(at + 24)?);
        if base_offset != header.len() as u64 || ext_offset != base_offset.saturating_add(base_len) {
            return Err(corrupt("inconsistent layer offsets"));
        }
        let base_end =
            usize::try_from(base_offset.saturating_add(base_len)).map_err(|_| corrupt("base length overflows"))?;
        let base =
            bytes.get(base_offset as usize..base_end).ok_or_else(|| corrupt("base layer is truncated"))?.to_vec();
        let extension = usize::try_from(ext_offset.saturating_add(ext_len))
            .ok()
            .and_then(|end| bytes.get(base_end..end))
            .filter(|e| !e.is_empty())
            .map(<[u8]>::to_vec);
        Ok(Self { header, base, extension })
    }

    /// Decodes the base layer alone.
    pub fn base_image(&self) -> Result<SdrImage, LayeredError> {
        Ok(read_ppm(&self.base)?)
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct PackParams {
    pub mode: Mode,
    pub tonemap: GlobalParams,
}

impl Default for PackParams {
    fn default() -> Self {
        Self { mode: Mode::Lossless, tonemap: GlobalParams::default() }
    }
}

fn base_layer(img: &HdrImage, cs: &ColorSpace, tm: GlobalParams) -> Result<SdrImage, LayeredError> {
    let clipped;
    let src = if img.allows_negative() {
        let data = img.data().iter().map(|v| v.max(0.0)).collect();
        clipped = HdrImage::new(img.width(), img.height(), data).expect("clamped samples are valid");
        &clipped
    } else {
        img
    };
    tonemap_global(src, cs, tm)
        .map(|r| r.sdr)
        .map_err(|e| LayeredError::CorruptStream(format!("tone mapping failed: {e}")))
}

/// Display-linear base RGB per pixel.
fn base_linear(base: &SdrImage) -> Vec<[f64; 3]> {
    decode_display(base).chunks_exact(3).map(|c| [c[0], c[1], c[2]]).collect()
}

fn chroma(rgb: [f64; 3]) -> [f64; 2] {
    let s = rgb[0] + rgb[1] + rgb[2];
    if s > 0.0 {
        [rgb[0] / s, rgb[1] / s]
    } else {
        [1.0 / 3.0; 2]
    }
}

/// Residual planes `[r, dx, dy]` of `img` given the decoded base.
fn residuals(img: &HdrImage, base: &[[f64; 3]], cs: &ColorSpace) -> [Vec<f64>; 3] {
    let n = base.len();
    let mut out = [Vec::with_capacity(n), Vec::with_capacity(n), Vec::with_capacity(n)];
    for (px, b) in img.pixels().zip(base) {
        let rgb = widen(px).map(|v| v.max(0.0));
        let l = cs.luminance_of(rgb);
        let lb = cs.luminance_of(*b);
        out[0].push(((l + EPSILON) / (lb + EPSILON)).log2());
        let (c, cb) = (if rgb.iter().sum::<f64>() > 0.0 { chroma(rgb) } else { chroma(*b) }, chroma(*b));
        out[1].push(c[0] - cb[0]);
        out[2].push(c[1] - cb[1]);
    }
    out
}

fn quantize(values: &[f64], bits: u8) -> (PlaneRange, Vec<u8>) {
    let min = values.iter().cloned().fold(f64::INFINITY, f64::min);
    let max = values.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let (min, max) = if values.is_empty() { (0.0, 0.0) } else { (min, max) };
    let range = PlaneRange { min, max, bits };
    let levels = ((1u32 << bits) - 1) as f64;
    let span = max - min;
    let mut bytes = Vec::with_capacity(values.len() * bits as usize / 8);
    let mut high = Vec::new();
    for &v in values {
        let q = if span > 0.0 { ((v - min) / span * levels).round() as u32 } else { 0 };
        bytes.push(q as u8);
        if bits == 16 {
            high.push((q >> 8) as u8);
        }
    }
    bytes.extend(high);
    (range, bytes)
}

fn dequantize(range: &PlaneRange, bytes: &[u8], n: usize) -> Vec<f64> {
    let step = range.step();
    (0..n)
        .map(|i| {
            let q = if range.bits == 16 { bytes[i] as u32 | (bytes[n + i] as u32) << 8 } else { bytes[i] as u32 };
            if step > 0.0 {
                range.min + q as f64 * step
            } else {
                range.min
            }
        })
        .collect()
}

fn push_block(ext: &mut Vec<u8>, data: &[u8]) {
    let block = entropy::encode(data);
    ext.extend_from_slice(&(block.len() as u32).to_le_bytes());
    ext.extend_from_slice(&block);
}

fn read_blocks(ext: &[u8], sizes: &[usize]) -> Option<Vec<Vec<u8>>> {
    let mut pos = 0;
    let mut out = Vec::with_capacity(sizes.len());
    for &size in sizes {
        let len = u32::from_le_bytes(ext.get(pos..pos + 4)?.try_into().ok()?) as usize;
        pos += 4;
        out.push(entropy::decode(ext.get(pos..pos.checked_add(len)?)?, size)?);
        pos += len;
    }
    (pos == ext.len()).then_some(out)
}

pub fn pack(img: &HdrImage, cs: &ColorSpace, params: PackParams) -> Result<LayeredStream, LayeredError> {
    let (w, h) = img.dims();
    let base_img = base_layer(img, cs, params.tonemap)?;
    let base = write_ppm(&base_img);
    let n = w * h;
    let mut ext = Vec::new();
    let mut planes = Vec::new();
    let mut error_bound = 0.0;
    match params.mode {
        Mode::Lossless => {
            let words: Vec<[u8; 4]> = img.data().iter().map(|v| v.to_le_bytes()).collect();
            for c in 0..3 {
                for k in 0..4 {
                    push_block(&mut ext, &words.iter().skip(c).step_by(3).map(|b| b[k]).collect::<Vec<u8>>());
                }
            }
        }
        Mode::Lossy16 | Mode::Lossy8 => {
            let res = residuals(img, &base_linear(&base_img), cs);
            for values in &res {
                let (range, bytes) = quantize(values, params.mode.bits());
                push_block(&mut ext, &bytes);
                planes.push(range);
            }
            error_bound = 2f64.powf(planes[0].step() / 2.0) - 1.0;
            debug_assert_eq!(res[0].len(), n);
        }
    }
    let header = Header {
        mode: params.mode,
        calibration: img.calibration(),
        negative: img.allows_negative(),
        width: w as u32,
        height: h as u32,
        key: params.tonemap.key,
        white_point: params.tonemap.white_point.unwrap_or(0.0),
        error_bound,
        planes,
    };
    Ok(LayeredStream { header, base, extension: Some(ext) })
}

pub fn unpack(stream: &LayeredStream, cs: &ColorSpace) -> Result<HdrImage, LayeredError> {
    let base = stream.base_image()?;
    let hd = &stream.header;
    if base.dims() != (hd.width as usize, hd.height as usize) {
        return Err(LayeredError::CorruptStream(format!(
            "base layer is {:?}, header says {}x{}",
            base.dims(),
            hd.width,
            hd.height
        )));
    }
    let ext = stream.extension.as_deref().ok_or(LayeredError::MissingExtension)?;
    let (w, h) = base.dims();
    let n = w * h;
    let image = match hd.mode {
        Mode::Lossless => {
            let blocks = read_blocks(ext, &[n; 12]).ok_or(LayeredError::MissingExtension)?;
            let data = (0..n * 3)
                .map(|i| {
                    let (p, c) = (i / 3, i % 3);
                    f32::from_le_bytes([0, 1, 2, 3].map(|k| blocks[c * 4 + k][p]))
                })
                .collect();
            let img = if hd.negative { HdrImage::with_negative(w, h, data) } else { HdrImage::new(w, h, data) };
            img.map_err(|e| LayeredError::CorruptStream(e.to_string()))?
        }
        Mode::Lossy16 | Mode::Lossy8 => {
            let size = n * hd.mode.bits() as usize / 8;
            let blocks = read_blocks(ext, &[size; 3]).ok_or(LayeredError::MissingExtension)?;
            let [r, dx, dy] = [0, 1, 2].map(|k| dequantize(&hd.planes[k], &blocks[k], n));
            let base_lin = base_linear(&base);
            let weights = cs.weights();
            let mut data = Vec::with_capacity(n * 3);
            for i in 0..n {
                let b = base_lin[i];
                let lb = cs.luminance_of(b);
                let l = (2f64.powf(r[i]) * (lb + EPSILON) - EPSILON).max(0.0);
                let cb = chroma(b);
                let (x, y) = (cb[0] + dx[i], cb[1] + dy[i]);
                let z = 1.0 - x - y;
                let denom = weights[0] * x + weights[1] * y + weights[2] * z;
                let rgb = if l == 0.0 {
                    [0.0; 3]
                } else if denom > 1e-9 {
                    [x, y, z].map(|c| (c * l / denom).max(0.0))
                } else {
                    [l; 3]
                };
                data.extend(rgb.map(|v| v as f32));
            }
            HdrImage::new(w, h, data).map_err(|e| LayeredError::CorruptStream(e.to_string()))?
        }
    };
    Ok(image.with_calibration(hd.calibration))
}

/// Zero-order entropies of log luminance coded directly and as a residual
/// against the base layer, both quantized with a step of `2^-8` log2 units.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct GainReport {
    pub direct_bits: f64,
    pub residual_bits: f64,
}

impl GainReport {
    pub fn gain(&self) -> f64 {
        self.direct_bits - self.residual_bits
    }
}

pub fn decorrelation_gain(img: &HdrImage, cs: &ColorSpace, tonemap: GlobalParams) -> Result<GainReport, LayeredError> {
    let base = base_lin_of(img, cs, tonemap)?;
    let q = |v: f64| (v * 256.0).round() as i64;
    let mut direct = Vec::with_capacity(base.len());
    let mut residual = Vec::with_capacity(base.len());
    for (px, b) in img.pixels().zip(&base) {
        let l = cs.luminance_of(widen(px).map(|v| v.max(0.0)));
        let lb = cs.luminance_of(*b);
        direct.push(q((l + EPSILON).log2()));
        residual.push(q(((l + EPSILON) / (lb + EPSILON)).log2()));
    }
    Ok(GainReport { direct_bits: entropy::entropy(&direct), residual_bits: entropy::entropy(&residual) })
}

fn base_lin_of(img: &HdrImage, cs: &ColorSpace, tonemap: GlobalParams) -> Result<Vec<[f64; 3]>, LayeredError> {
    Ok(base_linear(&base_layer(img, cs, tonemap)?))
}
