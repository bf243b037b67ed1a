//! Radiance picture format (`.hdr` / `.pic`).
//!
//! Header: a `#?RADIANCE` signature line, `VARIABLE=value` lines, a blank
//! line, then a resolution line such as `-Y 480 +X 640`. Each scanline is
//! either flat 4-byte RGBE/XYZE pixels (optionally with old-style
//! `1 1 1 n` repeat markers) or adaptive run-length coded, where the line
//! starts with `2 2 hi lo` and the four byte planes follow one after another.

use super::{sample_count, Cursor};
use crate::color::ColorSpace;
use crate::encodings::{rgbe_decode, rgbe_encode, RgbePixel};
use crate::error::{EncodingError, FormatError};
use crate::image::HdrImage;

const MIN_RLE_WIDTH: usize = 8;
const MAX_RLE_WIDTH: usize = 0x7fff;
const MIN_RUN: usize = 4;
const MAX_PIXELS_PER_BYTE: usize = 64;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Default)]
pub enum PixelFormat {
    #[default]
    Rgbe,
    Xyze,
}

impl PixelFormat {
    fn header_value(self) -> &'static str {
        match self {
            PixelFormat::Rgbe => "32-bit_rle_rgbe",
            PixelFormat::Xyze => "32-bit_rle_xyze",
        }
    }
}

/// Scanline layout declared by the resolution line.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct Orientation {
    /// Scanlines run along X (the usual case) rather than along Y.
    pub rows_along_x: bool,
    /// First scanline is the top row (or left column when `rows_along_x` is false).
    pub top_to_bottom: bool,
    /// Pixels within a scanline go left to right (or top to bottom).
    pub left_to_right: bool,
}

impl Orientation {
    pub const STANDARD: Orientation = Orientation { rows_along_x: true, top_to_bottom: true, left_to_right: true };
}

#[derive(Clone, Debug, PartialEq)]
pub struct RadianceHeader {
    pub format: PixelFormat,
    /// Product of every `EXPOSURE=` line; 1 when absent.
    pub exposure: f64,
    pub width: usize,
    pub height: usize,
    pub orientation: Orientation,
    /// Offset of the first pixel byte.
    pub data_offset: usize,
}

fn parse_header(cur: &mut Cursor<'_>) -> Result<RadianceHeader, FormatError> {
    let sig = cur.line().map_err(|_| FormatError::NotRadiance { offset: 0 })?;
    if !(sig.starts_with(b"#?RADIANCE") || sig.starts_with(b"#?RGBE")) {
        return Err(FormatError::NotRadiance { offset: 0 });
    }
    let mut format = None;
    let mut exposure = 1.0f64;
    loop {
        let offset = cur.pos;
        let line = cur.line()?;
        if line.is_empty() {
            break;
        }
        let text = String::from_utf8_lossy(line);
        if let Some(v) = text.strip_prefix("FORMAT=") {
            format = Some(match v.trim() {
                "32-bit_rle_rgbe" => PixelFormat::Rgbe,
                "32-bit_rle_xyze" => PixelFormat::Xyze,
                other => return Err(FormatError::BadHeader { offset, reason: format!("unsupported FORMAT {other}") }),
            });
        } else if let Some(v) = text.strip_prefix("EXPOSURE=") {
            let e: f64 = v
                .trim()
                .parse()
                .ok()
                .filter(|e: &f64| e.is_finite() && *e > 0.0)
                .ok_or_else(|| FormatError::BadHeader { offset, reason: "bad EXPOSURE".into() })?;
            exposure *= e;
        }
    }
    let format = format.ok_or(FormatError::BadHeader { offset: cur.pos, reason: "missing FORMAT".into() })?;

    let res_offset = cur.pos;
    let line = cur.line()?;
    let text = String::from_utf8_lossy(line);
    let bad = || FormatError::BadHeader { offset: res_offset, reason: format!("bad resolution line {text:?}") };
    let parts: Vec<&str> = text.split_whitespace().collect();
    if parts.len() != 4 {
        return Err(bad());
    }
    let axis = |s: &str| -> Option<(bool, char)> {
        let mut c = s.chars();
        let sign = match c.next()? {
            '+' => true,
            '-' => false,
            _ => return None,
        };
        let a = c.next()?;
        if c.next().is_some() || !(a == 'X' || a == 'Y') {
            return None;
        }
        Some((sign, a))
    };
    let (s1, a1) = axis(parts[0]).ok_or_else(bad)?;
    let (s2, a2) = axis(parts[2]).ok_or_else(bad)?;
    if a1 == a2 {
        return Err(bad());
    }
    let n1: usize = parts[1].parse().ok().filter(|&n| n > 0).ok_or_else(bad)?;
    let n2: usize = parts[3].parse().ok().filter(|&n| n > 0).ok_or_else(bad)?;
    let (orientation, width, height) = if a1 == 'Y' {
        // -Y: first scanline at the top; +X: pixels left to right.
        (Orientation { rows_along_x: true, top_to_bottom: !s1, left_to_right: s2 }, n2, n1)
    } else {
        // Column scanlines: +X puts the first column on the left, -Y walks
        // each column downward.
        (Orientation { rows_along_x: false, top_to_bottom: s1, left_to_right: !s2 }, n1, n2)
    };
    sample_count(width, height, 4, res_offset)?;
    Ok(RadianceHeader { format, exposure, width, height, orientation, data_offset: cur.pos })
}

/// Decodes one scanline of `len` pixels into `out` (4 bytes per pixel).
fn read_scanline(cur: &mut Cursor<'_>, len: usize, out: &mut [u8]) -> Result<(), FormatError> {
    let start = cur.pos;
    let head = cur.take(4.min(cur.remaining()))?;
    let adaptive = (MIN_RLE_WIDTH..=MAX_RLE_WIDTH).contains(&len)
        && head.len() == 4
        && head[0] == 2
        && head[1] == 2
        && head[2] & 0x80 == 0;
    if !adaptive {
        cur.pos = start;
        return read_flat(cur, len, out);
    }
    if ((head[2] as usize) << 8 | head[3] as usize) != len {
        return Err(FormatError::CorruptRle { offset: start });
    }
    for channel in 0..4 {
        let mut x = 0;
        while x < len {
            let at = cur.pos;
            let count = cur.byte()? as usize;
            if count > 128 {
                let run = count - 128;
                if x + run > len {
                    return Err(FormatError::CorruptRle { offset: at });
                }
                let v = cur.byte()?;
                for px in &mut out[x * 4..(x + run) * 4].chunks_exact_mut(4) {
                    px[channel] = v;
                }
                x += run;
            } else {
                if count == 0 || x + count > len {
                    return Err(FormatError::CorruptRle { offset: at });
                }
                let lit = cur.take(count)?;
                for (i, &v) in lit.iter().enumerate() {
                    out[(x + i) * 4 + channel] = v;
                }
                x += count;
            }
        }
    }
    Ok(())
}

/// Flat pixels with old-style repeat markers `(1, 1, 1, n)`.
fn read_flat(cur: &mut Cursor<'_>, len: usize, out: &mut [u8]) -> Result<(), FormatError> {
    let mut x = 0;
    let mut shift = 0u32;
    while x < len {
        let at = cur.pos;
        let p = cur.take(4)?;
        if p[0] == 1 && p[1] == 1 && p[2] == 1 {
            if x == 0 || shift > 16 {
                return Err(FormatError::CorruptRle { offset: at });
            }
            let count = (p[3] as usize) << shift;
            if x + count > len {
                return Err(FormatError::CorruptRle { offset: at });
            }
            let prev: [u8; 4] = out[(x - 1) * 4..x * 4].try_into().unwrap();
            for px in out[x * 4..(x + count) * 4].chunks_exact_mut(4) {
                px.copy_from_slice(&prev);
            }
            x += count;
            shift += 8;
        } else {
            out[x * 4..x * 4 + 4].copy_from_slice(p);
            x += 1;
            shift = 0;
        }
    }
    Ok(())
}

/// Parses a Radiance file, returning its header and the image.
///
/// Pixel values are divided by the accumulated `EXPOSURE` product, undoing
/// the multiplier the header says was applied. XYZE files are converted to
/// linear BT.709 RGB and may contain negative samples.
pub fn read_hdr_with_header(bytes: &[u8]) -> Result<(RadianceHeader, HdrImage), FormatError> {
    let mut cur = Cursor::new(bytes);
    let header = parse_header(&mut cur)?;
    let (w, h) = (header.width, header.height);
    let o = header.orientation;
    let (scanlines, len) = if o.rows_along_x { (h, w) } else { (w, h) };

    // Adaptive RLE needs at least 4 + 8 * ceil(len / 127) bytes per line.
    let min_line = if (MIN_RLE_WIDTH..=MAX_RLE_WIDTH).contains(&len) { 4 + 8 * len.div_ceil(127) } else { 4 };
    if scanlines.saturating_mul(min_line) > cur.remaining() {
        return Err(cur.truncated());
    }
    // No scanline encoding reaches 64 pixels per byte except pathological
    // chains of old-style repeats; refuse those before allocating.
    if (w * h) / MAX_PIXELS_PER_BYTE > cur.remaining() {
        return Err(cur.truncated());
    }

    let mut raw = vec![0u8; w * h * 4];
    let mut line = vec![0u8; len * 4];
    for s in 0..scanlines {
        read_scanline(&mut cur, len, &mut line)?;
        for (i, px) in line.chunks_exact(4).enumerate() {
            let (x, y) = if o.rows_along_x {
                let y = if o.top_to_bottom { s } else { h - 1 - s };
                let x = if o.left_to_right { i } else { w - 1 - i };
                (x, y)
            } else {
                let x = if o.top_to_bottom { s } else { w - 1 - s };
                let y = if o.left_to_right { i } else { h - 1 - i };
                (x, y)
            };
            let d = (y * w + x) * 4;
            raw[d..d + 4].copy_from_slice(px);
        }
    }

    let inv_exposure = 1.0 / header.exposure;
    let cs = ColorSpace::rec709();
    let mut data = Vec::with_capacity(w * h * 3);
    for px in raw.chunks_exact(4) {
        let v = rgbe_decode(RgbePixel::from_bytes([px[0], px[1], px[2], px[3]]));
        let v = [v[0] as f64 * inv_exposure, v[1] as f64 * inv_exposure, v[2] as f64 * inv_exposure];
        let v = match header.format {
            PixelFormat::Rgbe => v,
            PixelFormat::Xyze => cs.xyz_to_rgb_pixel(v),
        };
        data.extend(v.iter().map(|&c| c as f32));
    }
    let image = HdrImage::from_samples(w, h, data)
        .map_err(|e| FormatError::BadImage { offset: header.data_offset, reason: e.to_string() })?;
    Ok((header, image))
}

pub fn read_hdr(bytes: &[u8]) -> Result<HdrImage, FormatError> {
    read_hdr_with_header(bytes).map(|(_, img)| img)
}

/// Writes an RGBE file with the canonical `-Y h +X w` orientation. No
/// `EXPOSURE` line is emitted.
pub fn write_hdr(img: &HdrImage, use_rle: bool) -> Result<Vec<u8>, FormatError> {
    let header_len = header_bytes(img, PixelFormat::Rgbe).len();
    let pixels = img
        .pixels()
        .enumerate()
        .map(|(i, p)| {
            rgbe_encode(p).map_err(|e| match e {
                EncodingError::NegativeInRgbe => FormatError::NegativeInRgbe { offset: header_len + 4 * i },
                other => FormatError::BadImage { offset: header_len + 4 * i, reason: other.to_string() },
            })
        })
        .collect::<Result<Vec<_>, _>>()?;
    Ok(write_pixels(img, PixelFormat::Rgbe, &pixels, use_rle))
}

/// Writes an XYZE file, converting from RGB in `cs`. Accepts negative RGB.
pub fn write_hdr_xyze(img: &HdrImage, use_rle: bool, cs: &ColorSpace) -> Result<Vec<u8>, FormatError> {
    let header_len = header_bytes(img, PixelFormat::Xyze).len();
    let pixels = img
        .pixels()
        .enumerate()
        .map(|(i, p)| {
            crate::encodings::rgb_to_xyze([p[0] as f64, p[1] as f64, p[2] as f64], cs)
                .map_err(|e| FormatError::BadImage { offset: header_len + 4 * i, reason: e.to_string() })
        })
        .collect::<Result<Vec<_>, _>>()?;
    Ok(write_pixels(img, PixelFormat::Xyze, &pixels, use_rle))
}

fn header_bytes(img: &HdrImage, format: PixelFormat) -> Vec<u8> {
    format!("#?RADIANCE\nFORMAT={}\n\n-Y {} +X {}\n", format.header_value(), img.height(), img.width()).into_bytes()
}

fn write_pixels(img: &HdrImage, format: PixelFormat, pixels: &[RgbePixel], use_rle: bool) -> Vec<u8> {
    let mut out = header_bytes(img, format);
    let w = img.width();
    let rle = use_rle && (MIN_RLE_WIDTH..=MAX_RLE_WIDTH).contains(&w);
    for row in pixels.chunks_exact(w.max(1)) {
        if rle {
            out.extend_from_slice(&[2, 2, (w >> 8) as u8, (w & 0xff) as u8]);
            let mut plane = vec![0u8; w];
            for channel in 0..4 {
                for (dst, p) in plane.iter_mut().zip(row) {
                    *dst = p.to_bytes()[channel];
                }
                encode_plane(&plane, &mut out);
            }
        } else {
            for p in row {
                out.extend_from_slice(&p.to_bytes());
            }
        }
    }
    out
}

/// Adaptive RLE of one byte plane: runs of at least four equal bytes become
/// `(128 + n, value)`, everything else goes out as literal dumps of up to
/// 128 bytes.
fn encode_plane(plane: &[u8], out: &mut Vec<u8>) {
    let n = plane.len();
    let mut i = 0;
    while i < n {
        // Find the next run of MIN_RUN or more.
        let mut run_start = i;
        let mut run_len = 0;
        while run_start < n {
            run_len = 1;
            while run_start + run_len < n && run_len < 127 && plane[run_start + run_len] == plane[run_start] {
                run_len += 1;
            }
            if run_len >= MIN_RUN {
                break;
            }
            run_start += run_len;
        }
        if run_len < MIN_RUN {
            run_start = n;
        }
        // Literals before the run.
        while i < run_start {
            let count = (run_start - i).min(128);
            out.push(count as u8);
            out.extend_from_slice(&plane[i..i + count]);
            i += count;
        }
        if run_start < n {
            out.push(128 + run_len as u8);
            out.push(plane[run_start]);
            i = run_start + run_len;
        }
    }
}
