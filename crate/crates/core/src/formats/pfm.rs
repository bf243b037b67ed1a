//! Portable float map: `PF` (RGB) or `Pf` (gray), dimensions, then a scale
//! whose sign gives the byte order (negative = little-endian). Scanlines are
//! stored bottom to top.

use super::{sample_count, Cursor};
use crate::error::FormatError;
use crate::image::HdrImage;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct PfmHeader {
    pub color: bool,
    pub width: usize,
    pub height: usize,
    pub scale: f32,
    pub data_offset: usize,
}

impl PfmHeader {
    pub fn little_endian(&self) -> bool {
        self.scale < 0.0
    }
}

fn parse_header(cur: &mut Cursor<'_>) -> Result<PfmHeader, FormatError> {
    let (magic, _) = cur.token().map_err(|_| FormatError::NotPfm { offset: 0 })?;
    let color = match magic {
        "PF" => true,
        "Pf" => false,
        _ => return Err(FormatError::NotPfm { offset: 0 }),
    };
    let width = cur.dimension()?;
    let height = cur.dimension()?;
    let (tok, offset) = cur.token()?;
    let scale: f32 = tok.parse().map_err(|_| FormatError::BadScale { offset })?;
    if scale == 0.0 || !scale.is_finite() {
        return Err(FormatError::BadScale { offset });
    }
    cur.header_terminator()?;
    Ok(PfmHeader { color, width, height, scale, data_offset: cur.pos })
}

/// Parses a PFM file. Samples are multiplied by `|scale|` unless it is 1,
/// which keeps unit-scale files bit-exact. Gray files expand to R = G = B.
pub fn read_pfm_with_header(bytes: &[u8]) -> Result<(PfmHeader, HdrImage), FormatError> {
    let mut cur = Cursor::new(bytes);
    let header = parse_header(&mut cur)?;
    let channels = if header.color { 3 } else { 1 };
    let n = sample_count(header.width, header.height, channels, header.data_offset)?;
    let payload = cur.take(n.checked_mul(4).ok_or_else(|| cur.truncated())?)?;

    let le = header.little_endian();
    let magnitude = header.scale.abs();
    let (w, h) = (header.width, header.height);
    let mut data = vec![0f32; w * h * 3];
    for (i, chunk) in payload.chunks_exact(4).enumerate() {
        let b = [chunk[0], chunk[1], chunk[2], chunk[3]];
        let mut v = if le { f32::from_le_bytes(b) } else { f32::from_be_bytes(b) };
        if magnitude != 1.0 {
            v *= magnitude;
        }
        let pixel = i / channels;
        let (x, file_row) = (pixel % w, pixel / w);
        let y = h - 1 - file_row;
        let dst = (y * w + x) * 3;
        if header.color {
            data[dst + i % 3] = v;
        } else {
            data[dst..dst + 3].fill(v);
        }
    }
    let image = HdrImage::from_samples(w, h, data)
        .map_err(|e| FormatError::BadImage { offset: header.data_offset, reason: e.to_string() })?;
    Ok((header, image))
}

pub fn read_pfm(bytes: &[u8]) -> Result<HdrImage, FormatError> {
    read_pfm_with_header(bytes).map(|(_, img)| img)
}

/// Writes a color PFM with unit scale, negative when little-endian.
pub fn write_pfm(img: &HdrImage, little_endian: bool) -> Vec<u8> {
    let scale = if little_endian { "-1.0" } else { "1.0" };
    let mut out = format!("PF\n{} {}\n{}\n", img.width(), img.height(), scale).into_bytes();
    out.reserve(img.data().len() * 4);
    let row_len = img.width() * 3;
    for y in (0..img.height()).rev() {
        for &v in &img.data()[y * row_len..(y + 1) * row_len] {
            out.extend_from_slice(&if little_endian { v.to_le_bytes() } else { v.to_be_bytes() });
        }
    }
    out
}
