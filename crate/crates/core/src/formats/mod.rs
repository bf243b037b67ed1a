//! File codecs: Radiance RGBE/XYZE, portable float map and binary PPM.
//!
//! All readers work on in-memory byte slices and never index past the end
//! of the input; every failure reports the byte offset where it occurred.

mod pfm;
mod ppm;
mod radiance;

use std::path::Path;

pub use pfm::{read_pfm, read_pfm_with_header, write_pfm, PfmHeader};
pub use ppm::{read_ppm, write_ppm};
pub use radiance::{
    read_hdr, read_hdr_with_header, write_hdr, write_hdr_xyze, Orientation, PixelFormat, RadianceHeader,
};

use crate::error::FormatError;

/// Supported file formats, dispatched by extension.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum FileFormat {
    Radiance,
    Pfm,
    Ppm,
}

impl FileFormat {
    pub fn from_path(path: &Path) -> Option<Self> {
        let ext = path.extension()?.to_str()?.to_ascii_lowercase();
        Self::from_name(&ext)
    }

    /// Accepts extensions and format names (`hdr`, `pic`, `pfm`, `ppm`).
    pub fn from_name(name: &str) -> Option<Self> {
        match name {
            "hdr" | "pic" | "radiance" => Some(Self::Radiance),
            "pfm" => Some(Self::Pfm),
            "ppm" => Some(Self::Ppm),
            _ => None,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Self::Radiance => "radiance",
            Self::Pfm => "pfm",
            Self::Ppm => "ppm",
        }
    }
}

/// Byte cursor shared by the header parsers.
pub(crate) struct Cursor<'a> {
    pub bytes: &'a [u8],
    pub pos: usize,
}

impl<'a> Cursor<'a> {
    pub fn new(bytes: &'a [u8]) -> Self {
        Self { bytes, pos: 0 }
    }

    pub fn remaining(&self) -> usize {
        self.bytes.len() - self.pos
    }

    pub fn truncated(&self) -> FormatError {
        FormatError::TruncatedFile { offset: self.bytes.len() }
    }

    pub fn byte(&mut self) -> Result<u8, FormatError> {
        let b = *self.bytes.get(self.pos).ok_or_else(|| self.truncated())?;
        self.pos += 1;
        Ok(b)
    }

    pub fn take(&mut self, n: usize) -> Result<&'a [u8], FormatError> {
        if n > self.remaining() {
            return Err(self.truncated());
        }
        let s = &self.bytes[self.pos..self.pos + n];
        self.pos += n;
        Ok(s)
    }

    /// Reads up to (and consumes) the next `\n`, returning the line without it.
    pub fn line(&mut self) -> Result<&'a [u8], FormatError> {
        let rest = &self.bytes[self.pos..];
        let end = rest.iter().position(|&b| b == b'\n').ok_or_else(|| self.truncated())?;
        self.pos += end + 1;
        Ok(&rest[..end])
    }

    /// Skips whitespace and `#` comments, then reads one token of
    /// non-whitespace bytes.
    pub fn token(&mut self) -> Result<(&'a str, usize), FormatError> {
        loop {
            let b = *self.bytes.get(self.pos).ok_or_else(|| self.truncated())?;
            if b.is_ascii_whitespace() {
                self.pos += 1;
            } else if b == b'#' {
                while self.byte()? != b'\n' {}
            } else {
                break;
            }
        }
        let start = self.pos;
        while self.pos < self.bytes.len() && !self.bytes[self.pos].is_ascii_whitespace() {
            self.pos += 1;
        }
        let tok = std::str::from_utf8(&self.bytes[start..self.pos])
            .map_err(|_| FormatError::BadHeader { offset: start, reason: "non-ASCII header token".into() })?;
        Ok((tok, start))
    }

    /// Parses a positive dimension token.
    pub fn dimension(&mut self) -> Result<usize, FormatError> {
        let (tok, offset) = self.token()?;
        match tok.parse::<usize>() {
            Ok(v) if v > 0 => Ok(v),
            _ => Err(FormatError::BadHeader { offset, reason: format!("bad dimension {tok:?}") }),
        }
    }

    /// Consumes the single whitespace byte that ends a binary-format header.
    pub fn header_terminator(&mut self) -> Result<(), FormatError> {
        let offset = self.pos;
        if !self.byte()?.is_ascii_whitespace() {
            return Err(FormatError::BadHeader { offset, reason: "missing whitespace before raster".into() });
        }
        Ok(())
    }
}

/// `width * height * channels`, or a header error if it overflows.
pub(crate) fn sample_count(width: usize, height: usize, channels: usize, offset: usize) -> Result<usize, FormatError> {
    width
        .checked_mul(height)
        .and_then(|n| n.checked_mul(channels))
        .filter(|&n| n <= isize::MAX as usize / 8)
        .ok_or(FormatError::BadHeader { offset, reason: "image dimensions overflow".into() })
}
