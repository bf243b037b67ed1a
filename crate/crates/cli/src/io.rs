//! File loading and atomic saving for the command handlers.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use anyhow::{anyhow, bail, Context, Result};
use hdrkit::formats::{read_hdr, read_pfm, read_ppm, write_hdr, write_pfm, write_ppm, FileFormat};
use hdrkit::tonemap::{decode_display, encode_display};
use hdrkit::{HdrImage, SdrImage, TransferTag};

pub fn resolve_format(path: &Path, explicit: Option<FileFormat>) -> Result<FileFormat> {
    match explicit {
        Some(f) => Ok(f),
        None => FileFormat::from_path(path)
            .ok_or_else(|| anyhow!("cannot tell the format of {} from its extension; use --format", path.display())),
    }
}

pub fn read_bytes(path: &Path) -> Result<Vec<u8>> {
    fs::read(path).with_context(|| format!("cannot read {}", path.display()))
}

/// Loads any supported file as linear RGB. 8-bit files are sRGB-decoded.
pub fn load_hdr(path: &Path, format: Option<FileFormat>) -> Result<HdrImage> {
    let fmt = resolve_format(path, format)?;
    let bytes = read_bytes(path)?;
    let ctx = || format!("reading {}", path.display());
    Ok(match fmt {
        FileFormat::Radiance => read_hdr(&bytes).with_context(ctx)?,
        FileFormat::Pfm => read_pfm(&bytes).with_context(ctx)?,
        FileFormat::Ppm => sdr_to_linear(&read_ppm(&bytes).with_context(ctx)?),
    })
}

pub fn load_sdr(path: &Path) -> Result<SdrImage> {
    let bytes = read_bytes(path)?;
    read_ppm(&bytes).with_context(|| format!("reading {}", path.display()))
}

pub fn sdr_to_linear(sdr: &SdrImage) -> HdrImage {
    let data = decode_display(sdr).into_iter().map(|v| v as f32).collect();
    HdrImage::new(sdr.width(), sdr.height(), data).expect("decoded codes are finite and non-negative")
}

pub fn encode_hdr(img: &HdrImage, fmt: FileFormat, rle: bool) -> Result<Vec<u8>> {
    Ok(match fmt {
        FileFormat::Radiance => write_hdr(img, rle)?,
        FileFormat::Pfm => write_pfm(img, true),
        FileFormat::Ppm => write_ppm(&encode_display(img, TransferTag::Srgb).0),
    })
}

/// Writes through a temporary file in the target directory, then renames.
pub fn save(path: &Path, bytes: &[u8]) -> Result<()> {
    let dir = match path.parent() {
        Some(p) if !p.as_os_str().is_empty() => p.to_path_buf(),
        _ => PathBuf::from("."),
    };
    let mut tmp =
        tempfile::NamedTempFile::new_in(&dir).with_context(|| format!("cannot write into {}", dir.display()))?;
    tmp.write_all(bytes).with_context(|| format!("cannot write {}", path.display()))?;
    tmp.as_file().sync_all().ok();
    tmp.persist(path).map_err(|e| anyhow!("cannot write {}: {}", path.display(), e.error))?;
    Ok(())
}

pub fn require_file(path: &Path) -> Result<()> {
    if !path.is_file() {
        bail!("input file {} does not exist", path.display());
    }
    Ok(())
}
