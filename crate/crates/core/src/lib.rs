//! HDR imaging toolkit: multi-exposure acquisition, compact pixel encodings
//! and file formats, tone mapping with color correction, inverse tone
//! mapping, a two-layer backward-compatible codec and full-reference HDR
//! quality indices.

pub mod color;
pub mod encodings;
pub mod error;
pub mod expand;
pub mod filter;
pub mod formats;
pub mod image;
pub mod layered;
pub mod merge;
pub mod quality;
pub mod synth;
pub mod tonemap;
pub mod transfer;

pub use color::{luminance, rgb_to_xyz, xyz_to_rgb, ColorSpace};
pub use error::Error;
pub use image::{Calibration, HdrImage, Mask, Plane, SdrImage, TransferTag};
