//! Raster types shared by every stage of the pipeline.
//!
//! All rasters are row-major with a top-left origin. Color rasters are
//! interleaved RGB.

use crate::error::ImageError;

/// Whether sample values carry absolute luminance (nits) or only relative
/// radiance. Carried as metadata and never inferred from the data.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Default)]
pub enum Calibration {
    #[default]
    Relative,
    Absolute,
}

/// Linear floating-point RGB raster.
#[derive(Clone, Debug, PartialEq)]
pub struct HdrImage {
    width: usize,
    height: usize,
    data: Vec<f32>,
    calibration: Calibration,
    allow_negative: bool,
}

impl HdrImage {
    /// Builds an image from interleaved RGB samples.
    ///
    /// Rejects non-finite samples, and negative samples unless
    /// [`HdrImage::with_negative`] is used instead.
    pub fn new(width: usize, height: usize, data: Vec<f32>) -> Result<Self, ImageError> {
        Self::build(width, height, data, false)
    }

    /// Like [`HdrImage::new`] but accepts negative samples, as produced by
    /// wide-gamut conversions.
    pub fn with_negative(width: usize, height: usize, data: Vec<f32>) -> Result<Self, ImageError> {
        Self::build(width, height, data, true)
    }

    /// Accepts negative samples and records whether any are present.
    pub fn from_samples(width: usize, height: usize, data: Vec<f32>) -> Result<Self, ImageError> {
        let negative = data.iter().any(|&v| v < 0.0);
        Self::build(width, height, data, negative)
    }

    fn build(width: usize, height: usize, data: Vec<f32>, allow_negative: bool) -> Result<Self, ImageError> {
        let expected = width
            .checked_mul(height)
            .and_then(|n| n.checked_mul(3))
            .ok_or(ImageError::DimensionMismatch { expected: usize::MAX, actual: data.len() })?;
        if expected != data.len() {
            return Err(ImageError::DimensionMismatch { expected, actual: data.len() });
        }
        for (index, &v) in data.iter().enumerate() {
            if !v.is_finite() {
                return Err(ImageError::NonFiniteSample { index });
            }
            if !allow_negative && v < 0.0 {
                return Err(ImageError::NegativeSample { index });
            }
        }
        Ok(Self { width, height, data, calibration: Calibration::Relative, allow_negative })
    }

    /// Black image.
    pub fn zeros(width: usize, height: usize) -> Self {
        Self {
            width,
            height,
            data: vec![0.0; width * height * 3],
            calibration: Calibration::Relative,
            allow_negative: false,
        }
    }

    /// Builds an image by evaluating `f(x, y)` at every pixel.
    pub fn from_fn(
        width: usize,
        height: usize,
        mut f: impl FnMut(usize, usize) -> [f32; 3],
    ) -> Result<Self, ImageError> {
        let mut data = Vec::with_capacity(width * height * 3);
        for y in 0..height {
            for x in 0..width {
                data.extend_from_slice(&f(x, y));
            }
        }
        Self::new(width, height, data)
    }

    pub fn with_calibration(mut self, calibration: Calibration) -> Self {
        self.calibration = calibration;
        self
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn dims(&self) -> (usize, usize) {
        (self.width, self.height)
    }

    pub fn len(&self) -> usize {
        self.width * self.height
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn calibration(&self) -> Calibration {
        self.calibration
    }

    pub fn allows_negative(&self) -> bool {
        self.allow_negative
    }

    pub fn data(&self) -> &[f32] {
        &self.data
    }

    pub fn into_data(self) -> Vec<f32> {
        self.data
    }

    pub fn pixel(&self, x: usize, y: usize) -> [f32; 3] {
        let i = (y * self.width + x) * 3;
        [self.data[i], self.data[i + 1], self.data[i + 2]]
    }

    pub fn pixels(&self) -> impl Iterator<Item = [f32; 3]> + '_ {
        self.data.chunks_exact(3).map(|p| [p[0], p[1], p[2]])
    }

    /// Multiplies every sample by `factor` and switches to `calibration`.
    pub fn scaled(&self, factor: f32, calibration: Calibration) -> Result<Self, ImageError> {
        let data = self.data.iter().map(|v| v * factor).collect();
        let img = Self::build(self.width, self.height, data, self.allow_negative)?;
        Ok(img.with_calibration(calibration))
    }
}

/// Which transfer function produced the 8-bit codes of an [`SdrImage`].
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Default)]
pub enum TransferTag {
    Gamma22,
    #[default]
    Srgb,
    PqNormalized,
}

/// 8-bit-per-channel interleaved RGB raster.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct SdrImage {
    width: usize,
    height: usize,
    data: Vec<u8>,
    transfer: TransferTag,
}

impl SdrImage {
    pub fn new(width: usize, height: usize, data: Vec<u8>, transfer: TransferTag) -> Result<Self, ImageError> {
        let expected = width * height * 3;
        if expected != data.len() {
            return Err(ImageError::DimensionMismatch { expected, actual: data.len() });
        }
        Ok(Self { width, height, data, transfer })
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn dims(&self) -> (usize, usize) {
        (self.width, self.height)
    }

    pub fn transfer(&self) -> TransferTag {
        self.transfer
    }

    pub fn data(&self) -> &[u8] {
        &self.data
    }

    pub fn into_data(self) -> Vec<u8> {
        self.data
    }

    pub fn pixel(&self, x: usize, y: usize) -> [u8; 3] {
        let i = (y * self.width + x) * 3;
        [self.data[i], self.data[i + 1], self.data[i + 2]]
    }

    pub fn pixels(&self) -> impl Iterator<Item = [u8; 3]> + '_ {
        self.data.chunks_exact(3).map(|p| [p[0], p[1], p[2]])
    }
}

/// Single-channel raster (luminance, masks, per-pixel parameters).
#[derive(Clone, Debug, PartialEq)]
pub struct Plane<T> {
    pub width: usize,
    pub height: usize,
    pub data: Vec<T>,
}

impl<T: Clone> Plane<T> {
    pub fn filled(width: usize, height: usize, value: T) -> Self {
        Self { width, height, data: vec![value; width * height] }
    }
}

impl<T: Copy> Plane<T> {
    pub fn get(&self, x: usize, y: usize) -> T {
        self.data[y * self.width + x]
    }

    pub fn map<U>(&self, f: impl FnMut(T) -> U) -> Plane<U> {
        Plane { width: self.width, height: self.height, data: self.data.iter().copied().map(f).collect() }
    }
}

impl<T> Plane<T> {
    pub fn from_vec(width: usize, height: usize, data: Vec<T>) -> Self {
        assert_eq!(data.len(), width * height, "plane data does not match its dimensions");
        Self { width, height, data }
    }

    pub fn dims(&self) -> (usize, usize) {
        (self.width, self.height)
    }
}

pub type Mask = Plane<bool>;

impl Mask {
    pub fn count(&self) -> usize {
        self.data.iter().filter(|&&b| b).count()
    }
}
