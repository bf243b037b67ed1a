//! RGB color spaces, luminance extraction and RGB/XYZ conversion.

use nalgebra::Matrix3;

use crate::error::ImageError;
use crate::image::{HdrImage, Plane};

/// An RGB space defined by its linear RGB→XYZ matrix.
///
/// The second matrix row doubles as the luminance weights, which must sum to
/// one so that white has unit luminance.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ColorSpace {
    to_xyz: Matrix3<f64>,
    from_xyz: Matrix3<f64>,
}

impl ColorSpace {
    pub fn from_matrix(m: [[f64; 3]; 3]) -> Result<Self, ImageError> {
        if m.iter().flatten().any(|v| !v.is_finite()) {
            return Err(ImageError::BadColorSpace("matrix has non-finite entries"));
        }
        let weight_sum: f64 = m[1].iter().sum();
        if (weight_sum - 1.0).abs() > 1e-9 {
            return Err(ImageError::BadColorSpace("luminance weights do not sum to one"));
        }
        let to_xyz =
            Matrix3::from_row_slice(&[m[0][0], m[0][1], m[0][2], m[1][0], m[1][1], m[1][2], m[2][0], m[2][1], m[2][2]]);
        if to_xyz.determinant().abs() < 1e-12 {
            return Err(ImageError::BadColorSpace("matrix is singular"));
        }
        let from_xyz = to_xyz.try_inverse().ok_or(ImageError::BadColorSpace("matrix is singular"))?;
        Ok(Self { to_xyz, from_xyz })
    }

    /// ITU-R BT.709 / sRGB primaries, D65 white.
    pub fn rec709() -> Self {
        Self::from_matrix([[0.4124, 0.3576, 0.1805], [0.2126, 0.7152, 0.0722], [0.0193, 0.1192, 0.9505]])
            .expect("BT.709 matrix is valid")
    }

    /// ITU-R BT.601 625-line (EBU) primaries, D65 white.
    pub fn rec601() -> Self {
        Self::from_matrix([[0.4306, 0.3415, 0.1784], [0.2220, 0.7067, 0.0713], [0.0202, 0.1295, 0.9394]])
            .expect("BT.601 matrix is valid")
    }

    pub fn weights(&self) -> [f64; 3] {
        [self.to_xyz[(1, 0)], self.to_xyz[(1, 1)], self.to_xyz[(1, 2)]]
    }

    /// XYZ of RGB (1, 1, 1).
    pub fn white_point(&self) -> [f64; 3] {
        self.rgb_to_xyz_pixel([1.0, 1.0, 1.0])
    }

    #[inline]
    pub fn luminance_of(&self, rgb: [f64; 3]) -> f64 {
        let [wr, wg, wb] = self.weights();
        wr * rgb[0] + wg * rgb[1] + wb * rgb[2]
    }

    /// Luminance of a raw pixel, rejecting NaN and infinities.
    pub fn try_luminance(&self, rgb: [f64; 3]) -> Result<f64, ImageError> {
        if let Some(index) = rgb.iter().position(|v| !v.is_finite()) {
            return Err(ImageError::NonFiniteSample { index });
        }
        Ok(self.luminance_of(rgb))
    }

    #[inline]
    pub fn rgb_to_xyz_pixel(&self, rgb: [f64; 3]) -> [f64; 3] {
        mul(&self.to_xyz, rgb)
    }

    #[inline]
    pub fn xyz_to_rgb_pixel(&self, xyz: [f64; 3]) -> [f64; 3] {
        mul(&self.from_xyz, xyz)
    }
}

impl Default for ColorSpace {
    fn default() -> Self {
        Self::rec709()
    }
}

fn mul(m: &Matrix3<f64>, v: [f64; 3]) -> [f64; 3] {
    let mut out = [0.0; 3];
    for (r, o) in out.iter_mut().enumerate() {
        *o = m[(r, 0)] * v[0] + m[(r, 1)] * v[1] + m[(r, 2)] * v[2];
    }
    out
}

#[inline]
pub(crate) fn widen(p: [f32; 3]) -> [f64; 3] {
    [p[0] as f64, p[1] as f64, p[2] as f64]
}

/// Per-pixel luminance. Values are in nits when the image is absolute.
pub fn luminance(img: &HdrImage, cs: &ColorSpace) -> Plane<f64> {
    let data = img.pixels().map(|p| cs.luminance_of(widen(p))).collect();
    Plane::from_vec(img.width(), img.height(), data)
}

/// Converts an RGB image to XYZ. Samples stay in the RGB container, holding
/// X, Y, Z in place of R, G, B.
pub fn rgb_to_xyz(img: &HdrImage, cs: &ColorSpace) -> Result<HdrImage, ImageError> {
    convert(img, |p| cs.rgb_to_xyz_pixel(p))
}

/// Inverse of [`rgb_to_xyz`]. The result may hold negative samples when the
/// XYZ color lies outside the RGB gamut.
pub fn xyz_to_rgb(img: &HdrImage, cs: &ColorSpace) -> Result<HdrImage, ImageError> {
    convert(img, |p| cs.xyz_to_rgb_pixel(p))
}

fn convert(img: &HdrImage, f: impl Fn([f64; 3]) -> [f64; 3]) -> Result<HdrImage, ImageError> {
    let mut data = Vec::with_capacity(img.data().len());
    for p in img.pixels() {
        let q = f(widen(p));
        data.extend(q.iter().map(|&v| v as f32));
    }
    Ok(HdrImage::from_samples(img.width(), img.height(), data)?.with_calibration(img.calibration()))
}
