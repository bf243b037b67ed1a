//! Inverse tone mapping: linearize 8-bit content, then stretch its dynamic
//! range with a global power law `L_out = peak * L_lin^alpha`.

use crate::color::ColorSpace;
use crate::error::ExpandError;
use crate::filter::bilateral;
use crate::image::{Calibration, HdrImage, Mask, Plane, SdrImage};
use crate::transfer::srgb_eotf;

/// Code value to relative linear light in `[0, 1]`.
#[derive(Clone, Debug, PartialEq)]
pub enum Linearizer {
    Srgb,
    Gamma22,
    /// Log exposure per code, as produced by response recovery. Normalized so
    /// that code 255 maps to 1.
    Crf(Box<[f64; 256]>),
}

impl Linearizer {
    /// Accepts a log-exposure table if it is non-decreasing and finite
    /// (code 0 may be `-inf`).
    pub fn crf(table: [f64; 256]) -> Result<Self, ExpandError> {
        if table[1..].iter().any(|v| !v.is_finite()) || table[0].is_nan() || table[0] == f64::INFINITY {
            return Err(ExpandError::CurveNotInvertible("response table has non-finite entries".into()));
        }
        if let Some(z) = table.windows(2).position(|p| p[1] < p[0]) {
            return Err(ExpandError::CurveNotInvertible(format!("response decreases between codes {z} and {}", z + 1)));
        }
        if table[255] <= table[1] {
            return Err(ExpandError::CurveNotInvertible("response is constant".into()));
        }
        Ok(Self::Crf(Box::new(table)))
    }

    /// `code` is on the 0..255 scale and may be fractional after filtering.
    pub fn linearize(&self, code: f64) -> f64 {
        let c = code.clamp(0.0, 255.0);
        match self {
            Self::Srgb => srgb_eotf(c / 255.0),
            Self::Gamma22 => (c / 255.0).powf(2.2),
            Self::Crf(g) => {
                let i = (c.floor() as usize).min(254);
                let f = c - i as f64;
                let (a, b) = ((g[i] - g[255]).exp(), (g[i + 1] - g[255]).exp());
                a + (b - a) * f
            }
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Prefilter {
    pub sigma_spatial: f64,
    /// In code values.
    pub sigma_range: f64,
}

impl Default for Prefilter {
    fn default() -> Self {
        Self { sigma_spatial: 2.0, sigma_range: 3.0 }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct ExpansionParams {
    pub linearizer: Linearizer,
    /// Nits assigned to linear value 1.
    pub target_peak: f64,
    pub alpha: f64,
    pub prefilter: Option<Prefilter>,
    /// Pixels whose largest code is at most `low` are flagged.
    pub low: u8,
    /// Pixels whose largest code is at least `high` are flagged.
    pub high: u8,
}

impl Default for ExpansionParams {
    fn default() -> Self {
        Self { linearizer: Linearizer::Srgb, target_peak: 1000.0, alpha: 1.6, prefilter: None, low: 5, high: 250 }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Expanded {
    /// Absolute, in nits.
    pub image: HdrImage,
    /// Under- or over-exposed pixels.
    pub low_confidence: Mask,
}

/// Luminance expansion of one linear pixel; chroma follows the luminance
/// ratio.
pub fn expand_pixel(linear: [f64; 3], cs: &ColorSpace, peak: f64, alpha: f64) -> [f64; 3] {
    let l = cs.luminance_of(linear);
    if l <= 0.0 {
        return [0.0; 3];
    }
    let out = peak * l.powf(alpha);
    linear.map(|v| v * out / l)
}

pub fn expand(sdr: &SdrImage, cs: &ColorSpace, params: &ExpansionParams) -> Result<Expanded, ExpandError> {
    if !(params.target_peak.is_finite() && params.target_peak > 0.0) {
        return Err(ExpandError::BadParameter("target peak must be positive"));
    }
    if !(params.alpha.is_finite() && params.alpha >= 1.0) {
        return Err(ExpandError::BadParameter("alpha must be at least 1"));
    }
    let (w, h) = sdr.dims();
    let mut channels: Vec<Plane<f64>> = (0..3)
        .map(|c| Plane::from_vec(w, h, sdr.data().iter().skip(c).step_by(3).map(|&v| v as f64).collect()))
        .collect();
    if let Some(pf) = params.prefilter {
        if !(pf.sigma_spatial > 0.0 && pf.sigma_range > 0.0) {
            return Err(ExpandError::BadParameter("prefilter sigmas must be positive"));
        }
        channels = channels.iter().map(|p| bilateral(p, pf.sigma_spatial, pf.sigma_range)).collect();
    }
    let mut data = Vec::with_capacity(w * h * 3);
    for i in 0..w * h {
        let linear = [0, 1, 2].map(|c| params.linearizer.linearize(channels[c].data[i]));
        let out = expand_pixel(linear, cs, params.target_peak, params.alpha);
        data.extend(out.map(|v| v as f32));
    }
    let mask = sdr
        .pixels()
        .map(|p| {
            let m = p[0].max(p[1]).max(p[2]);
            m <= params.low || m >= params.high
        })
        .collect();
    let image = HdrImage::new(w, h, data)
        .map_err(|_| ExpandError::BadParameter("expansion produced invalid samples"))?
        .with_calibration(Calibration::Absolute);
    Ok(Expanded { image, low_confidence: Plane::from_vec(w, h, mask) })
}
