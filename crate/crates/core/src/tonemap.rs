//! Dynamic-range compression for display and the saturation-controlled
//! color correction applied after it.
//!
//! Both operators work on luminance only and report the source luminance
//! `l_o`, the display luminance `l_t` in `[0, 1]` and the log-log slope of
//! the mapping. Color is transferred afterwards by [`color_correct`]:
//!
//! * `Eq3`: `I_t = (I_o / L_o)^p * L_t`
//! * `Eq4`: `I_t = ((I_o / L_o - 1) * p + 1) * L_t`
//!
//! With luminance weights summing to one, `Eq4` preserves `L_t` exactly.

use std::str::FromStr;

use crate::color::{luminance, widen, ColorSpace};
use crate::error::ToneMapError;
use crate::filter::bilateral;
use crate::image::{HdrImage, Plane, SdrImage, TransferTag};
use crate::transfer::{pq_oetf, srgb_eotf, srgb_oetf};

#[derive(Clone, Debug, PartialEq)]
pub struct ToneMapResult {
    /// Default rendition: color carried with `p = 1`, sRGB encoded.
    pub sdr: SdrImage,
    pub l_t: Plane<f64>,
    pub l_o: Plane<f64>,
    /// `d log L_t / d log L_o` per pixel.
    pub curve_slope: Plane<f64>,
}

/// Parameters of the global photographic curve.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct GlobalParams {
    /// Input luminance mapped to display white; `None` uses the image maximum.
    pub white_point: Option<f64>,
    /// Target display value of the log-average luminance before the
    /// shoulder is applied.
    pub key: f64,
}

impl Default for GlobalParams {
    fn default() -> Self {
        Self { white_point: None, key: 0.18 }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct LocalParams {
    pub sigma_spatial: f64,
    /// Range sigma in log10 luminance units.
    pub sigma_range: f64,
    /// Target log10 range of the compressed base layer.
    pub base_contrast: f64,
}

impl Default for LocalParams {
    fn default() -> Self {
        Self { sigma_spatial: 8.0, sigma_range: 0.4, base_contrast: 1.6 }
    }
}

/// Extended photographic curve with scaled input `x = s L` and scaled white
/// `w = s W`: `L_t = x (1 + x / w^2) / (1 + x)`. Returns `(L_t, slope)`.
fn photographic(x: f64, w: f64) -> (f64, f64) {
    let a = x / (w * w);
    let lt = x * (1.0 + a) / (1.0 + x);
    let slope = 1.0 + a / (1.0 + a) - x / (1.0 + x);
    (lt, slope)
}

fn log_average(l: &[f64]) -> Option<f64> {
    let (sum, n) = l.iter().filter(|&&v| v > 0.0).fold((0.0, 0usize), |(s, n), &v| (s + v.ln(), n + 1));
    (n > 0).then(|| (sum / n as f64).exp())
}

fn check_input(img: &HdrImage) -> Result<(), ToneMapError> {
    if img.allows_negative() && img.data().iter().any(|&v| v < 0.0) {
        return Err(ToneMapError::BadParameter("tone mapping needs non-negative RGB"));
    }
    Ok(())
}

/// One monotone curve applied to every pixel.
pub fn tonemap_global(img: &HdrImage, cs: &ColorSpace, params: GlobalParams) -> Result<ToneMapResult, ToneMapError> {
    check_input(img)?;
    if !(params.key.is_finite() && params.key > 0.0) {
        return Err(ToneMapError::BadParameter("key must be positive"));
    }
    let l_o = luminance(img, cs);
    let (w, h) = l_o.dims();
    let Some(avg) = log_average(&l_o.data) else {
        return Ok(finish(img, l_o.clone(), Plane::filled(w, h, 0.0), Plane::filled(w, h, 1.0)));
    };
    let max = l_o.data.iter().cloned().fold(0.0, f64::max);
    let white = params.white_point.unwrap_or(max);
    if !(white.is_finite() && white > 0.0) {
        return Err(ToneMapError::BadParameter("white point must be positive"));
    }
    let s = params.key / avg;
    let ws = s * white;
    let mut lt = Vec::with_capacity(l_o.data.len());
    let mut slope = Vec::with_capacity(l_o.data.len());
    for &l in &l_o.data {
        let (t, d) = photographic(s * l, ws);
        lt.push(t.clamp(0.0, 1.0));
        slope.push(d);
    }
    let l_t = Plane::from_vec(w, h, lt);
    Ok(finish(img, l_o, l_t, Plane::from_vec(w, h, slope)))
}

/// Bilateral base/detail decomposition in log10 luminance. The base is
/// compressed to `base_contrast` decades and anchored so its maximum maps to
/// display white; the detail layer is added back unchanged.
pub fn tonemap_local(img: &HdrImage, cs: &ColorSpace, params: LocalParams) -> Result<ToneMapResult, ToneMapError> {
    check_input(img)?;
    if !(params.sigma_spatial > 0.0 && params.sigma_range > 0.0) {
        return Err(ToneMapError::BadParameter("sigmas must be positive"));
    }
    if params.base_contrast.is_nan() || params.base_contrast <= 0.0 {
        return Err(ToneMapError::BadParameter("base contrast must be positive"));
    }
    let l_o = luminance(img, cs);
    let (w, h) = l_o.dims();
    let min_pos = l_o.data.iter().cloned().filter(|&v| v > 0.0).fold(f64::INFINITY, f64::min);
    if !min_pos.is_finite() {
        return Ok(finish(img, l_o.clone(), Plane::filled(w, h, 0.0), Plane::filled(w, h, 1.0)));
    }
    let log_l = l_o.map(|v| v.max(min_pos).log10());
    let base = bilateral(&log_l, params.sigma_spatial, params.sigma_range);
    let (lo, hi) = base.data.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), &v| (a.min(v), b.max(v)));
    let range = hi - lo;
    let scale = if range > params.base_contrast { params.base_contrast / range } else { 1.0 };

    let lt = l_o
        .data
        .iter()
        .zip(log_l.data.iter().zip(&base.data))
        .map(|(&l, (&ll, &b))| {
            if l <= 0.0 {
                0.0
            } else {
                let out = (b - hi) * scale + (ll - b);
                10f64.powf(out).clamp(0.0, 1.0)
            }
        })
        .collect();
    Ok(finish(img, l_o, Plane::from_vec(w, h, lt), Plane::filled(w, h, scale)))
}

fn finish(img: &HdrImage, l_o: Plane<f64>, l_t: Plane<f64>, curve_slope: Plane<f64>) -> ToneMapResult {
    let mut result = ToneMapResult {
        sdr: SdrImage::new(0, 0, Vec::new(), TransferTag::Srgb).expect("empty raster"),
        l_t,
        l_o,
        curve_slope,
    };
    let params = ColorCorrection { saturation: Saturation::Fixed(1.0), formula: Formula::Eq3 };
    let display = color_correct(img, &result, params);
    result.sdr = encode_display(&display.image, TransferTag::Srgb).0;
    result
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Default)]
pub enum Formula {
    /// `(I_o / L_o)^p * L_t`
    #[default]
    Eq3,
    /// `((I_o / L_o - 1) p + 1) * L_t`
    Eq4,
}

impl FromStr for Formula {
    type Err = ToneMapError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "eq3" => Ok(Self::Eq3),
            "eq4" => Ok(Self::Eq4),
            _ => Err(ToneMapError::BadParameter("formula must be eq3 or eq4")),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Saturation {
    /// Clamped into `[0, 1]` on use.
    Fixed(f64),
    /// Per pixel from the slope of the tone curve, see [`auto_saturation`].
    Auto,
}

impl FromStr for Saturation {
    type Err = ToneMapError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        if s == "auto" {
            return Ok(Self::Auto);
        }
        s.parse::<f64>()
            .ok()
            .filter(|p| p.is_finite())
            .map(Self::Fixed)
            .ok_or(ToneMapError::BadParameter("saturation must be 'auto' or a number"))
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ColorCorrection {
    pub saturation: Saturation,
    pub formula: Formula,
}

impl Default for ColorCorrection {
    fn default() -> Self {
        Self { saturation: Saturation::Auto, formula: Formula::Eq3 }
    }
}

/// Color transfer for one pixel. Pixels with `l_o <= 0` come out black.
/// `Eq3` uses a sign-preserving power so out-of-gamut (negative) channels
/// stay defined.
pub fn correct_pixel(rgb: [f64; 3], l_o: f64, l_t: f64, p: f64, formula: Formula) -> [f64; 3] {
    if l_o.is_nan() || l_o <= 0.0 {
        return [0.0; 3];
    }
    let p = p.clamp(0.0, 1.0);
    rgb.map(|c| {
        let ratio = c / l_o;
        match formula {
            Formula::Eq3 => ratio.signum() * ratio.abs().powf(p) * l_t,
            // Same as ((ratio - 1) p + 1), arranged to be exact at p = 0 and p = 1.
            Formula::Eq4 => (ratio * p + (1.0 - p)) * l_t,
        }
    })
}

/// `p = clamp(slope, 0, 1)` per pixel: no desaturation where the curve does
/// not compress.
pub fn auto_saturation(result: &ToneMapResult) -> Plane<f64> {
    result.curve_slope.map(|s| s.clamp(0.0, 1.0))
}

/// Display-linear output of [`color_correct`], before clipping.
#[derive(Clone, Debug, PartialEq)]
pub struct Corrected {
    /// May hold values outside `[0, 1]`; they are clipped by [`encode_display`].
    pub image: HdrImage,
    /// Fraction of channel samples outside `[0, 1]`.
    pub clip_fraction: f64,
}

pub fn color_correct(img: &HdrImage, result: &ToneMapResult, params: ColorCorrection) -> Corrected {
    let auto = matches!(params.saturation, Saturation::Auto).then(|| auto_saturation(result));
    let mut data = Vec::with_capacity(img.data().len());
    let mut clipped = 0usize;
    for (i, px) in img.pixels().enumerate() {
        let p = match (&auto, params.saturation) {
            (Some(plane), _) => plane.data[i],
            (None, Saturation::Fixed(p)) => p,
            (None, Saturation::Auto) => unreachable!(),
        };
        let out = correct_pixel(widen(px), result.l_o.data[i], result.l_t.data[i], p, params.formula);
        for v in out {
            if !(0.0..=1.0).contains(&v) {
                clipped += 1;
            }
            data.push(v as f32);
        }
    }
    let n = data.len().max(1);
    let image = HdrImage::from_samples(img.width(), img.height(), data).expect("finite corrected samples");
    Corrected { image, clip_fraction: clipped as f64 / n as f64 }
}

/// Clips display-linear RGB to `[0, 1]`, applies the output transfer and
/// quantizes to 8 bits. Returns the fraction of clipped samples as well.
pub fn encode_display(display: &HdrImage, tag: TransferTag) -> (SdrImage, f64) {
    let mut clipped = 0usize;
    let data: Vec<u8> = display
        .data()
        .iter()
        .map(|&v| {
            let v = v as f64;
            if !(0.0..=1.0).contains(&v) {
                clipped += 1;
            }
            let v = v.clamp(0.0, 1.0);
            let code = match tag {
                TransferTag::Srgb => srgb_oetf(v),
                TransferTag::Gamma22 => v.powf(1.0 / 2.2),
                TransferTag::PqNormalized => pq_oetf(v * 10_000.0),
            };
            (code * 255.0).round() as u8
        })
        .collect();
    let frac = clipped as f64 / data.len().max(1) as f64;
    (SdrImage::new(display.width(), display.height(), data, tag).expect("dimensions match"), frac)
}

/// Inverse of [`encode_display`] without the clipping: 8-bit codes back to
/// display-linear values in `[0, 1]`.
pub fn decode_display(sdr: &SdrImage) -> Vec<f64> {
    sdr.data()
        .iter()
        .map(|&c| {
            let v = c as f64 / 255.0;
            match sdr.transfer() {
                TransferTag::Srgb => srgb_eotf(v),
                TransferTag::Gamma22 => v.powf(2.2),
                TransferTag::PqNormalized => crate::transfer::pq_eotf(v) / 10_000.0,
            }
        })
        .collect()
}
