//! Full-reference quality indices for HDR content.
//!
//! Display-referred metrics (`pu-psnr`, `pu-ssim`) work on nit-calibrated
//! luminance encoded with [`pu_encode`]. `log-psnr` and the DRI classifier
//! work on log luminance and do not depend on absolute level.

use std::fmt;
use std::str::FromStr;

use rayon::prelude::*;

use crate::color::{luminance, ColorSpace};
use crate::error::QualityError;
use crate::filter::gaussian_blur;
use crate::image::{Calibration, HdrImage, Plane};
use crate::transfer::pu_encode;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum MetricKind {
    PuPsnr,
    LogPsnr,
    PuSsim,
    Dri,
}

impl MetricKind {
    pub const ALL: [MetricKind; 4] = [Self::PuPsnr, Self::LogPsnr, Self::PuSsim, Self::Dri];

    pub fn name(self) -> &'static str {
        match self {
            Self::PuPsnr => "pu-psnr",
            Self::LogPsnr => "log-psnr",
            Self::PuSsim => "pu-ssim",
            Self::Dri => "dri",
        }
    }
}

impl fmt::Display for MetricKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for MetricKind {
    type Err = QualityError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Self::ALL
            .into_iter()
            .find(|m| m.name() == s)
            .ok_or(QualityError::BadParameter("metric must be pu-psnr, log-psnr, pu-ssim or dri"))
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Referral {
    DisplayReferred,
    LuminanceIndependent,
}

impl Referral {
    pub fn name(self) -> &'static str {
        match self {
            Self::DisplayReferred => "display-referred",
            Self::LuminanceIndependent => "luminance-independent",
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct QualityReport {
    pub metric: MetricKind,
    /// PSNR of identical inputs is `+inf`.
    pub score: f64,
    pub map: Option<Plane<f64>>,
    pub referral: Referral,
}

fn check_shapes(reference: &HdrImage, test: &HdrImage) -> Result<(), QualityError> {
    if reference.dims() != test.dims() {
        return Err(QualityError::ShapeMismatch { ref_dims: reference.dims(), test_dims: test.dims() });
    }
    Ok(())
}

fn check_absolute(reference: &HdrImage, test: &HdrImage) -> Result<(), QualityError> {
    if reference.calibration() != Calibration::Absolute || test.calibration() != Calibration::Absolute {
        return Err(QualityError::NeedsAbsoluteCalibration);
    }
    Ok(())
}

/// PU units spanned by 0.1 to 10 000 nits.
pub fn pu_peak() -> f64 {
    pu_encode(10_000.0) - pu_encode(0.1)
}

fn pu_plane(img: &HdrImage, cs: &ColorSpace) -> Plane<f64> {
    luminance(img, cs).map(|l| pu_encode(l.clamp(0.0, 10_000.0)))
}

fn psnr(a: &[f64], b: &[f64], peak: f64) -> f64 {
    let mse = a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>() / a.len().max(1) as f64;
    if mse == 0.0 {
        f64::INFINITY
    } else {
        10.0 * (peak * peak / mse).log10()
    }
}

pub fn pu_psnr(reference: &HdrImage, test: &HdrImage, cs: &ColorSpace) -> Result<QualityReport, QualityError> {
    check_shapes(reference, test)?;
    check_absolute(reference, test)?;
    let (a, b) = (pu_plane(reference, cs), pu_plane(test, cs));
    let map = Plane::from_vec(a.width, a.height, a.data.iter().zip(&b.data).map(|(x, y)| (x - y).abs()).collect());
    Ok(QualityReport {
        metric: MetricKind::PuPsnr,
        score: psnr(&a.data, &b.data, pu_peak()),
        map: Some(map),
        referral: Referral::DisplayReferred,
    })
}

/// Log luminance with a floor one millionth of the image maximum, so that
/// black pixels stay finite and the floor scales with the image.
fn log_plane(img: &HdrImage, cs: &ColorSpace) -> Plane<f64> {
    let l = luminance(img, cs);
    let max = l.data.iter().cloned().fold(0.0, f64::max);
    let floor = if max > 0.0 { max * 1e-6 } else { f64::MIN_POSITIVE };
    l.map(|v| v.max(floor).log10())
}

/// PSNR of log10 luminance with the peak set to the reference's log range
/// (at least one decade).
pub fn log_psnr(reference: &HdrImage, test: &HdrImage, cs: &ColorSpace) -> Result<QualityReport, QualityError> {
    check_shapes(reference, test)?;
    let (a, b) = (log_plane(reference, cs), log_plane(test, cs));
    let (lo, hi) = a.data.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(l, h), &v| (l.min(v), h.max(v)));
    let peak = (hi - lo).max(1.0);
    let map = Plane::from_vec(a.width, a.height, a.data.iter().zip(&b.data).map(|(x, y)| (x - y).abs()).collect());
    Ok(QualityReport {
        metric: MetricKind::LogPsnr,
        score: psnr(&a.data, &b.data, peak),
        map: Some(map),
        referral: Referral::LuminanceIndependent,
    })
}

/// SSIM on PU luminance: Gaussian window with sigma 1.5, `K1 = 0.01`,
/// `K2 = 0.03`, dynamic range [`pu_peak`].
pub fn pu_ssim(reference: &HdrImage, test: &HdrImage, cs: &ColorSpace) -> Result<QualityReport, QualityError> {
    check_shapes(reference, test)?;
    check_absolute(reference, test)?;
    let (a, b) = (pu_plane(reference, cs), pu_plane(test, cs));
    let map = ssim_map(&a, &b, pu_peak());
    let score = map.data.iter().sum::<f64>() / map.data.len().max(1) as f64;
    Ok(QualityReport { metric: MetricKind::PuSsim, score, map: Some(map), referral: Referral::DisplayReferred })
}

pub fn ssim_map(a: &Plane<f64>, b: &Plane<f64>, range: f64) -> Plane<f64> {
    const SIGMA: f64 = 1.5;
    let c1 = (0.01 * range).powi(2);
    let c2 = (0.03 * range).powi(2);
    let prod = |f: &dyn Fn(f64, f64) -> f64| {
        Plane::from_vec(a.width, a.height, a.data.iter().zip(&b.data).map(|(&x, &y)| f(x, y)).collect())
    };
    let mu_a = gaussian_blur(a, SIGMA);
    let mu_b = gaussian_blur(b, SIGMA);
    let aa = gaussian_blur(&prod(&|x, _| x * x), SIGMA);
    let bb = gaussian_blur(&prod(&|_, y| y * y), SIGMA);
    let ab = gaussian_blur(&prod(&|x, y| x * y), SIGMA);
    let data = (0..a.data.len())
        .map(|i| {
            let (ma, mb) = (mu_a.data[i], mu_b.data[i]);
            let va = (aa.data[i] - ma * ma).max(0.0);
            let vb = (bb.data[i] - mb * mb).max(0.0);
            let cov = ab.data[i] - ma * mb;
            ((2.0 * ma * mb + c1) * (2.0 * cov + c2)) / ((ma * ma + mb * mb + c1) * (va + vb + c2))
        })
        .collect();
    Plane::from_vec(a.width, a.height, data)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Default)]
pub enum DriLabel {
    #[default]
    None,
    /// Visible in the reference, invisible in the test.
    Loss,
    /// Invisible in the reference, visible in the test.
    Amplification,
    /// Visible in both with opposite polarity.
    Reversal,
}

impl DriLabel {
    pub fn name(self) -> &'static str {
        match self {
            Self::None => "none",
            Self::Loss => "loss",
            Self::Amplification => "amplification",
            Self::Reversal => "reversal",
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct DriParams {
    /// Threshold in log10 contrast at peak sensitivity.
    pub visibility_threshold: f64,
    pub pixels_per_degree: f64,
    /// Adaptation luminance shared by both images. `None` assumes photopic
    /// vision, where the threshold does not depend on the level.
    pub adaptation_nits: Option<f64>,
}

impl Default for DriParams {
    fn default() -> Self {
        Self { visibility_threshold: 0.01, pixels_per_degree: 30.0, adaptation_nits: None }
    }
}

pub const DRI_SCALES: usize = 4;
pub const DRI_ORIENTATIONS: usize = 4;

/// Per band (scale-major, then orientation) and per pixel labels and
/// detection probabilities.
#[derive(Clone, Debug, PartialEq)]
pub struct DriMap {
    pub width: usize,
    pub height: usize,
    pub labels: Vec<Vec<DriLabel>>,
    pub probability: Vec<Vec<f64>>,
    /// Threshold used for each band, in log10 contrast.
    pub thresholds: Vec<f64>,
}

impl DriMap {
    pub fn band(scale: usize, orientation: usize) -> usize {
        scale * DRI_ORIENTATIONS + orientation
    }

    pub fn count(&self, label: DriLabel) -> usize {
        self.labels.iter().map(|b| b.iter().filter(|&&l| l == label).count()).sum()
    }

    /// Per pixel, the highest probability over bands of each distortion
    /// type, in the order loss, amplification, reversal.
    pub fn summary(&self) -> [Plane<f64>; 3] {
        let n = self.width * self.height;
        let mut out = [vec![0.0; n], vec![0.0; n], vec![0.0; n]];
        for (labels, probs) in self.labels.iter().zip(&self.probability) {
            for i in 0..n {
                let k = match labels[i] {
                    DriLabel::None => continue,
                    DriLabel::Loss => 0,
                    DriLabel::Amplification => 1,
                    DriLabel::Reversal => 2,
                };
                out[k][i] = f64::max(out[k][i], probs[i]);
            }
        }
        out.map(|d| Plane::from_vec(self.width, self.height, d))
    }
}

/// Mannos-Sakrison contrast sensitivity, frequency in cycles per degree.
pub fn csf(cpd: f64) -> f64 {
    2.6 * (0.0192 + 0.114 * cpd) * (-(0.114 * cpd).powf(1.1)).exp()
}

/// Sensitivity factor in `(0, 1]` for adaptation luminance `nits`.
fn adaptation_factor(nits: Option<f64>) -> f64 {
    match nits {
        None => 1.0,
        Some(l) => (l.max(1e-6) / (l.max(1e-6) + 10.0)).sqrt(),
    }
}

/// Peak frequency of a Gaussian-derivative filter of scale `sigma` pixels.
fn band_frequency(sigma: f64, ppd: f64) -> f64 {
    ppd / (2.0 * std::f64::consts::PI * sigma)
}

fn psychometric(contrast: f64, threshold: f64) -> f64 {
    1.0 - (-(contrast.abs() / threshold).powf(3.5)).exp()
}

/// Oriented band contrasts of a log-luminance plane: the derivative of a
/// Gaussian-smoothed copy along each orientation, scaled by sigma.
fn bands(log_l: &Plane<f64>) -> Vec<Vec<f64>> {
    let (w, h) = log_l.dims();
    let mut out = Vec::with_capacity(DRI_SCALES * DRI_ORIENTATIONS);
    for k in 0..DRI_SCALES {
        let sigma = (1u32 << k) as f64;
        let s = gaussian_blur(log_l, sigma);
        let at =
            |x: isize, y: isize| s.data[y.clamp(0, h as isize - 1) as usize * w + x.clamp(0, w as isize - 1) as usize];
        let mut gx = vec![0.0; w * h];
        let mut gy = vec![0.0; w * h];
        for y in 0..h as isize {
            for x in 0..w as isize {
                let i = y as usize * w + x as usize;
                gx[i] = (at(x + 1, y) - at(x - 1, y)) * 0.5 * sigma;
                gy[i] = (at(x, y + 1) - at(x, y - 1)) * 0.5 * sigma;
            }
        }
        for o in 0..DRI_ORIENTATIONS {
            let theta = o as f64 * std::f64::consts::PI / DRI_ORIENTATIONS as f64;
            let (c, sn) = (theta.cos(), theta.sin());
            out.push(gx.iter().zip(&gy).map(|(a, b)| c * a + sn * b).collect());
        }
    }
    out
}

/// Classifies visible structural changes between two images of possibly
/// different dynamic range. Contrast is measured in log luminance, so a
/// global scaling of either image changes nothing.
pub fn dri_classify(
    reference: &HdrImage,
    test: &HdrImage,
    cs: &ColorSpace,
    params: DriParams,
) -> Result<DriMap, QualityError> {
    check_shapes(reference, test)?;
    if !(params.visibility_threshold > 0.0 && params.pixels_per_degree > 0.0) {
        return Err(QualityError::BadParameter("threshold and pixels per degree must be positive"));
    }
    let (w, h) = reference.dims();
    let (ra, rb) = rayon::join(|| bands(&log_plane(reference, cs)), || bands(&log_plane(test, cs)));
    let factor = adaptation_factor(params.adaptation_nits);
    let thresholds: Vec<f64> = (0..DRI_SCALES * DRI_ORIENTATIONS)
        .map(|b| {
            let f = band_frequency((1u32 << (b / DRI_ORIENTATIONS)) as f64, params.pixels_per_degree);
            params.visibility_threshold / (csf(f).max(1e-3) * factor)
        })
        .collect();
    let (labels, probability): (Vec<_>, Vec<_>) = (0..thresholds.len())
        .into_par_iter()
        .map(|b| {
            let t = thresholds[b];
            ra[b]
                .iter()
                .zip(&rb[b])
                .map(|(&cr, &ct)| {
                    let (pr, pt) = (psychometric(cr, t), psychometric(ct, t));
                    let (vr, vt) = (cr.abs() > t, ct.abs() > t);
                    match (vr, vt) {
                        (true, false) => (DriLabel::Loss, pr * (1.0 - pt)),
                        (false, true) => (DriLabel::Amplification, (1.0 - pr) * pt),
                        (true, true) if cr.signum() != ct.signum() => (DriLabel::Reversal, pr * pt),
                        _ => (DriLabel::None, 0.0),
                    }
                })
                .unzip()
        })
        .unzip();
    Ok(DriMap { width: w, height: h, labels, probability, thresholds })
}

/// Runs the requested metrics. PU metrics need absolute calibration; DRI
/// reports the fraction of distorted band sites as its score.
pub fn compare(
    reference: &HdrImage,
    test: &HdrImage,
    cs: &ColorSpace,
    metrics: &[MetricKind],
    dri: DriParams,
) -> Result<Vec<QualityReport>, QualityError> {
    metrics
        .iter()
        .map(|m| match m {
            MetricKind::PuPsnr => pu_psnr(reference, test, cs),
            MetricKind::LogPsnr => log_psnr(reference, test, cs),
            MetricKind::PuSsim => pu_ssim(reference, test, cs),
            MetricKind::Dri => {
                let map = dri_classify(reference, test, cs, dri)?;
                let sites = (map.width * map.height * map.labels.len()).max(1);
                let distorted = sites - map.count(DriLabel::None).min(sites);
                let [loss, amp, rev] = map.summary();
                let combined = (0..loss.data.len()).map(|i| loss.data[i].max(amp.data[i]).max(rev.data[i])).collect();
                Ok(QualityReport {
                    metric: MetricKind::Dri,
                    score: distorted as f64 / sites as f64,
                    map: Some(Plane::from_vec(map.width, map.height, combined)),
                    referral: Referral::LuminanceIndependent,
                })
            }
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn abs(img: HdrImage) -> HdrImage {
        img.with_calibration(Calibration::Absolute)
    }

    fn flat(w: usize, h: usize, v: f32) -> HdrImage {
        abs(HdrImage::from_fn(w, h, |_, _| [v; 3]).unwrap())
    }

    fn grating(w: usize, h: usize, mean: f64, amp_log10: f64, period: f64) -> HdrImage {
        abs(HdrImage::from_fn(w, h, |x, _| {
            let v = mean * 10f64.powf(amp_log10 * (2.0 * std::f64::consts::PI * x as f64 / period).sin());
            [v as f32; 3]
        })
        .unwrap())
    }

    fn cs() -> ColorSpace {
        ColorSpace::rec709()
    }

    #[test]
    fn identity_scores() {
        let img = grating(32, 32, 100.0, 0.3, 8.0);
        assert_eq!(pu_psnr(&img, &img, &cs()).unwrap().score, f64::INFINITY);
        assert_eq!(log_psnr(&img, &img, &cs()).unwrap().score, f64::INFINITY);
        assert!((pu_ssim(&img, &img, &cs()).unwrap().score - 1.0).abs() < 1e-12);
        assert_eq!(dri_classify(&img, &img, &cs(), DriParams::default()).unwrap().count(DriLabel::None), 32 * 32 * 16);
    }

    #[test]
    fn pu_peak_value() {
        assert!((pu_peak() - 564.6).abs() < 0.5, "{}", pu_peak());
    }

    #[test]
    fn pu_needs_absolute() {
        let rel = HdrImage::zeros(2, 2);
        assert_eq!(pu_psnr(&rel, &rel, &cs()), Err(QualityError::NeedsAbsoluteCalibration));
        assert_eq!(pu_ssim(&rel, &rel, &cs()), Err(QualityError::NeedsAbsoluteCalibration));
        assert!(log_psnr(&rel, &rel, &cs()).is_ok());
    }

    #[test]
    fn shape_mismatch() {
        let (a, b) = (flat(2, 2, 1.0), flat(3, 2, 1.0));
        assert_eq!(pu_psnr(&a, &b, &cs()), Err(QualityError::ShapeMismatch { ref_dims: (2, 2), test_dims: (3, 2) }));
        assert!(dri_classify(&a, &b, &cs(), DriParams::default()).is_err());
    }

    #[test]
    fn dark_errors_cost_more() {
        let delta = 0.5;
        let dark = pu_psnr(&flat(8, 8, 1.0), &flat(8, 8, 1.0 + delta), &cs()).unwrap().score;
        let bright = pu_psnr(&flat(8, 8, 1000.0), &flat(8, 8, 1000.0 + delta), &cs()).unwrap().score;
        assert!(dark < bright, "{dark} vs {bright}");
    }

    #[test]
    fn log_psnr_scale_invariant() {
        let a = grating(16, 16, 50.0, 0.5, 5.0);
        let b = grating(16, 16, 55.0, 0.4, 5.0);
        let s0 = log_psnr(&a, &b, &cs()).unwrap().score;
        for k in [0.25f32, 8.0, 1024.0] {
            let s = log_psnr(
                &a.scaled(k, Calibration::Absolute).unwrap(),
                &b.scaled(k, Calibration::Absolute).unwrap(),
                &cs(),
            )
            .unwrap()
            .score;
            assert!((s - s0).abs() < 1e-9);
        }
    }

    #[test]
    fn ssim_in_range_and_decreasing() {
        let a = grating(32, 32, 100.0, 0.3, 8.0);
        let mut last = 1.0;
        for amp in [0.05f32, 0.2, 0.5] {
            let b = abs(HdrImage::from_fn(32, 32, |x, y| {
                let n = (((x * 7 + y * 13) % 11) as f32 / 10.0 - 0.5) * amp;
                let p = a.pixel(x, y);
                [p[0] * (1.0 + n), p[1] * (1.0 + n), p[2] * (1.0 + n)]
            })
            .unwrap());
            let s = pu_ssim(&a, &b, &cs()).unwrap().score;
            assert!((-1.0..=1.0).contains(&s) && s < last);
            last = s;
        }
    }

    #[test]
    fn csf_shape() {
        let peak = (1..60).map(|f| csf(f as f64)).fold(0.0, f64::max);
        assert!(peak > 0.9 && peak < 1.1);
        assert!(csf(8.0) > csf(1.0) && csf(8.0) > csf(40.0));
    }

    #[test]
    fn grating_labels() {
        let (w, h, period) = (64, 16, 16.0);
        let strong = grating(w, h, 100.0, 0.3, period);
        let weak = grating(w, h, 100.0, 0.0005, period);
        let inverted = grating(w, h, 100.0, -0.3, period);
        let blank = flat(w, h, 100.0);
        let p = DriParams::default();
        let loss = dri_classify(&strong, &weak, &cs(), p).unwrap();
        assert!(loss.count(DriLabel::Loss) > 0);
        assert_eq!(loss.count(DriLabel::Amplification) + loss.count(DriLabel::Reversal), 0);
        let amp = dri_classify(&blank, &strong, &cs(), p).unwrap();
        assert!(amp.count(DriLabel::Amplification) > 0);
        assert_eq!(amp.count(DriLabel::Loss) + amp.count(DriLabel::Reversal), 0);
        let rev = dri_classify(&strong, &inverted, &cs(), p).unwrap();
        assert!(rev.count(DriLabel::Reversal) > 0);
        assert_eq!(rev.count(DriLabel::Loss) + rev.count(DriLabel::Amplification), 0);
    }

    #[test]
    fn metric_names() {
        for m in MetricKind::ALL {
            assert_eq!(m.name().parse::<MetricKind>().unwrap(), m);
        }
    }
}
