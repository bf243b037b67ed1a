//! Transfer functions (code ↔ light), uniform code quantization and the
//! perceptually uniform luminance encoding used by the quality metrics.

use std::fmt;
use std::str::FromStr;

use crate::error::TransferError;

/// SMPTE ST 2084 constants.
mod pq {
    pub const M1: f64 = 2610.0 / 16384.0;
    pub const M2: f64 = 2523.0 / 4096.0 * 128.0;
    pub const C1: f64 = 3424.0 / 4096.0;
    pub const C2: f64 = 2413.0 / 4096.0 * 32.0;
    pub const C3: f64 = 2392.0 / 4096.0 * 32.0;
    pub const PEAK: f64 = 10_000.0;
}

/// ST 2084 inverse EOTF: nits → code. Defined for any non-negative input.
pub fn pq_oetf(nits: f64) -> f64 {
    let y = (nits / pq::PEAK).max(0.0).powf(pq::M1);
    ((pq::C1 + pq::C2 * y) / (1.0 + pq::C3 * y)).powf(pq::M2)
}

/// ST 2084 EOTF: code → nits.
pub fn pq_eotf(code: f64) -> f64 {
    let e = code.max(0.0).powf(1.0 / pq::M2);
    let num = (e - pq::C1).max(0.0);
    pq::PEAK * (num / (pq::C2 - pq::C3 * e)).powf(1.0 / pq::M1)
}

/// IEC 61966-2-1 decoding, code in [0, 1] → relative linear light.
pub fn srgb_eotf(code: f64) -> f64 {
    if code <= 0.04045 {
        code / 12.92
    } else {
        ((code + 0.055) / 1.055).powf(2.4)
    }
}

pub fn srgb_oetf(linear: f64) -> f64 {
    if linear <= 0.0031308 {
        linear * 12.92
    } else {
        1.055 * linear.powf(1.0 / 2.4) - 0.055
    }
}

const PU_LOW_NITS: f64 = 0.1;
const PU_HIGH_NITS: f64 = 80.0;

/// Perceptually uniform luminance units: the PQ curve renormalized so that
/// 0.1 nits maps to 0 and 80 nits to 255.
pub fn pu_encode(nits: f64) -> f64 {
    let lo = pq_oetf(PU_LOW_NITS);
    let hi = pq_oetf(PU_HIGH_NITS);
    255.0 * (pq_oetf(nits.max(0.0)) - lo) / (hi - lo)
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum TransferKind {
    /// Pure power law `code^gamma`.
    Gamma(f64),
    Srgb,
    /// ST 2084 perceptual quantizer, absolute up to 10 000 nits.
    Pq,
    /// Logarithmic over the given number of decades below peak. Code 0 is
    /// reserved for black.
    LogN(f64),
    /// PU luminance scaled so that code 1 is `peak_nits`.
    Pu,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct TransferFunction {
    pub kind: TransferKind,
    /// Luminance of code 1.0. Fixed to 10 000 for PQ.
    pub peak_nits: f64,
}

impl TransferFunction {
    pub fn new(kind: TransferKind, peak_nits: f64) -> Result<Self, TransferError> {
        if !(peak_nits.is_finite() && peak_nits > 0.0) {
            return Err(TransferError::BadParameter("peak luminance must be positive"));
        }
        match kind {
            TransferKind::Gamma(g) if !(g.is_finite() && g > 0.0) => {
                return Err(TransferError::BadParameter("gamma must be positive"))
            }
            TransferKind::LogN(d) if !(d.is_finite() && d > 0.0) => {
                return Err(TransferError::BadParameter("decade span must be positive"))
            }
            TransferKind::Pq if peak_nits != pq::PEAK => {
                return Err(TransferError::BadParameter("PQ peak is fixed at 10000 nits"))
            }
            _ => {}
        }
        Ok(Self { kind, peak_nits })
    }

    pub fn gamma22() -> Self {
        Self { kind: TransferKind::Gamma(2.2), peak_nits: 1.0 }
    }

    pub fn srgb() -> Self {
        Self { kind: TransferKind::Srgb, peak_nits: 1.0 }
    }

    pub fn pq() -> Self {
        Self { kind: TransferKind::Pq, peak_nits: pq::PEAK }
    }

    /// Twelve decades below `peak_nits`.
    pub fn log(peak_nits: f64) -> Self {
        Self { kind: TransferKind::LogN(12.0), peak_nits }
    }

    pub fn pu(peak_nits: f64) -> Self {
        Self { kind: TransferKind::Pu, peak_nits }
    }

    pub fn eotf(&self, code: f64) -> Result<f64, TransferError> {
        if !(0.0..=1.0).contains(&code) {
            return Err(TransferError::CodeOutOfRange(code));
        }
        Ok(self.eotf_unchecked(code))
    }

    /// Luminance → code. Luminance above peak saturates at code 1.
    pub fn oetf(&self, luminance: f64) -> Result<f64, TransferError> {
        if luminance.is_nan() || luminance < 0.0 {
            return Err(TransferError::NegativeLuminance(luminance));
        }
        Ok(self.oetf_unchecked(luminance.min(self.peak_nits)))
    }

    pub(crate) fn eotf_unchecked(&self, code: f64) -> f64 {
        let peak = self.peak_nits;
        match self.kind {
            TransferKind::Gamma(g) => peak * code.powf(g),
            TransferKind::Srgb => peak * srgb_eotf(code),
            TransferKind::Pq => pq_eotf(code),
            TransferKind::LogN(decades) => {
                if code <= 0.0 {
                    0.0
                } else {
                    peak * 10f64.powf(decades * (code - 1.0))
                }
            }
            TransferKind::Pu => pq_eotf(code * pq_oetf(peak)),
        }
    }

    pub(crate) fn oetf_unchecked(&self, luminance: f64) -> f64 {
        let peak = self.peak_nits;
        let rel = luminance / peak;
        match self.kind {
            TransferKind::Gamma(g) => rel.powf(1.0 / g),
            TransferKind::Srgb => srgb_oetf(rel),
            TransferKind::Pq => pq_oetf(luminance),
            TransferKind::LogN(decades) => {
                if rel <= 0.0 {
                    0.0
                } else {
                    (1.0 + rel.log10() / decades).max(0.0)
                }
            }
            TransferKind::Pu => pq_oetf(luminance) / pq_oetf(peak),
        }
    }
}

impl fmt::Display for TransferFunction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.kind {
            TransferKind::Gamma(2.2) => write!(f, "gamma22"),
            TransferKind::Gamma(g) => write!(f, "gamma{g}"),
            TransferKind::Srgb => write!(f, "srgb"),
            TransferKind::Pq => write!(f, "pq"),
            TransferKind::LogN(_) => write!(f, "log"),
            TransferKind::Pu => write!(f, "pu"),
        }
    }
}

impl FromStr for TransferFunction {
    type Err = TransferError;

    /// Parses the CLI names `gamma22`, `srgb`, `pq`, `log`, `pu`. The
    /// absolute kinds other than PQ default to a 10 000 nit peak.
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "gamma22" => Ok(Self::gamma22()),
            "srgb" => Ok(Self::srgb()),
            "pq" => Ok(Self::pq()),
            "log" => Ok(Self::log(pq::PEAK)),
            "pu" => Ok(Self::pu(pq::PEAK)),
            _ => Err(TransferError::BadParameter("unknown transfer function")),
        }
    }
}

/// Integer codes produced by [`quantize`].
#[derive(Clone, Debug, PartialEq)]
pub struct Quantized {
    pub bits: u32,
    pub codes: Vec<u16>,
    /// Largest ratio between consecutive nonzero reconstruction levels.
    pub max_step_ratio: f64,
    /// Largest relative error of the dequantized input luminances
    /// (inputs at zero are skipped).
    pub max_relative_error: f64,
}

fn check_bits(bits: u32) -> Result<u32, TransferError> {
    if (1..=16).contains(&bits) {
        Ok(bits)
    } else {
        Err(TransferError::BadParameter("bit depth must be in 1..=16"))
    }
}

/// Ratio between adjacent nonzero reconstruction levels, maximized over the
/// code lattice.
pub fn max_step_ratio(tf: &TransferFunction, bits: u32) -> Result<f64, TransferError> {
    let levels = (1u32 << check_bits(bits)?) - 1;
    let mut worst: f64 = 1.0;
    let mut prev = tf.eotf_unchecked(0.0);
    for k in 1..=levels {
        let cur = tf.eotf_unchecked(k as f64 / levels as f64);
        if prev > 0.0 {
            worst = worst.max(cur / prev);
        }
        prev = cur;
    }
    Ok(worst)
}

/// Uniform quantization of the code domain to `bits` bits.
pub fn quantize(tf: &TransferFunction, luminances: &[f64], bits: u32) -> Result<Quantized, TransferError> {
    let levels = ((1u32 << check_bits(bits)?) - 1) as f64;
    let mut codes = Vec::with_capacity(luminances.len());
    let mut max_relative_error: f64 = 0.0;
    for &l in luminances {
        let code = (tf.oetf(l)? * levels).round() as u16;
        let back = tf.eotf_unchecked(code as f64 / levels);
        if l > 0.0 {
            max_relative_error = max_relative_error.max((back - l).abs() / l);
        }
        codes.push(code);
    }
    Ok(Quantized { bits, codes, max_step_ratio: max_step_ratio(tf, bits)?, max_relative_error })
}

pub fn dequantize(tf: &TransferFunction, codes: &[u16], bits: u32) -> Result<Vec<f64>, TransferError> {
    let levels = ((1u32 << check_bits(bits)?) - 1) as f64;
    codes
        .iter()
        .map(|&c| {
            let c = c as f64;
            if c > levels {
                Err(TransferError::CodeOutOfRange(c / levels))
            } else {
                Ok(tf.eotf_unchecked(c / levels))
            }
        })
        .collect()
}
