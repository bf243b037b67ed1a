//! Compact per-pixel HDR encodings: shared-exponent RGBE/XYZE, 32-bit LogLuv
//! and IEEE 754 binary16.

use crate::color::ColorSpace;
use crate::error::EncodingError;

/// Exponent bias of the shared-exponent encodings.
pub const RGBE_BIAS: i32 = 128;

/// Shared-exponent pixel: three 8-bit mantissas scaled by `2^(e - 128) / 256`.
///
/// Byte layout on disk is `[r, g, b, e]`. A zero exponent is the canonical
/// black pixel with zero mantissas; otherwise the largest mantissa is at
/// least 128.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Default)]
pub struct RgbePixel {
    pub r: u8,
    pub g: u8,
    pub b: u8,
    pub e: u8,
}

impl RgbePixel {
    pub const ZERO: RgbePixel = RgbePixel { r: 0, g: 0, b: 0, e: 0 };

    pub fn to_bytes(self) -> [u8; 4] {
        [self.r, self.g, self.b, self.e]
    }

    pub fn from_bytes(b: [u8; 4]) -> Self {
        Self { r: b[0], g: b[1], b: b[2], e: b[3] }
    }

    /// Whether the pixel satisfies the canonical-zero / normalization rules.
    pub fn is_normalized(self) -> bool {
        if self.e == 0 {
            self.r == 0 && self.g == 0 && self.b == 0
        } else {
            self.r.max(self.g).max(self.b) >= 128
        }
    }
}

/// Binary exponent `k` with `v / 2^k` in `[0.5, 1)`, for finite `v > 0`.
fn frexp_exponent(v: f64) -> i32 {
    let bits = v.to_bits();
    let raw = ((bits >> 52) & 0x7ff) as i32;
    if raw == 0 {
        // f64 subnormal: never reached from f32 inputs, handled for completeness.
        let lz = (bits << 12).leading_zeros() as i32;
        return -1022 - lz;
    }
    raw - 1022
}

/// Encodes a non-negative linear triple.
///
/// The exponent normalizes the largest component's mantissa into
/// `[128, 255]`; mantissas are rounded to nearest and the largest is clamped
/// at 255, which bounds the per-component error by `max / 256`.
pub fn rgbe_encode(px: [f32; 3]) -> Result<RgbePixel, EncodingError> {
    if px.iter().any(|v| !v.is_finite()) {
        return Err(EncodingError::NonFiniteSample);
    }
    if px.iter().any(|&v| v < 0.0) {
        return Err(EncodingError::NegativeInRgbe);
    }
    let v = [px[0] as f64, px[1] as f64, px[2] as f64];
    let max = v[0].max(v[1]).max(v[2]);
    if max > 2f64.powi(127) {
        return Err(EncodingError::Overflow);
    }
    if max == 0.0 {
        return Ok(RgbePixel::ZERO);
    }
    // 2^127 itself would need exponent 256; it fits at 255 with a clamped
    // mantissa.
    let e = (frexp_exponent(max) + RGBE_BIAS).min(255);
    if e <= 0 {
        return Ok(RgbePixel::ZERO);
    }
    let scale = 256.0 / 2f64.powi(e - RGBE_BIAS);
    let q = |c: f64| (c * scale).round().min(255.0) as u8;
    Ok(RgbePixel { r: q(v[0]), g: q(v[1]), b: q(v[2]), e: e as u8 })
}

/// Direct inversion: `component = mantissa / 256 * 2^(e - 128)`.
pub fn rgbe_decode(p: RgbePixel) -> [f32; 3] {
    if p.e == 0 {
        return [0.0; 3];
    }
    let f = 2f64.powi(p.e as i32 - RGBE_BIAS) / 256.0;
    [(p.r as f64 * f) as f32, (p.g as f64 * f) as f32, (p.b as f64 * f) as f32]
}

/// Shared-exponent encoding of an XYZ triple. Same arithmetic as RGBE.
pub fn xyze_encode(xyz: [f32; 3]) -> Result<RgbePixel, EncodingError> {
    rgbe_encode(xyz)
}

pub fn xyze_decode(p: RgbePixel) -> [f32; 3] {
    rgbe_decode(p)
}

/// Converts linear RGB (possibly with negative components) to XYZ and
/// encodes it as XYZE.
pub fn rgb_to_xyze(rgb: [f64; 3], cs: &ColorSpace) -> Result<RgbePixel, EncodingError> {
    let xyz = cs.rgb_to_xyz_pixel(rgb);
    // Real colors have non-negative XYZ; tiny negatives are rounding noise.
    let clamp = |v: f64| if v < 0.0 && v > -1e-9 * xyz[1].abs().max(1e-30) { 0.0 } else { v };
    xyze_encode([clamp(xyz[0]) as f32, clamp(xyz[1]) as f32, clamp(xyz[2]) as f32])
}

/// 32-bit LogLuv pixel: sign bit, 15-bit log-luminance code, 8-bit u′ and v′
/// codes. Serialized as a big-endian word with the sign in the MSB.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Default)]
pub struct LogLuvPixel {
    pub sign: bool,
    pub le: u16,
    pub ue: u8,
    pub ve: u8,
}

impl LogLuvPixel {
    pub const ZERO: LogLuvPixel = LogLuvPixel { sign: false, le: 0, ue: 0, ve: 0 };

    pub fn to_word(self) -> u32 {
        ((self.sign as u32) << 31) | ((self.le as u32 & 0x7fff) << 16) | ((self.ue as u32) << 8) | self.ve as u32
    }

    pub fn from_word(w: u32) -> Self {
        Self { sign: w >> 31 == 1, le: ((w >> 16) & 0x7fff) as u16, ue: (w >> 8) as u8, ve: w as u8 }
    }

    pub fn to_bytes(self) -> [u8; 4] {
        self.to_word().to_be_bytes()
    }

    pub fn from_bytes(b: [u8; 4]) -> Self {
        Self::from_word(u32::from_be_bytes(b))
    }
}

const LOGLUV_UV_SCALE: f64 = 410.0;

/// Log-luminance code `⌊256 (log2 Y + 64)⌋`, clamped to the 15-bit range.
fn logluv_le(y: f64) -> u16 {
    let code = (256.0 * (y.log2() + 64.0)).floor();
    code.clamp(1.0, 32767.0) as u16
}

pub fn logluv_encode(xyz: [f64; 3]) -> Result<LogLuvPixel, EncodingError> {
    if xyz.iter().any(|v| !v.is_finite()) {
        return Err(EncodingError::NonFiniteSample);
    }
    let [x, y, z] = xyz;
    if y <= 0.0 {
        return Ok(LogLuvPixel::ZERO);
    }
    let le = logluv_le(y);
    let denom = x + 15.0 * y + 3.0 * z;
    let (u, v) = if denom > 0.0 { (4.0 * x / denom, 9.0 * y / denom) } else { (0.0, 0.0) };
    let q = |c: f64| (LOGLUV_UV_SCALE * c).floor().clamp(0.0, 255.0) as u8;
    Ok(LogLuvPixel { sign: false, le, ue: q(u), ve: q(v) })
}

/// Decodes to XYZ, reconstructing at bin centers.
pub fn logluv_decode(p: LogLuvPixel) -> [f64; 3] {
    if p.le == 0 {
        return [0.0; 3];
    }
    let mut y = ((p.le as f64 + 0.5) / 256.0 - 64.0).exp2();
    if p.sign {
        y = -y;
    }
    let u = (p.ue as f64 + 0.5) / LOGLUV_UV_SCALE;
    let v = (p.ve as f64 + 0.5) / LOGLUV_UV_SCALE;
    let x = y * 9.0 * u / (4.0 * v);
    let z = y * (12.0 - 3.0 * u - 20.0 * v) / (4.0 * v);
    [x, y, z]
}

/// u′v′ chromaticity of an XYZ triple.
pub fn uv_prime(xyz: [f64; 3]) -> (f64, f64) {
    let d = xyz[0] + 15.0 * xyz[1] + 3.0 * xyz[2];
    (4.0 * xyz[0] / d, 9.0 * xyz[1] / d)
}

/// Largest finite binary16 value, `(2 - 2^-10) * 2^15`.
pub const HALF_MAX: f32 = 65504.0;

/// f32 → binary16 with round-to-nearest-even.
///
/// Finite magnitudes above [`HALF_MAX`] clamp to it. Infinities stay
/// infinite and NaN payloads keep their top ten bits, so every binary16 code
/// survives decode → encode unchanged.
pub fn half_encode(value: f32) -> u16 {
    let bits = value.to_bits();
    let sign = ((bits >> 16) & 0x8000) as u16;
    let exp = ((bits >> 23) & 0xff) as i32;
    let man = bits & 0x7f_ffff;

    if exp == 0xff {
        if man == 0 {
            return sign | 0x7c00;
        }
        let payload = (man >> 13) as u16;
        return sign | 0x7c00 | if payload == 0 { 0x200 } else { payload };
    }
    if value.abs() > HALF_MAX {
        return sign | 0x7bff;
    }

    let half_exp = exp - 127 + 15;
    if half_exp >= 1 {
        // Normal range: drop 13 mantissa bits with round-to-nearest-even.
        let mut out = ((half_exp as u32) << 10) | (man >> 13);
        let rest = man & 0x1fff;
        if rest > 0x1000 || (rest == 0x1000 && out & 1 == 1) {
            out += 1;
        }
        // The bound check above keeps rounding from reaching infinity.
        return sign | out as u16;
    }
    if half_exp < -10 {
        // Below half the smallest subnormal.
        return sign;
    }
    // Subnormal result: value = full_man * 2^(exp - 150), target unit 2^-24.
    let full_man = man | 0x80_0000;
    let shift = (14 - half_exp) as u32;
    let mut out = full_man >> shift;
    let rest = full_man & ((1 << shift) - 1);
    let halfway = 1 << (shift - 1);
    if rest > halfway || (rest == halfway && out & 1 == 1) {
        out += 1;
    }
    sign | out as u16
}

pub fn half_decode(code: u16) -> f32 {
    let sign = ((code & 0x8000) as u32) << 16;
    let exp = ((code >> 10) & 0x1f) as u32;
    let man = (code & 0x3ff) as u32;
    let bits = match exp {
        0 if man == 0 => sign,
        0 => {
            // Subnormal: man * 2^-24, exactly representable in f32.
            let v = man as f32 * 2f32.powi(-24);
            return if sign != 0 { -v } else { v };
        }
        0x1f => sign | 0x7f80_0000 | (man << 13),
        _ => sign | ((exp + 127 - 15) << 23) | (man << 13),
    };
    f32::from_bits(bits)
}

/// Three binary16 codes, one per channel.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Default)]
pub struct HalfTriple(pub [u16; 3]);

impl HalfTriple {
    pub fn encode(px: [f32; 3]) -> Self {
        HalfTriple(px.map(half_encode))
    }

    pub fn decode(self) -> [f32; 3] {
        self.0.map(half_decode)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn px(r: u8, g: u8, b: u8, e: u8) -> RgbePixel {
        RgbePixel { r, g, b, e }
    }

    #[test]
    fn rgbe_zero_is_canonical() {
        assert_eq!(rgbe_encode([0.0; 3]).unwrap(), RgbePixel::ZERO);
        assert_eq!(rgbe_decode(RgbePixel::ZERO), [0.0; 3]);
    }

    #[test]
    fn rgbe_encode_examples() {
        // 0.3 = 0.6 * 2^-1 -> e = 127, scale 512; 153.6 rounds to 154.
        assert_eq!(rgbe_encode([0.3, 0.02, 0.1]).unwrap(), px(154, 10, 51, 127));
        assert_eq!(rgbe_encode([1.0, 1.0, 1.0]).unwrap(), px(128, 128, 128, 129));
    }

    #[test]
    fn rgbe_decode_examples() {
        let d = rgbe_decode(px(153, 10, 51, 127));
        assert_eq!(d, [153.0 / 512.0, 10.0 / 512.0, 51.0 / 512.0]);
        assert!((d[0] - 0.29883).abs() < 1e-5 && (d[1] - 0.01953).abs() < 1e-5 && (d[2] - 0.09961).abs() < 1e-5);
        assert_eq!(rgbe_decode(px(128, 128, 128, 129)), [1.0, 1.0, 1.0]);
    }

    #[test]
    fn rgbe_errors() {
        assert_eq!(rgbe_encode([-0.1, 0.0, 0.0]), Err(EncodingError::NegativeInRgbe));
        assert_eq!(rgbe_encode([f32::MAX, 0.0, 0.0]), Err(EncodingError::Overflow));
        assert_eq!(rgbe_encode([f32::NAN, 0.0, 0.0]), Err(EncodingError::NonFiniteSample));
    }

    #[test]
    fn rgbe_extreme_range_edges() {
        let top = 2f32.powi(127);
        let p = rgbe_encode([top, top * 0.25, 0.0]).unwrap();
        assert_eq!(p.e, 255);
        let d = rgbe_decode(p);
        assert!((d[0] as f64 - top as f64).abs() <= top as f64 / 256.0);
        let low = 2f32.powi(-126);
        let d = rgbe_decode(rgbe_encode([low, 0.0, low * 0.5]).unwrap());
        assert!((d[0] as f64 - low as f64).abs() <= low as f64 / 256.0);
    }

    #[test]
    fn xyze_keeps_wide_gamut_colors() {
        let cs = ColorSpace::rec709();
        let rgb = [-0.05, 0.6, 0.3];
        let xyz = cs.rgb_to_xyz_pixel(rgb);
        assert!(xyz.iter().all(|&v| v >= 0.0));
        let back = xyze_decode(rgb_to_xyze(rgb, &cs).unwrap());
        let max_xyz = xyz.iter().cloned().fold(0.0, f64::max);
        for c in 0..3 {
            assert!((back[c] as f64 - xyz[c]).abs() <= max_xyz / 256.0 + 1e-7);
        }
        let rgb_back = cs.xyz_to_rgb_pixel([back[0] as f64, back[1] as f64, back[2] as f64]);
        assert!(rgb_back[0] < 0.0, "negative component survives: {rgb_back:?}");
        // Error amplification through the inverse matrix is bounded by its row sums.
        for c in 0..3 {
            assert!((rgb_back[c] - rgb[c]).abs() <= 4.0 * max_xyz / 256.0);
        }
        assert_eq!(xyze_encode([0.0; 3]).unwrap(), RgbePixel::ZERO);
    }

    #[test]
    fn logluv_examples() {
        assert_eq!(logluv_encode([0.9505, 1.0, 1.089]).unwrap().le, 16384);
        let p = logluv_encode([0.9505, 1.0, 1.089]).unwrap();
        let (u, v) = uv_prime([0.9505, 1.0, 1.089]);
        assert!((u - 0.1978).abs() < 1e-4 && (v - 0.4683).abs() < 1e-4);
        assert_eq!((p.ue, p.ve), (81, 192));
        assert_eq!(logluv_encode([0.0; 3]).unwrap(), LogLuvPixel::ZERO);
        assert_eq!(logluv_decode(LogLuvPixel::ZERO), [0.0; 3]);
        assert_eq!(logluv_encode([f64::NAN, 1.0, 1.0]), Err(EncodingError::NonFiniteSample));
    }

    #[test]
    fn logluv_word_layout() {
        let p = LogLuvPixel { sign: true, le: 0x1234, ue: 0xab, ve: 0xcd };
        assert_eq!(p.to_word(), 0x9234_abcd);
        assert_eq!(p.to_bytes(), [0x92, 0x34, 0xab, 0xcd]);
        assert_eq!(LogLuvPixel::from_bytes(p.to_bytes()), p);
    }

    #[test]
    fn logluv_monotone_over_log_range() {
        // 5.4e-20 .. 1.8e19 spans the 15-bit code range; step well below one code.
        let mut prev = 0u16;
        let (lo, hi) = (5.4e-20f64.log2(), 1.8e19f64.log2());
        let n = 200_000;
        for i in 0..=n {
            let y = (lo + (hi - lo) * i as f64 / n as f64).exp2();
            let le = logluv_encode([y, y, y]).unwrap().le;
            assert!(le >= prev);
            prev = le;
        }
        // Strict at code resolution: one code per 1/256 octave.
        let a = logluv_encode([0.0, 1.0, 0.0]).unwrap().le;
        let b = logluv_encode([0.0, 2f64.powf(1.0 / 256.0), 0.0]).unwrap().le;
        assert_eq!(b, a + 1);
        assert_eq!(logluv_encode([0.0, 5.4e-20, 0.0]).unwrap().le, 1);
        assert!(logluv_encode([0.0, 1.8e19, 0.0]).unwrap().le > 32700);
        assert_eq!(logluv_encode([0.0, 2f64.powi(64), 0.0]).unwrap().le, 32767);
    }

    #[test]
    fn logluv_roundtrip_bounds() {
        use rand::{Rng, SeedableRng};
        let cs = ColorSpace::rec709();
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(3);
        for _ in 0..20_000 {
            let rgb = [rng.gen_range(0.01..100.0), rng.gen_range(0.01..100.0), rng.gen_range(0.01..100.0)];
            let xyz = cs.rgb_to_xyz_pixel(rgb);
            let back = logluv_decode(logluv_encode(xyz).unwrap());
            assert!((back[1] - xyz[1]).abs() / xyz[1] <= 0.003);
            let (u0, v0) = uv_prime(xyz);
            let (u1, v1) = uv_prime(back);
            assert!((u0 - u1).abs() <= 1.0 / 410.0 && (v0 - v1).abs() <= 1.0 / 410.0);
        }
    }

    #[test]
    fn half_examples() {
        assert_eq!(half_encode(1.0), 0x3c00);
        assert_eq!(half_decode(0x3c00), 1.0);
        assert_eq!(half_encode(0.0), 0x0000);
        assert_eq!(half_encode(-0.0), 0x8000);
        assert_eq!(half_decode(0x7bff), 65504.0);
        assert_eq!(HALF_MAX as f64, (2.0 - 2f64.powi(-10)) * 2f64.powi(15));
        assert_eq!(half_encode(1e6), 0x7bff);
        assert_eq!(half_encode(-70000.0), 0xfbff);
        assert_eq!(half_encode(f32::INFINITY), 0x7c00);
        assert_eq!(half_decode(0x0001), 2f32.powi(-24));
    }

    #[test]
    fn half_matches_reference_conversion() {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(11);
        for _ in 0..200_000 {
            let v = f32::from_bits(rng.gen::<u32>());
            if !v.is_finite() || v.abs() > HALF_MAX {
                continue;
            }
            assert_eq!(half_encode(v), half::f16::from_f32(v).to_bits(), "{v:e}");
        }
        for code in 0..=u16::MAX {
            let ours = half_decode(code);
            let reference = half::f16::from_bits(code).to_f32();
            assert!(ours.to_bits() == reference.to_bits() || (ours.is_nan() && reference.is_nan()));
        }
    }

    #[test]
    fn half_exhaustive_roundtrip() {
        for code in 0..=u16::MAX {
            assert_eq!(half_encode(half_decode(code)), code, "code {code:#06x}");
        }
    }

    proptest! {
        #[test]
        fn rgbe_error_bound(r in 0.0f32..1.0, g in 0.0f32..1.0, b in 0.0f32..1.0, exp in -126i32..127) {
            let s = 2f32.powi(exp);
            let x = [r * s, g * s, b * s];
            let max = x[0].max(x[1]).max(x[2]) as f64;
            prop_assume!(max >= 2f64.powi(-126));
            let p = rgbe_encode(x).unwrap();
            prop_assert!(p.is_normalized());
            let d = rgbe_decode(p);
            for c in 0..3 {
                prop_assert!((d[c] as f64 - x[c] as f64).abs() <= max / 256.0);
            }
        }

        #[test]
        fn rgbe_scale_covariant(r in 1e-3f32..1.0, g in 0.0f32..1.0, b in 0.0f32..1.0) {
            let a = rgbe_encode([r, g, b]).unwrap();
            let d = rgbe_encode([2.0 * r, 2.0 * g, 2.0 * b]).unwrap();
            prop_assert_eq!((a.r, a.g, a.b, a.e + 1), (d.r, d.g, d.b, d.e));
        }

        #[test]
        fn half_relative_error_in_normal_range(v in 6.2e-5f32..65504.0) {
            let back = half_decode(half_encode(v));
            prop_assert!(((back - v) / v).abs() <= 2f32.powi(-11));
        }
    }
}
