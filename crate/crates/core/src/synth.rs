//! Deterministic synthetic scenes and camera simulation.
//!
//! Scenes are functions of continuous coordinates, so a translated crop of
//! the same scene is exact. Used as sample content by tests, benchmarks and
//! the CLI `info --demo` path.

use crate::image::{Calibration, HdrImage, SdrImage, TransferTag};

fn splitmix(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

fn lattice(seed: u64, ix: i64, iy: i64) -> f64 {
    let h = splitmix(seed ^ splitmix((ix as u64).wrapping_mul(0x1000_0000_01B3) ^ splitmix(iy as u64)));
    (h >> 11) as f64 / (1u64 << 53) as f64
}

fn smooth(t: f64) -> f64 {
    t * t * (3.0 - 2.0 * t)
}

/// Multi-octave value noise in `[0, 1]`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ValueNoise {
    pub seed: u64,
    /// Lattice spacing of the first octave in pixels.
    pub cell: f64,
    pub octaves: u32,
}

impl ValueNoise {
    pub fn new(seed: u64, cell: f64, octaves: u32) -> Self {
        Self { seed, cell, octaves: octaves.max(1) }
    }

    pub fn sample(&self, x: f64, y: f64) -> f64 {
        let (mut sum, mut norm, mut amp, mut cell) = (0.0, 0.0, 1.0, self.cell);
        for o in 0..self.octaves {
            let seed = splitmix(self.seed.wrapping_add(o as u64));
            let (fx, fy) = (x / cell, y / cell);
            let (ix, iy) = (fx.floor(), fy.floor());
            let (tx, ty) = (smooth(fx - ix), smooth(fy - iy));
            let (ix, iy) = (ix as i64, iy as i64);
            let a = lattice(seed, ix, iy);
            let b = lattice(seed, ix + 1, iy);
            let c = lattice(seed, ix, iy + 1);
            let d = lattice(seed, ix + 1, iy + 1);
            let top = a + (b - a) * tx;
            let bottom = c + (d - c) * tx;
            sum += amp * (top + (bottom - top) * ty);
            norm += amp;
            amp *= 0.5;
            cell *= 0.5;
        }
        sum / norm
    }
}

/// Textured scene with log-luminance spread over `decades` around `mid`,
/// mildly colored. `origin` offsets the sampling window.
pub fn textured_scene(width: usize, height: usize, seed: u64, decades: f64, mid: f64, origin: (f64, f64)) -> HdrImage {
    let lum = ValueNoise::new(seed, 24.0, 5);
    let tint = ValueNoise::new(seed ^ 0xA5A5, 40.0, 2);
    HdrImage::from_fn(width, height, |x, y| {
        let (sx, sy) = (x as f64 + origin.0, y as f64 + origin.1);
        let n = lum.sample(sx, sy);
        // Stretch the noise histogram so the full range is used.
        let t = ((n - 0.5) * 2.2).clamp(-0.5, 0.5);
        let l = mid * 10f64.powf(decades * t);
        let c = tint.sample(sx, sy);
        let rgb = [l * (0.8 + 0.4 * c), l, l * (1.2 - 0.4 * c)];
        rgb.map(|v| v as f32)
    })
    .expect("finite positive scene")
}

/// Camera simulation: `z = round(255 * clamp(E t, 0, 1)^(1/gamma))`.
pub fn expose(scene: &HdrImage, time: f64, gamma: f64) -> SdrImage {
    let data = scene
        .data()
        .iter()
        .map(|&e| {
            let v = (e as f64 * time).clamp(0.0, 1.0);
            (255.0 * v.powf(1.0 / gamma)).round() as u8
        })
        .collect();
    SdrImage::new(scene.width(), scene.height(), data, TransferTag::Gamma22).expect("dimensions match")
}

fn sky(width: usize, height: usize) -> HdrImage {
    let clouds = ValueNoise::new(7, 32.0, 4);
    let (sun_x, sun_y, sun_r) = (0.72 * width as f64, 0.22 * height as f64, 0.03 * width as f64);
    HdrImage::from_fn(width, height, |x, y| {
        let (fx, fy) = (x as f64, y as f64);
        let v = fy / height as f64;
        let d = ((fx - sun_x).powi(2) + (fy - sun_y).powi(2)).sqrt();
        if v > 0.65 {
            let g = 40.0 * (0.5 + clouds.sample(fx * 2.0, fy * 2.0));
            return [g * 0.9, g, g * 0.7].map(|c| c as f32);
        }
        let base = 800.0 + 3000.0 * (1.0 - v);
        let cloud = clouds.sample(fx, fy);
        let glow = 6000.0 * (-d / (4.0 * sun_r)).exp();
        let mut rgb = [base * (0.55 + 0.3 * cloud) + glow, base * (0.7 + 0.2 * cloud) + glow, base + glow * 0.9];
        if d < sun_r {
            rgb = [1.0e5, 0.97e5, 0.9e5];
        }
        rgb.map(|c| c as f32)
    })
    .expect("finite positive scene")
}

fn interior(width: usize, height: usize) -> HdrImage {
    let wall = ValueNoise::new(11, 12.0, 4);
    let outside = ValueNoise::new(12, 20.0, 3);
    let (wx0, wx1, wy0, wy1) = (0.55 * width as f64, 0.85 * width as f64, 0.15 * height as f64, 0.6 * height as f64);
    HdrImage::from_fn(width, height, |x, y| {
        let (fx, fy) = (x as f64, y as f64);
        if (wx0..wx1).contains(&fx) && (wy0..wy1).contains(&fy) {
            let l = 2000.0 * (0.6 + 0.8 * outside.sample(fx, fy));
            return [l * 0.85, l, l * 1.1].map(|c| c as f32);
        }
        let dist = ((fx - wx0).max(0.0).powi(2) + (fy - wy1).max(0.0).powi(2)).sqrt() / width as f64;
        let l = (0.5 + 20.0 * (-dist * 6.0).exp()) * (0.6 + 0.8 * wall.sample(fx, fy));
        [l * 1.1, l, l * 0.8].map(|c| c as f32)
    })
    .expect("finite positive scene")
}

fn night(width: usize, height: usize) -> HdrImage {
    let ground = ValueNoise::new(21, 10.0, 5);
    let lamps = [(0.2, 0.3), (0.5, 0.35), (0.8, 0.28)];
    HdrImage::from_fn(width, height, |x, y| {
        let (fx, fy) = (x as f64 / width as f64, y as f64 / height as f64);
        let mut l = 0.02 + 0.05 * ground.sample(x as f64, y as f64);
        for &(lx, ly) in &lamps {
            let d2 = ((fx - lx).powi(2) + (fy - ly).powi(2)) * 400.0;
            l += 3000.0 * (-d2 * 8.0).exp() + 5.0 / (1.0 + d2);
        }
        [l * 1.2, l, l * 0.6].map(|c| c as f32)
    })
    .expect("finite positive scene")
}

/// Small fixed set of sample scenes in nits, covering 2 to 7 decades.
pub fn corpus() -> Vec<(&'static str, HdrImage)> {
    let (w, h) = (96, 64);
    vec![
        ("sky", sky(w, h)),
        ("interior", interior(w, h)),
        ("night", night(w, h)),
        ("texture", textured_scene(w, h, 3, 3.0, 100.0, (0.0, 0.0))),
        ("soft-texture", textured_scene(w, h, 4, 2.0, 40.0, (0.0, 0.0))),
    ]
    .into_iter()
    .map(|(name, img)| (name, img.with_calibration(Calibration::Absolute)))
    .collect()
}
