//! Spatial filters on single-channel planes: separable Gaussian blur and the
//! brute-force bilateral filter used by the local tone mapper, the
//! expansion pre-filter and the band decomposition of the DRI classifier.
//!
//! Borders are handled by clamping coordinates to the edge. Rows are
//! processed in parallel; each output sample depends only on the input, so
//! results do not depend on the thread count.

use rayon::prelude::*;

use crate::image::Plane;

fn gaussian_kernel(sigma: f64) -> Vec<f64> {
    let radius = (3.0 * sigma).ceil().max(1.0) as isize;
    let mut k: Vec<f64> = (-radius..=radius).map(|i| (-(i * i) as f64 / (2.0 * sigma * sigma)).exp()).collect();
    let sum: f64 = k.iter().sum();
    k.iter_mut().for_each(|v| *v /= sum);
    k
}

#[inline]
fn clamp_index(i: isize, n: usize) -> usize {
    i.clamp(0, n as isize - 1) as usize
}

/// Separable Gaussian blur. `sigma <= 0` returns a copy.
pub fn gaussian_blur(src: &Plane<f64>, sigma: f64) -> Plane<f64> {
    if sigma <= 0.0 || src.data.is_empty() {
        return src.clone();
    }
    let (w, h) = src.dims();
    let k = gaussian_kernel(sigma);
    let r = (k.len() / 2) as isize;

    let mut tmp = vec![0.0; w * h];
    tmp.par_chunks_mut(w).enumerate().for_each(|(y, row)| {
        let line = &src.data[y * w..(y + 1) * w];
        for (x, out) in row.iter_mut().enumerate() {
            *out = k.iter().enumerate().map(|(j, kv)| kv * line[clamp_index(x as isize + j as isize - r, w)]).sum();
        }
    });
    let mut out = vec![0.0; w * h];
    out.par_chunks_mut(w).enumerate().for_each(|(y, row)| {
        for (x, o) in row.iter_mut().enumerate() {
            *o =
                k.iter().enumerate().map(|(j, kv)| kv * tmp[clamp_index(y as isize + j as isize - r, h) * w + x]).sum();
        }
    });
    Plane::from_vec(w, h, out)
}

/// Edge-preserving bilateral filter with Gaussian spatial and range kernels
/// over a window of radius `ceil(2 * sigma_spatial)`.
pub fn bilateral(src: &Plane<f64>, sigma_spatial: f64, sigma_range: f64) -> Plane<f64> {
    let (w, h) = src.dims();
    let radius = (2.0 * sigma_spatial).ceil().max(1.0) as isize;
    let spatial: Vec<f64> = (-radius..=radius)
        .flat_map(|dy| (-radius..=radius).map(move |dx| (dx, dy)))
        .map(|(dx, dy)| (-((dx * dx + dy * dy) as f64) / (2.0 * sigma_spatial * sigma_spatial)).exp())
        .collect();
    let inv_range = 1.0 / (2.0 * sigma_range * sigma_range);
    let side = (2 * radius + 1) as usize;

    let mut out = vec![0.0; w * h];
    out.par_chunks_mut(w.max(1)).enumerate().for_each(|(y, row)| {
        for (x, o) in row.iter_mut().enumerate() {
            let center = src.data[y * w + x];
            let (mut num, mut den) = (0.0, 0.0);
            for dy in -radius..=radius {
                let sy = clamp_index(y as isize + dy, h);
                let srow = &src.data[sy * w..(sy + 1) * w];
                let krow = &spatial[(dy + radius) as usize * side..];
                for dx in -radius..=radius {
                    let v = srow[clamp_index(x as isize + dx, w)];
                    let d = v - center;
                    let wgt = krow[(dx + radius) as usize] * (-d * d * inv_range).exp();
                    num += wgt * v;
                    den += wgt;
                }
            }
            *o = num / den;
        }
    });
    Plane::from_vec(w, h, out)
}
