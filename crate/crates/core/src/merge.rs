//! Multi-exposure HDR assembly: global alignment with median threshold
//! bitmaps, camera response recovery and the weighted radiance merge.
//!
//! Per channel, with response `g` and weights `w`:
//!
//! ```text
//! ln E = sum_j w(z_j) (g(z_j) - ln t_j) / sum_j w(z_j)
//! ```

use nalgebra::{DMatrix, DVector};
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::error::MergeError;
use crate::image::{HdrImage, Mask, Plane, SdrImage};

/// Frames of one static scene and their exposure times in seconds.
#[derive(Clone, Debug, PartialEq)]
pub struct ExposureStack {
    frames: Vec<SdrImage>,
    times: Vec<f64>,
}

impl ExposureStack {
    pub fn new(frames: Vec<SdrImage>, times: Vec<f64>) -> Result<Self, MergeError> {
        if frames.is_empty() {
            return Err(MergeError::BadStack("stack has no frames".into()));
        }
        if frames.len() != times.len() {
            return Err(MergeError::BadStack(format!("{} frames but {} exposure times", frames.len(), times.len())));
        }
        let dims = frames[0].dims();
        if let Some(i) = frames.iter().position(|f| f.dims() != dims) {
            return Err(MergeError::BadStack(format!("frame {i} is {:?}, expected {:?}", frames[i].dims(), dims)));
        }
        if let Some(&t) = times.iter().find(|t| !(t.is_finite() && **t > 0.0)) {
            return Err(MergeError::BadStack(format!("exposure time {t} is not positive")));
        }
        for (i, a) in times.iter().enumerate() {
            if times[i + 1..].contains(a) {
                return Err(MergeError::BadStack(format!("exposure time {a} appears twice")));
            }
        }
        Ok(Self { frames, times })
    }

    pub fn frames(&self) -> &[SdrImage] {
        &self.frames
    }

    pub fn times(&self) -> &[f64] {
        &self.times
    }

    pub fn len(&self) -> usize {
        self.frames.len()
    }

    pub fn is_empty(&self) -> bool {
        self.frames.is_empty()
    }

    pub fn dims(&self) -> (usize, usize) {
        self.frames[0].dims()
    }

    /// Frame indices sorted by increasing exposure time.
    pub fn order(&self) -> Vec<usize> {
        let mut idx: Vec<usize> = (0..self.len()).collect();
        idx.sort_by(|&a, &b| self.times[a].total_cmp(&self.times[b]));
        idx
    }

    /// Index of the middle exposure, the alignment reference.
    pub fn middle(&self) -> usize {
        self.order()[self.len() / 2]
    }
}

/// Per-code weights in `[0, 1]`, zero at both extremes.
#[derive(Clone, Debug, PartialEq)]
pub struct WeightFunction {
    table: [f64; 256],
}

impl WeightFunction {
    /// Hat: `z / 127.5` below mid-range, `(255 - z) / 127.5` above.
    pub fn hat() -> Self {
        let mut table = [0.0; 256];
        for (z, w) in table.iter_mut().enumerate() {
            *w = if z <= 127 { z as f64 / 127.5 } else { (255 - z) as f64 / 127.5 };
        }
        Self { table }
    }

    pub fn from_table(table: [f64; 256]) -> Result<Self, MergeError> {
        if table[0] != 0.0 || table[255] != 0.0 {
            return Err(MergeError::BadStack("weights must be zero at codes 0 and 255".into()));
        }
        if table[1..255].iter().any(|w| !(*w > 0.0 && *w <= 1.0)) {
            return Err(MergeError::BadStack("interior weights must lie in (0, 1]".into()));
        }
        Ok(Self { table })
    }

    #[inline]
    pub fn get(&self, z: u8) -> f64 {
        self.table[z as usize]
    }

    pub fn table(&self) -> &[f64; 256] {
        &self.table
    }
}

impl Default for WeightFunction {
    fn default() -> Self {
        Self::hat()
    }
}

/// Log exposure `g(z)` producing code `z`. Non-decreasing.
#[derive(Clone, Debug, PartialEq)]
pub struct ResponseCurve {
    g: [f64; 256],
    lambda: f64,
}

impl ResponseCurve {
    /// Accepts any non-decreasing table without NaN or `+inf`; `-inf` is
    /// allowed so that `g(0) = ln 0` can be represented.
    pub fn from_table(g: [f64; 256], lambda: f64) -> Result<Self, MergeError> {
        if g.iter().any(|v| v.is_nan() || *v == f64::INFINITY) {
            return Err(MergeError::BadStack("response table has NaN or +inf".into()));
        }
        if g.windows(2).any(|p| p[1] < p[0]) {
            return Err(MergeError::BadStack("response table is not monotone".into()));
        }
        Ok(Self { g, lambda })
    }

    /// `g(z) = gamma * ln(z / 255)`.
    pub fn gamma(gamma: f64) -> Self {
        let mut g = [0.0; 256];
        for (z, v) in g.iter_mut().enumerate() {
            *v = gamma * (z as f64 / 255.0).ln();
        }
        Self { g, lambda: 0.0 }
    }

    pub fn linear() -> Self {
        Self::gamma(1.0)
    }

    #[inline]
    pub fn g(&self, z: u8) -> f64 {
        self.g[z as usize]
    }

    pub fn table(&self) -> &[f64; 256] {
        &self.g
    }

    pub fn lambda(&self) -> f64 {
        self.lambda
    }

    /// One value per line, 256 lines.
    pub fn to_text(&self) -> String {
        self.g.iter().map(|v| format!("{v:?}\n")).collect()
    }

    /// Parses the output of [`ResponseCurve::to_text`]; blank lines and `#`
    /// comments are ignored. Monotonicity is not checked here.
    pub fn parse_table(text: &str) -> Result<[f64; 256], String> {
        let values: Vec<f64> = text
            .lines()
            .map(|l| l.split('#').next().unwrap_or("").trim())
            .filter(|l| !l.is_empty())
            .map(|l| l.parse::<f64>().map_err(|_| format!("bad number '{l}'")))
            .collect::<Result<_, _>>()?;
        values.try_into().map_err(|v: Vec<f64>| format!("expected 256 values, found {}", v.len()))
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct EstimateParams {
    /// Smoothness weight on the 0..255 code domain.
    pub lambda: f64,
    /// Pixel sites used by the solve; all three channels of each are used.
    pub sample_count: usize,
    pub seed: u64,
}

impl Default for EstimateParams {
    fn default() -> Self {
        Self { lambda: 20.0, sample_count: 512, seed: 0x5EED }
    }
}

/// Spatially uniform random sites, drawn round-robin from bins of the
/// middle exposure's green code so every part of the code range is covered.
fn sample_sites(stack: &ExposureStack, count: usize, seed: u64) -> Vec<usize> {
    let (w, h) = stack.dims();
    let mid = &stack.frames[stack.middle()];
    let mut idx: Vec<usize> = (0..w * h).collect();
    idx.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    const BINS: usize = 32;
    let mut bins: Vec<Vec<usize>> = vec![Vec::new(); BINS];
    for &i in &idx {
        let z = mid.data()[i * 3 + 1] as usize;
        bins[z * BINS / 256].push(i);
    }
    let mut out = Vec::with_capacity(count.min(w * h));
    let mut round = 0;
    while out.len() < count.min(w * h) {
        for bin in &bins {
            if let Some(&i) = bin.get(round) {
                out.push(i);
                if out.len() == count {
                    break;
                }
            }
        }
        round += 1;
    }
    out
}

/// Least-squares response recovery with a `lambda * w(z) * g''` smoothness
/// term and the pivot `g(128) = 0`. One curve is shared by the three
/// channels. The per-site log radiances are eliminated analytically, which
/// leaves a 256 x 256 symmetric system. The solution is made monotone by
/// isotonic regression and re-anchored at the pivot.
pub fn estimate_response(
    stack: &ExposureStack,
    weight: &WeightFunction,
    params: EstimateParams,
) -> Result<ResponseCurve, MergeError> {
    if stack.len() < 2 {
        return Err(MergeError::InsufficientSamples("response recovery needs at least two exposures".into()));
    }
    if !(params.lambda.is_finite() && params.lambda >= 0.0) {
        return Err(MergeError::BadStack("lambda must be non-negative".into()));
    }
    let ln_t: Vec<f64> = stack.times.iter().map(|t| t.ln()).collect();
    let sites = sample_sites(stack, params.sample_count, params.seed);

    let mut s = DMatrix::<f64>::zeros(256, 256);
    let mut r = DVector::<f64>::zeros(256);
    let mut informative = 0usize;
    let mut obs: Vec<(usize, f64, f64)> = Vec::with_capacity(stack.len());
    for &site in &sites {
        for c in 0..3 {
            obs.clear();
            for (frame, &lt) in stack.frames.iter().zip(&ln_t) {
                let z = frame.data()[site * 3 + c];
                let wz = weight.get(z);
                if wz > 0.0 {
                    obs.push((z as usize, wz * wz, lt));
                }
            }
            if obs.len() < 2 {
                continue;
            }
            informative += obs.len() - 1;
            let d: f64 = obs.iter().map(|o| o.1).sum();
            let re: f64 = -obs.iter().map(|o| o.1 * o.2).sum::<f64>();
            for &(z, a, lt) in &obs {
                s[(z, z)] += a;
                r[z] += a * lt;
            }
            // Schur complement of the site's log radiance.
            for &(zi, ai, _) in &obs {
                r[zi] -= -ai * re / d;
                for &(zk, ak, _) in &obs {
                    s[(zi, zk)] -= ai * ak / d;
                }
            }
        }
    }
    if informative < 2 * 256 {
        return Err(MergeError::InsufficientSamples(format!(
            "{informative} usable sample constraints, need at least {}",
            2 * 256
        )));
    }
    for z in 1..255 {
        let k = params.lambda * weight.table[z];
        let coef = [(z - 1, k), (z, -2.0 * k), (z + 1, k)];
        for &(i, ci) in &coef {
            for &(j, cj) in &coef {
                s[(i, j)] += ci * cj;
            }
        }
    }
    s[(128, 128)] += 1.0;

    let chol =
        s.cholesky().ok_or_else(|| MergeError::InsufficientSamples("response system is rank deficient".into()))?;
    let g = chol.solve(&r);
    if g.iter().any(|v| !v.is_finite()) {
        return Err(MergeError::InsufficientSamples("response system is rank deficient".into()));
    }
    let mut table: [f64; 256] = std::array::from_fn(|z| g[z]);
    isotonic(&mut table);
    let pivot = table[128];
    table.iter_mut().for_each(|v| *v -= pivot);
    Ok(ResponseCurve { g: table, lambda: params.lambda })
}

/// Pool-adjacent-violators projection onto non-decreasing sequences.
pub fn isotonic(values: &mut [f64]) {
    let mut blocks: Vec<(f64, usize)> = Vec::with_capacity(values.len());
    for &v in values.iter() {
        blocks.push((v, 1));
        while blocks.len() > 1 {
            let (b_mean, b_len) = blocks[blocks.len() - 1];
            let (a_mean, a_len) = blocks[blocks.len() - 2];
            if a_mean <= b_mean {
                break;
            }
            blocks.pop();
            let n = a_len + b_len;
            *blocks.last_mut().unwrap() = ((a_mean * a_len as f64 + b_mean * b_len as f64) / n as f64, n);
        }
    }
    let mut i = 0;
    for (mean, len) in blocks {
        values[i..i + len].fill(mean);
        i += len;
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct MergeResult {
    /// Relative radiance.
    pub image: HdrImage,
    /// Pixels where some channel had zero total weight and was filled from
    /// the shortest or longest exposure.
    pub saturated: Mask,
}

/// Weighted radiance merge. Frames are visited in order of exposure time,
/// so the result does not depend on the order of the stack. Log exposure is
/// accumulated relative to the shortest time, which makes scaling all times
/// by a power of two scale the output by the exact reciprocal.
pub fn merge(stack: &ExposureStack, curve: &ResponseCurve, weight: &WeightFunction) -> MergeResult {
    let (w, h) = stack.dims();
    let order = stack.order();
    let t_ref = stack.times[order[0]];
    let rel: Vec<(&[u8], f64)> =
        order.iter().map(|&i| (stack.frames[i].data(), (stack.times[i] / t_ref).ln())).collect();
    let (shortest, longest) = (rel[0], rel[rel.len() - 1]);

    let mut data = vec![0f32; w * h * 3];
    let mut flags = vec![false; w * h];
    data.par_chunks_mut((w * 3).max(1)).zip(flags.par_chunks_mut(w.max(1))).enumerate().for_each(|(y, (row, frow))| {
        for x in 0..w {
            for c in 0..3 {
                let k = (y * w + x) * 3 + c;
                let (mut num, mut den) = (0.0, 0.0);
                for &(frame, lt) in &rel {
                    let z = frame[k];
                    let wz = weight.get(z);
                    if wz > 0.0 {
                        num += wz * (curve.g(z) - lt);
                        den += wz;
                    }
                }
                let ln_e = if den > 0.0 {
                    num / den
                } else {
                    frow[x] = true;
                    let z = shortest.0[k];
                    if z >= 128 {
                        curve.g(z) - shortest.1
                    } else {
                        curve.g(longest.0[k]) - longest.1
                    }
                };
                row[x * 3 + c] = (ln_e.exp() / t_ref) as f32;
            }
        }
    });
    let image = HdrImage::new(w, h, data).expect("radiance is finite and non-negative");
    MergeResult { image, saturated: Plane::from_vec(w, h, flags) }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct AlignParams {
    /// Pyramid levels; shifts up to `2^levels - 1` pixels are searchable.
    pub levels: u32,
    /// Grey codes within this distance of the median are ignored.
    pub exclusion: u8,
}

impl Default for AlignParams {
    fn default() -> Self {
        Self { levels: 6, exclusion: 4 }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Alignment {
    pub stack: ExposureStack,
    /// Per frame `(dx, dy)`, applied as `out(x, y) = frame(x - dx, y - dy)`.
    pub shifts: Vec<(i32, i32)>,
    /// Pixels covered by every translated frame.
    pub valid: Mask,
}

impl Alignment {
    /// Largest absolute shift component, the global-misalignment magnitude.
    pub fn max_shift(&self) -> i32 {
        self.shifts.iter().map(|&(dx, dy)| dx.abs().max(dy.abs())).max().unwrap_or(0)
    }
}

fn grey(frame: &SdrImage) -> Plane<u8> {
    let data = frame.pixels().map(|[r, g, b]| ((54 * r as u32 + 183 * g as u32 + 19 * b as u32) >> 8) as u8).collect();
    Plane::from_vec(frame.width(), frame.height(), data)
}

fn half(p: &Plane<u8>) -> Plane<u8> {
    let (w, h) = (p.width / 2, p.height / 2);
    let mut data = Vec::with_capacity(w * h);
    for y in 0..h {
        for x in 0..w {
            let s = p.get(2 * x, 2 * y) as u32
                + p.get(2 * x + 1, 2 * y) as u32
                + p.get(2 * x, 2 * y + 1) as u32
                + p.get(2 * x + 1, 2 * y + 1) as u32;
            data.push(((s + 2) / 4) as u8);
        }
    }
    Plane::from_vec(w, h, data)
}

struct Bitmaps {
    w: usize,
    h: usize,
    bits: Vec<bool>,
    keep: Vec<bool>,
}

fn bitmaps(p: &Plane<u8>, exclusion: u8) -> Bitmaps {
    let mut hist = [0usize; 256];
    p.data.iter().for_each(|&v| hist[v as usize] += 1);
    let (mut acc, mut median) = (0, 0u8);
    for (v, &n) in hist.iter().enumerate() {
        acc += n;
        if 2 * acc >= p.data.len() {
            median = v as u8;
            break;
        }
    }
    Bitmaps {
        w: p.width,
        h: p.height,
        bits: p.data.iter().map(|&v| v > median).collect(),
        keep: p.data.iter().map(|&v| v.abs_diff(median) > exclusion).collect(),
    }
}

/// Fraction of mismatching, non-excluded bits between `a(x, y)` and
/// `b(x - dx, y - dy)` over the overlap, and the number of compared pixels.
fn mismatch(a: &Bitmaps, b: &Bitmaps, dx: i32, dy: i32) -> (f64, usize) {
    let (mut bad, mut n) = (0usize, 0usize);
    for y in 0..a.h as i32 {
        let sy = y - dy;
        if sy < 0 || sy >= b.h as i32 {
            continue;
        }
        for x in 0..a.w as i32 {
            let sx = x - dx;
            if sx < 0 || sx >= b.w as i32 {
                continue;
            }
            let i = y as usize * a.w + x as usize;
            let j = sy as usize * b.w + sx as usize;
            if a.keep[i] && b.keep[j] {
                n += 1;
                bad += (a.bits[i] != b.bits[j]) as usize;
            }
        }
    }
    (if n == 0 { 1.0 } else { bad as f64 / n as f64 }, n)
}

fn usable_levels(w: usize, h: usize, levels: u32) -> u32 {
    let mut l = 1;
    while l < levels && (w.min(h) >> l) >= 8 {
        l += 1;
    }
    l
}

/// Median-threshold-bitmap shift of `frame` onto `reference`.
pub fn mtb_shift(reference: &SdrImage, frame: &SdrImage, params: AlignParams) -> Result<(i32, i32), MergeError> {
    let (w, h) = reference.dims();
    let levels = usable_levels(w, h, params.levels.max(1));
    let mut pyr_a = vec![grey(reference)];
    let mut pyr_b = vec![grey(frame)];
    for _ in 1..levels {
        pyr_a.push(half(pyr_a.last().unwrap()));
        pyr_b.push(half(pyr_b.last().unwrap()));
    }
    let (ba, bb) = (bitmaps(&pyr_a[0], params.exclusion), bitmaps(&pyr_b[0], params.exclusion));
    let min_keep = (w * h / 100).max(1);
    if ba.keep.iter().filter(|&&k| k).count() < min_keep || bb.keep.iter().filter(|&&k| k).count() < min_keep {
        return Err(MergeError::AlignmentUnreliable("frame has too little contrast to align".into()));
    }

    let mut candidates: Vec<(i32, i32)> = (-1..=1).flat_map(|dy| (-1..=1).map(move |dx| (dx, dy))).collect();
    candidates.sort_by_key(|&(dx, dy)| dx.abs() + dy.abs());
    let (mut sx, mut sy) = (0i32, 0i32);
    for level in (0..levels as usize).rev() {
        let a = bitmaps(&pyr_a[level], params.exclusion);
        let b = bitmaps(&pyr_b[level], params.exclusion);
        let (cx, cy) = (sx * 2, sy * 2);
        let mut best = (f64::INFINITY, cx, cy);
        for &(dx, dy) in &candidates {
            let (e, n) = mismatch(&a, &b, cx + dx, cy + dy);
            if n > 0 && e < best.0 {
                best = (e, cx + dx, cy + dy);
            }
        }
        (sx, sy) = (best.1, best.2);
    }
    let limit = (1i32 << levels) - 1;
    let (err, _) = mismatch(&ba, &bb, sx, sy);
    if sx.abs() >= limit || sy.abs() >= limit {
        return Err(MergeError::AlignmentUnreliable(format!(
            "shift ({sx}, {sy}) reaches the search limit of {limit} px"
        )));
    }
    if err > 0.2 {
        return Err(MergeError::AlignmentUnreliable(format!(
            "{:.0}% of bitmap pixels disagree after alignment",
            err * 100.0
        )));
    }
    Ok((sx, sy))
}

/// `out(x, y) = frame(x - dx, y - dy)`; uncovered pixels become black and
/// are cleared in the returned mask.
pub fn translate(frame: &SdrImage, dx: i32, dy: i32) -> (SdrImage, Mask) {
    let (w, h) = frame.dims();
    let mut data = vec![0u8; w * h * 3];
    let mut valid = vec![false; w * h];
    for y in 0..h {
        let sy = y as i64 - dy as i64;
        if sy < 0 || sy >= h as i64 {
            continue;
        }
        for x in 0..w {
            let sx = x as i64 - dx as i64;
            if sx < 0 || sx >= w as i64 {
                continue;
            }
            let src = (sy as usize * w + sx as usize) * 3;
            data[(y * w + x) * 3..][..3].copy_from_slice(&frame.data()[src..src + 3]);
            valid[y * w + x] = true;
        }
    }
    (SdrImage::new(w, h, data, frame.transfer()).expect("same dimensions"), Plane::from_vec(w, h, valid))
}

/// Translates every frame onto the middle exposure.
pub fn align_global(stack: &ExposureStack, params: AlignParams) -> Result<Alignment, MergeError> {
    if stack.len() < 2 {
        return Err(MergeError::BadStack("alignment needs at least two frames".into()));
    }
    let (w, h) = stack.dims();
    let mid = stack.middle();
    let reference = &stack.frames[mid];
    let mut shifts = vec![(0, 0); stack.len()];
    for (i, frame) in stack.frames.iter().enumerate() {
        if i != mid {
            shifts[i] = mtb_shift(reference, frame, params)?;
        }
    }
    let mut valid = Plane::filled(w, h, true);
    let mut frames = Vec::with_capacity(stack.len());
    for (frame, &(dx, dy)) in stack.frames.iter().zip(&shifts) {
        let (moved, mask) = translate(frame, dx, dy);
        valid.data.iter_mut().zip(&mask.data).for_each(|(v, m)| *v &= m);
        frames.push(moved);
    }
    Ok(Alignment { stack: ExposureStack { frames, times: stack.times.clone() }, shifts, valid })
}
