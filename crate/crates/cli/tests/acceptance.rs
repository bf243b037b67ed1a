//! Acceptance suite: one PASS/FAIL line per criterion.
//!
//! Runs without the libtest harness so the report is always printed.

use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::Path;
use std::process::Command;
use std::time::{Duration, Instant};

use hdrkit::encodings::{
    half_decode, half_encode, logluv_decode, logluv_encode, rgbe_decode, rgbe_encode, xyze_decode, xyze_encode,
};
use hdrkit::expand::{expand, ExpansionParams, Linearizer, Prefilter};
use hdrkit::formats::{read_hdr, read_pfm, write_hdr, write_hdr_xyze, write_pfm, write_ppm};
use hdrkit::layered::{decorrelation_gain, pack, unpack, LayeredStream, Mode, PackParams};
use hdrkit::merge::{
    estimate_response, merge, mtb_shift, AlignParams, EstimateParams, ExposureStack, ResponseCurve, WeightFunction,
};
use hdrkit::quality::{dri_classify, log_psnr, pu_psnr, DriLabel, DriMap, DriParams};
use hdrkit::synth::{corpus, expose, textured_scene};
use hdrkit::tonemap::{
    color_correct, correct_pixel, tonemap_global, ColorCorrection, Formula, GlobalParams, Saturation,
};
use hdrkit::transfer::TransferFunction;
use hdrkit::{Calibration, ColorSpace, HdrImage, SdrImage, TransferTag};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Rec. 709 luminance weights, written out independently of the library.
const W709: [f64; 3] = [0.2126, 0.7152, 0.0722];

type Outcome = Result<String, String>;
type Criterion = (&'static str, fn() -> Outcome);
type Oracle = (Linearizer, fn(f64) -> f64);

fn check(ok: bool, detail: String) -> Outcome {
    if ok {
        Ok(detail)
    } else {
        Err(detail)
    }
}

fn log_uniform(rng: &mut ChaCha8Rng, lo: f64, hi: f64) -> f64 {
    (rng.gen_range(lo.ln()..hi.ln())).exp()
}

fn srgb_to_linear(c: f64) -> f64 {
    if c <= 0.04045 {
        c / 12.92
    } else {
        ((c + 0.055) / 1.055).powf(2.4)
    }
}

// 1. Encoding bounds.
fn encodings() -> Outcome {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let cs = ColorSpace::rec709();
    let (mut rgbe_worst, mut xyze_worst, mut luv_worst) = (0f64, 0f64, 0f64);
    for _ in 0..1_000_000 {
        let scale = 2f64.powi(rng.gen_range(-60..60));
        let px = [0, 1, 2].map(|_| (rng.gen::<f64>() * scale) as f32);
        let max = px[0].max(px[1]).max(px[2]) as f64;
        if max > 0.0 {
            let d = rgbe_decode(rgbe_encode(px).map_err(|e| e.to_string())?);
            for c in 0..3 {
                rgbe_worst = rgbe_worst.max((d[c] as f64 - px[c] as f64).abs() / max);
            }
            let d = xyze_decode(xyze_encode(px).map_err(|e| e.to_string())?);
            for c in 0..3 {
                xyze_worst = xyze_worst.max((d[c] as f64 - px[c] as f64).abs() / max);
            }
        }
        let rgb = [0, 1, 2].map(|_| log_uniform(&mut rng, 1e-4, 1e6));
        let xyz = cs.rgb_to_xyz_pixel(rgb);
        let back = logluv_decode(logluv_encode(xyz).map_err(|e| e.to_string())?);
        luv_worst = luv_worst.max((back[1] - xyz[1]).abs() / xyz[1]);
    }
    let mut half_bad = 0;
    for code in 0..=u16::MAX {
        let v = half_decode(code);
        let oracle = half::f16::from_bits(code).to_f32();
        let same_value = v.to_bits() == oracle.to_bits() || (v.is_nan() && oracle.is_nan());
        if half_encode(v) != code || !same_value {
            half_bad += 1;
        }
    }
    let elapsed = start.elapsed();
    let bound = 2f64.powi(-8);
    check(
        rgbe_worst <= bound && xyze_worst <= bound && luv_worst <= 0.003 && half_bad == 0 && elapsed < Duration::from_secs(10),
        format!(
            "rgbe max err {rgbe_worst:.3e}·max, xyze {xyze_worst:.3e}·max (bound {bound:.3e}); logluv Y {:.4}% (≤ 0.3%); \
             half codes failing {half_bad}/65536; {:.2}s (< 10s)",
            luv_worst * 100.0,
            elapsed.as_secs_f64()
        ),
    )
}

fn random_image(rng: &mut ChaCha8Rng, max_side: usize) -> HdrImage {
    let (w, h) = (rng.gen_range(1..=max_side), rng.gen_range(1..=max_side));
    let data = (0..w * h * 3).map(|_| log_uniform(rng, 1e-3, 1e4) as f32).collect();
    HdrImage::new(w, h, data).unwrap()
}

// 2. Format fuzz and PFM roundtrip.
fn fuzz() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let cs = ColorSpace::rec709();
    let mut seeds: Vec<(bool, Vec<u8>)> = Vec::new();
    for i in 0..40 {
        let img = random_image(&mut rng, if i % 4 == 0 { 40 } else { 12 });
        let bytes = match i % 4 {
            0 => write_hdr(&img, true).unwrap(),
            1 => write_hdr(&img, false).unwrap(),
            2 => write_hdr_xyze(&img, true, &cs).unwrap(),
            _ => write_pfm(&img, i % 8 == 3),
        };
        seeds.push((i % 4 != 3, bytes));
    }
    let (mut panics, mut truncated_accepted, mut errors) = (0, 0, 0);
    for n in 0..10_000 {
        let (is_hdr, seed) = &seeds[rng.gen_range(0..seeds.len())];
        let mut input = seed.clone();
        let truncation = n % 2 == 0;
        if truncation {
            input.truncate(rng.gen_range(0..seed.len()));
        } else {
            for _ in 0..rng.gen_range(1..=8) {
                let at = rng.gen_range(0..input.len().max(1));
                match rng.gen_range(0..4) {
                    0 if !input.is_empty() => input[at] ^= 1 << rng.gen_range(0..8),
                    1 if !input.is_empty() => input[at] = rng.gen(),
                    2 if !input.is_empty() => {
                        input.remove(at);
                    }
                    _ => input.insert(at.min(input.len()), rng.gen()),
                }
            }
        }
        let result = catch_unwind(AssertUnwindSafe(|| {
            if *is_hdr {
                read_hdr(&input).map(|_| ()).map_err(|e| e.to_string())
            } else {
                read_pfm(&input).map(|_| ()).map_err(|e| e.to_string())
            }
        }));
        match result {
            Err(_) => panics += 1,
            Ok(Ok(())) if truncation => truncated_accepted += 1,
            Ok(Err(_)) => errors += 1,
            Ok(Ok(())) => {}
        }
    }
    let mut pfm_mismatch = 0;
    for i in 0..100 {
        let (w, h) = (rng.gen_range(1..=32), rng.gen_range(1..=32));
        let data: Vec<f32> = (0..w * h * 3)
            .map(|_| loop {
                let v = f32::from_bits(rng.gen());
                if v.is_finite() {
                    break v;
                }
            })
            .collect();
        let img = HdrImage::from_samples(w, h, data).unwrap();
        let back = read_pfm(&write_pfm(&img, i % 2 == 0)).map_err(|e| e.to_string())?;
        let same =
            back.dims() == img.dims() && back.data().iter().zip(img.data()).all(|(a, b)| a.to_bits() == b.to_bits());
        if !same {
            pfm_mismatch += 1;
        }
    }
    check(
        panics == 0 && truncated_accepted == 0 && pfm_mismatch == 0,
        format!(
            "10000 inputs: {panics} panics, {errors} typed errors, {truncated_accepted} truncated inputs accepted; \
             PFM bit-exact mismatches {pfm_mismatch}/100"
        ),
    )
}

// 3. Transfer functions.
fn transfer() -> Outcome {
    let pq = TransferFunction::pq();
    let peak = pq.eotf(1.0).map_err(|e| e.to_string())?;
    let mut worst = 0f64;
    for name in ["gamma22", "srgb", "pq", "log", "pu"] {
        let tf: TransferFunction = name.parse().map_err(|e: hdrkit::error::TransferError| e.to_string())?;
        for i in 0..=10_000 {
            let l = tf.peak_nits * 10f64.powf(-6.0 * i as f64 / 10_000.0);
            let back = tf.eotf(tf.oetf(l).map_err(|e| e.to_string())?).map_err(|e| e.to_string())?;
            worst = worst.max((back - l).abs() / l);
        }
    }
    let log = TransferFunction::log(10_000.0);
    let levels = 4095;
    let mut step = 1f64;
    let mut prev = 0.0;
    let mut lowest = f64::INFINITY;
    for k in 1..=levels {
        let cur = log.eotf(k as f64 / levels as f64).map_err(|e| e.to_string())?;
        if prev > 0.0 {
            step = step.max(cur / prev);
        }
        lowest = lowest.min(cur);
        prev = cur;
    }
    let decades = (10_000.0 / lowest).log10();
    check(
        peak == 10_000.0 && worst <= 1e-5 && step <= 1.007 && decades >= 11.99,
        format!(
            "PQ eotf(1) = {peak}; worst roundtrip {worst:.2e} (≤ 1e-5) over 6 decades; 12-bit log step ratio {step:.5} \
             (≤ 1.007) over {decades:.2} decades"
        ),
    )
}

// 4. Merge oracle.
fn merge_oracle() -> Outcome {
    let start = Instant::now();
    let scene = textured_scene(256, 256, 42, 2.5, 0.15, (0.0, 0.0));
    let times = [1.0, 4.0, 16.0];
    let frames: Vec<SdrImage> = times.iter().map(|&t| expose(&scene, t, 2.2)).collect();
    let stack = ExposureStack::new(frames.clone(), times.to_vec()).map_err(|e| e.to_string())?;
    let weight = WeightFunction::hat();
    let g = estimate_response(&stack, &weight, EstimateParams::default()).map_err(|e| e.to_string())?;

    // True response ln((z/255)^2.2), known up to an additive constant.
    let truth = |z: u8| 2.2 * (z as f64 / 255.0).ln();
    let diffs: Vec<f64> = (20..=235u8).map(|z| g.g(z) - truth(z)).collect();
    let off = diffs.iter().sum::<f64>() / diffs.len() as f64;
    let rmse = (diffs.iter().map(|d| (d - off).powi(2)).sum::<f64>() / diffs.len() as f64).sqrt();

    let merged = merge(&stack, &g, &weight);
    let mut pairs = Vec::new();
    for (i, (&m, &e)) in merged.image.data().iter().zip(scene.data()).enumerate() {
        let unclipped = frames.iter().filter(|f| (1..=254).contains(&f.data()[i])).count();
        if unclipped >= 2 {
            pairs.push((m as f64, e as f64));
        }
    }
    let mut ratios: Vec<f64> = pairs.iter().map(|(m, e)| e / m).collect();
    ratios.sort_by(f64::total_cmp);
    let k = ratios[ratios.len() / 2];
    let mut errs: Vec<f64> = pairs.iter().map(|(m, e)| (m * k - e).abs() / e).collect();
    errs.sort_by(f64::total_cmp);
    let p99 = errs[(errs.len() * 99) / 100];

    let doubled = ExposureStack::new(frames.clone(), times.iter().map(|t| t * 2.0).collect()).unwrap();
    let half_scale = merge(&doubled, &g, &weight);
    let reciprocity = merged.image.data().iter().zip(half_scale.image.data()).all(|(a, b)| *a == b * 2.0);
    let order = [2, 0, 1];
    let shuffled = ExposureStack::new(
        order.iter().map(|&i| frames[i].clone()).collect(),
        order.iter().map(|&i| times[i]).collect(),
    )
    .unwrap();
    let order_invariant = merge(&shuffled, &g, &weight).image.data() == merged.image.data();
    let elapsed = start.elapsed();
    check(
        rmse < 0.05 && p99 < 0.02 && reciprocity && order_invariant && elapsed < Duration::from_secs(30),
        format!(
            "g RMSE {rmse:.4} (< 0.05) on codes 20-235; radiance p99 rel err {:.3}% (< 2%) over {} samples; \
             reciprocity exact {reciprocity}; order invariant {order_invariant}; {:.2}s (< 30s)",
            p99 * 100.0,
            pairs.len(),
            elapsed.as_secs_f64()
        ),
    )
}

// 5. Alignment.
fn alignment() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let mut failures = Vec::new();
    for i in 0..20u64 {
        let (dx, dy) = match i {
            0 => (16, -16),
            1 => (-16, 16),
            _ => (rng.gen_range(-16..=16), rng.gen_range(-16..=16)),
        };
        let reference = textured_scene(256, 256, 100 + i, 1.5, 0.2, (0.0, 0.0));
        let moved = textured_scene(256, 256, 100 + i, 1.5, 0.2, (-dx as f64, -dy as f64));
        let got = mtb_shift(&expose(&reference, 1.0, 2.2), &expose(&moved, 0.5, 2.2), AlignParams::default());
        if got.as_ref().ok() != Some(&(-dx, -dy)) {
            failures.push(format!("image {i}: shift ({dx},{dy}) gave {got:?}"));
        }
    }
    check(failures.is_empty(), format!("{}/20 shifts recovered exactly {}", 20 - failures.len(), failures.join("; ")))
}

// 6. Color correction.
fn color_correction() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    let cs = ColorSpace::rec709();
    let (w, h) = (400, 250);
    let data = (0..w * h * 3).map(|_| log_uniform(&mut rng, 1e-3, 1e4) as f32).collect();
    let img = HdrImage::new(w, h, data).unwrap();
    let tm = tonemap_global(&img, &cs, GlobalParams::default()).map_err(|e| e.to_string())?;
    let mut eq4_worst = 0f64;
    let (mut achromatic_bad, mut equiv_bad, mut order_bad) = (0, 0, 0);
    for step in 0..=10 {
        let p = step as f64 / 10.0;
        let out = color_correct(&img, &tm, ColorCorrection { saturation: Saturation::Fixed(p), formula: Formula::Eq4 });
        for (i, px) in out.image.pixels().enumerate() {
            let lt = tm.l_t.data[i];
            let l = W709[0] * px[0] as f64 + W709[1] * px[1] as f64 + W709[2] * px[2] as f64;
            eq4_worst = eq4_worst.max((l - lt).abs() / lt);
        }
        for (i, px) in img.pixels().enumerate() {
            let rgb = px.map(|v| v as f64);
            let (lo, lt) = (tm.l_o.data[i], tm.l_t.data[i]);
            let e3 = correct_pixel(rgb, lo, lt, p, Formula::Eq3);
            if step == 0 && e3.iter().any(|&c| c != lt) {
                achromatic_bad += 1;
            }
            if step == 10 && e3 != correct_pixel(rgb, lo, lt, p, Formula::Eq4) {
                equiv_bad += 1;
            }
            for a in 0..3 {
                for b in 0..3 {
                    let kept = if rgb[a] > rgb[b] {
                        e3[a] >= e3[b]
                    } else if rgb[a] == rgb[b] {
                        e3[a] == e3[b]
                    } else {
                        true
                    };
                    if !kept {
                        order_bad += 1;
                    }
                }
            }
        }
    }
    check(
        eq4_worst <= 1e-6 && achromatic_bad == 0 && equiv_bad == 0 && order_bad == 0,
        format!(
            "Eq4 worst |L(I_t) - L_t|/L_t {eq4_worst:.2e} (≤ 1e-6) on 1e5 px × 11 p; Eq3 p=0 non-achromatic {achromatic_bad}; \
             p=1 Eq3≠Eq4 {equiv_bad}; hue-order violations {order_bad}"
        ),
    )
}

fn abs_image(w: usize, h: usize, f: impl Fn(usize, usize) -> f64) -> HdrImage {
    HdrImage::from_fn(w, h, |x, y| [f(x, y) as f32; 3]).unwrap().with_calibration(Calibration::Absolute)
}

fn grating(mean: f64, amp_log10: f64) -> HdrImage {
    abs_image(64, 16, |x, _| mean * 10f64.powf(amp_log10 * (2.0 * std::f64::consts::PI * x as f64 / 16.0).sin()))
}

fn labels_only(map: &DriMap, label: DriLabel) -> bool {
    map.count(label) > 0 && map.count(label) + map.count(DriLabel::None) == map.labels.len() * map.width * map.height
}

// 7. DRI classifier.
fn dri() -> Outcome {
    let cs = ColorSpace::rec709();
    let p = DriParams::default();
    let classify = |a: &HdrImage, b: &HdrImage| dri_classify(a, b, &cs, p).map_err(|e| e.to_string());
    let strong = grating(100.0, 0.3);
    let weak = grating(100.0, 0.0005);
    let inverted = grating(100.0, -0.3);
    let blank = abs_image(64, 16, |_, _| 100.0);
    let loss = labels_only(&classify(&strong, &weak)?, DriLabel::Loss);
    let amp = labels_only(&classify(&blank, &strong)?, DriLabel::Amplification);
    let rev = labels_only(&classify(&strong, &inverted)?, DriLabel::Reversal);

    let natural = corpus().remove(3).1;
    let compressed = {
        let d = natural.data().iter().map(|v| v.powf(0.4)).collect();
        HdrImage::new(natural.width(), natural.height(), d).unwrap().with_calibration(Calibration::Absolute)
    };
    let pairs = [(strong.clone(), weak), (blank, strong.clone()), (strong, inverted), (natural, compressed)];
    let (mut scale_changes, mut swap_bad, mut labeled) = (0usize, 0usize, 0usize);
    for (reference, test) in &pairs {
        let base = classify(reference, test)?;
        for k in [0.01f32, 3.7, 1000.0] {
            let scaled = classify(reference, &test.scaled(k, Calibration::Absolute).unwrap())?;
            scale_changes +=
                base.labels.iter().flatten().zip(scaled.labels.iter().flatten()).filter(|(a, b)| a != b).count();
        }
        let swapped = classify(test, reference)?;
        for (a, b) in base.labels.iter().flatten().zip(swapped.labels.iter().flatten()) {
            let expected = match a {
                DriLabel::Loss => DriLabel::Amplification,
                DriLabel::Amplification => DriLabel::Loss,
                other => *other,
            };
            if *a != DriLabel::None {
                labeled += 1;
            }
            if *b != expected {
                swap_bad += 1;
            }
        }
    }
    check(
        loss && amp && rev && scale_changes == 0 && swap_bad == 0 && labeled > 0,
        format!(
            "grating labels loss/amplification/reversal {loss}/{amp}/{rev}; labels changed by test scaling {scale_changes}; \
             swap mismatches {swap_bad} of {labeled} labeled sites"
        ),
    )
}

// 8. Metrics.
fn metrics() -> Outcome {
    let cs = ColorSpace::rec709();
    let mut worst = 0f64;
    for (_, img) in corpus() {
        let test = {
            let d = img
                .data()
                .iter()
                .enumerate()
                .map(|(i, v)| v * (1.0 + 0.05 * ((i * 7919) % 13) as f32 / 13.0))
                .collect();
            HdrImage::new(img.width(), img.height(), d).unwrap()
        };
        let s0 = log_psnr(&img, &test, &cs).map_err(|e| e.to_string())?.score;
        for k in [2f32.powi(-20), 0.125, 4.0, 2f32.powi(30)] {
            let s = log_psnr(
                &img.scaled(k, Calibration::Relative).unwrap(),
                &test.scaled(k, Calibration::Relative).unwrap(),
                &cs,
            )
            .map_err(|e| e.to_string())?
            .score;
            worst = worst.max((s - s0).abs());
        }
    }
    let flat = |v: f64| abs_image(16, 16, |_, _| v);
    let dl = 0.5;
    let dark = pu_psnr(&flat(1.0), &flat(1.0 + dl), &cs).map_err(|e| e.to_string())?.score;
    let bright = pu_psnr(&flat(1000.0), &flat(1000.0 + dl), &cs).map_err(|e| e.to_string())?.score;
    check(
        worst <= 1e-9 && dark < bright,
        format!("log-PSNR joint scaling max change {worst:.2e} (≤ 1e-9); PU-PSNR for ΔL={dl} nit: {dark:.2} dB at 1 nit < {bright:.2} dB at 1000 nits"),
    )
}

// 9. Layered codec.
fn layered() -> Outcome {
    let cs = ColorSpace::rec709();
    let mut notes = Vec::new();
    let mut ok = true;
    for (name, img) in corpus() {
        let stream =
            pack(&img, &cs, PackParams { mode: Mode::Lossless, ..Default::default() }).map_err(|e| e.to_string())?;
        let back = unpack(&LayeredStream::from_bytes(&stream.to_bytes()).map_err(|e| e.to_string())?, &cs)
            .map_err(|e| e.to_string())?;
        let exact =
            back.data().iter().zip(img.data()).all(|(a, b)| a.to_bits() == b.to_bits()) && back.dims() == img.dims();
        let mut standalone = true;
        for mode in [Mode::Lossless, Mode::Lossy16, Mode::Lossy8] {
            let s = pack(&img, &cs, PackParams { mode, ..Default::default() }).map_err(|e| e.to_string())?;
            let bytes = s.to_bytes();
            let ext = s.extension.as_ref().map_or(0, |e| e.len());
            let base_only = LayeredStream::from_bytes(&bytes[..bytes.len() - ext]).map_err(|e| e.to_string())?;
            let decoded = base_only.base_image().map_err(|e| e.to_string())?;
            standalone &= decoded.dims() == img.dims() && hdrkit::formats::read_ppm(&s.base).is_ok();
        }
        let gain = decorrelation_gain(&img, &cs, GlobalParams::default()).map_err(|e| e.to_string())?;
        let decorrelates = gain.residual_bits < gain.direct_bits;
        ok &= exact && standalone && decorrelates;
        notes.push(format!(
            "{name}: exact {exact}, base standalone {standalone}, residual {:.2} < direct {:.2} bits",
            gain.residual_bits, gain.direct_bits
        ));
    }
    check(ok, notes.join("; "))
}

fn gray_row(codes: &[u8]) -> SdrImage {
    SdrImage::new(codes.len(), 1, codes.iter().flat_map(|&c| [c; 3]).collect(), TransferTag::Srgb).unwrap()
}

// 10. Expansion.
fn expansion() -> Outcome {
    let cs = ColorSpace::rec709();
    let peak = 500.0;
    let gamma_table = *ResponseCurve::gamma(2.2).table();
    let linearizers: [Oracle; 3] = [
        (Linearizer::Srgb, |z| srgb_to_linear(z / 255.0)),
        (Linearizer::Gamma22, |z| (z / 255.0).powf(2.2)),
        (Linearizer::crf(gamma_table).map_err(|e| e.to_string())?, |z| (z / 255.0).powf(2.2)),
    ];
    let mut rng = ChaCha8Rng::seed_from_u64(10);
    let colored = SdrImage::new(64, 64, (0..64 * 64 * 3).map(|_| rng.gen()).collect(), TransferTag::Srgb).unwrap();
    let mut identity_worst = 0f64;
    for (lin, oracle) in &linearizers {
        let params = ExpansionParams { linearizer: lin.clone(), target_peak: peak, alpha: 1.0, ..Default::default() };
        let out = expand(&colored, &cs, &params).map_err(|e| e.to_string())?;
        for (code, v) in colored.data().iter().zip(out.image.data()) {
            let expected = peak * oracle(*code as f64);
            identity_worst = identity_worst.max((*v as f64 - expected).abs() / expected.max(1e-3));
        }
    }

    let ramp_codes: Vec<u8> = (0..512).map(|x| 100 + (x / 4) as u8).collect();
    let ramp = {
        let row: Vec<u8> = ramp_codes.iter().flat_map(|&c| [c; 3]).collect();
        SdrImage::new(512, 8, row.repeat(8), TransferTag::Srgb).unwrap()
    };
    let max_step = |img: &HdrImage| {
        let mut worst = 0f64;
        for y in 0..img.height() {
            for x in 1..img.width() {
                worst = worst.max(
                    (cs.luminance_of(img.pixel(x, y).map(|v| v as f64))
                        - cs.luminance_of(img.pixel(x - 1, y).map(|v| v as f64)))
                    .abs(),
                );
            }
        }
        worst
    };
    let base = ExpansionParams::default();
    let plain = expand(&ramp, &cs, &base).map_err(|e| e.to_string())?;
    let filtered = expand(&ramp, &cs, &ExpansionParams { prefilter: Some(Prefilter::default()), ..base.clone() })
        .map_err(|e| e.to_string())?;
    let (step_plain, step_filtered) = (max_step(&plain.image), max_step(&filtered.image));

    let all: Vec<u8> = (0..=255).collect();
    let mut monotone_bad = 0;
    for (lin, _) in &linearizers {
        for alpha in [1.0, 1.6, 2.5] {
            let params = ExpansionParams { linearizer: lin.clone(), alpha, ..Default::default() };
            let out = expand(&gray_row(&all), &cs, &params).map_err(|e| e.to_string())?;
            let confident: Vec<f32> =
                (0..256).filter(|&i| !out.low_confidence.data[i]).map(|i| out.image.pixel(i, 0)[1]).collect();
            monotone_bad += confident.windows(2).filter(|w| w[1] <= w[0]).count();
        }
    }
    check(
        identity_worst <= 1e-6 && step_filtered < step_plain && monotone_bad == 0,
        format!(
            "α=1 worst rel err {identity_worst:.2e} (≤ 1e-6); ramp max step {step_plain:.4} → {step_filtered:.4} nits with prefilter; \
             monotonicity violations {monotone_bad}"
        ),
    )
}

fn run_cli(dir: &Path, args: &[&str]) -> Result<Vec<u8>, String> {
    let out =
        Command::new(env!("CARGO_BIN_EXE_hdrkit")).current_dir(dir).args(args).output().map_err(|e| e.to_string())?;
    if !out.status.success() {
        return Err(format!("{args:?}: {}", String::from_utf8_lossy(&out.stderr)));
    }
    Ok(out.stdout)
}

// 11. End-to-end determinism.
fn determinism() -> Outcome {
    let inputs = tempfile::tempdir().map_err(|e| e.to_string())?;
    let src = inputs.path();
    let scene = corpus().remove(0).1.scaled(1.0 / 1000.0, Calibration::Relative).unwrap();
    std::fs::write(src.join("scene.pfm"), write_pfm(&scene, true)).unwrap();
    let radiance = textured_scene(96, 64, 77, 2.5, 0.15, (0.0, 0.0));
    let mut manifest = String::new();
    for (i, t) in [1.0, 4.0, 16.0].iter().enumerate() {
        let shifted = textured_scene(96, 64, 77, 2.5, 0.15, (i as f64, -(i as f64)));
        let frame = if i == 1 { expose(&radiance, *t, 2.2) } else { expose(&shifted, *t, 2.2) };
        std::fs::write(src.join(format!("f{i}.ppm")), write_ppm(&frame)).unwrap();
        manifest.push_str(&format!("f{i}.ppm {t}\n"));
    }
    std::fs::write(src.join("stack.txt"), manifest).unwrap();
    let s = |p: &str| src.join(p).to_string_lossy().into_owned();
    let commands: Vec<Vec<String>> = vec![
        vec!["convert".into(), s("scene.pfm"), "scene.hdr".into()],
        vec!["convert".into(), s("scene.pfm"), "scene.xyze.hdr".into(), "--xyze".into()],
        vec![
            "convert".into(),
            s("scene.pfm"),
            "scene.pq.ppm".into(),
            "--transfer".into(),
            "pq".into(),
            "--nits".into(),
            "1000".into(),
        ],
        vec!["info".into(), s("scene.pfm"), "--json".into()],
        vec![
            "merge".into(),
            "--stack".into(),
            s("stack.txt"),
            "-o".into(),
            "merged.hdr".into(),
            "--response-out".into(),
            "g.txt".into(),
        ],
        vec!["tonemap".into(), s("scene.pfm"), "-o".into(), "global.ppm".into()],
        vec![
            "tonemap".into(),
            s("scene.pfm"),
            "-o".into(),
            "local.ppm".into(),
            "--op".into(),
            "local".into(),
            "--formula".into(),
            "eq4".into(),
        ],
        vec!["expand".into(), "global.ppm".into(), "-o".into(), "expanded.hdr".into(), "--prefilter".into()],
        vec![
            "expand".into(),
            "global.ppm".into(),
            "-o".into(),
            "crf.pfm".into(),
            "--linearizer".into(),
            "crf:g.txt".into(),
        ],
        vec![
            "compare".into(),
            s("scene.pfm"),
            "expanded.hdr".into(),
            "--metric".into(),
            "pu-psnr,log-psnr,pu-ssim,dri".into(),
            "--nits".into(),
            "1000".into(),
            "--maps".into(),
            "map".into(),
        ],
        vec!["pack".into(), s("scene.pfm"), "-o".into(), "lossless.hdrl".into()],
        vec!["pack".into(), s("scene.pfm"), "-o".into(), "lossy16.hdrl".into(), "--mode".into(), "lossy16".into()],
        vec!["pack".into(), s("scene.pfm"), "-o".into(), "lossy8.hdrl".into(), "--mode".into(), "lossy8".into()],
        vec!["unpack".into(), "lossy8.hdrl".into(), "-o".into(), "unpacked.pfm".into()],
        vec!["unpack".into(), "lossy16.hdrl".into(), "-o".into(), "base.ppm".into(), "--base-only".into()],
    ];
    let mut runs = Vec::new();
    let dirs: Vec<_> = (0..3).map(|_| tempfile::tempdir().unwrap()).collect();
    for (dir, threads) in dirs.iter().zip(["1", "1", "4"]) {
        let mut transcript = Vec::new();
        for cmd in &commands {
            let mut args: Vec<&str> = vec!["--threads", threads];
            args.extend(cmd.iter().map(String::as_str));
            transcript.extend(run_cli(dir.path(), &args)?);
        }
        let mut files: Vec<(String, Vec<u8>)> = std::fs::read_dir(dir.path())
            .unwrap()
            .map(|e| {
                let e = e.unwrap();
                (e.file_name().to_string_lossy().into_owned(), std::fs::read(e.path()).unwrap())
            })
            .collect();
        files.sort();
        runs.push((transcript, files));
    }
    let same_runs = runs[0] == runs[1];
    let same_threads = runs[0] == runs[2];
    check(
        same_runs && same_threads,
        format!(
            "{} commands, {} output files: identical across runs {same_runs}, across 1 vs 4 threads {same_threads}",
            commands.len(),
            runs[0].1.len()
        ),
    )
}

fn main() {
    let criteria: [Criterion; 11] = [
        ("encoding bounds", encodings),
        ("format fuzz", fuzz),
        ("transfer functions", transfer),
        ("merge oracle", merge_oracle),
        ("alignment", alignment),
        ("color correction", color_correction),
        ("DRI classifier", dri),
        ("metrics", metrics),
        ("layered codec", layered),
        ("expansion", expansion),
        ("end-to-end determinism", determinism),
    ];
    let mut failed = 0;
    for (i, (name, f)) in criteria.iter().enumerate() {
        let outcome = catch_unwind(f).unwrap_or_else(|_| Err("panicked".into()));
        match outcome {
            Ok(detail) => println!("criterion {:>2} {name}: PASS ({detail})", i + 1),
            Err(detail) => {
                failed += 1;
                println!("criterion {:>2} {name}: FAIL ({detail})", i + 1);
            }
        }
    }
    println!("acceptance: {} passed, {failed} failed", criteria.len() - failed);
    if failed > 0 {
        std::process::exit(1);
    }
}
