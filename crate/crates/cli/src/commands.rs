//! One handler per subcommand.

use std::fmt::Write as _;
use std::path::Path;

use anyhow::{bail, Context, Result};
use hdrkit::expand::{expand as expand_image, ExpansionParams, Linearizer, Prefilter};
use hdrkit::formats::{write_hdr_xyze, write_pfm, write_ppm, FileFormat};
use hdrkit::layered::{pack as pack_image, unpack as unpack_stream, LayeredStream, PackParams};
use hdrkit::merge::{
    align_global, estimate_response, merge as merge_stack, AlignParams, EstimateParams, ExposureStack, ResponseCurve,
    WeightFunction,
};
use hdrkit::quality::{compare as run_metrics, DriParams, MetricKind};
use hdrkit::tonemap::{
    color_correct, encode_display, tonemap_global, tonemap_local, ColorCorrection, GlobalParams, LocalParams,
};
use hdrkit::transfer::TransferFunction;
use hdrkit::{luminance, Calibration, ColorSpace, HdrImage, Plane, SdrImage, TransferTag};
use serde_json::json;

use crate::io::{encode_hdr, load_hdr, load_sdr, read_bytes, require_file, resolve_format, save};
use crate::{CompareArgs, ConvertArgs, ExpandArgs, InfoArgs, MergeArgs, PackArgs, TonemapArgs, UnpackArgs};

fn cs() -> ColorSpace {
    ColorSpace::rec709()
}

fn check_nits(nits: Option<f64>) -> Result<Option<f64>> {
    match nits {
        Some(n) if !(n.is_finite() && n > 0.0) => bail!("--nits must be a positive number"),
        n => Ok(n),
    }
}

/// Scales a relative file to nits.
fn calibrate(img: HdrImage, nits: Option<f64>) -> Result<HdrImage> {
    match nits {
        Some(n) => Ok(img.scaled(n as f32, Calibration::Absolute)?),
        None => Ok(img),
    }
}

fn fmt_score(v: f64) -> String {
    if v.is_infinite() {
        if v > 0.0 {
            "inf".into()
        } else {
            "-inf".into()
        }
    } else {
        format!("{v:.6}")
    }
}

pub fn convert(a: &ConvertArgs) -> Result<()> {
    require_file(&a.input)?;
    let out_fmt = resolve_format(&a.output, a.format)?;
    let nits = check_nits(a.nits)?;
    let img = load_hdr(&a.input, a.input_format)?;
    let bytes = match out_fmt {
        FileFormat::Radiance if a.xyze => write_hdr_xyze(&img, !a.no_rle, &cs())?,
        FileFormat::Ppm => {
            let tf: TransferFunction = a.transfer.parse()?;
            let absolute = !matches!(a.transfer.as_str(), "gamma22" | "srgb");
            let scale = match (absolute, nits) {
                (true, None) => bail!("--transfer {} needs --nits to place the input on an absolute scale", a.transfer),
                (true, Some(n)) => n,
                (false, _) => 1.0,
            };
            let mut data = Vec::with_capacity(img.data().len());
            for &v in img.data() {
                let code = tf.oetf((v as f64 * scale).max(0.0))?;
                data.push((code.clamp(0.0, 1.0) * 255.0).round() as u8);
            }
            let tag = match a.transfer.as_str() {
                "gamma22" => TransferTag::Gamma22,
                "pq" => TransferTag::PqNormalized,
                _ => TransferTag::Srgb,
            };
            write_ppm(&SdrImage::new(img.width(), img.height(), data, tag)?)
        }
        fmt => encode_hdr(&img, fmt, !a.no_rle)?,
    };
    save(&a.output, &bytes)
}

pub fn info(a: &InfoArgs) -> Result<()> {
    require_file(&a.input)?;
    let fmt = resolve_format(&a.input, a.format)?;
    let img = load_hdr(&a.input, a.format)?;
    let lum = luminance(&img, &cs());
    let n = lum.data.len().max(1) as f64;
    let min = lum.data.iter().copied().fold(f64::INFINITY, f64::min);
    let max = lum.data.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let mean = lum.data.iter().sum::<f64>() / n;
    let (min, max) = if lum.data.is_empty() { (0.0, 0.0) } else { (min, max) };
    if a.json {
        let v = json!({
            "path": a.input.display().to_string(),
            "format": fmt.name(),
            "width": img.width(),
            "height": img.height(),
            "negative": img.allows_negative(),
            "min_luminance": min,
            "max_luminance": max,
            "mean_luminance": mean,
        });
        println!("{v}");
    } else {
        println!("path={}", a.input.display());
        println!("format={}", fmt.name());
        println!("width={}", img.width());
        println!("height={}", img.height());
        println!("negative={}", img.allows_negative());
        println!("min_luminance={min:.6e}");
        println!("max_luminance={max:.6e}");
        println!("mean_luminance={mean:.6e}");
    }
    Ok(())
}

/// Parses `path seconds` lines; `#` starts a comment.
fn read_manifest(path: &Path) -> Result<(Vec<SdrImage>, Vec<f64>)> {
    let text = String::from_utf8(read_bytes(path)?).with_context(|| format!("{} is not text", path.display()))?;
    let dir = path.parent().unwrap_or(Path::new(""));
    let (mut frames, mut times) = (Vec::new(), Vec::new());
    for (no, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let (file, secs) = line
            .rsplit_once(char::is_whitespace)
            .with_context(|| format!("{} line {}: expected `path exposure_seconds`", path.display(), no + 1))?;
        let t: f64 =
            secs.parse().with_context(|| format!("{} line {}: bad exposure time '{secs}'", path.display(), no + 1))?;
        let frame_path = dir.join(file.trim());
        require_file(&frame_path)?;
        frames.push(load_sdr(&frame_path)?);
        times.push(t);
    }
    Ok((frames, times))
}

pub fn merge(a: &MergeArgs, seed: u64) -> Result<()> {
    require_file(&a.stack)?;
    let out_fmt = resolve_format(&a.output, a.format)?;
    let (frames, times) = read_manifest(&a.stack)?;
    let mut stack = ExposureStack::new(frames, times).with_context(|| format!("stack {}", a.stack.display()))?;
    if !a.no_align && stack.len() > 1 {
        match align_global(&stack, AlignParams { levels: a.levels, ..Default::default() }) {
            Ok(al) => stack = al.stack,
            Err(e) => eprintln!("warning: {e}; merging without alignment"),
        }
    }
    let weight = WeightFunction::hat();
    let curve = match &a.response {
        Some(p) => {
            let text = String::from_utf8(read_bytes(p)?).with_context(|| format!("{} is not text", p.display()))?;
            let table = ResponseCurve::parse_table(&text).map_err(|e| anyhow::anyhow!("{}: {e}", p.display()))?;
            ResponseCurve::from_table(table, a.lambda)?
        }
        None => estimate_response(&stack, &weight, EstimateParams { lambda: a.lambda, sample_count: a.samples, seed })?,
    };
    let result = merge_stack(&stack, &curve, &weight);
    if let Some(p) = &a.response_out {
        save(p, curve.to_text().as_bytes())?;
    }
    let n = result.saturated.count();
    if n > 0 {
        eprintln!("note: {n} pixels had no well-exposed sample");
    }
    save(&a.output, &encode_hdr(&result.image, out_fmt, true)?)
}

pub fn tonemap(a: &TonemapArgs) -> Result<()> {
    require_file(&a.input)?;
    let img = load_hdr(&a.input, a.format)?;
    let result = match a.op.as_str() {
        "local" => tonemap_local(
            &img,
            &cs(),
            LocalParams { sigma_spatial: a.sigma_spatial, sigma_range: a.sigma_range, base_contrast: a.contrast },
        )?,
        _ => tonemap_global(&img, &cs(), GlobalParams { white_point: a.white, key: a.key })?,
    };
    let corrected = color_correct(&img, &result, ColorCorrection { saturation: a.saturation, formula: a.formula });
    let (sdr, _) = encode_display(&corrected.image, TransferTag::Srgb);
    save(&a.output, &write_ppm(&sdr))?;
    println!("clip_fraction={:.6}", corrected.clip_fraction);
    Ok(())
}

fn parse_linearizer(value: &str) -> Result<Linearizer> {
    match value {
        "srgb" => Ok(Linearizer::Srgb),
        "gamma22" => Ok(Linearizer::Gamma22),
        s => match s.strip_prefix("crf:") {
            Some(file) => {
                let p = Path::new(file);
                require_file(p)?;
                let text = String::from_utf8(read_bytes(p)?).with_context(|| format!("{file} is not text"))?;
                let table = ResponseCurve::parse_table(&text).map_err(|e| anyhow::anyhow!("{file}: {e}"))?;
                Ok(Linearizer::crf(table).with_context(|| format!("response table {file}"))?)
            }
            None => bail!("--linearizer must be srgb, gamma22 or crf:<file>"),
        },
    }
}

pub fn expand(a: &ExpandArgs) -> Result<()> {
    require_file(&a.input)?;
    let out_fmt = resolve_format(&a.output, a.format)?;
    let params = ExpansionParams {
        linearizer: parse_linearizer(&a.linearizer)?,
        target_peak: a.peak,
        alpha: a.alpha,
        prefilter: a.prefilter.then(Prefilter::default),
        ..Default::default()
    };
    let sdr = load_sdr(&a.input)?;
    let out = expand_image(&sdr, &cs(), &params)?;
    save(&a.output, &encode_hdr(&out.image, out_fmt, true)?)?;
    println!("low_confidence_pixels={}", out.low_confidence.count());
    Ok(())
}

fn plane_to_image(p: &Plane<f64>) -> Result<HdrImage> {
    let data = p.data.iter().flat_map(|&v| [v as f32; 3]).collect();
    Ok(HdrImage::from_samples(p.width, p.height, data)?)
}

pub fn compare(a: &CompareArgs) -> Result<()> {
    require_file(&a.reference)?;
    require_file(&a.test)?;
    let nits = check_nits(a.nits)?;
    let mut metrics: Vec<MetricKind> = Vec::new();
    for &m in &a.metric {
        if !metrics.contains(&m) {
            metrics.push(m);
        }
    }
    if nits.is_none() && metrics.iter().any(|m| matches!(m, MetricKind::PuPsnr | MetricKind::PuSsim)) {
        bail!("pu-psnr and pu-ssim need --nits to calibrate the inputs");
    }
    let reference = calibrate(load_hdr(&a.reference, None)?, nits)?;
    let test = calibrate(load_hdr(&a.test, None)?, nits)?;
    let dri = DriParams { pixels_per_degree: a.ppd, ..Default::default() };
    let reports = run_metrics(&reference, &test, &cs(), &metrics, dri)?;
    if let Some(prefix) = &a.maps {
        for r in &reports {
            if let Some(map) = &r.map {
                let mut name = prefix.as_os_str().to_owned();
                name.push(format!("-{}.pfm", r.metric.name()));
                save(Path::new(&name), &write_pfm(&plane_to_image(map)?, true))?;
            }
        }
    }
    if a.json {
        let list: Vec<_> = reports
            .iter()
            .map(|r| {
                let score = if r.score.is_finite() { json!(r.score) } else { json!(fmt_score(r.score)) };
                json!({ "metric": r.metric.name(), "score": score, "referral": r.referral.name() })
            })
            .collect();
        println!(
            "{}",
            json!({ "reference": a.reference.display().to_string(), "test": a.test.display().to_string(), "reports": list })
        );
    } else {
        let mut out = String::new();
        for r in &reports {
            writeln!(out, "metric={} score={} referral={}", r.metric.name(), fmt_score(r.score), r.referral.name())?;
        }
        print!("{out}");
    }
    Ok(())
}

pub fn pack(a: &PackArgs) -> Result<()> {
    require_file(&a.input)?;
    let img = load_hdr(&a.input, a.format)?;
    let stream = pack_image(
        &img,
        &cs(),
        PackParams { mode: a.mode, tonemap: GlobalParams { white_point: a.white, key: a.key } },
    )?;
    let bytes = stream.to_bytes();
    save(&a.output, &bytes)?;
    let ext = stream.extension.as_ref().map_or(0, |e| e.len());
    println!("base_bytes={} extension_bytes={} total_bytes={}", stream.base.len(), ext, bytes.len());
    Ok(())
}

pub fn unpack(a: &UnpackArgs) -> Result<()> {
    require_file(&a.input)?;
    let bytes = read_bytes(&a.input)?;
    let stream = LayeredStream::from_bytes(&bytes).with_context(|| format!("reading {}", a.input.display()))?;
    if a.base_only {
        let base = stream.base_image()?;
        return save(&a.output, &write_ppm(&base));
    }
    let out_fmt = resolve_format(&a.output, a.format)?;
    let img = unpack_stream(&stream, &cs()).with_context(|| format!("decoding {}", a.input.display()))?;
    let bytes = match out_fmt {
        FileFormat::Radiance if img.allows_negative() => write_hdr_xyze(&img, true, &cs())?,
        fmt => encode_hdr(&img, fmt, true)?,
    };
    save(&a.output, &bytes)
}
