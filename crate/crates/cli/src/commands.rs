use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use expofuse::image::ExposureStack;
use expofuse::io::{read_image_with_max_code, write_luminance};
use expofuse::metrics::{mean, well_exposedness_map};
use expofuse::synth::{builtin_field, check_linearity, make_stack, read_sidecar, write_stack};
use expofuse::{
    discrete_entropy, max_well_exposedness, read_image, statistical_naturalness, write_image,
    AdjustParams, BilateralParams, BlendMode, CrfModel, Error, FusionConfig, ImageFormat,
    PipelineConfig, ReadOptions, RgbImage, WeightScheme, WriteOptions,
};

use crate::settings::FuseSettings;
use crate::{
    Blend, CheckLinearArgs, FuseArgs, Gamut, MetricsArgs, SynthArgs, UsageError, Weights, WellArgs,
};

fn thread_pool(threads: Option<usize>) -> Result<rayon::ThreadPool> {
    let mut builder = rayon::ThreadPoolBuilder::new();
    if let Some(n) = threads {
        builder = builder.num_threads(n);
    }
    builder.build().context("cannot start worker threads")
}

/// Input paths in command-line order plus EV tags looked up by file name.
fn resolve_inputs(
    inputs: &[PathBuf],
    sidecar: Option<&Path>,
) -> Result<(Vec<PathBuf>, Option<Vec<f64>>)> {
    let Some(sidecar) = sidecar else {
        if inputs.is_empty() {
            return Err(UsageError("no input images".into()).into());
        }
        return Ok((inputs.to_vec(), None));
    };
    let entries = read_sidecar(sidecar)?;
    if inputs.is_empty() {
        if entries.is_empty() {
            return Err(UsageError(format!("{} lists no images", sidecar.display())).into());
        }
        let dir = sidecar.parent().unwrap_or(Path::new("."));
        let (paths, evs) = entries
            .into_iter()
            .map(|(name, ev)| (dir.join(name), ev))
            .unzip();
        return Ok((paths, Some(evs)));
    }
    let evs = inputs
        .iter()
        .map(|path| {
            let name = path
                .file_name()
                .and_then(|n| n.to_str())
                .unwrap_or_default();
            entries
                .iter()
                .find(|(n, _)| {
                    n == name || Path::new(n).file_name().and_then(|f| f.to_str()) == Some(name)
                })
                .map(|(_, ev)| *ev)
                .ok_or_else(|| UsageError(format!("{name} is not listed in {}", sidecar.display())))
        })
        .collect::<Result<Vec<_>, _>>()?;
    Ok((inputs.to_vec(), Some(evs)))
}

fn pipeline_config(s: &FuseSettings) -> Result<PipelineConfig> {
    let adjust = if s.adjust {
        let mut bilateral = BilateralParams::new(s.sigma_spatial, s.sigma_range)?;
        if s.exact_bilateral {
            bilateral = bilateral.exact();
        }
        Some(AdjustParams {
            bilateral,
            epsilon: s.epsilon,
            target_gray: s.target_gray,
        })
    } else {
        None
    };
    let fusion = FusionConfig {
        scheme: match s.weights {
            Weights::Simple => WeightScheme::Simple,
            Weights::Mertens => WeightScheme::Mertens,
        },
        blend: match s.blend {
            Blend::Naive => BlendMode::Naive,
            Blend::Pyramid => BlendMode::Pyramid,
        },
        levels: s.levels,
        ..FusionConfig::default()
    };
    Ok(PipelineConfig {
        adjust,
        fusion,
        display_srgb: s.srgb,
    })
}

pub fn fuse(args: FuseArgs) -> Result<ExitCode> {
    let settings = FuseSettings::resolve(&args)?;
    let (paths, evs) = resolve_inputs(&args.inputs, args.evs.as_deref())?;
    let config = pipeline_config(&settings)?;
    let read = ReadOptions {
        assume_srgb: settings.srgb,
    };
    let write = WriteOptions {
        encode_srgb: settings.srgb,
        clamp: true,
        bit_depth: settings.bit_depth.into(),
    };

    thread_pool(settings.threads)?.install(|| -> Result<ExitCode> {
        let images = paths
            .iter()
            .map(|p| read_image(p, read))
            .collect::<expofuse::Result<Vec<RgbImage>>>()?;
        let stack = ExposureStack::from_unordered(images, evs)?;
        let output = expofuse::run(&stack, &config)?;

        let out_of_gamut = output.fused.count_out_of_gamut();
        match settings.gamut {
            Gamut::Clip => {}
            Gamut::Warn if out_of_gamut > 0 => {
                eprintln!("warning: {out_of_gamut} pixels outside [0, 1] were clamped");
            }
            Gamut::Warn => {}
            Gamut::Error if out_of_gamut > 0 => {
                bail!("{out_of_gamut} fused pixels fall outside [0, 1]");
            }
            Gamut::Error => {}
        }
        write_image(&output.fused, &args.out, write)?;

        if let Some(dir) = &args.dump_intermediates {
            dump_intermediates(dir, &output, write)?;
        }
        if let Some(path) = &args.report {
            fs::write(path, output.report.to_json())
                .with_context(|| format!("cannot write {}", path.display()))?;
        }
        Ok(ExitCode::SUCCESS)
    })
}

/// Stage maps are indexed by position in the exposure-ordered stack.
fn dump_intermediates(
    dir: &Path,
    output: &expofuse::pipeline::RunOutput<f64>,
    write: WriteOptions,
) -> Result<()> {
    fs::create_dir_all(dir).with_context(|| format!("cannot create {}", dir.display()))?;
    let depth = expofuse::BitDepth::Sixteen;
    if let Some(adj) = &output.adjustment {
        for (i, lum) in adj.luminance.iter().enumerate() {
            write_luminance(lum, dir.join(format!("luminance_{i}.png")), depth)?;
            write_luminance(
                &adj.enhanced[i],
                dir.join(format!("enhanced_{i}.png")),
                depth,
            )?;
            write_luminance(
                &adj.tonemapped[i],
                dir.join(format!("tonemapped_{i}.png")),
                depth,
            )?;
            write_image(
                &adj.stack.images()[i],
                dir.join(format!("adjusted_{i}.png")),
                write,
            )?;
        }
        let plan = serde_json::to_string_pretty(&adj.plan)?;
        fs::write(dir.join("plan.json"), plan)?;
    }
    for (i, w) in output.weights.normalized()?.maps().iter().enumerate() {
        write_luminance(w, dir.join(format!("weight_{i}.png")), depth)?;
    }
    Ok(())
}

pub fn metrics(args: MetricsArgs) -> Result<ExitCode> {
    let mut out = String::new();
    if args.csv {
        out.push_str("path,statistical_naturalness,discrete_entropy,mean_well_exposedness\n");
    }
    for path in &args.images {
        // scored on the stored codes as displayed
        let image: RgbImage = read_image(path, ReadOptions::default())?;
        let naturalness = statistical_naturalness(&image);
        let entropy = discrete_entropy(&image);
        let exposedness = mean(&well_exposedness_map(&image));
        if args.csv {
            writeln!(
                out,
                "{},{naturalness:.6},{entropy:.6},{exposedness:.6}",
                csv_field(&path.display().to_string())
            )?;
        } else {
            writeln!(
                out,
                "{}: naturalness {naturalness:.4}  entropy {entropy:.4}  well-exposedness {exposedness:.4}",
                path.display()
            )?;
        }
    }
    match &args.output {
        Some(path) => {
            fs::write(path, out).with_context(|| format!("cannot write {}", path.display()))?
        }
        None => print!("{out}"),
    }
    Ok(ExitCode::SUCCESS)
}

fn csv_field(s: &str) -> String {
    if s.contains([',', '"', '\n']) {
        format!("\"{}\"", s.replace('"', "\"\""))
    } else {
        s.to_string()
    }
}

fn parse_size(s: &str) -> Result<(usize, usize)> {
    let bad = || UsageError(format!("size must be N or WxH, got `{s}`"));
    let dims = match s.split_once(['x', 'X']) {
        Some((w, h)) => (
            w.trim().parse().map_err(|_| bad())?,
            h.trim().parse().map_err(|_| bad())?,
        ),
        None => {
            let n = s.trim().parse().map_err(|_| bad())?;
            (n, n)
        }
    };
    if dims.0 == 0 || dims.1 == 0 {
        return Err(bad().into());
    }
    Ok(dims)
}

fn parse_evs(s: &str) -> Result<Vec<f64>> {
    let evs = s
        .split(',')
        .map(|t| {
            t.trim()
                .parse::<f64>()
                .map_err(|_| UsageError(format!("bad EV `{t}`")))
        })
        .collect::<Result<Vec<_>, _>>()?;
    if evs.is_empty() {
        return Err(UsageError("no EVs given".into()).into());
    }
    Ok(evs)
}

pub fn synth(args: SynthArgs) -> Result<ExitCode> {
    let (w, h) = parse_size(&args.size)?;
    let evs = parse_evs(&args.evs)?;
    let crf: CrfModel = args
        .crf
        .parse()
        .map_err(|e: Error| UsageError(e.to_string()))?;
    let format = match args.format.to_ascii_lowercase().as_str() {
        "png" => ImageFormat::Png,
        "ppm" => ImageFormat::Ppm,
        other => return Err(UsageError(format!("unknown format `{other}`")).into()),
    };
    let field = match builtin_field::<f64>(&args.scene, w, h) {
        Err(Error::UnknownScene(name)) => {
            return Err(UsageError(format!(
                "unknown scene `{name}` (expected one of {})",
                expofuse::synth::SCENE_NAMES.join(", ")
            ))
            .into())
        }
        other => other?,
    };
    let stack = make_stack(&field, &evs, &crf)?;
    let prefix = args.prefix.as_deref().unwrap_or(&args.scene);
    let options = WriteOptions {
        encode_srgb: args.srgb,
        clamp: true,
        bit_depth: args.bit_depth.into(),
    };
    let (paths, sidecar) = write_stack(&stack, &args.out_dir, prefix, format, options)?;
    for p in &paths {
        println!("{}", p.display());
    }
    println!("{}", sidecar.display());
    Ok(ExitCode::SUCCESS)
}

/// Largest linear-light change one code step can cause after sRGB decoding.
const SRGB_MAX_SLOPE: f64 = 2.4 / 1.055;

pub fn check_linear(args: CheckLinearArgs) -> Result<ExitCode> {
    let entries = read_sidecar(&args.sidecar)?;
    if entries.len() < 2 {
        return Err(UsageError("need at least two tagged images".into()).into());
    }
    let dir = args.sidecar.parent().unwrap_or(Path::new("."));
    let read = ReadOptions {
        assume_srgb: args.assume_srgb,
    };
    let mut images = Vec::with_capacity(entries.len());
    let mut max_code = 0u32;
    for (name, _) in &entries {
        let (image, code): (RgbImage, u32) = read_image_with_max_code(dir.join(name), read)?;
        max_code = max_code.max(code);
        images.push(image);
    }
    let evs = entries.iter().map(|(_, ev)| *ev).collect();
    let stack = ExposureStack::from_unordered(images, Some(evs))?;
    let mut step = 1.0 / f64::from(max_code);
    if args.assume_srgb {
        step *= SRGB_MAX_SLOPE;
    }
    let report = check_linearity(&stack, step, args.tolerance)?;
    println!(
        "samples {}  max residual {:.3e}  worst/bound {:.3}",
        report.compared_samples, report.max_residual, report.worst_ratio
    );
    if report.passed() {
        println!("linear: ok");
        Ok(ExitCode::SUCCESS)
    } else {
        bail!("stack is not linear in exposure time")
    }
}

pub fn wellexposedness(args: WellArgs) -> Result<ExitCode> {
    let images = args
        .inputs
        .iter()
        .map(|p| read_image(p, ReadOptions::default()))
        .collect::<expofuse::Result<Vec<RgbImage>>>()?;
    let map = max_well_exposedness(&images)?;
    write_luminance(&map, &args.out, args.bit_depth.into())?;
    Ok(ExitCode::SUCCESS)
}
