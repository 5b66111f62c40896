//! Synthetic camera: irradiance fields exposed through a response curve.
//!
//! Exposure is `X = E·Δt`, the pixel value is `min(f(X), 1)` and the EV tag
//! is `log2 Δt − log2 Δτ`. With a linear response, an image taken at `v` EV
//! is exactly `2^v` times the 0 EV image wherever neither saturates, which
//! makes these stacks ground truth for the compensation and fusion code.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::image::{ExposureStack, RgbImage};
use crate::io::{write_image, ImageFormat, WriteOptions};
use crate::scalar::Real;

/// Positive per-pixel, per-channel irradiance.
#[derive(Clone, Debug, PartialEq)]
pub struct IrradianceField<T> {
    width: usize,
    height: usize,
    data: Vec<[T; 3]>,
}

impl<T: Real> IrradianceField<T> {
    pub fn new(width: usize, height: usize, data: Vec<[T; 3]>) -> Result<Self> {
        if data.len() != width * height {
            return Err(Error::BufferLength {
                len: data.len() * 3,
                width,
                height,
                channels: 3,
            });
        }
        if data
            .iter()
            .flatten()
            .any(|e| !(e.is_finite() && *e > T::zero()))
        {
            return Err(Error::InvalidPixel);
        }
        Ok(Self {
            width,
            height,
            data,
        })
    }

    pub fn from_fn(
        width: usize,
        height: usize,
        mut f: impl FnMut(usize, usize) -> [f64; 3],
    ) -> Result<Self> {
        let mut data = Vec::with_capacity(width * height);
        for y in 0..height {
            for x in 0..width {
                data.push(f(x, y).map(T::lit));
            }
        }
        Self::new(width, height, data)
    }

    pub fn dims(&self) -> (usize, usize) {
        (self.width, self.height)
    }

    pub fn data(&self) -> &[[T; 3]] {
        &self.data
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum CrfKind {
    /// `f(X) = X`.
    Linear,
    /// `f(X) = min(X, 1)^(1/g)`.
    Gamma(f64),
    /// `f(X) = min(X / s, 1)` with `s` the saturation level.
    SaturatingLinear,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct CrfModel {
    pub kind: CrfKind,
    pub saturation_level: f64,
}

impl CrfModel {
    pub fn linear() -> Self {
        Self {
            kind: CrfKind::Linear,
            saturation_level: 1.0,
        }
    }

    pub fn gamma(g: f64) -> Result<Self> {
        if !(g > 0.0 && g.is_finite()) {
            return Err(Error::InvalidParameter(format!(
                "gamma must be > 0, got {g}"
            )));
        }
        Ok(Self {
            kind: CrfKind::Gamma(g),
            saturation_level: 1.0,
        })
    }

    pub fn saturating(level: f64) -> Result<Self> {
        if !(level > 0.0 && level.is_finite()) {
            return Err(Error::InvalidParameter(format!(
                "saturation level must be > 0, got {level}"
            )));
        }
        Ok(Self {
            kind: CrfKind::SaturatingLinear,
            saturation_level: level,
        })
    }

    #[inline]
    pub fn respond<T: Real>(&self, x: T) -> T {
        let v = match self.kind {
            CrfKind::Linear => x,
            CrfKind::Gamma(g) => x.min(T::one()).powf(T::lit(1.0 / g)),
            CrfKind::SaturatingLinear => x / T::lit(self.saturation_level),
        };
        v.min(T::one())
    }
}

impl std::str::FromStr for CrfModel {
    type Err = Error;

    /// Parses `linear`, `gamma:G` or `saturating:S`.
    fn from_str(s: &str) -> Result<Self> {
        let (kind, arg) = s.split_once(':').unwrap_or((s, ""));
        let num = |a: &str| {
            a.parse::<f64>()
                .map_err(|_| Error::InvalidParameter(format!("bad CRF parameter `{a}`")))
        };
        match kind {
            "linear" if arg.is_empty() => Ok(Self::linear()),
            "gamma" => Self::gamma(num(arg)?),
            "saturating" => Self::saturating(if arg.is_empty() { 1.0 } else { num(arg)? }),
            _ => Err(Error::InvalidParameter(format!("unknown CRF `{s}`"))),
        }
    }
}

/// EV of a capture at `shutter` relative to the proper-exposure shutter.
pub fn exposure_value(shutter: f64, base_shutter: f64) -> f64 {
    shutter.log2() - base_shutter.log2()
}

#[derive(Clone, Debug)]
pub struct Exposure<T> {
    pub image: RgbImage<T>,
    pub ev: f64,
}

pub fn expose<T: Real>(
    field: &IrradianceField<T>,
    shutter: f64,
    crf: &CrfModel,
    base_shutter: f64,
) -> Result<Exposure<T>> {
    if !(shutter > 0.0 && base_shutter > 0.0) {
        return Err(Error::InvalidParameter("shutter times must be > 0".into()));
    }
    let dt = T::lit(shutter);
    let data = field
        .data
        .iter()
        .map(|e| e.map(|ch| crf.respond(ch * dt)))
        .collect();
    Ok(Exposure {
        image: RgbImage::new(field.width, field.height, data)?,
        ev: exposure_value(shutter, base_shutter),
    })
}

/// One exposure per EV with a unit proper-exposure shutter.
pub fn make_stack<T: Real>(
    field: &IrradianceField<T>,
    evs: &[f64],
    crf: &CrfModel,
) -> Result<ExposureStack<T>> {
    if evs.is_empty() {
        return Err(Error::EmptyStack);
    }
    if evs.windows(2).any(|w| w[0] >= w[1]) {
        return Err(Error::UnorderedExposures);
    }
    let mut images = Vec::with_capacity(evs.len());
    for &ev in evs {
        images.push(expose(field, ev.exp2(), crf, 1.0)?.image);
    }
    ExposureStack::new(images, Some(evs.to_vec()))
}

fn smoothstep(t: f64) -> f64 {
    let t = t.clamp(0.0, 1.0);
    t * t * (3.0 - 2.0 * t)
}

/// Seeded multi-octave value noise in `[0, 1]`.
struct ValueNoise {
    grids: Vec<(usize, Vec<f64>)>,
}

impl ValueNoise {
    fn new(seed: u64, cells: &[usize]) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let grids = cells
            .iter()
            .map(|&n| {
                (
                    n,
                    (0..(n + 1) * (n + 1))
                        .map(|_| rng.random::<f64>())
                        .collect(),
                )
            })
            .collect();
        Self { grids }
    }

    /// `u`, `v` in `[0, 1]`.
    fn sample(&self, u: f64, v: f64) -> f64 {
        let mut total = 0.0;
        let mut amp = 1.0;
        let mut norm = 0.0;
        for (n, grid) in &self.grids {
            let (fx, fy) = (u * *n as f64, v * *n as f64);
            let (ix, iy) = ((fx as usize).min(n - 1), (fy as usize).min(n - 1));
            let (tx, ty) = (smoothstep(fx - ix as f64), smoothstep(fy - iy as f64));
            let at = |x: usize, y: usize| grid[y * (n + 1) + x];
            let top = at(ix, iy) * (1.0 - tx) + at(ix + 1, iy) * tx;
            let bottom = at(ix, iy + 1) * (1.0 - tx) + at(ix + 1, iy + 1) * tx;
            total += amp * (top * (1.0 - ty) + bottom * ty);
            norm += amp;
            amp *= 0.5;
        }
        total / norm
    }
}

/// Horizontal irradiance ramp from `min` (left) to `max` (right).
pub fn ramp<T: Real>(
    width: usize,
    height: usize,
    min: f64,
    max: f64,
) -> Result<IrradianceField<T>> {
    let span = (width.max(2) - 1) as f64;
    IrradianceField::from_fn(width, height, |x, _| {
        [min + (max - min) * x as f64 / span; 3]
    })
}

/// Two-level checkerboard with square cells of `cell` pixels.
pub fn checkerboard<T: Real>(
    width: usize,
    height: usize,
    cell: usize,
    dark: f64,
    bright: f64,
) -> Result<IrradianceField<T>> {
    let cell = cell.max(1);
    IrradianceField::from_fn(width, height, |x, y| {
        [if (x / cell + y / cell).is_multiple_of(2) {
            dark
        } else {
            bright
        }; 3]
    })
}

/// Dim textured interior with a bright window patch in the upper middle.
/// The two modes are roughly two decades apart.
pub fn bimodal<T: Real>(width: usize, height: usize, seed: u64) -> Result<IrradianceField<T>> {
    let noise = ValueNoise::new(seed, &[4, 9, 23]);
    let (w, h) = (width as f64, height as f64);
    IrradianceField::from_fn(width, height, |x, y| {
        let (u, v) = ((x as f64 + 0.5) / w, (y as f64 + 0.5) / h);
        let tex = noise.sample(u, v);
        let in_window = (0.3..0.7).contains(&u) && (0.15..0.55).contains(&v);
        let mullion = in_window && ((u - 0.5).abs() < 0.015 || (v - 0.35).abs() < 0.015);
        if in_window && !mullion {
            // sky and foliage behind the glass
            let e = 0.8 + 3.2 * tex;
            [e * 0.85, e * 0.95, e * 1.1]
        } else {
            let furniture = if (0.1..0.35).contains(&u) && v > 0.65 {
                0.45
            } else {
                1.0
            };
            let e = (0.01 + 0.06 * tex) * furniture;
            [e * 1.1, e * 0.95, e * 0.8]
        }
    })
}

/// Bright sky gradient over a dark textured foreground with a sun disc.
pub fn sunset<T: Real>(width: usize, height: usize, seed: u64) -> Result<IrradianceField<T>> {
    let noise = ValueNoise::new(seed, &[3, 8, 19, 41]);
    let (w, h) = (width as f64, height as f64);
    IrradianceField::from_fn(width, height, |x, y| {
        let (u, v) = ((x as f64 + 0.5) / w, (y as f64 + 0.5) / h);
        let tex = noise.sample(u, v);
        let horizon = 0.55 + 0.08 * (noise.sample(u, 0.1) - 0.5);
        if v < horizon {
            let sun = (-((u - 0.7).powi(2) + (v - horizon + 0.1).powi(2)) / 0.004).exp();
            let e = 0.5 + 2.5 * (1.0 - v / horizon) + 1.5 * tex + 8.0 * sun;
            [e * 1.2, e * 0.9, e * 0.7]
        } else {
            let e = 0.005 + 0.08 * tex * tex;
            [e * 0.9, e * 1.05, e * 0.85]
        }
    })
}

/// Dark room lit by a single lamp: radial falloff with a hot spot.
pub fn lamp<T: Real>(width: usize, height: usize, seed: u64) -> Result<IrradianceField<T>> {
    let noise = ValueNoise::new(seed, &[5, 13, 31]);
    let (w, h) = (width as f64, height as f64);
    IrradianceField::from_fn(width, height, |x, y| {
        let (u, v) = ((x as f64 + 0.5) / w, (y as f64 + 0.5) / h);
        let tex = noise.sample(u, v);
        let d2 = (u - 0.3).powi(2) + (v - 0.35).powi(2);
        let falloff = 0.005 + 1.2 / (1.0 + d2 / 0.01);
        let bulb = if d2 < 0.0025 { 8.0 } else { 0.0 };
        let e = falloff * (0.4 + 0.8 * tex) + bulb;
        [e * 1.15, e, e * 0.75]
    })
}

/// Dark corridor opening onto a sunlit courtyard, with stripes of shade.
pub fn courtyard<T: Real>(width: usize, height: usize, seed: u64) -> Result<IrradianceField<T>> {
    let noise = ValueNoise::new(seed, &[6, 15, 37]);
    let (w, h) = (width as f64, height as f64);
    IrradianceField::from_fn(width, height, |x, y| {
        let (u, v) = ((x as f64 + 0.5) / w, (y as f64 + 0.5) / h);
        let tex = noise.sample(u, v);
        let opening = (u - 0.5).abs() < 0.22 && v < 0.8;
        if opening {
            let shade = if ((u * 14.0).floor() as i64) % 3 == 0 {
                0.35
            } else {
                1.0
            };
            let e = (1.0 + 3.0 * tex) * shade;
            [e, e * 0.97, e * 0.88]
        } else {
            let e = 0.01 + 0.05 * tex + 0.03 * (1.0 - (u - 0.5).abs() * 2.0);
            [e * 0.9, e * 0.92, e * 1.05]
        }
    })
}

/// Names accepted by [`builtin_field`].
pub const SCENE_NAMES: [&str; 6] = ["ramp", "bimodal", "checker", "sunset", "lamp", "courtyard"];

/// Deterministic test scene by name.
pub fn builtin_field<T: Real>(
    name: &str,
    width: usize,
    height: usize,
) -> Result<IrradianceField<T>> {
    match name {
        "ramp" => ramp(width, height, 0.02, 2.0),
        "bimodal" => bimodal(width, height, 0x5eed_0001),
        "checker" => checkerboard(width, height, (width.min(height) / 8).max(1), 0.1, 1.5),
        "sunset" => sunset(width, height, 0x5eed_0002),
        "lamp" => lamp(width, height, 0x5eed_0003),
        "courtyard" => courtyard(width, height, 0x5eed_0004),
        _ => Err(Error::UnknownScene(name.to_string())),
    }
}

/// All built-in scenes at the given size.
pub fn builtin_fields<T: Real>(
    width: usize,
    height: usize,
) -> Vec<(&'static str, IrradianceField<T>)> {
    SCENE_NAMES
        .iter()
        .map(|&name| {
            (
                name,
                builtin_field(name, width, height).expect("builtin scene"),
            )
        })
        .collect()
}

/// Writes each image as `<prefix>_<i>.<ext>` plus a `<prefix>.ev` sidecar of
/// `name ev` lines. Returns the image paths and the sidecar path.
pub fn write_stack<T: Real>(
    stack: &ExposureStack<T>,
    dir: &Path,
    prefix: &str,
    format: ImageFormat,
    options: WriteOptions,
) -> Result<(Vec<PathBuf>, PathBuf)> {
    let io_err = |path: &Path| {
        let path = path.to_path_buf();
        move |source| Error::Io { path, source }
    };
    fs::create_dir_all(dir).map_err(io_err(dir))?;
    let mut sidecar = String::new();
    let mut paths = Vec::with_capacity(stack.len());
    for (i, image) in stack.images().iter().enumerate() {
        let name = format!("{prefix}_{i}.{}", format.extension());
        let path = dir.join(&name);
        write_image(image, &path, options)?;
        if let Some(evs) = stack.evs() {
            writeln!(sidecar, "{name} {}", evs[i]).expect("string write");
        }
        paths.push(path);
    }
    let sidecar_path = dir.join(format!("{prefix}.ev"));
    fs::write(&sidecar_path, sidecar).map_err(io_err(&sidecar_path))?;
    Ok((paths, sidecar_path))
}

/// Parses `name ev` lines; blank lines and `#` comments are skipped.
pub fn parse_sidecar(text: &str) -> Result<Vec<(String, f64)>> {
    text.lines()
        .map(str::trim)
        .filter(|l| !l.is_empty() && !l.starts_with('#'))
        .map(|line| {
            let (name, ev) = line
                .rsplit_once(char::is_whitespace)
                .ok_or_else(|| Error::InvalidParameter(format!("bad sidecar line `{line}`")))?;
            let ev = ev
                .trim()
                .parse::<f64>()
                .map_err(|_| Error::InvalidParameter(format!("bad EV in `{line}`")))?;
            Ok((name.trim().to_string(), ev))
        })
        .collect()
}

pub fn read_sidecar(path: &Path) -> Result<Vec<(String, f64)>> {
    let text = fs::read_to_string(path).map_err(|source| Error::Io {
        path: path.to_path_buf(),
        source,
    })?;
    parse_sidecar(&text)
}

#[derive(Clone, Debug, PartialEq)]
pub struct LinearityReport {
    /// Largest `|I_k − 2^(v_k − v_ref)·I_ref|` over compared samples.
    pub max_residual: f64,
    /// Largest residual divided by its allowed bound.
    pub worst_ratio: f64,
    pub compared_samples: usize,
}

impl LinearityReport {
    pub fn passed(&self) -> bool {
        self.worst_ratio <= 1.0
    }
}

/// Checks `I_k = 2^(v_k − v_ref)·I_ref` on samples where neither image is
/// saturated. `step` is the quantization step of the stored images (0 for
/// exact data); the bound per sample is `(1 + ratio)·step/2 + tolerance`.
pub fn check_linearity<T: Real>(
    stack: &ExposureStack<T>,
    step: f64,
    tolerance: f64,
) -> Result<LinearityReport> {
    let evs = stack
        .evs()
        .ok_or_else(|| Error::InvalidParameter("stack has no EV tags".into()))?;
    let reference = evs
        .iter()
        .enumerate()
        .min_by(|a, b| a.1.abs().total_cmp(&b.1.abs()))
        .map(|(i, _)| i)
        .expect("non-empty stack");
    let ceiling = 1.0 - step;
    let base = stack.images()[reference].pixels();
    let mut report = LinearityReport {
        max_residual: 0.0,
        worst_ratio: 0.0,
        compared_samples: 0,
    };
    for (k, image) in stack.images().iter().enumerate() {
        if k == reference {
            continue;
        }
        let ratio = (evs[k] - evs[reference]).exp2();
        let bound = (1.0 + ratio) * step / 2.0 + tolerance;
        for (a, b) in image.pixels().iter().flatten().zip(base.iter().flatten()) {
            let (a, b) = (a.as_f64(), b.as_f64());
            if a >= ceiling || b >= ceiling || b * ratio >= ceiling {
                continue;
            }
            let residual = (a - ratio * b).abs();
            report.max_residual = report.max_residual.max(residual);
            report.worst_ratio = report.worst_ratio.max(if bound > 0.0 {
                residual / bound
            } else if residual > 0.0 {
                f64::INFINITY
            } else {
                0.0
            });
            report.compared_samples += 1;
        }
    }
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn ev_tags() {
        assert_eq!(exposure_value(0.01, 0.01), 0.0);
        assert_eq!(exposure_value(0.005, 0.01), -1.0);
        let field = ramp::<f64>(4, 1, 0.1, 0.4).unwrap();
        let crf = CrfModel::linear();
        let a = expose(&field, 0.25, &crf, 0.25).unwrap();
        let b = expose(&field, 0.5, &crf, 0.25).unwrap();
        assert_eq!(b.ev - a.ev, 1.0);
        for (x, y) in a
            .image
            .pixels()
            .iter()
            .flatten()
            .zip(b.image.pixels().iter().flatten())
        {
            assert_eq!(*y, 2.0 * *x);
        }
    }

    #[test]
    fn linear_stack_doubles() {
        let field = ramp::<f64>(8, 2, 0.01, 0.2).unwrap();
        let stack = make_stack(&field, &[-1.0, 0.0, 1.0], &CrfModel::linear()).unwrap();
        let [d, m, b] = [0, 1, 2].map(|i| stack.images()[i].pixels().to_vec());
        for i in 0..d.len() {
            for c in 0..3 {
                assert_eq!(m[i][c], 2.0 * d[i][c]);
                assert_eq!(b[i][c], 4.0 * d[i][c]);
            }
        }
        let single = make_stack(&field, &[0.0], &CrfModel::linear()).unwrap();
        assert_eq!(single.len(), 1);
    }

    #[test]
    fn saturating_crf_clips() {
        let field = ramp::<f64>(16, 1, 0.1, 1.0).unwrap();
        let crf = CrfModel::saturating(0.8).unwrap();
        let stack = make_stack(&field, &[-1.0, 0.0, 1.0], &crf).unwrap();
        let bright = &stack.images()[2];
        assert!(bright
            .pixels()
            .iter()
            .flatten()
            .all(|v| (0.0..=1.0).contains(v)));
        assert!(bright.pixels().iter().any(|p| p[0] == 1.0));
        assert!(stack.images()[0].pixels().iter().all(|p| p[0] < 1.0));
    }

    #[test]
    fn gamma_crf() {
        let crf: CrfModel = "gamma:2.2".parse().unwrap();
        let v: f64 = crf.respond(0.25);
        assert!((v - 0.25f64.powf(1.0 / 2.2)).abs() < 1e-15);
        assert_eq!(crf.respond(4.0f64), 1.0);
        assert!("gamma:-1".parse::<CrfModel>().is_err());
        assert!("cubic".parse::<CrfModel>().is_err());
        assert_eq!("linear".parse::<CrfModel>().unwrap(), CrfModel::linear());
    }

    #[test]
    fn scenes_are_deterministic() {
        for name in SCENE_NAMES {
            let a = builtin_field::<f64>(name, 24, 16).unwrap();
            let b = builtin_field::<f64>(name, 24, 16).unwrap();
            assert_eq!(a, b, "{name}");
        }
        assert!(matches!(
            builtin_field::<f64>("nope", 4, 4),
            Err(Error::UnknownScene(_))
        ));
    }

    #[test]
    fn ramp_bounds_and_bimodal_modes() {
        let r = ramp::<f64>(11, 3, 0.5, 1.5).unwrap();
        assert_eq!(r.data()[0][0], 0.5);
        assert_eq!(r.data()[10][0], 1.5);

        let b = bimodal::<f64>(64, 48, 1).unwrap();
        let lum: Vec<f64> = b
            .data()
            .iter()
            .map(|p| (p[0] + p[1] + p[2]) / 3.0)
            .collect();
        let dark = lum.iter().filter(|v| **v < 0.3).count();
        let bright = lum.iter().filter(|v| **v > 1.0).count();
        let between = lum.len() - dark - bright;
        assert!(dark > lum.len() / 2 && bright > lum.len() / 10 && between == 0);
    }

    #[test]
    fn sidecar_parsing() {
        let parsed = parse_sidecar("# stack\na_0.png -1\n\na_1.png 0\nmy file.png 1.5\n").unwrap();
        assert_eq!(
            parsed,
            vec![
                ("a_0.png".to_string(), -1.0),
                ("a_1.png".to_string(), 0.0),
                ("my file.png".to_string(), 1.5)
            ]
        );
        assert!(parse_sidecar("oops").is_err());
        assert!(parse_sidecar("a.png x").is_err());
    }

    #[test]
    fn linearity_checker() {
        let field = bimodal::<f64>(16, 16, 3).unwrap();
        let linear = make_stack(&field, &[-1.0, 0.0, 1.0], &CrfModel::linear()).unwrap();
        let report = check_linearity(&linear, 0.0, 1e-12).unwrap();
        assert!(report.passed() && report.compared_samples > 0);

        let gamma = make_stack(&field, &[-1.0, 0.0, 1.0], &CrfModel::gamma(2.2).unwrap()).unwrap();
        assert!(!check_linearity(&gamma, 1.0 / 255.0, 0.0).unwrap().passed());
    }
}
