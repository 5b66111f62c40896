//! Weighted-average fusion of an exposure stack.

use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::image::{luminance_of, LuminanceMap, RgbImage};
use crate::metrics::well_exposedness_pixel;
use crate::pyramid;
use crate::scalar::Real;

pub const DEFAULT_WEIGHT_FLOOR: f64 = 1e-12;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum WeightScheme {
    /// Every weight is 1.
    Simple,
    /// Contrast × saturation × well-exposedness.
    Mertens,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum BlendMode {
    Naive,
    Pyramid,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub enum PyramidLevels {
    Auto,
    Fixed(usize),
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct FusionConfig<T> {
    pub scheme: WeightScheme,
    pub blend: BlendMode,
    pub levels: PyramidLevels,
    pub contrast_exponent: T,
    pub saturation_exponent: T,
    pub exposedness_exponent: T,
    /// Added to every weight before normalization; `None` disables it.
    pub weight_floor: Option<T>,
}

impl<T: Real> Default for FusionConfig<T> {
    fn default() -> Self {
        Self {
            scheme: WeightScheme::Simple,
            blend: BlendMode::Naive,
            levels: PyramidLevels::Auto,
            contrast_exponent: T::one(),
            saturation_exponent: T::one(),
            exposedness_exponent: T::one(),
            weight_floor: Some(T::lit(DEFAULT_WEIGHT_FLOOR)),
        }
    }
}

impl<T: Real> FusionConfig<T> {
    pub fn validate(&self) -> Result<()> {
        for (name, e) in [
            ("contrast", self.contrast_exponent),
            ("saturation", self.saturation_exponent),
            ("well-exposedness", self.exposedness_exponent),
        ] {
            if !(e >= T::zero() && e.is_finite()) {
                return Err(Error::InvalidParameter(format!(
                    "{name} exponent must be >= 0"
                )));
            }
        }
        if let PyramidLevels::Fixed(0) = self.levels {
            return Err(Error::InvalidParameter(
                "pyramid levels must be >= 1".into(),
            ));
        }
        if let Some(f) = self.weight_floor {
            if !(f >= T::zero() && f.is_finite()) {
                return Err(Error::InvalidParameter("weight floor must be >= 0".into()));
            }
        }
        Ok(())
    }
}

/// One non-negative weight raster per stack image.
#[derive(Clone, Debug, PartialEq)]
pub struct WeightMaps<T> {
    maps: Vec<LuminanceMap<T>>,
}

impl<T: Real> WeightMaps<T> {
    pub fn new(maps: Vec<LuminanceMap<T>>) -> Result<Self> {
        let dims = maps.first().ok_or(Error::EmptyStack)?.dims();
        if let Some(bad) = maps.iter().find(|m| m.dims() != dims) {
            return Err(Error::DimensionMismatch {
                expected: dims,
                found: bad.dims(),
            });
        }
        Ok(Self { maps })
    }

    pub fn maps(&self) -> &[LuminanceMap<T>] {
        &self.maps
    }

    pub fn len(&self) -> usize {
        self.maps.len()
    }

    pub fn is_empty(&self) -> bool {
        self.maps.is_empty()
    }

    pub fn dims(&self) -> (usize, usize) {
        self.maps[0].dims()
    }

    /// Adds `floor` to every weight.
    pub fn with_floor(&self, floor: T) -> Self {
        Self {
            maps: self.maps.iter().map(|m| m.map(|w| w + floor)).collect(),
        }
    }

    /// Divides every weight by the per-pixel sum.
    pub fn normalized(&self) -> Result<Self> {
        let (w, h) = self.dims();
        let n = self.maps.len();
        let mut out = vec![Vec::with_capacity(w * h); n];
        for i in 0..w * h {
            let sum = weight_sum(&self.maps, i);
            if !(sum > T::zero()) {
                return Err(Error::ZeroWeightSum { x: i % w, y: i / w });
            }
            for (dst, m) in out.iter_mut().zip(&self.maps) {
                dst.push(m.data()[i] / sum);
            }
        }
        Ok(Self {
            maps: out
                .into_iter()
                .map(|d| LuminanceMap::from_raw(w, h, d))
                .collect(),
        })
    }
}

#[inline]
fn weight_sum<T: Real>(maps: &[LuminanceMap<T>], i: usize) -> T {
    maps.iter().fold(T::zero(), |acc, m| acc + m.data()[i])
}

pub fn simple_weights<T: Real>(stack_size: usize, dims: (usize, usize)) -> WeightMaps<T> {
    assert!(stack_size >= 1, "stack must not be empty");
    WeightMaps {
        maps: vec![LuminanceMap::filled(dims.0, dims.1, T::one()); stack_size],
    }
}

/// Absolute 4-neighbour Laplacian with clamp-to-edge borders.
pub fn contrast_map<T: Real>(lum: &LuminanceMap<T>) -> LuminanceMap<T> {
    let (w, h) = lum.dims();
    let four = T::lit(4.0);
    let mut out = vec![T::zero(); w * h];
    out.par_chunks_mut(w.max(1))
        .enumerate()
        .for_each(|(y, row)| {
            for (x, dst) in row.iter_mut().enumerate() {
                let c = lum.get(x, y);
                let l = lum.get(x.saturating_sub(1), y);
                let r = lum.get((x + 1).min(w - 1), y);
                let u = lum.get(x, y.saturating_sub(1));
                let d = lum.get(x, (y + 1).min(h - 1));
                *dst = (l + r + u + d - four * c).abs();
            }
        });
    LuminanceMap::from_raw(w, h, out)
}

/// Per-pixel standard deviation across the three channels.
pub fn saturation_map<T: Real>(image: &RgbImage<T>) -> LuminanceMap<T> {
    let three = T::lit(3.0);
    let data = image
        .pixels()
        .par_iter()
        .map(|&[r, g, b]| {
            let mu = (r + g + b) / three;
            (((r - mu).powi(2) + (g - mu).powi(2) + (b - mu).powi(2)) / three).sqrt()
        })
        .collect();
    LuminanceMap::from_raw(image.width(), image.height(), data)
}

/// Mertens-style quality weights, without the zero-weight floor.
pub fn mertens_weights<T: Real>(
    stack: &[RgbImage<T>],
    config: &FusionConfig<T>,
) -> Result<WeightMaps<T>> {
    config.validate()?;
    let maps = stack
        .iter()
        .map(|image| {
            let contrast = contrast_map(&luminance_of(image));
            let saturation = saturation_map(image);
            let data = image
                .pixels()
                .par_iter()
                .zip(contrast.data())
                .zip(saturation.data())
                .map(|((&rgb, &c), &s)| {
                    let e = well_exposedness_pixel(rgb);
                    c.powf(config.contrast_exponent)
                        * s.powf(config.saturation_exponent)
                        * e.powf(config.exposedness_exponent)
                })
                .collect();
            LuminanceMap::from_raw(image.width(), image.height(), data)
        })
        .collect();
    WeightMaps::new(maps)
}

/// Builds the configured weights, floor included.
pub fn build_weights<T: Real>(
    stack: &[RgbImage<T>],
    config: &FusionConfig<T>,
) -> Result<WeightMaps<T>> {
    let first = stack.first().ok_or(Error::EmptyStack)?;
    let weights = match config.scheme {
        WeightScheme::Simple => simple_weights(stack.len(), first.dims()),
        WeightScheme::Mertens => mertens_weights(stack, config)?,
    };
    Ok(match config.weight_floor {
        Some(f) if f > T::zero() => weights.with_floor(f),
        _ => weights,
    })
}

pub(crate) fn check_inputs<T: Real>(stack: &[RgbImage<T>], weights: &WeightMaps<T>) -> Result<()> {
    let first = stack.first().ok_or(Error::EmptyStack)?;
    if weights.len() != stack.len() {
        return Err(Error::InvalidParameter(format!(
            "{} weight maps for {} images",
            weights.len(),
            stack.len()
        )));
    }
    for dims in stack.iter().map(RgbImage::dims).chain([weights.dims()]) {
        if dims != first.dims() {
            return Err(Error::DimensionMismatch {
                expected: first.dims(),
                found: dims,
            });
        }
    }
    Ok(())
}

/// Per-pixel `Σ w_i I_i / Σ w_i`.
pub fn weighted_average<T: Real>(
    stack: &[RgbImage<T>],
    weights: &WeightMaps<T>,
) -> Result<RgbImage<T>> {
    check_inputs(stack, weights)?;
    let (w, h) = stack[0].dims();
    let maps = weights.maps();
    let data = (0..w * h)
        .into_par_iter()
        .map(|i| {
            let sum = weight_sum(maps, i);
            if !(sum > T::zero()) {
                return Err(Error::ZeroWeightSum { x: i % w, y: i / w });
            }
            let mut acc = [T::zero(); 3];
            for (image, m) in stack.iter().zip(maps) {
                let wn = m.data()[i] / sum;
                let px = image.pixels()[i];
                for c in 0..3 {
                    acc[c] = acc[c] + wn * px[c];
                }
            }
            Ok(acc)
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(RgbImage::from_raw(w, h, data))
}

/// Resolves the level count for an image of the given size.
pub fn resolve_levels(levels: PyramidLevels, dims: (usize, usize)) -> Result<usize> {
    let max = pyramid::max_levels(dims);
    match levels {
        PyramidLevels::Auto => Ok(max.saturating_sub(1).max(1)),
        PyramidLevels::Fixed(n) if n >= 1 && n <= max.max(1) => Ok(n),
        PyramidLevels::Fixed(n) => Err(Error::InvalidLevels {
            levels: n,
            width: dims.0,
            height: dims.1,
            max,
        }),
    }
}

/// Multi-resolution blend: Laplacian pyramids of the images mixed by
/// Gaussian pyramids of the normalized weights.
pub fn pyramid_blend<T: Real>(
    stack: &[RgbImage<T>],
    weights: &WeightMaps<T>,
    levels: usize,
) -> Result<RgbImage<T>> {
    check_inputs(stack, weights)?;
    let dims = stack[0].dims();
    resolve_levels(PyramidLevels::Fixed(levels), dims)?;
    let normalized = weights.normalized()?;
    Ok(pyramid::blend(stack, normalized.maps(), levels))
}

/// Fuses with the configured weights and blend mode.
pub fn fuse<T: Real>(
    stack: &[RgbImage<T>],
    config: &FusionConfig<T>,
) -> Result<(RgbImage<T>, WeightMaps<T>)> {
    config.validate()?;
    let weights = build_weights(stack, config)?;
    let fused = match config.blend {
        BlendMode::Naive => weighted_average(stack, &weights)?,
        BlendMode::Pyramid => {
            let levels = resolve_levels(config.levels, stack[0].dims())?;
            pyramid_blend(stack, &weights, levels)?
        }
    };
    Ok((fused, weights))
}
