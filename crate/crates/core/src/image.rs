//! Raster containers, luminance conversion and region statistics.

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::scalar::Real;

/// Rec. 709 relative-luminance weights on linear RGB.
pub const REC709: [f64; 3] = [0.2126, 0.7152, 0.0722];

/// Single-channel raster of non-negative, finite luminance values.
#[derive(Clone, Debug, PartialEq)]
pub struct LuminanceMap<T> {
    width: usize,
    height: usize,
    data: Vec<T>,
}

impl<T: Real> LuminanceMap<T> {
    pub fn new(width: usize, height: usize, data: Vec<T>) -> Result<Self> {
        if data.len() != width * height {
            return Err(Error::BufferLength {
                len: data.len(),
                width,
                height,
                channels: 1,
            });
        }
        if data.iter().any(|v| !v.is_finite() || *v < T::zero()) {
            return Err(Error::InvalidPixel);
        }
        Ok(Self {
            width,
            height,
            data,
        })
    }

    pub fn filled(width: usize, height: usize, value: T) -> Self {
        assert!(value.is_finite() && value >= T::zero());
        Self {
            width,
            height,
            data: vec![value; width * height],
        }
    }

    pub fn from_fn(width: usize, height: usize, mut f: impl FnMut(usize, usize) -> T) -> Self {
        let mut data = Vec::with_capacity(width * height);
        for y in 0..height {
            for x in 0..width {
                data.push(f(x, y));
            }
        }
        Self::from_raw(width, height, data)
    }

    /// Wraps a buffer produced by one of the crate's kernels. The kernels
    /// only emit non-negative finite values, which is checked in debug builds.
    pub(crate) fn from_raw(width: usize, height: usize, data: Vec<T>) -> Self {
        debug_assert_eq!(data.len(), width * height);
        debug_assert!(
            data.iter().all(|v| v.is_finite() && *v >= T::zero()),
            "luminance kernel produced an invalid value"
        );
        Self {
            width,
            height,
            data,
        }
    }

    #[inline]
    pub fn width(&self) -> usize {
        self.width
    }

    #[inline]
    pub fn height(&self) -> usize {
        self.height
    }

    #[inline]
    pub fn dims(&self) -> (usize, usize) {
        (self.width, self.height)
    }

    #[inline]
    pub fn len(&self) -> usize {
        self.data.len()
    }

    #[inline]
    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    #[inline]
    pub fn data(&self) -> &[T] {
        &self.data
    }

    pub fn into_data(self) -> Vec<T> {
        self.data
    }

    #[inline]
    pub fn get(&self, x: usize, y: usize) -> T {
        self.data[y * self.width + x]
    }

    pub fn max(&self) -> T {
        self.data.iter().copied().fold(T::zero(), T::max)
    }

    pub fn min(&self) -> T {
        self.data
            .iter()
            .copied()
            .reduce(T::min)
            .unwrap_or_else(T::zero)
    }

    /// Applies `f` to every value. `f` must preserve non-negativity.
    pub fn map(&self, f: impl Fn(T) -> T + Sync) -> Self {
        let data = self.data.par_iter().map(|&v| f(v)).collect();
        Self::from_raw(self.width, self.height, data)
    }

    /// Multiplies every value by a non-negative scalar.
    pub fn scale(&self, factor: T) -> Self {
        assert!(factor >= T::zero() && factor.is_finite());
        self.map(|v| v * factor)
    }
}

/// Three-channel linear-light raster.
#[derive(Clone, Debug, PartialEq)]
pub struct RgbImage<T> {
    width: usize,
    height: usize,
    data: Vec<[T; 3]>,
}

impl<T: Real> RgbImage<T> {
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
            .any(|v| !v.is_finite() || *v < T::zero())
        {
            return Err(Error::InvalidPixel);
        }
        Ok(Self {
            width,
            height,
            data,
        })
    }

    /// Builds an image from an interleaved `RGBRGB...` buffer.
    pub fn from_interleaved(width: usize, height: usize, samples: &[T]) -> Result<Self> {
        if samples.len() != 3 * width * height {
            return Err(Error::BufferLength {
                len: samples.len(),
                width,
                height,
                channels: 3,
            });
        }
        let data = samples
            .chunks_exact(3)
            .map(|c| [c[0], c[1], c[2]])
            .collect();
        Self::new(width, height, data)
    }

    pub fn filled(width: usize, height: usize, rgb: [T; 3]) -> Self {
        Self::from_raw(width, height, vec![rgb; width * height])
    }

    pub fn from_fn(width: usize, height: usize, mut f: impl FnMut(usize, usize) -> [T; 3]) -> Self {
        let mut data = Vec::with_capacity(width * height);
        for y in 0..height {
            for x in 0..width {
                data.push(f(x, y));
            }
        }
        Self::from_raw(width, height, data)
    }

    /// Gray image with every channel equal to the luminance value.
    pub fn from_gray(lum: &LuminanceMap<T>) -> Self {
        let data = lum.data().iter().map(|&v| [v, v, v]).collect();
        Self::from_raw(lum.width(), lum.height(), data)
    }

    pub(crate) fn from_raw(width: usize, height: usize, data: Vec<[T; 3]>) -> Self {
        debug_assert_eq!(data.len(), width * height);
        debug_assert!(
            data.iter()
                .flatten()
                .all(|v| v.is_finite() && *v >= T::zero()),
            "rgb kernel produced an invalid value"
        );
        Self {
            width,
            height,
            data,
        }
    }

    #[inline]
    pub fn width(&self) -> usize {
        self.width
    }

    #[inline]
    pub fn height(&self) -> usize {
        self.height
    }

    #[inline]
    pub fn dims(&self) -> (usize, usize) {
        (self.width, self.height)
    }

    #[inline]
    pub fn pixels(&self) -> &[[T; 3]] {
        &self.data
    }

    #[inline]
    pub fn get(&self, x: usize, y: usize) -> [T; 3] {
        self.data[y * self.width + x]
    }

    pub fn into_pixels(self) -> Vec<[T; 3]> {
        self.data
    }

    pub fn map(&self, f: impl Fn([T; 3]) -> [T; 3] + Sync) -> Self {
        let data = self.data.par_iter().map(|&p| f(p)).collect();
        Self::from_raw(self.width, self.height, data)
    }

    pub fn scale(&self, factor: T) -> Self {
        assert!(factor >= T::zero() && factor.is_finite());
        self.map(|[r, g, b]| [r * factor, g * factor, b * factor])
    }

    /// Clamps every channel into `[0, 1]`.
    pub fn clamped(&self) -> Self {
        let one = T::one();
        self.map(|p| p.map(|c| c.min(one)))
    }

    /// Number of channel samples above 1.
    pub fn count_out_of_gamut(&self) -> usize {
        self.data
            .iter()
            .flatten()
            .filter(|c| **c > T::one())
            .count()
    }

    /// Converts the scalar type.
    pub fn cast<U: Real>(&self) -> RgbImage<U> {
        let data = self
            .data
            .iter()
            .map(|p| p.map(|c| U::lit(c.as_f64())))
            .collect();
        RgbImage::from_raw(self.width, self.height, data)
    }
}

/// Boolean membership mask over the pixel grid.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct PixelRegion {
    width: usize,
    height: usize,
    mask: Vec<bool>,
}

impl PixelRegion {
    /// The whole domain.
    pub fn full(width: usize, height: usize) -> Self {
        Self {
            width,
            height,
            mask: vec![true; width * height],
        }
    }

    pub fn empty(width: usize, height: usize) -> Self {
        Self {
            width,
            height,
            mask: vec![false; width * height],
        }
    }

    pub fn from_mask(width: usize, height: usize, mask: Vec<bool>) -> Result<Self> {
        if mask.len() != width * height {
            return Err(Error::BufferLength {
                len: mask.len(),
                width,
                height,
                channels: 1,
            });
        }
        Ok(Self {
            width,
            height,
            mask,
        })
    }

    pub fn dims(&self) -> (usize, usize) {
        (self.width, self.height)
    }

    pub fn mask(&self) -> &[bool] {
        &self.mask
    }

    #[inline]
    pub fn contains(&self, index: usize) -> bool {
        self.mask[index]
    }

    pub(crate) fn insert(&mut self, index: usize) {
        self.mask[index] = true;
    }

    /// Number of member pixels.
    pub fn count(&self) -> usize {
        self.mask.iter().filter(|m| **m).count()
    }

    pub fn is_empty(&self) -> bool {
        !self.mask.iter().any(|m| *m)
    }

    pub fn indices(&self) -> impl Iterator<Item = usize> + '_ {
        self.mask
            .iter()
            .enumerate()
            .filter_map(|(i, m)| m.then_some(i))
    }
}

/// Ordered stack of equally sized exposures with optional EV tags.
#[derive(Clone, Debug)]
pub struct ExposureStack<T> {
    images: Vec<RgbImage<T>>,
    evs: Option<Vec<f64>>,
}

impl<T: Real> ExposureStack<T> {
    pub fn new(images: Vec<RgbImage<T>>, evs: Option<Vec<f64>>) -> Result<Self> {
        let first = images.first().ok_or(Error::EmptyStack)?;
        let dims = first.dims();
        if let Some(bad) = images.iter().find(|im| im.dims() != dims) {
            return Err(Error::DimensionMismatch {
                expected: dims,
                found: bad.dims(),
            });
        }
        if let Some(evs) = &evs {
            if evs.len() != images.len() {
                return Err(Error::ExposureTagCount {
                    tags: evs.len(),
                    images: images.len(),
                });
            }
            if evs.iter().any(|v| !v.is_finite()) || evs.windows(2).any(|w| w[0] >= w[1]) {
                return Err(Error::UnorderedExposures);
            }
        }
        Ok(Self { images, evs })
    }

    /// Builds a stack from images in arbitrary order, sorting them ascending
    /// by EV tag when given, otherwise by geometric-mean luminance.
    pub fn from_unordered(images: Vec<RgbImage<T>>, evs: Option<Vec<f64>>) -> Result<Self> {
        if images.is_empty() {
            return Err(Error::EmptyStack);
        }
        let mut order: Vec<usize> = (0..images.len()).collect();
        match &evs {
            Some(tags) => {
                if tags.len() != images.len() {
                    return Err(Error::ExposureTagCount {
                        tags: tags.len(),
                        images: images.len(),
                    });
                }
                order.sort_by(|&a, &b| tags[a].total_cmp(&tags[b]));
            }
            None => {
                let eps = T::lit(crate::DEFAULT_EPSILON);
                let keys = images
                    .iter()
                    .map(|im| {
                        let lum = luminance_of(im);
                        let full = PixelRegion::full(lum.width(), lum.height());
                        geometric_mean(&lum, &full, eps).map(|g| g.as_f64())
                    })
                    .collect::<Result<Vec<_>>>()?;
                // stable sort keeps input order for equal brightness
                order.sort_by(|&a, &b| keys[a].total_cmp(&keys[b]));
            }
        }
        let mut slots: Vec<Option<RgbImage<T>>> = images.into_iter().map(Some).collect();
        let sorted = order
            .iter()
            .map(|&i| slots[i].take().expect("permutation"))
            .collect();
        let evs = evs.map(|tags| order.iter().map(|&i| tags[i]).collect());
        Self::new(sorted, evs)
    }

    pub fn images(&self) -> &[RgbImage<T>] {
        &self.images
    }

    pub fn into_images(self) -> Vec<RgbImage<T>> {
        self.images
    }

    pub fn evs(&self) -> Option<&[f64]> {
        self.evs.as_deref()
    }

    pub fn len(&self) -> usize {
        self.images.len()
    }

    pub fn is_empty(&self) -> bool {
        self.images.is_empty()
    }

    pub fn dims(&self) -> (usize, usize) {
        self.images[0].dims()
    }
}

/// Rec. 709 luminance of a linear RGB image.
pub fn luminance_of<T: Real>(image: &RgbImage<T>) -> LuminanceMap<T> {
    let [wr, wg, wb] = REC709.map(T::lit);
    let data = image
        .pixels()
        .par_iter()
        .map(|&[r, g, b]| wr * r + wg * g + wb * b)
        .collect();
    LuminanceMap::from_raw(image.width(), image.height(), data)
}

/// Geometric mean of `lum` over `region`, with values clamped below at `epsilon`.
pub fn geometric_mean<T: Real>(
    lum: &LuminanceMap<T>,
    region: &PixelRegion,
    epsilon: T,
) -> Result<T> {
    if region.dims() != lum.dims() {
        return Err(Error::DimensionMismatch {
            expected: lum.dims(),
            found: region.dims(),
        });
    }
    if !(epsilon > T::zero()) {
        return Err(Error::InvalidParameter(format!(
            "epsilon must be > 0, got {epsilon}"
        )));
    }
    let mut count = 0usize;
    let mut log_sum = T::zero();
    for i in region.indices() {
        log_sum = log_sum + lum.data()[i].max(epsilon).ln();
        count += 1;
    }
    if count == 0 {
        return Err(Error::EmptyRegion);
    }
    Ok((log_sum / T::from_usize_lossy(count)).exp())
}
