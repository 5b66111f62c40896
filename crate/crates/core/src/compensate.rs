//! Automatic exposure compensation.
//!
//! The middle-brightness image of the stack is scaled so that its geometric
//! mean luminance lands on `target_gray`. Its luminance range is then split
//! into `N` equal bands, brightest first, and image `k` is scaled so that its
//! geometric mean over the pixels of band `k` lands on `target_gray` too.
//! Darker exposures thereby cover the bright band and brighter exposures the
//! dark band.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::image::{geometric_mean, LuminanceMap, PixelRegion};
use crate::scalar::Real;

pub const DEFAULT_TARGET_GRAY: f64 = 0.18;

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct CompensationPlan<T> {
    /// 1-based index of the reference image, `ceil((N + 1) / 2)`.
    pub middle_index: usize,
    /// Band edges θ₁ ≥ θ₂ ≥ … ≥ θ_{N+1} over the reference luminance.
    pub thresholds: Vec<T>,
    /// Pixel count of each band; the reference image uses the whole domain.
    pub region_sizes: Vec<usize>,
    /// Per-image gains α₁..α_N.
    pub gains: Vec<T>,
    pub target_gray: T,
}

impl<T: Real> CompensationPlan<T> {
    /// 0-based position of the reference image.
    pub fn middle_position(&self) -> usize {
        self.middle_index - 1
    }
}

/// 1-based index of the middle-brightness image among `n`.
pub fn middle_index(n: usize) -> usize {
    assert!(n >= 1, "stack must not be empty");
    (n + 1).div_ceil(2)
}

/// Splits `[min L, max L]` into `n` equal bands and returns the `n + 1`
/// edges in descending order.
pub fn partition_thresholds<T: Real>(lum: &LuminanceMap<T>, n: usize) -> Result<Vec<T>> {
    if n == 0 {
        return Err(Error::InvalidParameter("band count must be >= 1".into()));
    }
    if lum.is_empty() {
        return Err(Error::EmptyRegion);
    }
    let (lo, hi) = (lum.min(), lum.max());
    if hi == lo {
        return Err(Error::DegenerateRange(hi.as_f64()));
    }
    let nn = T::from_usize_lossy(n);
    let mut theta: Vec<T> = (1..=n + 1)
        .map(|k| T::from_usize_lossy(n + 1 - k) / nn * (hi - lo) + lo)
        .collect();
    // pin the ends so that the extreme pixels fall inside the outer bands
    theta[0] = hi;
    theta[n] = lo;
    Ok(theta)
}

/// Assigns every pixel to exactly one band: band `k` holds
/// `θ_{k+1} ≤ L < θ_k`, band 1 also holds `L = θ₁`, and the last band is
/// closed below.
pub fn partition_regions<T: Real>(lum: &LuminanceMap<T>, thresholds: &[T]) -> Vec<PixelRegion> {
    assert!(thresholds.len() >= 2, "need at least two band edges");
    debug_assert!(thresholds.windows(2).all(|w| w[0] >= w[1]));
    let n = thresholds.len() - 1;
    let (w, h) = lum.dims();
    let mut regions = vec![PixelRegion::empty(w, h); n];
    for (i, &v) in lum.data().iter().enumerate() {
        let k = thresholds[1..]
            .iter()
            .position(|&lower| v >= lower)
            .unwrap_or(n - 1);
        regions[k].insert(i);
    }
    regions
}

/// Estimates one gain per enhanced luminance map.
///
/// A band with no pixels falls back to the midpoint of its edges as the
/// brightness estimate. A constant reference image gets global compensation
/// for every image.
pub fn estimate_gains<T: Real>(
    enhanced: &[LuminanceMap<T>],
    epsilon: T,
    target_gray: T,
) -> Result<CompensationPlan<T>> {
    let reference_dims = enhanced.first().ok_or(Error::EmptyStack)?.dims();
    if let Some(bad) = enhanced.iter().find(|l| l.dims() != reference_dims) {
        return Err(Error::DimensionMismatch {
            expected: reference_dims,
            found: bad.dims(),
        });
    }
    if !(epsilon > T::zero()) {
        return Err(Error::InvalidParameter(format!(
            "epsilon must be > 0, got {epsilon}"
        )));
    }
    if !(target_gray > T::zero() && target_gray.is_finite()) {
        return Err(Error::InvalidParameter(format!(
            "target gray must be > 0, got {target_gray}"
        )));
    }

    let n = enhanced.len();
    let j = middle_index(n) - 1;
    let (w, h) = reference_dims;
    let full = PixelRegion::full(w, h);
    let reference = &enhanced[j];

    let (thresholds, regions) = match partition_thresholds(reference, n) {
        Ok(theta) => {
            let regions = partition_regions(reference, &theta);
            (theta, Some(regions))
        }
        Err(Error::DegenerateRange(_)) => (vec![reference.max(); n + 1], None),
        Err(e) => return Err(e),
    };

    let mut gains = Vec::with_capacity(n);
    let mut region_sizes = Vec::with_capacity(n);
    for (k, lum) in enhanced.iter().enumerate() {
        let region = match &regions {
            Some(r) if k != j => &r[k],
            _ => &full,
        };
        region_sizes.push(region.count());
        let brightness = match geometric_mean(lum, region, epsilon) {
            Ok(g) => g,
            Err(Error::EmptyRegion) => {
                let mid = (thresholds[k] + thresholds[k + 1]) / T::lit(2.0);
                mid.max(epsilon)
            }
            Err(e) => return Err(e),
        };
        gains.push(target_gray / brightness);
    }

    Ok(CompensationPlan {
        middle_index: j + 1,
        thresholds,
        region_sizes,
        gains,
        target_gray,
    })
}

/// Scales luminance by a positive gain.
pub fn apply_gain<T: Real>(lum: &LuminanceMap<T>, alpha: T) -> LuminanceMap<T> {
    assert!(
        alpha > T::zero() && alpha.is_finite(),
        "gain must be positive and finite"
    );
    lum.scale(alpha)
}
