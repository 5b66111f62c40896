//! Gaussian and bilateral filtering of luminance maps.

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::image::LuminanceMap;
use crate::scalar::Real;

pub const DEFAULT_SIGMA_SPATIAL: f64 = 16.0;
pub const DEFAULT_SIGMA_RANGE: f64 = 3.0 / 255.0;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct BilateralParams<T> {
    /// Spatial standard deviation, in pixels.
    pub sigma_spatial: T,
    /// Range standard deviation, in normalized luminance units.
    pub sigma_range: T,
    /// Half-width of the square summation window.
    pub radius: usize,
}

impl<T: Real> BilateralParams<T> {
    /// Window radius defaults to `ceil(3 * sigma_spatial)`.
    pub fn new(sigma_spatial: T, sigma_range: T) -> Result<Self> {
        let radius = (sigma_spatial * T::lit(3.0))
            .ceil()
            .to_usize()
            .unwrap_or(1)
            .max(1);
        Self::with_radius(sigma_spatial, sigma_range, radius)
    }

    pub fn with_radius(sigma_spatial: T, sigma_range: T, radius: usize) -> Result<Self> {
        if !(sigma_spatial > T::zero() && sigma_spatial.is_finite()) {
            return Err(Error::InvalidParameter(format!(
                "sigma_spatial must be > 0, got {sigma_spatial}"
            )));
        }
        if !(sigma_range > T::zero() && sigma_range.is_finite()) {
            return Err(Error::InvalidParameter(format!(
                "sigma_range must be > 0, got {sigma_range}"
            )));
        }
        if radius == 0 {
            return Err(Error::InvalidParameter("radius must be >= 1".into()));
        }
        Ok(Self {
            sigma_spatial,
            sigma_range,
            radius,
        })
    }

    /// Sums over the whole image regardless of its size.
    pub fn exact(self) -> Self {
        Self {
            radius: usize::MAX,
            ..self
        }
    }
}

impl<T: Real> Default for BilateralParams<T> {
    fn default() -> Self {
        Self::new(T::lit(DEFAULT_SIGMA_SPATIAL), T::lit(DEFAULT_SIGMA_RANGE))
            .expect("valid defaults")
    }
}

/// Unnormalized Gaussian kernel `exp(-(dx² + dy²) / sigma²)`.
#[inline]
pub fn gaussian_weight<T: Real>(dx: T, dy: T, sigma: T) -> T {
    (-(dx * dx + dy * dy) / (sigma * sigma)).exp()
}

/// Edge-preserving local average of `lum`.
///
/// The window is the square of half-width `params.radius` around each pixel,
/// intersected with the image, so a radius that covers the image sums over
/// every pixel.
pub fn bilateral_local_average<T: Real>(
    lum: &LuminanceMap<T>,
    params: &BilateralParams<T>,
) -> LuminanceMap<T> {
    let (w, h) = lum.dims();
    if w == 0 || h == 0 {
        return lum.clone();
    }
    let r = params.radius.min(w.max(h) - 1);
    let side = 2 * r + 1;

    let spatial: Vec<T> = (0..side * side)
        .map(|i| {
            let dx = T::from_usize_lossy(i % side) - T::from_usize_lossy(r);
            let dy = T::from_usize_lossy(i / side) - T::from_usize_lossy(r);
            gaussian_weight(dx, dy, params.sigma_spatial)
        })
        .collect();
    let inv_range = T::one() / (params.sigma_range * params.sigma_range);
    // exp(-t) is below the smallest positive normal for t past this point
    let cutoff = -T::min_positive_value().ln();

    let src = lum.data();
    let mut out = vec![T::zero(); w * h];
    out.par_chunks_mut(w).enumerate().for_each(|(y, row)| {
        let y0 = y.saturating_sub(r);
        let y1 = (y + r).min(h - 1);
        for (x, dst) in row.iter_mut().enumerate() {
            let x0 = x.saturating_sub(r);
            let x1 = (x + r).min(w - 1);
            let center = src[y * w + x];
            let mut num = T::zero();
            let mut den = T::zero();
            for qy in y0..=y1 {
                let line = &src[qy * w + x0..=qy * w + x1];
                let krow = &spatial[(qy + r - y) * side + (x0 + r - x)..];
                for (&v, &ks) in line.iter().zip(krow) {
                    let d = v - center;
                    let t = d * d * inv_range;
                    if t < cutoff {
                        let wgt = ks * (-t).exp();
                        num = num + wgt * v;
                        den = den + wgt;
                    }
                }
            }
            // den includes the self term (weight 1), so it is never zero
            *dst = (num / den).max(T::zero());
        }
    });
    LuminanceMap::from_raw(w, h, out)
}

/// Plain spatial Gaussian-weighted average over the same clipped window.
pub fn gaussian_local_average<T: Real>(
    lum: &LuminanceMap<T>,
    sigma: T,
    radius: usize,
) -> LuminanceMap<T> {
    let (w, h) = lum.dims();
    if w == 0 || h == 0 {
        return lum.clone();
    }
    let r = radius.min(w.max(h) - 1);
    let src = lum.data();
    let mut out = vec![T::zero(); w * h];
    out.par_chunks_mut(w).enumerate().for_each(|(y, row)| {
        for (x, dst) in row.iter_mut().enumerate() {
            let mut num = T::zero();
            let mut den = T::zero();
            for qy in y.saturating_sub(r)..=(y + r).min(h - 1) {
                for qx in x.saturating_sub(r)..=(x + r).min(w - 1) {
                    let dx = T::from_usize_lossy(qx) - T::from_usize_lossy(x);
                    let dy = T::from_usize_lossy(qy) - T::from_usize_lossy(y);
                    let wgt = gaussian_weight(dx, dy, sigma);
                    num = num + wgt * src[qy * w + qx];
                    den = den + wgt;
                }
            }
            *dst = num / den;
        }
    });
    LuminanceMap::from_raw(w, h, out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_map(seed: u64, w: usize, h: usize) -> LuminanceMap<f64> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        LuminanceMap::from_fn(w, h, |_, _| rng.random_range(0.0..1.0))
    }

    #[test]
    fn gaussian_weight_anchors() {
        assert_eq!(gaussian_weight(0.0, 0.0, 3.0), 1.0);
        assert_relative_eq!(
            gaussian_weight(2.5, 0.0, 2.5f64),
            (-1.0f64).exp(),
            max_relative = 1e-15
        );
        assert_relative_eq!(
            gaussian_weight(3.0, 4.0, 5.0f64),
            (-1.0f64).exp(),
            max_relative = 1e-15
        );
    }

    #[test]
    fn default_radius() {
        let p = BilateralParams::<f64>::default();
        assert_eq!(p.radius, 48);
        assert_eq!(p.sigma_range, 3.0 / 255.0);
    }

    #[test]
    fn rejects_bad_params() {
        assert!(BilateralParams::new(0.0f64, 0.1).is_err());
        assert!(BilateralParams::new(1.0f64, -0.1).is_err());
        assert!(BilateralParams::with_radius(1.0f64, 0.1, 0).is_err());
    }

    #[test]
    fn constant_and_single_pixel() {
        let p = BilateralParams::new(2.0, 0.1).unwrap();
        let c = LuminanceMap::filled(7, 5, 0.42f64);
        let out = bilateral_local_average(&c, &p);
        for v in out.data() {
            assert_relative_eq!(*v, 0.42, max_relative = 1e-14);
        }
        let one = LuminanceMap::filled(1, 1, 0.3f64);
        assert_eq!(bilateral_local_average(&one, &p).data(), &[0.3]);
    }

    #[test]
    fn huge_range_sigma_is_spatial_gaussian() {
        let lum = random_map(3, 12, 9);
        let p = BilateralParams::with_radius(2.0, 1e9, 4).unwrap();
        let a = bilateral_local_average(&lum, &p);
        let b = gaussian_local_average(&lum, 2.0, 4);
        for (x, y) in a.data().iter().zip(b.data()) {
            assert!((x - y).abs() < 1e-6);
        }
    }

    #[test]
    fn truncated_equals_exact_when_covering() {
        let lum = random_map(11, 6, 5);
        let p = BilateralParams::with_radius(3.0, 0.2, 6).unwrap();
        assert_eq!(
            bilateral_local_average(&lum, &p),
            bilateral_local_average(&lum, &p.exact())
        );
    }

    #[test]
    fn flip_equivariance() {
        let lum = random_map(5, 9, 7);
        let p = BilateralParams::with_radius(2.0, 0.15, 3).unwrap();
        let (w, h) = lum.dims();
        let flipped = LuminanceMap::from_fn(w, h, |x, y| lum.get(w - 1 - x, y));
        let a = bilateral_local_average(&lum, &p);
        let b = bilateral_local_average(&flipped, &p);
        for y in 0..h {
            for x in 0..w {
                assert_relative_eq!(a.get(x, y), b.get(w - 1 - x, y), max_relative = 1e-12);
            }
        }
        let vflipped = LuminanceMap::from_fn(w, h, |x, y| lum.get(x, h - 1 - y));
        let c = bilateral_local_average(&vflipped, &p);
        for y in 0..h {
            for x in 0..w {
                assert_relative_eq!(a.get(x, y), c.get(x, h - 1 - y), max_relative = 1e-12);
            }
        }
    }

    #[test]
    fn works_in_f32() {
        let lum = LuminanceMap::filled(4, 4, 0.25f32);
        let p = BilateralParams::<f32>::default();
        let out = bilateral_local_average(&lum, &p);
        assert!(out.data().iter().all(|v| (v - 0.25).abs() < 1e-6));
    }
}
