//! Reinhard global tone mapping and color restoration.

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::image::{LuminanceMap, RgbImage};
use crate::scalar::Real;

/// Reinhard's global operator `L / (1 + L) * (1 + L / L_white²)`.
#[inline]
pub fn reinhard_value<T: Real>(l: T, l_white: T) -> T {
    l / (T::one() + l) * (T::one() + l / (l_white * l_white))
}

pub fn reinhard<T: Real>(lum: &LuminanceMap<T>, l_white: T) -> Result<LuminanceMap<T>> {
    if !(l_white > T::zero() && l_white.is_finite()) {
        return Err(Error::InvalidParameter(format!(
            "l_white must be > 0, got {l_white}"
        )));
    }
    Ok(lum.map(|l| reinhard_value(l, l_white)))
}

/// Tone maps with the white point at the map's maximum, so the brightest
/// pixel lands on 1. Rounding excess above 1 is clipped.
pub fn tonemap_stack_image<T: Real>(adjusted: &LuminanceMap<T>) -> LuminanceMap<T> {
    let l_white = adjusted.max();
    if l_white == T::zero() {
        return LuminanceMap::filled(adjusted.width(), adjusted.height(), T::zero());
    }
    adjusted.map(|l| reinhard_value(l, l_white).min(T::one()))
}

/// Rescales each pixel's RGB by `new_lum / original_lum`. Pixels with zero
/// original luminance become black.
pub fn restore_color<T: Real>(
    original: &RgbImage<T>,
    original_lum: &LuminanceMap<T>,
    new_lum: &LuminanceMap<T>,
) -> Result<RgbImage<T>> {
    for dims in [original_lum.dims(), new_lum.dims()] {
        if dims != original.dims() {
            return Err(Error::DimensionMismatch {
                expected: original.dims(),
                found: dims,
            });
        }
    }
    let data = original
        .pixels()
        .par_iter()
        .zip(original_lum.data())
        .zip(new_lum.data())
        .map(|((rgb, &l), &l_new)| {
            if l > T::zero() {
                let ratio = l_new / l;
                rgb.map(|c| c * ratio)
            } else {
                [T::zero(); 3]
            }
        })
        .collect();
    Ok(RgbImage::from_raw(
        original.width(),
        original.height(),
        data,
    ))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::image::luminance_of;
    use approx::assert_relative_eq;

    #[test]
    fn reinhard_anchors() {
        assert_eq!(reinhard_value(0.0f64, 3.0), 0.0);
        assert_relative_eq!(reinhard_value(2.0f64, 2.0), 1.0, max_relative = 1e-15);
        assert_relative_eq!(reinhard_value(1.0f64, 2.0), 0.625, max_relative = 1e-15);
        assert!(reinhard(&LuminanceMap::filled(1, 1, 1.0f64), 0.0).is_err());
    }

    #[test]
    fn tonemap_examples() {
        let c = tonemap_stack_image(&LuminanceMap::filled(3, 2, 0.7f64));
        assert!(c.data().iter().all(|v| (v - 1.0).abs() < 1e-15));

        let z = tonemap_stack_image(&LuminanceMap::filled(3, 2, 0.0f64));
        assert!(z.data().iter().all(|v| *v == 0.0));

        let m = tonemap_stack_image(&LuminanceMap::new(2, 1, vec![1.0f64, 2.0]).unwrap());
        assert_relative_eq!(m.data()[0], 0.625, max_relative = 1e-15);
        assert_relative_eq!(m.data()[1], 1.0, max_relative = 1e-15);
    }

    #[test]
    fn restore_color_examples() {
        let img = RgbImage::new(2, 1, vec![[0.2f64, 0.4, 0.1], [0.3, 0.3, 0.3]]).unwrap();
        let lum = luminance_of(&img);
        assert_eq!(restore_color(&img, &lum, &lum).unwrap(), img);

        let half = lum.scale(0.5);
        let out = restore_color(&img, &lum, &half).unwrap();
        let [r, g, b] = out.get(0, 0);
        assert_relative_eq!(r, 0.1, max_relative = 1e-12);
        assert_relative_eq!(g, 0.2, max_relative = 1e-12);
        assert_relative_eq!(b, 0.05, max_relative = 1e-12);

        let double = lum.scale(2.0);
        let out = restore_color(&img, &lum, &double).unwrap();
        for c in out.get(1, 0) {
            assert_relative_eq!(c, 0.6, max_relative = 1e-12);
        }
    }

    #[test]
    fn restore_color_black_pixel() {
        let img = RgbImage::new(1, 1, vec![[0.0f64; 3]]).unwrap();
        let lum = luminance_of(&img);
        let out = restore_color(&img, &lum, &LuminanceMap::filled(1, 1, 0.5)).unwrap();
        assert_eq!(out.get(0, 0), [0.0; 3]);
    }
}
