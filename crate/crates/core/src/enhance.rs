//! Dodging-and-burning local contrast enhancement.

use rayon::prelude::*;

use crate::filters::{bilateral_local_average, BilateralParams};
use crate::image::LuminanceMap;
use crate::scalar::Real;

/// Returns `L² / L_a` where `L_a` is the bilateral local average of `lum`.
///
/// Pixels whose local average is zero map to zero; the average is a convex
/// combination that includes the pixel itself, so the pixel is zero as well.
pub fn dodge_burn<T: Real>(lum: &LuminanceMap<T>, params: &BilateralParams<T>) -> LuminanceMap<T> {
    let local = bilateral_local_average(lum, params);
    dodge_burn_with_average(lum, &local)
}

/// Dodging-and-burning against a precomputed local average.
pub fn dodge_burn_with_average<T: Real>(
    lum: &LuminanceMap<T>,
    local: &LuminanceMap<T>,
) -> LuminanceMap<T> {
    assert_eq!(lum.dims(), local.dims(), "local average dimensions");
    let data = lum
        .data()
        .par_iter()
        .zip(local.data())
        .map(|(&l, &la)| {
            if la > T::zero() {
                l * l / la
            } else {
                T::zero()
            }
        })
        .collect();
    LuminanceMap::from_raw(lum.width(), lum.height(), data)
}
