//! Gaussian and Laplacian pyramids over signed single-channel planes.

use rayon::prelude::*;

use crate::image::{LuminanceMap, RgbImage};
use crate::scalar::Real;

/// Largest level count for which every level keeps at least one pixel,
/// `floor(log2(min(width, height)))`.
pub fn max_levels(dims: (usize, usize)) -> usize {
    let m = dims.0.min(dims.1);
    if m == 0 {
        0
    } else {
        m.ilog2() as usize
    }
}

/// Signed raster used for pyramid coefficients.
#[derive(Clone, Debug, PartialEq)]
pub struct Plane<T> {
    pub width: usize,
    pub height: usize,
    pub data: Vec<T>,
}

impl<T: Real> Plane<T> {
    pub fn zeros(width: usize, height: usize) -> Self {
        Self {
            width,
            height,
            data: vec![T::zero(); width * height],
        }
    }

    fn from_lum(lum: &LuminanceMap<T>) -> Self {
        Self {
            width: lum.width(),
            height: lum.height(),
            data: lum.data().to_vec(),
        }
    }

    fn channel(image: &RgbImage<T>, c: usize) -> Self {
        Self {
            width: image.width(),
            height: image.height(),
            data: image.pixels().iter().map(|p| p[c]).collect(),
        }
    }

    #[inline]
    fn at(&self, x: usize, y: usize) -> T {
        self.data[y * self.width + x]
    }
}

const BINOMIAL: [f64; 5] = [1.0 / 16.0, 4.0 / 16.0, 6.0 / 16.0, 4.0 / 16.0, 1.0 / 16.0];

/// 5-tap binomial blur (clamp-to-edge) followed by 2:1 decimation; output
/// dimensions are `ceil(n / 2)`.
pub fn downsample<T: Real>(src: &Plane<T>) -> Plane<T> {
    let k = BINOMIAL.map(T::lit);
    let (w, h) = (src.width, src.height);
    let (dw, dh) = (w.div_ceil(2), h.div_ceil(2));
    let clamp = |i: isize, n: usize| i.clamp(0, n as isize - 1) as usize;

    // horizontal pass at the kept columns only
    let mut horiz = vec![T::zero(); dw * h];
    horiz.par_chunks_mut(dw).enumerate().for_each(|(y, row)| {
        for (dx, dst) in row.iter_mut().enumerate() {
            let x = (2 * dx) as isize;
            *dst = (0..5).fold(T::zero(), |acc, t| {
                acc + k[t] * src.at(clamp(x + t as isize - 2, w), y)
            });
        }
    });
    let mut out = vec![T::zero(); dw * dh];
    out.par_chunks_mut(dw).enumerate().for_each(|(dy, row)| {
        let y = (2 * dy) as isize;
        for (x, dst) in row.iter_mut().enumerate() {
            *dst = (0..5).fold(T::zero(), |acc, t| {
                acc + k[t] * horiz[clamp(y + t as isize - 2, h) * dw + x]
            });
        }
    });
    Plane {
        width: dw,
        height: dh,
        data: out,
    }
}

/// Linear interpolation back to an exact parent size. Coarse sample `i`
/// sits at fine position `2i`.
pub fn upsample<T: Real>(src: &Plane<T>, width: usize, height: usize) -> Plane<T> {
    let half = T::lit(0.5);
    let taps = |n: usize, coarse: usize| -> Vec<(usize, usize)> {
        (0..n)
            .map(|i| {
                let lo = (i / 2).min(coarse - 1);
                let hi = if i % 2 == 0 {
                    lo
                } else {
                    (i / 2 + 1).min(coarse - 1)
                };
                (lo, hi)
            })
            .collect()
    };
    let xs = taps(width, src.width);
    let ys = taps(height, src.height);
    let mut out = vec![T::zero(); width * height];
    out.par_chunks_mut(width).enumerate().for_each(|(y, row)| {
        let (y0, y1) = ys[y];
        for (x, dst) in row.iter_mut().enumerate() {
            let (x0, x1) = xs[x];
            let top = (src.at(x0, y0) + src.at(x1, y0)) * half;
            let bottom = (src.at(x0, y1) + src.at(x1, y1)) * half;
            *dst = (top + bottom) * half;
        }
    });
    Plane {
        width,
        height,
        data: out,
    }
}

pub fn gaussian_pyramid<T: Real>(base: Plane<T>, levels: usize) -> Vec<Plane<T>> {
    let mut pyr = vec![base];
    for _ in 1..levels {
        let next = downsample(pyr.last().expect("non-empty"));
        pyr.push(next);
    }
    pyr
}

/// Band-pass levels plus the low-pass residual as the last entry.
pub fn laplacian_pyramid<T: Real>(base: Plane<T>, levels: usize) -> Vec<Plane<T>> {
    let gauss = gaussian_pyramid(base, levels);
    let mut lap = Vec::with_capacity(levels);
    for l in 0..levels - 1 {
        let fine = &gauss[l];
        let up = upsample(&gauss[l + 1], fine.width, fine.height);
        let data = fine
            .data
            .iter()
            .zip(&up.data)
            .map(|(a, b)| *a - *b)
            .collect();
        lap.push(Plane {
            width: fine.width,
            height: fine.height,
            data,
        });
    }
    lap.push(gauss[levels - 1].clone());
    lap
}

/// Inverse of [`laplacian_pyramid`].
pub fn collapse<T: Real>(mut pyr: Vec<Plane<T>>) -> Plane<T> {
    let mut acc = pyr.pop().expect("non-empty pyramid");
    while let Some(band) = pyr.pop() {
        let up = upsample(&acc, band.width, band.height);
        let data = band
            .data
            .iter()
            .zip(&up.data)
            .map(|(a, b)| *a + *b)
            .collect();
        acc = Plane {
            width: band.width,
            height: band.height,
            data,
        };
    }
    acc
}

/// Blends `stack` with already normalized weights. Negative ringing in the
/// collapsed result is clipped to zero.
pub(crate) fn blend<T: Real>(
    stack: &[RgbImage<T>],
    normalized: &[LuminanceMap<T>],
    levels: usize,
) -> RgbImage<T> {
    let (w, h) = stack[0].dims();
    let weight_pyrs: Vec<Vec<Plane<T>>> = normalized
        .iter()
        .map(|m| gaussian_pyramid(Plane::from_lum(m), levels))
        .collect();

    let channels: Vec<Plane<T>> = (0..3)
        .map(|c| {
            let mut blended: Option<Vec<Plane<T>>> = None;
            for (image, wpyr) in stack.iter().zip(&weight_pyrs) {
                let lap = laplacian_pyramid(Plane::channel(image, c), levels);
                let acc = blended.get_or_insert_with(|| {
                    lap.iter()
                        .map(|p| Plane::zeros(p.width, p.height))
                        .collect()
                });
                for ((dst, band), wl) in acc.iter_mut().zip(&lap).zip(wpyr) {
                    for ((d, b), wv) in dst.data.iter_mut().zip(&band.data).zip(&wl.data) {
                        *d = *d + *wv * *b;
                    }
                }
            }
            collapse(blended.expect("non-empty stack"))
        })
        .collect();

    let data = (0..w * h)
        .map(|i| {
            [0, 1, 2].map(|c| {
                let v = channels[c].data[i];
                if v.is_finite() && v > T::zero() {
                    v
                } else {
                    T::zero()
                }
            })
        })
        .collect();
    RgbImage::from_raw(w, h, data)
}
