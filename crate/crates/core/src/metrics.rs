//! Reference-free quality metrics: well-exposedness, discrete entropy and
//! TMQI statistical naturalness.

use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::fuse::WeightScheme;
use crate::image::{LuminanceMap, RgbImage, REC709};
use crate::io::quantize;
use crate::scalar::Real;

/// Spread of the well-exposedness Gaussian around mid-gray.
pub const WELL_EXPOSEDNESS_SIGMA: f64 = 0.2;

/// Statistical-naturalness model constants from the TMQI reference
/// implementation (Yeganeh and Wang, "Objective quality assessment of
/// tone-mapped images", IEEE TIP 2013).
pub mod tmqi {
    /// Mean of the Gaussian brightness model, in 8-bit code units.
    pub const BRIGHTNESS_MEAN: f64 = 115.94;
    /// Standard deviation of the Gaussian brightness model.
    pub const BRIGHTNESS_STD: f64 = 27.99;
    /// Beta contrast model shape parameters.
    pub const CONTRAST_ALPHA: f64 = 4.4;
    pub const CONTRAST_BETA: f64 = 10.1;
    /// Divisor mapping mean local standard deviation onto the Beta support.
    pub const CONTRAST_SCALE: f64 = 64.29;
    /// Side of the non-overlapping blocks used for local standard deviation.
    pub const BLOCK: usize = 11;
}

#[inline]
pub fn well_exposedness_pixel<T: Real>(rgb: [T; 3]) -> T {
    let half = T::lit(0.5);
    let denom = T::lit(2.0 * WELL_EXPOSEDNESS_SIGMA * WELL_EXPOSEDNESS_SIGMA);
    rgb.iter().fold(T::one(), |acc, &c| {
        acc * (-(c - half).powi(2) / denom).exp()
    })
}

pub fn well_exposedness_map<T: Real>(image: &RgbImage<T>) -> LuminanceMap<T> {
    let data = image
        .pixels()
        .par_iter()
        .map(|&p| well_exposedness_pixel(p))
        .collect();
    LuminanceMap::from_raw(image.width(), image.height(), data)
}

/// Pixelwise maximum of the well-exposedness maps of a stack.
pub fn max_well_exposedness<T: Real>(stack: &[RgbImage<T>]) -> Result<LuminanceMap<T>> {
    let first = stack.first().ok_or(Error::EmptyStack)?;
    let mut acc = well_exposedness_map(first).into_data();
    for image in &stack[1..] {
        if image.dims() != first.dims() {
            return Err(Error::DimensionMismatch {
                expected: first.dims(),
                found: image.dims(),
            });
        }
        for (a, v) in acc.iter_mut().zip(well_exposedness_map(image).data()) {
            *a = a.max(*v);
        }
    }
    Ok(LuminanceMap::from_raw(first.width(), first.height(), acc))
}

pub fn mean<T: Real>(lum: &LuminanceMap<T>) -> f64 {
    if lum.is_empty() {
        return 0.0;
    }
    lum.data().iter().map(|v| v.as_f64()).sum::<f64>() / lum.len() as f64
}

/// 8-bit gray codes: channels clipped to `[0, 1]`, Rec. 709 luminance,
/// round-half-up quantization.
pub fn gray_codes<T: Real>(image: &RgbImage<T>) -> Vec<u8> {
    image
        .pixels()
        .iter()
        .map(|p| {
            let l: f64 = p
                .iter()
                .zip(REC709)
                .map(|(c, w)| w * c.as_f64().clamp(0.0, 1.0))
                .sum();
            quantize(l, 255.0) as u8
        })
        .collect()
}

/// Shannon entropy in bits of a 256-bin histogram.
pub fn histogram_entropy(hist: &[u64; 256]) -> f64 {
    let total: u64 = hist.iter().sum();
    if total == 0 {
        return 0.0;
    }
    let total = total as f64;
    hist.iter()
        .filter(|&&n| n > 0)
        .map(|&n| {
            let n = n as f64;
            n / total * (total / n).log2()
        })
        .sum::<f64>()
}

/// Entropy of the 8-bit grayscale histogram, in bits (`[0, 8]`).
pub fn discrete_entropy<T: Real>(image: &RgbImage<T>) -> f64 {
    let mut hist = [0u64; 256];
    for code in gray_codes(image) {
        hist[code as usize] += 1;
    }
    histogram_entropy(&hist).clamp(0.0, 8.0)
}

/// Gaussian brightness likelihood, 1 at the model mean.
pub fn brightness_likelihood(mean_code: f64) -> f64 {
    let z = (mean_code - tmqi::BRIGHTNESS_MEAN) / tmqi::BRIGHTNESS_STD;
    (-0.5 * z * z).exp()
}

/// Beta contrast likelihood, 1 at the Beta mode.
pub fn contrast_likelihood(mean_local_std: f64) -> f64 {
    let (a, b) = (tmqi::CONTRAST_ALPHA, tmqi::CONTRAST_BETA);
    let x = mean_local_std / tmqi::CONTRAST_SCALE;
    if !(x > 0.0 && x < 1.0) {
        return 0.0;
    }
    let mode = (a - 1.0) / (a + b - 2.0);
    // ratio of Beta densities; the normalizing constant cancels
    ((a - 1.0) * (x / mode).ln() + (b - 1.0) * ((1.0 - x) / (1.0 - mode)).ln()).exp()
}

/// Pixel-weighted mean of sample standard deviations over non-overlapping
/// square blocks. Edge blocks use the pixels that fall inside the image.
pub fn mean_block_std(codes: &[u8], width: usize, height: usize, block: usize) -> f64 {
    let mut weighted = 0.0;
    let mut pixels = 0usize;
    for by in (0..height).step_by(block) {
        for bx in (0..width).step_by(block) {
            let ys = by..(by + block).min(height);
            let xs = bx..(bx + block).min(width);
            let n = ys.len() * xs.len();
            let mut sum = 0.0;
            let mut sq = 0.0;
            for y in ys.clone() {
                for x in xs.clone() {
                    let v = f64::from(codes[y * width + x]);
                    sum += v;
                    sq += v * v;
                }
            }
            let std = if n > 1 {
                let mu = sum / n as f64;
                ((sq - n as f64 * mu * mu).max(0.0) / (n - 1) as f64).sqrt()
            } else {
                0.0
            };
            weighted += std * n as f64;
            pixels += n;
        }
    }
    if pixels == 0 {
        0.0
    } else {
        weighted / pixels as f64
    }
}

/// TMQI statistical naturalness in `[0, 1]`.
pub fn statistical_naturalness<T: Real>(image: &RgbImage<T>) -> f64 {
    let codes = gray_codes(image);
    if codes.is_empty() {
        return 0.0;
    }
    let mean_code = codes.iter().map(|&c| f64::from(c)).sum::<f64>() / codes.len() as f64;
    let sig = mean_block_std(&codes, image.width(), image.height(), tmqi::BLOCK);
    (brightness_likelihood(mean_code) * contrast_likelihood(sig)).clamp(0.0, 1.0)
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct QualityReport {
    pub scheme: WeightScheme,
    pub adjusted: bool,
    pub statistical_naturalness: f64,
    pub discrete_entropy: f64,
    /// Mean well-exposedness of each fused input image.
    pub mean_well_exposedness: Vec<f64>,
    /// Mean of the pixelwise-max well-exposedness over the fused inputs.
    pub mean_max_well_exposedness: f64,
}

impl QualityReport {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }

    pub fn csv_header() -> &'static str {
        "scheme,adjusted,statistical_naturalness,discrete_entropy,mean_max_well_exposedness"
    }

    pub fn csv_row(&self) -> String {
        let scheme = match self.scheme {
            WeightScheme::Simple => "simple",
            WeightScheme::Mertens => "mertens",
        };
        format!(
            "{scheme},{},{:.6},{:.6},{:.6}",
            self.adjusted,
            self.statistical_naturalness,
            self.discrete_entropy,
            self.mean_max_well_exposedness
        )
    }
}

/// Scores a fusion result. `fused_inputs` is the stack that was fused
/// (adjusted images when `adjusted` is set, the raw stack otherwise).
pub fn build_report<T: Real>(
    fused_inputs: &[RgbImage<T>],
    fused: &RgbImage<T>,
    scheme: WeightScheme,
    adjusted: bool,
) -> Result<QualityReport> {
    let per_image = fused_inputs
        .iter()
        .map(|im| mean(&well_exposedness_map(im)))
        .collect();
    let max_map = max_well_exposedness(fused_inputs)?;
    Ok(QualityReport {
        scheme,
        adjusted,
        statistical_naturalness: statistical_naturalness(fused),
        discrete_entropy: discrete_entropy(fused),
        mean_well_exposedness: per_image,
        mean_max_well_exposedness: mean(&max_map),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn gray_from_codes(w: usize, h: usize, codes: &[u8]) -> RgbImage<f64> {
        RgbImage::from_fn(w, h, |x, y| [f64::from(codes[y * w + x]) / 255.0; 3])
    }

    #[test]
    fn well_exposedness_anchors() {
        assert_eq!(well_exposedness_pixel([0.5f64; 3]), 1.0);
        let black = well_exposedness_pixel([0.0f64; 3]);
        assert_relative_eq!(black, (-3.0f64 * 0.25 / 0.08).exp(), max_relative = 1e-12);
        assert_relative_eq!(black, (-9.375f64).exp(), max_relative = 1e-12);
        for v in [0.0, 0.13, 0.3, 0.49] {
            assert_relative_eq!(
                well_exposedness_pixel([v; 3]),
                well_exposedness_pixel([1.0 - v; 3]),
                max_relative = 1e-12
            );
        }
    }

    #[test]
    fn max_well_exposedness_examples() {
        let a = RgbImage::filled(2, 2, [0.3f64; 3]);
        let b = RgbImage::filled(2, 2, [0.7f64; 3]);
        let m = max_well_exposedness(&[a.clone(), b]).unwrap();
        let expect = (-0.04f64 / 0.08).exp().powi(3);
        assert!(m.data().iter().all(|v| (v - expect).abs() < 1e-12));
        assert_eq!(
            max_well_exposedness(std::slice::from_ref(&a)).unwrap(),
            well_exposedness_map(&a)
        );

        let mut mid = a.clone().into_pixels();
        mid[3] = [0.5; 3];
        let mid = RgbImage::new(2, 2, mid).unwrap();
        let m = max_well_exposedness(&[a, mid]).unwrap();
        assert_eq!(m.get(1, 1), 1.0);
    }

    #[test]
    fn entropy_anchors() {
        assert_eq!(discrete_entropy(&RgbImage::filled(5, 5, [0.4f64; 3])), 0.0);
        let all: Vec<u8> = (0..=255).collect();
        assert_eq!(discrete_entropy(&gray_from_codes(16, 16, &all)), 8.0);
        let two: Vec<u8> = (0..16).map(|i| if i % 2 == 0 { 10 } else { 200 }).collect();
        assert_eq!(discrete_entropy(&gray_from_codes(4, 4, &two)), 1.0);
    }

    #[test]
    fn gray_codes_round_half_up() {
        let img = RgbImage::new(3, 1, vec![[1.0f64; 3], [0.0; 3], [2.0, 2.0, 2.0]]).unwrap();
        assert_eq!(gray_codes(&img), vec![255, 0, 255]);
    }

    #[test]
    fn naturalness_constant_is_zero() {
        let n = statistical_naturalness(&RgbImage::filled(20, 20, [115.94f64 / 255.0; 3]));
        assert_eq!(n, 0.0);
    }

    #[test]
    fn likelihood_peaks() {
        assert_eq!(brightness_likelihood(115.94), 1.0);
        let mode = 3.4 / 12.5 * 64.29;
        assert_relative_eq!(contrast_likelihood(mode), 1.0, max_relative = 1e-12);
        assert!(contrast_likelihood(mode * 0.9) < 1.0);
        assert!(contrast_likelihood(mode * 1.1) < 1.0);
        assert_eq!(contrast_likelihood(0.0), 0.0);
        assert_eq!(contrast_likelihood(70.0), 0.0);
    }

    #[test]
    fn block_std_matches_definition() {
        // one full 2x2 block of {0, 2, 4, 6}: sample std = sqrt(20/3)
        let codes = [0u8, 2, 4, 6];
        assert_relative_eq!(
            mean_block_std(&codes, 2, 2, 2),
            (20.0f64 / 3.0).sqrt(),
            max_relative = 1e-12
        );
        // 3x1 with block 2: blocks {0,2} and {4}
        let codes = [0u8, 2, 4];
        let expect = 2f64.sqrt() * 2.0 / 3.0;
        assert_relative_eq!(
            mean_block_std(&codes, 3, 1, 2),
            expect,
            max_relative = 1e-12
        );
    }

    #[test]
    fn report_fields() {
        let img = RgbImage::filled(4, 4, [0.5f64; 3]);
        let r = build_report(
            std::slice::from_ref(&img),
            &img,
            WeightScheme::Simple,
            false,
        )
        .unwrap();
        assert_eq!(r.discrete_entropy, discrete_entropy(&img));
        assert_eq!(r.mean_well_exposedness, vec![1.0]);
        let v: serde_json::Value = serde_json::from_str(&r.to_json()).unwrap();
        assert_eq!(v["scheme"], "simple");
        assert_eq!(v["adjusted"], false);
        assert!(v["mean_well_exposedness"].is_array());
        assert_eq!(
            r.csv_row().split(',').count(),
            QualityReport::csv_header().split(',').count()
        );
    }
}
