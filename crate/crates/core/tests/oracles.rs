//! Kernels checked against independent brute-force evaluations.

use approx::assert_relative_eq;
use expofuse::compensate::DEFAULT_TARGET_GRAY;
use expofuse::filters::gaussian_local_average;
use expofuse::image::ExposureStack;
use expofuse::synth::{bimodal, expose, make_stack, ramp, CrfModel};
use expofuse::{
    apply_gain, bilateral_local_average, dodge_burn, estimate_gains, geometric_mean, luminance_of,
    pyramid_blend, restore_color, simple_weights, weighted_average, BilateralParams, LuminanceMap,
    PixelRegion, RgbImage, WeightMaps,
};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn random_map(w: usize, h: usize, seed: u64) -> LuminanceMap {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    LuminanceMap::new(
        w,
        h,
        (0..w * h).map(|_| rng.random_range(0.0..1.0)).collect(),
    )
    .unwrap()
}

fn random_image(w: usize, h: usize, seed: u64, lo: f64, hi: f64) -> RgbImage {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    RgbImage::from_fn(w, h, |_, _| [0; 3].map(|_| rng.random_range(lo..hi)))
}

/// Bilateral average summed over every pixel pair of the image.
fn brute_bilateral(lum: &LuminanceMap, s1: f64, s2: f64) -> Vec<f64> {
    let (w, h) = lum.dims();
    let mut out = Vec::with_capacity(w * h);
    for py in 0..h {
        for px in 0..w {
            let lp = lum.get(px, py);
            let (mut num, mut den) = (0.0, 0.0);
            for qy in 0..h {
                for qx in 0..w {
                    let lq = lum.get(qx, qy);
                    let d2 = (qx as f64 - px as f64).powi(2) + (qy as f64 - py as f64).powi(2);
                    let wgt = (-d2 / (s1 * s1)).exp() * (-(lq - lp).powi(2) / (s2 * s2)).exp();
                    num += wgt * lq;
                    den += wgt;
                }
            }
            out.push(num / den);
        }
    }
    out
}

fn brute_geometric_mean(values: impl Iterator<Item = f64>, eps: f64) -> f64 {
    let (mut s, mut n) = (0.0, 0usize);
    for v in values {
        s += v.max(eps).ln();
        n += 1;
    }
    (s / n as f64).exp()
}

#[test]
fn bilateral_matches_full_domain_sum() {
    for (seed, s2) in [(1, 3.0 / 255.0), (2, 0.1), (3, 0.5)] {
        let lum = random_map(8, 8, seed);
        let expected = brute_bilateral(&lum, 16.0, s2);
        let truncated = bilateral_local_average(&lum, &BilateralParams::new(16.0, s2).unwrap());
        let exact = bilateral_local_average(&lum, &BilateralParams::new(16.0, s2).unwrap().exact());
        for ((e, t), x) in expected.iter().zip(truncated.data()).zip(exact.data()) {
            assert!((e - t).abs() < 1e-9, "{e} vs {t}");
            assert_eq!(t, x);
        }
    }
}

#[test]
fn bilateral_small_sigma_non_square() {
    let lum = random_map(11, 5, 9);
    let expected = brute_bilateral(&lum, 2.0, 0.2);
    let got = bilateral_local_average(&lum, &BilateralParams::with_radius(2.0, 0.2, 64).unwrap());
    for (e, g) in expected.iter().zip(got.data()) {
        assert!((e - g).abs() < 1e-9);
    }
}

#[test]
fn wide_range_sigma_is_gaussian_average() {
    let lum = random_map(12, 9, 5);
    let bil = bilateral_local_average(&lum, &BilateralParams::with_radius(3.0, 1e9, 9).unwrap());
    let gauss = gaussian_local_average(&lum, 3.0, 9);
    for (a, b) in bil.data().iter().zip(gauss.data()) {
        assert!((a - b).abs() < 1e-6);
    }
}

#[test]
fn dodge_burn_composes_with_brute_force_average() {
    let lum = random_map(8, 8, 21);
    let la = brute_bilateral(&lum, 16.0, 3.0 / 255.0);
    let lc = dodge_burn(&lum, &BilateralParams::default());
    for ((l, a), c) in lum.data().iter().zip(&la).zip(lc.data()) {
        assert!((l * l / a - c).abs() < 1e-9);
    }
}

#[test]
fn geometric_mean_matches_log_sum() {
    let lum = random_map(16, 16, 3);
    let full = PixelRegion::full(16, 16);
    let g = geometric_mean(&lum, &full, 1e-6).unwrap();
    assert_relative_eq!(
        g,
        brute_geometric_mean(lum.data().iter().copied(), 1e-6),
        max_relative = 1e-12
    );

    let mask: Vec<bool> = lum.data().iter().map(|v| *v > 0.4).collect();
    let region = PixelRegion::from_mask(16, 16, mask).unwrap();
    let sub = lum.data().iter().copied().filter(|v| *v > 0.4);
    assert_relative_eq!(
        geometric_mean(&lum, &region, 1e-6).unwrap(),
        brute_geometric_mean(sub, 1e-6),
        max_relative = 1e-12
    );
}

/// Gains of a three-exposure synthetic stack against thresholds and means
/// recomputed from scratch.
#[test]
fn gains_match_hand_computed_band_means() {
    let field = bimodal::<f64>(40, 30, 7).unwrap();
    let stack = make_stack(&field, &[-1.0, 0.0, 1.0], &CrfModel::linear()).unwrap();
    let params = BilateralParams::default();
    let enhanced: Vec<LuminanceMap> = stack
        .images()
        .iter()
        .map(|im| dodge_burn(&luminance_of(im), &params))
        .collect();
    let plan = estimate_gains(&enhanced, 1e-6, 0.18).unwrap();
    assert_eq!(plan.middle_index, 2);

    let reference = enhanced[1].data();
    let hi = reference.iter().copied().fold(f64::MIN, f64::max);
    let lo = reference.iter().copied().fold(f64::MAX, f64::min);
    let step = (hi - lo) / 3.0;
    let band = |v: f64| -> usize {
        if v >= hi - step {
            0
        } else if v >= hi - 2.0 * step {
            1
        } else {
            2
        }
    };
    for k in [0usize, 2] {
        let members = reference
            .iter()
            .zip(enhanced[k].data())
            .filter(|(r, _)| band(**r) == k)
            .map(|(_, v)| *v);
        let g = brute_geometric_mean(members, 1e-6);
        assert!((plan.gains[k] - 0.18 / g).abs() < 1e-9 * plan.gains[k].max(1.0));
    }
    let g_mid = brute_geometric_mean(reference.iter().copied(), 1e-6);
    assert!((plan.gains[1] - 0.18 / g_mid).abs() < 1e-9);
    let outer = reference.iter().filter(|r| band(**r) != 1).count();
    assert_eq!(plan.region_sizes[0] + plan.region_sizes[2], outer);
}

#[test]
fn compensated_means_hit_target() {
    let field = bimodal::<f64>(48, 36, 2).unwrap();
    let stack = make_stack(&field, &[-2.0, 0.0, 2.0], &CrfModel::linear()).unwrap();
    let params = BilateralParams::default();
    let enhanced: Vec<LuminanceMap> = stack
        .images()
        .iter()
        .map(|im| dodge_burn(&luminance_of(im), &params))
        .collect();
    let plan = estimate_gains(&enhanced, 1e-6, DEFAULT_TARGET_GRAY).unwrap();
    let regions = expofuse::partition_regions(&enhanced[1], &plan.thresholds);
    let full = PixelRegion::full(48, 36);
    let mut checked = 0;
    for (k, lum) in enhanced.iter().enumerate() {
        let adjusted = apply_gain(lum, plan.gains[k]);
        let region = if k == 1 { &full } else { &regions[k] };
        if region.is_empty() || region.indices().any(|i| lum.data()[i] < 1e-6) {
            continue;
        }
        let g = geometric_mean(&adjusted, region, 1e-6).unwrap();
        assert_relative_eq!(g, 0.18, max_relative = 1e-6);
        checked += 1;
    }
    assert_eq!(checked, 3);
}

#[test]
fn gain_of_two_to_the_ev_reproduces_exposure() {
    let field = ramp::<f64>(16, 4, 0.01, 0.2).unwrap();
    let crf = CrfModel::linear();
    let base = expose(&field, 1.0, &crf, 1.0).unwrap();
    for ev in [1.0, 2.0, -1.0, -3.0] {
        let shot = expose(&field, f64::exp2(ev), &crf, 1.0).unwrap();
        assert_eq!(shot.ev, ev);
        let scaled = apply_gain(&luminance_of(&base.image), f64::exp2(ev));
        assert_eq!(scaled.data(), luminance_of(&shot.image).data());
    }
}

#[test]
fn restore_color_keeps_chromaticity() {
    let original = random_image(10, 7, 11, 0.0, 1.0);
    let lum = luminance_of(&original);
    let target = random_map(10, 7, 12);
    let out = restore_color(&original, &lum, &target).unwrap();
    for (i, (a, b)) in original.pixels().iter().zip(out.pixels()).enumerate() {
        if lum.data()[i] > 0.0 {
            assert!((a[0] * b[1] - a[1] * b[0]).abs() < 1e-9);
            assert!((a[1] * b[2] - a[2] * b[1]).abs() < 1e-9);
        }
    }
    for (a, b) in luminance_of(&out).data().iter().zip(target.data()) {
        assert!((a - b).abs() < 1e-9);
    }
}

#[test]
fn pyramid_single_image_reconstructs() {
    let image = random_image(37, 23, 4, 0.0, 1.0);
    let weights = simple_weights(1, (37, 23));
    for levels in 1..=expofuse::pyramid::max_levels((37, 23)) {
        let out = pyramid_blend(std::slice::from_ref(&image), &weights, levels).unwrap();
        for (a, b) in image
            .pixels()
            .iter()
            .flatten()
            .zip(out.pixels().iter().flatten())
        {
            assert!((a - b).abs() < 1e-6);
        }
    }
}

#[test]
fn pyramid_uniform_weights_give_mean() {
    let stack: Vec<RgbImage> = (0..3)
        .map(|s| random_image(30, 18, 40 + s, 0.0, 1.0))
        .collect();
    let weights = simple_weights(3, (30, 18));
    let mean: Vec<f64> = (0..30 * 18 * 3)
        .map(|i| {
            stack
                .iter()
                .map(|im| im.pixels()[i / 3][i % 3])
                .sum::<f64>()
                / 3.0
        })
        .collect();
    for levels in 1..=4 {
        let out = pyramid_blend(&stack, &weights, levels).unwrap();
        for (a, b) in out.pixels().iter().flatten().zip(&mean) {
            assert!((a - b).abs() < 1e-6);
        }
    }
}

#[test]
fn pyramid_one_level_is_weighted_average() {
    let stack: Vec<RgbImage> = (0..3)
        .map(|s| random_image(16, 16, 60 + s, 0.0, 1.0))
        .collect();
    let maps = (0..3).map(|s| random_map(16, 16, 70 + s)).collect();
    let weights = WeightMaps::new(maps).unwrap();
    let a = pyramid_blend(&stack, &weights, 1).unwrap();
    let b = weighted_average(&stack, &weights).unwrap();
    assert_eq!(a, b);
}

#[test]
fn stack_reordering_by_brightness() {
    let field = ramp::<f64>(8, 8, 0.02, 0.2).unwrap();
    let stack = make_stack(&field, &[-1.0, 0.0, 1.0], &CrfModel::linear()).unwrap();
    let shuffled = vec![
        stack.images()[2].clone(),
        stack.images()[0].clone(),
        stack.images()[1].clone(),
    ];
    let sorted = ExposureStack::from_unordered(shuffled, None).unwrap();
    assert_eq!(sorted.images(), stack.images());
}
