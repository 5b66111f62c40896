//! End-to-end luminance adjustment and fusion.
//!
//! Per image: luminance, dodging-and-burning, then (after all enhanced maps
//! are known) gain estimation, gain, Reinhard tone mapping with the white
//! point at the image maximum, and color restoration. The adjusted stack is
//! then fused and scored.

use rayon::prelude::*;

use crate::compensate::{apply_gain, estimate_gains, CompensationPlan, DEFAULT_TARGET_GRAY};
use crate::enhance::dodge_burn;
use crate::error::Result;
use crate::filters::BilateralParams;
use crate::fuse::{fuse, FusionConfig, WeightMaps};
use crate::image::{luminance_of, ExposureStack, LuminanceMap, RgbImage};
use crate::io::encode_srgb;
use crate::metrics::{build_report, QualityReport};
use crate::scalar::Real;
use crate::tonemap::{restore_color, tonemap_stack_image};
use crate::DEFAULT_EPSILON;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct AdjustParams<T> {
    pub bilateral: BilateralParams<T>,
    pub epsilon: T,
    pub target_gray: T,
}

impl<T: Real> Default for AdjustParams<T> {
    fn default() -> Self {
        Self {
            bilateral: BilateralParams::default(),
            epsilon: T::lit(DEFAULT_EPSILON),
            target_gray: T::lit(DEFAULT_TARGET_GRAY),
        }
    }
}

/// Adjusted stack together with every intermediate map.
#[derive(Clone, Debug)]
pub struct Adjustment<T> {
    pub stack: ExposureStack<T>,
    pub luminance: Vec<LuminanceMap<T>>,
    pub enhanced: Vec<LuminanceMap<T>>,
    pub plan: CompensationPlan<T>,
    pub compensated: Vec<LuminanceMap<T>>,
    pub tonemapped: Vec<LuminanceMap<T>>,
}

pub fn adjust_stack<T: Real>(
    stack: &ExposureStack<T>,
    params: &AdjustParams<T>,
) -> Result<Adjustment<T>> {
    let (luminance, enhanced): (Vec<_>, Vec<_>) = stack
        .images()
        .par_iter()
        .map(|image| {
            let lum = luminance_of(image);
            let enhanced = dodge_burn(&lum, &params.bilateral);
            (lum, enhanced)
        })
        .unzip();

    let plan = estimate_gains(&enhanced, params.epsilon, params.target_gray)?;

    let stages = stack
        .images()
        .par_iter()
        .zip(&luminance)
        .zip(&enhanced)
        .zip(&plan.gains)
        .map(|(((image, lum), lc), &alpha)| {
            let compensated = apply_gain(lc, alpha);
            let tonemapped = tonemap_stack_image(&compensated);
            let restored = restore_color(image, lum, &tonemapped)?;
            Ok((compensated, tonemapped, restored))
        })
        .collect::<Result<Vec<_>>>()?;

    let mut compensated = Vec::with_capacity(stages.len());
    let mut tonemapped = Vec::with_capacity(stages.len());
    let mut images = Vec::with_capacity(stages.len());
    for (c, t, i) in stages {
        compensated.push(c);
        tonemapped.push(t);
        images.push(i);
    }

    Ok(Adjustment {
        stack: ExposureStack::new(images, stack.evs().map(<[f64]>::to_vec))?,
        luminance,
        enhanced,
        plan,
        compensated,
        tonemapped,
    })
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct PipelineConfig<T> {
    pub adjust: Option<AdjustParams<T>>,
    pub fusion: FusionConfig<T>,
    /// Pixel data is sRGB-decoded linear light; metrics are then computed
    /// on the re-encoded display values.
    pub display_srgb: bool,
}

impl<T: Real> Default for PipelineConfig<T> {
    fn default() -> Self {
        Self {
            adjust: Some(AdjustParams::default()),
            fusion: FusionConfig::default(),
            display_srgb: false,
        }
    }
}

#[derive(Clone, Debug)]
pub struct RunOutput<T> {
    pub fused: RgbImage<T>,
    pub report: QualityReport,
    pub adjustment: Option<Adjustment<T>>,
    pub weights: WeightMaps<T>,
}

/// Adjusts (unless disabled), fuses and scores a stack.
pub fn run<T: Real>(stack: &ExposureStack<T>, config: &PipelineConfig<T>) -> Result<RunOutput<T>> {
    config.fusion.validate()?;
    let adjustment = config
        .adjust
        .as_ref()
        .map(|params| adjust_stack(stack, params))
        .transpose()?;
    let inputs = adjustment
        .as_ref()
        .map_or(stack.images(), |a| a.stack.images());
    let (fused, weights) = fuse(inputs, &config.fusion)?;

    let report = if config.display_srgb {
        let display: Vec<_> = inputs.iter().map(|im| encode_srgb(&im.clamped())).collect();
        let fused_display = encode_srgb(&fused.clamped());
        build_report(
            &display,
            &fused_display,
            config.fusion.scheme,
            adjustment.is_some(),
        )?
    } else {
        build_report(inputs, &fused, config.fusion.scheme, adjustment.is_some())?
    };

    Ok(RunOutput {
        fused,
        report,
        adjustment,
        weights,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::image::{geometric_mean, PixelRegion};
    use crate::synth::{bimodal, make_stack, CrfModel};
    use approx::assert_relative_eq;

    fn small_params() -> AdjustParams<f64> {
        AdjustParams {
            bilateral: BilateralParams::new(2.0, 3.0 / 255.0).unwrap(),
            ..AdjustParams::default()
        }
    }

    #[test]
    fn single_mid_gray_maps_to_white() {
        let stack = ExposureStack::new(vec![RgbImage::filled(6, 6, [0.18f64; 3])], None).unwrap();
        let adj = adjust_stack(&stack, &small_params()).unwrap();
        assert_relative_eq!(adj.plan.gains[0], 1.0, max_relative = 1e-12);
        for p in adj.stack.images()[0].pixels() {
            for c in p {
                assert_relative_eq!(*c, 1.0, max_relative = 1e-12);
            }
        }
    }

    #[test]
    fn middle_image_hits_target_before_tonemap() {
        let field = bimodal::<f64>(24, 20, 9).unwrap();
        let stack = make_stack(&field, &[-1.0, 0.0, 1.0], &CrfModel::linear()).unwrap();
        let adj = adjust_stack(&stack, &small_params()).unwrap();
        assert_eq!(adj.plan.middle_index, 2);
        let g = geometric_mean(&adj.compensated[1], &PixelRegion::full(24, 20), 1e-6).unwrap();
        assert_relative_eq!(g, 0.18, max_relative = 1e-6);
        for lum in &adj.tonemapped {
            assert!(lum.data().iter().all(|v| *v <= 1.0));
        }
    }

    #[test]
    fn no_adjust_single_image_is_identity() {
        let img = RgbImage::new(2, 1, vec![[0.1, 0.5, 0.9], [0.3, 0.2, 0.1]]).unwrap();
        let stack = ExposureStack::new(vec![img.clone()], None).unwrap();
        let config = PipelineConfig {
            adjust: None,
            ..PipelineConfig::default()
        };
        let out = run(&stack, &config).unwrap();
        assert_eq!(out.fused, img);
        assert!(!out.report.adjusted);
        assert!(out.adjustment.is_none());
    }

    #[test]
    fn adjust_changes_bimodal_fusion() {
        let field = bimodal::<f64>(24, 20, 9).unwrap();
        let stack = make_stack(&field, &[-1.0, 0.0, 1.0], &CrfModel::linear()).unwrap();
        let with = run(
            &stack,
            &PipelineConfig {
                adjust: Some(small_params()),
                ..PipelineConfig::default()
            },
        )
        .unwrap();
        let without = run(
            &stack,
            &PipelineConfig {
                adjust: None,
                ..PipelineConfig::default()
            },
        )
        .unwrap();
        assert_ne!(with.fused, without.fused);
        let adj = with.adjustment.as_ref().unwrap();
        assert_eq!(adj.enhanced.len(), 3);
        assert_eq!(adj.plan.gains.len(), 3);
        assert_eq!(with.weights.len(), 3);
    }
}
