//! Luminance adjustment of multi-exposure stacks by automatic exposure
//! compensation, followed by weighted-average fusion.
//!
//! All kernels are generic over [`Real`] (`f32` or `f64`); the aliases at
//! the crate root fix the scalar to `f64` for the common case.

pub mod compensate;
pub mod enhance;
pub mod error;
pub mod filters;
pub mod fuse;
pub mod image;
pub mod io;
pub mod metrics;
pub mod pipeline;
pub mod pyramid;
pub mod scalar;
pub mod synth;
pub mod tonemap;

pub use compensate::{
    apply_gain, estimate_gains, middle_index, partition_regions, partition_thresholds,
};
pub use enhance::dodge_burn;
pub use error::{Error, Result};
pub use filters::{bilateral_local_average, gaussian_weight};
pub use fuse::{
    mertens_weights, pyramid_blend, simple_weights, weighted_average, BlendMode, PyramidLevels,
    WeightScheme,
};
pub use image::{geometric_mean, luminance_of, PixelRegion};
pub use io::{
    read_image, read_image_with_max_code, write_image, BitDepth, ImageFormat, ReadOptions,
    WriteOptions,
};
pub use metrics::{
    discrete_entropy, max_well_exposedness, statistical_naturalness, well_exposedness_map,
    QualityReport,
};
pub use pipeline::{adjust_stack, run};
pub use scalar::Real;
pub use synth::CrfModel;
pub use tonemap::{reinhard, restore_color, tonemap_stack_image};

/// Lower clamp applied to luminance before taking logarithms.
pub const DEFAULT_EPSILON: f64 = 1e-6;

pub type LuminanceMap = image::LuminanceMap<f64>;
pub type RgbImage = image::RgbImage<f64>;
pub type ExposureStack = image::ExposureStack<f64>;
pub type BilateralParams = filters::BilateralParams<f64>;
pub type CompensationPlan = compensate::CompensationPlan<f64>;
pub type FusionConfig = fuse::FusionConfig<f64>;
pub type WeightMaps = fuse::WeightMaps<f64>;
pub type AdjustParams = pipeline::AdjustParams<f64>;
pub type PipelineConfig = pipeline::PipelineConfig<f64>;
pub type IrradianceField = synth::IrradianceField<f64>;

pub type LuminanceMapF32 = image::LuminanceMap<f32>;
pub type RgbImageF32 = image::RgbImage<f32>;
pub type ExposureStackF32 = image::ExposureStack<f32>;
