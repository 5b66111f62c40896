use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("raster dimensions mismatch: expected {expected:?}, found {found:?}")]
    DimensionMismatch {
        expected: (usize, usize),
        found: (usize, usize),
    },
    #[error("raster buffer length {len} does not match {width}x{height}x{channels}")]
    BufferLength {
        len: usize,
        width: usize,
        height: usize,
        channels: usize,
    },
    #[error("pixel data contains a negative or non-finite value")]
    InvalidPixel,
    #[error("exposure stack is empty")]
    EmptyStack,
    #[error("exposure values must be strictly increasing")]
    UnorderedExposures,
    #[error("exposure tag count {tags} differs from image count {images}")]
    ExposureTagCount { tags: usize, images: usize },
    #[error("pixel region is empty")]
    EmptyRegion,
    #[error("luminance range is degenerate (max == min == {0})")]
    DegenerateRange(f64),
    #[error("all fusion weights vanish at pixel ({x}, {y})")]
    ZeroWeightSum { x: usize, y: usize },
    #[error("invalid pyramid level count {levels} for {width}x{height} (max {max})")]
    InvalidLevels {
        levels: usize,
        width: usize,
        height: usize,
        max: usize,
    },
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error("unsupported image format: {0}")]
    UnsupportedFormat(String),
    #[error("corrupt image file {path}: {reason}")]
    CorruptFile { path: PathBuf, reason: String },
    #[error("i/o failure on {}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("unknown scene `{0}`")]
    UnknownScene(String),
}
