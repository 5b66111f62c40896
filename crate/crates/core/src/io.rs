//! PPM (P6/P5) and PNG reading and writing, 8 or 16 bits per sample.

use std::fs;
use std::io::{BufWriter, Cursor, Write};
use std::path::{Path, PathBuf};

use crate::error::{Error, Result};
use crate::image::{LuminanceMap, RgbImage};
use crate::scalar::Real;

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct ReadOptions {
    /// Decode the sRGB transfer curve so that pixel data is linear-light.
    pub assume_srgb: bool,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum BitDepth {
    Eight,
    Sixteen,
}

impl BitDepth {
    fn max_code(self) -> f64 {
        match self {
            BitDepth::Eight => 255.0,
            BitDepth::Sixteen => 65535.0,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct WriteOptions {
    pub encode_srgb: bool,
    pub clamp: bool,
    pub bit_depth: BitDepth,
}

impl Default for WriteOptions {
    fn default() -> Self {
        Self {
            encode_srgb: false,
            clamp: true,
            bit_depth: BitDepth::Eight,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ImageFormat {
    Png,
    Ppm,
}

impl ImageFormat {
    /// Picks the format from a file extension.
    pub fn from_path(path: &Path) -> Result<Self> {
        let ext = path
            .extension()
            .and_then(|e| e.to_str())
            .map(str::to_ascii_lowercase)
            .unwrap_or_default();
        match ext.as_str() {
            "png" => Ok(ImageFormat::Png),
            "ppm" | "pnm" => Ok(ImageFormat::Ppm),
            _ => Err(Error::UnsupportedFormat(format!(
                "cannot infer format from `{}`",
                path.display()
            ))),
        }
    }

    pub fn extension(self) -> &'static str {
        match self {
            ImageFormat::Png => "png",
            ImageFormat::Ppm => "ppm",
        }
    }
}

/// Inverse sRGB transfer: encoded value in `[0,1]` to linear light.
pub fn srgb_to_linear(v: f64) -> f64 {
    if v <= 0.04045 {
        v / 12.92
    } else {
        ((v + 0.055) / 1.055).powf(2.4)
    }
}

/// Forward sRGB transfer: linear light to encoded value.
pub fn linear_to_srgb(v: f64) -> f64 {
    if v <= 0.003_130_8 {
        v * 12.92
    } else {
        1.055 * v.powf(1.0 / 2.4) - 0.055
    }
}

/// Applies the forward sRGB curve to every channel.
pub fn encode_srgb<T: Real>(image: &RgbImage<T>) -> RgbImage<T> {
    image.map(|p| p.map(|c| T::lit(linear_to_srgb(c.as_f64()).max(0.0))))
}

/// Applies the inverse sRGB curve to every channel.
pub fn decode_srgb<T: Real>(image: &RgbImage<T>) -> RgbImage<T> {
    image.map(|p| p.map(|c| T::lit(srgb_to_linear(c.as_f64()).max(0.0))))
}

/// Round-half-up quantization to an integer code.
#[inline]
pub fn quantize(v: f64, max_code: f64) -> u32 {
    let scaled = (v * max_code + 0.5).floor();
    scaled.clamp(0.0, max_code) as u32
}

struct Decoded {
    width: usize,
    height: usize,
    max_code: f64,
    channels: usize,
    samples: Vec<u32>,
}

pub fn read_image<T: Real>(path: impl AsRef<Path>, options: ReadOptions) -> Result<RgbImage<T>> {
    read_image_with_max_code(path, options).map(|(image, _)| image)
}

/// Like [`read_image`], also returning the largest storable code (255 or
/// 65535 for PNG, the header maxval for PPM).
pub fn read_image_with_max_code<T: Real>(
    path: impl AsRef<Path>,
    options: ReadOptions,
) -> Result<(RgbImage<T>, u32)> {
    let path = path.as_ref();
    let bytes = fs::read(path).map_err(|source| Error::Io {
        path: path.to_path_buf(),
        source,
    })?;
    decode_coded(&bytes, options).map_err(|e| match e {
        Error::CorruptFile { reason, .. } => Error::CorruptFile {
            path: path.to_path_buf(),
            reason,
        },
        other => other,
    })
}

/// Decodes an in-memory PNG or PPM file.
pub fn decode_bytes<T: Real>(bytes: &[u8], options: ReadOptions) -> Result<RgbImage<T>> {
    decode_coded(bytes, options).map(|(image, _)| image)
}

fn decode_coded<T: Real>(bytes: &[u8], options: ReadOptions) -> Result<(RgbImage<T>, u32)> {
    let decoded = if bytes.starts_with(b"\x89PNG") {
        decode_png(bytes)?
    } else if bytes.starts_with(b"P6") || bytes.starts_with(b"P5") {
        decode_pnm(bytes)?
    } else {
        return Err(Error::UnsupportedFormat(
            "expected a PNG or binary PPM/PGM file".into(),
        ));
    };

    let max = decoded.max_code;
    let lut_len = max as usize + 1;
    let lut: Vec<T> = (0..lut_len)
        .map(|code| {
            let v = code as f64 / max;
            T::lit(if options.assume_srgb {
                srgb_to_linear(v)
            } else {
                v
            })
        })
        .collect();

    let mut data = Vec::with_capacity(decoded.width * decoded.height);
    for px in decoded.samples.chunks_exact(decoded.channels) {
        let rgb = match decoded.channels {
            1 | 2 => [px[0]; 3],
            _ => [px[0], px[1], px[2]],
        };
        let mut out = [T::zero(); 3];
        for (o, code) in out.iter_mut().zip(rgb) {
            *o = *lut
                .get(code as usize)
                .ok_or_else(|| corrupt("sample exceeds maxval"))?;
        }
        data.push(out);
    }
    Ok((
        RgbImage::new(decoded.width, decoded.height, data)?,
        max as u32,
    ))
}

fn corrupt(reason: impl Into<String>) -> Error {
    Error::CorruptFile {
        path: PathBuf::new(),
        reason: reason.into(),
    }
}

fn decode_png(bytes: &[u8]) -> Result<Decoded> {
    let mut decoder = png::Decoder::new(Cursor::new(bytes));
    decoder.set_transformations(png::Transformations::EXPAND);
    let mut reader = decoder.read_info().map_err(|e| corrupt(e.to_string()))?;
    let size = reader
        .output_buffer_size()
        .ok_or_else(|| corrupt("image too large"))?;
    let mut buf = vec![0u8; size];
    let info = reader
        .next_frame(&mut buf)
        .map_err(|e| corrupt(e.to_string()))?;
    buf.truncate(info.buffer_size());

    let channels = match info.color_type {
        png::ColorType::Grayscale => 1,
        png::ColorType::GrayscaleAlpha => 2,
        png::ColorType::Rgb => 3,
        png::ColorType::Rgba => 4,
        png::ColorType::Indexed => {
            return Err(Error::UnsupportedFormat("unexpanded palette PNG".into()))
        }
    };
    let (samples, max_code) = match info.bit_depth {
        png::BitDepth::Eight => (buf.iter().map(|&b| u32::from(b)).collect(), 255.0),
        png::BitDepth::Sixteen => (
            buf.chunks_exact(2)
                .map(|c| u32::from(u16::from_be_bytes([c[0], c[1]])))
                .collect(),
            65535.0,
        ),
        other => return Err(Error::UnsupportedFormat(format!("PNG bit depth {other:?}"))),
    };
    Ok(Decoded {
        width: info.width as usize,
        height: info.height as usize,
        max_code,
        channels,
        samples,
    })
}

fn decode_pnm(bytes: &[u8]) -> Result<Decoded> {
    let channels = if bytes.starts_with(b"P6") { 3 } else { 1 };
    let mut pos = 2;
    let mut fields = [0usize; 3];
    for field in &mut fields {
        // skip whitespace and comments
        loop {
            match bytes.get(pos) {
                Some(b) if b.is_ascii_whitespace() => pos += 1,
                Some(b'#') => {
                    while bytes.get(pos).is_some_and(|b| *b != b'\n') {
                        pos += 1;
                    }
                }
                Some(_) => break,
                None => return Err(corrupt("truncated header")),
            }
        }
        let start = pos;
        while bytes.get(pos).is_some_and(u8::is_ascii_digit) {
            pos += 1;
        }
        *field = std::str::from_utf8(&bytes[start..pos])
            .ok()
            .and_then(|s| s.parse().ok())
            .ok_or_else(|| corrupt("malformed header field"))?;
    }
    if !bytes.get(pos).is_some_and(u8::is_ascii_whitespace) {
        return Err(corrupt("missing whitespace after maxval"));
    }
    pos += 1;

    let [width, height, maxval] = fields;
    if maxval == 0 || maxval > 65535 {
        return Err(corrupt(format!("maxval {maxval} out of range")));
    }
    let sample_bytes = if maxval < 256 { 1 } else { 2 };
    let count = width
        .checked_mul(height)
        .and_then(|n| n.checked_mul(channels))
        .ok_or_else(|| corrupt("dimensions overflow"))?;
    let body = &bytes[pos..];
    if body.len() < count * sample_bytes {
        return Err(corrupt("truncated pixel data"));
    }
    let samples = if sample_bytes == 1 {
        body[..count].iter().map(|&b| u32::from(b)).collect()
    } else {
        body[..count * 2]
            .chunks_exact(2)
            .map(|c| u32::from(u16::from_be_bytes([c[0], c[1]])))
            .collect()
    };
    Ok(Decoded {
        width,
        height,
        max_code: maxval as f64,
        channels,
        samples,
    })
}

pub fn write_image<T: Real>(
    image: &RgbImage<T>,
    path: impl AsRef<Path>,
    options: WriteOptions,
) -> Result<()> {
    let path = path.as_ref();
    let format = ImageFormat::from_path(path)?;
    let bytes = encode_bytes(image, format, options)?;
    fs::write(path, bytes).map_err(|source| Error::Io {
        path: path.to_path_buf(),
        source,
    })
}

/// Writes a luminance map as a gray image (no transfer curve).
pub fn write_luminance<T: Real>(
    lum: &LuminanceMap<T>,
    path: impl AsRef<Path>,
    bit_depth: BitDepth,
) -> Result<()> {
    write_image(
        &RgbImage::from_gray(lum),
        path,
        WriteOptions {
            encode_srgb: false,
            clamp: true,
            bit_depth,
        },
    )
}

/// Encodes to an in-memory PNG or PPM file.
pub fn encode_bytes<T: Real>(
    image: &RgbImage<T>,
    format: ImageFormat,
    options: WriteOptions,
) -> Result<Vec<u8>> {
    let max_code = options.bit_depth.max_code();
    let codes: Vec<u32> = image
        .pixels()
        .iter()
        .flatten()
        .map(|c| {
            let mut v = c.as_f64();
            if options.clamp {
                v = v.clamp(0.0, 1.0);
            }
            if options.encode_srgb {
                v = linear_to_srgb(v);
            }
            quantize(v, max_code)
        })
        .collect();
    let raw: Vec<u8> = match options.bit_depth {
        BitDepth::Eight => codes.iter().map(|&c| c as u8).collect(),
        BitDepth::Sixteen => codes
            .iter()
            .flat_map(|&c| (c as u16).to_be_bytes())
            .collect(),
    };

    let io_err = |source: std::io::Error| Error::Io {
        path: PathBuf::from("<memory>"),
        source,
    };
    let mut out = Vec::new();
    match format {
        ImageFormat::Ppm => {
            write!(
                out,
                "P6\n{} {}\n{}\n",
                image.width(),
                image.height(),
                max_code as u32
            )
            .map_err(io_err)?;
            out.extend_from_slice(&raw);
        }
        ImageFormat::Png => {
            let w = BufWriter::new(&mut out);
            let mut encoder = png::Encoder::new(w, image.width() as u32, image.height() as u32);
            encoder.set_color(png::ColorType::Rgb);
            encoder.set_depth(match options.bit_depth {
                BitDepth::Eight => png::BitDepth::Eight,
                BitDepth::Sixteen => png::BitDepth::Sixteen,
            });
            let to_io = |e: png::EncodingError| io_err(std::io::Error::other(e.to_string()));
            let mut writer = encoder.write_header().map_err(to_io)?;
            writer.write_image_data(&raw).map_err(to_io)?;
            writer.finish().map_err(to_io)?;
        }
    }
    Ok(out)
}
