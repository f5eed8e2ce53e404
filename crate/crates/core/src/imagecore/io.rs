use std::fs;
use std::io::Cursor;
use std::path::Path;

use png::{BitDepth, ColorType, Transformations};

use super::{BinaryMask, Image};
use crate::error::{Error, Result};
use crate::scalar::Scalar;

/// Raw 8-bit decode: `(width, height, channels, interleaved bytes)`.
///
/// Palette and sub-byte grayscale are expanded to 8 bits; alpha is dropped.
fn decode_png(path: &Path) -> Result<(usize, usize, usize, Vec<u8>)> {
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    let malformed = |reason: String| Error::MalformedPng {
        path: path.to_path_buf(),
        reason,
    };
    let mut decoder = png::Decoder::new(Cursor::new(bytes));
    decoder.set_transformations(Transformations::EXPAND);
    let mut reader = decoder.read_info().map_err(|e| malformed(e.to_string()))?;
    let (color, depth) = reader.output_color_type();
    if depth != BitDepth::Eight {
        return Err(Error::UnsupportedBitDepth {
            path: path.to_path_buf(),
            depth: depth as u8,
        });
    }
    let size = reader
        .output_buffer_size()
        .ok_or_else(|| malformed("image too large".into()))?;
    let mut buf = vec![0u8; size];
    let info = reader.next_frame(&mut buf).map_err(|e| malformed(e.to_string()))?;
    buf.truncate(info.buffer_size());
    let (w, h) = (info.width as usize, info.height as usize);
    let (stride, keep) = match color {
        ColorType::Grayscale => (1, 1),
        ColorType::GrayscaleAlpha => (2, 1),
        ColorType::Rgb => (3, 3),
        ColorType::Rgba => (4, 3),
        ColorType::Indexed => return Err(malformed("unexpanded palette".into())),
    };
    let line = info.line_size;
    let mut out = Vec::with_capacity(w * h * keep);
    for row in buf.chunks_exact(line).take(h) {
        for px in row[..w * stride].chunks_exact(stride) {
            out.extend_from_slice(&px[..keep]);
        }
    }
    Ok((w, h, keep, out))
}

/// Loads an 8-bit grayscale or RGB PNG, scaling samples to `[0, 1]`.
pub fn load_png<T: Scalar>(path: impl AsRef<Path>) -> Result<Image<T>> {
    let (w, h, channels, bytes) = decode_png(path.as_ref())?;
    let n = w * h;
    let scale = T::lit(255.0);
    let mut data = vec![T::zero(); n * channels];
    for (i, px) in bytes.chunks_exact(channels).enumerate() {
        for (ch, &b) in px.iter().enumerate() {
            data[ch * n + i] = T::lit(b as f64) / scale;
        }
    }
    Image::new(w, h, channels, data)
}

/// Loads a mask PNG; any non-zero sample (of the first channel) is foreground.
pub fn load_mask_png(path: impl AsRef<Path>) -> Result<BinaryMask> {
    let (w, h, channels, bytes) = decode_png(path.as_ref())?;
    BinaryMask::from_vec(w, h, bytes.chunks_exact(channels).map(|px| px[0] != 0).collect())
}

fn write_png(path: &Path, width: usize, height: usize, color: ColorType, data: &[u8]) -> Result<()> {
    if let Some(parent) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
        fs::create_dir_all(parent).map_err(|e| Error::io(parent, e))?;
    }
    let file = fs::File::create(path).map_err(|e| Error::io(path, e))?;
    let mut encoder = png::Encoder::new(std::io::BufWriter::new(file), width as u32, height as u32);
    encoder.set_color(color);
    encoder.set_depth(BitDepth::Eight);
    let mut writer = encoder.write_header()?;
    writer.write_image_data(data)?;
    writer.finish()?;
    Ok(())
}

/// Writes an 8-bit grayscale PNG with foreground 255 and background 0.
pub fn save_mask_png(mask: &BinaryMask, path: impl AsRef<Path>) -> Result<()> {
    let bytes: Vec<u8> = mask.data().iter().map(|&v| if v { 255 } else { 0 }).collect();
    write_png(path.as_ref(), mask.width(), mask.height(), ColorType::Grayscale, &bytes)
}

/// Writes raw 8-bit gray levels.
pub fn save_gray8_png(width: usize, height: usize, levels: &[u8], path: impl AsRef<Path>) -> Result<()> {
    write_png(path.as_ref(), width, height, ColorType::Grayscale, levels)
}

/// Writes interleaved 8-bit RGB.
pub fn save_rgb8_png(width: usize, height: usize, rgb: &[u8], path: impl AsRef<Path>) -> Result<()> {
    write_png(path.as_ref(), width, height, ColorType::Rgb, rgb)
}

pub(crate) fn to_byte<T: Scalar>(v: T) -> u8 {
    (v.as_f64() * 255.0).round().clamp(0.0, 255.0) as u8
}

/// Writes an image as 8-bit PNG, rounding `v * 255`.
pub fn save_image_png<T: Scalar>(img: &Image<T>, path: impl AsRef<Path>) -> Result<()> {
    let (w, h, n) = (img.width(), img.height(), img.width() * img.height());
    if img.channels() == 1 {
        let bytes: Vec<u8> = img.data().iter().map(|&v| to_byte(v)).collect();
        return save_gray8_png(w, h, &bytes, path);
    }
    let mut rgb = Vec::with_capacity(n * 3);
    for i in 0..n {
        for ch in 0..3 {
            rgb.push(to_byte(img.data()[ch * n + i]));
        }
    }
    save_rgb8_png(w, h, &rgb, path)
}
