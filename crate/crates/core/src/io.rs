//! Field serialization: a lossless raw `f64` format for chaining runs, and
//! 8/16-bit grayscale images for viewing and for natural-image input.
//!
//! Raw layout: 8-byte magic, `u32` LE width, `u32` LE height, then
//! `width·height` little-endian `f64` samples in row-major order.

use std::fs;
use std::path::Path;

use image::{DynamicImage, ImageBuffer, Luma};

use crate::error::{Error, Result};
use crate::field::Field;

pub const RAW_MAGIC: &[u8; 8] = b"TXSPF64\0";
const HEADER_LEN: usize = 16;

pub fn encode_raw(f: &Field) -> Vec<u8> {
    let mut out = Vec::with_capacity(HEADER_LEN + 8 * f.len());
    out.extend_from_slice(RAW_MAGIC);
    out.extend_from_slice(&(f.width() as u32).to_le_bytes());
    out.extend_from_slice(&(f.height() as u32).to_le_bytes());
    for v in f.as_slice() {
        out.extend_from_slice(&v.to_le_bytes());
    }
    out
}

pub fn decode_raw(bytes: &[u8]) -> Result<Field> {
    if bytes.len() < HEADER_LEN || &bytes[..8] != RAW_MAGIC {
        return Err(Error::Format("missing raw field header".into()));
    }
    let word = |at: usize| u32::from_le_bytes(bytes[at..at + 4].try_into().unwrap()) as usize;
    let (width, height) = (word(8), word(12));
    let body = &bytes[HEADER_LEN..];
    if body.len() != 8 * width * height {
        return Err(Error::Format(format!(
            "{width}x{height} field needs {} payload bytes, found {}",
            8 * width * height,
            body.len()
        )));
    }
    let data = body
        .chunks_exact(8)
        .map(|c| f64::from_le_bytes(c.try_into().unwrap()))
        .collect();
    Field::new(width, height, data)
}

pub fn write_raw(path: &Path, f: &Field) -> Result<()> {
    fs::write(path, encode_raw(f))?;
    Ok(())
}

pub fn read_raw(path: &Path) -> Result<Field> {
    decode_raw(&fs::read(path)?)
}

/// Reads a grayscale PGM or PNG. 8-bit samples map to `[0, 255]`, 16-bit
/// samples are divided by 257 so both depths share that range.
pub fn read_image(path: &Path) -> Result<Field> {
    let img = image::open(path)?;
    let (width, height) = (img.width() as usize, img.height() as usize);
    let data = match img {
        DynamicImage::ImageLuma16(buf) => buf
            .into_raw()
            .into_iter()
            .map(|v| v as f64 / 257.0)
            .collect(),
        other => other
            .into_luma8()
            .into_raw()
            .into_iter()
            .map(f64::from)
            .collect(),
    };
    Field::new(width, height, data)
}

/// Reads a raw field if the file carries the raw magic, otherwise an image.
pub fn read_field(path: &Path) -> Result<Field> {
    let bytes = fs::read(path)?;
    if bytes.starts_with(RAW_MAGIC) {
        decode_raw(&bytes)
    } else {
        read_image(path)
    }
}

/// Quantizes with the affine map `[lo, hi] → [0, 65535]`, clamping outside.
/// A degenerate interval maps everything to 0.
pub fn quantize16(f: &Field, lo: f64, hi: f64) -> Vec<u16> {
    let span = hi - lo;
    f.as_slice()
        .iter()
        .map(|&v| {
            if span > 0.0 {
                ((v - lo) / span * 65535.0).round().clamp(0.0, 65535.0) as u16
            } else {
                0
            }
        })
        .collect()
}

/// 16-bit binary PGM (P5, big-endian samples) with `[lo, hi] → [0, 65535]`.
pub fn write_pgm16(path: &Path, f: &Field, lo: f64, hi: f64) -> Result<()> {
    let mut out = format!("P5\n{} {}\n65535\n", f.width(), f.height()).into_bytes();
    for v in quantize16(f, lo, hi) {
        out.extend_from_slice(&v.to_be_bytes());
    }
    fs::write(path, out)?;
    Ok(())
}

/// Display export over the field's own `[min, max]`; returns the interval used.
pub fn write_pgm16_normalized(path: &Path, f: &Field) -> Result<(f64, f64)> {
    let (lo, hi) = (f.min(), f.max());
    write_pgm16(path, f, lo, hi)?;
    Ok((lo, hi))
}

/// 16-bit grayscale PNG with `[lo, hi] → [0, 65535]`.
pub fn write_png16(path: &Path, f: &Field, lo: f64, hi: f64) -> Result<()> {
    let buf: ImageBuffer<Luma<u16>, Vec<u16>> =
        ImageBuffer::from_raw(f.width() as u32, f.height() as u32, quantize16(f, lo, hi))
            .ok_or_else(|| Error::Format("image buffer size mismatch".into()))?;
    buf.save(path)?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn raw_roundtrip_is_bit_exact() {
        let f = Field::from_torus_fn(8, 4, |x, y| (x * 1.7).sin() / (1.0 + y)).unwrap();
        let g = decode_raw(&encode_raw(&f)).unwrap();
        assert_eq!(f, g);
        assert!(decode_raw(&encode_raw(&f)[..20]).is_err());
        assert!(decode_raw(b"not a field at all").is_err());
    }

    #[test]
    fn pgm_roundtrip_through_image_reader() {
        let dir = std::env::temp_dir().join(format!("texsep-io-{}", std::process::id()));
        fs::create_dir_all(&dir).unwrap();
        let f = Field::new(4, 2, vec![0.0, 1.0, 2.0, 3.0, 4.0, 5.0, 6.0, 255.0]).unwrap();
        let pgm = dir.join("a.pgm");
        write_pgm16(&pgm, &f, 0.0, 255.0).unwrap();
        let back = read_field(&pgm).unwrap();
        assert!(back.max_abs_diff(&f) < 1e-9);
        let png = dir.join("a.png");
        write_png16(&png, &f, 0.0, 255.0).unwrap();
        assert!(read_field(&png).unwrap().max_abs_diff(&f) < 1e-9);
        let raw = dir.join("a.raw");
        write_raw(&raw, &f).unwrap();
        assert_eq!(read_field(&raw).unwrap(), f);
        fs::remove_dir_all(&dir).unwrap();
    }

    #[test]
    fn quantization_clamps() {
        let f = Field::new(2, 2, vec![-1.0, 0.0, 0.5, 2.0]).unwrap();
        assert_eq!(quantize16(&f, 0.0, 1.0), vec![0, 0, 32768, 65535]);
        assert_eq!(quantize16(&f, 1.0, 1.0), vec![0; 4]);
    }
}
