//! Binary PGM (P5) input and output, 8- or 16-bit, with optional sRGB
//! linearization at load.

use crate::raster::Raster;
use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum PgmError {
    #[error("not a binary PGM (P5): {0}")]
    BadFormat(String),
    #[error("unsupported maxval {0} (expected 1..=65535)")]
    BadMaxval(u32),
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
}

/// Undo sRGB gamma compression; input and output in [0, 1].
pub fn srgb_to_linear(v: f64) -> f64 {
    if v <= 0.04045 {
        v / 12.92
    } else {
        ((v + 0.055) / 1.055).powf(2.4)
    }
}

/// Read a P5 PGM into a raster scaled to [0, 1]. When `gamma_decompress` is
/// set the stored values are treated as sRGB-encoded and linearized.
pub fn read_pgm(path: &Path, gamma_decompress: bool) -> Result<Raster, PgmError> {
    let mut reader = BufReader::new(File::open(path)?);
    let mut bytes = Vec::new();
    reader.read_to_end(&mut bytes)?;
    parse_pgm(&bytes, gamma_decompress)
}

fn parse_pgm(bytes: &[u8], gamma_decompress: bool) -> Result<Raster, PgmError> {
    let mut pos = 0usize;

    let mut token = |bytes: &[u8]| -> Result<String, PgmError> {
        // Skip whitespace and '#' comments between header tokens.
        loop {
            while pos < bytes.len() && bytes[pos].is_ascii_whitespace() {
                pos += 1;
            }
            if pos < bytes.len() && bytes[pos] == b'#' {
                while pos < bytes.len() && bytes[pos] != b'\n' {
                    pos += 1;
                }
            } else {
                break;
            }
        }
        let start = pos;
        while pos < bytes.len() && !bytes[pos].is_ascii_whitespace() {
            pos += 1;
        }
        if start == pos {
            return Err(PgmError::BadFormat("truncated header".into()));
        }
        Ok(String::from_utf8_lossy(&bytes[start..pos]).into_owned())
    };

    if token(bytes)? != "P5" {
        return Err(PgmError::BadFormat("missing P5 magic".into()));
    }
    let width: usize = token(bytes)?
        .parse()
        .map_err(|_| PgmError::BadFormat("bad width".into()))?;
    let height: usize = token(bytes)?
        .parse()
        .map_err(|_| PgmError::BadFormat("bad height".into()))?;
    let maxval: u32 = token(bytes)?
        .parse()
        .map_err(|_| PgmError::BadFormat("bad maxval".into()))?;
    if maxval == 0 || maxval > 65535 {
        return Err(PgmError::BadMaxval(maxval));
    }
    // Exactly one whitespace byte separates the header from the pixel data.
    pos += 1;

    let npix = width * height;
    let wide = maxval > 255;
    let needed = npix * if wide { 2 } else { 1 };
    if bytes.len() < pos + needed {
        return Err(PgmError::BadFormat("truncated pixel data".into()));
    }
    let scale = 1.0 / maxval as f64;
    let mut data = Vec::with_capacity(npix);
    if wide {
        for i in 0..npix {
            let hi = bytes[pos + 2 * i] as u16;
            let lo = bytes[pos + 2 * i + 1] as u16;
            data.push(((hi << 8) | lo) as f64 * scale);
        }
    } else {
        for i in 0..npix {
            data.push(bytes[pos + i] as f64 * scale);
        }
    }
    if gamma_decompress {
        for v in &mut data {
            *v = srgb_to_linear(*v);
        }
    }
    Raster::new(width, height, data).map_err(|e| PgmError::BadFormat(e.to_string()))
}

/// Write an 8-bit P5 PGM; values are clipped to [0, 1] and quantized to 255.
pub fn write_pgm8(path: &Path, image: &Raster) -> Result<(), PgmError> {
    let mut out = BufWriter::new(File::create(path)?);
    write!(out, "P5\n{} {}\n255\n", image.width(), image.height())?;
    for &v in image.data() {
        out.write_all(&[(v.clamp(0.0, 1.0) * 255.0).round() as u8])?;
    }
    out.flush()?;
    Ok(())
}

/// Write a 16-bit P5 PGM; values are clipped to [0, 1] and quantized to 65535.
pub fn write_pgm16(path: &Path, image: &Raster) -> Result<(), PgmError> {
    let mut out = BufWriter::new(File::create(path)?);
    write!(out, "P5\n{} {}\n65535\n", image.width(), image.height())?;
    for &v in image.data() {
        let q = (v.clamp(0.0, 1.0) * 65535.0).round() as u16;
        out.write_all(&q.to_be_bytes())?;
    }
    out.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parse_8bit_with_comment() {
        let mut bytes = b"P5\n# comment line\n3 2\n255\n".to_vec();
        bytes.extend_from_slice(&[0, 128, 255, 10, 20, 30]);
        let img = parse_pgm(&bytes, false).unwrap();
        assert_eq!(img.width(), 3);
        assert_eq!(img.height(), 2);
        assert!((img.get(2, 0) - 1.0).abs() < 1e-12);
        assert!((img.get(1, 0) - 128.0 / 255.0).abs() < 1e-12);
    }

    #[test]
    fn round_trip_16bit() {
        let img = Raster::from_fn(5, 4, |x, y| (x as f64 + y as f64 * 5.0) / 24.0);
        let dir = std::env::temp_dir().join(format!("pgm_test_{}", std::process::id()));
        std::fs::create_dir_all(&dir).unwrap();
        let path = dir.join("t.pgm");
        write_pgm16(&path, &img).unwrap();
        let back = read_pgm(&path, false).unwrap();
        for (a, b) in img.data().iter().zip(back.data()) {
            assert!((a - b).abs() < 1.0 / 65535.0);
        }
        std::fs::remove_dir_all(&dir).unwrap();
    }

    #[test]
    fn srgb_linearization_endpoints() {
        assert_eq!(srgb_to_linear(0.0), 0.0);
        assert!((srgb_to_linear(1.0) - 1.0).abs() < 1e-12);
        // Mid gray 0.5 maps to ~0.214 in linear light.
        assert!((srgb_to_linear(0.5) - 0.2140).abs() < 5e-4);
    }

    #[test]
    fn rejects_garbage() {
        assert!(parse_pgm(b"P6\n1 1\n255\n\x00", false).is_err());
        assert!(parse_pgm(b"P5\n2 2\n255\n\x00", false).is_err());
    }
}
