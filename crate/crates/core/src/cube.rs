//! Binary photon cubes and the PCUB on-disk container.
//!
//! The cube pairs the detection tensor F(x, y, t) with the co-indexed
//! inhibition mask M(x, y, t). The convention throughout this crate is
//! M = 1 for an enabled pixel; sources that count disabled pixels as 1 are
//! translated at ingestion.
//!
//! On disk a cube is two sibling streams: `<base>.pcub` holds the frames and
//! `<base>.mask.pcub` the mask. Each stream is a 16-byte header (magic
//! `PCUB`, u16 width, u16 height, u32 frame count, u32 flags; little-endian,
//! flag bit 0 marks a mask stream) followed by the frames as row-major
//! bit-packed bytes, LSB-first, ceil(width*height/8) bytes per frame.

use crate::bitmap::Bitmap;
use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::{Path, PathBuf};
use thiserror::Error;

const MAGIC: [u8; 4] = *b"PCUB";
const FLAG_MASK_STREAM: u32 = 1;

#[derive(Debug, Error)]
pub enum CubeError {
    #[error("frame dimensions {got_w}x{got_h} do not match cube {want_w}x{want_h}")]
    DimensionMismatch {
        got_w: usize,
        got_h: usize,
        want_w: usize,
        want_h: usize,
    },
    #[error("detection on a disabled pixel at frame {frame}")]
    DetectionOnDisabledPixel { frame: usize },
    #[error("frame and mask streams disagree: {0}")]
    StreamMismatch(String),
    #[error("not a PCUB stream: {0}")]
    BadFormat(String),
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
}

/// Binary detection tensor plus its inhibition mask, frame-major.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PhotonCube {
    width: usize,
    height: usize,
    frames: Vec<Bitmap>,
    masks: Vec<Bitmap>,
}

impl PhotonCube {
    pub fn new(width: usize, height: usize) -> Self {
        Self {
            width,
            height,
            frames: Vec::new(),
            masks: Vec::new(),
        }
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn num_frames(&self) -> usize {
        self.frames.len()
    }

    /// Append one frame and its mask. Enforces F <= M pointwise: a disabled
    /// pixel cannot detect.
    pub fn push(&mut self, frame: Bitmap, mask: Bitmap) -> Result<(), CubeError> {
        for b in [&frame, &mask] {
            if b.width() != self.width || b.height() != self.height {
                return Err(CubeError::DimensionMismatch {
                    got_w: b.width(),
                    got_h: b.height(),
                    want_w: self.width,
                    want_h: self.height,
                });
            }
        }
        if !frame.subset_of(&mask) {
            return Err(CubeError::DetectionOnDisabledPixel {
                frame: self.frames.len(),
            });
        }
        self.frames.push(frame);
        self.masks.push(mask);
        Ok(())
    }

    pub fn frame(&self, t: usize) -> &Bitmap {
        &self.frames[t]
    }

    pub fn mask(&self, t: usize) -> &Bitmap {
        &self.masks[t]
    }

    pub fn frames(&self) -> &[Bitmap] {
        &self.frames
    }

    pub fn masks(&self) -> &[Bitmap] {
        &self.masks
    }

    pub fn total_detections(&self) -> u64 {
        self.frames.iter().map(Bitmap::count_ones).sum()
    }

    pub fn total_measurements(&self) -> u64 {
        self.masks.iter().map(Bitmap::count_ones).sum()
    }

    fn mask_path(base: &Path) -> PathBuf {
        let stem = base.with_extension("");
        let mut name = stem.file_name().map(|s| s.to_owned()).unwrap_or_default();
        name.push(".mask.pcub");
        stem.with_file_name(name)
    }

    /// Write `<base>.pcub` and `<base>.mask.pcub`.
    pub fn save(&self, base: &Path) -> Result<(), CubeError> {
        let frame_path = base.with_extension("pcub");
        write_stream(&frame_path, self.width, self.height, &self.frames, 0)?;
        write_stream(
            &Self::mask_path(base),
            self.width,
            self.height,
            &self.masks,
            FLAG_MASK_STREAM,
        )?;
        Ok(())
    }

    pub fn load(base: &Path) -> Result<Self, CubeError> {
        let (w, h, frames, flags) = read_stream(&base.with_extension("pcub"))?;
        if flags & FLAG_MASK_STREAM != 0 {
            return Err(CubeError::BadFormat(
                "frame stream carries the mask flag".into(),
            ));
        }
        let (mw, mh, masks, mflags) = read_stream(&Self::mask_path(base))?;
        if mflags & FLAG_MASK_STREAM == 0 {
            return Err(CubeError::BadFormat(
                "mask stream missing the mask flag".into(),
            ));
        }
        if (w, h) != (mw, mh) || frames.len() != masks.len() {
            return Err(CubeError::StreamMismatch(format!(
                "frames {w}x{h}x{} vs mask {mw}x{mh}x{}",
                frames.len(),
                masks.len()
            )));
        }
        let mut cube = PhotonCube::new(w, h);
        for (f, m) in frames.into_iter().zip(masks) {
            cube.push(f, m)?;
        }
        Ok(cube)
    }
}

fn write_stream(
    path: &Path,
    width: usize,
    height: usize,
    frames: &[Bitmap],
    flags: u32,
) -> Result<(), CubeError> {
    let mut out = BufWriter::new(File::create(path)?);
    out.write_all(&MAGIC)?;
    out.write_all(&(width as u16).to_le_bytes())?;
    out.write_all(&(height as u16).to_le_bytes())?;
    out.write_all(&(frames.len() as u32).to_le_bytes())?;
    out.write_all(&flags.to_le_bytes())?;
    for f in frames {
        out.write_all(&f.to_packed_bytes())?;
    }
    out.flush()?;
    Ok(())
}

fn read_stream(path: &Path) -> Result<(usize, usize, Vec<Bitmap>, u32), CubeError> {
    let mut input = BufReader::new(File::open(path)?);
    let mut header = [0u8; 16];
    input.read_exact(&mut header)?;
    if header[0..4] != MAGIC {
        return Err(CubeError::BadFormat(format!(
            "bad magic in {}",
            path.display()
        )));
    }
    let width = u16::from_le_bytes([header[4], header[5]]) as usize;
    let height = u16::from_le_bytes([header[6], header[7]]) as usize;
    let count = u32::from_le_bytes([header[8], header[9], header[10], header[11]]) as usize;
    let flags = u32::from_le_bytes([header[12], header[13], header[14], header[15]]);
    if width == 0 || height == 0 {
        return Err(CubeError::BadFormat("zero dimensions".into()));
    }
    let frame_bytes = (width * height).div_ceil(8);
    let mut frames = Vec::with_capacity(count);
    let mut buf = vec![0u8; frame_bytes];
    for _ in 0..count {
        input.read_exact(&mut buf)?;
        frames.push(
            Bitmap::from_packed_bytes(width, height, &buf)
                .ok_or_else(|| CubeError::BadFormat("truncated frame".into()))?,
        );
    }
    Ok((width, height, frames, flags))
}
