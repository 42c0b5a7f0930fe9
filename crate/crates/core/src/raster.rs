//! Scalar image planes: generic `Raster` plus the `FluxImage` ground truth.

use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum ImageError {
    #[error("image dimensions must be at least 1x1 (got {width}x{height})")]
    EmptyDimensions { width: usize, height: usize },
    #[error("data length {len} does not match {width}x{height}")]
    DataLengthMismatch {
        len: usize,
        width: usize,
        height: usize,
    },
    #[error(
        "flux values must be finite and non-negative (offending value {value} at index {index})"
    )]
    InvalidFlux { value: f64, index: usize },
}

/// Row-major f64 image plane.
#[derive(Debug, Clone, PartialEq)]
pub struct Raster {
    width: usize,
    height: usize,
    data: Vec<f64>,
}

impl Raster {
    pub fn new(width: usize, height: usize, data: Vec<f64>) -> Result<Self, ImageError> {
        if width == 0 || height == 0 {
            return Err(ImageError::EmptyDimensions { width, height });
        }
        if data.len() != width * height {
            return Err(ImageError::DataLengthMismatch {
                len: data.len(),
                width,
                height,
            });
        }
        Ok(Self {
            width,
            height,
            data,
        })
    }

    pub fn filled(width: usize, height: usize, value: f64) -> Self {
        Self::new(width, height, vec![value; width * height]).expect("non-empty dimensions")
    }

    /// Build from a closure over (x, y).
    pub fn from_fn(width: usize, height: usize, mut f: impl FnMut(usize, usize) -> f64) -> Self {
        let mut data = Vec::with_capacity(width * height);
        for y in 0..height {
            for x in 0..width {
                data.push(f(x, y));
            }
        }
        Self::new(width, height, data).expect("non-empty dimensions")
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn same_dimensions(&self, other: &Raster) -> bool {
        self.width == other.width && self.height == other.height
    }

    #[inline]
    pub fn get(&self, x: usize, y: usize) -> f64 {
        self.data[y * self.width + x]
    }

    #[inline]
    pub fn set(&mut self, x: usize, y: usize, v: f64) {
        self.data[y * self.width + x] = v;
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [f64] {
        &mut self.data
    }

    pub fn mean(&self) -> f64 {
        self.data.iter().sum::<f64>() / self.data.len() as f64
    }

    pub fn min(&self) -> f64 {
        self.data.iter().copied().fold(f64::INFINITY, f64::min)
    }

    pub fn max(&self) -> f64 {
        self.data.iter().copied().fold(f64::NEG_INFINITY, f64::max)
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> Raster {
        Raster {
            width: self.width,
            height: self.height,
            data: self.data.iter().map(|&v| f(v)).collect(),
        }
    }
}

/// Per-pixel non-negative photon flux in photons per unit time, with the
/// sensor's photon detection probability folded in. Frame exposures are
/// H(x, y) = flux(x, y) * T.
#[derive(Debug, Clone, PartialEq)]
pub struct FluxImage {
    raster: Raster,
}

impl FluxImage {
    pub fn new(raster: Raster) -> Result<Self, ImageError> {
        for (index, &value) in raster.data().iter().enumerate() {
            if !value.is_finite() || value < 0.0 {
                return Err(ImageError::InvalidFlux { value, index });
            }
        }
        Ok(Self { raster })
    }

    pub fn from_fn(
        width: usize,
        height: usize,
        f: impl FnMut(usize, usize) -> f64,
    ) -> Result<Self, ImageError> {
        Self::new(Raster::from_fn(width, height, f))
    }

    pub fn uniform(width: usize, height: usize, flux: f64) -> Result<Self, ImageError> {
        Self::new(Raster::filled(width, height, flux))
    }

    pub fn width(&self) -> usize {
        self.raster.width()
    }

    pub fn height(&self) -> usize {
        self.raster.height()
    }

    pub fn pixels(&self) -> usize {
        self.raster.len()
    }

    #[inline]
    pub fn get(&self, x: usize, y: usize) -> f64 {
        self.raster.get(x, y)
    }

    pub fn raster(&self) -> &Raster {
        &self.raster
    }

    pub fn mean(&self) -> f64 {
        self.raster.mean()
    }

    /// Rescale so the mean flux equals `mean_ppp` photons per unit frame.
    pub fn scaled_to_mean(&self, mean_ppp: f64) -> Result<FluxImage, ImageError> {
        let m = self.mean();
        let scale = if m > 0.0 { mean_ppp / m } else { 0.0 };
        FluxImage::new(self.raster.map(|v| v * scale))
    }

    pub fn scaled(&self, factor: f64) -> Result<FluxImage, ImageError> {
        FluxImage::new(self.raster.map(|v| v * factor))
    }

    /// True binary rate image Y = 1 - e^{-flux * t_exp}.
    pub fn rate_image(&self, t_exp: f64) -> Raster {
        self.raster.map(|phi| -(-phi * t_exp).exp_m1())
    }
}
