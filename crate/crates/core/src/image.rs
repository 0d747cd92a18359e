//! 8-bit grayscale rasters and bilinear resampling.

use alloc::vec;
use alloc::vec::Vec;

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum ImageError {
    #[error("image dimensions must be at least 1x1, got {width}x{height}")]
    EmptyDimensions { width: usize, height: usize },
    #[error("pixel buffer holds {actual} bytes, expected {expected}")]
    LengthMismatch { expected: usize, actual: usize },
}

/// Row-major 8-bit grayscale image.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct GrayImage {
    width: usize,
    height: usize,
    data: Vec<u8>,
}

impl GrayImage {
    pub fn new(width: usize, height: usize, data: Vec<u8>) -> Result<Self, ImageError> {
        if width == 0 || height == 0 {
            return Err(ImageError::EmptyDimensions { width, height });
        }
        let expected = width * height;
        if data.len() != expected {
            return Err(ImageError::LengthMismatch {
                expected,
                actual: data.len(),
            });
        }
        Ok(Self {
            width,
            height,
            data,
        })
    }

    pub fn filled(width: usize, height: usize, value: u8) -> Result<Self, ImageError> {
        Self::new(width, height, vec![value; width * height])
    }

    /// Builds an image by evaluating `f(x, y)` for every pixel.
    pub fn from_fn(
        width: usize,
        height: usize,
        mut f: impl FnMut(usize, usize) -> u8,
    ) -> Result<Self, ImageError> {
        let mut data = Vec::with_capacity(width * height);
        for y in 0..height {
            for x in 0..width {
                data.push(f(x, y));
            }
        }
        Self::new(width, height, data)
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn dimensions(&self) -> (usize, usize) {
        (self.width, self.height)
    }

    pub fn pixel_count(&self) -> usize {
        self.data.len()
    }

    #[inline]
    pub fn get(&self, x: usize, y: usize) -> u8 {
        self.data[y * self.width + x]
    }

    #[inline]
    pub fn set(&mut self, x: usize, y: usize, value: u8) {
        self.data[y * self.width + x] = value;
    }

    pub fn as_bytes(&self) -> &[u8] {
        &self.data
    }

    pub fn into_bytes(self) -> Vec<u8> {
        self.data
    }

    pub fn row(&self, y: usize) -> &[u8] {
        &self.data[y * self.width..(y + 1) * self.width]
    }

    /// Copies the `w`x`h` window whose top-left corner is `(x, y)`.
    ///
    /// Panics if the window leaves the image; callers clamp first.
    pub fn crop(&self, x: usize, y: usize, w: usize, h: usize) -> GrayImage {
        assert!(w > 0 && h > 0 && x + w <= self.width && y + h <= self.height);
        let mut data = Vec::with_capacity(w * h);
        for row in y..y + h {
            let start = row * self.width + x;
            data.extend_from_slice(&self.data[start..start + w]);
        }
        GrayImage {
            width: w,
            height: h,
            data,
        }
    }

    /// Bilinear resampling with pixel-centre alignment.
    ///
    /// Source coordinates are `(dst + 0.5) * src/dst - 0.5`, clamped to the
    /// image, so resizing to the same dimensions reproduces the input exactly.
    pub fn resize_bilinear(&self, width: usize, height: usize) -> Result<GrayImage, ImageError> {
        if width == 0 || height == 0 {
            return Err(ImageError::EmptyDimensions { width, height });
        }
        if (width, height) == (self.width, self.height) {
            return Ok(self.clone());
        }
        let xs = axis_taps(self.width, width);
        let ys = axis_taps(self.height, height);
        let mut data = Vec::with_capacity(width * height);
        for &(y0, y1, fy) in &ys {
            let top = self.row(y0);
            let bottom = self.row(y1);
            for &(x0, x1, fx) in &xs {
                let t = f64::from(top[x0]) * (1.0 - fx) + f64::from(top[x1]) * fx;
                let b = f64::from(bottom[x0]) * (1.0 - fx) + f64::from(bottom[x1]) * fx;
                data.push(round_to_u8(t * (1.0 - fy) + b * fy));
            }
        }
        Ok(GrayImage {
            width,
            height,
            data,
        })
    }
}

/// Per destination index: the two source taps and the weight of the second.
fn axis_taps(src: usize, dst: usize) -> Vec<(usize, usize, f64)> {
    let scale = src as f64 / dst as f64;
    let last = (src - 1) as f64;
    (0..dst)
        .map(|d| {
            let s = ((d as f64 + 0.5) * scale - 0.5).clamp(0.0, last);
            // s >= 0, so truncation is floor.
            let i0 = s as usize;
            let i1 = (i0 + 1).min(src - 1);
            (i0, i1, s - i0 as f64)
        })
        .collect()
}

#[inline]
pub(crate) fn round_to_u8(v: f64) -> u8 {
    let r = v + 0.5;
    if r <= 0.0 {
        0
    } else if r >= 255.0 {
        255
    } else {
        r as u8
    }
}
