//! Landmark boxes, the eyes+nose union and region-of-interest extraction.

use core::fmt;

use crate::image::{GrayImage, ImageError};

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum GeometryError {
    #[error("box must have positive width and height")]
    Degenerate,
    #[error("both eyes are needed, found {found}")]
    InsufficientLandmarks { found: usize },
    #[error("box {0} lies entirely outside the image")]
    EmptyRoi(Rect),
    #[error(transparent)]
    Image(#[from] ImageError),
}

/// Axis-aligned box anchored at its top-left corner.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Rect {
    pub x: i32,
    pub y: i32,
    pub w: u32,
    pub h: u32,
}

impl Rect {
    pub fn new(x: i32, y: i32, w: u32, h: u32) -> Result<Self, GeometryError> {
        if w == 0 || h == 0 {
            return Err(GeometryError::Degenerate);
        }
        Ok(Self { x, y, w, h })
    }

    pub fn right(&self) -> i64 {
        i64::from(self.x) + i64::from(self.w)
    }

    pub fn bottom(&self) -> i64 {
        i64::from(self.y) + i64::from(self.h)
    }

    pub fn area(&self) -> u64 {
        u64::from(self.w) * u64::from(self.h)
    }

    pub fn contains(&self, other: &Rect) -> bool {
        other.x >= self.x
            && other.y >= self.y
            && other.right() <= self.right()
            && other.bottom() <= self.bottom()
    }

    /// Intersection with a `width`x`height` image, if any pixels remain.
    pub fn clamp_to(&self, width: usize, height: usize) -> Option<Rect> {
        let x0 = i64::from(self.x).max(0);
        let y0 = i64::from(self.y).max(0);
        let x1 = self.right().min(width as i64);
        let y1 = self.bottom().min(height as i64);
        (x1 > x0 && y1 > y0).then(|| Rect {
            x: x0 as i32,
            y: y0 as i32,
            w: (x1 - x0) as u32,
            h: (y1 - y0) as u32,
        })
    }
}

impl fmt::Display for Rect {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({},{},{},{})", self.x, self.y, self.w, self.h)
    }
}

/// Bounding box of both eyes and, when detected, the nose.
///
/// The near edges are the minima of the present boxes' `x` and `y`, the far
/// edges the maxima of their right and bottom edges. With no nose only the
/// two eyes take part.
pub fn union_eyes_nose(eye1: &Rect, eye2: &Rect, nose: Option<&Rect>) -> Rect {
    let mut left = i64::from(eye1.x.min(eye2.x));
    let mut top = i64::from(eye1.y.min(eye2.y));
    let mut right = eye1.right().max(eye2.right());
    let mut bottom = eye1.bottom().max(eye2.bottom());
    if let Some(n) = nose {
        left = left.min(i64::from(n.x));
        top = top.min(i64::from(n.y));
        right = right.max(n.right());
        bottom = bottom.max(n.bottom());
    }
    Rect {
        x: left as i32,
        y: top as i32,
        w: (right - left) as u32,
        h: (bottom - top) as u32,
    }
}

/// Crops `region` (clamped to the image) and resizes it to `target`.
pub fn extract_roi(
    img: &GrayImage,
    region: &Rect,
    target: (usize, usize),
) -> Result<GrayImage, GeometryError> {
    let clamped = clamp_region(img, region)?;
    let crop = img.crop(
        clamped.x as usize,
        clamped.y as usize,
        clamped.w as usize,
        clamped.h as usize,
    );
    Ok(crop.resize_bilinear(target.0, target.1)?)
}

pub(crate) fn clamp_region(img: &GrayImage, region: &Rect) -> Result<Rect, GeometryError> {
    region
        .clamp_to(img.width(), img.height())
        .ok_or(GeometryError::EmptyRoi(*region))
}
