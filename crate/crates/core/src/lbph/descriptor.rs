use alloc::vec;
use alloc::vec::Vec;

use super::LbphError;
use crate::image::GrayImage;

/// Number of histogram bins per cell: one per 8-bit code.
pub const BINS: usize = 256;

/// Descriptor parameters. Radius, neighbour count and bin count are fixed at
/// 1, 8 and 256; only the grid is configurable.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct LbpParams {
    pub grid_x: usize,
    pub grid_y: usize,
}

impl LbpParams {
    pub const RADIUS: usize = 1;
    pub const NEIGHBORS: usize = 8;
    pub const BINS: usize = BINS;

    pub fn new(grid_x: usize, grid_y: usize) -> Result<Self, LbphError> {
        if grid_x == 0 || grid_y == 0 {
            return Err(LbphError::InvalidInput("grid must be at least 1x1"));
        }
        Ok(Self { grid_x, grid_y })
    }

    pub fn feature_len(&self) -> usize {
        self.grid_x * self.grid_y * BINS
    }

    /// Checks that faces normalised to `width`x`height` give cells at least
    /// 3 pixels on a side.
    pub fn check_input_size(&self, width: usize, height: usize) -> Result<(), LbphError> {
        if width / self.grid_x < 3 || height / self.grid_y < 3 {
            return Err(LbphError::InvalidInput(
                "input size too small for grid: cells must be at least 3x3",
            ));
        }
        Ok(())
    }
}

impl Default for LbpParams {
    fn default() -> Self {
        Self {
            grid_x: 8,
            grid_y: 8,
        }
    }
}

/// Concatenated per-cell code histograms, each cell L1-normalised.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureVector(Vec<f64>);

impl FeatureVector {
    pub fn from_values(values: Vec<f64>) -> Self {
        Self(values)
    }

    pub fn values(&self) -> &[f64] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn into_values(self) -> Vec<f64> {
        self.0
    }
}

// Ring order: top-left then clockwise. Bit k is set when neighbour k >= centre.
const RING: [(isize, isize); 8] = [
    (-1, -1),
    (0, -1),
    (1, -1),
    (1, 0),
    (1, 1),
    (0, 1),
    (-1, 1),
    (-1, 0),
];

/// Replaces every interior pixel by its LBP code; the one-pixel border is 0.
pub fn lbp_code_image(img: &GrayImage) -> Result<GrayImage, LbphError> {
    let (w, h) = img.dimensions();
    if w < 3 || h < 3 {
        return Err(LbphError::InvalidInput(
            "LBP needs an image of at least 3x3",
        ));
    }
    let src = img.as_bytes();
    let mut codes = vec![0u8; w * h];
    for y in 1..h - 1 {
        let up = &src[(y - 1) * w..y * w];
        let mid = &src[y * w..(y + 1) * w];
        let down = &src[(y + 1) * w..(y + 2) * w];
        let out = &mut codes[y * w..(y + 1) * w];
        for x in 1..w - 1 {
            let c = mid[x];
            let ring = [
                up[x - 1],
                up[x],
                up[x + 1],
                mid[x + 1],
                down[x + 1],
                down[x],
                down[x - 1],
                mid[x - 1],
            ];
            let mut code = 0u8;
            for (k, &n) in ring.iter().enumerate() {
                code |= u8::from(n >= c) << k;
            }
            out[x] = code;
        }
    }
    debug_assert_eq!(RING.len(), LbpParams::NEIGHBORS);
    Ok(GrayImage::new(w, h, codes)?)
}

/// Histograms the codes over a `grid_x` by `grid_y` grid of equal cells.
///
/// Cells are `floor(w / grid_x)` by `floor(h / grid_y)`; remainder columns on
/// the right and rows at the bottom are ignored.
pub fn grid_histogram(codes: &GrayImage, params: &LbpParams) -> Result<FeatureVector, LbphError> {
    let (w, h) = codes.dimensions();
    let cell_w = w / params.grid_x;
    let cell_h = h / params.grid_y;
    if cell_w == 0 || cell_h == 0 {
        return Err(LbphError::EmptyCell {
            width: w,
            height: h,
            grid_x: params.grid_x,
            grid_y: params.grid_y,
        });
    }
    let mut counts = vec![0u32; params.feature_len()];
    for y in 0..cell_h * params.grid_y {
        let cy = y / cell_h;
        let row = codes.row(y);
        for cx in 0..params.grid_x {
            let base = (cy * params.grid_x + cx) * BINS;
            let block = &mut counts[base..base + BINS];
            for &code in &row[cx * cell_w..(cx + 1) * cell_w] {
                block[code as usize] += 1;
            }
        }
    }
    let norm = 1.0 / (cell_w * cell_h) as f64;
    Ok(FeatureVector(
        counts.into_iter().map(|c| f64::from(c) * norm).collect(),
    ))
}

/// Symmetric chi-square distance `sum (a-b)^2 / (a+b)`, with empty bins
/// contributing nothing.
pub fn chi_square(a: &FeatureVector, b: &FeatureVector) -> Result<f64, LbphError> {
    if a.len() != b.len() {
        return Err(LbphError::LengthMismatch {
            left: a.len(),
            right: b.len(),
        });
    }
    Ok(chi_square_bounded(&a.0, &b.0, f64::INFINITY))
}

/// Accumulates the distance but gives up once the partial sum reaches
/// `bound`. Terms are non-negative, so an abandoned sum can never end below
/// `bound`; a completed sum is bit-identical to the unbounded one.
#[inline]
pub(crate) fn chi_square_bounded(a: &[f64], b: &[f64], bound: f64) -> f64 {
    let mut sum = 0.0;
    for (ca, cb) in a.chunks(BINS).zip(b.chunks(BINS)) {
        for (&x, &y) in ca.iter().zip(cb) {
            let s = x + y;
            if s > 0.0 {
                let d = x - y;
                sum += d * d / s;
            }
        }
        if sum >= bound {
            return sum;
        }
    }
    sum
}
