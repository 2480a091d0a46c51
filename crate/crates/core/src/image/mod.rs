//! Raster types and the shared image operations every pipeline stage uses.
//!
//! [`GrayImage`] doubles as the general real-valued matrix of the crate: the
//! correlation maps, transform coefficients and vector-field components are
//! all stored in it. "Integer-mode" images hold whole values in `[0, 255]`.

mod canny;
mod draw;
mod fft;
mod filter;
mod label;
mod morph;
pub mod pgm;

pub use canny::{canny, CannyParams};
pub(crate) use canny::gradient;
pub use draw::{draw_ellipse, draw_polyline, ellipse_points, fill_polygon, point_in_polygon};
pub use fft::{conv2, fft2p, ifft2p, next_smooth_size, Spectrum};
pub use filter::{
    gaussian_kernel, gaussian_smooth, histogram_equalize, lsum2, median_filter, resize,
    resize_fourier, resize_to, warp_similarity,
};
pub use label::{fill_holes, label_regions, largest_region};
pub use morph::{dilate, dilate_binary, erode, erode_binary, morph_close, StructuringElement};

use crate::error::{Error, Result};

/// Round half away from zero, the single rounding convention used for
/// integer-producing operations.
#[inline]
pub fn round_half_away(v: f64) -> f64 {
    v.round()
}

/// Row-major real raster.
#[derive(Clone, Debug, PartialEq)]
pub struct GrayImage {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl GrayImage {
    pub fn new(rows: usize, cols: usize) -> Self {
        Self::filled(rows, cols, 0.0)
    }

    pub fn filled(rows: usize, cols: usize, value: f64) -> Self {
        assert!(rows >= 1 && cols >= 1, "image must be at least 1x1");
        Self {
            rows,
            cols,
            data: vec![value; rows * cols],
        }
    }

    pub fn from_vec(rows: usize, cols: usize, data: Vec<f64>) -> Result<Self> {
        if rows == 0 || cols == 0 {
            return Err(Error::EmptyInput(format!("{rows}x{cols} image")));
        }
        if data.len() != rows * cols {
            return Err(Error::dims(rows * cols, data.len()));
        }
        Ok(Self { rows, cols, data })
    }

    /// Build an image by evaluating `f(row, col)` at every pixel.
    pub fn from_fn(rows: usize, cols: usize, mut f: impl FnMut(usize, usize) -> f64) -> Self {
        assert!(rows >= 1 && cols >= 1, "image must be at least 1x1");
        let mut data = Vec::with_capacity(rows * cols);
        for r in 0..rows {
            for c in 0..cols {
                data.push(f(r, c));
            }
        }
        Self { rows, cols, data }
    }

    #[inline]
    pub fn rows(&self) -> usize {
        self.rows
    }

    #[inline]
    pub fn cols(&self) -> usize {
        self.cols
    }

    #[inline]
    pub fn dims(&self) -> (usize, usize) {
        (self.rows, self.cols)
    }

    #[inline]
    pub fn len(&self) -> usize {
        self.data.len()
    }

    #[inline]
    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    #[inline]
    pub fn get(&self, r: usize, c: usize) -> f64 {
        self.data[r * self.cols + c]
    }

    #[inline]
    pub fn set(&mut self, r: usize, c: usize, v: f64) {
        self.data[r * self.cols + c] = v;
    }

    /// Pixel access with edge replication for out-of-range coordinates.
    #[inline]
    pub fn get_clamped(&self, r: isize, c: isize) -> f64 {
        let r = r.clamp(0, self.rows as isize - 1) as usize;
        let c = c.clamp(0, self.cols as isize - 1) as usize;
        self.data[r * self.cols + c]
    }

    /// Bilinear sample at real coordinates `(x = column, y = row)`, clamped to
    /// the image bounds.
    pub fn sample_bilinear(&self, x: f64, y: f64) -> f64 {
        let x = x.clamp(0.0, (self.cols - 1) as f64);
        let y = y.clamp(0.0, (self.rows - 1) as f64);
        let x0 = x.floor() as usize;
        let y0 = y.floor() as usize;
        let x1 = (x0 + 1).min(self.cols - 1);
        let y1 = (y0 + 1).min(self.rows - 1);
        let fx = x - x0 as f64;
        let fy = y - y0 as f64;
        let top = self.get(y0, x0) * (1.0 - fx) + self.get(y0, x1) * fx;
        let bottom = self.get(y1, x0) * (1.0 - fx) + self.get(y1, x1) * fx;
        top * (1.0 - fy) + bottom * fy
    }

    pub fn pixels(&self) -> &[f64] {
        &self.data
    }

    pub fn pixels_mut(&mut self) -> &mut [f64] {
        &mut self.data
    }

    pub fn into_pixels(self) -> Vec<f64> {
        self.data
    }

    pub fn row(&self, r: usize) -> &[f64] {
        &self.data[r * self.cols..(r + 1) * self.cols]
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> Self {
        Self {
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().map(|&v| f(v)).collect(),
        }
    }

    /// Elementwise combination of two images of equal dimensions.
    pub fn zip_map(&self, other: &Self, f: impl Fn(f64, f64) -> f64) -> Result<Self> {
        if self.dims() != other.dims() {
            return Err(Error::dims(
                format!("{:?}", self.dims()),
                format!("{:?}", other.dims()),
            ));
        }
        Ok(Self {
            rows: self.rows,
            cols: self.cols,
            data: self
                .data
                .iter()
                .zip(&other.data)
                .map(|(&a, &b)| f(a, b))
                .collect(),
        })
    }

    pub fn sum(&self) -> f64 {
        self.data.iter().sum()
    }

    pub fn mean(&self) -> f64 {
        self.sum() / self.data.len() as f64
    }

    pub fn min_max(&self) -> (f64, f64) {
        self.data
            .iter()
            .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &v| {
                (lo.min(v), hi.max(v))
            })
    }

    /// True when every pixel is a whole number in `[0, 255]`.
    pub fn is_integer_mode(&self) -> bool {
        self.data
            .iter()
            .all(|&v| (0.0..=255.0).contains(&v) && v.fract() == 0.0)
    }

    /// Round half away from zero and clamp into `[0, 255]`.
    pub fn quantized(&self) -> Self {
        self.map(|v| round_half_away(v).clamp(0.0, 255.0))
    }

    /// Copy the `h x w` block whose top-left corner is `(top, left)`.
    /// Out-of-range pixels are edge-replicated.
    pub fn crop(&self, top: isize, left: isize, h: usize, w: usize) -> Self {
        Self::from_fn(h, w, |r, c| {
            self.get_clamped(top + r as isize, left + c as isize)
        })
    }

    /// Mirror left-right.
    pub fn flip_horizontal(&self) -> Self {
        Self::from_fn(self.rows, self.cols, |r, c| self.get(r, self.cols - 1 - c))
    }

    /// Rotate by 180 degrees.
    pub fn rotate180(&self) -> Self {
        Self::from_fn(self.rows, self.cols, |r, c| {
            self.get(self.rows - 1 - r, self.cols - 1 - c)
        })
    }

    /// Paste `src` with its top-left corner at `(top, left)`, clipping.
    pub fn paste(&mut self, src: &GrayImage, top: isize, left: isize) {
        for r in 0..src.rows {
            let rr = top + r as isize;
            if rr < 0 || rr >= self.rows as isize {
                continue;
            }
            for c in 0..src.cols {
                let cc = left + c as isize;
                if cc < 0 || cc >= self.cols as isize {
                    continue;
                }
                self.set(rr as usize, cc as usize, src.get(r, c));
            }
        }
    }
}

/// Row-major 0/1 raster.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct BinaryImage {
    rows: usize,
    cols: usize,
    bits: Vec<bool>,
}

impl BinaryImage {
    pub fn new(rows: usize, cols: usize) -> Self {
        assert!(rows >= 1 && cols >= 1, "image must be at least 1x1");
        Self {
            rows,
            cols,
            bits: vec![false; rows * cols],
        }
    }

    pub fn from_fn(rows: usize, cols: usize, mut f: impl FnMut(usize, usize) -> bool) -> Self {
        let mut out = Self::new(rows, cols);
        for r in 0..rows {
            for c in 0..cols {
                out.bits[r * cols + c] = f(r, c);
            }
        }
        out
    }

    /// Pixels strictly above `threshold` become 1.
    pub fn threshold(img: &GrayImage, threshold: f64) -> Self {
        Self::from_fn(img.rows(), img.cols(), |r, c| img.get(r, c) > threshold)
    }

    #[inline]
    pub fn rows(&self) -> usize {
        self.rows
    }

    #[inline]
    pub fn cols(&self) -> usize {
        self.cols
    }

    #[inline]
    pub fn dims(&self) -> (usize, usize) {
        (self.rows, self.cols)
    }

    #[inline]
    pub fn get(&self, r: usize, c: usize) -> bool {
        self.bits[r * self.cols + c]
    }

    /// Out-of-range coordinates read as 0.
    #[inline]
    pub fn get_or_zero(&self, r: isize, c: isize) -> bool {
        if r < 0 || c < 0 || r >= self.rows as isize || c >= self.cols as isize {
            false
        } else {
            self.bits[r as usize * self.cols + c as usize]
        }
    }

    #[inline]
    pub fn set(&mut self, r: usize, c: usize, v: bool) {
        self.bits[r * self.cols + c] = v;
    }

    pub fn bits(&self) -> &[bool] {
        &self.bits
    }

    pub fn count_ones(&self) -> usize {
        self.bits.iter().filter(|&&b| b).count()
    }

    /// Coordinates `(row, col)` of all set pixels in scan order.
    pub fn ones(&self) -> Vec<(usize, usize)> {
        let mut out = Vec::new();
        for r in 0..self.rows {
            for c in 0..self.cols {
                if self.get(r, c) {
                    out.push((r, c));
                }
            }
        }
        out
    }

    pub fn and(&self, other: &Self) -> Self {
        assert_eq!(self.dims(), other.dims());
        Self {
            rows: self.rows,
            cols: self.cols,
            bits: self
                .bits
                .iter()
                .zip(&other.bits)
                .map(|(&a, &b)| a && b)
                .collect(),
        }
    }

    pub fn or(&self, other: &Self) -> Self {
        assert_eq!(self.dims(), other.dims());
        Self {
            rows: self.rows,
            cols: self.cols,
            bits: self
                .bits
                .iter()
                .zip(&other.bits)
                .map(|(&a, &b)| a || b)
                .collect(),
        }
    }

    pub fn not(&self) -> Self {
        Self {
            rows: self.rows,
            cols: self.cols,
            bits: self.bits.iter().map(|&a| !a).collect(),
        }
    }

    /// 0/255 gray rendering, used for PGM serialization.
    pub fn to_gray(&self) -> GrayImage {
        GrayImage::from_fn(self.rows, self.cols, |r, c| {
            if self.get(r, c) {
                255.0
            } else {
                0.0
            }
        })
    }
}

/// Axis-aligned box in pixel units, `(x, y)` is the top-left corner.
#[derive(Clone, Copy, Debug, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct BBox {
    pub x: f64,
    pub y: f64,
    pub w: f64,
    pub h: f64,
}

impl BBox {
    pub fn new(x: f64, y: f64, w: f64, h: f64) -> Self {
        Self { x, y, w, h }
    }

    pub fn area(&self) -> f64 {
        self.w.max(0.0) * self.h.max(0.0)
    }

    pub fn center(&self) -> [f64; 2] {
        [self.x + self.w / 2.0, self.y + self.h / 2.0]
    }

    pub fn intersection(&self, other: &BBox) -> f64 {
        let x0 = self.x.max(other.x);
        let y0 = self.y.max(other.y);
        let x1 = (self.x + self.w).min(other.x + other.w);
        let y1 = (self.y + self.h).min(other.y + other.h);
        (x1 - x0).max(0.0) * (y1 - y0).max(0.0)
    }

    pub fn iou(&self, other: &BBox) -> f64 {
        let inter = self.intersection(other);
        let union = self.area() + other.area() - inter;
        if union <= 0.0 {
            0.0
        } else {
            inter / union
        }
    }

    pub fn union(&self, other: &BBox) -> BBox {
        let x0 = self.x.min(other.x);
        let y0 = self.y.min(other.y);
        let x1 = (self.x + self.w).max(other.x + other.w);
        let y1 = (self.y + self.h).max(other.y + other.h);
        BBox::new(x0, y0, x1 - x0, y1 - y0)
    }
}

/// One 8-connected component of a binary image.
#[derive(Clone, Debug, PartialEq)]
pub struct Region {
    pub label: usize,
    pub area: usize,
    /// Pixel-aligned bounding box: `w` and `h` count pixels.
    pub bbox: BBox,
    /// `(cx, cy)` in pixel coordinates.
    pub centroid: [f64; 2],
    /// Mean companion-image gray value, `0` when no companion was given.
    pub mean_gray: f64,
    /// Member pixels as `(row, col)` in scan order.
    pub pixels: Vec<(usize, usize)>,
}

impl Region {
    #[inline]
    pub fn width(&self) -> f64 {
        self.bbox.w
    }

    #[inline]
    pub fn height(&self) -> f64 {
        self.bbox.h
    }

    #[inline]
    pub fn cx(&self) -> f64 {
        self.centroid[0]
    }

    #[inline]
    pub fn cy(&self) -> f64 {
        self.centroid[1]
    }
}
