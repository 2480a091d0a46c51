use super::{BinaryImage, GrayImage};
use crate::error::{Error, Result};

/// Flat structuring element with its origin at `(rows / 2, cols / 2)`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct StructuringElement {
    rows: usize,
    cols: usize,
    mask: Vec<bool>,
}

impl StructuringElement {
    pub fn from_mask(rows: usize, cols: usize, mask: Vec<bool>) -> Result<Self> {
        if rows == 0 || cols == 0 || mask.len() != rows * cols {
            return Err(Error::param("structuring element mask has wrong size"));
        }
        if !mask.iter().any(|&b| b) {
            return Err(Error::param("structuring element must have a set element"));
        }
        Ok(Self { rows, cols, mask })
    }

    pub fn rect(rows: usize, cols: usize) -> Self {
        Self::from_mask(rows, cols, vec![true; rows * cols]).expect("non-empty rectangle")
    }

    /// `1 x len` line.
    pub fn horizontal(len: usize) -> Self {
        Self::rect(1, len)
    }

    /// `len x 1` line.
    pub fn vertical(len: usize) -> Self {
        Self::rect(len, 1)
    }

    pub fn disk(radius: usize) -> Self {
        let d = 2 * radius + 1;
        let r2 = (radius * radius) as isize;
        let mut mask = Vec::with_capacity(d * d);
        for r in 0..d {
            for c in 0..d {
                let (dy, dx) = (r as isize - radius as isize, c as isize - radius as isize);
                mask.push(dy * dy + dx * dx <= r2);
            }
        }
        Self::from_mask(d, d, mask).expect("disk has its centre set")
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    /// Offsets `(dr, dc)` of the set elements relative to the origin.
    pub fn offsets(&self) -> Vec<(isize, isize)> {
        let (or, oc) = ((self.rows / 2) as isize, (self.cols / 2) as isize);
        let mut out = Vec::new();
        for r in 0..self.rows {
            for c in 0..self.cols {
                if self.mask[r * self.cols + c] {
                    out.push((r as isize - or, c as isize - oc));
                }
            }
        }
        out
    }
}

// Out-of-image samples are skipped, which keeps dilation and erosion an
// adjoint pair and so makes opening/closing idempotent near the borders.
fn window_reduce(
    img: &GrayImage,
    offsets: &[(isize, isize)],
    sign: isize,
    init: f64,
    pick: fn(f64, f64) -> f64,
) -> GrayImage {
    let (rows, cols) = (img.rows() as isize, img.cols() as isize);
    GrayImage::from_fn(img.rows(), img.cols(), |r, c| {
        let mut acc = init;
        for &(dr, dc) in offsets {
            let (rr, cc) = (r as isize + sign * dr, c as isize + sign * dc);
            if rr >= 0 && cc >= 0 && rr < rows && cc < cols {
                acc = pick(acc, img.get(rr as usize, cc as usize));
            }
        }
        acc
    })
}

/// Grayscale dilation: `max_{s in S} I(p - s)`.
pub fn dilate(img: &GrayImage, se: &StructuringElement) -> GrayImage {
    window_reduce(img, &se.offsets(), -1, f64::NEG_INFINITY, f64::max)
}

/// Grayscale erosion: `min_{s in S} I(p + s)`.
pub fn erode(img: &GrayImage, se: &StructuringElement) -> GrayImage {
    window_reduce(img, &se.offsets(), 1, f64::INFINITY, f64::min)
}

/// Closing: dilation followed by erosion.
pub fn morph_close(img: &GrayImage, se: &StructuringElement) -> Result<GrayImage> {
    if se.rows() > img.rows() || se.cols() > img.cols() {
        return Err(Error::param(format!(
            "structuring element {}x{} larger than image {}x{}",
            se.rows(),
            se.cols(),
            img.rows(),
            img.cols()
        )));
    }
    Ok(erode(&dilate(img, se), se))
}

pub fn dilate_binary(bw: &BinaryImage, se: &StructuringElement) -> BinaryImage {
    let offsets = se.offsets();
    BinaryImage::from_fn(bw.rows(), bw.cols(), |r, c| {
        offsets
            .iter()
            .any(|&(dr, dc)| bw.get_or_zero(r as isize - dr, c as isize - dc))
    })
}

/// Binary erosion; pixels outside the image count as set, matching the
/// skip-out-of-bounds convention of [`erode`].
pub fn erode_binary(bw: &BinaryImage, se: &StructuringElement) -> BinaryImage {
    let offsets = se.offsets();
    let (rows, cols) = (bw.rows() as isize, bw.cols() as isize);
    BinaryImage::from_fn(bw.rows(), bw.cols(), |r, c| {
        offsets.iter().all(|&(dr, dc)| {
            let (rr, cc) = (r as isize + dr, c as isize + dc);
            rr < 0 || cc < 0 || rr >= rows || cc >= cols || bw.get(rr as usize, cc as usize)
        })
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn constant_is_unchanged() {
        let img = GrayImage::filled(8, 8, 40.0);
        assert_eq!(morph_close(&img, &StructuringElement::horizontal(7)).unwrap(), img);
    }

    #[test]
    fn closing_fills_dark_pixel() {
        let mut img = GrayImage::filled(9, 9, 200.0);
        img.set(4, 4, 0.0);
        let out = morph_close(&img, &StructuringElement::horizontal(7)).unwrap();
        assert_eq!(out.get(4, 4), 200.0);
    }

    #[test]
    fn strel_must_fit() {
        let img = GrayImage::new(3, 3);
        assert!(morph_close(&img, &StructuringElement::horizontal(7)).is_err());
        assert!(StructuringElement::from_mask(1, 2, vec![false, false]).is_err());
    }

    #[test]
    fn binary_erosion_shrinks_square() {
        let bw = BinaryImage::from_fn(9, 9, |r, c| (2..7).contains(&r) && (2..7).contains(&c));
        let e = erode_binary(&bw, &StructuringElement::rect(3, 3));
        assert_eq!(e.count_ones(), 9);
        assert_eq!(dilate_binary(&e, &StructuringElement::rect(3, 3)), bw);
    }

    proptest! {
        #[test]
        fn closing_is_extensive_and_idempotent(
            data in prop::collection::vec(0u8..=255, 256),
            horizontal in any::<bool>(),
        ) {
            let img = GrayImage::from_vec(16, 16, data.into_iter().map(f64::from).collect()).unwrap();
            let se = if horizontal { StructuringElement::horizontal(7) } else { StructuringElement::vertical(7) };
            let once = morph_close(&img, &se).unwrap();
            let twice = morph_close(&once, &se).unwrap();
            prop_assert_eq!(&once, &twice);
            for (a, b) in once.pixels().iter().zip(img.pixels()) {
                prop_assert!(a >= b);
            }
        }
    }
}
