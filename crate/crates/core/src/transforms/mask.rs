use crate::image::{BinaryImage, GrayImage};

/// Pixels inside the ellipse inscribed in the image rectangle.
pub fn elliptical_mask(rows: usize, cols: usize) -> BinaryImage {
    let (cy, cx) = ((rows as f64 - 1.0) / 2.0, (cols as f64 - 1.0) / 2.0);
    let (ry, rx) = (rows as f64 / 2.0, cols as f64 / 2.0);
    BinaryImage::from_fn(rows, cols, |r, c| {
        ((c as f64 - cx) / rx).powi(2) + ((r as f64 - cy) / ry).powi(2) <= 1.0
    })
}

/// Zero every pixel outside `mask`.
pub fn apply_mask(img: &GrayImage, mask: &BinaryImage) -> GrayImage {
    assert_eq!(img.dims(), mask.dims(), "mask dims must match the image");
    GrayImage::from_fn(img.rows(), img.cols(), |r, c| {
        if mask.get(r, c) {
            img.get(r, c)
        } else {
            0.0
        }
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn mask_shape() {
        let m = elliptical_mask(10, 20);
        assert!(m.get(5, 10));
        assert!(!m.get(0, 0));
        assert!(!m.get(9, 19));
        let img = apply_mask(&GrayImage::filled(10, 20, 9.0), &m);
        assert_eq!(img.get(0, 0), 0.0);
        assert_eq!(img.get(5, 10), 9.0);
    }
}
