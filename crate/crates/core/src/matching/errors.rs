use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::image::BinaryImage;
use crate::Point;

fn dist(a: Point, b: Point) -> f64 {
    (a[0] - b[0]).hypot(a[1] - b[1])
}

/// Eye localisation error `t = 100·max(d_l, d_r)/d_lr` in %, where `d_lr`
/// is the distance between the manual eyes.
pub fn eye_error(manual_l: Point, manual_r: Point, auto_l: Point, auto_r: Point) -> Result<f64> {
    let d_lr = dist(manual_l, manual_r);
    if d_lr == 0.0 {
        return Err(Error::Degenerate("manual eye centres coincide".into()));
    }
    Ok(100.0 * dist(manual_l, auto_l).max(dist(manual_r, auto_r)) / d_lr)
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ContourErrors {
    /// `100·|A Δ B| / (|A| + |B|)` in %.
    pub err1: f64,
    /// `100·|A Δ B| / |A|` in %.
    pub err2: f64,
    /// Symmetric mean closest-point distance between the contours, in px.
    pub err3: f64,
}

fn mean_min_distance(a: &[Point], b: &[Point]) -> f64 {
    a.iter()
        .map(|&p| b.iter().map(|&q| dist(p, q)).fold(f64::INFINITY, f64::min))
        .sum::<f64>()
        / a.len() as f64
}

/// Compare a reference region/contour (`big_a`, `a`) with a computed one.
pub fn contour_errors(big_a: &BinaryImage, big_b: &BinaryImage, a: &[Point], b: &[Point]) -> Result<ContourErrors> {
    if big_a.dims() != big_b.dims() {
        return Err(Error::dims(format!("{:?}", big_a.dims()), format!("{:?}", big_b.dims())));
    }
    let (na, nb) = (big_a.count_ones(), big_b.count_ones());
    if na == 0 || nb == 0 || a.is_empty() || b.is_empty() {
        return Err(Error::EmptyInput("contour errors need nonempty regions and contours".into()));
    }
    let sym = big_a.bits().iter().zip(big_b.bits()).filter(|(x, y)| x != y).count() as f64;
    Ok(ContourErrors {
        err1: 100.0 * sym / (na + nb) as f64,
        err2: 100.0 * sym / na as f64,
        err3: (mean_min_distance(a, b) + mean_min_distance(b, a)) / 2.0,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::image::{ellipse_points, fill_polygon};

    #[test]
    fn eye_error_values() {
        let (l, r) = ([0.0, 0.0], [40.0, 0.0]);
        assert_eq!(eye_error(l, r, l, r).unwrap(), 0.0);
        assert_eq!(eye_error(l, r, [3.0, 4.0], [43.0, 0.0]).unwrap(), 12.5);
        assert!(eye_error(l, l, l, l).is_err());
    }

    #[test]
    fn identical_and_shifted_regions() {
        let a = BinaryImage::from_fn(10, 10, |r, c| r < 4 && c < 4);
        let pts = [[0.0, 0.0], [3.0, 3.0]];
        let e = contour_errors(&a, &a, &pts, &pts).unwrap();
        assert_eq!(e, ContourErrors { err1: 0.0, err2: 0.0, err3: 0.0 });
        let b = BinaryImage::from_fn(10, 10, |r, c| r < 4 && (2..6).contains(&c));
        let e = contour_errors(&a, &b, &pts, &pts).unwrap();
        assert_eq!(e.err1, 50.0);
        assert_eq!(e.err2, 100.0);
        let small = BinaryImage::from_fn(10, 10, |r, c| r < 2 && c < 4);
        let (ab, ba) = (
            contour_errors(&a, &small, &pts, &pts).unwrap(),
            contour_errors(&small, &a, &pts, &pts).unwrap(),
        );
        assert_eq!(ab.err1, ba.err1);
        assert_ne!(ab.err2, ba.err2);
    }

    #[test]
    fn concentric_circles() {
        let a = ellipse_points(50.0, 50.0, 30.0, 30.0, 0.0, 720);
        let b = ellipse_points(50.0, 50.0, 32.0, 32.0, 0.0, 720);
        let (ra, rb) = (fill_polygon(100, 100, &a), fill_polygon(100, 100, &b));
        let e = contour_errors(&ra, &rb, &a, &b).unwrap();
        assert!((e.err3 - 2.0).abs() < 0.1);
        assert_eq!(e.err3, contour_errors(&rb, &ra, &b, &a).unwrap().err3);
    }
}
