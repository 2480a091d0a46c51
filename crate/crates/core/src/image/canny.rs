use std::collections::VecDeque;

use serde::{Deserialize, Serialize};

use super::{gaussian_smooth, BinaryImage, GrayImage};
use crate::error::{Error, Result};

/// Canny parameters; thresholds are fractions of the maximum gradient
/// magnitude.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CannyParams {
    pub sigma: f64,
    pub low_ratio: f64,
    pub high_ratio: f64,
}

impl Default for CannyParams {
    fn default() -> Self {
        Self {
            sigma: 1.0,
            low_ratio: 0.12,
            high_ratio: 0.3,
        }
    }
}

/// Central-difference gradient with edge replication.
pub(crate) fn gradient(img: &GrayImage) -> (GrayImage, GrayImage) {
    let gx = GrayImage::from_fn(img.rows(), img.cols(), |r, c| {
        let (r, c) = (r as isize, c as isize);
        (img.get_clamped(r, c + 1) - img.get_clamped(r, c - 1)) / 2.0
    });
    let gy = GrayImage::from_fn(img.rows(), img.cols(), |r, c| {
        let (r, c) = (r as isize, c as isize);
        (img.get_clamped(r + 1, c) - img.get_clamped(r - 1, c)) / 2.0
    });
    (gx, gy)
}

/// Canny edge detector: Gaussian smoothing, gradient, non-maximum suppression
/// along the quantized gradient direction, and 8-connected hysteresis.
///
/// Plateau ties in the suppression step are broken towards the
/// higher-index neighbour so a symmetric ridge yields a one-pixel line.
pub fn canny(img: &GrayImage, params: &CannyParams) -> Result<BinaryImage> {
    let CannyParams {
        sigma,
        low_ratio,
        high_ratio,
    } = *params;
    if !(0.0 < low_ratio && low_ratio < high_ratio) {
        return Err(Error::param(format!(
            "need 0 < low_ratio < high_ratio, got {low_ratio}, {high_ratio}"
        )));
    }
    let smooth = gaussian_smooth(img, sigma)?;
    let (gx, gy) = gradient(&smooth);
    let mag = gx.zip_map(&gy, f64::hypot)?;
    let (rows, cols) = img.dims();
    let max = mag.min_max().1;
    if !(max > 0.0) {
        return Ok(BinaryImage::new(rows, cols));
    }

    let mut nms = GrayImage::new(rows, cols);
    for r in 0..rows {
        for c in 0..cols {
            let m = mag.get(r, c);
            if m <= 0.0 {
                continue;
            }
            let angle = gy.get(r, c).atan2(gx.get(r, c)).to_degrees();
            let a = if angle < 0.0 { angle + 180.0 } else { angle };
            let (dr, dc): (isize, isize) = if !(22.5..157.5).contains(&a) {
                (0, 1)
            } else if a < 67.5 {
                (1, 1)
            } else if a < 112.5 {
                (1, 0)
            } else {
                (1, -1)
            };
            let (ri, ci) = (r as isize, c as isize);
            let before = mag.get_clamped(ri - dr, ci - dc);
            let after = mag.get_clamped(ri + dr, ci + dc);
            let inside_after =
                (0..rows as isize).contains(&(ri + dr)) && (0..cols as isize).contains(&(ci + dc));
            if m >= before && (m > after || !inside_after && m >= after) {
                nms.set(r, c, m);
            }
        }
    }

    let (low, high) = (low_ratio * max, high_ratio * max);
    let mut out = BinaryImage::new(rows, cols);
    let mut queue = VecDeque::new();
    for r in 0..rows {
        for c in 0..cols {
            if nms.get(r, c) >= high {
                out.set(r, c, true);
                queue.push_back((r, c));
            }
        }
    }
    while let Some((r, c)) = queue.pop_front() {
        for dr in -1isize..=1 {
            for dc in -1isize..=1 {
                let (nr, nc) = (r as isize + dr, c as isize + dc);
                if nr < 0 || nc < 0 || nr >= rows as isize || nc >= cols as isize {
                    continue;
                }
                let (nr, nc) = (nr as usize, nc as usize);
                if !out.get(nr, nc) && nms.get(nr, nc) >= low {
                    out.set(nr, nc, true);
                    queue.push_back((nr, nc));
                }
            }
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn constant_has_no_edges() {
        let img = GrayImage::filled(16, 16, 90.0);
        assert_eq!(canny(&img, &CannyParams::default()).unwrap().count_ones(), 0);
    }

    #[test]
    fn vertical_step_gives_single_line() {
        let img = GrayImage::from_fn(32, 32, |_, c| if c < 16 { 20.0 } else { 200.0 });
        let e = canny(&img, &CannyParams::default()).unwrap();
        for r in 0..32 {
            let cols: Vec<usize> = (0..32).filter(|&c| e.get(r, c)).collect();
            assert_eq!(cols.len(), 1, "row {r}: {cols:?}");
            assert!((cols[0] as isize - 16).abs() <= 1);
        }
    }

    #[test]
    fn disk_edges_lie_on_circle() {
        let (cx, cy, rad) = (32.0, 32.0, 15.0);
        let img = GrayImage::from_fn(64, 64, |r, c| {
            let d = ((c as f64 - cx).powi(2) + (r as f64 - cy).powi(2)).sqrt();
            if d <= rad {
                220.0
            } else {
                30.0
            }
        });
        let e = canny(&img, &CannyParams::default()).unwrap();
        assert!(e.count_ones() > 60);
        for (r, c) in e.ones() {
            let d = ((c as f64 - cx).powi(2) + (r as f64 - cy).powi(2)).sqrt();
            assert!((d - rad).abs() <= 1.5, "edge at ({r},{c}) dist {d}");
        }
    }

    #[test]
    fn rejects_bad_ratios() {
        let img = GrayImage::new(4, 4);
        let p = CannyParams {
            low_ratio: 0.5,
            high_ratio: 0.4,
            ..Default::default()
        };
        assert!(canny(&img, &p).is_err());
    }
}
