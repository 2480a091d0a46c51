use crate::detection::Detection;
use crate::error::{Error, Result};
use crate::image::{label_regions, round_half_away, BinaryImage, GrayImage};
use crate::Point;

fn smooth3(p: &[f64]) -> Vec<f64> {
    (0..p.len())
        .map(|i| {
            let lo = i.saturating_sub(1);
            let hi = (i + 1).min(p.len() - 1);
            p[lo..=hi].iter().sum::<f64>() / (hi - lo + 1) as f64
        })
        .collect()
}

/// Centres of plateaus strictly lower than the values on both sides.
fn minima(p: &[f64]) -> Vec<f64> {
    let mut out = Vec::new();
    let mut i = 1;
    while i + 1 < p.len() {
        if p[i] < p[i - 1] {
            let mut j = i;
            while j + 1 < p.len() && p[j + 1] == p[i] {
                j += 1;
            }
            if j + 1 < p.len() && p[j + 1] > p[i] {
                out.push((i + j) as f64 / 2.0);
            }
            i = j + 1;
        } else {
            i += 1;
        }
    }
    out
}

fn with_midpoints(xs: &[f64]) -> Vec<f64> {
    xs.windows(2).map(|w| (w[0] + w[1]) / 2.0).collect()
}

/// Candidate eye positions: intersections of the minima of the column and
/// row intensity profiles (width-3 moving average), plus positions halfway
/// between neighbouring minima.
pub fn projection_seeds(roi: &GrayImage) -> Vec<Point> {
    if roi.is_empty() {
        return Vec::new();
    }
    let (rows, cols) = roi.dims();
    let col_profile: Vec<f64> = (0..cols).map(|c| (0..rows).map(|r| roi.get(r, c)).sum()).collect();
    let row_profile: Vec<f64> = (0..rows).map(|r| roi.row(r).iter().sum()).collect();
    let xs = minima(&smooth3(&col_profile));
    let ys = minima(&smooth3(&row_profile));
    let mut seeds = Vec::new();
    for &y in &ys {
        for &x in &xs {
            seeds.push([x, y]);
        }
        for x in with_midpoints(&xs) {
            seeds.push([x, y]);
        }
    }
    for y in with_midpoints(&ys) {
        for &x in &xs {
            seeds.push([x, y]);
        }
    }
    seeds
}

/// Eye centre from verified detections: every detection casts two votes at
/// its centre and one on each of the 8 neighbours, votes below half the maximum are discarded, and the
/// maximum of the largest remaining blob wins (first in scan order on ties).
pub fn eye_center_accumulate(verified: &[Detection], roi_dims: (usize, usize)) -> Result<Point> {
    if verified.is_empty() {
        return Err(Error::EmptyInput("no verified eye detections".into()));
    }
    let (rows, cols) = roi_dims;
    let mut acc = GrayImage::new(rows, cols);
    for d in verified {
        let c = d.bbox().center();
        let (x, y) = (round_half_away(c[0]) as isize, round_half_away(c[1]) as isize);
        for dy in -1..=1 {
            for dx in -1..=1 {
                let (r, cc) = (y + dy, x + dx);
                if r >= 0 && cc >= 0 && (r as usize) < rows && (cc as usize) < cols {
                    let (r, cc) = (r as usize, cc as usize);
                    let vote = if dx == 0 && dy == 0 { 2.0 } else { 1.0 };
                    acc.set(r, cc, acc.get(r, cc) + vote);
                }
            }
        }
    }
    let (_, max) = acc.min_max();
    if max == 0.0 {
        return Err(Error::EmptyInput("all detections lie outside the region".into()));
    }
    let bw = BinaryImage::threshold(&acc, 0.5 * max);
    let regions = label_regions(&bw, None);
    let blob = regions
        .iter()
        .reduce(|best, r| if r.area > best.area { r } else { best })
        .expect("the maximum is above threshold");
    let mut best = blob.pixels[0];
    for &(r, c) in &blob.pixels {
        if acc.get(r, c) > acc.get(best.0, best.1) {
            best = (r, c);
        }
    }
    Ok([best.1 as f64, best.0 as f64])
}

#[cfg(test)]
mod tests {
    use super::*;

    fn det_at(x: f64, y: f64) -> Detection {
        Detection { x: x - 5.0, y: y - 5.0, w: 10.0, h: 10.0, scale: 1.0, score: 1.0, template_id: 0, overlap_count: 0 }
    }

    #[test]
    fn uniform_roi_has_no_seeds() {
        assert!(projection_seeds(&GrayImage::filled(20, 30, 7.0)).is_empty());
    }

    #[test]
    fn dark_cross() {
        let roi = GrayImage::from_fn(21, 31, |r, c| if r == 8 || c == 19 { 10.0 } else { 200.0 });
        assert_eq!(projection_seeds(&roi), vec![[19.0, 8.0]]);
    }

    #[test]
    fn midpoint_between_dark_columns() {
        let roi = GrayImage::from_fn(21, 41, |r, c| if c == 10 || c == 30 || r == 12 { 10.0 } else { 200.0 });
        let seeds = projection_seeds(&roi);
        assert!(seeds.contains(&[10.0, 12.0]));
        assert!(seeds.contains(&[30.0, 12.0]));
        assert!(seeds.contains(&[20.0, 12.0]));
    }

    #[test]
    fn accumulator_cases() {
        assert!(eye_center_accumulate(&[], (10, 10)).is_err());
        let same = vec![det_at(12.0, 7.0); 4];
        assert_eq!(eye_center_accumulate(&same, (30, 30)).unwrap(), [12.0, 7.0]);
        let mut mixed = vec![det_at(10.0, 10.0); 10];
        mixed.extend(vec![det_at(40.0, 30.0); 2]);
        assert_eq!(eye_center_accumulate(&mixed, (50, 50)).unwrap(), [10.0, 10.0]);
        // two equal maxima in one blob: the first in scan order wins
        let tie = vec![det_at(10.0, 10.0), det_at(11.0, 10.0)];
        assert_eq!(eye_center_accumulate(&tie, (30, 30)).unwrap(), [10.0, 10.0]);
    }
}
