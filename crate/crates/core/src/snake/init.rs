use serde::{Deserialize, Serialize};

use super::bspline::{bspline_closed, Snake, SplineMode};
use crate::error::{Error, Result};
use crate::features::FaceFeatures;
use crate::image::{
    canny, erode_binary, fill_holes, fill_polygon, histogram_equalize, label_regions, largest_region,
    median_filter, BinaryImage, CannyParams, GrayImage, StructuringElement,
};
use crate::Point;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ContourInitParams {
    pub c1: f64,
    pub c2: f64,
    pub c3: f64,
    pub c4: f64,
    pub c5: f64,
    pub c6: f64,
    pub spline: SplineMode,
}

impl Default for ContourInitParams {
    fn default() -> Self {
        let (c1, c2) = (0.5, 0.2);
        Self { c1, c2, c3: c2 + 1.0, c4: c1 * 0.6, c5: 0.1, c6: 0.6, spline: SplineMode::default() }
    }
}

impl ContourInitParams {
    pub fn validate(&self) -> Result<()> {
        let c = [self.c1, self.c2, self.c3, self.c4, self.c5, self.c6];
        if c.iter().all(|&v| v > 0.0 && v.is_finite()) {
            Ok(())
        } else {
            Err(Error::param("contour init coefficients must be positive"))
        }
    }
}

/// The ten control points around the face, in contour order starting left
/// of the image-left eye and running over the forehead.
pub fn init_points(f: &FaceFeatures, p: &ContourInitParams) -> Result<[Point; 10]> {
    p.validate()?;
    let ([recx, recy], [lecx, lecy], [licx, licy]) = (f.rec, f.lec, f.lic);
    let drele = lecx - recx;
    let dreli = licy - recy;
    if !(drele > 0.0) {
        return Err(Error::Degenerate(format!("eyes not ordered left to right (dx = {drele})")));
    }
    if !(dreli > 0.0) {
        return Err(Error::Degenerate(format!("lips not below the eyes (dy = {dreli})")));
    }
    Ok([
        [recx - drele * p.c1, recy],
        [recx, recy - dreli * p.c2],
        [(recx + lecx) / 2.0, recy - dreli * p.c3],
        [lecx, lecy - dreli * p.c2],
        [lecx + drele * p.c1, lecy],
        [lecx + drele * p.c4, licy - dreli / 2.0],
        [lecx + drele * p.c5, licy],
        [licx, licy + dreli * p.c6],
        [recx - drele * p.c5, licy],
        [recx - drele * p.c4, licy - dreli / 2.0],
    ])
}

pub fn init_contour(f: &FaceFeatures, p: &ContourInitParams, n_samples: usize) -> Result<Snake> {
    bspline_closed(&init_points(f, p)?, n_samples, p.spline)
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EdgeMapParams {
    pub equalize_bins: usize,
    pub median_window: usize,
    /// Median filtering covers the rows above `licy + median_rows·lih`.
    pub median_rows: f64,
    pub canny: CannyParams,
    /// Relative half-width of the face gray band around the mean face gray.
    pub band: f64,
    /// Edges at or below `licy + cutoff_rows·lih` are cleared.
    pub cutoff_rows: f64,
    /// Erosion radius separating the face-mask interior from its boundary.
    pub interior_erosion: usize,
    pub ellipse_h: f64,
    pub ellipse_v: f64,
}

impl Default for EdgeMapParams {
    fn default() -> Self {
        Self {
            equalize_bins: 64,
            median_window: 7,
            median_rows: 2.0,
            canny: CannyParams::default(),
            band: 0.2,
            cutoff_rows: 6.0,
            interior_erosion: 2,
            ellipse_h: 1.8,
            ellipse_v: 2.4,
        }
    }
}

/// Pixels with gray value in `[(1−p)·mgv, (1+p)·mgv]`.
pub fn gray_band_mask(img: &GrayImage, mgv: f64, p: f64) -> BinaryImage {
    let (lo, hi) = ((1.0 - p) * mgv, (1.0 + p) * mgv);
    let (lo, hi) = (lo.min(hi), lo.max(hi));
    BinaryImage::from_fn(img.rows(), img.cols(), |r, c| {
        let v = img.get(r, c);
        v >= lo && v <= hi
    })
}

fn feature_boxes(f: &FaceFeatures) -> [(Point, f64, f64); 3] {
    [(f.rec, f.rew, f.reh), (f.lec, f.lew, f.leh), (f.lic, f.liw, f.lih)]
}

fn in_box(x: f64, y: f64, (c, w, h): (Point, f64, f64)) -> bool {
    (x - c[0]).abs() <= w / 2.0 && (y - c[1]).abs() <= h / 2.0
}

/// Edge map restricted to the likely face boundary: equalized, median
/// smoothed above the mouth, Canny edges with the face interior, the inside
/// of the initial contour, short fragments and everything far from the
/// features removed.
pub fn prepare_edge_map(img: &GrayImage, f: &FaceFeatures, init: &Snake, p: &EdgeMapParams) -> Result<BinaryImage> {
    let (rows, cols) = img.dims();
    let inside = |q: Point| q[0] >= 0.0 && q[1] >= 0.0 && q[0] <= (cols - 1) as f64 && q[1] <= (rows - 1) as f64;
    if !(inside(f.rec) && inside(f.lec) && inside(f.lic)) {
        return Err(Error::param("facial features lie outside the image"));
    }
    if !(p.band >= 0.0) {
        return Err(Error::param("band must be non-negative"));
    }
    let mut eq = histogram_equalize(&img.quantized(), p.equalize_bins)?;
    let med = median_filter(&eq, p.median_window, p.median_window)?;
    let median_end = (f.lic[1] + p.median_rows * f.lih).ceil().clamp(0.0, rows as f64) as usize;
    for r in 0..median_end {
        for c in 0..cols {
            eq.set(r, c, med.get(r, c));
        }
    }
    let mut edges = canny(&eq, &p.canny)?;

    let poly = init.points();
    let init_area = fill_polygon(rows, cols, &poly);
    let boxes = feature_boxes(f);
    let (mut sum, mut n) = (0.0, 0usize);
    for (r, c) in init_area.ones() {
        if !boxes.iter().any(|&b| in_box(c as f64, r as f64, b)) {
            sum += eq.get(r, c);
            n += 1;
        }
    }
    let mgv = if n > 0 { sum / n as f64 } else { eq.mean() };
    let mut mask = gray_band_mask(&eq, mgv, p.band);
    for r in 0..rows {
        for c in 0..cols {
            if boxes.iter().any(|&b| in_box(c as f64, r as f64, b)) {
                mask.set(r, c, true);
            }
        }
    }
    let mask = largest_region(&fill_holes(&mask));
    let interior = erode_binary(&mask, &StructuringElement::disk(p.interior_erosion));

    let cutoff = f.lic[1] + p.cutoff_rows * f.lih;
    let (ex, ey) = ((f.rec[0] + f.lec[0]) / 2.0, f.rec[1]);
    let (ax, ay) = (p.ellipse_h * (f.lec[0] - f.rec[0]), p.ellipse_v * (f.lic[1] - f.rec[1]));
    for r in 0..rows {
        for c in 0..cols {
            let (x, y) = (c as f64, r as f64);
            let far = ((x - ex) / ax).powi(2) + ((y - ey) / ay).powi(2) > 1.0;
            if y >= cutoff || far || interior.get(r, c) || init_area.get(r, c) {
                edges.set(r, c, false);
            }
        }
    }
    let min_len = (f.rew + f.lew) / 2.0;
    for reg in label_regions(&edges.clone(), None) {
        if (reg.area as f64) < min_len {
            for (r, c) in reg.pixels {
                edges.set(r, c, false);
            }
        }
    }
    Ok(edges)
}
