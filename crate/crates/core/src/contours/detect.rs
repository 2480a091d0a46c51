use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use super::ellipse::{fit_ellipse_direct, Ellipse};
use super::link::{link_edges, Contour};
use super::split::{smooth_contour_ends, split_kcosines};
use crate::error::{Error, Result};
use crate::image::{canny, gaussian_smooth, histogram_equalize, CannyParams, GrayImage};
use crate::Point;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ContourDetectParams {
    /// Gaussian σ applied after equalization, before edge detection.
    pub smooth_sigma: f64,
    pub canny: CannyParams,
    pub min_contour_len: usize,
    /// Face width band in px; the minor axis must span at least the minimum
    /// and the major axis at most the maximum.
    pub min_face_size: f64,
    pub max_face_size: f64,
    pub kcos_k: usize,
    /// Turning angle in radians above which a contour is split.
    pub kcos_angle_thresh: f64,
    /// Points smoothed at each end of a split contour.
    pub end_smooth: usize,
    pub link_gap: f64,
    /// Largest end-tangent difference for endpoint linking, radians.
    pub link_angle: f64,
    pub min_fit_len: usize,
    /// Largest deviation of the major axis from vertical, radians.
    pub max_tilt: f64,
    pub min_aspect: f64,
    pub max_aspect: f64,
    /// RMS fit error limits in px for contours shorter and longer than half
    /// the ellipse perimeter.
    pub fit_error_thresholds: [f64; 2],
}

impl Default for ContourDetectParams {
    fn default() -> Self {
        Self {
            smooth_sigma: 1.0,
            canny: CannyParams::default(),
            min_contour_len: 10,
            min_face_size: 30.0,
            max_face_size: 300.0,
            kcos_k: 4,
            kcos_angle_thresh: 60f64.to_radians(),
            end_smooth: 4,
            link_gap: 5.0,
            link_angle: 45f64.to_radians(),
            min_fit_len: 20,
            max_tilt: 30f64.to_radians(),
            min_aspect: 1.05,
            max_aspect: 2.2,
            fit_error_thresholds: [1.5, 1.0],
        }
    }
}

impl ContourDetectParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.min_face_size > 0.0 && self.min_face_size < self.max_face_size) {
            return Err(Error::param("need 0 < min_face_size < max_face_size"));
        }
        if self.kcos_k == 0 {
            return Err(Error::param("kcos_k must be at least 1"));
        }
        if !(self.min_aspect >= 1.0 && self.min_aspect <= self.max_aspect) {
            return Err(Error::param("need 1 <= min_aspect <= max_aspect"));
        }
        if self.fit_error_thresholds.iter().any(|&t| !(t > 0.0)) {
            return Err(Error::param("fit error thresholds must be positive"));
        }
        Ok(())
    }
}

/// Ellipse acceptance test applied to every fitted candidate: axes within
/// the face band, major axis near vertical, aspect within limits, and fit
/// error below the threshold for the length of the supporting contour.
pub fn is_plausible_face(e: &Ellipse, p: &ContourDetectParams) -> bool {
    let tilt = PI / 2.0 - e.theta.abs();
    let aspect = e.a / e.b;
    let band = if (e.support as f64) < 0.5 * PI * (e.a + e.b) { 0 } else { 1 };
    2.0 * e.b >= p.min_face_size
        && 2.0 * e.a <= p.max_face_size
        && tilt <= p.max_tilt
        && aspect >= p.min_aspect
        && aspect <= p.max_aspect
        && e.fit_error <= p.fit_error_thresholds[band]
}

fn shoelace_area(pts: &[Point]) -> f64 {
    let n = pts.len();
    (0..n)
        .map(|i| {
            let (a, b) = (pts[i], pts[(i + 1) % n]);
            a[0] * b[1] - b[0] * a[1]
        })
        .sum::<f64>()
        .abs()
        / 2.0
}

fn small_and_round(c: &Contour, p: &ContourDetectParams) -> bool {
    if !c.closed {
        return false;
    }
    let (x0, y0, x1, y1) = c.bounds();
    let diag = (x1 - x0).hypot(y1 - y0);
    let per = c.arc_length();
    let circularity = 4.0 * PI * shoelace_area(&c.points) / (per * per);
    diag < p.min_face_size / 3.0 && circularity > 0.7
}

fn max_chord_distance(c: &Contour) -> f64 {
    let (a, b) = (c.points[0], c.points[c.len() - 1]);
    let (dx, dy) = (b[0] - a[0], b[1] - a[1]);
    let len = dx.hypot(dy);
    c.points
        .iter()
        .map(|q| {
            if len == 0.0 {
                (q[0] - a[0]).hypot(q[1] - a[1])
            } else {
                ((q[0] - a[0]) * dy - (q[1] - a[1]) * dx).abs() / len
            }
        })
        .fold(0.0, f64::max)
}

fn straight_and_long(c: &Contour, p: &ContourDetectParams) -> bool {
    !c.closed && c.arc_length() > p.min_face_size && max_chord_distance(c) < 2.0
}

fn max_side(pts: &[Point]) -> f64 {
    let c = Contour::open(pts.to_vec());
    let (x0, y0, x1, y1) = c.bounds();
    (x1 - x0).max(y1 - y0)
}

fn unit(v: [f64; 2]) -> Option<[f64; 2]> {
    let n = v[0].hypot(v[1]);
    (n > 0.0).then(|| [v[0] / n, v[1] / n])
}

// Direction of travel leaving the last point / entering the first point.
fn tail_dir(pts: &[Point]) -> Option<[f64; 2]> {
    let n = pts.len();
    let m = 5.min(n - 1);
    unit([pts[n - 1][0] - pts[n - 1 - m][0], pts[n - 1][1] - pts[n - 1 - m][1]])
}

fn head_dir(pts: &[Point]) -> Option<[f64; 2]> {
    let m = 5.min(pts.len() - 1);
    unit([pts[m][0] - pts[0][0], pts[m][1] - pts[0][1]])
}

/// Join open contours whose ends are close and continue each other's
/// direction, as long as the result still fits in the largest face.
pub fn link_endpoints(contours: Vec<Contour>, p: &ContourDetectParams) -> Vec<Contour> {
    let (mut open, mut done): (Vec<Contour>, Vec<Contour>) =
        contours.into_iter().filter(|c| c.len() >= 2).partition(|c| !c.closed);
    loop {
        let mut best: Option<(f64, usize, usize, Vec<Point>)> = None;
        for i in 0..open.len() {
            for j in 0..open.len() {
                if i == j {
                    continue;
                }
                // A's tail joins B's head for every orientation of B; A's
                // orientation is covered by the (j, i) pair.
                for rev_b in [false, true] {
                    let a = &open[i].points;
                    let b = if rev_b { open[j].reversed().points } else { open[j].points.clone() };
                    let (ta, hb) = (a[a.len() - 1], b[0]);
                    let gap = (ta[0] - hb[0]).hypot(ta[1] - hb[1]);
                    if gap > p.link_gap || best.as_ref().is_some_and(|(g, ..)| gap >= *g) {
                        continue;
                    }
                    let (Some(da), Some(db)) = (tail_dir(a), head_dir(&b)) else { continue };
                    let cos = (da[0] * db[0] + da[1] * db[1]).clamp(-1.0, 1.0);
                    if cos.acos() > p.link_angle {
                        continue;
                    }
                    let merged: Vec<Point> = a.iter().chain(&b).copied().collect();
                    if max_side(&merged) > p.max_face_size {
                        continue;
                    }
                    best = Some((gap, i, j, merged));
                }
            }
        }
        match best {
            Some((_, i, j, merged)) => {
                let (hi, lo) = (i.max(j), i.min(j));
                open.remove(hi);
                open.remove(lo);
                open.push(Contour::open(merged));
            }
            None => break,
        }
    }
    done.extend(open);
    done
}

fn fit_candidate(pts: &[Point], p: &ContourDetectParams, rows: usize, cols: usize) -> Option<Ellipse> {
    let e = fit_ellipse_direct(pts).ok()?;
    let inside = e.cx >= 0.0 && e.cy >= 0.0 && e.cx < cols as f64 && e.cy < rows as f64;
    (inside && is_plausible_face(&e, p)).then_some(e)
}

fn centroid(pts: &[Point]) -> Point {
    let n = pts.len() as f64;
    let (sx, sy) = pts.iter().fold((0.0, 0.0), |(x, y), q| (x + q[0], y + q[1]));
    [sx / n, sy / n]
}

// Vector from the chord midpoint towards the arc; the centre of curvature
// lies on the opposite side.
fn bulge(c: &Contour) -> ([f64; 2], Point) {
    let (a, b) = (c.points[0], c.points[c.len() - 1]);
    let mid = [(a[0] + b[0]) / 2.0, (a[1] + b[1]) / 2.0];
    let g = centroid(&c.points);
    ([g[0] - mid[0], g[1] - mid[1]], mid)
}

/// Whether two open arcs could be opposite sides of one ellipse: each lies
/// on the concave side of the other and together they fit the face band.
fn worth_pairing(a: &Contour, b: &Contour, p: &ContourDetectParams) -> bool {
    if a.closed || b.closed || a.len() < p.min_contour_len || b.len() < p.min_contour_len {
        return false;
    }
    let merged: Vec<Point> = a.points.iter().chain(&b.points).copied().collect();
    let side = max_side(&merged);
    if side > p.max_face_size || side < p.min_face_size {
        return false;
    }
    let faces = |x: &Contour, y: &Contour| {
        let (v, mid) = bulge(x);
        let g = centroid(&y.points);
        (g[0] - mid[0]) * v[0] + (g[1] - mid[1]) * v[1] < 0.0
    };
    faces(a, b) && faces(b, a)
}

fn same_ellipse(e: &Ellipse, f: &Ellipse) -> bool {
    let tol = 0.2;
    (e.cx - f.cx).hypot(e.cy - f.cy) <= tol * e.b.min(f.b)
        && (e.a - f.a).abs() <= tol * e.a.max(f.a)
        && (e.b - f.b).abs() <= tol * e.b.max(f.b)
}

fn coverage(e: &Ellipse) -> f64 {
    (e.support as f64 / e.perimeter()).min(1.0)
}

/// Of every group of near-identical ellipses keep the one supported by the
/// largest share of its perimeter, then by the smallest fit error.
fn dedup(mut cands: Vec<Ellipse>) -> Vec<Ellipse> {
    cands.sort_by(|x, y| coverage(y).total_cmp(&coverage(x)).then(x.fit_error.total_cmp(&y.fit_error)));
    let mut out: Vec<Ellipse> = Vec::new();
    for e in cands {
        if !out.iter().any(|k| same_ellipse(k, &e)) {
            out.push(e);
        }
    }
    out
}

/// Contours prepared for ellipse fitting: edges linked, split at corners,
/// small round blobs dropped, ends smoothed, endpoints joined and long
/// straight pieces removed.
pub fn candidate_contours(img: &GrayImage, p: &ContourDetectParams) -> Result<Vec<Contour>> {
    p.validate()?;
    let eq = histogram_equalize(img, 256)?;
    let smooth = gaussian_smooth(&eq, p.smooth_sigma)?;
    let edges = canny(&smooth, &p.canny)?;
    let mut pieces: Vec<Contour> = link_edges(&edges, p.min_contour_len)
        .iter()
        .flat_map(|c| split_kcosines(c, p.kcos_k, p.kcos_angle_thresh))
        .filter(|c| c.len() >= p.min_contour_len)
        .filter(|c| !small_and_round(c, p))
        .collect();
    for c in &mut pieces {
        *c = smooth_contour_ends(c, p.end_smooth);
    }
    let linked = link_endpoints(pieces, p);
    Ok(linked.into_iter().filter(|c| !straight_and_long(c, p)).collect())
}

/// Face candidates from ellipses fitted to single contours and to pairs of
/// contours, filtered by [`is_plausible_face`] and deduplicated.
pub fn detect_faces_by_contour(img: &GrayImage, p: &ContourDetectParams) -> Result<Vec<Ellipse>> {
    let contours = candidate_contours(img, p)?;
    let (rows, cols) = img.dims();
    let fittable = |c: &Contour| {
        let s = max_side(&c.points);
        c.len() >= p.min_fit_len.max(6) && s <= p.max_face_size && s >= p.min_face_size / 2.0
    };
    let mut cands: Vec<Ellipse> = contours
        .iter()
        .filter(|c| fittable(c))
        .filter_map(|c| fit_candidate(&c.points, p, rows, cols))
        .collect();
    for i in 0..contours.len() {
        for j in i + 1..contours.len() {
            if worth_pairing(&contours[i], &contours[j], p) {
                let merged: Vec<Point> = contours[i].points.iter().chain(&contours[j].points).copied().collect();
                if merged.len() >= p.min_fit_len.max(6) {
                    cands.extend(fit_candidate(&merged, p, rows, cols));
                }
            }
        }
    }
    log::debug!("{} contours, {} plausible ellipses before dedup", contours.len(), cands.len());
    Ok(dedup(cands))
}
