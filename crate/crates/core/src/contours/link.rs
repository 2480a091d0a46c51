use serde::{Deserialize, Serialize};

use crate::image::BinaryImage;
use crate::Point;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Contour {
    pub points: Vec<Point>,
    pub closed: bool,
}

impl Contour {
    pub fn open(points: Vec<Point>) -> Self {
        Self { points, closed: false }
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    /// Polyline length, including the closing segment for closed contours.
    pub fn arc_length(&self) -> f64 {
        let seg = |a: &Point, b: &Point| (a[0] - b[0]).hypot(a[1] - b[1]);
        let open: f64 = self.points.windows(2).map(|w| seg(&w[0], &w[1])).sum();
        match (self.closed, self.points.first(), self.points.last()) {
            (true, Some(f), Some(l)) => open + seg(l, f),
            _ => open,
        }
    }

    /// `(min_x, min_y, max_x, max_y)`.
    pub fn bounds(&self) -> (f64, f64, f64, f64) {
        self.points.iter().fold(
            (f64::INFINITY, f64::INFINITY, f64::NEG_INFINITY, f64::NEG_INFINITY),
            |(x0, y0, x1, y1), p| (x0.min(p[0]), y0.min(p[1]), x1.max(p[0]), y1.max(p[1])),
        )
    }

    pub fn reversed(&self) -> Self {
        let mut points = self.points.clone();
        points.reverse();
        Self { points, closed: self.closed }
    }
}

const RING: [(isize, isize); 8] = [(-1, -1), (-1, 0), (-1, 1), (0, 1), (1, 1), (1, 0), (1, -1), (0, -1)];

fn neighbours(bw: &BinaryImage, r: usize, c: usize) -> Vec<(usize, usize)> {
    RING.iter()
        .filter(|&&(dr, dc)| bw.get_or_zero(r as isize + dr, c as isize + dc))
        .map(|&(dr, dc)| ((r as isize + dr) as usize, (c as isize + dc) as usize))
        .collect()
}

// A pixel whose set neighbours all touch each other can go without changing
// 8-connectivity; this removes the corner pixels of staircase steps.
fn redundant(bw: &BinaryImage, r: usize, c: usize) -> bool {
    let nb = neighbours(bw, r, c);
    if nb.len() < 2 || nb.len() > 3 {
        return false;
    }
    let adjacent = |a: (usize, usize), b: (usize, usize)| {
        a.0.abs_diff(b.0) <= 1 && a.1.abs_diff(b.1) <= 1
    };
    let mut reached = vec![false; nb.len()];
    reached[0] = true;
    let mut stack = vec![0];
    while let Some(i) = stack.pop() {
        for j in 0..nb.len() {
            if !reached[j] && adjacent(nb[i], nb[j]) {
                reached[j] = true;
                stack.push(j);
            }
        }
    }
    reached.iter().all(|&x| x)
}

fn thin(bw: &BinaryImage) -> BinaryImage {
    let mut out = bw.clone();
    loop {
        let mut changed = false;
        for (r, c) in out.ones() {
            if redundant(&out, r, c) {
                out.set(r, c, false);
                changed = true;
            }
        }
        if !changed {
            return out;
        }
    }
}

/// Trace 8-connected edge chains. Pixels with three or more neighbours are
/// branch points: they are removed so each branch becomes its own chain.
/// Chains shorter than `min_len` are dropped.
pub fn link_edges(edges: &BinaryImage, min_len: usize) -> Vec<Contour> {
    let thinned = thin(edges);
    let (rows, cols) = thinned.dims();
    let mut chains = thinned.clone();
    for (r, c) in thinned.ones() {
        if neighbours(&thinned, r, c).len() >= 3 {
            chains.set(r, c, false);
        }
    }
    let mut seen = vec![false; rows * cols];
    let mut out = Vec::new();
    let trace = |start: (usize, usize), seen: &mut Vec<bool>| {
        let mut pts = Vec::new();
        let mut cur = start;
        loop {
            seen[cur.0 * cols + cur.1] = true;
            pts.push([cur.1 as f64, cur.0 as f64]);
            match neighbours(&chains, cur.0, cur.1)
                .into_iter()
                .find(|&(r, c)| !seen[r * cols + c])
            {
                Some(next) => cur = next,
                None => break,
            }
        }
        let closed = pts.len() >= 3 && {
            let (a, b) = (pts[0], pts[pts.len() - 1]);
            (a[0] - b[0]).abs() <= 1.0 && (a[1] - b[1]).abs() <= 1.0
        };
        Contour { points: pts, closed }
    };
    // open chains start at their ends
    for (r, c) in chains.ones() {
        if !seen[r * cols + c] && neighbours(&chains, r, c).len() <= 1 {
            let ch = trace((r, c), &mut seen);
            out.push(Contour { closed: false, ..ch });
        }
    }
    // whatever remains lies on cycles
    for (r, c) in chains.ones() {
        if !seen[r * cols + c] {
            out.push(trace((r, c), &mut seen));
        }
    }
    out.retain(|ch| ch.len() >= min_len);
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::image::{draw_ellipse, GrayImage};

    #[test]
    fn empty_map() {
        assert!(link_edges(&BinaryImage::new(10, 10), 2).is_empty());
    }

    #[test]
    fn straight_line() {
        let bw = BinaryImage::from_fn(20, 20, |r, c| r == 5 && (3..13).contains(&c));
        let out = link_edges(&bw, 5);
        assert_eq!(out.len(), 1);
        assert_eq!(out[0].len(), 10);
        assert!(!out[0].closed);
    }

    #[test]
    fn plus_splits_into_four() {
        let bw = BinaryImage::from_fn(31, 31, |r, c| (r == 15 && (3..28).contains(&c)) || (c == 15 && (3..28).contains(&r)));
        let out = link_edges(&bw, 5);
        assert_eq!(out.len(), 4);
        assert!(out.iter().all(|ch| !ch.closed && ch.len() >= 10));
    }

    #[test]
    fn circle_is_one_closed_chain() {
        let mut img = GrayImage::new(80, 80);
        draw_ellipse(&mut img, 40.0, 40.0, 25.0, 25.0, 0.0, 1.0);
        let out = link_edges(&BinaryImage::threshold(&img, 0.5), 10);
        assert_eq!(out.len(), 1);
        assert!(out[0].closed);
        for p in &out[0].points {
            assert!(((p[0] - 40.0).hypot(p[1] - 40.0) - 25.0).abs() < 1.0);
        }
        // consecutive points stay 8-adjacent
        for w in out[0].points.windows(2) {
            assert!((w[0][0] - w[1][0]).abs() <= 1.0 && (w[0][1] - w[1][1]).abs() <= 1.0);
        }
    }

    #[test]
    fn short_chains_dropped() {
        let bw = BinaryImage::from_fn(10, 10, |r, c| r == 2 && c < 3);
        assert!(link_edges(&bw, 4).is_empty());
        assert_eq!(link_edges(&bw, 3).len(), 1);
    }
}
