use super::link::Contour;
use crate::Point;

/// Turning angle (π minus the k-cosine angle) at every point that has a
/// k-th predecessor and successor; closed contours wrap around.
pub fn kcosine_turning(c: &Contour, k: usize) -> Vec<Option<f64>> {
    let n = c.len();
    let p = &c.points;
    (0..n)
        .map(|i| {
            let (prev, next) = if c.closed {
                if n < 2 * k + 1 {
                    return None;
                }
                ((i + n - k) % n, (i + k) % n)
            } else {
                if i < k || i + k >= n {
                    return None;
                }
                (i - k, i + k)
            };
            let a = [p[prev][0] - p[i][0], p[prev][1] - p[i][1]];
            let b = [p[next][0] - p[i][0], p[next][1] - p[i][1]];
            let na = a[0].hypot(a[1]);
            let nb = b[0].hypot(b[1]);
            if na == 0.0 || nb == 0.0 {
                return Some(0.0);
            }
            let cos = ((a[0] * b[0] + a[1] * b[1]) / (na * nb)).clamp(-1.0, 1.0);
            Some(std::f64::consts::PI - cos.acos())
        })
        .collect()
}

/// Split at the turning-angle maximum of every run of points whose turning
/// exceeds `angle_thresh`. The split point ends the earlier piece, so the
/// pieces concatenate back to the input. Contours shorter than `2k+1` are
/// returned unsplit.
pub fn split_kcosines(c: &Contour, k: usize, angle_thresh: f64) -> Vec<Contour> {
    let n = c.len();
    if k == 0 || n < 2 * k + 1 {
        return vec![c.clone()];
    }
    let turn = kcosine_turning(c, k);
    let high = |i: usize| turn[i].is_some_and(|t| t > angle_thresh);
    let mut cuts = Vec::new();
    let mut i = 0;
    // on closed contours, start scanning at a point below threshold so no
    // run is cut in half by the wrap
    let start = if c.closed {
        match (0..n).find(|&j| !high(j)) {
            Some(j) => j,
            None => return vec![c.clone()],
        }
    } else {
        0
    };
    while i < n {
        let j = (start + i) % n;
        if high(j) {
            let mut best = j;
            while i < n && high((start + i) % n) {
                let q = (start + i) % n;
                if turn[q] > turn[best] {
                    best = q;
                }
                i += 1;
            }
            cuts.push(best);
        } else {
            i += 1;
        }
    }
    if cuts.is_empty() {
        return vec![c.clone()];
    }
    cuts.sort_unstable();
    if !c.closed {
        let mut out = Vec::new();
        let mut from = 0;
        for &cut in &cuts {
            out.push(Contour::open(c.points[from..=cut].to_vec()));
            from = cut + 1;
        }
        if from < n {
            out.push(Contour::open(c.points[from..].to_vec()));
        }
        return out;
    }
    // closed: pieces run from one cut (exclusive) to the next (inclusive)
    let mut out = Vec::new();
    for (idx, &cut) in cuts.iter().enumerate() {
        let next = cuts[(idx + 1) % cuts.len()];
        let mut pts: Vec<Point> = Vec::new();
        let mut q = (cut + 1) % n;
        loop {
            pts.push(c.points[q]);
            if q == next {
                break;
            }
            q = (q + 1) % n;
        }
        out.push(Contour::open(pts));
    }
    out
}

/// Moving-average smoothing of the first and last `m` points of an open
/// contour, with windows truncated at the ends. Straightens the hooks left
/// at break points.
pub fn smooth_contour_ends(c: &Contour, m: usize) -> Contour {
    let n = c.len();
    if c.closed || n < 3 || m == 0 {
        return c.clone();
    }
    let half = m.min((n - 1) / 2).max(1);
    let avg = |i: usize| {
        let lo = i.saturating_sub(half);
        let hi = (i + half).min(n - 1);
        let k = (hi - lo + 1) as f64;
        let (sx, sy) = c.points[lo..=hi].iter().fold((0.0, 0.0), |(x, y), p| (x + p[0], y + p[1]));
        [sx / k, sy / k]
    };
    let mut points = c.points.clone();
    for i in (1..m.min(n)).chain(n.saturating_sub(m)..n - 1) {
        points[i] = avg(i);
    }
    Contour { points, closed: false }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::image::ellipse_points;

    #[test]
    fn straight_line_not_split() {
        let c = Contour::open((0..30).map(|i| [i as f64, 3.0]).collect());
        assert_eq!(split_kcosines(&c, 4, 60f64.to_radians()).len(), 1);
    }

    #[test]
    fn right_angle_split_at_corner() {
        let mut pts: Vec<Point> = (0..15).map(|i| [i as f64, 0.0]).collect();
        pts.extend((1..16).map(|i| [14.0, i as f64]));
        let c = Contour::open(pts.clone());
        let parts = split_kcosines(&c, 4, 60f64.to_radians());
        assert_eq!(parts.len(), 2);
        let cut = parts[0].len() - 1;
        assert!(cut.abs_diff(14) <= 1);
        let joined: Vec<Point> = parts.iter().flat_map(|p| p.points.clone()).collect();
        assert_eq!(joined, pts);
    }

    #[test]
    fn circle_not_split() {
        let c = Contour { points: ellipse_points(50.0, 50.0, 30.0, 30.0, 0.0, 188), closed: true };
        assert_eq!(split_kcosines(&c, 4, 60f64.to_radians()), vec![c]);
    }

    #[test]
    fn closed_square_splits_into_sides() {
        let mut pts = Vec::new();
        for i in 0..20 {
            pts.push([i as f64, 0.0]);
        }
        for i in 0..20 {
            pts.push([20.0, i as f64]);
        }
        for i in 0..20 {
            pts.push([20.0 - i as f64, 20.0]);
        }
        for i in 0..20 {
            pts.push([0.0, 20.0 - i as f64]);
        }
        let c = Contour { points: pts.clone(), closed: true };
        let parts = split_kcosines(&c, 4, 60f64.to_radians());
        assert_eq!(parts.len(), 4);
        let mut all: Vec<Point> = parts.iter().flat_map(|p| p.points.clone()).collect();
        let mut orig = pts;
        let key = |p: &Point| (p[0] as i64, p[1] as i64);
        all.sort_by_key(key);
        orig.sort_by_key(key);
        assert_eq!(all, orig);
    }

    #[test]
    fn short_contour_returned_unsplit() {
        let c = Contour::open(vec![[0.0, 0.0], [1.0, 0.0], [1.0, 1.0]]);
        assert_eq!(split_kcosines(&c, 4, 0.1), vec![c]);
    }

    #[test]
    fn end_smoothing_keeps_endpoints_and_middle() {
        let mut pts: Vec<Point> = (0..20).map(|i| [i as f64, 0.0]).collect();
        pts[1] = [1.0, 3.0];
        let c = Contour::open(pts.clone());
        let s = smooth_contour_ends(&c, 4);
        assert_eq!(s.points[0], pts[0]);
        assert_eq!(s.points[10], pts[10]);
        assert!(s.points[1][1] < 3.0);
    }
}
