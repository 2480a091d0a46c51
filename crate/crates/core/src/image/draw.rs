use super::{round_half_away, BinaryImage, GrayImage};
use crate::Point;

fn plot(img: &mut GrayImage, x: isize, y: isize, value: f64) {
    if x >= 0 && y >= 0 && (x as usize) < img.cols() && (y as usize) < img.rows() {
        img.set(y as usize, x as usize, value);
    }
}

// Bresenham line between integer endpoints.
fn line(img: &mut GrayImage, (x0, y0): (isize, isize), (x1, y1): (isize, isize), value: f64) {
    let (dx, dy) = ((x1 - x0).abs(), -(y1 - y0).abs());
    let (sx, sy) = (if x0 < x1 { 1 } else { -1 }, if y0 < y1 { 1 } else { -1 });
    let (mut x, mut y, mut err) = (x0, y0, dx + dy);
    loop {
        plot(img, x, y, value);
        if x == x1 && y == y1 {
            break;
        }
        let e2 = 2 * err;
        if e2 >= dy {
            err += dy;
            x += sx;
        }
        if e2 <= dx {
            err += dx;
            y += sy;
        }
    }
}

fn to_pixel(p: Point) -> (isize, isize) {
    (round_half_away(p[0]) as isize, round_half_away(p[1]) as isize)
}

/// Rasterize `(x, y)` points as a connected polyline; `closed` joins the last
/// point back to the first.
pub fn draw_polyline(img: &mut GrayImage, pts: &[Point], closed: bool, value: f64) {
    if pts.is_empty() {
        return;
    }
    for w in pts.windows(2) {
        line(img, to_pixel(w[0]), to_pixel(w[1]), value);
    }
    if closed || pts.len() == 1 {
        line(img, to_pixel(pts[pts.len() - 1]), to_pixel(pts[0]), value);
    }
}

/// Points on the ellipse with centre `(cx, cy)`, semi-axes `a` (along
/// `theta`) and `b`.
pub fn ellipse_points(cx: f64, cy: f64, a: f64, b: f64, theta: f64, n: usize) -> Vec<Point> {
    let (s, c) = theta.sin_cos();
    (0..n)
        .map(|i| {
            let t = 2.0 * std::f64::consts::PI * i as f64 / n as f64;
            let (x, y) = (a * t.cos(), b * t.sin());
            [cx + x * c - y * s, cy + x * s + y * c]
        })
        .collect()
}

/// Rasterize an ellipse outline.
pub fn draw_ellipse(img: &mut GrayImage, cx: f64, cy: f64, a: f64, b: f64, theta: f64, value: f64) {
    let n = ((2.0 * std::f64::consts::PI * a.max(b)).ceil() as usize * 2).max(16);
    draw_polyline(img, &ellipse_points(cx, cy, a, b, theta, n), true, value);
}

/// Even-odd point-in-polygon test.
pub fn point_in_polygon(p: Point, poly: &[Point]) -> bool {
    let mut inside = false;
    let n = poly.len();
    for i in 0..n {
        let (a, b) = (poly[i], poly[(i + n - 1) % n]);
        if (a[1] > p[1]) != (b[1] > p[1]) {
            let x = a[0] + (p[1] - a[1]) * (b[0] - a[0]) / (b[1] - a[1]);
            if p[0] < x {
                inside = !inside;
            }
        }
    }
    inside
}

/// Pixels whose centres lie inside the polygon.
pub fn fill_polygon(rows: usize, cols: usize, poly: &[Point]) -> BinaryImage {
    BinaryImage::from_fn(rows, cols, |r, c| point_in_polygon([c as f64, r as f64], poly))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn polyline_is_connected() {
        let mut img = GrayImage::new(20, 20);
        draw_polyline(&mut img, &[[1.0, 1.0], [15.0, 7.0], [3.0, 18.0]], true, 1.0);
        let bw = BinaryImage::threshold(&img, 0.5);
        assert_eq!(crate::image::label_regions(&bw, None).len(), 1);
        assert_eq!(img.get(1, 1), 1.0);
        assert_eq!(img.get(7, 15), 1.0);
    }

    #[test]
    fn polygon_fill_square() {
        let sq = [[2.0, 2.0], [7.0, 2.0], [7.0, 7.0], [2.0, 7.0]];
        let bw = fill_polygon(10, 10, &sq);
        assert!(bw.get(4, 4));
        assert!(!bw.get(8, 8));
        assert!(point_in_polygon([5.0, 5.0], &sq));
        assert!(!point_in_polygon([0.0, 5.0], &sq));
    }

    #[test]
    fn ellipse_outline_distance() {
        let mut img = GrayImage::new(60, 80);
        draw_ellipse(&mut img, 40.0, 30.0, 25.0, 15.0, 0.0, 1.0);
        for r in 0..60 {
            for c in 0..80 {
                if img.get(r, c) > 0.0 {
                    let v = ((c as f64 - 40.0) / 25.0).powi(2) + ((r as f64 - 30.0) / 15.0).powi(2);
                    assert!((v.sqrt() - 1.0).abs() < 0.1);
                }
            }
        }
    }
}
