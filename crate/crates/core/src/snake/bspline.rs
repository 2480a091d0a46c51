use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::Point;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Snake {
    pub x: Vec<f64>,
    pub y: Vec<f64>,
}

impl Snake {
    pub fn from_points(pts: &[Point]) -> Self {
        Self {
            x: pts.iter().map(|p| p[0]).collect(),
            y: pts.iter().map(|p| p[1]).collect(),
        }
    }

    pub fn len(&self) -> usize {
        self.x.len()
    }

    pub fn is_empty(&self) -> bool {
        self.x.is_empty()
    }

    pub fn points(&self) -> Vec<Point> {
        self.x.iter().zip(&self.y).map(|(&x, &y)| [x, y]).collect()
    }

    /// Closed polyline length.
    pub fn perimeter(&self) -> f64 {
        let n = self.len();
        (0..n)
            .map(|i| {
                let j = (i + 1) % n;
                (self.x[j] - self.x[i]).hypot(self.y[j] - self.y[i])
            })
            .sum()
    }

    pub fn map(&self, f: impl Fn(Point) -> Point) -> Self {
        Self::from_points(&self.points().into_iter().map(f).collect::<Vec<_>>())
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SplineMode {
    /// The curve passes through every given point.
    #[default]
    Interpolating,
    /// The given points are the control polygon; the curve stays inside
    /// its convex hull.
    Approximating,
}

fn basis(t: f64) -> [f64; 4] {
    let t2 = t * t;
    let t3 = t2 * t;
    [
        (1.0 - t).powi(3) / 6.0,
        (3.0 * t3 - 6.0 * t2 + 4.0) / 6.0,
        (-3.0 * t3 + 3.0 * t2 + 3.0 * t + 1.0) / 6.0,
        t3 / 6.0,
    ]
}

// Control points whose closed uniform cubic B-spline passes through `pts`
// at the integer parameters: (d[i−1] + 4 d[i] + d[i+1]) / 6 = p[i].
fn interpolating_controls(pts: &[Point]) -> Result<Vec<Point>> {
    let m = pts.len();
    let mut a = DMatrix::<f64>::zeros(m, m);
    for i in 0..m {
        a[(i, (i + m - 1) % m)] += 1.0 / 6.0;
        a[(i, i)] += 4.0 / 6.0;
        a[(i, (i + 1) % m)] += 1.0 / 6.0;
    }
    let lu = a.lu();
    let solve = |k: usize| {
        lu.solve(&DVector::from_iterator(m, pts.iter().map(|p| p[k])))
            .ok_or_else(|| Error::Degenerate("spline interpolation system is singular".into()))
    };
    let (xs, ys) = (solve(0)?, solve(1)?);
    Ok((0..m).map(|i| [xs[i], ys[i]]).collect())
}

/// Closed uniform cubic B-spline over the cyclic point sequence, sampled at
/// `n_samples` equally spaced parameter values.
pub fn bspline_closed(pts: &[Point], n_samples: usize, mode: SplineMode) -> Result<Snake> {
    if pts.len() < 4 {
        return Err(Error::param(format!("closed spline needs at least 4 points, got {}", pts.len())));
    }
    if n_samples < 4 {
        return Err(Error::param("a snake needs at least 4 samples"));
    }
    let ctrl = match mode {
        SplineMode::Interpolating => interpolating_controls(pts)?,
        SplineMode::Approximating => pts.to_vec(),
    };
    let m = ctrl.len();
    let samples: Vec<Point> = (0..n_samples)
        .map(|j| {
            let u = j as f64 * m as f64 / n_samples as f64;
            let seg = u.floor() as usize;
            let w = basis(u - seg as f64);
            // segment `seg` runs from the knot at control seg to seg+1
            let mut p = [0.0, 0.0];
            for (k, wk) in w.iter().enumerate() {
                let c = ctrl[(seg + m + k - 1) % m];
                p[0] += wk * c[0];
                p[1] += wk * c[1];
            }
            p
        })
        .collect();
    Ok(Snake::from_points(&samples))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::image::{ellipse_points, point_in_polygon};

    #[test]
    fn too_few_points() {
        assert!(bspline_closed(&[[0.0, 0.0]; 3], 20, SplineMode::Interpolating).is_err());
    }

    #[test]
    fn curve_is_closed() {
        let pts = [[0.0, 0.0], [10.0, 0.0], [12.0, 9.0], [3.0, 14.0], [-2.0, 6.0]];
        for mode in [SplineMode::Interpolating, SplineMode::Approximating] {
            let s = bspline_closed(&pts, 50, mode).unwrap();
            let p = s.points();
            let gap = |a: Point, b: Point| (a[0] - b[0]).hypot(a[1] - b[1]);
            let max_gap = p.windows(2).map(|w| gap(w[0], w[1])).fold(0.0, f64::max);
            assert!(gap(p[49], p[0]) <= max_gap + 1e-12);
        }
    }

    #[test]
    fn approximating_square_stays_in_hull() {
        let sq = [[0.0, 0.0], [20.0, 0.0], [20.0, 20.0], [0.0, 20.0]];
        let s = bspline_closed(&sq, 64, SplineMode::Approximating).unwrap();
        for p in s.points() {
            assert!(point_in_polygon(p, &sq));
        }
    }

    #[test]
    fn interpolating_passes_through_points() {
        let pts = ellipse_points(50.0, 50.0, 30.0, 30.0, 0.0, 12);
        let s = bspline_closed(&pts, 120, SplineMode::Interpolating).unwrap();
        for (i, p) in pts.iter().enumerate() {
            assert!((s.x[i * 10] - p[0]).abs() < 1e-9 && (s.y[i * 10] - p[1]).abs() < 1e-9);
        }
        for p in s.points() {
            let r = (p[0] - 50.0).hypot(p[1] - 50.0);
            assert!((r - 30.0).abs() < 0.03 * 30.0);
        }
    }
}
