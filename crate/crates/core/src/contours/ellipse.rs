use nalgebra::{Matrix3, Vector3};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::Point;

/// Ellipse with centre `(cx, cy)`, semi-axes `a ≥ b`, and `theta` the angle
/// of the `a` axis from the x axis in `(−π/2, π/2]`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Ellipse {
    pub cx: f64,
    pub cy: f64,
    pub a: f64,
    pub b: f64,
    pub theta: f64,
    /// RMS Sampson distance of the fitted points, in px.
    pub fit_error: f64,
    /// Number of contour points the ellipse was fitted to.
    #[serde(default)]
    pub support: usize,
}

/// Conic `A x² + B xy + C y² + D x + E y + F = 0`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Conic(pub [f64; 6]);

impl Conic {
    /// `B² − 4AC`; negative for ellipses.
    pub fn discriminant(&self) -> f64 {
        let [a, b, c, ..] = self.0;
        b * b - 4.0 * a * c
    }

    pub fn eval(&self, p: Point) -> f64 {
        let [a, b, c, d, e, f] = self.0;
        let (x, y) = (p[0], p[1]);
        a * x * x + b * x * y + c * y * y + d * x + e * y + f
    }

    /// First-order geometric distance `|Q(p)| / |∇Q(p)|`.
    pub fn sampson_distance(&self, p: Point) -> f64 {
        let [a, b, c, d, e, _] = self.0;
        let (x, y) = (p[0], p[1]);
        let gx = 2.0 * a * x + b * y + d;
        let gy = b * x + 2.0 * c * y + e;
        let g = gx.hypot(gy);
        if g == 0.0 {
            self.eval(p).abs()
        } else {
            self.eval(p).abs() / g
        }
    }

    pub fn to_ellipse(&self) -> Result<Ellipse> {
        let [a, b, c, d, e, f] = self.0;
        let det = 4.0 * a * c - b * b;
        if !(det > 0.0) {
            return Err(Error::FitFailure("conic is not an ellipse".into()));
        }
        let cx = (b * e - 2.0 * c * d) / det;
        let cy = (b * d - 2.0 * a * e) / det;
        let f0 = f + (d * cx + e * cy) / 2.0;
        // eigen-decomposition of [[a, b/2], [b/2, c]]
        let mean = (a + c) / 2.0;
        let r = ((a - c) / 2.0).hypot(b / 2.0);
        let (l1, l2) = (mean - r, mean + r);
        if !(-f0 / l1 > 0.0 && -f0 / l2 > 0.0) {
            return Err(Error::FitFailure("conic has no real points".into()));
        }
        // the smaller eigenvalue belongs to the major axis
        let major = (-f0 / l1).sqrt();
        let minor = (-f0 / l2).sqrt();
        let mut theta = if b == 0.0 && a <= c {
            0.0
        } else if b == 0.0 {
            std::f64::consts::FRAC_PI_2
        } else {
            (l1 - a).atan2(b / 2.0)
        };
        theta = normalize_angle(theta);
        Ok(Ellipse {
            cx,
            cy,
            a: major,
            b: minor,
            theta,
            fit_error: 0.0,
            support: 0,
        })
    }
}

fn normalize_angle(mut t: f64) -> f64 {
    use std::f64::consts::PI;
    while t > PI / 2.0 {
        t -= PI;
    }
    while t <= -PI / 2.0 {
        t += PI;
    }
    t
}

impl Ellipse {
    /// Conic with unit-norm quadratic part, so Sampson distances are in px.
    pub fn conic(&self) -> Conic {
        let (s, c) = self.theta.sin_cos();
        let (ia, ib) = (1.0 / (self.a * self.a), 1.0 / (self.b * self.b));
        let qa = c * c * ia + s * s * ib;
        let qb = 2.0 * s * c * (ia - ib);
        let qc = s * s * ia + c * c * ib;
        let qd = -2.0 * qa * self.cx - qb * self.cy;
        let qe = -qb * self.cx - 2.0 * qc * self.cy;
        let qf = qa * self.cx * self.cx + qb * self.cx * self.cy + qc * self.cy * self.cy - 1.0;
        Conic([qa, qb, qc, qd, qe, qf])
    }

    /// RMS Sampson distance of `points` to this ellipse.
    pub fn rms_distance(&self, points: &[Point]) -> f64 {
        let q = self.conic();
        (points.iter().map(|&p| q.sampson_distance(p).powi(2)).sum::<f64>() / points.len() as f64).sqrt()
    }

    /// Ramanujan's perimeter approximation.
    pub fn perimeter(&self) -> f64 {
        let h = ((self.a - self.b) / (self.a + self.b)).powi(2);
        std::f64::consts::PI * (self.a + self.b) * (1.0 + 3.0 * h / (10.0 + (4.0 - 3.0 * h).sqrt()))
    }

    pub fn contains(&self, p: Point) -> bool {
        let (s, c) = self.theta.sin_cos();
        let (dx, dy) = (p[0] - self.cx, p[1] - self.cy);
        let (u, v) = (dx * c + dy * s, -dx * s + dy * c);
        (u / self.a).powi(2) + (v / self.b).powi(2) <= 1.0
    }
}

// Null vector of a rank-2 3×3 matrix: the largest cross product of two rows.
fn null_vector(m: &Matrix3<f64>) -> Vector3<f64> {
    let rows = [m.row(0).transpose(), m.row(1).transpose(), m.row(2).transpose()];
    [(0, 1), (0, 2), (1, 2)]
        .iter()
        .map(|&(i, j)| rows[i].cross(&rows[j]))
        .max_by(|u, v| u.norm_squared().total_cmp(&v.norm_squared()))
        .expect("three pairs")
}

/// Least-squares conic under the constraint `4AC − B² = 1`, so the result is
/// always an ellipse. Points are centred and scaled before fitting.
pub fn fit_conic_direct(points: &[Point]) -> Result<Conic> {
    if points.len() < 6 {
        return Err(Error::FitFailure(format!("need at least 6 points, got {}", points.len())));
    }
    let n = points.len() as f64;
    let mx = points.iter().map(|p| p[0]).sum::<f64>() / n;
    let my = points.iter().map(|p| p[1]).sum::<f64>() / n;
    let spread = (points.iter().map(|p| (p[0] - mx).powi(2) + (p[1] - my).powi(2)).sum::<f64>() / n).sqrt();
    if !(spread > 0.0) {
        return Err(Error::FitFailure("points coincide".into()));
    }
    let s = spread / std::f64::consts::SQRT_2;

    let (mut s1, mut s2, mut s3) = (Matrix3::zeros(), Matrix3::zeros(), Matrix3::zeros());
    for p in points {
        let (x, y) = ((p[0] - mx) / s, (p[1] - my) / s);
        let d1 = Vector3::new(x * x, x * y, y * y);
        let d2 = Vector3::new(x, y, 1.0);
        s1 += d1 * d1.transpose();
        s2 += d1 * d2.transpose();
        s3 += d2 * d2.transpose();
    }
    let s3_inv = s3
        .try_inverse()
        .filter(|_| s3.determinant().abs() > 1e-10 * n.powi(3))
        .ok_or_else(|| Error::FitFailure("points are collinear".into()))?;
    let t = -s3_inv * s2.transpose();
    let m = s1 + s2 * t;
    // premultiply by the inverse of the 3×3 constraint matrix
    let mc = Matrix3::from_rows(&[m.row(2) / 2.0, -m.row(1), m.row(0) / 2.0]);
    let scale = m.norm().max(f64::MIN_POSITIVE);

    let mut best: Option<(f64, Vector3<f64>)> = None;
    for ev in mc.complex_eigenvalues().iter() {
        if ev.im.abs() > 1e-9 * scale {
            continue;
        }
        let v = null_vector(&(mc - Matrix3::identity() * ev.re));
        let cond = 4.0 * v[0] * v[2] - v[1] * v[1];
        if cond > 0.0 {
            let v = v / cond.sqrt();
            // the constrained minimum has the smallest residual vᵀMv
            let cost = (v.transpose() * m * v)[0];
            if best.as_ref().is_none_or(|(c, _)| cost < *c) {
                best = Some((cost, v));
            }
        }
    }
    let (_, a1) = best.ok_or_else(|| Error::FitFailure("no elliptical solution".into()))?;
    let a2 = t * a1;
    let [qa, qb, qc] = [a1[0], a1[1], a1[2]];
    let [qd, qe, qf] = [a2[0], a2[1], a2[2]];
    // undo x' = (x − mx)/s, y' = (y − my)/s
    let (s2_, s1_) = (s * s, s);
    let a = qa / s2_;
    let b = qb / s2_;
    let c = qc / s2_;
    let d = -2.0 * qa * mx / s2_ - qb * my / s2_ + qd / s1_;
    let e = -qb * mx / s2_ - 2.0 * qc * my / s2_ + qe / s1_;
    let f = qa * mx * mx / s2_ + qb * mx * my / s2_ + qc * my * my / s2_ - qd * mx / s1_ - qe * my / s1_ + qf;
    let conic = Conic([a, b, c, d, e, f]);
    if conic.0.iter().any(|v| !v.is_finite()) {
        return Err(Error::FitFailure("non-finite conic".into()));
    }
    Ok(conic)
}

/// Direct least-squares ellipse fit with its RMS Sampson error.
pub fn fit_ellipse_direct(points: &[Point]) -> Result<Ellipse> {
    let mut e = fit_conic_direct(points)?.to_ellipse()?;
    e.fit_error = e.rms_distance(points);
    e.support = points.len();
    Ok(e)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::image::ellipse_points;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn exact_samples_recovered() {
        let pts = ellipse_points(50.0, 40.0, 20.0, 10.0, 0.3, 40);
        let e = fit_ellipse_direct(&pts).unwrap();
        for (got, want) in [(e.cx, 50.0), (e.cy, 40.0), (e.a, 20.0), (e.b, 10.0), (e.theta, 0.3)] {
            assert!((got - want).abs() <= 1e-6 * want, "{got} vs {want}");
        }
        assert!(e.fit_error < 1e-9);
        assert_eq!(e.support, 40);
    }

    #[test]
    fn conic_round_trip() {
        let e = Ellipse { cx: -3.0, cy: 7.0, a: 9.0, b: 2.0, theta: -1.2, fit_error: 0.0, support: 0 };
        let back = e.conic().to_ellipse().unwrap();
        for (x, y) in [(back.cx, e.cx), (back.cy, e.cy), (back.a, e.a), (back.b, e.b), (back.theta, e.theta)] {
            assert!((x - y).abs() < 1e-10);
        }
        let circle = Ellipse { theta: 0.0, a: 5.0, b: 5.0, ..e };
        assert!((circle.conic().to_ellipse().unwrap().a - 5.0).abs() < 1e-12);
    }

    #[test]
    fn collinear_and_short_inputs_fail() {
        let line: Vec<Point> = (0..6).map(|i| [i as f64, 2.0 * i as f64 + 1.0]).collect();
        assert!(matches!(fit_ellipse_direct(&line), Err(Error::FitFailure(_))));
        assert!(fit_ellipse_direct(&line[..5]).is_err());
    }

    #[test]
    fn sampson_distance_is_radial_for_circles() {
        let e = Ellipse { cx: 0.0, cy: 0.0, a: 10.0, b: 10.0, theta: 0.0, fit_error: 0.0, support: 0 };
        assert!((e.conic().sampson_distance([10.5, 0.0]) - 0.5).abs() < 0.02);
    }

    #[test]
    fn random_sets_fit_ellipses_only() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        for _ in 0..300 {
            let n = rng.random_range(6..30);
            let pts: Vec<Point> = (0..n).map(|_| [rng.random_range(0.0..100.0), rng.random_range(0.0..100.0)]).collect();
            if let Ok(c) = fit_conic_direct(&pts) {
                assert!(c.discriminant() < 0.0);
            }
        }
    }
}
