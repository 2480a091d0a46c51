use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::image::{gaussian_smooth, gradient, BinaryImage, GrayImage};

#[derive(Clone, Debug, PartialEq)]
pub struct VectorField {
    pub u: GrayImage,
    pub v: GrayImage,
}

impl VectorField {
    pub fn dims(&self) -> (usize, usize) {
        self.u.dims()
    }

    /// Bilinear sample at `(x, y)` with edge clamping.
    pub fn sample(&self, x: f64, y: f64) -> (f64, f64) {
        (self.u.sample_bilinear(x, y), self.v.sample_bilinear(x, y))
    }

    /// Unit vectors; zero vectors stay zero.
    pub fn normalized(&self) -> Self {
        let (rows, cols) = self.dims();
        let mut u = GrayImage::new(rows, cols);
        let mut v = GrayImage::new(rows, cols);
        for r in 0..rows {
            for c in 0..cols {
                let (a, b) = (self.u.get(r, c), self.v.get(r, c));
                let m = a.hypot(b);
                if m > 0.0 {
                    u.set(r, c, a / m);
                    v.set(r, c, b / m);
                }
            }
        }
        Self { u, v }
    }
}

/// Edge map smoothed with a unit Gaussian and scaled into `[0, 1]`.
pub fn edge_potential(edges: &BinaryImage) -> Result<GrayImage> {
    let f = gaussian_smooth(&edges.to_gray().map(|v| if v > 0.0 { 1.0 } else { 0.0 }), 1.0)?;
    let (_, max) = f.min_max();
    Ok(if max > 0.0 { f.map(|v| v / max) } else { f })
}

/// Gradient of the edge potential; points towards nearby edges.
pub fn potential_field(edges: &BinaryImage) -> Result<VectorField> {
    let f = edge_potential(edges)?;
    let (u, v) = gradient(&f);
    Ok(VectorField { u, v })
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GgvfParams {
    /// Smoothness/conformity trade-off in `k = exp(−|∇f|/K)`.
    pub k: f64,
    pub iterations: usize,
}

impl Default for GgvfParams {
    fn default() -> Self {
        Self { k: 0.004, iterations: 60 }
    }
}

/// Weights `(k, h)` of the diffusion and data terms; `h = 1 − k`.
pub fn ggvf_weights(grad_mag: f64, k_param: f64) -> (f64, f64) {
    let k = (-grad_mag / k_param).exp();
    (k, 1.0 - k)
}

// `Σ(4 neighbours)/4 − u` with replicated borders.
fn del2(img: &GrayImage) -> GrayImage {
    GrayImage::from_fn(img.rows(), img.cols(), |r, c| {
        let (r, c) = (r as isize, c as isize);
        (img.get_clamped(r - 1, c) + img.get_clamped(r + 1, c) + img.get_clamped(r, c - 1) + img.get_clamped(r, c + 1))
            / 4.0
            - img.get_clamped(r, c)
    })
}

/// Generalized gradient vector flow: starting from the potential field,
/// iterate `u ← u + k·∇²u − h·(u − f_x)` (and likewise `v`). The Laplacian
/// is the neighbour average minus the centre, so `k ≤ 1` keeps the explicit
/// scheme stable.
pub fn ggvf(edges: &BinaryImage, p: &GgvfParams) -> Result<VectorField> {
    if !(p.k > 0.0) {
        return Err(Error::param(format!("GGVF K must be positive, got {}", p.k)));
    }
    let f = edge_potential(edges)?;
    let (fx, fy) = gradient(&f);
    let (rows, cols) = f.dims();
    let mut kw = GrayImage::new(rows, cols);
    let mut hw = GrayImage::new(rows, cols);
    for r in 0..rows {
        for c in 0..cols {
            let (k, h) = ggvf_weights(fx.get(r, c).hypot(fy.get(r, c)), p.k);
            debug_assert!((0.0..=1.0).contains(&k));
            kw.set(r, c, k);
            hw.set(r, c, h);
        }
    }
    let (mut u, mut v) = (fx.clone(), fy.clone());
    for it in 0..p.iterations {
        let (lu, lv) = (del2(&u), del2(&v));
        for i in 0..rows * cols {
            let (k, h) = (kw.pixels()[i], hw.pixels()[i]);
            let un = u.pixels()[i] + k * lu.pixels()[i] - h * (u.pixels()[i] - fx.pixels()[i]);
            let vn = v.pixels()[i] + k * lv.pixels()[i] - h * (v.pixels()[i] - fy.pixels()[i]);
            if !un.is_finite() || !vn.is_finite() {
                return Err(Error::Divergence { iteration: it + 1 });
            }
            u.pixels_mut()[i] = un;
            v.pixels_mut()[i] = vn;
        }
    }
    Ok(VectorField { u, v })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::image::draw_ellipse;

    fn circle_edges(n: usize, r: f64) -> BinaryImage {
        let mut img = GrayImage::new(n, n);
        let c = (n / 2) as f64;
        draw_ellipse(&mut img, c, c, r, r, 0.0, 1.0);
        BinaryImage::threshold(&img, 0.5)
    }

    #[test]
    fn empty_map_gives_zero_fields() {
        let bw = BinaryImage::new(20, 20);
        let pf = potential_field(&bw).unwrap();
        assert!(pf.u.pixels().iter().chain(pf.v.pixels()).all(|&x| x == 0.0));
        let g = ggvf(&bw, &GgvfParams::default()).unwrap();
        assert!(g.u.pixels().iter().chain(g.v.pixels()).all(|&x| x == 0.0));
    }

    #[test]
    fn weights_sum_to_one() {
        for m in [0.0, 1e-5, 0.004, 0.05, 0.1] {
            let (k, h) = ggvf_weights(m, 0.004);
            assert!(k > 0.0 && k <= 1.0 && (0.0..1.0).contains(&h));
            assert_eq!(k + h, 1.0);
        }
    }

    #[test]
    fn potential_points_at_vertical_line() {
        let bw = BinaryImage::from_fn(21, 21, |_, c| c == 10);
        let pf = potential_field(&bw).unwrap();
        assert!(pf.u.get(10, 8) > 0.0);
        assert!(pf.u.get(10, 12) < 0.0);
        assert_eq!(pf.u.get(10, 10), 0.0);
    }

    #[test]
    fn potential_field_is_curl_free() {
        let pf = potential_field(&circle_edges(64, 20.0)).unwrap();
        // central-difference curl of a central-difference gradient vanishes
        // exactly away from the borders
        for r in 3..61 {
            for c in 3..61 {
                let dv_dx = (pf.v.get(r, c + 1) - pf.v.get(r, c - 1)) / 2.0;
                let du_dy = (pf.u.get(r + 1, c) - pf.u.get(r - 1, c)) / 2.0;
                assert!((dv_dx - du_dy).abs() < 1e-6);
            }
        }
    }

    #[test]
    fn ggvf_on_circle() {
        let g = ggvf(&circle_edges(64, 20.0), &GgvfParams::default()).unwrap();
        let (u0, v0) = g.sample(32.0, 32.0);
        assert!(u0.hypot(v0) < 1e-3);
        for k in 0..16 {
            let t = k as f64 * std::f64::consts::PI / 8.0;
            let (dx, dy) = (t.cos(), t.sin());
            let (u, v) = g.sample(32.0 + 10.0 * dx, 32.0 + 10.0 * dy);
            assert!(u * dx + v * dy > 0.0, "angle {t}");
        }
    }
}
