//! Exact face contour: a closed snake initialized around the detected
//! features and pulled onto the face boundary by a GGVF force field.

mod bspline;
mod evolve;
mod field;
mod init;

pub use bspline::{bspline_closed, Snake, SplineMode};
pub use evolve::{snake_evolve, snake_matrix, CyclicPentaSolver, SnakeParams};
pub use field::{edge_potential, ggvf, ggvf_weights, potential_field, GgvfParams, VectorField};
pub use init::{gray_band_mask, init_contour, init_points, prepare_edge_map, ContourInitParams, EdgeMapParams};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::features::FaceFeatures;
use crate::image::{warp_similarity, BinaryImage, GrayImage};
use crate::Point;

#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ContourParams {
    pub init: ContourInitParams,
    pub edge_map: EdgeMapParams,
    pub ggvf: GgvfParams,
    pub snake: SnakeParams,
    pub frame: NormalizedFrame,
}

/// Geometry of the pose-normalized working image: eyes on a horizontal line
/// `eye_distance` apart with their midpoint at `eye_mid`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct NormalizedFrame {
    pub eye_distance: f64,
    pub rows: usize,
    pub cols: usize,
    pub eye_mid: Point,
}

impl Default for NormalizedFrame {
    fn default() -> Self {
        Self { eye_distance: 40.0, rows: 260, cols: 240, eye_mid: [120.0, 110.0] }
    }
}

/// Similarity transform between image and normalized frame.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct EyeAlignment {
    mid: Point,
    scale: f64,
    cos: f64,
    sin: f64,
    target: Point,
}

impl EyeAlignment {
    pub fn new(f: &FaceFeatures, frame: &NormalizedFrame) -> Result<Self> {
        let (dx, dy) = (f.lec[0] - f.rec[0], f.lec[1] - f.rec[1]);
        let d = dx.hypot(dy);
        if !(d > 0.0) {
            return Err(Error::Degenerate("eye centres coincide".into()));
        }
        let phi = dy.atan2(dx);
        Ok(Self {
            mid: [(f.rec[0] + f.lec[0]) / 2.0, (f.rec[1] + f.lec[1]) / 2.0],
            scale: frame.eye_distance / d,
            cos: phi.cos(),
            sin: phi.sin(),
            target: frame.eye_mid,
        })
    }

    pub fn scale(&self) -> f64 {
        self.scale
    }

    pub fn to_frame(&self, p: Point) -> Point {
        let (x, y) = (p[0] - self.mid[0], p[1] - self.mid[1]);
        [
            self.target[0] + self.scale * (self.cos * x + self.sin * y),
            self.target[1] + self.scale * (-self.sin * x + self.cos * y),
        ]
    }

    pub fn to_image(&self, q: Point) -> Point {
        let (x, y) = ((q[0] - self.target[0]) / self.scale, (q[1] - self.target[1]) / self.scale);
        [self.mid[0] + self.cos * x - self.sin * y, self.mid[1] + self.sin * x + self.cos * y]
    }
}

/// Intermediate products of a contour run, in normalized-frame coordinates.
#[derive(Clone, Debug)]
pub struct ContourTrace {
    pub normalized: GrayImage,
    pub edges: BinaryImage,
    pub init: Snake,
    pub contour: Snake,
}

/// Run the snake in the normalized frame and return the contour both in
/// image coordinates and as a trace of the normalized-frame stages.
pub fn detect_face_contour_traced(img: &GrayImage, f: &FaceFeatures, p: &ContourParams) -> Result<(Snake, ContourTrace)> {
    let align = EyeAlignment::new(f, &p.frame)?;
    let normalized = warp_similarity(img, p.frame.rows, p.frame.cols, |x, y| {
        let q = align.to_image([x, y]);
        (q[0], q[1])
    });
    let nf = f.transformed(|q| align.to_frame(q), align.scale());
    let init = init_contour(&nf, &p.init, p.snake.n_points)?;
    let edges = prepare_edge_map(&normalized, &nf, &init, &p.edge_map)?;
    let field = ggvf(&edges, &p.ggvf)?;
    let contour = snake_evolve(&init, &field, &p.snake)?;
    let mapped = contour.map(|q| align.to_image(q));
    Ok((mapped, ContourTrace { normalized, edges, init, contour }))
}

pub fn detect_face_contour(img: &GrayImage, f: &FaceFeatures, p: &ContourParams) -> Result<Snake> {
    detect_face_contour_traced(img, f, p).map(|(s, _)| s)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::image::ellipse_points;

    fn circle_edges(n: usize, c: f64, r: f64) -> BinaryImage {
        BinaryImage::from_fn(n, n, |y, x| ((x as f64 - c).hypot(y as f64 - c) - r).abs() < 0.5)
    }

    #[test]
    fn snake_locks_onto_circle() {
        let edges = circle_edges(96, 48.0, 30.0);
        let field = ggvf(&edges, &GgvfParams::default()).unwrap();
        let init = Snake::from_points(&ellipse_points(48.0, 48.0, 15.0, 15.0, 0.0, 100));
        let out = snake_evolve(&init, &field, &SnakeParams::default()).unwrap();
        let err = out.points().iter().map(|q| ((q[0] - 48.0).hypot(q[1] - 48.0) - 30.0).abs()).sum::<f64>() / 100.0;
        assert!(err < 1.5, "mean radial error {err}");
    }

    fn contour_error(spec: &crate::synth::FaceSpec) -> f64 {
        let face = spec.render();
        let s = detect_face_contour(&face.image, &face.features, &ContourParams::default()).unwrap();
        face.oval.mean_distance(&s.points())
    }

    #[test]
    fn synthetic_face_contour() {
        // off-grid eyes, so the upright face is resampled like the tilted one
        let spec = crate::synth::FaceSpec { rows: 240, cols: 240, eye_mid: [120.37, 100.61], ..Default::default() };
        let upright = contour_error(&spec);
        assert!(upright < 2.0, "mean distance {upright}");
        let tilted = contour_error(&crate::synth::FaceSpec { angle: 15f64.to_radians(), ..spec });
        assert!((tilted - upright).abs() < 0.5, "upright {upright}, tilted {tilted}");
    }

    #[test]
    fn alignment_round_trip() {
        let f = FaceFeatures {
            rec: [50.0, 80.0],
            lec: [110.0, 95.0],
            lic: [75.0, 150.0],
            rew: 12.0,
            reh: 6.0,
            lew: 12.0,
            leh: 6.0,
            liw: 20.0,
            lih: 8.0,
        };
        let a = EyeAlignment::new(&f, &NormalizedFrame::default()).unwrap();
        let (r, l) = (a.to_frame(f.rec), a.to_frame(f.lec));
        assert!((r[0] - 100.0).abs() < 1e-9 && (r[1] - 110.0).abs() < 1e-9);
        assert!((l[0] - 140.0).abs() < 1e-9 && (l[1] - 110.0).abs() < 1e-9);
        let q = a.to_image(a.to_frame([13.0, -7.0]));
        assert!((q[0] - 13.0).abs() < 1e-9 && (q[1] + 7.0).abs() < 1e-9);
    }
}
