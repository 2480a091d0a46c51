//! Synthetic test data: cartoon faces with known geometry, the stand-in
//! template bank, recognition galleries, backgrounds and analytic edge maps.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::features::FaceFeatures;
use crate::image::{gaussian_smooth, BBox, BinaryImage, GrayImage};
use crate::pipeline::BankTemplate;
use crate::snow::{bootstrap_train, BootstrapParams, BootstrapReport, SnowModel, SnowParams};
use crate::Point;

/// Rotated ellipse; `rx` runs along `angle`, `ry` across it.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Oval {
    pub cx: f64,
    pub cy: f64,
    pub rx: f64,
    pub ry: f64,
    pub angle: f64,
}

impl Oval {
    fn local(&self, p: Point) -> (f64, f64) {
        let (s, c) = self.angle.sin_cos();
        let (dx, dy) = (p[0] - self.cx, p[1] - self.cy);
        (c * dx + s * dy, -s * dx + c * dy)
    }

    pub fn contains(&self, p: Point) -> bool {
        let (u, v) = self.local(p);
        (u / self.rx).powi(2) + (v / self.ry).powi(2) <= 1.0
    }

    pub fn point_at(&self, t: f64) -> Point {
        let (s, c) = self.angle.sin_cos();
        let (u, v) = (self.rx * t.cos(), self.ry * t.sin());
        [self.cx + c * u - s * v, self.cy + s * u + c * v]
    }

    /// Euclidean distance from `p` to the outline: a dense parameter scan
    /// followed by golden-section refinement.
    pub fn distance(&self, p: Point) -> f64 {
        let n = 720;
        let d = |t: f64| {
            let q = self.point_at(t);
            (q[0] - p[0]).hypot(q[1] - p[1])
        };
        let step = std::f64::consts::TAU / n as f64;
        let best = (0..n).map(|i| i as f64 * step).min_by(|&a, &b| d(a).total_cmp(&d(b))).unwrap_or(0.0);
        let (mut lo, mut hi) = (best - step, best + step);
        let g = (5f64.sqrt() - 1.0) / 2.0;
        for _ in 0..60 {
            let (m1, m2) = (hi - g * (hi - lo), lo + g * (hi - lo));
            if d(m1) < d(m2) {
                hi = m2;
            } else {
                lo = m1;
            }
        }
        d((lo + hi) / 2.0)
    }

    pub fn mean_distance(&self, pts: &[Point]) -> f64 {
        pts.iter().map(|&p| self.distance(p)).sum::<f64>() / pts.len().max(1) as f64
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FaceSpec {
    pub rows: usize,
    pub cols: usize,
    /// Midpoint between the eye centres.
    pub eye_mid: Point,
    pub eye_distance: f64,
    /// Rotation of the whole face about `eye_mid`, radians.
    pub angle: f64,
    pub background: f64,
    pub skin: f64,
    pub feature: f64,
    pub lips: bool,
    pub noise_sigma: f64,
    pub seed: u64,
    /// Sub-samples per pixel side used to anti-alias the shapes.
    pub supersample: usize,
}

impl Default for FaceSpec {
    fn default() -> Self {
        Self {
            rows: 200,
            cols: 200,
            eye_mid: [100.0, 80.0],
            eye_distance: 40.0,
            angle: 0.0,
            background: 40.0,
            skin: 190.0,
            feature: 50.0,
            lips: true,
            noise_sigma: 0.0,
            seed: 0,
            supersample: 3,
        }
    }
}

/// A rendered face with the exact geometry it was drawn from.
#[derive(Clone, Debug, PartialEq)]
pub struct SyntheticFace {
    pub image: GrayImage,
    pub features: FaceFeatures,
    pub oval: Oval,
    pub eyes: [Oval; 2],
    pub mouth: Option<Oval>,
    /// Axis-aligned face box with the eyes at 30%/70% across and 40% down.
    pub face_box: BBox,
}

impl FaceSpec {
    fn place(&self, u: f64, v: f64) -> Point {
        let (s, c) = self.angle.sin_cos();
        let d = self.eye_distance;
        [self.eye_mid[0] + d * (c * u - s * v), self.eye_mid[1] + d * (s * u + c * v)]
    }

    fn oval(&self, u: f64, v: f64, rx: f64, ry: f64) -> Oval {
        let [cx, cy] = self.place(u, v);
        let d = self.eye_distance;
        Oval { cx, cy, rx: rx * d, ry: ry * d, angle: self.angle }
    }

    pub fn render(&self) -> SyntheticFace {
        let d = self.eye_distance;
        let oval = self.oval(0.0, 0.25, 1.25, 1.7);
        let eyes = [self.oval(-0.5, 0.0, 0.15, 0.075), self.oval(0.5, 0.0, 0.15, 0.075)];
        let mouth = self.lips.then(|| self.oval(0.0, 1.0, 0.35, 0.1));
        let ss = self.supersample.max(1);
        let mut image = GrayImage::from_fn(self.rows, self.cols, |r, c| {
            let mut acc = 0.0;
            for i in 0..ss {
                for j in 0..ss {
                    let p = [c as f64 + (j as f64 + 0.5) / ss as f64 - 0.5, r as f64 + (i as f64 + 0.5) / ss as f64 - 0.5];
                    acc += if eyes.iter().chain(mouth.iter()).any(|o| o.contains(p)) {
                        self.feature
                    } else if oval.contains(p) {
                        self.skin
                    } else {
                        self.background
                    };
                }
            }
            acc / (ss * ss) as f64
        });
        if self.noise_sigma > 0.0 {
            let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
            let normal = Normal::new(0.0, self.noise_sigma).expect("finite positive sigma");
            for v in image.pixels_mut() {
                *v += normal.sample(&mut rng);
            }
        }
        let image = image.map(|v| v.clamp(0.0, 255.0)).quantized();
        let lip = self.place(0.0, 1.0);
        let features = FaceFeatures {
            rec: self.place(-0.5, 0.0),
            lec: self.place(0.5, 0.0),
            lic: lip,
            rew: 0.3 * d,
            reh: 0.15 * d,
            lew: 0.3 * d,
            leh: 0.15 * d,
            liw: 0.7 * d,
            lih: 0.2 * d,
        };
        SyntheticFace {
            image,
            features,
            oval,
            eyes,
            mouth,
            face_box: face_box_around(self.eye_mid, d),
        }
    }
}

/// Face box implied by an eye midpoint and eye distance.
pub fn face_box_around(eye_mid: Point, eye_distance: f64) -> BBox {
    let d = eye_distance;
    BBox::new(eye_mid[0] - 1.25 * d, eye_mid[1] - d, 2.5 * d, 2.5 * d)
}

pub fn synthetic_face(spec: &FaceSpec) -> SyntheticFace {
    spec.render()
}

/// Rows and columns of the stand-in pre-detection templates.
pub const BANK_DIMS: (usize, usize) = (11, 25);

/// Eight synthetic 11×25 templates: six eye pairs (two eye distances, three
/// tilts), one forehead and one mouth.
pub fn default_template_bank() -> Vec<BankTemplate> {
    let (rows, cols) = BANK_DIMS;
    let centre = [(cols as f64 - 1.0) / 2.0, (rows as f64 - 1.0) / 2.0];
    let render = |mid: Point, d: f64, angle: f64| {
        FaceSpec { rows, cols, eye_mid: mid, eye_distance: d, angle, supersample: 4, ..FaceSpec::default() }
            .render()
            .image
    };
    let mut out = Vec::new();
    for d in [16.0, 20.0] {
        for deg in [-10.0f64, 0.0, 10.0] {
            out.push(BankTemplate {
                label: format!("eyes-d{d}-r{deg}"),
                image: render(centre, d, deg.to_radians()),
                face_box: face_box_around(centre, d),
            });
        }
    }
    let d = 18.0;
    let forehead = [centre[0], centre[1] + 1.3 * d];
    out.push(BankTemplate { label: "forehead".into(), image: render(forehead, d, 0.0), face_box: face_box_around(forehead, d) });
    let mouth = [centre[0], centre[1] - d];
    out.push(BankTemplate { label: "mouth".into(), image: render(mouth, d, 0.0), face_box: face_box_around(mouth, d) });
    out
}

/// Smooth random texture in `[0, 255]`: blurred uniform noise with a random
/// linear shading.
pub fn synthetic_background(rows: usize, cols: usize, seed: u64) -> GrayImage {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let noise = GrayImage::from_fn(rows, cols, |_, _| rng.random_range(0.0..255.0));
    let smooth = gaussian_smooth(&noise, 2.0).unwrap_or(noise);
    let (lo, hi) = smooth.min_max();
    let span = (hi - lo).max(1e-9);
    let (gx, gy) = (rng.random_range(-0.5..0.5), rng.random_range(-0.5..0.5));
    GrayImage::from_fn(rows, cols, |r, c| {
        let v = 40.0 + 160.0 * (smooth.get(r, c) - lo) / span + gx * c as f64 + gy * r as f64;
        v.clamp(0.0, 255.0)
    })
    .quantized()
}

/// Positive crops and face-free scenes for training the face verifier.
/// Faces vary in size, tilt, gray levels and box placement; the scenes are
/// textures plus featureless ovals, whose outlines resemble a face border.
pub fn verifier_training_set(seed: u64) -> (Vec<GrayImage>, Vec<GrayImage>) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut faces = Vec::new();
    for _ in 0..40 {
        let d = rng.random_range(28.0..52.0);
        let spec = FaceSpec {
            rows: 200,
            cols: 200,
            eye_mid: [100.0 + rng.random_range(-0.5..0.5), 80.0 + rng.random_range(-0.5..0.5)],
            eye_distance: d,
            angle: rng.random_range(-0.15..0.15),
            background: rng.random_range(10.0..90.0),
            skin: rng.random_range(140.0..240.0),
            feature: rng.random_range(10.0..80.0),
            supersample: 2,
            ..FaceSpec::default()
        };
        let face = spec.render();
        let b = face.face_box;
        let k = rng.random_range(0.9..1.1);
        let side = b.w * k;
        let [cx, cy] = b.center();
        let x = cx - side / 2.0 + rng.random_range(-0.06..0.06) * b.w;
        let y = cy - side / 2.0 + rng.random_range(-0.06..0.06) * b.w;
        let n = side.round() as usize;
        faces.push(face.image.crop(y.round() as isize, x.round() as isize, n, n));
    }
    let mut scenes: Vec<GrayImage> = (0..6).map(|i| synthetic_background(100, 100, seed.wrapping_add(1000 + i))).collect();
    for d in [20.0, 28.0, 36.0, 44.0, 52.0] {
        let spec = FaceSpec { rows: 220, cols: 180, eye_mid: [90.0, 90.0], eye_distance: d, supersample: 2, ..FaceSpec::default() };
        scenes.push(FaceSpec { feature: spec.skin, ..spec }.render().image);
    }
    (faces, scenes)
}

/// Face verifier bootstrapped on [`verifier_training_set`].
pub fn synthetic_verifier(seed: u64) -> Result<(SnowModel, BootstrapReport)> {
    let (faces, scenes) = verifier_training_set(seed);
    bootstrap_train(&faces, &scenes, &BootstrapParams { seed, ..BootstrapParams::default() }, &SnowParams::default())
}

/// Uniform random integer images.
pub fn random_images(n: usize, rows: usize, cols: usize, seed: u64) -> Vec<GrayImage> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..n)
        .map(|_| GrayImage::from_fn(rows, cols, |_, _| f64::from(rng.random_range(0u8..=255))))
        .collect()
}

/// One face per person, each with its own proportions, gray levels and a
/// smooth texture, cropped to a `rows x cols` frame around the face.
pub fn synthetic_gallery(persons: usize, rows: usize, cols: usize, seed: u64) -> Vec<(String, GrayImage)> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..persons)
        .map(|i| {
            let d = cols as f64 * rng.random_range(0.34..0.42);
            let spec = FaceSpec {
                rows,
                cols,
                eye_mid: [cols as f64 / 2.0 + rng.random_range(-1.5..1.5), rows as f64 * 0.4],
                eye_distance: d,
                angle: rng.random_range(-0.08..0.08),
                background: rng.random_range(20.0..80.0),
                skin: rng.random_range(150.0..230.0),
                feature: rng.random_range(20.0..90.0),
                supersample: 2,
                ..FaceSpec::default()
            };
            let face = spec.render().image;
            let texture = synthetic_background(rows, cols, rng.random());
            let img = face.zip_map(&texture, |f, t| 0.8 * f + 0.2 * t).expect("same dims").quantized();
            (format!("person{i:03}"), img)
        })
        .collect()
}

/// One-pixel-wide circle outline.
pub fn circle_edge_map(size: usize, centre: Point, radius: f64) -> BinaryImage {
    BinaryImage::from_fn(size, size, |r, c| ((c as f64 - centre[0]).hypot(r as f64 - centre[1]) - radius).abs() < 0.5)
}
