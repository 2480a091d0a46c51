use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::image::{
    histogram_equalize, label_regions, morph_close, resize_to, BBox, BinaryImage, GrayImage, Region,
    StructuringElement,
};
use crate::Point;

/// How the half-scale bottom-hat maps are brought back to full size.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum HalfScaleMode {
    /// Bilinear upsampling by two.
    #[default]
    Upsample,
    /// Bilinear upsampling, then squaring every value.
    Square,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MorphFeatureParams {
    /// Threshold coefficient: `BW = E ≥ c1_trm · mean(E)`.
    pub c1_trm: f64,
    /// Bottom-hat values outside `[v1, v2]` are zeroed.
    pub v1: f64,
    pub v2: f64,
    /// Expected face width band on the normalized face, px.
    pub min_face_w: f64,
    pub max_face_w: f64,
    /// Side of the square the face is resized to before detection.
    pub face_size: usize,
    pub half_scale: HalfScaleMode,
    /// Lips centre must lie `[lips_min_drop, lips_max_drop]·d` below the eye
    /// line, `d` being the eye distance.
    pub lips_min_drop: f64,
    pub lips_max_drop: f64,
    /// Largest horizontal lips offset from the eye midpoint, in units of `d`.
    pub lips_max_shift: f64,
}

impl Default for MorphFeatureParams {
    fn default() -> Self {
        Self {
            c1_trm: 2.0,
            v1: 0.0,
            v2: 255.0,
            min_face_w: 60.0,
            max_face_w: 100.0,
            face_size: 100,
            half_scale: HalfScaleMode::Upsample,
            lips_min_drop: 0.6,
            lips_max_drop: 1.6,
            lips_max_shift: 0.35,
        }
    }
}

impl MorphFeatureParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.v1 <= self.v2) {
            return Err(Error::param("need v1 <= v2"));
        }
        if !(self.min_face_w > 0.0 && self.min_face_w < self.max_face_w) {
            return Err(Error::param("need 0 < min_face_w < max_face_w"));
        }
        if self.face_size < 14 {
            return Err(Error::param("face_size must be at least 14"));
        }
        if !(self.lips_min_drop < self.lips_max_drop && self.lips_max_shift > 0.0) {
            return Err(Error::param("invalid lips placement bounds"));
        }
        Ok(())
    }

    pub fn min_eye_w(&self) -> f64 {
        self.min_face_w / 10.0
    }

    pub fn max_eye_w(&self) -> f64 {
        self.max_face_w / 2.0
    }

    pub fn min_lips_w(&self) -> f64 {
        self.min_face_w / 5.0
    }

    pub fn max_lips_w(&self) -> f64 {
        self.max_face_w / 2.0
    }
}

/// Centres, widths and heights of the right eye, left eye and lips. The right
/// eye is the one on the image's left.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct FaceFeatures {
    pub rec: Point,
    pub lec: Point,
    pub lic: Point,
    pub rew: f64,
    pub reh: f64,
    pub lew: f64,
    pub leh: f64,
    pub liw: f64,
    pub lih: f64,
}

impl FaceFeatures {
    pub fn eye_distance(&self) -> f64 {
        (self.lec[0] - self.rec[0]).hypot(self.lec[1] - self.rec[1])
    }

    /// Box enclosing the three feature rectangles.
    pub fn bbox(&self) -> BBox {
        let rect = |c: Point, w: f64, h: f64| BBox::new(c[0] - w / 2.0, c[1] - h / 2.0, w, h);
        rect(self.rec, self.rew, self.reh)
            .union(&rect(self.lec, self.lew, self.leh))
            .union(&rect(self.lic, self.liw, self.lih))
    }

    /// Apply `f` to the three centres and multiply the sizes by `scale`.
    pub fn transformed(&self, f: impl Fn(Point) -> Point, scale: f64) -> Self {
        Self {
            rec: f(self.rec),
            lec: f(self.lec),
            lic: f(self.lic),
            rew: self.rew * scale,
            reh: self.reh * scale,
            lew: self.lew * scale,
            leh: self.leh * scale,
            liw: self.liw * scale,
            lih: self.lih * scale,
        }
    }
}

fn clip(img: &GrayImage, v1: f64, v2: f64) -> GrayImage {
    img.map(|v| if (v1..=v2).contains(&v) { v } else { 0.0 })
}

fn bottom_hat(img: &GrayImage, se: &StructuringElement) -> Result<GrayImage> {
    morph_close(img, se)?.zip_map(img, |c, i| c - i)
}

/// Average of horizontal and vertical bottom-hat maps at full and half
/// scale; large where the image has dark details narrower than 7 px.
pub fn feature_energy(face: &GrayImage, p: &MorphFeatureParams) -> Result<GrayImage> {
    p.validate()?;
    let (rows, cols) = face.dims();
    if rows < 14 || cols < 14 {
        return Err(Error::param(format!("feature map needs at least 14x14, got {rows}x{cols}")));
    }
    let (sh, sv) = (StructuringElement::horizontal(7), StructuringElement::vertical(7));
    let half = resize_to(face, rows / 2, cols / 2)?;
    let up = |m: GrayImage| -> Result<GrayImage> {
        let u = resize_to(&m, rows, cols)?;
        Ok(match p.half_scale {
            HalfScaleMode::Upsample => u,
            HalfScaleMode::Square => u.map(|v| v * v),
        })
    };
    let e1 = clip(&bottom_hat(face, &sh)?, p.v1, p.v2);
    let e2 = up(clip(&bottom_hat(&half, &sh)?, p.v1, p.v2))?;
    let e3 = clip(&bottom_hat(face, &sv)?, p.v1, p.v2);
    let e4 = up(clip(&bottom_hat(&half, &sv)?, p.v1, p.v2))?;
    Ok(GrayImage::from_fn(rows, cols, |r, c| {
        (e1.get(r, c) + e2.get(r, c) + e3.get(r, c) + e4.get(r, c)) / 4.0
    }))
}

/// Thresholded feature energy; all zero when the energy is zero everywhere.
pub fn feature_map(face: &GrayImage, p: &MorphFeatureParams) -> Result<BinaryImage> {
    let e = feature_energy(face, p)?;
    let mean = e.mean();
    if mean == 0.0 {
        return Ok(BinaryImage::new(e.rows(), e.cols()));
    }
    Ok(BinaryImage::threshold(&e, p.c1_trm * mean))
}

fn aspect(r: &Region) -> f64 {
    r.bbox.w / r.bbox.h
}

pub fn is_eye_region(r: &Region, p: &MorphFeatureParams) -> bool {
    let a = aspect(r);
    r.bbox.w >= p.min_eye_w() && r.bbox.w <= p.max_eye_w() && r.area >= 10 && a > 1.0 && a < 6.0
}

pub fn is_lips_region(r: &Region, p: &MorphFeatureParams) -> bool {
    let a = aspect(r);
    r.bbox.w >= p.min_lips_w() && r.bbox.w <= p.max_lips_w() && r.area >= 20 && a > 2.0 && a < 15.0
}

/// Labelled regions of `bw` that qualify as eyes and as lips; a region may
/// be both.
pub fn candidate_regions(bw: &BinaryImage, companion: &GrayImage, p: &MorphFeatureParams) -> (Vec<Region>, Vec<Region>) {
    let regions = label_regions(bw, Some(companion));
    let eyes = regions.iter().filter(|r| is_eye_region(r, p)).cloned().collect();
    let lips = regions.into_iter().filter(|r| is_lips_region(r, p)).collect();
    (eyes, lips)
}

fn ratio(a: f64, b: f64) -> f64 {
    a.max(b) / a.min(b)
}

/// Whether two eye regions can belong to one face. Symmetric.
pub fn is_eye_pair(r1: &Region, r2: &Region) -> bool {
    (r1.centroid[1] - r2.centroid[1]).abs() < (r1.bbox.h + r2.bbox.h) / 2.0
        && ratio(r1.bbox.w, r2.bbox.w) < 1.5
        && ratio(r1.bbox.h, r2.bbox.h) < 1.5
        && (r1.mean_gray - r2.mean_gray).abs() < 50.0
}

/// Eye pairs ordered image-left first.
pub fn eye_pairs(eyes: &[Region]) -> Vec<(Region, Region)> {
    let mut out = Vec::new();
    for i in 0..eyes.len() {
        for j in i + 1..eyes.len() {
            if is_eye_pair(&eyes[i], &eyes[j]) {
                let (a, b) = (&eyes[i], &eyes[j]);
                let (r, l) = if a.centroid[0] <= b.centroid[0] { (a, b) } else { (b, a) };
                out.push((r.clone(), l.clone()));
            }
        }
    }
    out
}

/// Placement score of lips relative to an eye pair, lower is better; `None`
/// when the lips are outside the allowed band.
pub fn triplet_score(re: Point, le: Point, lips: Point, p: &MorphFeatureParams) -> Option<f64> {
    let d = (le[0] - re[0]).hypot(le[1] - re[1]);
    if d == 0.0 {
        return None;
    }
    let eyes_y = (re[1] + le[1]) / 2.0;
    let mid_x = (re[0] + le[0]) / 2.0;
    let (dx, dy) = (lips[0] - mid_x, lips[1] - eyes_y);
    let placed = dy >= p.lips_min_drop * d && dy <= p.lips_max_drop * d && dx.abs() <= p.lips_max_shift * d;
    placed.then(|| dx.abs() / d + 0.5 * (dy / d - 1.0).abs())
}

/// One triplet per eye pair (the best placed lips), then overlapping
/// triplets are removed keeping the better placed.
pub fn feature_triplets(pairs: &[(Region, Region)], lips: &[Region], p: &MorphFeatureParams) -> Vec<FaceFeatures> {
    let mut scored: Vec<(f64, FaceFeatures)> = pairs
        .iter()
        .filter_map(|(re, le)| {
            lips.iter()
                .filter(|l| l.label != re.label && l.label != le.label)
                .filter_map(|l| triplet_score(re.centroid, le.centroid, l.centroid, p).map(|s| (s, l)))
                .min_by(|a, b| a.0.total_cmp(&b.0))
                .map(|(s, l)| {
                    (
                        s,
                        FaceFeatures {
                            rec: re.centroid,
                            lec: le.centroid,
                            lic: l.centroid,
                            rew: re.bbox.w,
                            reh: re.bbox.h,
                            lew: le.bbox.w,
                            leh: le.bbox.h,
                            liw: l.bbox.w,
                            lih: l.bbox.h,
                        },
                    )
                })
        })
        .collect();
    scored.sort_by(|a, b| a.0.total_cmp(&b.0));
    let mut kept: Vec<FaceFeatures> = Vec::new();
    for (_, f) in scored {
        if kept.iter().all(|k| k.bbox().intersection(&f.bbox()) <= 0.0) {
            kept.push(f);
        }
    }
    kept
}

/// Eyes and lips inside `face` (a box in `img`), reported in `img`
/// coordinates. The box is resized to the normalized face size and
/// equalized first.
pub fn detect_face_features(img: &GrayImage, face: BBox, p: &MorphFeatureParams) -> Result<Vec<FaceFeatures>> {
    p.validate()?;
    if !(face.w >= 1.0 && face.h >= 1.0) {
        return Err(Error::param("face box is empty"));
    }
    let n = p.face_size;
    let (sx, sy) = (face.w / n as f64, face.h / n as f64);
    let norm = GrayImage::from_fn(n, n, |r, c| {
        img.sample_bilinear(face.x + (c as f64 + 0.5) * sx - 0.5, face.y + (r as f64 + 0.5) * sy - 0.5)
    });
    let eq = histogram_equalize(&norm.quantized(), 256)?;
    let bw = feature_map(&eq, p)?;
    let (eyes, lips) = candidate_regions(&bw, &eq, p);
    let pairs = eye_pairs(&eyes);
    let found = feature_triplets(&pairs, &lips, p);
    log::debug!("{} eyes, {} lips, {} pairs, {} triplets", eyes.len(), lips.len(), pairs.len(), found.len());
    let to_img = |q: Point| [face.x + (q[0] + 0.5) * sx - 0.5, face.y + (q[1] + 0.5) * sy - 0.5];
    Ok(found
        .into_iter()
        .map(|f| FaceFeatures {
            rew: f.rew * sx,
            lew: f.lew * sx,
            liw: f.liw * sx,
            reh: f.reh * sy,
            leh: f.leh * sy,
            lih: f.lih * sy,
            ..f.transformed(to_img, 1.0)
        })
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn region(label: usize, cx: f64, cy: f64, w: f64, h: f64, area: usize, gray: f64) -> Region {
        Region {
            label,
            area,
            bbox: BBox::new(cx - w / 2.0, cy - h / 2.0, w, h),
            centroid: [cx, cy],
            mean_gray: gray,
            pixels: Vec::new(),
        }
    }

    #[test]
    fn constant_image_maps_to_zero() {
        let img = GrayImage::filled(40, 40, 128.0);
        let p = MorphFeatureParams::default();
        assert!(feature_energy(&img, &p).unwrap().pixels().iter().all(|&v| v == 0.0));
        assert_eq!(feature_map(&img, &p).unwrap().count_ones(), 0);
        assert!(feature_map(&GrayImage::new(13, 40), &p).is_err());
    }

    #[test]
    fn single_dark_blob() {
        let img = GrayImage::from_fn(40, 40, |r, c| {
            if (18..21).contains(&r) && (10..15).contains(&c) { 20.0 } else { 220.0 }
        });
        let bw = feature_map(&img, &MorphFeatureParams::default()).unwrap();
        let regions = label_regions(&bw, None);
        assert_eq!(regions.len(), 1);
        for r in 18..21 {
            for c in 10..15 {
                assert!(bw.get(r, c));
            }
        }
    }

    #[test]
    fn values_outside_band_are_clipped() {
        let img = GrayImage::from_fn(30, 30, |r, c| if (14..16).contains(&r) && (14..16).contains(&c) { 0.0 } else { 200.0 });
        let p = MorphFeatureParams { v2: 100.0, ..Default::default() };
        assert_eq!(feature_energy(&img, &p).unwrap().get(15, 15), 0.0);
        let loose = MorphFeatureParams::default();
        assert!(feature_energy(&img, &loose).unwrap().get(15, 15) > 0.0);
    }

    #[test]
    fn region_predicates() {
        let p = MorphFeatureParams { min_face_w: 100.0, max_face_w: 200.0, ..Default::default() };
        assert!(is_eye_region(&region(1, 0.0, 0.0, 20.0, 5.0, 100, 0.0), &p));
        assert!(!is_eye_region(&region(1, 0.0, 0.0, 20.0, 20.0, 100, 0.0), &p));
        assert!(!is_eye_region(&region(1, 0.0, 0.0, 20.0, 5.0, 9, 0.0), &p));
        assert!(is_lips_region(&region(1, 0.0, 0.0, 30.0, 5.0, 100, 0.0), &p));
        assert!(!is_lips_region(&region(1, 0.0, 0.0, 30.0, 15.0, 100, 0.0), &p));
    }

    #[test]
    fn pair_predicate() {
        let a = region(1, 30.0, 40.0, 12.0, 6.0, 50, 100.0);
        let b = region(2, 70.0, 40.0, 12.0, 6.0, 50, 100.0);
        assert!(is_eye_pair(&a, &b) && is_eye_pair(&b, &a));
        let tall = region(2, 70.0, 40.0, 12.0, 9.0, 50, 100.0);
        assert!(!is_eye_pair(&a, &tall));
        let bright = region(2, 70.0, 40.0, 12.0, 6.0, 50, 151.0);
        assert!(!is_eye_pair(&a, &bright));
        assert_eq!(eye_pairs(&[b.clone(), a.clone()])[0].0.label, 1);
    }

    #[test]
    fn canonical_triplet() {
        let p = MorphFeatureParams::default();
        let re = region(1, 30.0, 40.0, 12.0, 6.0, 50, 100.0);
        let le = region(2, 70.0, 40.0, 12.0, 6.0, 50, 100.0);
        let lips = region(3, 50.0, 80.0, 24.0, 6.0, 100, 100.0);
        let pairs = eye_pairs(&[re.clone(), le.clone()]);
        let t = feature_triplets(&pairs, &[lips.clone()], &p);
        assert_eq!(t.len(), 1);
        assert_eq!((t[0].rec, t[0].lec, t[0].lic), ([30.0, 40.0], [70.0, 40.0], [50.0, 80.0]));
        let above = region(3, 50.0, 10.0, 24.0, 6.0, 100, 100.0);
        assert!(feature_triplets(&pairs, &[above], &p).is_empty());
        // duplicate regions produce duplicate triplets that collapse to one
        let dup = vec![pairs[0].clone(), pairs[0].clone()];
        assert_eq!(feature_triplets(&dup, &[lips.clone(), lips], &p).len(), 1);
    }
}
