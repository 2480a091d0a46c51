//! Stage wiring: template banks with their face-box geometry, face
//! detection (correlation pyramid, verification, merging), the ellipse
//! alternative, and per-face feature and contour extraction.

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::contours::{detect_faces_by_contour, ContourDetectParams, Ellipse};
use crate::correlation::{pyramid_search, PredetectParams, TemplateBank};
use crate::detection::{merge_detections, Detection, MergeParams};
use crate::error::{Error, Result};
use crate::features::{detect_face_features, FaceFeatures, MorphFeatureParams};
use crate::image::{pgm, BBox, GrayImage};
use crate::snake::{detect_face_contour_traced, ContourParams, ContourTrace, Snake};
use crate::snow::{verify_detections, SnowModel};

/// A pre-detection template and the face box it implies, in template
/// pixels.
#[derive(Clone, Debug, PartialEq)]
pub struct BankTemplate {
    pub label: String,
    pub image: GrayImage,
    pub face_box: BBox,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct ManifestEntry {
    file: String,
    label: String,
    /// `[x, y, w, h]` in template pixels.
    face_box: [f64; 4],
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct BankManifest {
    templates: Vec<ManifestEntry>,
}

const MANIFEST: &str = "bank.json";

/// Template bank plus, per template, where the face sits relative to it.
#[derive(Clone, Debug)]
pub struct FaceBank {
    bank: TemplateBank,
    face_boxes: Vec<BBox>,
}

impl FaceBank {
    pub fn new(entries: Vec<BankTemplate>) -> Result<Self> {
        let face_boxes: Vec<BBox> = entries.iter().map(|e| e.face_box).collect();
        if face_boxes.iter().any(|b| !(b.w > 0.0 && b.h > 0.0)) {
            return Err(Error::param("face boxes must have positive size"));
        }
        let bank = TemplateBank::new(entries.into_iter().map(|e| (e.label, e.image)).collect())?;
        Ok(Self { bank, face_boxes })
    }

    pub fn synthetic() -> Self {
        Self::new(crate::synth::default_template_bank()).expect("stand-in bank is valid")
    }

    pub fn bank(&self) -> &TemplateBank {
        &self.bank
    }

    pub fn face_boxes(&self) -> &[BBox] {
        &self.face_boxes
    }

    /// Face-box detection implied by a template hit.
    pub fn face_detection(&self, d: &Detection) -> Detection {
        let fb = self.face_boxes[d.template_id];
        let k = d.w / self.bank.dims().1 as f64;
        Detection { x: d.x + fb.x * k, y: d.y + fb.y * k, w: fb.w * k, h: fb.h * k, ..*d }
    }

    /// Write `bank.json` plus one PGM per template.
    pub fn save(&self, dir: impl AsRef<Path>) -> Result<()> {
        let dir = dir.as_ref();
        fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        let mut entries = Vec::new();
        for (t, b) in self.bank.templates().iter().zip(&self.face_boxes) {
            let file = format!("template{:02}.pgm", t.id);
            pgm::write(dir.join(&file), &t.image)?;
            entries.push(ManifestEntry { file, label: t.label.clone(), face_box: [b.x, b.y, b.w, b.h] });
        }
        crate::io::write_json(dir.join(MANIFEST), &BankManifest { templates: entries })
    }

    pub fn load(dir: impl AsRef<Path>) -> Result<Self> {
        let dir = dir.as_ref();
        let manifest: BankManifest = crate::io::read_json(dir.join(MANIFEST))?;
        let entries = manifest
            .templates
            .into_iter()
            .map(|e| {
                let [x, y, w, h] = e.face_box;
                Ok(BankTemplate { image: pgm::read(dir.join(&e.file))?, label: e.label, face_box: BBox::new(x, y, w, h) })
            })
            .collect::<Result<Vec<_>>>()?;
        Self::new(entries)
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DetectParams {
    pub predetect: PredetectParams,
    pub merge: MergeParams,
}

/// Correlation pre-detection over the pyramid, face boxes from the firing
/// templates, optional verification and merging.
pub fn detect_faces(img: &GrayImage, bank: &FaceBank, verifier: Option<&SnowModel>, p: &DetectParams) -> Result<Vec<Detection>> {
    p.merge.validate()?;
    let found = pyramid_search(img, bank.bank(), &p.predetect)?;
    let (rows, cols) = (img.rows() as f64, img.cols() as f64);
    let faces: Vec<Detection> = found
        .detections
        .iter()
        .map(|d| bank.face_detection(d))
        .filter(|d| d.x < cols && d.y < rows && d.x + d.w > 0.0 && d.y + d.h > 0.0)
        .collect();
    log::debug!("{} pre-detections, {} face boxes", found.detections.len(), faces.len());
    let verified = match verifier {
        Some(model) => verify_detections(model, img, &faces)?,
        None => faces,
    };
    Ok(merge_detections(&verified, &p.merge))
}

/// Square face box centred on the ellipse with side equal to its width.
pub fn ellipse_face_box(e: &Ellipse) -> BBox {
    let (s, c) = e.theta.sin_cos();
    let half_w = (e.a * c).hypot(e.b * s);
    BBox::new(e.cx - half_w, e.cy - half_w, 2.0 * half_w, 2.0 * half_w)
}

/// Ellipse-based detection reported as face boxes; the score is the
/// negated fit error.
pub fn detect_faces_by_ellipse(img: &GrayImage, p: &ContourDetectParams) -> Result<Vec<Detection>> {
    Ok(detect_faces_by_contour(img, p)?
        .iter()
        .map(|e| {
            let b = ellipse_face_box(e);
            Detection { x: b.x, y: b.y, w: b.w, h: b.h, scale: 1.0, score: -e.fit_error, template_id: 0, overlap_count: 0 }
        })
        .collect())
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AnalyzeParams {
    pub features: MorphFeatureParams,
    pub contour: ContourParams,
    /// Fraction of the box side added on every side before the feature
    /// search, since detected boxes are often tight.
    pub box_margin: f64,
}

impl Default for AnalyzeParams {
    fn default() -> Self {
        Self { features: MorphFeatureParams::default(), contour: ContourParams::default(), box_margin: 0.1 }
    }
}

pub fn expand_box(b: BBox, margin: f64) -> BBox {
    BBox::new(b.x - margin * b.w, b.y - margin * b.h, b.w * (1.0 + 2.0 * margin), b.h * (1.0 + 2.0 * margin))
}

/// Features and contour of one face.
#[derive(Clone, Debug)]
pub struct FaceAnalysis {
    pub features: FaceFeatures,
    pub contour: Snake,
    pub trace: ContourTrace,
}

/// Best feature triplet inside `face`, or `EmptyInput` when there is none.
pub fn face_features(img: &GrayImage, face: BBox, p: &MorphFeatureParams) -> Result<FaceFeatures> {
    detect_face_features(img, face, p)?
        .into_iter()
        .next()
        .ok_or_else(|| Error::EmptyInput("no eye/eye/lips triplet in the face box".into()))
}

pub fn analyze_face(img: &GrayImage, face: BBox, p: &AnalyzeParams) -> Result<FaceAnalysis> {
    if !(p.box_margin >= 0.0) {
        return Err(Error::param("box margin must be non-negative"));
    }
    let features = face_features(img, expand_box(face, p.box_margin), &p.features)?;
    let (contour, trace) = detect_face_contour_traced(img, &features, &p.contour)?;
    Ok(FaceAnalysis { features, contour, trace })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn face_box_scales_with_detection() {
        let bank = FaceBank::synthetic();
        let d = Detection { x: 10.0, y: 20.0, w: 50.0, h: 22.0, scale: 0.5, score: 0.9, template_id: 1, overlap_count: 0 };
        let f = bank.face_detection(&d);
        let fb = bank.face_boxes()[1];
        assert!((f.w - 2.0 * fb.w).abs() < 1e-12);
        assert!((f.x - (10.0 + 2.0 * fb.x)).abs() < 1e-12);
    }

    #[test]
    fn bank_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let bank = FaceBank::synthetic();
        bank.save(dir.path()).unwrap();
        let back = FaceBank::load(dir.path()).unwrap();
        assert_eq!(back.face_boxes(), bank.face_boxes());
        for (a, b) in back.bank().templates().iter().zip(bank.bank().templates()) {
            assert_eq!(a.label, b.label);
            assert_eq!(a.image, b.image);
        }
    }

    #[test]
    fn ellipse_box_for_upright_oval() {
        let e = Ellipse { cx: 100.0, cy: 110.0, a: 68.0, b: 50.0, theta: std::f64::consts::FRAC_PI_2, fit_error: 0.0, support: 0 };
        let b = ellipse_face_box(&e);
        assert!((b.w - 100.0).abs() < 1e-9 && (b.x - 50.0).abs() < 1e-9 && (b.y - 60.0).abs() < 1e-9);
    }

    #[test]
    fn eye_templates_find_the_face() {
        let face = crate::synth::FaceSpec::default().render();
        let eyes = FaceBank::new(crate::synth::default_template_bank().into_iter().take(6).collect()).unwrap();
        let dets = detect_faces(&face.image, &eyes, None, &DetectParams::default()).unwrap();
        assert_eq!(dets.len(), 1, "{dets:?}");
        assert!(dets[0].bbox().iou(&face.face_box) > 0.6, "{dets:?}");
    }

    #[test]
    fn tight_box_still_yields_features() {
        let face = crate::synth::FaceSpec::default().render();
        let tight = BBox::new(62.0, 38.0, 86.0, 86.0);
        let a = analyze_face(&face.image, tight, &AnalyzeParams::default()).unwrap();
        assert!((a.features.lic[1] - 120.0).abs() < 2.0);
        assert!(face.oval.mean_distance(&a.contour.points()) < 2.0);
    }

    #[test]
    fn blank_image_has_no_faces() {
        let img = GrayImage::filled(120, 120, 80.0);
        assert!(detect_faces(&img, &FaceBank::synthetic(), None, &DetectParams::default()).unwrap().is_empty());
    }
}
