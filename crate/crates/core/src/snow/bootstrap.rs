use std::collections::HashSet;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::features::{encode_features, FeatureCode, TEMPLATE_SIZE};
use super::model::{snow_train, Label, SnowModel, SnowParams};
use super::prepare_template;
use crate::error::{Error, Result};
use crate::image::{warp_similarity, GrayImage};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BootstrapParams {
    pub rounds: usize,
    /// Random background crops per image in the initial negative set.
    pub initial_negatives: usize,
    /// Step between scanned windows when mining false positives.
    pub scan_stride: usize,
    pub augment: bool,
    pub seed: u64,
}

impl Default for BootstrapParams {
    fn default() -> Self {
        Self {
            rounds: 3,
            initial_negatives: 20,
            scan_stride: 2,
            augment: true,
            seed: 1,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BootstrapReport {
    pub positives: usize,
    /// Size of the negative set used in each training round.
    pub negatives_per_round: Vec<usize>,
    /// True when a scan mined no new negatives.
    pub fixed_point: bool,
}

/// Rotated (-3°, 0, +3°), rescaled (95%, 100%, 105%) and mirrored variants of
/// a face template, 18 in total including the original.
pub fn augment_face(face: &GrayImage) -> Vec<GrayImage> {
    let (cx, cy) = ((face.cols() as f64 - 1.0) / 2.0, (face.rows() as f64 - 1.0) / 2.0);
    let mut out = Vec::with_capacity(18);
    for mirror in [false, true] {
        let src = if mirror { face.flip_horizontal() } else { face.clone() };
        for deg in [-3.0f64, 0.0, 3.0] {
            let (s, c) = deg.to_radians().sin_cos();
            for scale in [0.95, 1.0, 1.05] {
                let warped = warp_similarity(&src, face.rows(), face.cols(), |x, y| {
                    let (dx, dy) = ((x - cx) / scale, (y - cy) / scale);
                    (cx + c * dx + s * dy, cy - s * dx + c * dy)
                });
                out.push(warped.quantized());
            }
        }
    }
    out
}

fn scan_false_positives(
    model: &SnowModel,
    background: &GrayImage,
    stride: usize,
    known: &mut HashSet<FeatureCode>,
    out: &mut Vec<FeatureCode>,
) -> Result<()> {
    let n = TEMPLATE_SIZE;
    if background.rows() < n || background.cols() < n {
        return Ok(());
    }
    for top in (0..=background.rows() - n).step_by(stride) {
        for left in (0..=background.cols() - n).step_by(stride) {
            let patch = background.crop(top as isize, left as isize, n, n);
            let code = encode_features(&prepare_template(&patch)?)?;
            if model.classify(&code)?.0 == Label::Face && known.insert(code.clone()) {
                out.push(code);
            }
        }
    }
    Ok(())
}

/// Train on faces and random background crops, then repeatedly scan the
/// backgrounds, add every false positive as a negative and retrain, until
/// `rounds` is exhausted or a scan finds nothing new.
pub fn bootstrap_train(
    faces: &[GrayImage],
    backgrounds: &[GrayImage],
    params: &BootstrapParams,
    snow: &SnowParams,
) -> Result<(SnowModel, BootstrapReport)> {
    if faces.is_empty() || backgrounds.is_empty() {
        return Err(Error::EmptyInput("bootstrap needs faces and backgrounds".into()));
    }
    if params.scan_stride == 0 {
        return Err(Error::param("scan stride must be positive"));
    }
    let mut positives = Vec::new();
    for face in faces {
        let variants = if params.augment {
            augment_face(face)
        } else {
            vec![face.clone()]
        };
        for v in variants {
            positives.push(encode_features(&prepare_template(&v)?)?);
        }
    }

    let mut rng = ChaCha8Rng::seed_from_u64(params.seed);
    let n = TEMPLATE_SIZE;
    let mut known: HashSet<FeatureCode> = HashSet::new();
    let mut negatives = Vec::new();
    for bg in backgrounds {
        if bg.rows() < n || bg.cols() < n {
            continue;
        }
        for _ in 0..params.initial_negatives {
            let top = rng.random_range(0..=bg.rows() - n);
            let left = rng.random_range(0..=bg.cols() - n);
            let code = encode_features(&prepare_template(&bg.crop(top as isize, left as isize, n, n))?)?;
            if known.insert(code.clone()) {
                negatives.push(code);
            }
        }
    }

    let examples = |neg: &[FeatureCode]| -> Vec<(FeatureCode, Label)> {
        // interleave so neither class dominates the start of an epoch
        let mut ex = Vec::with_capacity(positives.len() + neg.len());
        let (mut p, mut q) = (positives.iter(), neg.iter());
        loop {
            match (p.next(), q.next()) {
                (None, None) => break,
                (a, b) => {
                    if let Some(a) = a {
                        ex.push((a.clone(), Label::Face));
                    }
                    if let Some(b) = b {
                        ex.push((b.clone(), Label::Nonface));
                    }
                }
            }
        }
        ex
    };

    let mut report = BootstrapReport {
        positives: positives.len(),
        negatives_per_round: vec![negatives.len()],
        fixed_point: false,
    };
    let (mut model, _) = snow_train(&examples(&negatives), snow)?;
    for round in 1..=params.rounds {
        let mut mined = Vec::new();
        for bg in backgrounds {
            scan_false_positives(&model, bg, params.scan_stride, &mut known, &mut mined)?;
        }
        log::info!("bootstrap round {round}: {} new negatives", mined.len());
        if mined.is_empty() {
            report.fixed_point = true;
            break;
        }
        negatives.extend(mined);
        report.negatives_per_round.push(negatives.len());
        model = snow_train(&examples(&negatives), snow)?.0;
    }
    Ok((model, report))
}
