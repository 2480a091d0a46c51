//! Template verification with a sparse network of Winnow units: binary
//! gray/difference/rectangle features, mistake-driven training and
//! bootstrap mining of hard negatives.

mod bootstrap;
mod features;
mod model;

pub use bootstrap::{augment_face, bootstrap_train, BootstrapParams, BootstrapReport};
pub use features::{
    diff_features, encode_features, rect_layout, rect_means, FeatureCode, ACTIVE_PER_CODE,
    FEATURE_SPACE, TEMPLATE_SIZE,
};
pub use model::{snow_train, Label, SnowModel, SnowParams, TrainSummary};

use crate::detection::Detection;
use crate::error::Result;
use crate::image::{histogram_equalize, resize_to, GrayImage};

/// Resample a patch to the verification size and equalize it.
pub fn prepare_template(patch: &GrayImage) -> Result<GrayImage> {
    let t = if patch.dims() == (TEMPLATE_SIZE, TEMPLATE_SIZE) {
        patch.clone()
    } else {
        resize_to(patch, TEMPLATE_SIZE, TEMPLATE_SIZE)?
    };
    histogram_equalize(&t.quantized(), 256)
}

/// Feature code of the image region under a detection box.
pub fn detection_code(img: &GrayImage, det: &Detection) -> Result<FeatureCode> {
    let patch = img.crop(
        det.y.round() as isize,
        det.x.round() as isize,
        (det.h.round() as usize).max(1),
        (det.w.round() as usize).max(1),
    );
    encode_features(&prepare_template(&patch)?)
}

/// Keep detections the model labels as faces; their score becomes the margin.
pub fn verify_detections(
    model: &SnowModel,
    img: &GrayImage,
    dets: &[Detection],
) -> Result<Vec<Detection>> {
    let mut out = Vec::new();
    for d in dets {
        let (label, margin) = model.classify(&detection_code(img, d)?)?;
        if label == Label::Face {
            out.push(Detection { score: margin, ..*d });
        }
    }
    Ok(out)
}
