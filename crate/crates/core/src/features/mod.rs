//! Facial-feature detection: dark-detail maps from morphological bottom-hats,
//! eye/lips region rules and triplet grouping, plus projection seeds and the
//! detection accumulator used to pin down eye centres.

mod eyes;
mod morph;

pub use eyes::{eye_center_accumulate, projection_seeds};
pub use morph::{
    candidate_regions, detect_face_features, eye_pairs, feature_energy, feature_map, feature_triplets,
    is_eye_pair, is_eye_region, is_lips_region, triplet_score, FaceFeatures, HalfScaleMode, MorphFeatureParams,
};
