//! Feature-vector distances, nearest-neighbour recognition, biometric
//! evaluation curves, serial combination of recognizers and the error
//! measures for detected eyes and contours.

mod combine;
mod distance;
mod errors;
mod matrix;
mod metrics;

pub use combine::{combine_advisor, combine_serial, shortlist_len, CombineAdvice};
pub use distance::{distance, nearest_neighbor, DistanceKind, DistanceSpec, Match, Preprocessing};
pub use errors::{contour_errors, eye_error, ContourErrors};
pub use matrix::DistanceMatrix;
pub use metrics::{cmc, correct_ranks, evaluate, roc, CmcCurve, MetricsBundle, RocCurve, RocPoint};
