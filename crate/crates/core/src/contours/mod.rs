//! Ellipse-based face pre-detection: edge chains are linked, split at
//! corners, cleaned up and approximated with ellipses, which are kept when
//! their shape is plausible for a face.

mod detect;
mod ellipse;
mod link;
mod split;

pub use detect::{
    candidate_contours, detect_faces_by_contour, is_plausible_face, link_endpoints, ContourDetectParams,
};
pub use ellipse::{fit_conic_direct, fit_ellipse_direct, Conic, Ellipse};
pub use link::{link_edges, Contour};
pub use split::{kcosine_turning, smooth_contour_ends, split_kcosines};
