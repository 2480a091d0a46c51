//! Face detection, facial-feature extraction, face-contour segmentation and
//! face recognition on grayscale images.

pub mod bench;
pub mod contours;
pub mod correlation;
pub mod detection;
pub mod error;
pub mod features;
pub mod image;
pub mod io;
pub mod matching;
pub mod pipeline;
pub mod snake;
pub mod snow;
pub mod synth;
pub mod transforms;

pub use error::{Error, Result};

/// `(x, y)` in pixel coordinates; `x` is the column.
pub type Point = [f64; 2];
