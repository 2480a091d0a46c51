//! Feature extraction for recognition: PCA eigenspaces, 2-D DCT, 2-D DWT,
//! wavelet packets and per-subband PCA on wavelet packets.

mod dct;
mod filters;
mod mask;
mod pca;
mod select;
mod wavelet;
mod wpd_pca;

pub use dct::{dct2, idct2};
pub use filters::{quadrature_mirror, WaveletSpec};
pub use mask::{apply_mask, elliptical_mask};
pub use pca::{pca_project, pca_train, PcaModel, EIGEN_CUTOFF};
pub use select::{apply_selection, select_features, SelectionCriterion};
pub use wavelet::{dwt2, dwt2_level, wpd, Dwt2};
pub use wpd_pca::{wpd_pca_project, wpd_pca_train, WpdPcaModel};

use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::image::GrayImage;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum Provenance {
    Pca { whitened: bool },
    WpdPca { whitened: bool },
    Dct,
    Dwt { levels: usize },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FeatureVector {
    pub values: Vec<f64>,
    pub provenance: Provenance,
}

/// DCT coefficients, row-major.
pub fn dct_features(img: &GrayImage) -> FeatureVector {
    FeatureVector {
        values: dct2(img).into_pixels(),
        provenance: Provenance::Dct,
    }
}

/// Packed DWT coefficients, row-major.
pub fn dwt_features(img: &GrayImage, w: &WaveletSpec, levels: usize) -> Result<FeatureVector> {
    Ok(FeatureVector {
        values: dwt2(img, w, levels)?.packed().into_pixels(),
        provenance: Provenance::Dwt { levels },
    })
}
