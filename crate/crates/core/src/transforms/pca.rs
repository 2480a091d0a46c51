use std::fs;
use std::path::Path;

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use serde::{Deserialize, Serialize};

use super::{FeatureVector, Provenance};
use crate::error::{Error, Result};
use crate::image::GrayImage;
use crate::io;

/// Eigenvalues at or below `λ_max · EIGEN_CUTOFF` are discarded.
pub const EIGEN_CUTOFF: f64 = 1e-12;

/// Trained eigenspace: `Y = T (X - m)`, rows of `T` are unit eigenvectors of
/// the sample covariance (normalized by `1/r`) in descending eigenvalue order.
#[derive(Clone, Debug, PartialEq)]
pub struct PcaModel {
    mean: DVector<f64>,
    basis: DMatrix<f64>,
    eigenvalues: Vec<f64>,
    trained_on: usize,
    dims: (usize, usize),
}

/// Eigenpairs of a symmetric matrix, descending, above the cutoff, with the
/// largest-magnitude component of every vector made positive. Vectors are
/// returned as columns.
pub(crate) fn sym_eigen_desc(m: DMatrix<f64>) -> (Vec<f64>, DMatrix<f64>) {
    let eig = SymmetricEigen::new(m);
    let mut order: Vec<usize> = (0..eig.eigenvalues.len()).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[b].total_cmp(&eig.eigenvalues[a]));
    let lmax = order.first().map_or(0.0, |&i| eig.eigenvalues[i]);
    let keep: Vec<usize> = order
        .into_iter()
        .filter(|&i| eig.eigenvalues[i] > 0.0 && eig.eigenvalues[i] > lmax * EIGEN_CUTOFF)
        .collect();
    let n = eig.eigenvectors.nrows();
    let mut vectors = DMatrix::zeros(n, keep.len());
    for (j, &i) in keep.iter().enumerate() {
        vectors.set_column(j, &eig.eigenvectors.column(i));
    }
    let values = keep.iter().map(|&i| eig.eigenvalues[i]).collect();
    (values, vectors)
}

/// Flip each column so its largest-magnitude entry (first on ties) is
/// positive.
pub(crate) fn canonical_signs(vectors: &mut DMatrix<f64>) {
    for mut col in vectors.column_iter_mut() {
        let mut best = 0;
        for i in 0..col.len() {
            if col[i].abs() > col[best].abs() {
                best = i;
            }
        }
        if col.len() > 0 && col[best] < 0.0 {
            col.neg_mut();
        }
    }
}

/// Training images as columns of an `N x r` matrix, plus their dims.
pub(crate) fn data_matrix(images: &[GrayImage]) -> Result<(DMatrix<f64>, (usize, usize))> {
    if images.len() < 2 {
        return Err(Error::EmptyInput(format!(
            "PCA needs at least 2 training images, got {}",
            images.len()
        )));
    }
    let dims = images[0].dims();
    for img in images {
        if img.dims() != dims {
            return Err(Error::dims(format!("{dims:?}"), format!("{:?}", img.dims())));
        }
    }
    let n = dims.0 * dims.1;
    let mut data = DMatrix::zeros(n, images.len());
    for (j, img) in images.iter().enumerate() {
        data.column_mut(j).copy_from_slice(img.pixels());
    }
    Ok((data, dims))
}

/// PCA of images flattened row by row. With fewer images than pixels the
/// eigenproblem is solved on the `r x r` Gram matrix `AᵀA` and mapped back
/// through `A`; otherwise the covariance is decomposed directly.
pub fn pca_train(images: &[GrayImage]) -> Result<PcaModel> {
    let (mut a, dims) = data_matrix(images)?;
    let r = images.len();
    let mean = a.column_mean();
    for mut col in a.column_iter_mut() {
        col -= &mean;
    }
    let (n, rf) = (a.nrows(), r as f64);
    // a centred sample of r vectors spans at most r - 1 directions
    let rank = r - 1;
    let (eigenvalues, mut vectors) = if r < n {
        // explicit transpose: the blocked product is far faster than tr_mul
        let gram = a.transpose() * &a;
        let (mut mu, mut v) = sym_eigen_desc(gram);
        if mu.len() > rank {
            mu.truncate(rank);
            v = v.columns(0, rank).into_owned();
        }
        let mut u = &a * v;
        for (j, mut col) in u.column_iter_mut().enumerate() {
            let norm = col.norm();
            debug_assert!(norm > 0.0, "positive eigenvalue {} maps to zero", mu[j]);
            col /= norm;
        }
        (mu.iter().map(|m| m / rf).collect(), u)
    } else {
        let cov = (&a * a.transpose()) / rf;
        let (mut l, mut v) = sym_eigen_desc(cov);
        if l.len() > rank {
            l.truncate(rank);
            v = v.columns(0, rank).into_owned();
        }
        (l, v)
    };
    canonical_signs(&mut vectors);
    Ok(PcaModel {
        mean,
        basis: vectors.transpose(),
        eigenvalues,
        trained_on: r,
        dims,
    })
}

impl PcaModel {
    /// Eigenspace of a given mean and covariance (normalized by `1/r`).
    pub fn from_covariance(
        mean: DVector<f64>,
        cov: DMatrix<f64>,
        trained_on: usize,
        dims: (usize, usize),
    ) -> Result<Self> {
        let n = dims.0 * dims.1;
        if mean.len() != n || cov.nrows() != n || cov.ncols() != n {
            return Err(Error::dims(n, format!("mean {} / cov {}x{}", mean.len(), cov.nrows(), cov.ncols())));
        }
        let (mut eigenvalues, mut vectors) = sym_eigen_desc(cov);
        let rank = trained_on.saturating_sub(1).max(1);
        if eigenvalues.len() > rank {
            eigenvalues.truncate(rank);
            vectors = vectors.columns(0, rank).into_owned();
        }
        canonical_signs(&mut vectors);
        Ok(Self {
            mean,
            basis: vectors.transpose(),
            eigenvalues,
            trained_on,
            dims,
        })
    }

    pub fn mean(&self) -> &DVector<f64> {
        &self.mean
    }

    /// `k x N`, one unit eigenvector per row.
    pub fn basis(&self) -> &DMatrix<f64> {
        &self.basis
    }

    pub fn eigenvalues(&self) -> &[f64] {
        &self.eigenvalues
    }

    pub fn n_components(&self) -> usize {
        self.eigenvalues.len()
    }

    pub fn trained_on(&self) -> usize {
        self.trained_on
    }

    pub fn dims(&self) -> (usize, usize) {
        self.dims
    }

    /// Project a flattened vector; `whiten` divides component `i` by `√λ_i`.
    pub fn project_vec(&self, x: &[f64], whiten: bool) -> Result<Vec<f64>> {
        if x.len() != self.mean.len() {
            return Err(Error::dims(self.mean.len(), x.len()));
        }
        let centred = DVector::from_column_slice(x) - &self.mean;
        let mut y: Vec<f64> = (&self.basis * centred).iter().copied().collect();
        if whiten {
            for (v, &l) in y.iter_mut().zip(&self.eigenvalues) {
                if !(l > 0.0) {
                    return Err(Error::param("cannot whiten with a zero eigenvalue"));
                }
                *v /= l.sqrt();
            }
        }
        Ok(y)
    }

    /// Back-projection `Tᵀ y + m` of a (non-whitened) feature vector.
    pub fn reconstruct(&self, y: &[f64]) -> Result<Vec<f64>> {
        if y.len() != self.n_components() {
            return Err(Error::dims(self.n_components(), y.len()));
        }
        let v = self.basis.tr_mul(&DVector::from_column_slice(y)) + &self.mean;
        Ok(v.iter().copied().collect())
    }

    fn manifest(&self) -> PcaManifest {
        PcaManifest {
            rows: self.dims.0,
            cols: self.dims.1,
            components: self.n_components(),
            trained_on: self.trained_on,
        }
    }

    /// `mean | eigenvalues | basis (row-major)`.
    pub(crate) fn to_blob(&self) -> Vec<f64> {
        let mut out: Vec<f64> = self.mean.iter().copied().collect();
        out.extend(&self.eigenvalues);
        out.extend(self.basis.transpose().iter());
        out
    }

    pub(crate) fn from_blob(m: &PcaManifest, blob: &[f64]) -> Result<(Self, usize)> {
        let n = m.rows * m.cols;
        let need = n + m.components + m.components * n;
        if blob.len() < need {
            return Err(Error::Format(format!("PCA blob holds {} values, need {need}", blob.len())));
        }
        let mean = DVector::from_column_slice(&blob[..n]);
        let eigenvalues = blob[n..n + m.components].to_vec();
        let basis = DMatrix::from_row_slice(m.components, n, &blob[n + m.components..need]);
        Ok((
            Self {
                mean,
                basis,
                eigenvalues,
                trained_on: m.trained_on,
                dims: (m.rows, m.cols),
            },
            need,
        ))
    }

    pub fn save(&self, dir: impl AsRef<Path>) -> Result<()> {
        let dir = dir.as_ref();
        fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        io::write_json(dir.join("pca.json"), &self.manifest())?;
        let path = dir.join("pca.bin");
        fs::write(&path, io::f64s_to_bytes(&self.to_blob())).map_err(|e| Error::io(path, e))
    }

    pub fn load(dir: impl AsRef<Path>) -> Result<Self> {
        let dir = dir.as_ref();
        let m: PcaManifest = io::read_json(dir.join("pca.json"))?;
        let path = dir.join("pca.bin");
        let blob = io::f64s_from_bytes(&fs::read(&path).map_err(|e| Error::io(&path, e))?)?;
        let (model, used) = Self::from_blob(&m, &blob)?;
        if used != blob.len() {
            return Err(Error::Format("trailing data in PCA blob".into()));
        }
        Ok(model)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub(crate) struct PcaManifest {
    pub rows: usize,
    pub cols: usize,
    pub components: usize,
    pub trained_on: usize,
}

/// `Y = T (X - m)`, optionally whitened.
pub fn pca_project(model: &PcaModel, img: &GrayImage, whiten: bool) -> Result<FeatureVector> {
    if img.dims() != model.dims {
        return Err(Error::dims(format!("{:?}", model.dims), format!("{:?}", img.dims())));
    }
    Ok(FeatureVector {
        values: model.project_vec(img.pixels(), whiten)?,
        provenance: Provenance::Pca { whitened: whiten },
    })
}
