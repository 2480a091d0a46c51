use std::fs;
use std::path::Path;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use super::filters::WaveletSpec;
use super::pca::{PcaManifest, PcaModel};
use super::wavelet::wpd;
use super::{FeatureVector, Provenance};
use crate::error::{Error, Result};
use crate::image::GrayImage;
use crate::io;

/// Running sums of one subband over the training set; covariance and mean
/// follow exactly from them, so images can be added and removed.
#[derive(Clone, Debug, PartialEq)]
struct SubbandStats {
    sum: DVector<f64>,
    sum_sq: DMatrix<f64>,
}

/// One PCA per wavelet-packet subband, with features ordered by the merged
/// eigenvalue ranking of all subbands.
#[derive(Clone, Debug, PartialEq)]
pub struct WpdPcaModel {
    wavelet: WaveletSpec,
    level: usize,
    dims: (usize, usize),
    count: usize,
    stats: Vec<SubbandStats>,
    models: Vec<PcaModel>,
    /// `(subband, component)` for every merged feature, largest eigenvalue
    /// first.
    order: Vec<(usize, usize)>,
}

fn subband_dims(dims: (usize, usize), level: usize) -> (usize, usize) {
    (dims.0 >> level, dims.1 >> level)
}

/// Decompose `images` and return, per subband, a `sub_n x r` data matrix.
fn decompose_batch(
    images: &[GrayImage],
    w: &WaveletSpec,
    level: usize,
    dims: (usize, usize),
) -> Result<Vec<DMatrix<f64>>> {
    let k = 1usize << (2 * level);
    let (sr, sc) = subband_dims(dims, level);
    let mut out = vec![DMatrix::zeros(sr * sc, images.len()); k];
    for (j, img) in images.iter().enumerate() {
        if img.dims() != dims {
            return Err(Error::dims(format!("{dims:?}"), format!("{:?}", img.dims())));
        }
        for (b, band) in wpd(img, w, level)?.into_iter().enumerate() {
            out[b].column_mut(j).copy_from_slice(band.pixels());
        }
    }
    Ok(out)
}

/// Train `4^level` subband PCAs on the wavelet-packet decompositions of
/// `images`.
pub fn wpd_pca_train(images: &[GrayImage], w: &WaveletSpec, level: usize) -> Result<WpdPcaModel> {
    if images.len() < 2 {
        return Err(Error::EmptyInput(format!(
            "WPD+PCA needs at least 2 training images, got {}",
            images.len()
        )));
    }
    let dims = images[0].dims();
    let (sr, sc) = subband_dims(dims, level);
    if sr << level != dims.0 || sc << level != dims.1 || sr == 0 || sc == 0 {
        return Err(Error::param(format!(
            "{}x{} images are not divisible by 2^{level}",
            dims.0, dims.1
        )));
    }
    let n = sr * sc;
    let k = 1usize << (2 * level);
    let mut model = WpdPcaModel {
        wavelet: w.clone(),
        level,
        dims,
        count: 0,
        stats: vec![
            SubbandStats {
                sum: DVector::zeros(n),
                sum_sq: DMatrix::zeros(n, n),
            };
            k
        ],
        models: Vec::new(),
        order: Vec::new(),
    };
    model.add(images)?;
    Ok(model)
}

impl WpdPcaModel {
    fn update(&mut self, images: &[GrayImage], sign: f64) -> Result<()> {
        let batches = decompose_batch(images, &self.wavelet, self.level, self.dims)?;
        for (st, x) in self.stats.iter_mut().zip(&batches) {
            for col in x.column_iter() {
                st.sum.axpy(sign, &col, 1.0);
            }
            st.sum_sq.gemm(sign, x, &x.transpose(), 1.0);
        }
        Ok(())
    }

    /// Add training images and re-solve every subband.
    pub fn add(&mut self, images: &[GrayImage]) -> Result<()> {
        self.update(images, 1.0)?;
        self.count += images.len();
        self.solve()
    }

    /// Remove images previously added and re-solve.
    pub fn remove(&mut self, images: &[GrayImage]) -> Result<()> {
        if self.count < images.len() + 2 {
            return Err(Error::EmptyInput(
                "removal would leave fewer than 2 training images".into(),
            ));
        }
        self.update(images, -1.0)?;
        self.count -= images.len();
        self.solve()
    }

    fn solve(&mut self) -> Result<()> {
        let r = self.count as f64;
        let sd = subband_dims(self.dims, self.level);
        self.models = self
            .stats
            .iter()
            .map(|st| {
                let mean = &st.sum / r;
                let cov = &st.sum_sq / r - &mean * mean.transpose();
                // symmetrize away the rounding of the rank-k updates
                let cov = (&cov + cov.transpose()) * 0.5;
                PcaModel::from_covariance(mean, cov, self.count, sd)
            })
            .collect::<Result<_>>()?;
        self.order = merged_order(&self.models);
        Ok(())
    }

    pub fn wavelet(&self) -> &WaveletSpec {
        &self.wavelet
    }

    pub fn level(&self) -> usize {
        self.level
    }

    pub fn dims(&self) -> (usize, usize) {
        self.dims
    }

    pub fn trained_on(&self) -> usize {
        self.count
    }

    pub fn subband_models(&self) -> &[PcaModel] {
        &self.models
    }

    pub fn merged_order(&self) -> &[(usize, usize)] {
        &self.order
    }

    /// Eigenvalues in merged feature order.
    pub fn merged_eigenvalues(&self) -> Vec<f64> {
        self.order
            .iter()
            .map(|&(b, c)| self.models[b].eigenvalues()[c])
            .collect()
    }

    pub fn n_features(&self) -> usize {
        self.order.len()
    }

    pub fn save(&self, dir: impl AsRef<Path>) -> Result<()> {
        let dir = dir.as_ref();
        fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        let manifest = WpdPcaManifest {
            wavelet: self.wavelet.name().to_string(),
            level: self.level,
            rows: self.dims.0,
            cols: self.dims.1,
            trained_on: self.count,
            components: self.models.iter().map(PcaModel::n_components).collect(),
        };
        io::write_json(dir.join("wpdpca.json"), &manifest)?;
        let blob: Vec<f64> = self.models.iter().flat_map(|m| m.to_blob()).collect();
        let path = dir.join("wpdpca.bin");
        fs::write(&path, io::f64s_to_bytes(&blob)).map_err(|e| Error::io(path, e))?;
        let stats: Vec<f64> = self
            .stats
            .iter()
            .flat_map(|s| s.sum.iter().chain(s.sum_sq.iter()).copied().collect::<Vec<_>>())
            .collect();
        let path = dir.join("wpdpca_stats.bin");
        fs::write(&path, io::f64s_to_bytes(&stats)).map_err(|e| Error::io(path, e))
    }

    pub fn load(dir: impl AsRef<Path>) -> Result<Self> {
        let dir = dir.as_ref();
        let m: WpdPcaManifest = io::read_json(dir.join("wpdpca.json"))?;
        let wavelet = WaveletSpec::by_name(&m.wavelet)?;
        let k = 1usize << (2 * m.level);
        if m.components.len() != k {
            return Err(Error::Format(format!(
                "manifest lists {} subbands, level {} needs {k}",
                m.components.len(),
                m.level
            )));
        }
        let (sr, sc) = subband_dims((m.rows, m.cols), m.level);
        let read = |name: &str| -> Result<Vec<f64>> {
            let path = dir.join(name);
            io::f64s_from_bytes(&fs::read(&path).map_err(|e| Error::io(&path, e))?)
        };
        let blob = read("wpdpca.bin")?;
        let mut models = Vec::with_capacity(k);
        let mut pos = 0;
        for &components in &m.components {
            let pm = PcaManifest {
                rows: sr,
                cols: sc,
                components,
                trained_on: m.trained_on,
            };
            let (model, used) = PcaModel::from_blob(&pm, &blob[pos..])?;
            pos += used;
            models.push(model);
        }
        let n = sr * sc;
        let raw = read("wpdpca_stats.bin")?;
        if raw.len() != k * (n + n * n) || pos != blob.len() {
            return Err(Error::Format("WPD+PCA blob sizes do not match manifest".into()));
        }
        let stats = raw
            .chunks_exact(n + n * n)
            .map(|c| SubbandStats {
                sum: DVector::from_column_slice(&c[..n]),
                sum_sq: DMatrix::from_column_slice(n, n, &c[n..]),
            })
            .collect();
        let order = merged_order(&models);
        Ok(Self {
            wavelet,
            level: m.level,
            dims: (m.rows, m.cols),
            count: m.trained_on,
            stats,
            models,
            order,
        })
    }
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct WpdPcaManifest {
    wavelet: String,
    level: usize,
    rows: usize,
    cols: usize,
    trained_on: usize,
    components: Vec<usize>,
}

/// Stable descending sort of the concatenated per-subband eigenvalue lists.
fn merged_order(models: &[PcaModel]) -> Vec<(usize, usize)> {
    let mut all: Vec<(usize, usize, f64)> = models
        .iter()
        .enumerate()
        .flat_map(|(b, m)| m.eigenvalues().iter().enumerate().map(move |(c, &l)| (b, c, l)))
        .collect();
    all.sort_by(|x, y| y.2.total_cmp(&x.2));
    all.into_iter().map(|(b, c, _)| (b, c)).collect()
}

/// Decompose, project every subband into its eigenspace and return the
/// features in merged eigenvalue order.
pub fn wpd_pca_project(model: &WpdPcaModel, img: &GrayImage, whiten: bool) -> Result<FeatureVector> {
    if img.dims() != model.dims {
        return Err(Error::dims(format!("{:?}", model.dims), format!("{:?}", img.dims())));
    }
    let bands = wpd(img, &model.wavelet, model.level)?;
    let per_band: Vec<Vec<f64>> = bands
        .iter()
        .zip(&model.models)
        .map(|(b, m)| m.project_vec(b.pixels(), whiten))
        .collect::<Result<_>>()?;
    Ok(FeatureVector {
        values: model.order.iter().map(|&(b, c)| per_band[b][c]).collect(),
        provenance: Provenance::WpdPca { whitened: whiten },
    })
}
