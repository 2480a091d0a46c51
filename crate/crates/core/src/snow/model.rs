use std::collections::HashMap;
use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::features::{FeatureCode, FEATURE_SPACE};
use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Label {
    Face,
    Nonface,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SnowParams {
    /// Promotion factor, > 1.
    pub alpha: f64,
    /// Demotion factor, in (0, 1).
    pub beta: f64,
    pub initial_weight: f64,
    /// A code is labelled face when its margin exceeds this value.
    pub threshold: f64,
    pub epochs: usize,
}

impl Default for SnowParams {
    fn default() -> Self {
        Self {
            alpha: 1.25,
            beta: 0.8,
            initial_weight: 1.0,
            threshold: 0.0,
            epochs: 20,
        }
    }
}

impl SnowParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.alpha > 1.0) || !(self.beta > 0.0 && self.beta < 1.0) {
            return Err(Error::param(format!(
                "need alpha > 1 > beta > 0, got alpha={}, beta={}",
                self.alpha, self.beta
            )));
        }
        if !(self.initial_weight > 0.0) {
            return Err(Error::param("initial weight must be positive"));
        }
        Ok(())
    }
}

/// Two Winnow target units over a sparse binary feature space. Weights are
/// allocated on first update; untouched ids weigh `initial_weight`.
#[derive(Clone, Debug, PartialEq)]
pub struct SnowModel {
    params: SnowParams,
    face: HashMap<u32, f64>,
    nonface: HashMap<u32, f64>,
    ready: bool,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct TrainSummary {
    pub epochs_run: usize,
    pub mistakes_per_epoch: Vec<usize>,
    /// True when an epoch finished without a single mistake.
    pub converged: bool,
}

impl SnowModel {
    /// A model that has not been trained; classifying with it is an error.
    pub fn new(params: SnowParams) -> Self {
        Self {
            params,
            face: HashMap::new(),
            nonface: HashMap::new(),
            ready: false,
        }
    }

    /// Usable model whose units both hold the initial weight everywhere.
    pub fn uniform(params: SnowParams) -> Self {
        Self {
            ready: true,
            ..Self::new(params)
        }
    }

    pub fn params(&self) -> &SnowParams {
        &self.params
    }

    pub fn set_threshold(&mut self, threshold: f64) {
        self.params.threshold = threshold;
    }

    pub fn is_trained(&self) -> bool {
        self.ready
    }

    fn unit(&self, label: Label) -> &HashMap<u32, f64> {
        match label {
            Label::Face => &self.face,
            Label::Nonface => &self.nonface,
        }
    }

    pub fn weight(&self, label: Label, id: u32) -> f64 {
        self.unit(label)
            .get(&id)
            .copied()
            .unwrap_or(self.params.initial_weight)
    }

    /// Explicitly stored weights of one unit.
    pub fn stored_weights(&self, label: Label) -> impl Iterator<Item = (u32, f64)> + '_ {
        self.unit(label).iter().map(|(&k, &v)| (k, v))
    }

    pub fn activation(&self, label: Label, code: &FeatureCode) -> f64 {
        code.ids().iter().map(|&id| self.weight(label, id)).sum()
    }

    /// `activation(face) - activation(nonface)`.
    pub fn margin(&self, code: &FeatureCode) -> f64 {
        self.activation(Label::Face, code) - self.activation(Label::Nonface, code)
    }

    /// Label and margin; ties at the threshold go to nonface.
    pub fn classify(&self, code: &FeatureCode) -> Result<(Label, f64)> {
        if !self.ready {
            return Err(Error::Untrained);
        }
        let m = self.margin(code);
        let label = if m > self.params.threshold {
            Label::Face
        } else {
            Label::Nonface
        };
        Ok((label, m))
    }

    fn scale(&mut self, label: Label, code: &FeatureCode, factor: f64) {
        let init = self.params.initial_weight;
        let unit = match label {
            Label::Face => &mut self.face,
            Label::Nonface => &mut self.nonface,
        };
        for &id in code.ids() {
            *unit.entry(id).or_insert(init) *= factor;
        }
    }

    /// Mistake-driven update for one example; returns whether it was a
    /// mistake. The true target is promoted and the other demoted.
    pub fn update(&mut self, code: &FeatureCode, truth: Label) -> bool {
        let predicted = if self.margin(code) > self.params.threshold {
            Label::Face
        } else {
            Label::Nonface
        };
        if predicted == truth {
            return false;
        }
        let other = match truth {
            Label::Face => Label::Nonface,
            Label::Nonface => Label::Face,
        };
        self.scale(truth, code, self.params.alpha);
        self.scale(other, code, self.params.beta);
        true
    }

    pub fn save(&self, dir: impl AsRef<Path>) -> Result<()> {
        let dir = dir.as_ref();
        fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        let sorted = |m: &HashMap<u32, f64>| {
            let mut v: Vec<(u32, f64)> = m.iter().map(|(&k, &w)| (k, w)).collect();
            v.sort_unstable_by_key(|e| e.0);
            v
        };
        let (face, nonface) = (sorted(&self.face), sorted(&self.nonface));
        let manifest = SnowManifest {
            params: self.params,
            feature_space: FEATURE_SPACE,
            face_weights: face.len(),
            nonface_weights: nonface.len(),
            trained: self.ready,
        };
        crate::io::write_json(dir.join("snow.json"), &manifest)?;
        let mut blob = Vec::with_capacity(16 * (face.len() + nonface.len()));
        for (id, w) in face.iter().chain(&nonface) {
            blob.extend_from_slice(&u64::from(*id).to_le_bytes());
            blob.extend_from_slice(&w.to_le_bytes());
        }
        let path = dir.join("snow_weights.bin");
        fs::write(&path, blob).map_err(|e| Error::io(path, e))
    }

    pub fn load(dir: impl AsRef<Path>) -> Result<Self> {
        let dir = dir.as_ref();
        let manifest: SnowManifest = crate::io::read_json(dir.join("snow.json"))?;
        manifest.params.validate()?;
        let path = dir.join("snow_weights.bin");
        let blob = fs::read(&path).map_err(|e| Error::io(&path, e))?;
        let total = manifest.face_weights + manifest.nonface_weights;
        if blob.len() != 16 * total {
            return Err(Error::Format(format!(
                "weight table holds {} bytes, manifest expects {}",
                blob.len(),
                16 * total
            )));
        }
        let mut model = Self::new(manifest.params);
        model.ready = manifest.trained;
        for (k, chunk) in blob.chunks_exact(16).enumerate() {
            let id = u64::from_le_bytes(chunk[..8].try_into().expect("8 bytes"));
            let w = f64::from_le_bytes(chunk[8..].try_into().expect("8 bytes"));
            if id >= u64::from(manifest.feature_space) || !(w > 0.0) {
                return Err(Error::Format(format!("bad weight entry {k}: id {id}, weight {w}")));
            }
            let unit = if k < manifest.face_weights {
                &mut model.face
            } else {
                &mut model.nonface
            };
            unit.insert(id as u32, w);
        }
        Ok(model)
    }
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct SnowManifest {
    params: SnowParams,
    feature_space: u32,
    face_weights: usize,
    nonface_weights: usize,
    trained: bool,
}

/// Train from scratch, visiting examples in the given order each epoch and
/// stopping early after an epoch without mistakes.
pub fn snow_train(
    examples: &[(FeatureCode, Label)],
    params: &SnowParams,
) -> Result<(SnowModel, TrainSummary)> {
    params.validate()?;
    if examples.is_empty() {
        return Err(Error::EmptyInput("training examples".into()));
    }
    let mut model = SnowModel::uniform(*params);
    let mut summary = TrainSummary {
        epochs_run: 0,
        mistakes_per_epoch: Vec::new(),
        converged: false,
    };
    for _ in 0..params.epochs {
        let mistakes = examples
            .iter()
            .filter(|(code, label)| model.update(code, *label))
            .count();
        summary.epochs_run += 1;
        summary.mistakes_per_epoch.push(mistakes);
        if mistakes == 0 {
            summary.converged = true;
            break;
        }
    }
    log::debug!(
        "snow training: {} epochs, mistakes {:?}",
        summary.epochs_run,
        summary.mistakes_per_epoch
    );
    Ok((model, summary))
}
