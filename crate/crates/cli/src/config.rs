use std::path::Path;

use facekit::contours::ContourDetectParams;
use facekit::matching::DistanceKind;
use facekit::pipeline::{AnalyzeParams, DetectParams};
use facekit::{Error, Result};
use serde::{Deserialize, Serialize};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum Method {
    Pca,
    Wpdpca,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RecognitionConfig {
    pub method: Method,
    pub wavelet: String,
    pub level: usize,
    /// Leading features kept, in eigenvalue order.
    pub features: usize,
    pub measure: DistanceKind,
    pub whiten: bool,
    /// Best distances at or above this are reported as unknown.
    pub reject: Option<f64>,
}

impl Default for RecognitionConfig {
    fn default() -> Self {
        Self {
            method: Method::Wpdpca,
            wavelet: "sym16".into(),
            level: 3,
            features: 1000,
            measure: DistanceKind::WeightedAngle,
            whiten: false,
            reject: None,
        }
    }
}

/// Every stage's parameters in one file; missing keys take their defaults,
/// unknown keys are an error.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PipelineConfig {
    /// Seed for fixture generation and verifier training.
    pub seed: u64,
    pub detect: DetectParams,
    pub ellipse: ContourDetectParams,
    pub analyze: AnalyzeParams,
    pub recognition: RecognitionConfig,
}

impl PipelineConfig {
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|source| Error::Io { path: path.into(), source })?;
        serde_json::from_str(&text).map_err(|e| Error::Format(format!("{}: {e}", path.display())))
    }
}

/// `weighted-angle`, `euclidean`, `minkowski:3`, ...
pub fn parse_measure(s: &str) -> std::result::Result<DistanceKind, String> {
    let (name, arg) = match s.split_once(':') {
        Some((n, a)) => (n, Some(a)),
        None => (s, None),
    };
    let kind = match name {
        "minkowski" => {
            let p = arg
                .ok_or("minkowski needs an order, e.g. minkowski:3")?
                .parse::<f64>()
                .map_err(|e| e.to_string())?;
            return Ok(DistanceKind::Minkowski { p });
        }
        "manhattan" => DistanceKind::Manhattan,
        "euclidean" => DistanceKind::Euclidean,
        "angle" => DistanceKind::Angle,
        "correlation" => DistanceKind::Correlation,
        "weighted-angle" => DistanceKind::WeightedAngle,
        "simplified-mahalanobis" => DistanceKind::SimplifiedMahalanobis,
        _ => return Err(format!("unknown measure {s:?}")),
    };
    match arg {
        Some(_) => Err(format!("measure {name} takes no argument")),
        None => Ok(kind),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn default_round_trips() {
        let c = PipelineConfig::default();
        let text = facekit::io::to_canonical_json(&c).unwrap();
        let back: PipelineConfig = serde_json::from_str(&text).unwrap();
        assert_eq!(back, c);
        assert_eq!(facekit::io::to_canonical_json(&back).unwrap(), text);
    }

    #[test]
    fn unknown_keys_rejected() {
        assert!(serde_json::from_str::<PipelineConfig>(r#"{"sede": 1}"#).is_err());
        assert!(serde_json::from_str::<PipelineConfig>(r#"{"recognition": {"levels": 2}}"#).is_err());
        let partial: PipelineConfig = serde_json::from_str(r#"{"seed": 9}"#).unwrap();
        assert_eq!(partial.seed, 9);
        assert_eq!(partial.recognition, RecognitionConfig::default());
    }

    #[test]
    fn measures() {
        assert_eq!(parse_measure("weighted-angle"), Ok(DistanceKind::WeightedAngle));
        assert_eq!(parse_measure("minkowski:3"), Ok(DistanceKind::Minkowski { p: 3.0 }));
        assert!(parse_measure("minkowski").is_err());
        assert!(parse_measure("angle:2").is_err());
        assert!(parse_measure("cosine").is_err());
    }
}
