use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum DistanceKind {
    Minkowski { p: f64 },
    Manhattan,
    Euclidean,
    /// Negative cosine of the angle between the vectors.
    Angle,
    /// Negative Pearson correlation coefficient.
    Correlation,
    /// `−Σ z_i x_i y_i / √(Σx_i² Σy_i²)`.
    WeightedAngle,
    /// `−Σ z_i x_i y_i`, the numerator of the weighted angle.
    SimplifiedMahalanobis,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Preprocessing {
    #[default]
    None,
    /// Subtract the vector's own mean.
    Centred,
    /// Centre, then divide by the vector's own standard deviation.
    Standardized,
    /// Multiply each coordinate by its weight `z_i`.
    Whitened,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DistanceSpec {
    #[serde(flatten)]
    pub kind: DistanceKind,
    /// Per-coordinate weights `z_i = √(1/λ_i)`; required by the weighted
    /// kinds and by whitening.
    #[serde(default)]
    pub weights: Vec<f64>,
    #[serde(default)]
    pub preprocessing: Preprocessing,
}

impl DistanceSpec {
    pub fn new(kind: DistanceKind) -> Self {
        Self {
            kind,
            weights: Vec::new(),
            preprocessing: Preprocessing::None,
        }
    }

    pub fn with_weights(mut self, weights: Vec<f64>) -> Self {
        self.weights = weights;
        self
    }

    pub fn with_preprocessing(mut self, p: Preprocessing) -> Self {
        self.preprocessing = p;
        self
    }

    /// Weights `√(1/λ_i)` for the given eigenvalues.
    pub fn weights_from_eigenvalues(eigenvalues: &[f64]) -> Result<Vec<f64>> {
        eigenvalues
            .iter()
            .map(|&l| {
                if l > 0.0 {
                    Ok((1.0 / l).sqrt())
                } else {
                    Err(Error::param(format!("eigenvalue {l} is not positive")))
                }
            })
            .collect()
    }

    fn needs_weights(&self) -> bool {
        matches!(
            self.kind,
            DistanceKind::WeightedAngle | DistanceKind::SimplifiedMahalanobis
        ) || self.preprocessing == Preprocessing::Whitened
    }

    pub fn validate(&self, len: usize) -> Result<()> {
        if let DistanceKind::Minkowski { p } = self.kind {
            if !(p > 0.0) {
                return Err(Error::param(format!("minkowski p must be > 0, got {p}")));
            }
        }
        if self.needs_weights() {
            if self.weights.len() != len {
                return Err(Error::dims(
                    format!("{len} weights"),
                    format!("{} weights", self.weights.len()),
                ));
            }
            if self.weights.iter().any(|&z| !(z > 0.0) || !z.is_finite()) {
                return Err(Error::param("weights must be positive and finite"));
            }
        }
        Ok(())
    }
}

fn preprocess(spec: &DistanceSpec, v: &[f64]) -> Result<Vec<f64>> {
    let n = v.len() as f64;
    match spec.preprocessing {
        Preprocessing::None => Ok(v.to_vec()),
        Preprocessing::Whitened => Ok(v.iter().zip(&spec.weights).map(|(x, z)| x * z).collect()),
        Preprocessing::Centred | Preprocessing::Standardized => {
            let mean = v.iter().sum::<f64>() / n;
            let mut out: Vec<f64> = v.iter().map(|x| x - mean).collect();
            if spec.preprocessing == Preprocessing::Standardized {
                let sd = (out.iter().map(|x| x * x).sum::<f64>() / n).sqrt();
                if sd == 0.0 {
                    return Err(Error::Degenerate("cannot standardize a constant vector".into()));
                }
                out.iter_mut().for_each(|x| *x /= sd);
            }
            Ok(out)
        }
    }
}

fn norm_product(x: &[f64], y: &[f64]) -> Result<f64> {
    let nn = x.iter().map(|a| a * a).sum::<f64>() * y.iter().map(|a| a * a).sum::<f64>();
    if nn == 0.0 {
        return Err(Error::Degenerate("zero-norm vector in angle distance".into()));
    }
    Ok(nn.sqrt())
}

/// Distance between two feature vectors; smaller is more similar.
pub fn distance(spec: &DistanceSpec, x: &[f64], y: &[f64]) -> Result<f64> {
    if x.len() != y.len() {
        return Err(Error::dims(x.len(), y.len()));
    }
    if x.is_empty() {
        return Err(Error::EmptyInput("empty feature vector".into()));
    }
    spec.validate(x.len())?;
    let (x, y) = (preprocess(spec, x)?, preprocess(spec, y)?);
    let pairs = || x.iter().zip(&y);
    Ok(match spec.kind {
        DistanceKind::Minkowski { p } => pairs().map(|(a, b)| (a - b).abs().powf(p)).sum::<f64>().powf(1.0 / p),
        DistanceKind::Manhattan => pairs().map(|(a, b)| (a - b).abs()).sum(),
        DistanceKind::Euclidean => pairs().map(|(a, b)| (a - b).powi(2)).sum::<f64>().sqrt(),
        DistanceKind::Angle => -pairs().map(|(a, b)| a * b).sum::<f64>() / norm_product(&x, &y)?,
        DistanceKind::Correlation => {
            let n = x.len() as f64;
            let (mx, my) = (x.iter().sum::<f64>() / n, y.iter().sum::<f64>() / n);
            let sxy: f64 = pairs().map(|(a, b)| (a - mx) * (b - my)).sum();
            let sxx: f64 = x.iter().map(|a| (a - mx).powi(2)).sum();
            let syy: f64 = y.iter().map(|b| (b - my).powi(2)).sum();
            if sxx == 0.0 || syy == 0.0 {
                return Err(Error::Degenerate("zero variance in correlation distance".into()));
            }
            -sxy / (sxx * syy).sqrt()
        }
        DistanceKind::WeightedAngle => {
            let num: f64 = pairs().zip(&spec.weights).map(|((a, b), z)| z * a * b).sum();
            -num / norm_product(&x, &y)?
        }
        DistanceKind::SimplifiedMahalanobis => {
            -pairs().zip(&spec.weights).map(|((a, b), z)| z * a * b).sum::<f64>()
        }
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Match {
    /// Gallery index of the nearest vector, `None` when rejected.
    pub index: Option<usize>,
    pub distance: f64,
}

/// Nearest gallery vector; ties go to the lowest index. The match is
/// rejected when its distance is `≥ tau_reject`.
pub fn nearest_neighbor(
    gallery: &[Vec<f64>],
    probe: &[f64],
    spec: &DistanceSpec,
    tau_reject: f64,
) -> Result<Match> {
    if gallery.is_empty() {
        return Err(Error::EmptyInput("empty gallery".into()));
    }
    let mut best = (0usize, f64::INFINITY);
    for (i, g) in gallery.iter().enumerate() {
        let d = distance(spec, g, probe)?;
        if d < best.1 || i == 0 {
            best = (i, d);
        }
    }
    Ok(Match {
        index: (best.1 < tau_reject).then_some(best.0),
        distance: best.1,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn d(kind: DistanceKind, x: &[f64], y: &[f64]) -> f64 {
        distance(&DistanceSpec::new(kind), x, y).unwrap()
    }

    #[test]
    fn simple_values() {
        let (x, y) = ([1.0, 2.0], [3.0, 5.0]);
        assert_eq!(d(DistanceKind::Manhattan, &x, &y), 5.0);
        assert!((d(DistanceKind::Euclidean, &x, &y) - 13f64.sqrt()).abs() < 1e-15);
        assert!((d(DistanceKind::Minkowski { p: 2.0 }, &x, &y) - 13f64.sqrt()).abs() < 1e-12);
        assert!((d(DistanceKind::Minkowski { p: 1.0 }, &x, &y) - 5.0).abs() < 1e-12);
    }

    #[test]
    fn identical_vectors() {
        let x = [0.3, -1.0, 2.5, 4.0];
        for p in [0.5, 1.0, 3.0] {
            assert_eq!(d(DistanceKind::Minkowski { p }, &x, &x), 0.0);
        }
        assert!((d(DistanceKind::Angle, &x, &x) + 1.0).abs() < 1e-15);
        assert!((d(DistanceKind::Correlation, &x, &x) + 1.0).abs() < 1e-15);
    }

    #[test]
    fn degenerate_inputs_error() {
        assert!(distance(&DistanceSpec::new(DistanceKind::Angle), &[0.0, 0.0], &[1.0, 0.0]).is_err());
        assert!(distance(&DistanceSpec::new(DistanceKind::Correlation), &[1.0, 1.0], &[1.0, 0.0]).is_err());
        assert!(distance(&DistanceSpec::new(DistanceKind::WeightedAngle), &[1.0], &[1.0]).is_err());
        assert!(distance(&DistanceSpec::new(DistanceKind::Minkowski { p: 0.0 }), &[1.0], &[1.0]).is_err());
        assert!(distance(&DistanceSpec::new(DistanceKind::Euclidean), &[1.0], &[1.0, 2.0]).is_err());
    }

    #[test]
    fn preprocessing_modes() {
        let x = [1.0, 2.0, 3.0];
        let y = [2.0, 4.0, 6.0];
        // standardized vectors of proportional data coincide
        let s = DistanceSpec::new(DistanceKind::Euclidean).with_preprocessing(Preprocessing::Standardized);
        assert!(distance(&s, &x, &y).unwrap() < 1e-12);
        let c = DistanceSpec::new(DistanceKind::Manhattan).with_preprocessing(Preprocessing::Centred);
        assert!((distance(&c, &x, &y).unwrap() - 2.0).abs() < 1e-12);
        let w = DistanceSpec::new(DistanceKind::Manhattan)
            .with_weights(vec![1.0, 0.5, 2.0])
            .with_preprocessing(Preprocessing::Whitened);
        assert!((distance(&w, &x, &y).unwrap() - (1.0 + 1.0 + 6.0)).abs() < 1e-12);
    }

    #[test]
    fn weighted_angle_times_norms_is_simplified_mahalanobis() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        for _ in 0..200 {
            let n = rng.random_range(1..20);
            let v = |rng: &mut ChaCha8Rng| (0..n).map(|_| rng.random_range(-3.0..3.0)).collect::<Vec<f64>>();
            let (x, y) = (v(&mut rng), v(&mut rng));
            let z: Vec<f64> = (0..n).map(|_| rng.random_range(0.1..2.0)).collect();
            let wa = distance(&DistanceSpec::new(DistanceKind::WeightedAngle).with_weights(z.clone()), &x, &y).unwrap();
            let sm = distance(&DistanceSpec::new(DistanceKind::SimplifiedMahalanobis).with_weights(z), &x, &y).unwrap();
            let norms = (x.iter().map(|a| a * a).sum::<f64>() * y.iter().map(|a| a * a).sum::<f64>()).sqrt();
            assert!((wa * norms - sm).abs() <= 1e-10 * sm.abs().max(1.0));
        }
    }

    #[test]
    fn nearest_neighbor_basics() {
        let gallery: Vec<Vec<f64>> = (0..6).map(|i| vec![i as f64, 1.0]).collect();
        let spec = DistanceSpec::new(DistanceKind::Euclidean);
        let m = nearest_neighbor(&gallery, &gallery[3], &spec, f64::INFINITY).unwrap();
        assert_eq!(m, Match { index: Some(3), distance: 0.0 });
        let r = nearest_neighbor(&gallery, &gallery[3], &spec, -1e300).unwrap();
        assert_eq!(r.index, None);
        // equal distances: lowest index wins
        let m = nearest_neighbor(&gallery, &[2.5, 1.0], &spec, f64::INFINITY).unwrap();
        assert_eq!(m.index, Some(2));
        assert!(nearest_neighbor(&[], &[1.0], &spec, 1.0).is_err());
    }

    #[test]
    fn spec_json_round_trip() {
        let s = DistanceSpec::new(DistanceKind::Minkowski { p: 3.0 }).with_preprocessing(Preprocessing::Centred);
        let json = serde_json::to_string(&s).unwrap();
        assert_eq!(serde_json::from_str::<DistanceSpec>(&json).unwrap(), s);
        let wa: DistanceSpec = serde_json::from_str(r#"{"kind":"weighted-angle","weights":[1.0]}"#).unwrap();
        assert_eq!(wa.kind, DistanceKind::WeightedAngle);
    }
}
