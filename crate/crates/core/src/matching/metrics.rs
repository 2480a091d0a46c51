use serde::{Deserialize, Serialize};

use super::matrix::DistanceMatrix;
use crate::error::{Error, Result};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CmcCurve {
    /// `rates[k-1]` is the % of probes whose correct identity is within rank `k`.
    pub rates: Vec<f64>,
    pub first1: f64,
    /// Smallest rank, as a % of the gallery size, at which the rate reaches 100%.
    pub cum100: f64,
    /// Area above the curve over rank % ∈ [100/G, 100], on a [0, 10⁴] scale.
    pub cmca: f64,
}

impl CmcCurve {
    /// Rate at rank `k` (1-based); ranks past the gallery size give 100%.
    pub fn at(&self, k: usize) -> f64 {
        if k == 0 {
            0.0
        } else {
            self.rates[(k - 1).min(self.rates.len() - 1)]
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct RocPoint {
    pub threshold: f64,
    pub far: f64,
    pub frr: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RocCurve {
    /// Thresholds in increasing order; the first lies below every score.
    pub points: Vec<RocPoint>,
    pub eer: f64,
    /// Trapezoidal area under FRR over FAR, both in %, on a [0, 10⁴] scale.
    pub roca: f64,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct MetricsBundle {
    pub first1: f64,
    pub eer: f64,
    pub cum100: f64,
    pub cmca: f64,
    pub roca: f64,
}

/// Rank of the correct identity for every probe. Equal distances count
/// against the probe: the correct entry is placed after all competitors at
/// its distance.
pub fn correct_ranks(dm: &DistanceMatrix) -> Result<Vec<usize>> {
    (0..dm.n_probes())
        .map(|p| {
            let label = &dm.probe_labels()[p];
            let row = dm.row(p);
            let correct = dm
                .gallery_labels()
                .iter()
                .zip(row)
                .filter(|(l, _)| *l == label)
                .map(|(_, &d)| d)
                .reduce(f64::min)
                .ok_or_else(|| Error::param(format!("probe label {label:?} is missing from the gallery")))?;
            let beaten = dm
                .gallery_labels()
                .iter()
                .zip(row)
                .filter(|(l, &d)| *l != label && d <= correct)
                .count();
            Ok(beaten + 1)
        })
        .collect()
}

pub fn cmc(dm: &DistanceMatrix) -> Result<CmcCurve> {
    let ranks = correct_ranks(dm)?;
    let g = dm.n_gallery();
    let mut counts = vec![0usize; g + 1];
    for &r in &ranks {
        counts[r] += 1;
    }
    let n = ranks.len() as f64;
    let mut acc = 0usize;
    let rates: Vec<f64> = (1..=g)
        .map(|k| {
            acc += counts[k];
            100.0 * acc as f64 / n
        })
        .collect();
    let k_full = ranks.iter().copied().max().unwrap_or(1);
    let step = 100.0 / g as f64;
    let cmca = rates
        .windows(2)
        .map(|w| step * ((100.0 - w[0]) + (100.0 - w[1])) / 2.0)
        .sum();
    Ok(CmcCurve {
        first1: rates[0],
        cum100: 100.0 * k_full as f64 / g as f64,
        cmca,
        rates,
    })
}

/// Sweep a decision threshold `t` over all scores (distances): a pair is
/// accepted when its distance is `≤ t`.
pub fn roc(genuine: &[f64], impostor: &[f64]) -> Result<RocCurve> {
    if genuine.is_empty() || impostor.is_empty() {
        return Err(Error::EmptyInput("ROC needs genuine and impostor scores".into()));
    }
    let mut g = genuine.to_vec();
    let mut im = impostor.to_vec();
    g.sort_by(f64::total_cmp);
    im.sort_by(f64::total_cmp);
    let mut thresholds: Vec<f64> = g.iter().chain(&im).copied().collect();
    thresholds.sort_by(f64::total_cmp);
    thresholds.dedup();

    let pct = |count: usize, total: usize| 100.0 * count as f64 / total as f64;
    let mut points = vec![RocPoint {
        threshold: f64::NEG_INFINITY,
        far: 0.0,
        frr: 100.0,
    }];
    let (mut gi, mut ii) = (0usize, 0usize);
    for &t in &thresholds {
        while gi < g.len() && g[gi] <= t {
            gi += 1;
        }
        while ii < im.len() && im[ii] <= t {
            ii += 1;
        }
        points.push(RocPoint {
            threshold: t,
            far: pct(ii, im.len()),
            frr: pct(g.len() - gi, g.len()),
        });
    }

    let mut eer = 100.0;
    for w in points.windows(2) {
        let (d0, d1) = (w[0].far - w[0].frr, w[1].far - w[1].frr);
        if d0 <= 0.0 && d1 >= 0.0 {
            let s = if d1 == d0 { 0.0 } else { -d0 / (d1 - d0) };
            eer = w[0].far + s * (w[1].far - w[0].far);
            break;
        }
    }
    let roca = points
        .windows(2)
        .map(|w| (w[1].far - w[0].far) * (w[0].frr + w[1].frr) / 2.0)
        .sum();
    Ok(RocCurve { points, eer, roca })
}

pub fn evaluate(dm: &DistanceMatrix) -> Result<(MetricsBundle, CmcCurve, RocCurve)> {
    let c = cmc(dm)?;
    let (genuine, impostor) = dm.split_scores();
    let r = roc(&genuine, &impostor)?;
    let bundle = MetricsBundle {
        first1: c.first1,
        eer: r.eer,
        cum100: c.cum100,
        cmca: c.cmca,
        roca: r.roca,
    };
    Ok((bundle, c, r))
}
