use serde::{Deserialize, Serialize};

use super::matrix::DistanceMatrix;
use super::metrics::CmcCurve;
use crate::error::{Error, Result};

/// Shortlist size for a rank percent: `⌈G·p/100⌉`, at least one.
pub fn shortlist_len(gallery: usize, rank_percent: f64) -> usize {
    ((gallery as f64 * rank_percent / 100.0).ceil() as usize).clamp(1, gallery)
}

/// Gallery indices ordered by increasing distance; ties keep index order.
pub(crate) fn ranked(row: &[f64]) -> Vec<usize> {
    let mut order: Vec<usize> = (0..row.len()).collect();
    order.sort_by(|&a, &b| row[a].total_cmp(&row[b]));
    order
}

/// Merge two recognizers serially: for every probe the best `rank_percent`
/// of the gallery under `a` keep their distances from `b`; the rest are
/// pushed past every kept distance in `a`'s order.
pub fn combine_serial(a: &DistanceMatrix, b: &DistanceMatrix, rank_percent: f64) -> Result<DistanceMatrix> {
    if a.probe_labels() != b.probe_labels() || a.gallery_labels() != b.gallery_labels() {
        return Err(Error::dims(
            format!("{}x{} matrix with the same labels", a.n_probes(), a.n_gallery()),
            format!("{}x{}", b.n_probes(), b.n_gallery()),
        ));
    }
    if !(rank_percent > 0.0 && rank_percent <= 100.0) {
        return Err(Error::param(format!("rank_percent must be in (0, 100], got {rank_percent}")));
    }
    let g = a.n_gallery();
    let keep = shortlist_len(g, rank_percent);
    let mut values = Vec::with_capacity(a.n_probes() * g);
    for p in 0..a.n_probes() {
        let order = ranked(a.row(p));
        let brow = b.row(p);
        let mut out = vec![0.0; g];
        let max_kept = order[..keep].iter().map(|&i| brow[i]).fold(f64::NEG_INFINITY, f64::max);
        for (pos, &i) in order.iter().enumerate() {
            out[i] = if pos < keep {
                brow[i]
            } else {
                max_kept + 1.0 + (pos - keep) as f64
            };
        }
        values.extend(out);
    }
    DistanceMatrix::new(a.probe_labels().to_vec(), a.gallery_labels().to_vec(), values)
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct CombineAdvice {
    /// The shortlist reaches A's 100% rank, so no correct identity is lost.
    pub guaranteed: bool,
    /// Lower bound on the combined First1: `First1(B) − (100 − CMC_A(K))`.
    pub first1_bound: f64,
    /// Predicted probes per second: `1/(1/speed_a + (p/100)/speed_b)`.
    pub throughput: f64,
}

/// Predict the result of serial combining from the component curves and
/// their speeds (probes per second).
pub fn combine_advisor(
    cmc_a: &CmcCurve,
    speed_a: f64,
    cmc_b: &CmcCurve,
    speed_b: f64,
    rank_percent: f64,
) -> CombineAdvice {
    let k = shortlist_len(cmc_a.rates.len(), rank_percent);
    CombineAdvice {
        guaranteed: rank_percent >= cmc_a.cum100,
        first1_bound: (cmc_b.first1 - (100.0 - cmc_a.at(k))).max(0.0),
        throughput: 1.0 / (1.0 / speed_a + rank_percent / 100.0 / speed_b),
    }
}
