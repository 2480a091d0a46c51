use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SelectionCriterion {
    /// Features are already in descending eigenvalue order: keep the first n.
    Eigenvalue,
    /// Keep the n coordinates with the largest variance over the training
    /// vectors; ties go to the lower index.
    Variance,
}

/// Indices of the selected coordinates, in ascending order.
pub fn select_features(
    train: &[Vec<f64>],
    n: usize,
    criterion: SelectionCriterion,
) -> Result<Vec<usize>> {
    let len = train
        .first()
        .map(Vec::len)
        .ok_or_else(|| Error::EmptyInput("no training vectors".into()))?;
    if train.iter().any(|v| v.len() != len) {
        return Err(Error::param("training vectors differ in length"));
    }
    if n == 0 || n > len {
        return Err(Error::param(format!("cannot select {n} of {len} features")));
    }
    match criterion {
        SelectionCriterion::Eigenvalue => Ok((0..n).collect()),
        SelectionCriterion::Variance => {
            let r = train.len() as f64;
            let var: Vec<f64> = (0..len)
                .map(|i| {
                    let mean = train.iter().map(|v| v[i]).sum::<f64>() / r;
                    train.iter().map(|v| (v[i] - mean).powi(2)).sum::<f64>() / r
                })
                .collect();
            let mut idx: Vec<usize> = (0..len).collect();
            idx.sort_by(|&a, &b| var[b].total_cmp(&var[a]).then(a.cmp(&b)));
            idx.truncate(n);
            idx.sort_unstable();
            Ok(idx)
        }
    }
}

pub fn apply_selection(v: &[f64], idx: &[usize]) -> Vec<f64> {
    idx.iter().map(|&i| v[i]).collect()
}
