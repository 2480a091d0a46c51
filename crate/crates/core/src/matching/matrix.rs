use std::path::Path;

use serde::{Deserialize, Serialize};

use super::distance::{distance, DistanceSpec};
use crate::error::{Error, Result};
use crate::io::fmt_f64;

/// Probe-by-gallery distances with the identity label of every row and column.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DistanceMatrix {
    probe_labels: Vec<String>,
    gallery_labels: Vec<String>,
    values: Vec<f64>,
}

impl DistanceMatrix {
    pub fn new(probe_labels: Vec<String>, gallery_labels: Vec<String>, values: Vec<f64>) -> Result<Self> {
        if probe_labels.is_empty() || gallery_labels.is_empty() {
            return Err(Error::EmptyInput("distance matrix needs probes and gallery".into()));
        }
        let expect = probe_labels.len() * gallery_labels.len();
        if values.len() != expect {
            return Err(Error::dims(expect, values.len()));
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::param("distance matrix entries must be finite"));
        }
        Ok(Self {
            probe_labels,
            gallery_labels,
            values,
        })
    }

    pub fn from_fn(
        probe_labels: Vec<String>,
        gallery_labels: Vec<String>,
        mut f: impl FnMut(usize, usize) -> f64,
    ) -> Result<Self> {
        let g = gallery_labels.len();
        let values = (0..probe_labels.len() * g).map(|k| f(k / g, k % g)).collect();
        Self::new(probe_labels, gallery_labels, values)
    }

    /// Distances between every probe and gallery feature vector.
    pub fn from_features(
        probes: &[(String, Vec<f64>)],
        gallery: &[(String, Vec<f64>)],
        spec: &DistanceSpec,
    ) -> Result<Self> {
        let mut values = Vec::with_capacity(probes.len() * gallery.len());
        for (_, p) in probes {
            for (_, g) in gallery {
                values.push(distance(spec, g, p)?);
            }
        }
        Self::new(
            probes.iter().map(|(l, _)| l.clone()).collect(),
            gallery.iter().map(|(l, _)| l.clone()).collect(),
            values,
        )
    }

    pub fn n_probes(&self) -> usize {
        self.probe_labels.len()
    }

    pub fn n_gallery(&self) -> usize {
        self.gallery_labels.len()
    }

    pub fn probe_labels(&self) -> &[String] {
        &self.probe_labels
    }

    pub fn gallery_labels(&self) -> &[String] {
        &self.gallery_labels
    }

    pub fn get(&self, probe: usize, gallery: usize) -> f64 {
        self.values[probe * self.n_gallery() + gallery]
    }

    pub fn row(&self, probe: usize) -> &[f64] {
        let g = self.n_gallery();
        &self.values[probe * g..(probe + 1) * g]
    }

    /// Every entry multiplied by `k`.
    pub fn scaled(&self, k: f64) -> Self {
        Self {
            values: self.values.iter().map(|v| v * k).collect(),
            ..self.clone()
        }
    }

    /// Genuine (same label) and impostor (different label) distances.
    pub fn split_scores(&self) -> (Vec<f64>, Vec<f64>) {
        let (mut genuine, mut impostor) = (Vec::new(), Vec::new());
        for (p, pl) in self.probe_labels.iter().enumerate() {
            for (g, gl) in self.gallery_labels.iter().enumerate() {
                if pl == gl {
                    genuine.push(self.get(p, g));
                } else {
                    impostor.push(self.get(p, g));
                }
            }
        }
        (genuine, impostor)
    }

    /// CSV with the gallery labels in the first row and the probe label
    /// leading every following row.
    pub fn to_csv(&self) -> String {
        let mut w = csv::Writer::from_writer(Vec::new());
        let header = std::iter::once(String::new()).chain(self.gallery_labels.iter().cloned());
        w.write_record(header).expect("writing to memory");
        for (p, label) in self.probe_labels.iter().enumerate() {
            let rec = std::iter::once(label.clone()).chain(self.row(p).iter().map(|&v| fmt_f64(v)));
            w.write_record(rec).expect("writing to memory");
        }
        String::from_utf8(w.into_inner().expect("flushing to memory")).expect("csv output is utf-8")
    }

    pub fn from_csv(text: &str) -> Result<Self> {
        let mut r = csv::ReaderBuilder::new()
            .has_headers(false)
            .from_reader(text.as_bytes());
        let mut records = r.records();
        let header = records
            .next()
            .ok_or_else(|| Error::Format("empty distance CSV".into()))?
            .map_err(|e| Error::Format(e.to_string()))?;
        let gallery_labels: Vec<String> = header.iter().skip(1).map(str::to_owned).collect();
        let (mut probe_labels, mut values) = (Vec::new(), Vec::new());
        for rec in records {
            let rec = rec.map_err(|e| Error::Format(e.to_string()))?;
            probe_labels.push(rec.get(0).unwrap_or_default().to_owned());
            for field in rec.iter().skip(1) {
                values.push(
                    field
                        .trim()
                        .parse::<f64>()
                        .map_err(|_| Error::Format(format!("bad distance {field:?}")))?,
                );
            }
        }
        Self::new(probe_labels, gallery_labels, values).map_err(|e| match e {
            Error::DimensionMismatch { .. } => Error::Format(format!("ragged distance CSV: {e}")),
            other => other,
        })
    }

    pub fn read_csv(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_csv(&text)
    }

    pub fn write_csv(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        std::fs::write(path, self.to_csv()).map_err(|e| Error::io(path, e))
    }
}
