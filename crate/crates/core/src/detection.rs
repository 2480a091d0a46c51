//! Face-box detections and the overlap-based merging that turns a cloud of
//! raw hits into one box per face.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::image::BBox;

/// A located face box in original-image pixels; `(x, y)` is the top-left
/// corner.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Detection {
    pub x: f64,
    pub y: f64,
    pub w: f64,
    pub h: f64,
    pub scale: f64,
    pub score: f64,
    pub template_id: usize,
    /// How many raw detections support this one; 0 for raw detections.
    #[serde(default)]
    pub overlap_count: usize,
}

impl Detection {
    pub fn bbox(&self) -> BBox {
        BBox::new(self.x, self.y, self.w, self.h)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MergeParams {
    pub min_overlap_count: usize,
    pub overlap_iou: f64,
    /// Largest allowed ratio between the larger and smaller box side for two
    /// detections to be merged.
    pub size_similarity: f64,
}

impl Default for MergeParams {
    fn default() -> Self {
        Self {
            min_overlap_count: 2,
            overlap_iou: 0.3,
            size_similarity: 1.3,
        }
    }
}

impl MergeParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.overlap_iou > 0.0 && self.overlap_iou <= 1.0) {
            return Err(Error::param(format!(
                "overlap_iou must be in (0,1], got {}",
                self.overlap_iou
            )));
        }
        if !(self.size_similarity >= 1.0) {
            return Err(Error::param("size_similarity must be >= 1"));
        }
        Ok(())
    }
}

fn similar_size(a: &Detection, b: &Detection, ratio: f64) -> bool {
    let r = |p: f64, q: f64| p.max(q) / p.min(q).max(f64::MIN_POSITIVE);
    r(a.w, b.w) <= ratio && r(a.h, b.h) <= ratio
}

fn find(parent: &mut [usize], mut i: usize) -> usize {
    while parent[i] != i {
        parent[i] = parent[parent[i]];
        i = parent[i];
    }
    i
}

/// Three-step merging of overlapping detections:
///
/// 1. each detection's support is its stored `overlap_count` plus the number
///    of other detections overlapping it with IoU ≥ `overlap_iou`; detections
///    with support below `min_overlap_count` are dropped;
/// 2. survivors linked by IoU ≥ `overlap_iou` and similar size are averaged
///    into one detection whose `overlap_count` is the largest member support;
/// 3. among merged detections that still intersect, the one with the highest
///    support (then score) is kept.
///
/// The output boxes are pairwise disjoint, so merging again returns them
/// unchanged.
pub fn merge_detections(dets: &[Detection], p: &MergeParams) -> Vec<Detection> {
    let n = dets.len();
    let boxes: Vec<BBox> = dets.iter().map(Detection::bbox).collect();
    let support: Vec<usize> = (0..n)
        .map(|i| {
            let others = (0..n)
                .filter(|&j| j != i && boxes[i].iou(&boxes[j]) >= p.overlap_iou)
                .count();
            dets[i].overlap_count + others
        })
        .collect();
    let kept: Vec<usize> = (0..n)
        .filter(|&i| support[i] >= p.min_overlap_count)
        .collect();

    let mut parent: Vec<usize> = (0..kept.len()).collect();
    for a in 0..kept.len() {
        for b in a + 1..kept.len() {
            let (i, j) = (kept[a], kept[b]);
            if boxes[i].iou(&boxes[j]) >= p.overlap_iou
                && similar_size(&dets[i], &dets[j], p.size_similarity)
            {
                let (ra, rb) = (find(&mut parent, a), find(&mut parent, b));
                if ra != rb {
                    parent[ra.max(rb)] = ra.min(rb);
                }
            }
        }
    }
    let mut clusters: Vec<Vec<usize>> = Vec::new();
    let mut root_slot = vec![usize::MAX; kept.len()];
    for a in 0..kept.len() {
        let root = find(&mut parent, a);
        if root_slot[root] == usize::MAX {
            root_slot[root] = clusters.len();
            clusters.push(Vec::new());
        }
        clusters[root_slot[root]].push(kept[a]);
    }

    let merged: Vec<Detection> = clusters
        .iter()
        .map(|members| {
            let k = members.len() as f64;
            let avg = |f: fn(&Detection) -> f64| members.iter().map(|&i| f(&dets[i])).sum::<f64>() / k;
            let best = members
                .iter()
                .copied()
                .reduce(|b, i| if dets[i].score > dets[b].score { i } else { b })
                .expect("clusters are non-empty");
            Detection {
                x: avg(|d| d.x),
                y: avg(|d| d.y),
                w: avg(|d| d.w),
                h: avg(|d| d.h),
                scale: avg(|d| d.scale),
                score: avg(|d| d.score),
                template_id: dets[best].template_id,
                overlap_count: members.iter().map(|&i| support[i]).max().unwrap_or(0),
            }
        })
        .collect();

    let mut order: Vec<usize> = (0..merged.len()).collect();
    order.sort_by(|&a, &b| {
        merged[b]
            .overlap_count
            .cmp(&merged[a].overlap_count)
            .then(merged[b].score.total_cmp(&merged[a].score))
            .then(a.cmp(&b))
    });
    let mut out: Vec<Detection> = Vec::new();
    for i in order {
        let bb = merged[i].bbox();
        if out.iter().all(|o| o.bbox().intersection(&bb) <= 0.0) {
            out.push(merged[i]);
        }
    }
    out
}
