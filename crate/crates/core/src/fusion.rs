//! Late fusion of branch outputs (weighted boxes fusion) and detection scoring.

use std::cmp::Ordering;
use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::types::{BBox, Detection};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ClusterConfMode {
    /// Plain mean of the member confidences.
    #[default]
    Mean,
    /// Mean rescaled by `min(members, lists) / lists`.
    Weighted,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct FusionParams {
    pub iou_threshold: f64,
    pub confidence_floor: f64,
    pub cluster_conf_mode: ClusterConfMode,
}

impl Default for FusionParams {
    fn default() -> Self {
        FusionParams {
            iou_threshold: 0.55,
            confidence_floor: 0.0,
            cluster_conf_mode: ClusterConfMode::Mean,
        }
    }
}

impl FusionParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.iou_threshold > 0.0 && self.iou_threshold < 1.0) {
            return Err(Error::invalid("fusion.iou_threshold", "must lie in (0, 1)"));
        }
        if !(self.confidence_floor >= 0.0 && self.confidence_floor < 1.0) {
            return Err(Error::invalid("fusion.confidence_floor", "must lie in [0, 1)"));
        }
        Ok(())
    }
}

/// Penalties and matching threshold for [`detection_loss`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct LossParams {
    /// Charged once per ground-truth object left unmatched.
    pub miss_penalty: f64,
    /// Unmatched predictions are charged `false_positive_factor * confidence`.
    pub false_positive_factor: f64,
    pub match_iou: f64,
}

impl Default for LossParams {
    fn default() -> Self {
        LossParams {
            miss_penalty: 1.0,
            false_positive_factor: 0.5,
            match_iou: 0.5,
        }
    }
}

impl LossParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.miss_penalty >= 0.0 && self.miss_penalty.is_finite()) {
            return Err(Error::invalid("loss.miss_penalty", "must be finite and >= 0"));
        }
        if !(self.false_positive_factor >= 0.0 && self.false_positive_factor.is_finite()) {
            return Err(Error::invalid(
                "loss.false_positive_factor",
                "must be finite and >= 0",
            ));
        }
        if !(self.match_iou > 0.0 && self.match_iou <= 1.0) {
            return Err(Error::invalid("loss.match_iou", "must lie in (0, 1]"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct LossBreakdown {
    pub cls_loss: f64,
    pub loc_loss: f64,
}

impl LossBreakdown {
    pub fn total(&self) -> f64 {
        self.cls_loss + self.loc_loss
    }
}

/// Intersection over union of two boxes; 0 for disjoint or degenerate boxes.
pub fn iou(a: &BBox, b: &BBox) -> f64 {
    let iw = (a.x2.min(b.x2) - a.x1.max(b.x1)).max(0.0);
    let ih = (a.y2.min(b.y2) - a.y1.max(b.y1)).max(0.0);
    let inter = iw * ih;
    if inter <= 0.0 {
        return 0.0;
    }
    let union = a.area() + b.area() - inter;
    if union <= 0.0 {
        return 0.0;
    }
    (inter / union).clamp(0.0, 1.0)
}

/// Canonical ordering used before clustering: confidence descending, then coordinates.
fn canonical_cmp(a: &Detection, b: &Detection) -> Ordering {
    b.confidence
        .total_cmp(&a.confidence)
        .then_with(|| a.class_id.cmp(&b.class_id))
        .then_with(|| {
            a.bbox
                .coords()
                .iter()
                .zip(b.bbox.coords().iter())
                .map(|(x, y)| x.total_cmp(y))
                .find(|o| o.is_ne())
                .unwrap_or(Ordering::Equal)
        })
}

struct Cluster {
    members: Vec<Detection>,
    fused: BBox,
}

impl Cluster {
    fn new(d: Detection) -> Self {
        Cluster {
            fused: d.bbox,
            members: vec![d],
        }
    }

    fn push(&mut self, d: Detection) {
        self.members.push(d);
        self.fused = self.weighted_box();
    }

    fn weighted_box(&self) -> BBox {
        let weight: f64 = self.members.iter().map(|d| d.confidence).sum();
        let mut out = [0.0; 4];
        for (k, slot) in out.iter_mut().enumerate() {
            let (lo, hi) = self
                .members
                .iter()
                .map(|d| d.bbox.coords()[k])
                .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), v| {
                    (lo.min(v), hi.max(v))
                });
            let mean = if weight > 0.0 {
                self.members
                    .iter()
                    .map(|d| d.confidence * d.bbox.coords()[k])
                    .sum::<f64>()
                    / weight
            } else {
                self.members.iter().map(|d| d.bbox.coords()[k]).sum::<f64>()
                    / self.members.len() as f64
            };
            // rounding can push the mean a hair outside the member range
            *slot = mean.clamp(lo, hi);
        }
        BBox::from(out)
    }

    fn confidence(&self, mode: ClusterConfMode, lists: usize) -> f64 {
        let n = self.members.len();
        let mean = self.members.iter().map(|d| d.confidence).sum::<f64>() / n as f64;
        let (lo, hi) = self
            .members
            .iter()
            .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), d| {
                (lo.min(d.confidence), hi.max(d.confidence))
            });
        let mean = mean.clamp(lo, hi);
        match mode {
            ClusterConfMode::Mean => mean,
            ClusterConfMode::Weighted => {
                let lists = lists.max(1);
                mean * n.min(lists) as f64 / lists as f64
            }
        }
    }
}

/// Fuses the detections of several branches into one set.
///
/// Boxes are clustered per class: each detection, taken in canonical order, joins the
/// cluster whose current fused box overlaps it most (IoU strictly above the threshold)
/// or starts a new one. A cluster's box is the confidence-weighted mean of its members.
/// The output is sorted by descending confidence; clusters below the floor are dropped.
pub fn weighted_boxes_fusion<L: AsRef<[Detection]>>(
    lists: &[L],
    params: &FusionParams,
) -> Vec<Detection> {
    let mut by_class: BTreeMap<u32, Vec<Detection>> = BTreeMap::new();
    for d in lists.iter().flat_map(|l| l.as_ref().iter()) {
        by_class.entry(d.class_id).or_default().push(*d);
    }

    let mut fused = Vec::new();
    for (class_id, mut dets) in by_class {
        dets.sort_by(canonical_cmp);
        let mut clusters: Vec<Cluster> = Vec::new();
        for d in dets {
            let mut best: Option<(usize, f64)> = None;
            for (i, c) in clusters.iter().enumerate() {
                let o = iou(&c.fused, &d.bbox);
                if o > params.iou_threshold && best.is_none_or(|(_, b)| o > b) {
                    best = Some((i, o));
                }
            }
            match best {
                Some((i, _)) => clusters[i].push(d),
                None => clusters.push(Cluster::new(d)),
            }
        }
        for c in &clusters {
            let confidence = c.confidence(params.cluster_conf_mode, lists.len());
            if confidence >= params.confidence_floor {
                fused.push(Detection {
                    class_id,
                    bbox: c.fused,
                    confidence,
                });
            }
        }
    }
    fused.sort_by(canonical_cmp);
    fused
}

fn smooth_l1(x: f64) -> f64 {
    let a = x.abs();
    if a < 1.0 {
        0.5 * a * a
    } else {
        a - 0.5
    }
}

const MIN_CONFIDENCE: f64 = 1e-12;

/// Scores predictions against ground truth with a classification + localization loss.
///
/// Predictions and ground truth of the same class are matched greedily by descending
/// IoU (at least `match_iou`). Localization is the mean smooth-L1 of coordinate errors
/// normalized by the ground-truth width/height. Classification is the mean negative log
/// confidence of matched predictions plus the miss and false-positive penalties.
pub fn detection_loss(pred: &[Detection], gt: &[Detection], params: &LossParams) -> LossBreakdown {
    let mut pairs: Vec<(f64, usize, usize)> = Vec::new();
    for (i, p) in pred.iter().enumerate() {
        for (j, g) in gt.iter().enumerate() {
            if p.class_id != g.class_id {
                continue;
            }
            let o = iou(&p.bbox, &g.bbox);
            if o >= params.match_iou {
                pairs.push((o, i, j));
            }
        }
    }
    pairs.sort_by(|a, b| b.0.total_cmp(&a.0).then(a.1.cmp(&b.1)).then(a.2.cmp(&b.2)));

    let mut pred_used = vec![false; pred.len()];
    let mut gt_used = vec![false; gt.len()];
    let mut nll = 0.0;
    let mut loc = 0.0;
    let mut matched = 0usize;
    for (_, i, j) in pairs {
        if pred_used[i] || gt_used[j] {
            continue;
        }
        pred_used[i] = true;
        gt_used[j] = true;
        matched += 1;
        let (p, g) = (&pred[i].bbox, &gt[j].bbox);
        let (w, h) = (g.width(), g.height());
        loc += smooth_l1((p.x1 - g.x1) / w)
            + smooth_l1((p.y1 - g.y1) / h)
            + smooth_l1((p.x2 - g.x2) / w)
            + smooth_l1((p.y2 - g.y2) / h);
        nll += -pred[i].confidence.max(MIN_CONFIDENCE).ln();
    }

    let misses = gt_used.iter().filter(|u| !**u).count() as f64;
    let false_pos: f64 = pred
        .iter()
        .zip(&pred_used)
        .filter(|(_, used)| !**used)
        .map(|(p, _)| p.confidence)
        .sum();

    let (cls_matched, loc_loss) = if matched > 0 {
        (nll / matched as f64, loc / (4 * matched) as f64)
    } else {
        (0.0, 0.0)
    };
    LossBreakdown {
        cls_loss: cls_matched
            + params.miss_penalty * misses
            + params.false_positive_factor * false_pos,
        loc_loss,
    }
}
