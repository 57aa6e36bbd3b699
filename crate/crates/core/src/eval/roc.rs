use alloc::vec::Vec;
use serde::{Deserialize, Serialize};

use crate::{class_counts, Error, Label, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RocPoint {
    /// Rows with `score >= threshold` are called positive. The first point
    /// uses `+∞`, serialized as `null`.
    #[serde(with = "threshold_serde")]
    pub threshold: f64,
    pub fpr: f64,
    pub tpr: f64,
}

mod threshold_serde {
    use serde::{Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(v: &f64, s: S) -> Result<S::Ok, S::Error> {
        if v.is_finite() {
            s.serialize_f64(*v)
        } else {
            s.serialize_none()
        }
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<f64, D::Error> {
        Ok(Option::<f64>::deserialize(d)?.unwrap_or(f64::INFINITY))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RocCurve {
    pub points: Vec<RocPoint>,
}

/// ROC curve over the distinct scores (descending, ties grouped into one
/// step) and its trapezoidal area.
pub fn roc_auc(y_true: &[Label], scores: &[f64]) -> Result<(RocCurve, f64)> {
    if y_true.len() != scores.len() {
        return Err(Error::InvalidArgument("labels and scores differ in length".into()));
    }
    if scores.iter().any(|s| !s.is_finite()) {
        return Err(Error::NonFinite("ROC scores"));
    }
    let counts = class_counts(y_true);
    if counts[0] == 0 || counts[1] == 0 {
        return Err(Error::SingleClass("ROC needs both classes"));
    }
    let (neg, pos) = (counts[0] as f64, counts[1] as f64);
    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| scores[b].total_cmp(&scores[a]));

    let mut points = alloc::vec![RocPoint {
        threshold: f64::INFINITY,
        fpr: 0.0,
        tpr: 0.0
    }];
    let (mut tp, mut fp) = (0usize, 0usize);
    let mut auc = 0.0;
    let mut i = 0;
    while i < order.len() {
        let threshold = scores[order[i]];
        while i < order.len() && scores[order[i]] == threshold {
            if y_true[order[i]] == 1 {
                tp += 1;
            } else {
                fp += 1;
            }
            i += 1;
        }
        let prev = *points.last().unwrap();
        let point = RocPoint {
            threshold,
            fpr: fp as f64 / neg,
            tpr: tp as f64 / pos,
        };
        auc += (point.fpr - prev.fpr) * (point.tpr + prev.tpr) / 2.0;
        points.push(point);
    }
    Ok((RocCurve { points }, auc))
}
