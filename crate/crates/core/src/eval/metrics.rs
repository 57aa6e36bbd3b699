use alloc::vec::Vec;
use serde::{Deserialize, Serialize};

use super::roc::RocCurve;
use crate::{Error, FeatureMatrix, Label, Result};

/// One-vs-rest confusion counts for a single class.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct Confusion {
    pub tp: usize,
    pub fp: usize,
    pub tn: usize,
    #[serde(rename = "fn")]
    pub fn_: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ClassMetrics {
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    pub support: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Averages {
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    pub confusion: [Confusion; 2],
    pub per_class: [ClassMetrics; 2],
    pub macro_avg: Averages,
    pub weighted_avg: Averages,
    pub accuracy: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub roc: Option<RocCurve>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub auc: Option<f64>,
}

fn ratio(num: usize, den: usize) -> f64 {
    if den == 0 {
        0.0
    } else {
        num as f64 / den as f64
    }
}

/// Undefined precision, recall or F1 (zero denominator) is reported as 0.
pub fn classification_report(y_true: &[Label], y_pred: &[Label]) -> Result<MetricsReport> {
    if y_true.len() != y_pred.len() {
        return Err(Error::InvalidArgument(alloc::format!(
            "{} true labels vs {} predictions",
            y_true.len(),
            y_pred.len()
        )));
    }
    if y_true.is_empty() {
        return Err(Error::Empty("label vectors"));
    }
    if y_true.iter().chain(y_pred).any(|&l| l > 1) {
        return Err(Error::InvalidArgument("labels must be 0 or 1".into()));
    }
    let n = y_true.len();
    let mut confusion = [Confusion::default(); 2];
    for (c, conf) in confusion.iter_mut().enumerate() {
        let c = c as Label;
        for (&t, &p) in y_true.iter().zip(y_pred) {
            match (t == c, p == c) {
                (true, true) => conf.tp += 1,
                (false, true) => conf.fp += 1,
                (true, false) => conf.fn_ += 1,
                (false, false) => conf.tn += 1,
            }
        }
    }
    let per_class = confusion.map(|c| {
        let precision = ratio(c.tp, c.tp + c.fp);
        let recall = ratio(c.tp, c.tp + c.fn_);
        let f1 = if precision + recall == 0.0 {
            0.0
        } else {
            2.0 * precision * recall / (precision + recall)
        };
        ClassMetrics {
            precision,
            recall,
            f1,
            support: c.tp + c.fn_,
        }
    });
    let macro_avg = Averages {
        precision: (per_class[0].precision + per_class[1].precision) / 2.0,
        recall: (per_class[0].recall + per_class[1].recall) / 2.0,
        f1: (per_class[0].f1 + per_class[1].f1) / 2.0,
    };
    let weighted = |f: fn(&ClassMetrics) -> f64| {
        (per_class[0].support as f64 * f(&per_class[0])
            + per_class[1].support as f64 * f(&per_class[1]))
            / n as f64
    };
    let correct = confusion[0].tp + confusion[1].tp;
    let weighted_avg = Averages {
        precision: weighted(|m| m.precision),
        // support_c · tp_c / support_c = tp_c, so weighted recall is exactly
        // the accuracy; summing the counts avoids a rounding round-trip
        recall: correct as f64 / n as f64,
        f1: weighted(|m| m.f1),
    };
    Ok(MetricsReport {
        confusion,
        per_class,
        macro_avg,
        weighted_avg,
        accuracy: correct as f64 / n as f64,
        roc: None,
        auc: None,
    })
}

/// Flat scalar view of a report, used for fold means and CSV export.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct MetricSummary {
    pub class0_precision: f64,
    pub class0_recall: f64,
    pub class0_f1: f64,
    pub class1_precision: f64,
    pub class1_recall: f64,
    pub class1_f1: f64,
    pub macro_precision: f64,
    pub macro_recall: f64,
    pub macro_f1: f64,
    pub weighted_precision: f64,
    pub weighted_recall: f64,
    pub weighted_f1: f64,
    pub accuracy: f64,
    /// NaN when the report has no AUC.
    pub auc: f64,
}

impl MetricSummary {
    pub fn from_report(r: &MetricsReport) -> Self {
        Self {
            class0_precision: r.per_class[0].precision,
            class0_recall: r.per_class[0].recall,
            class0_f1: r.per_class[0].f1,
            class1_precision: r.per_class[1].precision,
            class1_recall: r.per_class[1].recall,
            class1_f1: r.per_class[1].f1,
            macro_precision: r.macro_avg.precision,
            macro_recall: r.macro_avg.recall,
            macro_f1: r.macro_avg.f1,
            weighted_precision: r.weighted_avg.precision,
            weighted_recall: r.weighted_avg.recall,
            weighted_f1: r.weighted_avg.f1,
            accuracy: r.accuracy,
            auc: r.auc.unwrap_or(f64::NAN),
        }
    }

    pub fn entries(&self) -> [(&'static str, f64); 14] {
        [
            ("class0_precision", self.class0_precision),
            ("class0_recall", self.class0_recall),
            ("class0_f1", self.class0_f1),
            ("class1_precision", self.class1_precision),
            ("class1_recall", self.class1_recall),
            ("class1_f1", self.class1_f1),
            ("macro_precision", self.macro_precision),
            ("macro_recall", self.macro_recall),
            ("macro_f1", self.macro_f1),
            ("weighted_precision", self.weighted_precision),
            ("weighted_recall", self.weighted_recall),
            ("weighted_f1", self.weighted_f1),
            ("accuracy", self.accuracy),
            ("auc", self.auc),
        ]
    }

    fn from_entries(values: &[f64; 14]) -> Self {
        Self {
            class0_precision: values[0],
            class0_recall: values[1],
            class0_f1: values[2],
            class1_precision: values[3],
            class1_recall: values[4],
            class1_f1: values[5],
            macro_precision: values[6],
            macro_recall: values[7],
            macro_f1: values[8],
            weighted_precision: values[9],
            weighted_recall: values[10],
            weighted_f1: values[11],
            accuracy: values[12],
            auc: values[13],
        }
    }

    /// Field-wise arithmetic mean.
    pub fn mean(items: &[MetricSummary]) -> Self {
        let mut acc = [0.0; 14];
        for s in items {
            for (a, (_, v)) in acc.iter_mut().zip(s.entries()) {
                *a += v;
            }
        }
        let k = items.len() as f64;
        Self::from_entries(&acc.map(|a| a / k))
    }
}

/// Mean pairwise cosine similarity `(within class, across classes)` over
/// distinct row pairs.
pub fn class_similarity(z: &FeatureMatrix, y: &[Label]) -> Result<(f64, f64)> {
    if z.n_rows() != y.len() {
        return Err(Error::InvalidArgument("label count differs from row count".into()));
    }
    let norms: Vec<f64> = z
        .rows()
        .map(|r| libm::sqrt(r.iter().map(|v| v * v).sum::<f64>()))
        .collect();
    let (mut intra, mut n_intra, mut inter, mut n_inter) = (0.0, 0usize, 0.0, 0usize);
    for i in 0..z.n_rows() {
        for j in i + 1..z.n_rows() {
            let denom = norms[i] * norms[j];
            let cos = if denom == 0.0 {
                0.0
            } else {
                z.row(i).iter().zip(z.row(j)).map(|(a, b)| a * b).sum::<f64>() / denom
            };
            if y[i] == y[j] {
                intra += cos;
                n_intra += 1;
            } else {
                inter += cos;
                n_inter += 1;
            }
        }
    }
    if n_intra == 0 || n_inter == 0 {
        return Err(Error::SingleClass("similarity needs same- and cross-class pairs"));
    }
    Ok((intra / n_intra as f64, inter / n_inter as f64))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng;
    use proptest::prelude::*;
    use rand::Rng as _;

    #[test]
    fn perfect_prediction() {
        let r = classification_report(&[0, 1, 1], &[0, 1, 1]).unwrap();
        for m in r.per_class {
            assert_eq!((m.precision, m.recall, m.f1), (1.0, 1.0, 1.0));
        }
        assert_eq!(r.accuracy, 1.0);
        assert_eq!(r.macro_avg.f1, 1.0);
        assert_eq!(r.weighted_avg.f1, 1.0);
    }

    #[test]
    fn all_class_one_predictions_zero_out_class_zero() {
        let r = classification_report(&[0, 0, 1, 1], &[1, 1, 1, 1]).unwrap();
        let c0 = r.per_class[0];
        assert_eq!((c0.precision, c0.recall, c0.f1), (0.0, 0.0, 0.0));
        assert_eq!(r.accuracy, 0.5);
        assert_eq!(r.per_class[1].precision, 0.5);
        assert_eq!(r.per_class[1].recall, 1.0);
    }

    #[test]
    fn input_errors() {
        assert!(classification_report(&[0, 1], &[0]).is_err());
        assert_eq!(classification_report(&[], &[]), Err(Error::Empty("label vectors")));
    }

    /// Independent recomputation straight from the definitions.
    fn oracle(t: &[Label], p: &[Label]) -> [f64; 13] {
        let mut out = [0.0; 13];
        let n = t.len() as f64;
        let mut f1s = [0.0; 2];
        let mut precs = [0.0; 2];
        let mut recs = [0.0; 2];
        let mut sup = [0.0; 2];
        for c in 0..2u8 {
            let tp = t.iter().zip(p).filter(|(a, b)| **a == c && **b == c).count() as f64;
            let pred = p.iter().filter(|&&b| b == c).count() as f64;
            let actual = t.iter().filter(|&&a| a == c).count() as f64;
            let pr = if pred > 0.0 { tp / pred } else { 0.0 };
            let rc = if actual > 0.0 { tp / actual } else { 0.0 };
            let f1 = if pr + rc > 0.0 { 2.0 * pr * rc / (pr + rc) } else { 0.0 };
            let k = c as usize;
            precs[k] = pr;
            recs[k] = rc;
            f1s[k] = f1;
            sup[k] = actual;
            out[k * 3] = pr;
            out[k * 3 + 1] = rc;
            out[k * 3 + 2] = f1;
        }
        out[6] = (precs[0] + precs[1]) / 2.0;
        out[7] = (recs[0] + recs[1]) / 2.0;
        out[8] = (f1s[0] + f1s[1]) / 2.0;
        out[9] = (sup[0] * precs[0] + sup[1] * precs[1]) / n;
        out[10] = (sup[0] * recs[0] + sup[1] * recs[1]) / n;
        out[11] = (sup[0] * f1s[0] + sup[1] * f1s[1]) / n;
        out[12] = t.iter().zip(p).filter(|(a, b)| a == b).count() as f64 / n;
        out
    }

    #[test]
    fn random_instances_match_recomputation() {
        for seed in 0..20 {
            let mut r = rng::stream(seed, 3);
            let t: Vec<Label> = (0..50).map(|_| u8::from(r.random::<bool>())).collect();
            let p: Vec<Label> = (0..50).map(|_| u8::from(r.random::<f64>() < 0.6)).collect();
            let rep = classification_report(&t, &p).unwrap();
            let s = MetricSummary::from_report(&rep);
            for ((name, got), want) in s.entries().iter().zip(oracle(&t, &p)) {
                assert!((got - want).abs() < 1e-12, "{name}: {got} vs {want}");
            }
        }
    }

    #[test]
    fn summary_mean_is_fieldwise() {
        let a = MetricSummary::from_report(&classification_report(&[0, 1], &[0, 1]).unwrap());
        let b = MetricSummary::from_report(&classification_report(&[0, 1], &[1, 0]).unwrap());
        let m = MetricSummary::mean(&[a, b]);
        assert_eq!(m.accuracy, 0.5);
        assert_eq!(m.class1_f1, 0.5);
        assert!(m.auc.is_nan());
    }

    #[test]
    fn similarity_separates_opposite_clusters() {
        let z = FeatureMatrix::from_rows(&[[1.0, 0.0], [0.9, 0.1], [-1.0, 0.0], [-0.8, -0.2]]).unwrap();
        let (intra, inter) = class_similarity(&z, &[0, 0, 1, 1]).unwrap();
        assert!(intra > 0.9 && inter < -0.9);
    }

    proptest! {
        #[test]
        fn accuracy_equals_weighted_recall(pairs in proptest::collection::vec((0u8..2, 0u8..2), 1..300)) {
            let (t, p): (Vec<Label>, Vec<Label>) = pairs.into_iter().unzip();
            let r = classification_report(&t, &p).unwrap();
            prop_assert_eq!(r.accuracy, r.weighted_avg.recall);
            let all = [r.accuracy, r.macro_avg.f1, r.weighted_avg.f1, r.weighted_avg.precision,
                       r.per_class[0].f1, r.per_class[1].precision];
            prop_assert!(all.iter().all(|v| (0.0..=1.0).contains(v)));
            prop_assert_eq!(r.macro_avg.f1, (r.per_class[0].f1 + r.per_class[1].f1) / 2.0);
        }

        #[test]
        fn macro_f1_invariant_under_label_swap(pairs in proptest::collection::vec((0u8..2, 0u8..2), 1..300)) {
            let (t, p): (Vec<Label>, Vec<Label>) = pairs.into_iter().unzip();
            let ts: Vec<Label> = t.iter().map(|v| 1 - v).collect();
            let ps: Vec<Label> = p.iter().map(|v| 1 - v).collect();
            let a = classification_report(&t, &p).unwrap();
            let b = classification_report(&ts, &ps).unwrap();
            prop_assert_eq!(a.macro_avg.f1, b.macro_avg.f1);
        }
    }
}
