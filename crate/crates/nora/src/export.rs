//! Flat CSV and JSON renderings of results. Reals use the shortest
//! representation that round-trips, so equal values give equal bytes.

use std::fmt::Write as _;

use nora_core::eval::{CohortSummary, MetricSummary, RocCurve};
use nora_core::pipeline::CvResult;
use nora_core::FeatureMatrix;
use serde::Serialize;

pub fn json<T: Serialize + ?Sized>(value: &T) -> String {
    let mut s = serde_json::to_string_pretty(value).expect("value serializes");
    s.push('\n');
    s
}

fn opt(v: Option<f64>) -> String {
    v.map(|v| v.to_string()).unwrap_or_default()
}

/// Long format: `config,fold,metric,value`; NaN values (no AUC) are skipped.
pub fn metrics_rows(out: &mut String, config: &str, fold: &str, s: &MetricSummary) {
    for (name, value) in s.entries() {
        if !value.is_nan() {
            writeln!(out, "{config},{fold},{name},{value}").unwrap();
        }
    }
}

pub const METRICS_HEADER: &str = "config,fold,metric,value\n";

pub fn cv_metrics_csv(results: &[&CvResult]) -> String {
    let mut out = String::from(METRICS_HEADER);
    for r in results {
        let name = r.config.kind.name();
        for f in &r.folds {
            metrics_rows(&mut out, name, &f.fold.to_string(), &MetricSummary::from_report(&f.report));
        }
        metrics_rows(&mut out, name, "mean", &r.mean);
    }
    out
}

/// `threshold,fpr,tpr`; the opening point has threshold `inf`.
pub fn roc_csv(roc: &RocCurve) -> String {
    let mut out = String::from("threshold,fpr,tpr\n");
    for p in &roc.points {
        writeln!(out, "{},{},{}", p.threshold, p.fpr, p.tpr).unwrap();
    }
    out
}

/// `row_id,h0,...,h{d-1}`.
pub fn embeddings_csv(h: &FeatureMatrix) -> String {
    let mut out = String::from("row_id");
    for j in 0..h.n_cols() {
        write!(out, ",h{j}").unwrap();
    }
    out.push('\n');
    for (i, row) in h.rows().enumerate() {
        write!(out, "{i}").unwrap();
        for v in row {
            write!(out, ",{v}").unwrap();
        }
        out.push('\n');
    }
    out
}

pub fn loss_history_csv(history: &[f64]) -> String {
    let mut out = String::from("epoch,loss\n");
    for (e, l) in history.iter().enumerate() {
        writeln!(out, "{e},{l}").unwrap();
    }
    out
}

pub fn predictions_csv(probabilities: &[f64]) -> String {
    let mut out = String::from("row_id,probability,label\n");
    for (i, &p) in probabilities.iter().enumerate() {
        writeln!(out, "{i},{p},{}", u8::from(p >= 0.5)).unwrap();
    }
    out
}

/// Out-of-fold predictions: `fold,row_id,label,probability`.
pub fn oof_predictions_csv(r: &CvResult) -> String {
    let mut out = String::from("fold,row_id,label,probability\n");
    for f in &r.folds {
        for ((i, y), p) in f.test_indices.iter().zip(&f.test_labels).zip(&f.probabilities) {
            writeln!(out, "{},{i},{y},{p}", f.fold).unwrap();
        }
    }
    out
}

/// `kind,variable,category,statistic,class0,class1,p_value`.
pub fn cohort_stats_csv(s: &CohortSummary) -> String {
    let mut out = String::from("kind,variable,category,statistic,class0,class1,p_value\n");
    writeln!(out, "count,{},,n,{},{},", s.label, s.class_counts[0], s.class_counts[1]).unwrap();
    for r in &s.continuous {
        let [a, b] = &r.classes;
        let p = opt(r.p);
        writeln!(out, "continuous,{},,n,{},{},{p}", r.variable, a.n, b.n).unwrap();
        writeln!(out, "continuous,{},,mean,{},{},{p}", r.variable, opt(a.mean), opt(b.mean)).unwrap();
        writeln!(out, "continuous,{},,std,{},{},{p}", r.variable, opt(a.std), opt(b.std)).unwrap();
    }
    for r in &s.categorical {
        let kind = match r.kind {
            nora_core::ColumnKind::Binary => "binary",
            _ => "nominal",
        };
        let cat = csv_field(&r.category);
        let p = opt(r.p);
        writeln!(out, "{kind},{},{cat},count,{},{},{p}", r.variable, r.counts[0], r.counts[1]).unwrap();
        writeln!(out, "{kind},{},{cat},percent,{},{},{p}", r.variable, opt(r.percent[0]), opt(r.percent[1]))
            .unwrap();
    }
    out
}

fn csv_field(s: &str) -> String {
    if s.contains([',', '"', '\n']) {
        format!("\"{}\"", s.replace('"', "\"\""))
    } else {
        s.to_string()
    }
}
