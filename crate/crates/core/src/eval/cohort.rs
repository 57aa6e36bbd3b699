use alloc::string::String;
use alloc::vec::Vec;
use serde::{Deserialize, Serialize};

use super::stats::{fisher_exact, mann_whitney_u};
use crate::{class_counts, Cell, ColumnKind, Error, RawTable, Result};

/// Descriptive statistics of one continuous variable within one class.
/// `mean` and `std` are `None` when the class has no observed values.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ClassStats {
    pub n: usize,
    pub mean: Option<f64>,
    /// Sample standard deviation (n − 1 denominator); 0 for a single value.
    pub std: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ContinuousRow {
    pub variable: String,
    pub unit: String,
    pub classes: [ClassStats; 2],
    pub u: Option<f64>,
    pub p: Option<f64>,
}

/// Count of one category per class. Binary variables get a single row for
/// the positive token; nominal variables get one row per category, tested
/// against the remaining categories.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CategoryRow {
    pub variable: String,
    pub kind: ColumnKind,
    pub category: String,
    pub counts: [usize; 2],
    /// Observed (non-missing) values per class.
    pub observed: [usize; 2],
    /// Percentage of observed values, `None` if the class has none.
    pub percent: [Option<f64>; 2],
    pub p: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CohortSummary {
    pub label: String,
    pub class_counts: [usize; 2],
    pub continuous: Vec<ContinuousRow>,
    pub categorical: Vec<CategoryRow>,
}

fn class_stats(values: &[f64]) -> ClassStats {
    let n = values.len();
    if n == 0 {
        return ClassStats { n, mean: None, std: None };
    }
    let mean = values.iter().sum::<f64>() / n as f64;
    let std = if n == 1 {
        0.0
    } else {
        let ss: f64 = values.iter().map(|v| (v - mean) * (v - mean)).sum();
        libm::sqrt(ss / (n - 1) as f64)
    };
    ClassStats {
        n,
        mean: Some(mean),
        std: Some(std),
    }
}

pub fn cohort_summary(table: &RawTable) -> Result<CohortSummary> {
    let counts = class_counts(table.labels());
    if counts[0] == 0 || counts[1] == 0 {
        return Err(Error::SingleClass("cohort summary needs both classes"));
    }
    let schema = table.schema();
    let mut continuous = Vec::new();
    let mut categorical = Vec::new();
    for (j, spec) in schema.columns.iter().enumerate() {
        match spec.kind {
            ColumnKind::Continuous => {
                let mut by_class: [Vec<f64>; 2] = [Vec::new(), Vec::new()];
                for (row, &y) in table.rows().iter().zip(table.labels()) {
                    if let Cell::Real(v) = row[j] {
                        by_class[usize::from(y)].push(v);
                    }
                }
                let test = mann_whitney_u(&by_class[0], &by_class[1]).ok();
                continuous.push(ContinuousRow {
                    variable: spec.name.clone(),
                    unit: spec.unit.clone(),
                    classes: [class_stats(&by_class[0]), class_stats(&by_class[1])],
                    u: test.map(|t| t.u),
                    p: test.map(|t| t.p),
                });
            }
            ColumnKind::Nominal | ColumnKind::Binary => {
                let k = spec.categories.len();
                let mut tally = alloc::vec![[0usize; 2]; k];
                let mut observed = [0usize; 2];
                for (row, &y) in table.rows().iter().zip(table.labels()) {
                    if let Cell::Category(c) = row[j] {
                        tally[c as usize][usize::from(y)] += 1;
                        observed[usize::from(y)] += 1;
                    }
                }
                let reported = if spec.kind == ColumnKind::Binary { 1..2 } else { 0..k };
                for c in reported {
                    let hit = tally[c];
                    let table2 = [
                        [hit[0] as u64, (observed[0] - hit[0]) as u64],
                        [hit[1] as u64, (observed[1] - hit[1]) as u64],
                    ];
                    let percent = [0, 1].map(|i| {
                        (observed[i] > 0).then(|| 100.0 * hit[i] as f64 / observed[i] as f64)
                    });
                    categorical.push(CategoryRow {
                        variable: spec.name.clone(),
                        kind: spec.kind,
                        category: spec.categories[c].clone(),
                        counts: hit,
                        observed,
                        percent,
                        p: fisher_exact(table2).ok(),
                    });
                }
            }
        }
    }
    Ok(CohortSummary {
        label: schema.label.name.clone(),
        class_counts: counts,
        continuous,
        categorical,
    })
}
