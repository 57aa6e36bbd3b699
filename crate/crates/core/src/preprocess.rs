//! Train-only preprocessing and stratified index plans.
//!
//! Encoding is uniform across column kinds: every input column is first
//! mapped to one or more numeric columns (continuous → itself, binary → 0/1,
//! nominal → one indicator per category), missing cells are filled with the
//! training mean of the encoded column(s), and finally every output column
//! is z-scored with training statistics.

use alloc::format;
use alloc::vec::Vec;
use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use crate::matrix::FeatureMatrix;
use crate::rng::{self, purpose};
use crate::table::{Cell, ColumnKind, RawTable, TableSchema};
use crate::{class_counts, Error, Label, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum ColumnEncoding {
    /// Missing cells take `impute_mean`.
    Continuous { impute_mean: f64 },
    /// Category `c` sets indicator `offset + c`. Missing cells take the
    /// training frequency of each category.
    Nominal { offset: usize, fill: Vec<f64> },
    /// Missing cells take the training fraction of positives.
    Binary { fill: f64 },
}

impl ColumnEncoding {
    fn width(&self) -> usize {
        match self {
            ColumnEncoding::Nominal { fill, .. } => fill.len(),
            _ => 1,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Preprocessor {
    schema: TableSchema,
    encodings: Vec<ColumnEncoding>,
    scaler_mean: Vec<f64>,
    scaler_std: Vec<f64>,
}

/// `Σ(1 per continuous + |categories| per nominal + 1 per binary)`.
pub fn encoded_width(schema: &TableSchema) -> usize {
    schema
        .columns
        .iter()
        .map(|c| match c.kind {
            ColumnKind::Nominal => c.categories.len(),
            _ => 1,
        })
        .sum()
}

fn mean_of(values: impl Iterator<Item = f64>) -> Option<f64> {
    let (sum, n) = values.fold((0.0, 0usize), |(s, n), v| (s + v, n + 1));
    (n > 0).then(|| sum / n as f64)
}

fn category_index(table: &RawTable, col: usize, cell: &Cell) -> Result<Option<usize>> {
    let spec = &table.schema().columns[col];
    match *cell {
        Cell::Missing => Ok(None),
        Cell::Category(i) if (i as usize) < spec.categories.len() => Ok(Some(i as usize)),
        Cell::Category(i) => Err(Error::UnknownCategory {
            column: spec.name.clone(),
            index: i as usize,
        }),
        Cell::Real(_) => Err(Error::SchemaMismatch(format!(
            "numeric cell in categorical column '{}'",
            spec.name
        ))),
    }
}

/// Is `std` indistinguishable from zero relative to the column's magnitude?
fn is_degenerate_std(std: f64, mean: f64) -> bool {
    !(std > 1e-12 * libm::fabs(mean).max(1.0))
}

impl Preprocessor {
    pub fn fit(train: &RawTable) -> Result<Self> {
        if train.is_empty() {
            return Err(Error::Empty("training table"));
        }
        let schema = train.schema().clone();
        let mut encodings = Vec::with_capacity(schema.len());
        let mut offset = 0;
        for (col, spec) in schema.columns.iter().enumerate() {
            let cells = train.rows().iter().map(|r| &r[col]);
            let encoding = match spec.kind {
                ColumnKind::Continuous => {
                    let mut values = Vec::new();
                    for cell in cells {
                        match cell {
                            Cell::Real(v) => values.push(*v),
                            Cell::Missing => {}
                            Cell::Category(_) => {
                                return Err(Error::SchemaMismatch(format!(
                                    "categorical cell in continuous column '{}'",
                                    spec.name
                                )))
                            }
                        }
                    }
                    let impute_mean = mean_of(values.into_iter())
                        .ok_or_else(|| Error::AllMissing(spec.name.clone()))?;
                    ColumnEncoding::Continuous { impute_mean }
                }
                ColumnKind::Binary | ColumnKind::Nominal => {
                    let mut counts = alloc::vec![0usize; spec.categories.len()];
                    let mut observed = 0usize;
                    for cell in cells {
                        if let Some(c) = category_index(train, col, cell)? {
                            counts[c] += 1;
                            observed += 1;
                        }
                    }
                    if observed == 0 {
                        return Err(Error::AllMissing(spec.name.clone()));
                    }
                    let freq: Vec<f64> =
                        counts.iter().map(|&c| c as f64 / observed as f64).collect();
                    if spec.kind == ColumnKind::Binary {
                        ColumnEncoding::Binary { fill: freq[1] }
                    } else {
                        ColumnEncoding::Nominal { offset, fill: freq }
                    }
                }
            };
            offset += encoding.width();
            encodings.push(encoding);
        }

        let mut p = Preprocessor {
            scaler_mean: alloc::vec![0.0; offset],
            scaler_std: alloc::vec![1.0; offset],
            schema,
            encodings,
        };
        let encoded = p.encode(train)?;
        let n = encoded.n_rows() as f64;
        for j in 0..offset {
            let mean = encoded.rows().map(|r| r[j]).sum::<f64>() / n;
            let var = encoded.rows().map(|r| (r[j] - mean) * (r[j] - mean)).sum::<f64>() / n;
            let std = libm::sqrt(var);
            p.scaler_mean[j] = mean;
            p.scaler_std[j] = if is_degenerate_std(std, mean) { 1.0 } else { std };
        }
        Ok(p)
    }

    /// Structural check for deserialized instances.
    pub fn validate(&self) -> Result<()> {
        self.schema.validate()?;
        let bad = |msg: &str| Err(Error::Invariant(format!("preprocessor: {msg}")));
        if self.encodings.len() != self.schema.len() {
            return bad("one encoding per column required");
        }
        let mut offset = 0;
        for (enc, spec) in self.encodings.iter().zip(&self.schema.columns) {
            let ok = match (enc, spec.kind) {
                (ColumnEncoding::Continuous { impute_mean }, ColumnKind::Continuous) => impute_mean.is_finite(),
                (ColumnEncoding::Binary { fill }, ColumnKind::Binary) => (0.0..=1.0).contains(fill),
                (ColumnEncoding::Nominal { offset: o, fill }, ColumnKind::Nominal) => {
                    *o == offset && fill.len() == spec.categories.len()
                }
                _ => false,
            };
            if !ok {
                return bad(&format!("encoding of column '{}' is inconsistent", spec.name));
            }
            offset += enc.width();
        }
        if self.scaler_mean.len() != offset || self.scaler_std.len() != offset {
            return bad("scaler width differs from encoded width");
        }
        if self.scaler_mean.iter().any(|m| !m.is_finite())
            || self.scaler_std.iter().any(|s| !(s.is_finite() && *s > 0.0))
        {
            return bad("scaler statistics must be finite with positive std");
        }
        Ok(())
    }

    pub fn schema(&self) -> &TableSchema {
        &self.schema
    }

    pub fn encodings(&self) -> &[ColumnEncoding] {
        &self.encodings
    }

    pub fn output_width(&self) -> usize {
        self.scaler_mean.len()
    }

    pub fn scaler(&self) -> (&[f64], &[f64]) {
        (&self.scaler_mean, &self.scaler_std)
    }

    /// Imputed and encoded, not yet scaled.
    fn encode(&self, table: &RawTable) -> Result<FeatureMatrix> {
        if table.schema() != &self.schema {
            return Err(Error::SchemaMismatch(
                "table schema differs from the fitted schema".into(),
            ));
        }
        let width = self.output_width();
        let mut data = alloc::vec![0.0; table.len() * width];
        for (r, row) in table.rows().iter().enumerate() {
            let out = &mut data[r * width..(r + 1) * width];
            let mut j = 0;
            for (col, (cell, enc)) in row.iter().zip(&self.encodings).enumerate() {
                match enc {
                    ColumnEncoding::Continuous { impute_mean } => {
                        out[j] = match cell {
                            Cell::Real(v) => *v,
                            Cell::Missing => *impute_mean,
                            Cell::Category(_) => {
                                return Err(Error::SchemaMismatch(format!(
                                    "categorical cell in continuous column {col}"
                                )))
                            }
                        };
                    }
                    ColumnEncoding::Binary { fill } => {
                        out[j] = match category_index(table, col, cell)? {
                            Some(c) => c as f64,
                            None => *fill,
                        };
                    }
                    ColumnEncoding::Nominal { fill, .. } => {
                        match category_index(table, col, cell)? {
                            Some(c) => out[j + c] = 1.0,
                            None => out[j..j + fill.len()].copy_from_slice(fill),
                        }
                    }
                }
                j += enc.width();
            }
        }
        Ok(FeatureMatrix::from_raw_parts(table.len(), width, data))
    }

    pub fn apply(&self, table: &RawTable) -> Result<FeatureMatrix> {
        let encoded = self.encode(table)?;
        let (n, width) = (encoded.n_rows(), encoded.n_cols());
        let mut data = encoded.into_vec();
        for row in data.chunks_exact_mut(width.max(1)) {
            for ((v, m), s) in row.iter_mut().zip(&self.scaler_mean).zip(&self.scaler_std) {
                *v = (*v - m) / s;
            }
        }
        FeatureMatrix::new(n, width, data)
    }
}

pub fn fit_preprocessor(train: &RawTable) -> Result<Preprocessor> {
    Preprocessor::fit(train)
}

pub fn apply_preprocessor(p: &Preprocessor, table: &RawTable) -> Result<FeatureMatrix> {
    p.apply(table)
}

/// `round(x)` with exact halves going down.
fn round_half_down(x: f64) -> usize {
    let floor = libm::floor(x);
    // absorb representation error such as 5 * 0.3 = 1.5000000000000002
    if x - floor > 0.5 + 1e-9 {
        floor as usize + 1
    } else {
        floor as usize
    }
}

fn shuffled_class_members(labels: &[Label], rng: &mut rng::Rng) -> [Vec<usize>; 2] {
    let mut members = [Vec::new(), Vec::new()];
    for (i, &y) in labels.iter().enumerate() {
        members[usize::from(y != 0)].push(i);
    }
    for m in &mut members {
        m.shuffle(rng);
    }
    members
}

/// Returns sorted `(train, test)` index lists.
pub fn stratified_holdout(
    labels: &[Label],
    test_fraction: f64,
    seed: u64,
) -> Result<(Vec<usize>, Vec<usize>)> {
    if !(test_fraction > 0.0 && test_fraction < 1.0) {
        return Err(Error::InvalidArgument(format!(
            "test fraction {test_fraction} must lie in (0, 1)"
        )));
    }
    let counts = class_counts(labels);
    for (class, &count) in counts.iter().enumerate() {
        if count < 2 {
            return Err(Error::ClassTooSmall {
                class: class as u8,
                count,
                required: 2,
            });
        }
    }
    let mut rng = rng::stream(seed, purpose::HOLDOUT);
    let members = shuffled_class_members(labels, &mut rng);
    let mut train = Vec::new();
    let mut test = Vec::new();
    for m in &members {
        let n_test = round_half_down(m.len() as f64 * test_fraction);
        test.extend_from_slice(&m[..n_test]);
        train.extend_from_slice(&m[n_test..]);
    }
    train.sort_unstable();
    test.sort_unstable();
    Ok((train, test))
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FoldPlan {
    pub k: usize,
    /// Held-out indices of each fold, sorted ascending.
    pub folds: Vec<Vec<usize>>,
    pub seed: u64,
}

impl FoldPlan {
    pub fn n_indices(&self) -> usize {
        self.folds.iter().map(Vec::len).sum()
    }

    /// Sorted training indices for fold `f` (all indices not held out by it).
    pub fn train_indices(&self, f: usize) -> Vec<usize> {
        let mut held = alloc::vec![false; self.n_indices()];
        for &i in &self.folds[f] {
            held[i] = true;
        }
        (0..held.len()).filter(|&i| !held[i]).collect()
    }
}

/// Each class is shuffled independently, then the concatenation (class 0
/// first) is dealt round-robin across folds with a running counter. Every
/// fold therefore holds `⌊c/k⌋` or `⌈c/k⌉` members of each class `c`.
pub fn stratified_kfold(labels: &[Label], k: usize, seed: u64) -> Result<FoldPlan> {
    if k < 2 {
        return Err(Error::InvalidArgument(format!("k = {k}, need k >= 2")));
    }
    let counts = class_counts(labels);
    for (class, &count) in counts.iter().enumerate() {
        if count < k {
            return Err(Error::ClassTooSmall {
                class: class as u8,
                count,
                required: k,
            });
        }
    }
    let mut rng = rng::stream(seed, purpose::KFOLD);
    let members = shuffled_class_members(labels, &mut rng);
    let mut folds = alloc::vec![Vec::new(); k];
    for (slot, &i) in members.iter().flatten().enumerate() {
        folds[slot % k].push(i);
    }
    for f in &mut folds {
        f.sort_unstable();
    }
    Ok(FoldPlan { k, folds, seed })
}
