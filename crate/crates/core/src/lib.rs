//! Tabular representation learning for binary clinical risk classification.
//!
//! The pipeline implemented here is:
//!
//!  1. fit a train-only [`preprocess::Preprocessor`] (mean imputation, one-hot
//!     and 0/1 encoding, z-score scaling);
//!  2. balance the training split with SMOTE followed by one Tomek-link
//!     cleaning pass ([`resample`]);
//!  3. train an MLP encoder and projection head with the supervised
//!     contrastive loss ([`encoder`]), then drop the projection head;
//!  4. fit a classifier head (random forest, logistic regression or k-NN) on
//!     the frozen latent vectors ([`classifiers`]).
//!
//! [`eval`] carries the metrics, the cohort statistical tests and the
//! stratified cross-validation driver.
//!
//! The crate is `no_std` and only needs `alloc`. All randomness is derived
//! from explicit `u64` seeds, so every routine is a pure function of its
//! inputs.

#![no_std]

extern crate alloc;

pub mod classifiers;
pub mod cohort;
pub mod encoder;
mod error;
pub mod eval;
pub mod matrix;
pub mod pipeline;
pub mod preprocess;
pub mod resample;
pub mod rng;
pub mod table;

pub use error::{Error, Result};
pub use matrix::FeatureMatrix;
pub use table::{Cell, ColumnKind, ColumnSpec, LabelSpec, RawTable, TableSchema};

/// Binary class label, always `0` or `1`.
pub type Label = u8;

/// Returns `(count of class 0, count of class 1)`.
pub fn class_counts(labels: &[Label]) -> [usize; 2] {
    let mut counts = [0usize; 2];
    for &y in labels {
        counts[usize::from(y != 0)] += 1;
    }
    counts
}
