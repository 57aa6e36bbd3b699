//! SMOTE oversampling followed by one Tomek-link cleaning pass.

use alloc::vec::Vec;
use rand::seq::SliceRandom;
use rand::Rng as _;
use serde::{Deserialize, Serialize};

use crate::matrix::{squared_distance, FeatureMatrix};
use crate::rng::{self, purpose};
use crate::{class_counts, Error, Label, Result};

pub const DEFAULT_SMOTE_K: usize = 5;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ResampleReport {
    pub before: [usize; 2],
    pub after_smote: [usize; 2],
    pub k_requested: usize,
    pub k_used: usize,
    /// Set when `k_requested` exceeded `minority - 1` and was clamped.
    pub k_clamped: bool,
    /// Tomek links in the augmented data, `(lower index, higher index)`.
    pub tomek_links: Vec<(usize, usize)>,
    pub after_cleaning: [usize; 2],
}

#[derive(Debug, Clone, PartialEq)]
pub struct SmoteOutput {
    pub x: FeatureMatrix,
    pub y: Vec<Label>,
    pub k_used: usize,
    pub k_clamped: bool,
    /// Row index of each synthetic row's source and chosen neighbour,
    /// in output order (synthetic rows follow the originals).
    pub provenance: Vec<(usize, usize)>,
}

/// Indices of the `k` nearest rows of `pool` to `pool[q]` (excluding `q`),
/// ties broken by lower index.
fn k_nearest_within(x: &FeatureMatrix, pool: &[usize], q: usize, k: usize) -> Vec<usize> {
    let mut cand: Vec<(f64, usize)> = pool
        .iter()
        .filter(|&&j| j != q)
        .map(|&j| (squared_distance(x.row(q), x.row(j)), j))
        .collect();
    cand.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
    cand.truncate(k);
    cand.into_iter().map(|(_, j)| j).collect()
}

fn check_labels(x: &FeatureMatrix, y: &[Label]) -> Result<()> {
    if x.n_rows() != y.len() {
        return Err(Error::InvalidArgument(alloc::format!(
            "{} rows but {} labels",
            x.n_rows(),
            y.len()
        )));
    }
    Ok(())
}

/// Appends `majority - minority` synthetic minority rows
/// `x + u·(x_nn − x)`, `u ~ U[0,1)`, cycling through the minority rows in
/// a seeded shuffled order.
pub fn smote_oversample(
    x: &FeatureMatrix,
    y: &[Label],
    k: usize,
    seed: u64,
) -> Result<SmoteOutput> {
    check_labels(x, y)?;
    if k == 0 {
        return Err(Error::InvalidArgument("SMOTE needs k >= 1".into()));
    }
    let counts = class_counts(y);
    let minority: Label = if counts[0] <= counts[1] { 0 } else { 1 };
    let n_min = counts[usize::from(minority)];
    if n_min < 2 {
        return Err(Error::ClassTooSmall {
            class: minority,
            count: n_min,
            required: 2,
        });
    }
    let needed = counts[usize::from(1 - minority)] - n_min;
    let k_used = k.min(n_min - 1);
    let mut out_x = x.clone();
    let mut out_y = y.to_vec();
    let mut provenance = Vec::with_capacity(needed);
    if needed > 0 {
        let members: Vec<usize> = (0..y.len()).filter(|&i| y[i] == minority).collect();
        let neighbours: Vec<Vec<usize>> = members
            .iter()
            .map(|&q| k_nearest_within(x, &members, q, k_used))
            .collect();
        let mut rng = rng::stream(seed, purpose::SMOTE);
        let mut order: Vec<usize> = (0..members.len()).collect();
        order.shuffle(&mut rng);
        let mut synthetic = alloc::vec![0.0; x.n_cols()];
        for s in 0..needed {
            let m = order[s % order.len()];
            let src = members[m];
            let nn = neighbours[m][rng.random_range(0..k_used)];
            let u: f64 = rng.random();
            for ((out, a), b) in synthetic.iter_mut().zip(x.row(src)).zip(x.row(nn)) {
                *out = a + u * (b - a);
            }
            out_x.push_row(&synthetic)?;
            out_y.push(minority);
            provenance.push((src, nn));
        }
    }
    Ok(SmoteOutput {
        x: out_x,
        y: out_y,
        k_used,
        k_clamped: k_used < k,
        provenance,
    })
}

/// Nearest neighbour of every row (excluding itself), ties to lower index.
fn nearest_neighbours(x: &FeatureMatrix) -> Vec<usize> {
    let n = x.n_rows();
    (0..n)
        .map(|i| {
            let mut best = (f64::INFINITY, usize::MAX);
            for j in 0..n {
                if j == i {
                    continue;
                }
                let d = squared_distance(x.row(i), x.row(j));
                if d < best.0 {
                    best = (d, j);
                }
            }
            best.1
        })
        .collect()
}

/// Opposite-class pairs that are each other's nearest neighbour.
pub fn find_tomek_links(x: &FeatureMatrix, y: &[Label]) -> Result<Vec<(usize, usize)>> {
    check_labels(x, y)?;
    if x.n_rows() < 2 {
        return Ok(Vec::new());
    }
    let nn = nearest_neighbours(x);
    Ok((0..nn.len())
        .filter_map(|i| {
            let j = nn[i];
            (i < j && nn[j] == i && y[i] != y[j]).then_some((i, j))
        })
        .collect())
}

#[derive(Debug, Clone, PartialEq)]
pub struct Resampled {
    pub x: FeatureMatrix,
    pub y: Vec<Label>,
    pub report: ResampleReport,
}

/// SMOTE, then removal of both endpoints of every Tomek link found in the
/// augmented data (single pass).
pub fn smote_tomek(x: &FeatureMatrix, y: &[Label], k: usize, seed: u64) -> Result<Resampled> {
    let before = class_counts(y);
    let smote = smote_oversample(x, y, k, seed)?;
    let after_smote = class_counts(&smote.y);
    let links = find_tomek_links(&smote.x, &smote.y)?;
    let mut drop = alloc::vec![false; smote.y.len()];
    for &(i, j) in &links {
        drop[i] = true;
        drop[j] = true;
    }
    let keep: Vec<usize> = (0..drop.len()).filter(|&i| !drop[i]).collect();
    let out_x = smote.x.select_rows(&keep);
    let out_y: Vec<Label> = keep.iter().map(|&i| smote.y[i]).collect();
    let report = ResampleReport {
        before,
        after_smote,
        k_requested: k,
        k_used: smote.k_used,
        k_clamped: smote.k_clamped,
        tomek_links: links,
        after_cleaning: class_counts(&out_y),
    };
    Ok(Resampled {
        x: out_x,
        y: out_y,
        report,
    })
}
