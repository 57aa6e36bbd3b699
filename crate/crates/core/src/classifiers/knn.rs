use alloc::vec::Vec;
use serde::{Deserialize, Serialize};

use super::Classifier;
use crate::matrix::squared_distance;
use crate::{Error, FeatureMatrix, Label, Result};

pub const DEFAULT_KNN_K: usize = 5;

/// Stored reference set; probability is the class-1 share among the `k`
/// Euclidean nearest references (distance ties go to the lower index).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KnnModel {
    pub reference: FeatureMatrix,
    pub labels: Vec<Label>,
    pub k: usize,
}

impl KnnModel {
    pub fn fit(x: &FeatureMatrix, y: &[Label], k: usize) -> Result<Self> {
        let model = Self {
            reference: x.clone(),
            labels: y.to_vec(),
            k,
        };
        model.validate()?;
        Ok(model)
    }

    pub fn validate(&self) -> Result<()> {
        if self.reference.n_rows() == 0 {
            return Err(Error::Empty("k-NN reference set"));
        }
        if self.labels.len() != self.reference.n_rows() {
            return Err(Error::InvalidArgument("label count differs from reference rows".into()));
        }
        if self.k == 0 || self.k > self.reference.n_rows() {
            return Err(Error::InvalidArgument(alloc::format!(
                "k = {} with {} references",
                self.k,
                self.reference.n_rows()
            )));
        }
        Ok(())
    }
}

pub fn knn_predict_proba(m: &KnnModel, queries: &FeatureMatrix) -> Result<Vec<f64>> {
    m.validate()?;
    queries.ensure_width(m.reference.n_cols())?;
    let mut dist: Vec<(f64, usize)> = Vec::with_capacity(m.reference.n_rows());
    Ok(queries
        .rows()
        .map(|q| {
            dist.clear();
            dist.extend(m.reference.rows().enumerate().map(|(i, r)| (squared_distance(q, r), i)));
            let by_distance_then_index =
                |a: &(f64, usize), b: &(f64, usize)| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1));
            if m.k < dist.len() {
                dist.select_nth_unstable_by(m.k - 1, by_distance_then_index);
            }
            let positives = dist[..m.k].iter().filter(|(_, i)| m.labels[*i] == 1).count();
            positives as f64 / m.k as f64
        })
        .collect())
}

impl Classifier for KnnModel {
    fn input_width(&self) -> usize {
        self.reference.n_cols()
    }

    fn predict_proba(&self, x: &FeatureMatrix) -> Result<Vec<f64>> {
        knn_predict_proba(self, x)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng;
    use proptest::prelude::*;
    use rand::Rng as _;

    #[test]
    fn exact_match_with_k1() {
        let x = FeatureMatrix::from_rows(&[[0.0, 0.0], [1.0, 1.0], [2.0, 2.0]]).unwrap();
        let m = KnnModel::fit(&x, &[0, 1, 0], 1).unwrap();
        let p = knn_predict_proba(&m, &FeatureMatrix::from_rows(&[[1.0, 1.0]]).unwrap()).unwrap();
        assert_eq!(p, [1.0]);
    }

    #[test]
    fn full_neighbourhood_gives_global_fraction() {
        let x = FeatureMatrix::from_rows(&[[0.0], [1.0], [5.0], [9.0]]).unwrap();
        let m = KnnModel::fit(&x, &[0, 1, 1, 1], 4).unwrap();
        let q = FeatureMatrix::from_rows(&[[-3.0], [4.0], [100.0]]).unwrap();
        assert_eq!(knn_predict_proba(&m, &q).unwrap(), [0.75; 3]);
    }

    #[test]
    fn distance_ties_prefer_lower_index() {
        let x = FeatureMatrix::from_rows(&[[1.0], [-1.0], [1.0]]).unwrap();
        let m = KnnModel::fit(&x, &[1, 0, 0], 1).unwrap();
        let q = FeatureMatrix::from_rows(&[[0.0]]).unwrap();
        assert_eq!(knn_predict_proba(&m, &q).unwrap(), [1.0]);
    }

    #[test]
    fn validation() {
        assert!(KnnModel::fit(&FeatureMatrix::zeros(0, 2), &[], 1).is_err());
        let x = FeatureMatrix::from_rows(&[[0.0], [1.0]]).unwrap();
        assert!(KnnModel::fit(&x, &[0, 1], 3).is_err());
        let m = KnnModel::fit(&x, &[0, 1], 2).unwrap();
        assert!(knn_predict_proba(&m, &FeatureMatrix::zeros(1, 2)).is_err());
    }

    proptest! {
        #[test]
        fn agrees_with_brute_force(seed in any::<u64>(), n in 1usize..60, q in 1usize..10, k in 1usize..8) {
            prop_assume!(k <= n);
            let mut r = rng::stream(seed, 8);
            // integer grid to exercise ties
            let mut cell = || libm::round(r.random::<f64>() * 4.0);
            let refs: Vec<[f64; 2]> = (0..n).map(|_| [cell(), cell()]).collect();
            let queries: Vec<[f64; 2]> = (0..q).map(|_| [cell(), cell()]).collect();
            let labels: Vec<Label> = (0..n).map(|i| ((i * 7 + seed as usize) % 3 == 0) as u8).collect();
            let m = KnnModel::fit(&FeatureMatrix::from_rows(&refs).unwrap(), &labels, k).unwrap();
            let got = knn_predict_proba(&m, &FeatureMatrix::from_rows(&queries).unwrap()).unwrap();
            for (qi, qv) in queries.iter().enumerate() {
                // full stable sort by distance; stability keeps index order on ties
                let mut order: Vec<usize> = (0..n).collect();
                let d = |i: usize| (refs[i][0] - qv[0]).powi(2) + (refs[i][1] - qv[1]).powi(2);
                order.sort_by(|&a, &b| d(a).partial_cmp(&d(b)).unwrap());
                let share = order[..k].iter().filter(|&&i| labels[i] == 1).count() as f64 / k as f64;
                prop_assert_eq!(got[qi], share);
            }
        }
    }
}
