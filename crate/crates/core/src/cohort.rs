//! Synthetic surrogate of the private nephrology cohort.
//!
//! Rows are generated class-first: the class is a Bernoulli draw, then every
//! feature is drawn independently from that class's published marginal.
//! Joint structure between features is not modelled.

use alloc::format;
use alloc::vec::Vec;
use rand::Rng as _;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::rng::{self, purpose};
use crate::table::{Cell, ColumnSpec, LabelSpec, RawTable, TableSchema};
use crate::{Error, Label, Result};

pub const SEX: [&str; 2] = ["Female", "Male"];
pub const RACE: [&str; 4] = ["Hispanic", "White", "Black or African American", "Asian"];
pub const COMORBIDITIES: [&str; 6] = [
    "hypertension",
    "diabetes_mellitus",
    "diabetic_nephropathy",
    "proteinuria",
    "hematuria",
    "dyslipidemia",
];

/// Column order of the generated table.
pub const AGE: usize = 0;
pub const SEX_COL: usize = 1;
pub const RACE_COL: usize = 2;
pub const HEIGHT: usize = 3;
pub const WEIGHT: usize = 4;
pub const FIRST_COMORBIDITY: usize = 5;

/// Seed of [`CohortSpec::default`]. It is the smallest seed for which the
/// default 960-row draw contains exactly 777 class-1 rows.
pub const DEFAULT_COHORT_SEED: u64 = 43;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Marginal {
    pub mean: f64,
    pub std: f64,
    pub min: f64,
    pub max: f64,
}

impl Marginal {
    const fn new(mean: f64, std: f64, min: f64, max: f64) -> Self {
        Self {
            mean,
            std,
            min,
            max,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassProfile {
    pub age: Marginal,
    pub height: Marginal,
    pub weight: Marginal,
    /// Probabilities in [`SEX`] order.
    pub sex: [f64; 2],
    /// Probabilities in [`RACE`] order.
    pub race: [f64; 4],
    /// Prevalences in [`COMORBIDITIES`] order.
    pub comorbidities: [f64; 6],
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CohortSpec {
    pub n_total: usize,
    pub class1_fraction: f64,
    /// Index 0 is class 0 (CKD stage ≤ 2), index 1 is class 1 (stage ≥ 3).
    pub classes: [ClassProfile; 2],
    /// Per-row probability that height and weight are both unrecorded.
    pub missing_rate: f64,
    pub seed: u64,
}

const AGE_RANGE: (f64, f64) = (23.0, 102.0);
const HEIGHT_RANGE: (f64, f64) = (49.5, 98.1);
const WEIGHT_RANGE: (f64, f64) = (64.0, 410.0);

fn ratios<const N: usize>(counts: [f64; N], total: f64) -> [f64; N] {
    counts.map(|c| c / total)
}

impl Default for CohortSpec {
    fn default() -> Self {
        let class0 = ClassProfile {
            age: Marginal::new(63.2, 14.4, AGE_RANGE.0, AGE_RANGE.1),
            height: Marginal::new(65.2, 3.8, HEIGHT_RANGE.0, HEIGHT_RANGE.1),
            weight: Marginal::new(187.9, 53.6, WEIGHT_RANGE.0, WEIGHT_RANGE.1),
            sex: ratios([92.0, 91.0], 183.0),
            race: ratios([104.0, 60.0, 17.0, 2.0], 183.0),
            comorbidities: ratios([109.0, 58.0, 31.0, 48.0, 2.0, 14.0], 183.0),
        };
        let class1 = ClassProfile {
            age: Marginal::new(71.6, 13.5, AGE_RANGE.0, AGE_RANGE.1),
            height: Marginal::new(65.2, 4.0, HEIGHT_RANGE.0, HEIGHT_RANGE.1),
            weight: Marginal::new(181.1, 47.2, WEIGHT_RANGE.0, WEIGHT_RANGE.1),
            sex: ratios([391.0, 386.0], 777.0),
            race: ratios([315.0, 297.0, 115.0, 50.0], 777.0),
            comorbidities: ratios([602.0, 297.0, 148.0, 126.0, 6.0, 76.0], 777.0),
        };
        Self {
            n_total: 960,
            class1_fraction: 777.0 / 960.0,
            classes: [class0, class1],
            missing_rate: 0.054,
            seed: DEFAULT_COHORT_SEED,
        }
    }
}

fn check_probability(what: &str, p: f64) -> Result<()> {
    if (0.0..=1.0).contains(&p) {
        Ok(())
    } else {
        Err(Error::InvalidArgument(format!(
            "{what} = {p} is not a probability"
        )))
    }
}

fn check_distribution(what: &str, ps: &[f64]) -> Result<()> {
    for &p in ps {
        check_probability(what, p)?;
    }
    let total: f64 = ps.iter().sum();
    if libm::fabs(total - 1.0) > 1e-9 {
        return Err(Error::InvalidArgument(format!(
            "{what} probabilities sum to {total}"
        )));
    }
    Ok(())
}

fn check_marginal(what: &str, m: &Marginal) -> Result<()> {
    let finite = [m.mean, m.std, m.min, m.max].iter().all(|v| v.is_finite());
    if !finite || m.std < 0.0 || m.min >= m.max {
        return Err(Error::InvalidArgument(format!("invalid {what} marginal {m:?}")));
    }
    Ok(())
}

impl CohortSpec {
    pub fn validate(&self) -> Result<()> {
        check_probability("class1_fraction", self.class1_fraction)?;
        check_probability("missing_rate", self.missing_rate)?;
        for profile in &self.classes {
            check_marginal("age", &profile.age)?;
            check_marginal("height", &profile.height)?;
            check_marginal("weight", &profile.weight)?;
            check_distribution("sex", &profile.sex)?;
            check_distribution("race", &profile.race)?;
            for &p in &profile.comorbidities {
                check_probability("comorbidity prevalence", p)?;
            }
        }
        Ok(())
    }
}

/// Schema of the surrogate cohort (and of RNP-style CSV exports).
pub fn cohort_schema() -> TableSchema {
    let mut columns = alloc::vec![
        ColumnSpec::continuous("age", "years"),
        ColumnSpec::nominal("sex", &SEX),
        ColumnSpec::nominal("race", &RACE),
        ColumnSpec::continuous("height", "inches"),
        ColumnSpec::continuous("weight", "lbs"),
    ];
    columns.extend(COMORBIDITIES.iter().map(|c| ColumnSpec::binary(c, "No", "Yes")));
    TableSchema::new(
        columns,
        LabelSpec {
            name: "ckd_class".into(),
            negative: "0".into(),
            positive: "1".into(),
        },
    )
    .expect("static schema is valid")
}

fn sample_marginal(rng: &mut rng::Rng, m: &Marginal) -> f64 {
    let normal = Normal::new(m.mean, m.std).expect("validated marginal");
    normal.sample(rng).clamp(m.min, m.max)
}

fn sample_category(rng: &mut rng::Rng, probabilities: &[f64]) -> u32 {
    let u: f64 = rng.random();
    let mut acc = 0.0;
    for (i, p) in probabilities.iter().enumerate() {
        acc += p;
        if u < acc {
            return i as u32;
        }
    }
    // u landed in the rounding slack above the cumulative sum
    (probabilities.len() - 1) as u32
}

pub fn generate_synthetic_cohort(spec: &CohortSpec) -> Result<RawTable> {
    spec.validate()?;
    let mut rng = rng::stream(spec.seed, purpose::COHORT);
    let mut rows = Vec::with_capacity(spec.n_total);
    let mut labels: Vec<Label> = Vec::with_capacity(spec.n_total);
    for _ in 0..spec.n_total {
        let label = Label::from(rng.random::<f64>() < spec.class1_fraction);
        let p = &spec.classes[usize::from(label)];
        let mut row = Vec::with_capacity(5 + COMORBIDITIES.len());
        row.push(Cell::Real(sample_marginal(&mut rng, &p.age)));
        row.push(Cell::Category(sample_category(&mut rng, &p.sex)));
        row.push(Cell::Category(sample_category(&mut rng, &p.race)));
        let missing = rng.random::<f64>() < spec.missing_rate;
        // both draws happen regardless so the stream layout does not depend on missingness
        let height = sample_marginal(&mut rng, &p.height);
        let weight = sample_marginal(&mut rng, &p.weight);
        if missing {
            row.push(Cell::Missing);
            row.push(Cell::Missing);
        } else {
            row.push(Cell::Real(height));
            row.push(Cell::Real(weight));
        }
        for &prevalence in &p.comorbidities {
            row.push(Cell::Category(u32::from(rng.random::<f64>() < prevalence)));
        }
        rows.push(row);
        labels.push(label);
    }
    RawTable::new(cohort_schema(), rows, labels)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::class_counts;

    #[test]
    fn default_spec_is_valid_and_sums_to_one() {
        let spec = CohortSpec::default();
        spec.validate().unwrap();
        assert!((spec.classes[0].comorbidities[0] - 0.596).abs() < 1e-3);
        assert!((spec.classes[1].comorbidities[0] - 0.775).abs() < 1e-3);
    }

    #[test]
    fn default_seed_gives_published_class_counts() {
        let table = generate_synthetic_cohort(&CohortSpec::default()).unwrap();
        assert_eq!(class_counts(table.labels()), [183, 777]);
    }

    #[test]
    fn default_seed_is_the_smallest_with_published_counts() {
        let mut spec = CohortSpec::default();
        for seed in 0..DEFAULT_COHORT_SEED {
            spec.seed = seed;
            let t = generate_synthetic_cohort(&spec).unwrap();
            assert_ne!(class_counts(t.labels())[1], 777, "seed {seed}");
        }
    }

    #[test]
    fn empty_cohort() {
        let spec = CohortSpec {
            n_total: 0,
            ..CohortSpec::default()
        };
        let t = generate_synthetic_cohort(&spec).unwrap();
        assert!(t.is_empty());
    }

    #[test]
    fn deterministic_given_seed() {
        let spec = CohortSpec::default();
        let a = generate_synthetic_cohort(&spec).unwrap();
        let b = generate_synthetic_cohort(&spec).unwrap();
        assert_eq!(a, b);
        let other = generate_synthetic_cohort(&CohortSpec { seed: 99, ..spec }).unwrap();
        assert_ne!(a, other);
    }

    #[test]
    fn missing_only_in_height_and_weight_and_within_bounds() {
        let spec = CohortSpec {
            n_total: 3000,
            ..CohortSpec::default()
        };
        let t = generate_synthetic_cohort(&spec).unwrap();
        let mut missing_rows = 0;
        for row in t.rows() {
            for (j, cell) in row.iter().enumerate() {
                if cell.is_missing() {
                    assert!(j == HEIGHT || j == WEIGHT);
                }
            }
            if row[HEIGHT].is_missing() {
                missing_rows += 1;
            }
            if let Cell::Real(a) = row[AGE] {
                assert!((23.0..=102.0).contains(&a));
            }
            if let Cell::Real(w) = row[WEIGHT] {
                assert!((64.0..=410.0).contains(&w));
            }
        }
        let rate = missing_rows as f64 / 3000.0;
        // binomial sd at p=0.054, n=3000 is ~0.0041
        assert!((rate - 0.054).abs() < 4.0 * 0.0042, "rate {rate}");
    }

    #[test]
    fn class_conditional_age_means_within_three_standard_errors() {
        let base = CohortSpec::default();
        for seed in [1u64, 2, 3, 4, 5] {
            let spec = CohortSpec {
                n_total: 6000,
                seed,
                ..base.clone()
            };
            let t = generate_synthetic_cohort(&spec).unwrap();
            for class in 0..2u8 {
                let ages: Vec<f64> = t
                    .rows()
                    .iter()
                    .zip(t.labels())
                    .filter(|(_, &y)| y == class)
                    .map(|(r, _)| match r[AGE] {
                        Cell::Real(v) => v,
                        _ => unreachable!(),
                    })
                    .collect();
                let n = ages.len() as f64;
                let mean = ages.iter().sum::<f64>() / n;
                let m = &spec.classes[usize::from(class)].age;
                let bound = 3.0 * m.std / libm::sqrt(n);
                assert!(
                    (mean - m.mean).abs() < bound,
                    "seed {seed} class {class}: {mean} vs {}",
                    m.mean
                );
            }
        }
    }

    #[test]
    fn hypertension_prevalence_tracks_spec() {
        let spec = CohortSpec {
            n_total: 20_000,
            seed: 3,
            ..CohortSpec::default()
        };
        let t = generate_synthetic_cohort(&spec).unwrap();
        for class in 0..2u8 {
            let rows: Vec<_> = t
                .rows()
                .iter()
                .zip(t.labels())
                .filter(|(_, &y)| y == class)
                .collect();
            let hits = rows
                .iter()
                .filter(|(r, _)| r[FIRST_COMORBIDITY] == Cell::Category(1))
                .count();
            let rate = hits as f64 / rows.len() as f64;
            let p = spec.classes[usize::from(class)].comorbidities[0];
            let se = libm::sqrt(p * (1.0 - p) / rows.len() as f64);
            assert!((rate - p).abs() < 4.0 * se, "class {class}: {rate} vs {p}");
        }
    }

    #[test]
    fn rejects_bad_specs() {
        let mut spec = CohortSpec::default();
        spec.classes[0].race[0] += 0.1;
        assert!(generate_synthetic_cohort(&spec).is_err());
        let mut spec = CohortSpec::default();
        spec.classes[1].age.min = 200.0;
        assert!(spec.validate().is_err());
        let spec = CohortSpec {
            missing_rate: 1.5,
            ..CohortSpec::default()
        };
        assert!(spec.validate().is_err());
    }
}
