//! End-to-end pipelines (preprocess, resample, optional encoder, head) and
//! the stratified cross-validation driver.

use alloc::format;
use alloc::vec::Vec;
use serde::{Deserialize, Serialize};

use crate::classifiers::{
    train_logistic, train_random_forest, Classifier, ClassifierHead, ForestConfig, KnnModel,
    LogisticConfig, DEFAULT_KNN_K,
};
use crate::encoder::{encode_latent, forward_embed, train_encoder, EncoderBundle, TrainConfig};
use crate::eval::{classification_report, roc_auc, MetricSummary, MetricsReport};
use crate::classifiers::threshold_labels;
use crate::preprocess::{stratified_kfold, FoldPlan, Preprocessor};
use crate::resample::{smote_tomek, ResampleReport, DEFAULT_SMOTE_K};
use crate::{rng, Error, FeatureMatrix, Label, RawTable, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PipelineKind {
    /// Contrastive encoder, random forest on the latents.
    Nora,
    /// Contrastive encoder, logistic regression on the latents.
    SclLr,
    Lr,
    Knn,
    Rf,
}

impl PipelineKind {
    pub const ALL: [PipelineKind; 5] = [Self::Nora, Self::SclLr, Self::Lr, Self::Knn, Self::Rf];

    pub fn name(self) -> &'static str {
        match self {
            Self::Nora => "nora",
            Self::SclLr => "scl_lr",
            Self::Lr => "lr",
            Self::Knn => "knn",
            Self::Rf => "rf",
        }
    }

    pub fn parse(name: &str) -> Option<Self> {
        Self::ALL.into_iter().find(|k| k.name() == name)
    }

    pub fn uses_encoder(self) -> bool {
        matches!(self, Self::Nora | Self::SclLr)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ResamplePlacement {
    /// Resample each training fold after the split.
    InsideFolds,
    /// Preprocess and resample the whole table once, then split. Test folds
    /// then contain synthetic rows.
    BeforeSplit,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PipelineConfig {
    pub kind: PipelineKind,
    pub resample: bool,
    pub smote_k: usize,
    pub placement: ResamplePlacement,
    /// `train.seed` is ignored; the encoder seed comes from the run seed.
    pub train: TrainConfig,
    pub forest: ForestConfig,
    pub logistic: LogisticConfig,
    pub knn_k: usize,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        Self {
            kind: PipelineKind::Nora,
            resample: true,
            smote_k: DEFAULT_SMOTE_K,
            placement: ResamplePlacement::InsideFolds,
            train: TrainConfig::default(),
            forest: ForestConfig::default(),
            logistic: LogisticConfig::default(),
            knn_k: DEFAULT_KNN_K,
        }
    }
}

impl PipelineConfig {
    pub fn with_kind(kind: PipelineKind) -> Self {
        Self {
            kind,
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: &str| Err(Error::InvalidArgument(format!("pipeline config: {msg}")));
        self.train.validate()?;
        if self.smote_k == 0 {
            return bad("smote k must be >= 1");
        }
        if self.knn_k == 0 {
            return bad("knn k must be >= 1");
        }
        if self.forest.n_trees == 0 || self.forest.max_depth == 0 {
            return bad("forest needs >= 1 tree and depth >= 1");
        }
        if self.forest.max_features == Some(0) {
            return bad("forest max_features must be >= 1");
        }
        let l = &self.logistic;
        if !(l.learning_rate > 0.0) || l.epochs == 0 || !(l.l2 >= 0.0) {
            return bad("logistic needs learning_rate > 0, epochs >= 1, l2 >= 0");
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainedPipeline {
    pub kind: PipelineKind,
    pub preprocessor: Preprocessor,
    /// Present exactly for the contrastive pipelines.
    pub encoder: Option<EncoderBundle>,
    pub head: ClassifierHead,
}

impl TrainedPipeline {
    pub fn validate(&self) -> Result<()> {
        self.preprocessor.validate()?;
        self.head.validate()?;
        if self.kind.uses_encoder() != self.encoder.is_some() {
            return Err(Error::Invariant(format!(
                "pipeline '{}' has an inconsistent encoder",
                self.kind.name()
            )));
        }
        let width = match &self.encoder {
            Some(e) => {
                e.validate()?;
                if e.input_dim != self.preprocessor.output_width() {
                    return Err(Error::Invariant("encoder input width differs from preprocessor".into()));
                }
                crate::encoder::LATENT_DIM
            }
            None => self.preprocessor.output_width(),
        };
        if self.head.input_width() != width {
            return Err(Error::Invariant("head input width differs from its features".into()));
        }
        Ok(())
    }

    /// Head inputs: latents for the contrastive pipelines, else the
    /// preprocessed features.
    pub fn features(&self, table: &RawTable) -> Result<FeatureMatrix> {
        let x = self.preprocessor.apply(table)?;
        match &self.encoder {
            Some(e) => encode_latent(e, &x),
            None => Ok(x),
        }
    }

    pub fn predict_proba(&self, table: &RawTable) -> Result<Vec<f64>> {
        self.head.predict_proba(&self.features(table)?)
    }

    pub fn predict(&self, table: &RawTable) -> Result<Vec<Label>> {
        Ok(threshold_labels(&self.predict_proba(table)?))
    }

    /// Latent `H` and normalized projection `Z` through the frozen encoder.
    pub fn embed(&self, table: &RawTable) -> Result<(FeatureMatrix, FeatureMatrix)> {
        let e = self
            .encoder
            .as_ref()
            .ok_or_else(|| Error::InvalidArgument(format!("pipeline '{}' has no encoder", self.kind.name())))?;
        forward_embed(e, &self.preprocessor.apply(table)?)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct FitOutcome {
    pub pipeline: TrainedPipeline,
    pub resample: Option<ResampleReport>,
    /// Per-epoch encoder loss; empty for the baselines.
    pub loss_history: Vec<f64>,
}

struct FittedModels {
    encoder: Option<EncoderBundle>,
    head: ClassifierHead,
    loss_history: Vec<f64>,
}

fn fit_head(cfg: &PipelineConfig, x: &FeatureMatrix, y: &[Label], seed: u64) -> Result<ClassifierHead> {
    Ok(match cfg.kind {
        PipelineKind::Nora | PipelineKind::Rf => {
            ClassifierHead::Forest(train_random_forest(x, y, &cfg.forest, seed)?)
        }
        PipelineKind::SclLr | PipelineKind::Lr => ClassifierHead::Logistic(train_logistic(x, y, &cfg.logistic)?),
        PipelineKind::Knn => ClassifierHead::Knn(KnnModel::fit(x, y, cfg.knn_k)?),
    })
}

/// Fits every config on the same features. Encoders are trained once per
/// distinct `TrainConfig` and shared, which gives the same result as
/// fitting each config separately.
fn fit_models(cfgs: &[PipelineConfig], x: &FeatureMatrix, y: &[Label], seed: u64) -> Result<Vec<FittedModels>> {
    let mut encoders: Vec<(TrainConfig, EncoderBundle, FeatureMatrix, Vec<f64>)> = Vec::new();
    let mut out = Vec::with_capacity(cfgs.len());
    for cfg in cfgs {
        if !cfg.kind.uses_encoder() {
            out.push(FittedModels {
                encoder: None,
                head: fit_head(cfg, x, y, seed)?,
                loss_history: Vec::new(),
            });
            continue;
        }
        let tc = TrainConfig { seed, ..cfg.train };
        let pos = match encoders.iter().position(|e| e.0 == tc) {
            Some(p) => p,
            None => {
                let trained = train_encoder(x, y, &tc)?;
                let h = encode_latent(&trained.bundle, x)?;
                encoders.push((tc, trained.bundle, h, trained.loss_history));
                encoders.len() - 1
            }
        };
        let (_, bundle, h, history) = &encoders[pos];
        out.push(FittedModels {
            encoder: Some(bundle.clone()),
            head: fit_head(cfg, h, y, seed)?,
            loss_history: history.clone(),
        });
    }
    Ok(out)
}

fn check_shared_resampling(cfgs: &[PipelineConfig]) -> Result<()> {
    let first = cfgs.first().ok_or(Error::Empty("pipeline config list"))?;
    for c in cfgs {
        c.validate()?;
        if (c.resample, c.smote_k, c.placement) != (first.resample, first.smote_k, first.placement) {
            return Err(Error::InvalidArgument(
                "configs compared on shared folds must resample identically".into(),
            ));
        }
    }
    Ok(())
}

/// Preprocessed (and optionally resampled) training features.
fn prepare(
    cfg: &PipelineConfig,
    train: &RawTable,
    seed: u64,
) -> Result<(Preprocessor, FeatureMatrix, Vec<Label>, Option<ResampleReport>)> {
    let pre = Preprocessor::fit(train)?;
    let x = pre.apply(train)?;
    if cfg.resample {
        let r = smote_tomek(&x, train.labels(), cfg.smote_k, seed)?;
        Ok((pre, r.x, r.y, Some(r.report)))
    } else {
        Ok((pre, x, train.labels().to_vec(), None))
    }
}

/// Fit on `train`: preprocessor, then SMOTE+Tomek (if enabled), then the
/// encoder (contrastive pipelines) and head. Every random draw is seeded
/// from `seed`.
pub fn fit_pipeline(train: &RawTable, cfg: &PipelineConfig, seed: u64) -> Result<FitOutcome> {
    cfg.validate()?;
    let (pre, x, y, report) = prepare(cfg, train, seed)?;
    let m = fit_models(core::slice::from_ref(cfg), &x, &y, seed)?.pop().expect("one config");
    Ok(FitOutcome {
        pipeline: TrainedPipeline {
            kind: cfg.kind,
            preprocessor: pre,
            encoder: m.encoder,
            head: m.head,
        },
        resample: report,
        loss_history: m.loss_history,
    })
}

/// Report with ROC and AUC attached (when both classes are present).
pub fn score_predictions(y_true: &[Label], probabilities: &[f64]) -> Result<MetricsReport> {
    let mut report = classification_report(y_true, &threshold_labels(probabilities))?;
    if let Ok((roc, auc)) = roc_auc(y_true, probabilities) {
        report.roc = Some(roc);
        report.auc = Some(auc);
    }
    Ok(report)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FoldResult {
    pub fold: usize,
    /// `seed ⊕ fold`; refitting the fold's training rows with it
    /// reproduces `report`.
    pub seed: u64,
    pub n_train: usize,
    pub resample: Option<ResampleReport>,
    /// Held-out row indices (into the resampled data under
    /// [`ResamplePlacement::BeforeSplit`]).
    pub test_indices: Vec<usize>,
    pub test_labels: Vec<Label>,
    pub probabilities: Vec<f64>,
    pub report: MetricsReport,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CvResult {
    pub config: PipelineConfig,
    pub k: usize,
    pub seed: u64,
    /// Resampling of the whole table under [`ResamplePlacement::BeforeSplit`].
    pub global_resample: Option<ResampleReport>,
    pub folds: Vec<FoldResult>,
    pub mean: MetricSummary,
}

pub fn run_cv_experiment(table: &RawTable, cfg: &PipelineConfig, k: usize, seed: u64) -> Result<CvResult> {
    Ok(run_cv_experiments(table, core::slice::from_ref(cfg), k, seed)?
        .pop()
        .expect("one config"))
}

/// Runs several pipelines on identical folds. The configs must agree on
/// resampling; each result equals what [`run_cv_experiment`] returns for
/// that config alone.
pub fn run_cv_experiments(
    table: &RawTable,
    cfgs: &[PipelineConfig],
    k: usize,
    seed: u64,
) -> Result<Vec<CvResult>> {
    check_shared_resampling(cfgs)?;
    if k < 2 {
        return Err(Error::InvalidArgument(format!("k = {k}, need k >= 2")));
    }
    let shared = cfgs[0];
    let mut folds: Vec<Vec<FoldResult>> = alloc::vec![Vec::new(); cfgs.len()];
    let mut global_resample = None;

    match (shared.resample, shared.placement) {
        (true, ResamplePlacement::BeforeSplit) => {
            let (_, x, y, report) = prepare(&shared, table, seed)?;
            global_resample = report;
            let plan = stratified_kfold(&y, k, seed)?;
            for f in 0..k {
                let fold_seed = rng::derive(seed, f as u64);
                let train_idx = plan.train_indices(f);
                let test_idx = &plan.folds[f];
                let y_tr: Vec<Label> = train_idx.iter().map(|&i| y[i]).collect();
                let y_te: Vec<Label> = test_idx.iter().map(|&i| y[i]).collect();
                let x_te = x.select_rows(test_idx);
                let models = fit_models(cfgs, &x.select_rows(&train_idx), &y_tr, fold_seed)?;
                for (c, m) in models.into_iter().enumerate() {
                    let feats = match &m.encoder {
                        Some(e) => encode_latent(e, &x_te)?,
                        None => x_te.clone(),
                    };
                    let probabilities = m.head.predict_proba(&feats)?;
                    folds[c].push(FoldResult {
                        fold: f,
                        seed: fold_seed,
                        n_train: train_idx.len(),
                        resample: None,
                        test_indices: test_idx.clone(),
                        report: score_predictions(&y_te, &probabilities)?,
                        test_labels: y_te.clone(),
                        probabilities,
                    });
                }
            }
        }
        _ => {
            let plan = stratified_kfold(table.labels(), k, seed)?;
            for f in 0..k {
                for (c, r) in cv_fold(table, cfgs, &plan, f)?.into_iter().enumerate() {
                    folds[c].push(r);
                }
            }
        }
    }

    Ok(cfgs
        .iter()
        .zip(folds)
        .map(|(cfg, folds)| {
            let summaries: Vec<MetricSummary> = folds.iter().map(|f| MetricSummary::from_report(&f.report)).collect();
            CvResult {
                config: *cfg,
                k,
                seed,
                global_resample: global_resample.clone(),
                mean: MetricSummary::mean(&summaries),
                folds,
            }
        })
        .collect())
}

/// One fold of the inside-the-loop protocol, for every config.
pub fn cv_fold(table: &RawTable, cfgs: &[PipelineConfig], plan: &FoldPlan, f: usize) -> Result<Vec<FoldResult>> {
    check_shared_resampling(cfgs)?;
    if f >= plan.k || plan.n_indices() != table.len() {
        return Err(Error::InvalidArgument("fold plan does not match the table".into()));
    }
    let fold_seed = rng::derive(plan.seed, f as u64);
    let train_idx = plan.train_indices(f);
    let test_idx = &plan.folds[f];
    let train = table.select(&train_idx);
    let test = table.select(test_idx);
    let (pre, x, y, report) = prepare(&cfgs[0], &train, fold_seed)?;
    let x_te = pre.apply(&test)?;
    let models = fit_models(cfgs, &x, &y, fold_seed)?;
    models
        .into_iter()
        .map(|m| {
            let feats = match &m.encoder {
                Some(e) => encode_latent(e, &x_te)?,
                None => x_te.clone(),
            };
            let probabilities = m.head.predict_proba(&feats)?;
            Ok(FoldResult {
                fold: f,
                seed: fold_seed,
                n_train: train_idx.len(),
                resample: report.clone(),
                test_indices: test_idx.clone(),
                report: score_predictions(test.labels(), &probabilities)?,
                test_labels: test.labels().to_vec(),
                probabilities,
            })
        })
        .collect()
}
