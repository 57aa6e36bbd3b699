//! `nora synth | train | evaluate | embed | predict | cohort-stats`.

use std::ffi::OsString;
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};
use nora_core::cohort::generate_synthetic_cohort;
use nora_core::eval::{cohort_summary, roc_auc, MetricSummary};
use nora_core::pipeline::{fit_pipeline, run_cv_experiment, score_predictions};
use nora_core::preprocess::stratified_holdout;
use nora_core::{Label, RawTable};

use crate::bundle::{bundle_to_string, load_bundle, PipelineBundle, Provenance};
use crate::config::{DataSource, RunConfig};
use crate::dataio::{load_csv, load_uci_ckd, read_schema, schema_json, table_csv_bytes};
use crate::export;
use crate::manifest::RunWriter;
use crate::{sha256_hex, Error, Result, EXIT_CONFIG};

#[derive(Debug, Parser)]
#[command(name = "nora", version, about = "Contrastive tabular encoder + random forest pipeline for CKD risk")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Write a synthetic cohort (cohort.csv, schema.json).
    Synth(RunArgs),
    /// Fit on a stratified holdout split and write a pipeline bundle.
    Train(RunArgs),
    /// Stratified k-fold cross-validation.
    Evaluate(RunArgs),
    /// Latent vectors through a bundle's frozen encoder.
    Embed(RunArgs),
    /// Per-row class-1 probability and label from a bundle.
    Predict(RunArgs),
    /// Class-stratified cohort statistics with Mann-Whitney and Fisher tests.
    CohortStats(RunArgs),
}

#[derive(Debug, Args)]
struct RunArgs {
    /// TOML run configuration.
    #[arg(long)]
    config: PathBuf,
    /// Output directory.
    #[arg(long)]
    out: PathBuf,
    /// Overrides the config seed.
    #[arg(long)]
    seed: Option<u64>,
}

/// Parses `argv`, runs the command and returns the process exit status.
pub fn run<I, T>(argv: I) -> u8
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { EXIT_CONFIG } else { 0 };
        }
    };
    match execute(cli.command) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("nora: {e}");
            e.exit_code()
        }
    }
}

fn execute(command: Command) -> Result<()> {
    let (name, args, f): (&str, RunArgs, fn(&RunConfig, &mut RunWriter) -> Result<()>) = match command {
        Command::Synth(a) => ("synth", a, synth),
        Command::Train(a) => ("train", a, train),
        Command::Evaluate(a) => ("evaluate", a, evaluate),
        Command::Embed(a) => ("embed", a, embed),
        Command::Predict(a) => ("predict", a, predict),
        Command::CohortStats(a) => ("cohort-stats", a, cohort_stats),
    };
    let cfg = RunConfig::load(&args.config, args.seed)?;
    let mut w = RunWriter::begin(&args.out, name, &cfg)?;
    f(&cfg, &mut w)?;
    w.finish()?;
    Ok(())
}

pub fn load_table(cfg: &RunConfig) -> Result<RawTable> {
    match &cfg.data {
        DataSource::Csv {
            path,
            schema,
            missing_tokens,
        } => load_csv(path, &read_schema(schema)?, missing_tokens),
        DataSource::Uci { path } => load_uci_ckd(path),
        DataSource::Synth { .. } => {
            let spec = cfg.cohort_spec().expect("synth source");
            generate_synthetic_cohort(&spec).map_err(|e| Error::Config(format!("data: {e}")))
        }
    }
}

fn synth(cfg: &RunConfig, w: &mut RunWriter) -> Result<()> {
    if !matches!(cfg.data, DataSource::Synth { .. }) {
        return Err(Error::Config("synth needs data.source = \"synth\"".into()));
    }
    let table = load_table(cfg)?;
    w.write("cohort.csv", table_csv_bytes(&table)?)?;
    w.write("schema.json", schema_json(table.schema()))
}

fn cohort_stats(cfg: &RunConfig, w: &mut RunWriter) -> Result<()> {
    let summary = cohort_summary(&load_table(cfg)?)?;
    w.write("cohort_stats.json", export::json(&summary))?;
    w.write("cohort_stats.csv", export::cohort_stats_csv(&summary))
}

fn train(cfg: &RunConfig, w: &mut RunWriter) -> Result<()> {
    let table = load_table(cfg)?;
    let (train_idx, test_idx) = stratified_holdout(table.labels(), cfg.holdout.test_fraction, cfg.seed)?;
    let train_rows = table.select(&train_idx);
    let test_rows = table.select(&test_idx);
    let fit = fit_pipeline(&train_rows, &cfg.pipeline_config(), cfg.seed)?;
    let bundle = PipelineBundle::new(
        fit.pipeline,
        Provenance {
            seed: cfg.seed,
            dataset_fingerprint: sha256_hex(&table_csv_bytes(&train_rows)?),
            n_train: train_rows.len(),
        },
    );
    w.write("bundle.json", bundle_to_string(&bundle)?)?;
    w.write(
        "split.json",
        export::json(&serde_json::json!({ "train": train_idx, "test": test_idx })),
    )?;
    if let Some(report) = &fit.resample {
        w.write("resample_report.json", export::json(report))?;
    }
    if !fit.loss_history.is_empty() {
        w.write("loss_history.csv", export::loss_history_csv(&fit.loss_history))?;
    }
    let probabilities = bundle.pipeline.predict_proba(&test_rows)?;
    let report = score_predictions(test_rows.labels(), &probabilities)?;
    let mut csv = String::from(export::METRICS_HEADER);
    export::metrics_rows(&mut csv, cfg.pipeline.name(), "holdout", &MetricSummary::from_report(&report));
    w.write("holdout_metrics.json", export::json(&report))?;
    w.write("holdout_metrics.csv", csv)
}

fn evaluate(cfg: &RunConfig, w: &mut RunWriter) -> Result<()> {
    let table = load_table(cfg)?;
    let result = run_cv_experiment(&table, &cfg.pipeline_config(), cfg.cv.k, cfg.seed)?;
    w.write("cv_result.json", export::json(&result))?;
    w.write("metrics.csv", export::cv_metrics_csv(&[&result]))?;
    w.write("oof_predictions.csv", export::oof_predictions_csv(&result))?;
    let labels: Vec<Label> = result.folds.iter().flat_map(|f| f.test_labels.iter().copied()).collect();
    let scores: Vec<f64> = result.folds.iter().flat_map(|f| f.probabilities.iter().copied()).collect();
    let (roc, auc) = roc_auc(&labels, &scores)?;
    w.write("roc.csv", export::roc_csv(&roc))?;
    w.write(
        "pooled_auc.json",
        export::json(&serde_json::json!({ "pooled_out_of_fold_auc": auc })),
    )
}

fn bundle_for(cfg: &RunConfig, table: &RawTable) -> Result<PipelineBundle> {
    let b = cfg
        .bundle
        .as_ref()
        .ok_or_else(|| Error::Config("bundle.path is required".into()))?;
    let bundle = load_bundle(&b.path)?;
    if bundle.pipeline.preprocessor.schema() != table.schema() {
        return Err(Error::Data("dataset schema differs from the bundle's training schema".into()));
    }
    Ok(bundle)
}

fn embed(cfg: &RunConfig, w: &mut RunWriter) -> Result<()> {
    let table = load_table(cfg)?;
    let bundle = bundle_for(cfg, &table)?;
    if bundle.pipeline.encoder.is_none() {
        return Err(Error::Data(format!(
            "bundle pipeline '{}' has no encoder",
            bundle.pipeline.kind.name()
        )));
    }
    let (h, _) = bundle.pipeline.embed(&table)?;
    w.write("embeddings.csv", export::embeddings_csv(&h))
}

fn predict(cfg: &RunConfig, w: &mut RunWriter) -> Result<()> {
    let table = load_table(cfg)?;
    let bundle = bundle_for(cfg, &table)?;
    let probabilities = bundle.pipeline.predict_proba(&table)?;
    w.write("predictions.csv", export::predictions_csv(&probabilities))
}
