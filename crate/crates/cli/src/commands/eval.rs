//! `fraudkit eval` — score every trained model on the (resampled)
//! training matrix and the untouched validation matrix, then write the
//! full report bundle: JSON report, metrics table, per-model ROC CSVs and
//! confusion matrices.

use std::collections::BTreeMap;
use std::fmt::Write as _;

use serde::Serialize;

use fraudkit_core::classifiers::{load_model, Hyperparams};
use fraudkit_core::eval::{evaluate, round3, ClassCounts, ModelEval};
use fraudkit_core::features::FitState;
use fraudkit_core::resample::ResamplePlan;
use fraudkit_core::{Dataset64, Model64, Result};

use crate::artifacts::{require, write_csv_with_comment, write_json, Layout};
use crate::commands::prep::load_split_meta;
use crate::config::RunConfig;

#[derive(Serialize)]
pub struct Report {
    pub provenance: BTreeMap<String, String>,
    pub seed: u64,
    pub fitstate_fingerprint: String,
    pub resample: ResamplePlan,
    pub hyperparams: Hyperparams,
    pub train_rows: ClassCounts,
    pub validation_rows: ClassCounts,
    pub models: Vec<ModelEval>,
}

pub fn load_models(config: &RunConfig, layout: &Layout) -> Result<Vec<Model64>> {
    config
        .model_kinds()
        .into_iter()
        .map(|kind| {
            let path = layout.model_file(kind.short_name());
            load_model(&require(&path)?, &path.display().to_string())
        })
        .collect()
}

/// Assembles the report bundle under `dir` from already-computed evals.
pub fn write_report_files(
    config: &RunConfig,
    dir: &std::path::Path,
    report: &Report,
) -> Result<()> {
    let comment = config.provenance_comment();
    write_json(&dir.join("report.json"), report)?;

    // Table-shaped metric grid, display-rounded to 3 decimals.
    let mut grid = String::from("model,split,accuracy,precision,recall,f1\n");
    for eval in &report.models {
        for (split, se) in [("train", &eval.train), ("validation", &eval.validation)] {
            let m = &se.metrics;
            writeln!(
                grid,
                "{},{split},{:.3},{:.3},{:.3},{:.3}",
                eval.kind.short_name(),
                round3(m.accuracy),
                round3(m.precision),
                round3(m.recall),
                round3(m.f1)
            )
            .expect("string write");
        }
    }
    write_csv_with_comment(&dir.join("metrics.csv"), &comment, grid.into_bytes())?;

    for eval in &report.models {
        let name = eval.kind.short_name();
        let mut roc_csv = String::from("fpr,tpr\n");
        for (fpr, tpr) in &eval.roc.points {
            writeln!(roc_csv, "{fpr},{tpr}").expect("string write");
        }
        write_csv_with_comment(
            &dir.join(format!("roc_{name}.csv")),
            &format!("{comment} auc={}", eval.roc.auc),
            roc_csv.into_bytes(),
        )?;

        #[derive(Serialize)]
        struct ConfusionDoc<'a> {
            provenance: &'a BTreeMap<String, String>,
            model: &'a str,
            validation: &'a fraudkit_core::eval::ConfusionMatrix,
            train: &'a fraudkit_core::eval::ConfusionMatrix,
            auc: f64,
        }
        write_json(
            &dir.join(format!("confusion_{name}.json")),
            &ConfusionDoc {
                provenance: &report.provenance,
                model: name,
                validation: &eval.validation.confusion,
                train: &eval.train.confusion,
                auc: eval.roc.auc,
            },
        )?;
    }
    Ok(())
}

pub fn run(config: &RunConfig) -> Result<()> {
    let layout = Layout::new(config);
    let state = FitState::from_json(
        &require(&layout.fitstate())?,
        &layout.fitstate().display().to_string(),
    )?;
    let fingerprint = state.fingerprint();
    let split_meta = load_split_meta(&layout)?;

    let train_path = layout.resampled_train();
    if !train_path.exists() {
        return Err(fraudkit_core::Error::MissingArtifact(train_path.display().to_string()));
    }
    let train = Dataset64::read_csv_path(&train_path)?;
    let validation = Dataset64::read_csv_path(&layout.matrix("validation"))?;
    let models = load_models(config, &layout)?;

    // Validation purity: the evaluated rows must be exactly the split's.
    let evals = evaluate(&models, &train, &validation, &fingerprint, Some(split_meta.validation))?;

    let report = Report {
        provenance: config.provenance(),
        seed: config.seed,
        fitstate_fingerprint: fingerprint,
        resample: config.resample.clone(),
        hyperparams: config.hyperparams.clone(),
        train_rows: ClassCounts::of(&train),
        validation_rows: ClassCounts::of(&validation),
        models: evals,
    };
    let dir = layout.report_dir();
    write_report_files(config, &dir, &report)?;

    for eval in &report.models {
        let m = &eval.validation.metrics;
        eprintln!(
            "eval[{}]: validation acc {:.3} prec {:.3} rec {:.3} f1 {:.3} auc {:.3}",
            eval.kind.short_name(),
            round3(m.accuracy),
            round3(m.precision),
            round3(m.recall),
            round3(m.f1),
            round3(eval.roc.auc),
        );
    }
    eprintln!("eval: report -> {}", dir.display());
    Ok(())
}
