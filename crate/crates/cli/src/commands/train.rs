//! `fraudkit train` — resample the training matrix per the plan, fit
//! every configured model, and persist the model documents.

use std::collections::BTreeMap;

use serde::Serialize;

use fraudkit_core::classifiers::{save_model, TrainedModel};
use fraudkit_core::eval::ClassCounts;
use fraudkit_core::features::FitState;
use fraudkit_core::resample::{apply_plan, ResamplePlan};
use fraudkit_core::{Dataset64, Result};

use crate::artifacts::{require, write_json, Layout};
use crate::config::RunConfig;

#[derive(Serialize)]
struct TrainSummary {
    provenance: BTreeMap<String, String>,
    fitstate_fingerprint: String,
    resample: ResamplePlan,
    original_train: ClassCounts,
    resampled_train: ClassCounts,
    models: Vec<ModelEntry>,
}

#[derive(Serialize)]
struct ModelEntry {
    kind: String,
    file: String,
    train_fingerprint: String,
    warnings: Vec<String>,
}

pub fn run(config: &RunConfig) -> Result<()> {
    let layout = Layout::new(config);
    let comment = config.provenance_comment();

    let state = FitState::from_json(
        &require(&layout.fitstate())?,
        &layout.fitstate().display().to_string(),
    )?;
    let fingerprint = state.fingerprint();
    let train = Dataset64::read_csv_path(&layout.matrix("train"))?;
    let original_counts = ClassCounts::of(&train);

    let resampled = apply_plan(&train, &config.resample)?;
    resampled.write_csv_path(&layout.resampled_train(), Some(&comment))?;

    let mut entries = Vec::new();
    for kind in config.model_kinds() {
        let (model, warnings) =
            TrainedModel::fit(kind, &resampled, &config.hyperparams, config.seed, &fingerprint)?;
        let path = layout.model_file(kind.short_name());
        fraudkit_core::write_atomic(&path, save_model(&model).as_bytes())?;
        for w in &warnings {
            eprintln!("train[{}]: warning: {w}", kind.short_name());
        }
        entries.push(ModelEntry {
            kind: kind.short_name().to_string(),
            file: format!("model_{}.json", kind.short_name()),
            train_fingerprint: model.train_fingerprint.clone(),
            warnings,
        });
    }

    let summary = TrainSummary {
        provenance: config.provenance(),
        fitstate_fingerprint: fingerprint,
        resample: config.resample.clone(),
        original_train: original_counts,
        resampled_train: ClassCounts::of(&resampled),
        models: entries,
    };
    write_json(&layout.models_dir().join("train_summary.json"), &summary)?;

    eprintln!(
        "train: {} -> {} rows after {} resampling; fitted [{}] -> {}",
        original_counts.total(),
        summary.resampled_train.total(),
        config.resample.method.name(),
        config.models.join(", "),
        layout.models_dir().display()
    );
    Ok(())
}
