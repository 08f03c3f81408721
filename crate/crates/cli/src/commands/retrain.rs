//! `fraudkit retrain` — concatenate the prior training claims with newly
//! supplied tables, refit transforms and models from scratch, version the
//! outputs, and report before/after validation metrics side by side.
//!
//! With identical inputs (no new claims, same seed) the refit reproduces
//! every model document byte for byte; versions advance only when the
//! training-set fingerprint actually changes.

use std::collections::BTreeMap;
use std::path::Path;

use serde::Serialize;

use fraudkit_core::classifiers::{load_model, save_model, TrainedModel};
use fraudkit_core::eval::{evaluate, ModelEval};
use fraudkit_core::features::{self, FitState, UnifiedClaim};
use fraudkit_core::resample::apply_plan;
use fraudkit_core::schema::ParseMode;
use fraudkit_core::{Dataset64, Result};

use crate::artifacts::{read_tables, require, write_json, Layout};
use crate::commands::prep::load_split_meta;
use crate::config::{InputPaths, RunConfig};

#[derive(Serialize)]
struct RetrainReport {
    provenance: BTreeMap<String, String>,
    new_claims: usize,
    prior_fitstate_fingerprint: String,
    new_fitstate_fingerprint: String,
    before: Vec<ModelEval>,
    after: Vec<ModelEval>,
    models: Vec<Lineage>,
}

#[derive(Serialize)]
struct Lineage {
    kind: String,
    model_version: u32,
    lineage: Option<String>,
    changed: bool,
}

fn parse_new_claims(config: &RunConfig, dir: &Path) -> Result<Vec<UnifiedClaim>> {
    let mode = if config.strict { ParseMode::Strict } else { ParseMode::Permissive };
    let paths = InputPaths {
        beneficiaries: dir.join("beneficiaries.csv"),
        inpatient: dir.join("inpatient.csv"),
        outpatient: dir.join("outpatient.csv"),
        labels: dir.join("labels.csv"),
    };
    let tables = read_tables(&paths, mode)?;
    let joined = features::join_and_label(
        &tables.beneficiaries.records,
        &tables.inpatient.records,
        &tables.outpatient.records,
        &tables.labels.records,
        mode,
    )?;
    Ok(joined.claims)
}

pub fn run(config: &RunConfig, new_dir: Option<&Path>) -> Result<()> {
    let layout = Layout::new(config);
    let comment = config.provenance_comment();

    // Prior artifacts.
    let prior_state = FitState::from_json(
        &require(&layout.fitstate())?,
        &layout.fitstate().display().to_string(),
    )?;
    let prior_fingerprint = prior_state.fingerprint();
    let split_meta = load_split_meta(&layout)?;
    let prior_train_claims = features::read_unified(require(&layout.unified("train"))?.as_bytes())?;
    let val_claims = features::read_unified(require(&layout.unified("validation"))?.as_bytes())?;
    let prior_models: Vec<TrainedModel<f64>> = config
        .model_kinds()
        .into_iter()
        .map(|kind| {
            let path = layout.model_file(kind.short_name());
            load_model(&require(&path)?, &path.display().to_string())
        })
        .collect::<Result<_>>()?;

    // Before: prior models on the prior validation matrix.
    let prior_resampled = Dataset64::read_csv_path(&layout.resampled_train())?;
    let prior_validation = Dataset64::read_csv_path(&layout.matrix("validation"))?;
    let before = evaluate(
        &prior_models,
        &prior_resampled,
        &prior_validation,
        &prior_fingerprint,
        Some(split_meta.validation),
    )?;

    // Full refit on prior training claims plus the new ones.
    let new_claims = match new_dir {
        Some(dir) => parse_new_claims(config, dir)?,
        None => Vec::new(),
    };
    let mut combined = prior_train_claims;
    combined.extend(new_claims.iter().cloned());

    let (new_state, _) = FitState::fit(&combined, &config.features)?;
    let new_fingerprint = new_state.fingerprint();
    let train_ds = new_state.transform(&combined)?;
    let val_ds = new_state.transform(&val_claims)?;
    let resampled = apply_plan(&train_ds, &config.resample)?;

    let retrain = layout.retrain_dir();
    let models_dir = retrain.join("models");
    let mut refit_models = Vec::new();
    let mut lineages = Vec::new();
    for (kind, prior) in config.model_kinds().into_iter().zip(&prior_models) {
        let (mut model, warnings) =
            TrainedModel::fit(kind, &resampled, &config.hyperparams, config.seed, &new_fingerprint)?;
        for w in warnings {
            eprintln!("retrain[{}]: warning: {w}", kind.short_name());
        }
        let changed = model.train_fingerprint != prior.train_fingerprint;
        if changed {
            model.model_version = prior.model_version + 1;
            model.lineage = Some(prior.train_fingerprint.clone());
        } else {
            model.model_version = prior.model_version;
            model.lineage = prior.lineage.clone();
        }
        lineages.push(Lineage {
            kind: kind.short_name().to_string(),
            model_version: model.model_version,
            lineage: model.lineage.clone(),
            changed,
        });
        fraudkit_core::write_atomic(
            &models_dir.join(format!("model_{}.json", kind.short_name())),
            save_model(&model).as_bytes(),
        )?;
        refit_models.push(model);
    }

    resampled.write_csv_path(&retrain.join("train_resampled.csv"), Some(&comment))?;
    val_ds.write_csv_path(&retrain.join("validation.csv"), Some(&comment))?;
    fraudkit_core::write_atomic(&retrain.join("fitstate.json"), new_state.to_json().as_bytes())?;

    // After: refit models on the re-transformed validation claims. The
    // validation CLAIMS are unchanged; purity is asserted on their counts.
    let after = evaluate(
        &refit_models,
        &resampled,
        &val_ds,
        &new_fingerprint,
        Some(split_meta.validation),
    )?;

    let report = RetrainReport {
        provenance: config.provenance(),
        new_claims: new_claims.len(),
        prior_fitstate_fingerprint: prior_fingerprint,
        new_fitstate_fingerprint: new_fingerprint,
        before,
        after,
        models: lineages,
    };
    write_json(&retrain.join("retrain_report.json"), &report)?;

    eprintln!(
        "retrain: {} new claims, {} total training claims -> {}",
        report.new_claims,
        combined.len(),
        retrain.display()
    );
    if new_claims.is_empty() {
        eprintln!("retrain: no new claims; refit should reproduce the prior models byte for byte");
    }
    Ok(())
}
