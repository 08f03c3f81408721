//! `fraudkit prep` — parse the four tables, join and label, split, fit
//! the transforms on training rows only, and write matrices + FitState.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use fraudkit_core::eval::ClassCounts;
use fraudkit_core::features::{
    self, provider_split_indices, shuffle_split_indices, stratified_split_indices, FitState,
    UnifiedClaim,
};
use fraudkit_core::schema::{ParseMode, ParseSummary};
use fraudkit_core::{Error, Result};

use crate::artifacts::{read_tables, write_json, Layout};
use crate::config::RunConfig;

/// Split metadata consumed by `train`, `eval`, and `retrain`.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SplitMeta {
    pub provenance: BTreeMap<String, String>,
    pub mode: String,
    pub validation_fraction: f64,
    pub test_fraction: Option<f64>,
    pub seed: u64,
    pub fitstate_fingerprint: String,
    pub train: ClassCounts,
    pub validation: ClassCounts,
    pub test: Option<ClassCounts>,
}

#[derive(Serialize)]
struct PrepSummary<'a> {
    provenance: BTreeMap<String, String>,
    tables: Vec<&'a ParseSummary>,
    join: &'a features::JoinSummary,
    fit_warnings: &'a [String],
    columns: &'a [String],
}

fn split_mode_name(config: &RunConfig) -> &'static str {
    if config.split.by_provider {
        "provider"
    } else if config.split.stratified {
        "stratified"
    } else {
        "shuffle"
    }
}

/// (train, validation, optional test) row indices.
type SplitIndices = (Vec<usize>, Vec<usize>, Option<Vec<usize>>);

/// Splits claims per the configured mode.
fn split_claims(config: &RunConfig, claims: &[UnifiedClaim]) -> Result<SplitIndices> {
    let labels: Vec<bool> = claims.iter().map(|c| c.potential_fraud).collect();
    let seed = config.split.seed;
    let val_f = config.split.validation_fraction;

    let two_way = |pool_labels: &[bool], fraction: f64, stream: u64| -> Result<(Vec<usize>, Vec<usize>)> {
        if config.split.by_provider {
            // Provider splits take the claims themselves; handled below.
            unreachable!("provider mode handled separately")
        } else if config.split.stratified {
            stratified_split_indices(pool_labels, fraction, seed.wrapping_add(stream))
        } else {
            shuffle_split_indices(pool_labels.len(), fraction, seed.wrapping_add(stream))
        }
    };

    if config.split.by_provider {
        if config.split.test_fraction.is_some() {
            return Err(Error::Usage(
                "three-way split is not supported with --split-by-provider".into(),
            ));
        }
        let (train, validation) = provider_split_indices(claims, val_f, seed)?;
        return Ok((train, validation, None));
    }

    match config.split.test_fraction {
        None => {
            let (train, validation) = two_way(&labels, val_f, 0)?;
            Ok((train, validation, None))
        }
        Some(test_f) => {
            // Carve test first, then validation from the remainder at the
            // fraction that keeps its share of the full dataset.
            let (rest, test) = two_way(&labels, test_f, 1)?;
            let rest_labels: Vec<bool> = rest.iter().map(|&i| labels[i]).collect();
            let val_within = val_f / (1.0 - test_f);
            let (train_rel, val_rel) = two_way(&rest_labels, val_within, 0)?;
            let train = train_rel.iter().map(|&i| rest[i]).collect();
            let validation = val_rel.iter().map(|&i| rest[i]).collect();
            Ok((train, validation, Some(test)))
        }
    }
}

pub fn run(config: &RunConfig) -> Result<()> {
    let mode = if config.strict { ParseMode::Strict } else { ParseMode::Permissive };
    let layout = Layout::new(config);
    let comment = config.provenance_comment();

    let tables = read_tables(&config.input_paths(), mode)?;
    let joined = features::join_and_label(
        &tables.beneficiaries.records,
        &tables.inpatient.records,
        &tables.outpatient.records,
        &tables.labels.records,
        mode,
    )?;
    let claims = joined.claims;
    if claims.is_empty() {
        return Err(Error::Data("join produced no labeled claims".into()));
    }

    let (train_idx, val_idx, test_idx) = split_claims(config, &claims)?;
    let take = |idx: &[usize]| -> Vec<UnifiedClaim> {
        idx.iter().map(|&i| claims[i].clone()).collect()
    };
    let train_claims = take(&train_idx);
    let val_claims = take(&val_idx);
    let test_claims = test_idx.as_deref().map(take);

    let (state, fit_report) = FitState::fit(&train_claims, &config.features)?;
    let train_ds = state.transform(&train_claims)?;
    let val_ds = state.transform(&val_claims)?;
    let test_ds = test_claims.as_deref().map(|c| state.transform(c)).transpose()?;

    let prep = layout.prep_dir();
    let mut unified_buf = Vec::new();
    features::write_unified(&train_claims, &mut unified_buf, Some(&comment))?;
    fraudkit_core::write_atomic(&layout.unified("train"), &unified_buf)?;
    let mut unified_buf = Vec::new();
    features::write_unified(&val_claims, &mut unified_buf, Some(&comment))?;
    fraudkit_core::write_atomic(&layout.unified("validation"), &unified_buf)?;
    if let Some(test) = &test_claims {
        let mut buf = Vec::new();
        features::write_unified(test, &mut buf, Some(&comment))?;
        fraudkit_core::write_atomic(&layout.unified("test"), &buf)?;
    }

    train_ds.write_csv_path(&layout.matrix("train"), Some(&comment))?;
    val_ds.write_csv_path(&layout.matrix("validation"), Some(&comment))?;
    if let Some(test) = &test_ds {
        test.write_csv_path(&layout.matrix("test"), Some(&comment))?;
    }

    fraudkit_core::write_atomic(&layout.fitstate(), state.to_json().as_bytes())?;

    let split_meta = SplitMeta {
        provenance: config.provenance(),
        mode: split_mode_name(config).to_string(),
        validation_fraction: config.split.validation_fraction,
        test_fraction: config.split.test_fraction,
        seed: config.split.seed,
        fitstate_fingerprint: state.fingerprint(),
        train: ClassCounts::of(&train_ds),
        validation: ClassCounts::of(&val_ds),
        test: test_ds.as_ref().map(ClassCounts::of),
    };
    write_json(&layout.split_meta(), &split_meta)?;

    let summary = PrepSummary {
        provenance: config.provenance(),
        tables: vec![
            &tables.beneficiaries.summary,
            &tables.inpatient.summary,
            &tables.outpatient.summary,
            &tables.labels.summary,
        ],
        join: &joined.summary,
        fit_warnings: &fit_report.warnings,
        columns: state.columns.as_slice(),
    };
    write_json(&prep.join("prep_summary.json"), &summary)?;

    eprintln!(
        "prep: {} joined claims -> train {} / validation {}{} rows, {} columns, fitstate {} -> {}",
        claims.len(),
        train_ds.n_rows(),
        val_ds.n_rows(),
        test_ds.as_ref().map_or(String::new(), |t| format!(" / test {}", t.n_rows())),
        train_ds.n_cols(),
        state.fingerprint(),
        prep.display()
    );
    Ok(())
}

/// Loads the split metadata a downstream command depends on.
pub fn load_split_meta(layout: &Layout) -> Result<SplitMeta> {
    let text = crate::artifacts::require(&layout.split_meta())?;
    serde_json::from_str(&text).map_err(|e| Error::Corrupt {
        path: layout.split_meta().display().to_string(),
        message: e.to_string(),
    })
}
