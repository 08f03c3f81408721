//! `fraudkit score` — apply one persisted model to claim tables, emitting
//! a per-claim CSV of claim_id, fraud score, and predicted label. Labels
//! are not required; when a label table exists it is ignored here.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use fraudkit_core::classifiers::load_model;
use fraudkit_core::features::{join_claims, FitState};
use fraudkit_core::schema::ParseMode;
use fraudkit_core::Result;

use crate::artifacts::{read_claim_tables, require, write_csv_with_comment, Layout};
use crate::config::RunConfig;

pub fn run(config: &RunConfig, model_path: &Path, scores_out: Option<&Path>) -> Result<()> {
    let layout = Layout::new(config);
    let mode = if config.strict { ParseMode::Strict } else { ParseMode::Permissive };

    let model = load_model(&require(model_path)?, &model_path.display().to_string())?;
    let state = FitState::from_json(
        &require(&layout.fitstate())?,
        &layout.fitstate().display().to_string(),
    )?;
    model.check_fingerprint(&state.fingerprint())?;

    let (benes, inpatient, outpatient) = read_claim_tables(&config.input_paths(), mode)?;
    let joined = join_claims(
        &benes.records,
        &inpatient.records,
        &outpatient.records,
        None,
        mode,
    )?;
    let matrix = state.transform(&joined.claims)?;
    let scores = model.score_matrix(&matrix)?;

    let mut body = String::from("claim_id,score,predicted\n");
    for (id, score) in matrix.ids().iter().zip(&scores) {
        writeln!(body, "{},{},{}", id.claim_id, score, u8::from(*score >= 0.5))
            .expect("string write");
    }
    let out: PathBuf = scores_out
        .map(Path::to_path_buf)
        .unwrap_or_else(|| layout.out.join("scores.csv"));
    write_csv_with_comment(
        &out,
        &format!(
            "{} model={} fitstate={}",
            config.provenance_comment(),
            model.kind.short_name(),
            model.fitstate_fingerprint
        ),
        body.into_bytes(),
    )?;

    eprintln!("score: {} claims scored with {} -> {}", scores.len(), model.kind.short_name(), out.display());
    Ok(())
}
