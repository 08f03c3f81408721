//! `fraudkit stats` — descriptive statistics of the joined claims,
//! computed post-join and pre-normalization: the key-variable table plus
//! per-setting distribution summaries (quantiles + histograms) as
//! plot-data JSON files.

use std::collections::BTreeMap;
use std::path::Path;

use serde::Serialize;

use fraudkit_core::eval::{describe, ColumnStats};
use fraudkit_core::features::{read_unified, CodeIndexMap, UnifiedClaim};
use fraudkit_core::schema::Setting;
use fraudkit_core::{Error, Result};

use crate::artifacts::{require, write_json, Layout};
use crate::config::RunConfig;

#[derive(Serialize)]
struct StatsDoc<'a> {
    provenance: &'a BTreeMap<String, String>,
    column: &'a str,
    stats: ColumnStats,
}

fn emit(
    dir: &Path,
    provenance: &BTreeMap<String, String>,
    name: &str,
    values: &[f64],
) -> Result<()> {
    if values.is_empty() {
        return Ok(()); // nothing of this kind in the data; no file
    }
    let stats = describe(values)?;
    write_json(
        &dir.join(format!("{name}.json")),
        &StatsDoc { provenance, column: name, stats },
    )
}

fn binary(v: bool) -> f64 {
    if v {
        1.0
    } else {
        0.0
    }
}

pub fn run(config: &RunConfig) -> Result<()> {
    let layout = Layout::new(config);
    let mut claims: Vec<UnifiedClaim> =
        read_unified(require(&layout.unified("train"))?.as_bytes())?;
    claims.extend(read_unified(require(&layout.unified("validation"))?.as_bytes())?);
    let test_path = layout.unified("test");
    if test_path.exists() {
        claims.extend(read_unified(require(&test_path)?.as_bytes())?);
    }
    if claims.is_empty() {
        return Err(Error::Data("no joined claims to describe".into()));
    }

    let dir = layout.stats_dir();
    let provenance = config.provenance();
    let renal = |c: &UnifiedClaim| binary(c.renal_disease_indicator == config.features.renal_yes);
    let deductible = |c: &UnifiedClaim| c.deductible_paid.unwrap_or(0.0);

    // Key-variable table over every joined claim.
    let all = &claims;
    emit(&dir, &provenance, "potential_fraud", &all.iter().map(|c| binary(c.potential_fraud)).collect::<Vec<_>>())?;
    emit(&dir, &provenance, "reimbursed_amount", &all.iter().map(|c| c.reimbursed_amount).collect::<Vec<_>>())?;
    emit(&dir, &provenance, "deductible_paid", &all.iter().map(deductible).collect::<Vec<_>>())?;
    emit(&dir, &provenance, "admitted", &all.iter().map(|c| c.admitted as f64).collect::<Vec<_>>())?;
    emit(&dir, &provenance, "duration_of_claim", &all.iter().map(|c| c.duration_of_claim as f64).collect::<Vec<_>>())?;
    emit(&dir, &provenance, "number_of_days_admitted", &all.iter().map(|c| c.number_of_days_admitted as f64).collect::<Vec<_>>())?;
    emit(&dir, &provenance, "renal_disease_indicator", &all.iter().map(renal).collect::<Vec<_>>())?;
    emit(&dir, &provenance, "months_part_a", &all.iter().map(|c| c.months_part_a as f64).collect::<Vec<_>>())?;
    emit(&dir, &provenance, "months_part_b", &all.iter().map(|c| c.months_part_b as f64).collect::<Vec<_>>())?;

    // Distribution summaries per setting. The admit-code index here is
    // descriptive only, fitted over all rows, and never feeds a model.
    let admit_index =
        CodeIndexMap::fit(claims.iter().filter_map(|c| c.admit_diagnosis_code.as_deref()));
    for setting in [Setting::Inpatient, Setting::Outpatient] {
        let prefix = setting.table_name();
        let subset: Vec<&UnifiedClaim> = claims.iter().filter(|c| c.setting == setting).collect();
        if subset.is_empty() {
            continue;
        }
        emit(&dir, &provenance, &format!("{prefix}_reimbursed_amount"), &subset.iter().map(|c| c.reimbursed_amount).collect::<Vec<_>>())?;
        emit(&dir, &provenance, &format!("{prefix}_deductible_paid"), &subset.iter().map(|c| deductible(c)).collect::<Vec<_>>())?;
        emit(&dir, &provenance, &format!("{prefix}_duration_of_claim"), &subset.iter().map(|c| c.duration_of_claim as f64).collect::<Vec<_>>())?;
        if setting == Setting::Inpatient {
            emit(&dir, &provenance, "inpatient_number_of_days_admitted", &subset.iter().map(|c| c.number_of_days_admitted as f64).collect::<Vec<_>>())?;
        }
        let code_indices: Vec<f64> = subset
            .iter()
            .filter_map(|c| c.admit_diagnosis_code.as_deref())
            .map(|code| admit_index.index(Some(code)) as f64)
            .collect();
        emit(&dir, &provenance, &format!("{prefix}_admit_diag_index"), &code_indices)?;
    }

    eprintln!("stats: {} claims described -> {}", claims.len(), dir.display());
    Ok(())
}
