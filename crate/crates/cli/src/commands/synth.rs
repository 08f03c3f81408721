//! `fraudkit synth` — generate the four synthetic tables plus the
//! ground-truth manifest into `<out>/data/`.

use serde::Serialize;

use fraudkit_core::schema::{self, Setting};
use fraudkit_core::synth::{generate, SynthManifest};
use fraudkit_core::Result;

use crate::artifacts::{write_csv_with_comment, write_json, Layout};
use crate::config::RunConfig;

#[derive(Serialize)]
struct ManifestDoc<'a> {
    provenance: std::collections::BTreeMap<String, String>,
    #[serde(flatten)]
    manifest: &'a SynthManifest,
}

pub fn run(config: &RunConfig) -> Result<()> {
    let (tables, manifest) = generate(&config.synth)?;
    let layout = Layout::new(config);
    let data = layout.data_dir();
    let comment = config.provenance_comment();

    let mut buf = Vec::new();
    schema::write_beneficiaries(&tables.beneficiaries, &mut buf)?;
    write_csv_with_comment(&data.join("beneficiaries.csv"), &comment, buf)?;

    let mut buf = Vec::new();
    schema::write_claims(&tables.inpatient, Setting::Inpatient, &mut buf)?;
    write_csv_with_comment(&data.join("inpatient.csv"), &comment, buf)?;

    let mut buf = Vec::new();
    schema::write_claims(&tables.outpatient, Setting::Outpatient, &mut buf)?;
    write_csv_with_comment(&data.join("outpatient.csv"), &comment, buf)?;

    let mut buf = Vec::new();
    schema::write_labels(&tables.labels, &mut buf)?;
    write_csv_with_comment(&data.join("labels.csv"), &comment, buf)?;

    write_json(
        &data.join("manifest.json"),
        &ManifestDoc { provenance: config.provenance(), manifest: &manifest },
    )?;

    eprintln!(
        "synth: {} beneficiaries, {} providers ({} fraud), {} claims ({} inpatient) -> {}",
        manifest.counts.beneficiaries,
        manifest.counts.providers,
        manifest.counts.fraud_providers,
        manifest.counts.claims_emitted,
        manifest.counts.inpatient_claims,
        data.display()
    );
    Ok(())
}
