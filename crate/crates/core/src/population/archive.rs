//! Population archive: `manifest.json` plus one model file per member tier.

use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{PartnerPopulation, PopulationError, PopulationMember, Tier};
use crate::approximator::{load_model, save_model, NetworkSpec};

pub const ARCHIVE_MANIFEST: &str = "manifest.json";

#[derive(Serialize, Deserialize)]
struct Manifest {
    layout: String,
    spec: NetworkSpec,
    members: Vec<ManifestMember>,
}

#[derive(Serialize, Deserialize)]
struct ManifestMember {
    #[serde(flatten)]
    meta: PopulationMember,
    files: Vec<(Tier, String)>,
}

fn file_name(member: usize, tier: Tier) -> String {
    format!("member{member:02}_{}.model", tier.name())
}

pub fn save_population(population: &PartnerPopulation, dir: &Path) -> Result<(), PopulationError> {
    std::fs::create_dir_all(dir)?;
    let mut members = Vec::with_capacity(population.members.len());
    for (i, m) in population.members.iter().enumerate() {
        let mut files = Vec::new();
        for tier in Tier::ALL {
            let name = file_name(i, tier);
            save_model(&dir.join(&name), &population.spec, m.params(tier))?;
            files.push((tier, name));
        }
        members.push(ManifestMember { meta: m.clone(), files });
    }
    let manifest = Manifest { layout: population.layout.clone(), spec: population.spec.clone(), members };
    let json = serde_json::to_string_pretty(&manifest).map_err(|e| PopulationError::Archive(e.to_string()))?;
    std::fs::write(dir.join(ARCHIVE_MANIFEST), json)?;
    Ok(())
}

pub fn load_population(dir: &Path) -> Result<PartnerPopulation, PopulationError> {
    let text = std::fs::read_to_string(dir.join(ARCHIVE_MANIFEST))?;
    let manifest: Manifest = serde_json::from_str(&text).map_err(|e| PopulationError::Archive(e.to_string()))?;
    let mut members = Vec::with_capacity(manifest.members.len());
    for entry in manifest.members {
        let mut member = entry.meta;
        for (tier, name) in entry.files {
            let (spec, params) =
                load_model(&dir.join(&name)).map_err(|e| PopulationError::Archive(format!("{name}: {e}")))?;
            if spec != manifest.spec {
                return Err(PopulationError::Archive(format!("{name}: network spec differs from manifest")));
            }
            match tier {
                Tier::Full => member.full = params,
                Tier::Mid => member.mid = params,
                Tier::Random => member.random = params,
            }
        }
        for tier in Tier::ALL {
            if member.params(tier).len() != manifest.spec.param_count() {
                return Err(PopulationError::Archive(format!("missing {} tier", tier.name())));
            }
        }
        members.push(member);
    }
    Ok(PartnerPopulation { layout: manifest.layout, spec: manifest.spec, members })
}
