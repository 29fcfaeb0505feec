//! Model store layout and feature loading shared by the commands.
//!
//! ```text
//! <store>/<VARIANT>/index.json            trained models and failures
//! <store>/<VARIANT>/<speaker>/<word>.json model files
//! ```

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use chmm::features::{
    audio, cache, cepstral_mean_subtraction, extract_features, FeatureMatrix, FrontendConfig,
};
use chmm::model_io;
use chmm::speaker_id::{Manifest, ManifestRow, SpeakerRegistry, Variant};
use chmm::{Error, Result};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IndexEntry {
    pub speaker: String,
    pub word: String,
    /// Relative to the variant directory.
    pub file: String,
    pub iterations_run: usize,
    pub converged: bool,
    pub final_log_likelihood: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IndexFailure {
    pub speaker: String,
    pub word: String,
    pub error: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StoreIndex {
    pub variant: Variant,
    pub config_hash: String,
    pub n_states: usize,
    pub n_mixtures: usize,
    /// Enrollment order for identification ties.
    pub models: Vec<IndexEntry>,
    pub failures: Vec<IndexFailure>,
}

pub const INDEX: &str = "index.json";

pub fn variant_dir(store: &Path, v: Variant) -> PathBuf {
    store.join(v.name())
}

/// Ids become path components, so separators and dot names are refused.
pub fn path_component(id: &str) -> Result<&str> {
    let ok = !id.is_empty() && id != "." && id != ".." && !id.contains(['/', '\\', '\0']);
    if ok {
        Ok(id)
    } else {
        Err(Error::InvalidConfig(format!(
            "id {id:?} cannot be used as a file name"
        )))
    }
}

pub fn write_index(store: &Path, index: &StoreIndex) -> Result<()> {
    let path = variant_dir(store, index.variant).join(INDEX);
    let mut text = model_io::to_precise_json(index)?;
    text.push('\n');
    chmm::files::write_atomic(&path, text.as_bytes())
}

pub fn read_index(store: &Path, v: Variant) -> Result<StoreIndex> {
    let path = variant_dir(store, v).join(INDEX);
    let bytes = chmm::files::read(&path)?;
    Ok(serde_json::from_slice(&bytes)?)
}

/// Variants that have an index in the store, in canonical order.
pub fn discover(store: &Path) -> Vec<Variant> {
    Variant::ALL
        .into_iter()
        .filter(|&v| variant_dir(store, v).join(INDEX).is_file())
        .collect()
}

/// Loads every indexed model of the variants into one registry.
pub fn load_registry(store: &Path, variants: &[Variant]) -> Result<SpeakerRegistry> {
    let mut reg = SpeakerRegistry::new("neutral");
    for &v in variants {
        let index = read_index(store, v)?;
        let dir = variant_dir(store, v);
        let files: Vec<_> = index
            .models
            .par_iter()
            .map(|e| model_io::load(&dir.join(&e.file)))
            .collect::<Result<_>>()?;
        for (e, f) in index.models.iter().zip(files) {
            reg.insert(&e.speaker, &e.word, v, f.model, None)?;
        }
    }
    Ok(reg)
}

/// Reads a feature cache, or runs the frontend on an audio file. CMS is
/// applied when configured and not already present.
pub fn load_features(
    path: &Path,
    source_id: &str,
    frontend: &FrontendConfig,
) -> Result<FeatureMatrix> {
    let is_cache = path
        .extension()
        .is_some_and(|e| e.eq_ignore_ascii_case("lpcc"));
    let features = if is_cache {
        cache::load(path)?
    } else {
        let signal = audio::read_audio(path, frontend.sample_rate)?;
        if signal.sample_rate != frontend.sample_rate {
            return Err(Error::InvalidConfig(format!(
                "{} is sampled at {} Hz, the frontend expects {} Hz",
                path.display(),
                signal.sample_rate,
                frontend.sample_rate
            )));
        }
        extract_features(&signal.samples, frontend, source_id)?
    };
    Ok(if frontend.cms && !features.meta.cms_applied {
        cepstral_mean_subtraction(&features)
    } else {
        features
    })
}

/// Loads the rows in parallel, keyed by utterance id; failures keep their message.
pub fn load_rows<'a>(
    manifest: &Manifest,
    rows: impl IntoIterator<Item = &'a ManifestRow>,
    frontend: &FrontendConfig,
) -> BTreeMap<String, std::result::Result<FeatureMatrix, String>> {
    let rows: Vec<&ManifestRow> = rows.into_iter().collect();
    rows.par_iter()
        .map(|r| {
            let loaded = load_features(&manifest.resolve(r), &r.utterance_id, frontend)
                .map_err(|e| e.to_string());
            (r.utterance_id.clone(), loaded)
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn path_components_are_checked() {
        assert!(path_component("spk01").is_ok());
        for bad in ["", ".", "..", "a/b", "a\\b"] {
            assert!(path_component(bad).is_err(), "{bad}");
        }
    }
}
