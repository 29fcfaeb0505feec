//! `chmm train`: one model per (speaker, word) and variant.

use std::collections::BTreeMap;
use std::path::Path;

use chmm::features::FeatureMatrix;
use chmm::model_io::{self, TrainingMeta};
use chmm::speaker_id::{read_manifest, Split, Variant};
use chmm::training::train;
use chmm::{EmissionSpec, Error};
use rayon::prelude::*;

use crate::config::CliConfig;
use crate::store::{
    load_rows, path_component, variant_dir, write_index, IndexEntry, IndexFailure, StoreIndex,
};
use crate::CliError;

type Group = ((String, String), Vec<String>);

fn train_one(
    config: &CliConfig,
    variant: Variant,
    dir: &Path,
    (speaker, word): &(String, String),
    features: &[&FeatureMatrix],
) -> chmm::Result<IndexEntry> {
    let dim = features[0].dim();
    if features.iter().any(|f| f.dim() != dim) {
        return Err(Error::InvalidDimension(
            "training utterances differ in feature dimension".into(),
        ));
    }
    let m = &config.model;
    let spec = variant.spec(
        m.states,
        m.skip_width,
        EmissionSpec::Gmm {
            n_mixtures: m.mixtures,
            dim,
        },
    );
    let obs: Vec<_> = features.iter().map(|f| f.observations()).collect();
    let report = train(&spec, &obs, &config.train)?;
    let summary = report.summary();
    let file = format!(
        "{}/{}.json",
        path_component(speaker)?,
        path_component(word)?
    );
    let path = dir.join(&file);
    if let Some(parent) = path.parent() {
        std::fs::create_dir_all(parent).map_err(|e| Error::Io {
            path: parent.to_path_buf(),
            source: e,
        })?;
    }
    let meta = TrainingMeta::new(summary.clone(), config.hash_for(variant));
    model_io::save(&path, &report.model, Some(&meta))?;
    Ok(IndexEntry {
        speaker: speaker.clone(),
        word: word.clone(),
        file,
        iterations_run: summary.iterations_run,
        converged: summary.converged,
        final_log_likelihood: summary.final_log_likelihood,
    })
}

pub fn run(
    config: &CliConfig,
    variants: Option<Vec<Variant>>,
    manifest: &Path,
    store: &Path,
) -> Result<(), CliError> {
    let manifest = read_manifest(manifest)?;
    let mut groups: BTreeMap<(String, String), Vec<String>> = BTreeMap::new();
    for r in manifest.split(Split::Train) {
        groups
            .entry((r.speaker_id.clone(), r.word_id.clone()))
            .or_default()
            .push(r.utterance_id.clone());
    }
    if groups.is_empty() {
        return Err(CliError::NoWork("the manifest has no train rows".into()));
    }
    let features = load_rows(&manifest, manifest.split(Split::Train), &config.frontend);
    let variants = variants.unwrap_or_else(|| vec![config.model.variant()]);
    let groups: Vec<Group> = groups.into_iter().collect();

    let mut n_failed = 0;
    for variant in variants {
        let dir = variant_dir(store, variant);
        std::fs::create_dir_all(&dir)
            .map_err(|e| CliError::Hard(format!("{}: {e}", dir.display())))?;
        let outcomes: Vec<Result<IndexEntry, String>> = groups
            .par_iter()
            .map(|(key, ids)| {
                let feats = ids
                    .iter()
                    .map(|id| features[id].as_ref().map_err(|e| format!("{id}: {e}")))
                    .collect::<Result<Vec<_>, _>>()?;
                train_one(config, variant, &dir, key, &feats).map_err(|e| e.to_string())
            })
            .collect();
        let mut index = StoreIndex {
            variant,
            config_hash: format!("{:016x}", config.hash_for(variant)),
            n_states: config.model.states,
            n_mixtures: config.model.mixtures,
            models: Vec::new(),
            failures: Vec::new(),
        };
        for (((speaker, word), _), outcome) in groups.iter().zip(outcomes) {
            match outcome {
                Ok(e) => {
                    println!(
                        "{variant} {speaker} {word}: {} iterations, {}, log-likelihood {:.4}",
                        e.iterations_run,
                        if e.converged {
                            "converged"
                        } else {
                            "not converged"
                        },
                        e.final_log_likelihood
                    );
                    index.models.push(e);
                }
                Err(error) => {
                    println!("{variant} {speaker} {word}: FAILED {error}");
                    index.failures.push(IndexFailure {
                        speaker: speaker.clone(),
                        word: word.clone(),
                        error,
                    });
                }
            }
        }
        n_failed += index.failures.len();
        write_index(store, &index)?;
        println!(
            "{variant}: {} models in {}, {} failed",
            index.models.len(),
            dir.display(),
            index.failures.len()
        );
    }
    if n_failed > 0 {
        return Err(CliError::Hard(format!("{n_failed} models failed to train")));
    }
    Ok(())
}
