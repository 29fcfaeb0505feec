//! Running identification trials over a test manifest and aggregating them.

use std::collections::BTreeMap;

use rayon::prelude::*;
use serde::Serialize;

use super::{Condition, Gender, Manifest, ManifestRow, Scoring, SpeakerRegistry, Split, Variant};
use crate::error::Result;
use crate::features::FeatureMatrix;
use crate::files::digest64;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize)]
pub struct Accuracy {
    pub correct: usize,
    pub total: usize,
}

impl Accuracy {
    pub fn add(&mut self, correct: bool) {
        self.total += 1;
        self.correct += usize::from(correct);
    }

    /// `100 * correct / total`; `None` without trials.
    pub fn percent(&self) -> Option<f64> {
        (self.total > 0).then(|| 100.0 * self.correct as f64 / self.total as f64)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TrialRecord {
    pub utterance_id: String,
    pub true_speaker: String,
    pub predicted: String,
    pub gender: Gender,
    pub word: String,
    pub condition: Condition,
    /// Every candidate's score, best first.
    pub scores: Vec<(String, f64)>,
}

impl TrialRecord {
    pub fn correct(&self) -> bool {
        self.true_speaker == self.predicted
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SkippedTrial {
    pub utterance_id: String,
    pub reason: String,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize)]
pub struct Aggregates {
    /// Accuracy per condition and gender.
    pub cells: BTreeMap<Condition, BTreeMap<Gender, Accuracy>>,
    /// All trials of a condition pooled.
    pub pooled: BTreeMap<Condition, Accuracy>,
    /// Mean of the male and female percentages (the one present if only one is).
    pub average: BTreeMap<Condition, f64>,
    /// `confusion[true][predicted]` trial counts.
    pub confusion: BTreeMap<String, BTreeMap<String, usize>>,
}

impl Aggregates {
    pub fn from_records(records: &[TrialRecord]) -> Self {
        let mut agg = Aggregates::default();
        for r in records {
            let ok = r.correct();
            agg.cells
                .entry(r.condition)
                .or_default()
                .entry(r.gender)
                .or_default()
                .add(ok);
            agg.pooled.entry(r.condition).or_default().add(ok);
            *agg.confusion
                .entry(r.true_speaker.clone())
                .or_default()
                .entry(r.predicted.clone())
                .or_default() += 1;
        }
        for (cond, by_gender) in &agg.cells {
            let pcts: Vec<f64> = by_gender.values().filter_map(Accuracy::percent).collect();
            if !pcts.is_empty() {
                agg.average
                    .insert(*cond, pcts.iter().sum::<f64>() / pcts.len() as f64);
            }
        }
        agg
    }

    pub fn percent(&self, condition: Condition, gender: Gender) -> Option<f64> {
        self.cells.get(&condition)?.get(&gender)?.percent()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EvalResult {
    pub variant: Variant,
    pub scoring: Scoring,
    /// Digest of the test utterance ids, to check results share a test set.
    pub manifest_digest: String,
    pub records: Vec<TrialRecord>,
    pub skipped: Vec<SkippedTrial>,
    pub aggregates: Aggregates,
    /// No trial was scored.
    pub empty: bool,
}

fn test_set_digest(rows: &[&ManifestRow]) -> String {
    let ids: Vec<&str> = rows.iter().map(|r| r.utterance_id.as_str()).collect();
    format!("{:016x}", digest64(ids.join("\n").as_bytes()))
}

/// Identifies every test utterance of the manifest with one variant.
///
/// Trials whose key has no models, whose speaker is not enrolled, or whose
/// features fail to load are listed in `skipped` instead of failing the run.
pub fn evaluate<F>(
    registry: &SpeakerRegistry,
    manifest: &Manifest,
    variant: Variant,
    scoring: Scoring,
    load: F,
) -> EvalResult
where
    F: Fn(&ManifestRow) -> Result<FeatureMatrix> + Sync,
{
    let tests: Vec<&ManifestRow> = manifest.split(Split::Test).collect();
    let outcomes: Vec<std::result::Result<TrialRecord, SkippedTrial>> = tests
        .par_iter()
        .map(|row| {
            let skip = |reason: String| SkippedTrial {
                utterance_id: row.utterance_id.clone(),
                reason,
            };
            if registry.candidates(&row.word_id, variant).is_empty() {
                return Err(skip(format!(
                    "no {variant} models for word {}",
                    row.word_id
                )));
            }
            if !registry.contains(&row.speaker_id, &row.word_id, variant) {
                return Err(skip(format!(
                    "speaker {} is not enrolled for word {}",
                    row.speaker_id, row.word_id
                )));
            }
            let features = load(row).map_err(|e| skip(e.to_string()))?;
            let id = registry
                .identify(&row.word_id, variant, features.observations(), scoring)
                .map_err(|e| skip(e.to_string()))?;
            Ok(TrialRecord {
                utterance_id: row.utterance_id.clone(),
                true_speaker: row.speaker_id.clone(),
                predicted: id.predicted,
                gender: row.gender,
                word: row.word_id.clone(),
                condition: row.condition,
                scores: id.ranked,
            })
        })
        .collect();
    let mut records = Vec::new();
    let mut skipped = Vec::new();
    for o in outcomes {
        match o {
            Ok(r) => records.push(r),
            Err(s) => skipped.push(s),
        }
    }
    let aggregates = Aggregates::from_records(&records);
    EvalResult {
        variant,
        scoring,
        manifest_digest: test_set_digest(&tests),
        empty: records.is_empty(),
        records,
        skipped,
        aggregates,
    }
}
