//! Enrolled models and maximum-likelihood identification.

use std::collections::BTreeMap;

use rayon::prelude::*;

use super::{Scoring, Variant};
use crate::error::{Error, Result};
use crate::model::AnyModel;
use crate::obs::Observations;
use crate::training::{train, ModelSpec, TrainConfig, TrainSummary};

#[derive(Debug, Clone)]
pub struct Enrolled {
    pub speaker: String,
    pub model: AnyModel,
    pub training: Option<TrainSummary>,
    /// Position in the global enrollment sequence; lower wins ties.
    pub order: usize,
}

/// Closed set of enrolled models keyed by (word, variant).
#[derive(Debug, Clone, Default)]
pub struct SpeakerRegistry {
    entries: BTreeMap<(String, Variant), Vec<Enrolled>>,
    next_order: usize,
    /// Free-form tag for the condition the models were trained under.
    pub training_condition: String,
}

/// Outcome of scoring one utterance.
#[derive(Debug, Clone, PartialEq)]
pub struct Identification {
    pub predicted: String,
    /// Every candidate, best first; equal scores keep enrollment order.
    pub ranked: Vec<(String, f64)>,
}

impl SpeakerRegistry {
    pub fn new(training_condition: impl Into<String>) -> Self {
        Self {
            training_condition: training_condition.into(),
            ..Self::default()
        }
    }

    /// Adds an already trained model.
    pub fn insert(
        &mut self,
        speaker: &str,
        word: &str,
        variant: Variant,
        model: AnyModel,
        training: Option<TrainSummary>,
    ) -> Result<()> {
        let slot = self.entries.entry((word.to_owned(), variant)).or_default();
        if slot.iter().any(|e| e.speaker == speaker) {
            return Err(Error::DuplicateEnrollment {
                speaker: speaker.to_owned(),
                word: word.to_owned(),
                variant: variant.to_string(),
            });
        }
        slot.push(Enrolled {
            speaker: speaker.to_owned(),
            model,
            training,
            order: self.next_order,
        });
        self.next_order += 1;
        Ok(())
    }

    /// Trains a model on the utterances and enrolls it.
    pub fn enroll(
        &mut self,
        speaker: &str,
        word: &str,
        variant: Variant,
        spec: &ModelSpec,
        utterances: &[Observations<'_>],
        config: &TrainConfig,
    ) -> Result<TrainSummary> {
        if self.contains(speaker, word, variant) {
            return Err(Error::DuplicateEnrollment {
                speaker: speaker.to_owned(),
                word: word.to_owned(),
                variant: variant.to_string(),
            });
        }
        let report = train(spec, utterances, config)?;
        let summary = report.summary();
        self.insert(speaker, word, variant, report.model, Some(summary.clone()))?;
        Ok(summary)
    }

    pub fn contains(&self, speaker: &str, word: &str, variant: Variant) -> bool {
        self.candidates(word, variant)
            .iter()
            .any(|e| e.speaker == speaker)
    }

    /// Enrolled models for a key, in enrollment order.
    pub fn candidates(&self, word: &str, variant: Variant) -> &[Enrolled] {
        self.entries
            .get(&(word.to_owned(), variant))
            .map_or(&[], Vec::as_slice)
    }

    pub fn iter(&self) -> impl Iterator<Item = (&str, Variant, &Enrolled)> {
        self.entries
            .iter()
            .flat_map(|((w, v), list)| list.iter().map(move |e| (w.as_str(), *v, e)))
    }

    pub fn len(&self) -> usize {
        self.entries.values().map(Vec::len).sum()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Scores the utterance against every candidate for (word, variant).
    pub fn identify(
        &self,
        word: &str,
        variant: Variant,
        obs: Observations<'_>,
        scoring: Scoring,
    ) -> Result<Identification> {
        let candidates = self.candidates(word, variant);
        if candidates.is_empty() {
            return Err(Error::NoModels {
                word: word.to_owned(),
                variant: variant.to_string(),
            });
        }
        let scores: Vec<f64> = candidates
            .par_iter()
            .map(|e| score(&e.model, obs, scoring))
            .collect::<Result<_>>()?;
        let mut ranked: Vec<(String, f64)> = candidates
            .iter()
            .zip(scores)
            .map(|(e, s)| (e.speaker.clone(), s))
            .collect();
        // stable: equal scores stay in enrollment order
        ranked.sort_by(|a, b| b.1.total_cmp(&a.1));
        Ok(Identification {
            predicted: ranked[0].0.clone(),
            ranked,
        })
    }
}

/// A model that cannot produce the utterance scores `-inf` rather than failing.
fn score(model: &AnyModel, obs: Observations<'_>, scoring: Scoring) -> Result<f64> {
    let result = match scoring {
        Scoring::Forward => model.log_likelihood(obs),
        Scoring::Viterbi => model.viterbi(obs).map(|p| p.log_prob),
    };
    match result {
        Err(Error::ImpossibleObservation { .. }) => Ok(f64::NEG_INFINITY),
        other => other,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::emission::{DiscreteDist, Emission, EmissionSpec};
    use crate::training::init_circular1;

    fn model(p0: f64) -> AnyModel {
        let m = init_circular1(3, &EmissionSpec::Discrete { n_symbols: 2 }).unwrap();
        let e = Emission::Discrete(DiscreteDist {
            probs: vec![p0, 1.0 - p0],
        });
        m.with_emissions(vec![e; 3]).unwrap().into()
    }

    #[test]
    fn single_speaker_always_wins() {
        let mut reg = SpeakerRegistry::new("neutral");
        reg.insert("a", "w", Variant::Chmm1, model(0.9), None)
            .unwrap();
        let id = reg
            .identify(
                "w",
                Variant::Chmm1,
                Observations::Symbols(&[1, 1, 1]),
                Scoring::Forward,
            )
            .unwrap();
        assert_eq!(id.predicted, "a");
    }

    #[test]
    fn ties_go_to_first_enrolled() {
        let mut reg = SpeakerRegistry::new("neutral");
        reg.insert("late", "w", Variant::Chmm1, model(0.5), None)
            .unwrap();
        reg.insert("early", "w", Variant::Chmm1, model(0.5), None)
            .unwrap();
        for scoring in [Scoring::Forward, Scoring::Viterbi] {
            let id = reg
                .identify("w", Variant::Chmm1, Observations::Symbols(&[0, 1]), scoring)
                .unwrap();
            assert_eq!(id.predicted, "late");
            assert_eq!(id.ranked[1].0, "early");
        }
    }

    #[test]
    fn best_model_wins_and_errors_are_typed() {
        let mut reg = SpeakerRegistry::new("neutral");
        reg.insert("zeros", "w", Variant::Chmm1, model(0.9), None)
            .unwrap();
        reg.insert("ones", "w", Variant::Chmm1, model(0.1), None)
            .unwrap();
        let id = reg
            .identify(
                "w",
                Variant::Chmm1,
                Observations::Symbols(&[1, 1, 0, 1]),
                Scoring::Forward,
            )
            .unwrap();
        assert_eq!(id.predicted, "ones");
        assert!(matches!(
            reg.identify(
                "x",
                Variant::Chmm1,
                Observations::Symbols(&[1]),
                Scoring::Forward
            ),
            Err(Error::NoModels { .. })
        ));
        assert!(matches!(
            reg.insert("ones", "w", Variant::Chmm1, model(0.3), None),
            Err(Error::DuplicateEnrollment { .. })
        ));
    }

    #[test]
    fn impossible_utterance_scores_negative_infinity() {
        let mut reg = SpeakerRegistry::new("neutral");
        reg.insert("never_one", "w", Variant::Chmm1, model(1.0), None)
            .unwrap();
        reg.insert("mixed", "w", Variant::Chmm1, model(0.5), None)
            .unwrap();
        let id = reg
            .identify(
                "w",
                Variant::Chmm1,
                Observations::Symbols(&[1]),
                Scoring::Forward,
            )
            .unwrap();
        assert_eq!(id.predicted, "mixed");
        assert_eq!(id.ranked[1].1, f64::NEG_INFINITY);
    }
}
