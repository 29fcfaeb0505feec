//! Synthetic cepstral corpora with a neutral/shouted train-test mismatch.
//!
//! Each word gets a template generator: a left-to-right chain of
//! `generator_states` states, each emitting from a two-component diagonal
//! Gaussian mixture. Every speaker perturbs the template state means of
//! every word by `separation` times a standard normal draw, so at
//! separation 0 all speakers share one generator per word.
//!
//! The shouted condition is a proxy for mismatch, not a model of shouted
//! speech: test frames get a fixed additive shift on the low-order
//! coefficients (`tilt_shift` on c1, tapering linearly to zero) and the
//! generator noise is scaled by `noise_inflation`.
//!
//! Every random draw comes from a generator seeded by a digest of the corpus
//! seed and the draw's role, so outputs do not depend on iteration order.

use std::fs;
use std::ops::RangeInclusive;
use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{Condition, Gender, Manifest, ManifestRow, Split};
use crate::error::{Error, Result};
use crate::features::{cache, FeatureMatrix, FeatureMeta, FrontendConfig};
use crate::files::{self, digest64};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SynthSpec {
    pub n_speakers: usize,
    pub n_words: usize,
    /// Neutral training utterances per (speaker, word).
    pub train_per_word: usize,
    /// Neutral test utterances per (speaker, word).
    pub neutral_test_per_word: usize,
    /// Shouted test utterances per (speaker, word).
    pub shouted_test_per_word: usize,
    pub min_frames: usize,
    pub max_frames: usize,
    pub dim: usize,
    pub generator_states: usize,
    /// Scale of the per-speaker offsets of the state means.
    pub separation: f64,
    /// Additive shift on c1 under the shouted condition.
    pub tilt_shift: f64,
    /// Number of low-order coefficients the shift touches.
    pub tilt_coefficients: usize,
    /// Noise standard-deviation multiplier under the shouted condition.
    pub noise_inflation: f64,
    pub seed: u64,
}

impl Default for SynthSpec {
    fn default() -> Self {
        Self {
            n_speakers: 10,
            n_words: 3,
            train_per_word: 5,
            neutral_test_per_word: 4,
            shouted_test_per_word: 9,
            min_frames: 40,
            max_frames: 60,
            dim: 12,
            generator_states: 5,
            separation: 0.5,
            tilt_shift: 1.5,
            tilt_coefficients: 4,
            noise_inflation: 1.5,
            seed: 0,
        }
    }
}

impl SynthSpec {
    pub fn check(&self) -> Result<()> {
        let counts = [
            ("n_speakers", self.n_speakers),
            ("n_words", self.n_words),
            ("train_per_word", self.train_per_word),
            ("neutral_test_per_word", self.neutral_test_per_word),
            ("shouted_test_per_word", self.shouted_test_per_word),
            ("min_frames", self.min_frames),
            ("dim", self.dim),
            ("generator_states", self.generator_states),
        ];
        if let Some((name, _)) = counts.iter().find(|(_, v)| *v == 0) {
            return Err(Error::InvalidConfig(format!("{name} must be at least 1")));
        }
        if self.max_frames < self.min_frames {
            return Err(Error::InvalidConfig(
                "max_frames must be at least min_frames".into(),
            ));
        }
        let reals = [
            ("separation", self.separation),
            ("tilt_shift", self.tilt_shift),
            ("noise_inflation", self.noise_inflation),
        ];
        if let Some((name, _)) = reals.iter().find(|(_, v)| !v.is_finite()) {
            return Err(Error::InvalidConfig(format!("{name} must be finite")));
        }
        if self.separation < 0.0 || self.noise_inflation <= 0.0 {
            return Err(Error::InvalidConfig(
                "separation must be non-negative and noise_inflation positive".into(),
            ));
        }
        Ok(())
    }

    /// Rows the manifest will hold.
    pub fn n_utterances(&self) -> usize {
        self.n_speakers
            * self.n_words
            * (self.train_per_word + self.neutral_test_per_word + self.shouted_test_per_word)
    }

    fn rng(&self, role: &str) -> ChaCha8Rng {
        ChaCha8Rng::seed_from_u64(digest64(format!("{}/{role}", self.seed).as_bytes()))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SynthUtterance {
    pub row: ManifestRow,
    pub features: FeatureMatrix,
}

struct Generator {
    stay: Vec<f64>,
    weights: Vec<[f64; 2]>,
    /// `[state][component][dim]`.
    means: Vec<[Vec<f64>; 2]>,
    stddev: Vec<Vec<f64>>,
}

const SPREAD: f64 = 0.6;

fn normal(rng: &mut ChaCha8Rng) -> f64 {
    rng.sample(StandardNormal)
}

fn word_template(spec: &SynthSpec, word: usize) -> Generator {
    let mut rng = spec.rng(&format!("word/{word}"));
    let (n, d) = (spec.generator_states, spec.dim);
    let mut g = Generator {
        stay: Vec::with_capacity(n),
        weights: Vec::with_capacity(n),
        means: Vec::with_capacity(n),
        stddev: Vec::with_capacity(n),
    };
    for _ in 0..n {
        g.stay.push(rng.random_range(0.8..0.9));
        let w0 = rng.random_range(0.3..0.7);
        g.weights.push([w0, 1.0 - w0]);
        let centre: Vec<f64> = (0..d).map(|_| 1.5 * normal(&mut rng)).collect();
        let comp = |rng: &mut ChaCha8Rng| -> Vec<f64> {
            centre.iter().map(|c| c + SPREAD * normal(rng)).collect()
        };
        g.means.push([comp(&mut rng), comp(&mut rng)]);
        g.stddev
            .push((0..d).map(|_| rng.random_range(0.5..1.0)).collect());
    }
    g
}

fn speaker_generator(
    spec: &SynthSpec,
    template: &Generator,
    speaker: usize,
    word: usize,
) -> Generator {
    let mut rng = spec.rng(&format!("speaker/{speaker}/word/{word}"));
    let means = template
        .means
        .iter()
        .map(|pair| {
            let offset: Vec<f64> = (0..spec.dim)
                .map(|_| spec.separation * normal(&mut rng))
                .collect();
            pair.clone()
                .map(|m| m.iter().zip(&offset).map(|(a, b)| a + b).collect())
        })
        .collect();
    Generator {
        stay: template.stay.clone(),
        weights: template.weights.clone(),
        means,
        stddev: template.stddev.clone(),
    }
}

fn tilt(spec: &SynthSpec) -> Vec<f64> {
    let k = spec.tilt_coefficients.min(spec.dim);
    (0..spec.dim)
        .map(|i| {
            if i < k {
                spec.tilt_shift * (k - i) as f64 / k as f64
            } else {
                0.0
            }
        })
        .collect()
}

fn sample(spec: &SynthSpec, g: &Generator, condition: Condition, id: &str) -> Vec<f64> {
    let mut rng = spec.rng(&format!("utterance/{id}"));
    let frames: RangeInclusive<usize> = spec.min_frames..=spec.max_frames;
    let t_len = rng.random_range(frames);
    let (shift, noise) = match condition {
        Condition::Neutral => (vec![0.0; spec.dim], 1.0),
        Condition::Shouted => (tilt(spec), spec.noise_inflation),
    };
    let last = g.stay.len() - 1;
    let mut state = 0;
    let mut out = Vec::with_capacity(t_len * spec.dim);
    for t in 0..t_len {
        if t > 0 && state < last && rng.random::<f64>() >= g.stay[state] {
            state += 1;
        }
        let c = usize::from(rng.random::<f64>() >= g.weights[state][0]);
        let mean = &g.means[state][c];
        for k in 0..spec.dim {
            out.push(mean[k] + shift[k] + noise * g.stddev[state][k] * normal(&mut rng));
        }
    }
    out
}

/// Utterance id for the `k`-th utterance of one cell of the corpus.
pub fn utterance_id(
    speaker: &str,
    word: &str,
    condition: Condition,
    split: Split,
    k: usize,
) -> String {
    format!("{speaker}_{word}_{condition}_{split}_{k:02}")
}

/// Samples the whole corpus in memory, in manifest order.
pub fn synthesize(spec: &SynthSpec) -> Result<Vec<SynthUtterance>> {
    spec.check()?;
    let templates: Vec<Generator> = (0..spec.n_words).map(|w| word_template(spec, w)).collect();
    let width = spec.n_speakers.to_string().len().max(2);
    let cells = [
        (Condition::Neutral, Split::Train, spec.train_per_word),
        (Condition::Neutral, Split::Test, spec.neutral_test_per_word),
        (Condition::Shouted, Split::Test, spec.shouted_test_per_word),
    ];
    let mut jobs = Vec::with_capacity(spec.n_utterances());
    for s in 0..spec.n_speakers {
        let speaker = format!("spk{:0width$}", s + 1);
        let gender = if s % 2 == 0 {
            Gender::Male
        } else {
            Gender::Female
        };
        for w in 0..spec.n_words {
            let word = format!("w{}", w + 1);
            for (condition, split, count) in cells {
                for k in 0..count {
                    let id = utterance_id(&speaker, &word, condition, split, k);
                    let row = ManifestRow {
                        path: format!("features/{id}.lpcc"),
                        utterance_id: id,
                        speaker_id: speaker.clone(),
                        gender,
                        word_id: word.clone(),
                        condition,
                        split,
                    };
                    jobs.push((row, s, w));
                }
            }
        }
    }
    let generators: Vec<Vec<Generator>> = (0..spec.n_speakers)
        .map(|s| {
            templates
                .iter()
                .enumerate()
                .map(|(w, t)| speaker_generator(spec, t, s, w))
                .collect()
        })
        .collect();
    jobs.into_par_iter()
        .map(|(row, s, w)| {
            let data = sample(spec, &generators[s][w], row.condition, &row.utterance_id);
            let meta = FeatureMeta {
                source_id: row.utterance_id.clone(),
                config: FrontendConfig::default(),
                cms_applied: false,
                degenerate_frames: Vec::new(),
            };
            let features = FeatureMatrix::new(data, spec.dim, meta)?;
            Ok(SynthUtterance { row, features })
        })
        .collect()
}

/// Writes `features/<utterance>.lpcc`, `manifest.tsv` and `synth.json` under
/// `dir` and returns the manifest.
pub fn generate_synthetic_corpus(spec: &SynthSpec, dir: &Path) -> Result<Manifest> {
    let utterances = synthesize(spec)?;
    let feature_dir = dir.join("features");
    fs::create_dir_all(&feature_dir).map_err(|e| Error::io(&feature_dir, e))?;
    utterances
        .par_iter()
        .try_for_each(|u| cache::save(&dir.join(&u.row.path), &u.features))?;
    let manifest = Manifest {
        rows: utterances.into_iter().map(|u| u.row).collect(),
        base_dir: dir.to_path_buf(),
    };
    super::write_manifest(&dir.join("manifest.tsv"), &manifest)?;
    let mut spec_json = serde_json::to_string_pretty(spec)?;
    spec_json.push('\n');
    files::write_atomic(&dir.join("synth.json"), spec_json.as_bytes())?;
    Ok(manifest)
}
