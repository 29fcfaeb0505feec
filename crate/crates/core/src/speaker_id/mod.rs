//! Closed-set, text-dependent speaker identification.
//!
//! One model is enrolled per (speaker, word, variant). A test utterance of a
//! word is scored against every enrolled speaker's model for that word and
//! variant, and the highest-scoring speaker is the decision.

mod eval;
mod manifest;
mod registry;
mod report;
mod synth;

pub use eval::{evaluate, Accuracy, Aggregates, EvalResult, SkippedTrial, TrialRecord};
pub use manifest::{read_manifest, write_manifest, Manifest, ManifestRow};
pub use registry::{Enrolled, Identification, SpeakerRegistry};
pub use report::{
    comparison_report, improvement_rate, round1, AccuracyGrid, ComparisonReport, GenderRates,
    GridRow, ImprovementRow, ReferenceRates,
};
pub use synth::{generate_synthetic_corpus, synthesize, utterance_id, SynthSpec, SynthUtterance};

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::emission::EmissionSpec;
use crate::error::{Error, Result};
use crate::model::ModelOrder;
use crate::topology::TopologyKind;
use crate::training::ModelSpec;

/// The four model families compared by the toolkit.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Variant {
    #[serde(rename = "LTRHMM1")]
    LtrHmm1,
    #[serde(rename = "LTRHMM2")]
    LtrHmm2,
    #[serde(rename = "CHMM1")]
    Chmm1,
    #[serde(rename = "CHMM2")]
    Chmm2,
}

impl Variant {
    pub const ALL: [Variant; 4] = [
        Variant::LtrHmm1,
        Variant::LtrHmm2,
        Variant::Chmm1,
        Variant::Chmm2,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Variant::LtrHmm1 => "LTRHMM1",
            Variant::LtrHmm2 => "LTRHMM2",
            Variant::Chmm1 => "CHMM1",
            Variant::Chmm2 => "CHMM2",
        }
    }

    pub fn order(self) -> ModelOrder {
        match self {
            Variant::LtrHmm1 | Variant::Chmm1 => ModelOrder::First,
            Variant::LtrHmm2 | Variant::Chmm2 => ModelOrder::Second,
        }
    }

    pub fn is_circular(self) -> bool {
        matches!(self, Variant::Chmm1 | Variant::Chmm2)
    }

    pub fn from_parts(order: ModelOrder, circular: bool) -> Self {
        match (order, circular) {
            (ModelOrder::First, false) => Variant::LtrHmm1,
            (ModelOrder::Second, false) => Variant::LtrHmm2,
            (ModelOrder::First, true) => Variant::Chmm1,
            (ModelOrder::Second, true) => Variant::Chmm2,
        }
    }

    /// Training spec; `skip_width` applies to the left-to-right variants.
    pub fn spec(self, n_states: usize, skip_width: usize, emission: EmissionSpec) -> ModelSpec {
        ModelSpec {
            order: self.order(),
            topology: if self.is_circular() {
                TopologyKind::Circular
            } else {
                TopologyKind::LeftToRight { skip_width }
            },
            n_states,
            emission,
        }
    }
}

impl fmt::Display for Variant {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Variant {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let key = s.trim().to_ascii_uppercase();
        let key = key.strip_suffix('S').unwrap_or(&key);
        Variant::ALL
            .into_iter()
            .find(|v| v.name() == key)
            .ok_or_else(|| {
                Error::InvalidConfig(format!(
                    "unknown variant {s:?} (LTRHMM1, LTRHMM2, CHMM1, CHMM2)"
                ))
            })
    }
}

macro_rules! label_enum {
    ($name:ident { $($variant:ident => $text:literal),+ $(,)? }) => {
        #[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
        #[serde(rename_all = "lowercase")]
        pub enum $name {
            $($variant),+
        }

        impl $name {
            pub fn as_str(self) -> &'static str {
                match self {
                    $($name::$variant => $text),+
                }
            }
        }

        impl fmt::Display for $name {
            fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
                f.write_str(self.as_str())
            }
        }

        impl FromStr for $name {
            type Err = Error;

            fn from_str(s: &str) -> Result<Self> {
                match s.trim().to_ascii_lowercase().as_str() {
                    $($text => Ok($name::$variant),)+
                    other => Err(Error::format(stringify!($name), format!("unknown value {other:?}"))),
                }
            }
        }
    };
}

label_enum!(Condition { Neutral => "neutral", Shouted => "shouted" });
label_enum!(Gender { Male => "male", Female => "female" });
label_enum!(Split { Train => "train", Test => "test" });
label_enum!(Scoring { Forward => "forward", Viterbi => "viterbi" });

impl Default for Scoring {
    fn default() -> Self {
        Scoring::Forward
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn variant_names_roundtrip() {
        for v in Variant::ALL {
            assert_eq!(v.name().parse::<Variant>().unwrap(), v);
            assert_eq!(Variant::from_parts(v.order(), v.is_circular()), v);
        }
        assert_eq!("chmm2s".parse::<Variant>().unwrap(), Variant::Chmm2);
        assert!("HMM3".parse::<Variant>().is_err());
    }

    #[test]
    fn labels_parse() {
        assert_eq!("Shouted".parse::<Condition>().unwrap(), Condition::Shouted);
        assert_eq!(Gender::Female.to_string(), "female");
        assert!("loud".parse::<Condition>().is_err());
    }
}
