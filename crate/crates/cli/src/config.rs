//! Run configuration: a TOML file, then `CHMM_*` environment variables, then
//! command-line flags, each layer overriding the one before.
//!
//! ```toml
//! scoring = "forward"          # or "viterbi"
//!
//! [model]
//! order = 2                    # 1 or 2
//! topology = "circular"        # or "ltr"
//! states = 5
//! mixtures = 5
//! skip_width = 2               # left-to-right only
//!
//! [frontend]                   # LPC cepstrum settings
//! cms = false
//!
//! [train]                      # Baum-Welch settings
//! max_iterations = 100
//! seed = 0
//!
//! [paths]
//! models = "models"
//! reports = "reports"
//! ```

use std::path::{Path, PathBuf};

use chmm::features::FrontendConfig;
use chmm::files::digest64;
use chmm::speaker_id::{Scoring, Variant};
use chmm::{ModelOrder, TrainConfig};
use serde::{Deserialize, Serialize};

use crate::CliError;

/// Upper bound on states and mixture components accepted from a config.
pub const MAX_SIZE: usize = 64;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Topology {
    Ltr,
    Circular,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ModelConfig {
    pub order: u8,
    pub topology: Topology,
    pub states: usize,
    pub mixtures: usize,
    pub skip_width: usize,
}

impl Default for ModelConfig {
    fn default() -> Self {
        Self {
            order: 2,
            topology: Topology::Circular,
            states: 5,
            mixtures: 5,
            skip_width: 2,
        }
    }
}

impl ModelConfig {
    pub fn variant(&self) -> Variant {
        let order = if self.order == 1 {
            ModelOrder::First
        } else {
            ModelOrder::Second
        };
        Variant::from_parts(order, self.topology == Topology::Circular)
    }

    pub fn set_variant(&mut self, v: Variant) {
        self.order = v.order().as_u8();
        self.topology = if v.is_circular() {
            Topology::Circular
        } else {
            Topology::Ltr
        };
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PathsConfig {
    pub models: PathBuf,
    pub reports: PathBuf,
}

impl Default for PathsConfig {
    fn default() -> Self {
        Self {
            models: "models".into(),
            reports: "reports".into(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CliConfig {
    pub scoring: Scoring,
    pub model: ModelConfig,
    pub frontend: FrontendConfig,
    pub train: TrainConfig,
    pub paths: PathsConfig,
}

/// Values taken from flags or their `CHMM_*` environment fallbacks.
#[derive(Debug, Clone, Default, clap::Args)]
pub struct Overrides {
    /// TOML configuration file.
    #[arg(long, global = true, env = "CHMM_CONFIG")]
    pub config: Option<PathBuf>,
    /// LTRHMM1, LTRHMM2, CHMM1 or CHMM2; `train` and `evaluate` also take a
    /// comma-separated list or `all`.
    #[arg(long, global = true, env = "CHMM_VARIANT")]
    pub variant: Option<String>,
    #[arg(long, global = true, env = "CHMM_ORDER", value_parser = clap::value_parser!(u8).range(1..=2))]
    pub order: Option<u8>,
    #[arg(long, global = true, env = "CHMM_TOPOLOGY", value_enum)]
    pub topology: Option<TopologyArg>,
    #[arg(long, global = true, env = "CHMM_STATES")]
    pub states: Option<usize>,
    #[arg(long, global = true, env = "CHMM_MIXTURES")]
    pub mixtures: Option<usize>,
    #[arg(long, global = true, env = "CHMM_SKIP_WIDTH")]
    pub skip_width: Option<usize>,
    /// Apply cepstral mean subtraction.
    #[arg(long, global = true, env = "CHMM_CMS", num_args = 0..=1, default_missing_value = "true")]
    pub cms: Option<bool>,
    #[arg(long, global = true, env = "CHMM_SCORING", value_enum)]
    pub scoring: Option<ScoringArg>,
    /// Seed for every random draw (k-means initialization, synthetic corpora).
    #[arg(long, global = true, env = "CHMM_SEED")]
    pub seed: Option<u64>,
    #[arg(long, global = true, env = "CHMM_MAX_ITERATIONS")]
    pub max_iterations: Option<usize>,
    #[arg(long, global = true, env = "CHMM_REL_TOL")]
    pub rel_tol: Option<f64>,
    #[arg(long, global = true, env = "CHMM_MODELS")]
    pub models: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum)]
pub enum TopologyArg {
    Ltr,
    Circular,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum)]
pub enum ScoringArg {
    Forward,
    Viterbi,
}

fn bad(msg: impl Into<String>) -> CliError {
    CliError::Hard(msg.into())
}

impl CliConfig {
    pub fn from_file(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| bad(format!("cannot read config {}: {e}", path.display())))?;
        toml::from_str(&text).map_err(|e| bad(format!("config {}: {e}", path.display())))
    }

    /// Loads the file named by the overrides (if any) and applies them.
    /// Returns the config and the variant list requested with `--variant`.
    pub fn resolve(o: &Overrides) -> Result<(Self, Option<Vec<Variant>>), CliError> {
        let mut c = match &o.config {
            Some(p) => Self::from_file(p)?,
            None => Self::default(),
        };
        if let Some(v) = o.order {
            c.model.order = v;
        }
        if let Some(t) = o.topology {
            c.model.topology = match t {
                TopologyArg::Ltr => Topology::Ltr,
                TopologyArg::Circular => Topology::Circular,
            };
        }
        let variants = o.variant.as_deref().map(parse_variants).transpose()?;
        if let Some([single]) = variants.as_deref() {
            c.model.set_variant(*single);
        }
        if let Some(n) = o.states {
            c.model.states = n;
        }
        if let Some(m) = o.mixtures {
            c.model.mixtures = m;
        }
        if let Some(s) = o.skip_width {
            c.model.skip_width = s;
        }
        if let Some(cms) = o.cms {
            c.frontend.cms = cms;
        }
        if let Some(s) = o.scoring {
            c.scoring = match s {
                ScoringArg::Forward => Scoring::Forward,
                ScoringArg::Viterbi => Scoring::Viterbi,
            };
        }
        if let Some(seed) = o.seed {
            c.train.seed = seed;
        }
        if let Some(n) = o.max_iterations {
            c.train.max_iterations = n;
        }
        if let Some(t) = o.rel_tol {
            c.train.rel_tol = t;
        }
        if let Some(m) = &o.models {
            c.paths.models = m.clone();
        }
        c.check()?;
        Ok((c, variants))
    }

    pub fn check(&self) -> Result<(), CliError> {
        let m = &self.model;
        if !(1..=2).contains(&m.order) {
            return Err(bad("model.order must be 1 or 2"));
        }
        if !(1..=MAX_SIZE).contains(&m.states) || !(1..=MAX_SIZE).contains(&m.mixtures) {
            return Err(bad(format!(
                "states and mixtures must lie in 1..={MAX_SIZE}"
            )));
        }
        self.frontend.check().map_err(|e| bad(e.to_string()))?;
        self.train.check().map_err(|e| bad(e.to_string()))?;
        Ok(())
    }

    /// Digest of every setting that affects outputs; paths are left out so
    /// moving a run does not change it.
    pub fn hash(&self) -> u64 {
        #[derive(Serialize)]
        struct Settings<'a> {
            scoring: Scoring,
            model: &'a ModelConfig,
            frontend: &'a FrontendConfig,
            train: &'a TrainConfig,
        }
        let s = Settings {
            scoring: self.scoring,
            model: &self.model,
            frontend: &self.frontend,
            train: &self.train,
        };
        digest64(&serde_json::to_vec(&s).expect("settings serialize"))
    }

    /// Hash for one variant's training run, independent of the variant the
    /// config names by default.
    pub fn hash_for(&self, v: Variant) -> u64 {
        let mut c = self.clone();
        c.model.set_variant(v);
        c.hash()
    }
}

/// `all`, one variant name, or a comma-separated list.
pub fn parse_variants(s: &str) -> Result<Vec<Variant>, CliError> {
    if s.trim().eq_ignore_ascii_case("all") {
        return Ok(Variant::ALL.to_vec());
    }
    let mut out = Vec::new();
    for part in s.split(',') {
        let v: Variant = part.parse().map_err(|e: chmm::Error| bad(e.to_string()))?;
        if !out.contains(&v) {
            out.push(v);
        }
    }
    Ok(out)
}
