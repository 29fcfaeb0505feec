//! Model files.
//!
//! Models are stored as pretty-printed JSON. Every floating-point value is
//! written in scientific notation with 17 significant digits, which parses
//! back to the identical `f64`. States are numbered from 0 (`state_index_base`).
//!
//! ```text
//! {
//!   "format": "chmm-model",
//!   "format_version": 1,
//!   "state_index_base": 0,
//!   "order": "2",
//!   "topology": { "kind": "circular" },
//!   "n_states": 5,
//!   "emission": { "type": "gmm", "n_mixtures": 5, "dim": 12 },
//!   "initial": [...],                 // N
//!   "trans1": [[...], ...],           // N x N
//!   "trans2": [[[...], ...], ...],    // N x N x N, order 2 only
//!   "emissions": [{ "type": "gmm", "weights": [...], "means": [[...]], "variances": [[...]] }, ...],
//!   "training": { "iterations_run": 12, "converged": true, "final_log_likelihood": ..., ... }
//! }
//! ```
//!
//! Explicit topologies add an `"allowed"` `N x N` boolean matrix.

use std::io;
use std::path::Path;

use serde::{Deserialize, Serialize};
use serde_json::ser::{Formatter, PrettyFormatter};

use crate::emission::{Emission, EmissionSpec};
use crate::error::{Error, Result};
use crate::files;
use crate::model::{AnyModel, Hmm1Model, Hmm2Model, ModelOrder};
use crate::topology::{TopologyKind, TopologyMask};
use crate::training::TrainSummary;

pub const FORMAT: &str = "chmm-model";
pub const FORMAT_VERSION: u32 = 1;

/// Training provenance stored next to the parameters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TrainingMeta {
    pub iterations_run: usize,
    pub converged: bool,
    pub final_log_likelihood: f64,
    pub log_likelihoods: Vec<f64>,
    /// Hex digest of the configuration that produced the model.
    pub config_hash: String,
}

impl TrainingMeta {
    pub fn new(summary: TrainSummary, config_hash: u64) -> Self {
        Self {
            iterations_run: summary.iterations_run,
            converged: summary.converged,
            final_log_likelihood: summary.final_log_likelihood,
            log_likelihoods: summary.log_likelihoods,
            config_hash: format!("{config_hash:016x}"),
        }
    }
}

/// A loaded model file.
#[derive(Debug, Clone, PartialEq)]
pub struct ModelFile {
    pub model: AnyModel,
    pub training: Option<TrainingMeta>,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct ModelDoc {
    format: String,
    format_version: u32,
    state_index_base: u32,
    order: ModelOrder,
    topology: TopologyKind,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    allowed: Option<Vec<Vec<bool>>>,
    n_states: usize,
    emission: EmissionSpec,
    initial: Vec<f64>,
    trans1: Vec<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    trans2: Option<Vec<Vec<Vec<f64>>>>,
    emissions: Vec<Emission>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    training: Option<TrainingMeta>,
}

/// Pretty printing with 17 significant digits for every float.
struct Precise<'a>(PrettyFormatter<'a>);

impl Formatter for Precise<'_> {
    fn write_f64<W: ?Sized + io::Write>(&mut self, writer: &mut W, value: f64) -> io::Result<()> {
        write!(writer, "{value:.16e}")
    }
    fn begin_array<W: ?Sized + io::Write>(&mut self, w: &mut W) -> io::Result<()> {
        self.0.begin_array(w)
    }
    fn end_array<W: ?Sized + io::Write>(&mut self, w: &mut W) -> io::Result<()> {
        self.0.end_array(w)
    }
    fn begin_array_value<W: ?Sized + io::Write>(
        &mut self,
        w: &mut W,
        first: bool,
    ) -> io::Result<()> {
        self.0.begin_array_value(w, first)
    }
    fn end_array_value<W: ?Sized + io::Write>(&mut self, w: &mut W) -> io::Result<()> {
        self.0.end_array_value(w)
    }
    fn begin_object<W: ?Sized + io::Write>(&mut self, w: &mut W) -> io::Result<()> {
        self.0.begin_object(w)
    }
    fn end_object<W: ?Sized + io::Write>(&mut self, w: &mut W) -> io::Result<()> {
        self.0.end_object(w)
    }
    fn begin_object_key<W: ?Sized + io::Write>(
        &mut self,
        w: &mut W,
        first: bool,
    ) -> io::Result<()> {
        self.0.begin_object_key(w, first)
    }
    fn begin_object_value<W: ?Sized + io::Write>(&mut self, w: &mut W) -> io::Result<()> {
        self.0.begin_object_value(w)
    }
    fn end_object_value<W: ?Sized + io::Write>(&mut self, w: &mut W) -> io::Result<()> {
        self.0.end_object_value(w)
    }
}

/// JSON with 17-significant-digit floats, for any serializable value.
pub fn to_precise_json<T: Serialize>(value: &T) -> Result<String> {
    let mut out = Vec::new();
    let mut ser = serde_json::Serializer::with_formatter(
        &mut out,
        Precise(PrettyFormatter::with_indent(b"  ")),
    );
    value.serialize(&mut ser)?;
    out.push(b'\n');
    Ok(String::from_utf8(out).expect("serde_json emits UTF-8"))
}

fn rows(flat: &[f64], width: usize) -> Vec<Vec<f64>> {
    flat.chunks(width).map(<[f64]>::to_vec).collect()
}

fn to_doc(model: &AnyModel, training: Option<&TrainingMeta>) -> ModelDoc {
    let n = model.n_states();
    let mask = model.mask();
    let (trans1, trans2) = match model {
        AnyModel::First(m) => (rows(m.trans_matrix(), n), None),
        AnyModel::Second(m) => (
            rows(m.trans1_matrix(), n),
            Some(
                m.trans2_tensor()
                    .chunks(n * n)
                    .map(|plane| rows(plane, n))
                    .collect(),
            ),
        ),
    };
    ModelDoc {
        format: FORMAT.to_owned(),
        format_version: FORMAT_VERSION,
        state_index_base: 0,
        order: model.order(),
        topology: mask.kind(),
        allowed: matches!(mask.kind(), TopologyKind::Explicit).then(|| {
            mask.allowed_matrix()
                .chunks(n)
                .map(<[bool]>::to_vec)
                .collect()
        }),
        n_states: n,
        emission: model
            .emission_spec()
            .expect("models have at least one state"),
        initial: model.initial().to_vec(),
        trans1,
        trans2,
        emissions: model.emissions().to_vec(),
        training: training.cloned(),
    }
}

pub fn to_string(model: &AnyModel, training: Option<&TrainingMeta>) -> String {
    to_precise_json(&to_doc(model, training)).expect("model documents serialize")
}

fn square(what: &'static str, table: Vec<Vec<f64>>, n: usize) -> Result<Vec<f64>> {
    if table.len() != n || table.iter().any(|r| r.len() != n) {
        return Err(Error::format(
            "model file",
            format!("{what} must be {n} x {n}"),
        ));
    }
    Ok(table.concat())
}

fn from_doc(doc: ModelDoc) -> Result<ModelFile> {
    if doc.format != FORMAT {
        return Err(Error::format(
            "model file",
            format!("unknown format {:?}", doc.format),
        ));
    }
    if doc.format_version != FORMAT_VERSION {
        return Err(Error::format(
            "model file",
            format!("unsupported version {}", doc.format_version),
        ));
    }
    if doc.state_index_base != 0 {
        return Err(Error::format(
            "model file",
            "only 0-based state indices are supported",
        ));
    }
    let n = doc.n_states;
    let mask = match (doc.topology, doc.allowed) {
        (TopologyKind::Explicit, Some(allowed)) => {
            if allowed.len() != n || allowed.iter().any(|r| r.len() != n) {
                return Err(Error::format(
                    "model file",
                    format!("allowed must be {n} x {n}"),
                ));
            }
            TopologyMask::explicit(n, allowed.concat())?
        }
        (TopologyKind::Explicit, None) => {
            return Err(Error::format(
                "model file",
                "explicit topology needs an allowed matrix",
            ))
        }
        (_, Some(_)) => {
            return Err(Error::format(
                "model file",
                "allowed matrix given for a built-in topology",
            ))
        }
        (kind, None) => TopologyMask::from_kind(kind, n)?,
    };
    let trans1 = square("trans1", doc.trans1, n)?;
    let model: AnyModel = match (doc.order, doc.trans2) {
        (ModelOrder::First, None) => {
            Hmm1Model::new(mask, doc.initial, trans1, doc.emissions)?.into()
        }
        (ModelOrder::Second, Some(tensor)) => {
            if tensor.len() != n {
                return Err(Error::format(
                    "model file",
                    format!("trans2 must have {n} planes"),
                ));
            }
            let mut flat = Vec::with_capacity(n * n * n);
            for plane in tensor {
                flat.extend(square("trans2 plane", plane, n)?);
            }
            Hmm2Model::new(mask, doc.initial, trans1, flat, doc.emissions)?.into()
        }
        (ModelOrder::First, Some(_)) => {
            return Err(Error::format("model file", "first-order model with trans2"))
        }
        (ModelOrder::Second, None) => {
            return Err(Error::format(
                "model file",
                "second-order model without trans2",
            ))
        }
    };
    if model.emission_spec() != Some(doc.emission) {
        return Err(Error::format(
            "model file",
            "emission header does not match the emission tables",
        ));
    }
    let issues = model.validate();
    if !issues.is_empty() {
        let text: Vec<String> = issues.iter().map(ToString::to_string).collect();
        return Err(Error::InvalidModel(text.join("; ")));
    }
    Ok(ModelFile {
        model,
        training: doc.training,
    })
}

/// Parses and validates a model document.
pub fn from_str(text: &str) -> Result<ModelFile> {
    from_doc(serde_json::from_str(text)?)
}

pub fn save(path: &Path, model: &AnyModel, training: Option<&TrainingMeta>) -> Result<()> {
    files::write_atomic(path, to_string(model, training).as_bytes())
}

pub fn load(path: &Path) -> Result<ModelFile> {
    let bytes = files::read(path)?;
    let text =
        std::str::from_utf8(&bytes).map_err(|e| Error::format("model file", e.to_string()))?;
    from_str(text)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::training::{init_circular2, init_ltr1};

    #[test]
    fn floats_keep_seventeen_digits() {
        let text = to_precise_json(&vec![0.1, 1.0 / 3.0, -2.5e-300]).unwrap();
        assert!(text.contains("1.0000000000000001e-1"));
        assert!(text.contains("3.3333333333333331e-1"));
        let back: Vec<f64> = serde_json::from_str(&text).unwrap();
        assert_eq!(back, vec![0.1, 1.0 / 3.0, -2.5e-300]);
    }

    #[test]
    fn roundtrip_both_orders() {
        let m1: AnyModel = init_ltr1(
            4,
            2,
            &EmissionSpec::Gmm {
                n_mixtures: 2,
                dim: 3,
            },
        )
        .unwrap()
        .into();
        let meta = TrainingMeta {
            iterations_run: 3,
            converged: true,
            final_log_likelihood: -123.456,
            log_likelihoods: vec![-200.0, -150.0, -123.5, -123.456],
            config_hash: "00ff".into(),
        };
        let back = from_str(&to_string(&m1, Some(&meta))).unwrap();
        assert_eq!(back.model, m1);
        assert_eq!(back.training, Some(meta));
        let m2: AnyModel = init_circular2(5, &EmissionSpec::Discrete { n_symbols: 4 })
            .unwrap()
            .into();
        let back = from_str(&to_string(&m2, None)).unwrap();
        assert_eq!(back.model, m2);
        assert_eq!(back.training, None);
    }

    #[test]
    fn invalid_models_are_rejected_on_load() {
        let m: AnyModel = init_ltr1(3, 1, &EmissionSpec::Discrete { n_symbols: 2 })
            .unwrap()
            .into();
        let text =
            to_string(&m, None).replacen("5.0000000000000000e-1", "4.0000000000000000e-1", 1);
        assert!(matches!(from_str(&text), Err(Error::InvalidModel(_))));
        let text = to_string(&m, None).replace("\"format_version\": 1", "\"format_version\": 9");
        assert!(matches!(from_str(&text), Err(Error::Format { .. })));
        assert!(from_str("{}").is_err());
    }
}
