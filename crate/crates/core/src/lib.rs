//! Hidden Markov models of first and second order over left-to-right and
//! circular topologies, with Gaussian-mixture or discrete emissions, an
//! LPC-cepstral speech frontend, and closed-set speaker identification.
//!
//! The crate is organized bottom-up:
//!
//! * [`topology`], [`emission`], [`model`]: model types and validation;
//! * [`inference`]: scaled forward/backward, likelihood and Viterbi;
//! * [`training`]: initialization, segmental k-means and Baum-Welch;
//! * [`features`]: pre-emphasis, framing, LPC and cepstra;
//! * [`speaker_id`]: enrollment, identification, evaluation and reports.

pub mod emission;
pub mod error;
pub mod features;
pub mod files;
pub mod inference;
pub mod model;
pub mod model_io;
pub mod obs;
pub mod speaker_id;
pub mod topology;
pub mod training;

pub use emission::{DiscreteDist, Emission, EmissionSpec, GaussianMixture};
pub use error::{Error, Result};
pub use model::{AnyModel, Hmm1Model, Hmm2Model, ModelOrder, ValidationIssue};
pub use obs::{Frames, Observations};
pub use topology::{TopologyKind, TopologyMask};
pub use training::{ModelSpec, TrainConfig, TrainReport};
