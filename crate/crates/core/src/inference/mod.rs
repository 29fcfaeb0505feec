//! Forward, backward and Viterbi recursions for both model orders.
//!
//! Forward and backward values are kept per frame in normalized form: every
//! forward slice sums to one and the log of its normalizer is recorded, so
//! `log P(O | model) = -sum(log_scales)`. The normalizer is computed in the
//! log domain, which keeps Gaussian-mixture densities of any magnitude
//! representable. Backward slices reuse the forward normalizers, so
//! `sum_i alpha_t(i) * beta_t(i)` equals the backward terminal value at
//! every frame.
//!
//! Second-order lattices index frames `t >= 1` by the state pair
//! `(q_{t-1}, q_t)` flattened as `j * N + k`; frame 0 holds single-state
//! values.
//!
//! Viterbi runs in the log domain. Ties go to the lowest state index, both
//! for the final state and for every back-pointer.

mod first;
mod second;

pub use first::{
    backward1, forward1, forward_backward1, sequence_log_prob1, transition_likelihood, viterbi1,
};
pub use second::{backward2, forward2, forward_backward2, sequence_log_prob2, viterbi2};

pub(crate) use first::{backward1_table, forward1_table};
pub(crate) use second::{backward2_table, forward2_table};

use crate::error::{Error, Result};
use crate::model::ModelOrder;

/// Normalized forward/backward tables for one observation sequence.
#[derive(Debug, Clone)]
pub struct TrellisLattice {
    pub order: ModelOrder,
    pub n_states: usize,
    /// One slice per frame; width `N`, or `N * N` for second-order frames `t >= 1`.
    pub alpha: Vec<Vec<f64>>,
    /// Same shapes as `alpha`; empty when only the forward pass was run.
    pub beta: Vec<Vec<f64>>,
    /// `ln c_t`, where `c_t` is the factor that normalized frame `t`.
    pub log_scales: Vec<f64>,
    pub log_likelihood: f64,
    /// Value the backward pass started from at the last frame.
    pub beta_terminal: f64,
}

impl TrellisLattice {
    pub fn n_frames(&self) -> usize {
        self.alpha.len()
    }

    pub fn has_backward(&self) -> bool {
        !self.beta.is_empty()
    }

    /// Per-frame state posteriors `gamma_t(i)`. Requires the backward pass.
    pub fn state_posteriors(&self) -> Vec<Vec<f64>> {
        assert!(self.has_backward(), "state posteriors need backward values");
        let n = self.n_states;
        self.alpha
            .iter()
            .zip(&self.beta)
            .map(|(a, b)| {
                let mut gamma = vec![0.0; n];
                for (idx, (x, y)) in a.iter().zip(b).enumerate() {
                    gamma[idx % n] += x * y;
                }
                let total: f64 = gamma.iter().sum();
                gamma.iter_mut().for_each(|g| *g /= total);
                gamma
            })
            .collect()
    }
}

/// Most likely state sequence with its joint log probability.
#[derive(Debug, Clone, PartialEq)]
pub struct StatePath {
    pub states: Vec<usize>,
    pub log_prob: f64,
}

/// Turns a slice of log-domain values into probabilities summing to one.
/// Returns the log of the normalizer, or `None` when every entry is `-inf`.
pub(crate) fn normalize_log_slice(values: &mut [f64]) -> Option<f64> {
    let max = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if max == f64::NEG_INFINITY || max.is_nan() {
        return None;
    }
    let mut sum = 0.0;
    for v in values.iter_mut() {
        *v = (*v - max).exp();
        sum += *v;
    }
    values.iter_mut().for_each(|v| *v /= sum);
    Some(max + sum.ln())
}

pub(crate) fn check_nonempty(n_frames: usize) -> Result<()> {
    if n_frames == 0 {
        return Err(Error::InvalidDimension(
            "observation sequence is empty".into(),
        ));
    }
    Ok(())
}

pub(crate) fn check_scales(n_frames: usize, log_scales: &[f64]) -> Result<()> {
    if log_scales.len() != n_frames {
        return Err(Error::DimensionMismatch {
            what: "scale factors",
            expected: n_frames,
            found: log_scales.len(),
        });
    }
    Ok(())
}

pub(crate) fn check_path(states: &[usize], n_frames: usize, n_states: usize) -> Result<()> {
    if states.len() != n_frames {
        return Err(Error::DimensionMismatch {
            what: "state sequence length",
            expected: n_frames,
            found: states.len(),
        });
    }
    if let Some(&s) = states.iter().find(|&&s| s >= n_states) {
        return Err(Error::IndexOutOfRange {
            index: s,
            valid: format!("states 0..{n_states}"),
        });
    }
    Ok(())
}

/// Index of the largest value, first one on ties.
pub(crate) fn argmax_first(values: &[f64]) -> usize {
    let mut best = 0;
    for (i, &v) in values.iter().enumerate().skip(1) {
        if v > values[best] {
            best = i;
        }
    }
    best
}
