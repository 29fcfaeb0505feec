//! Transition topologies.
//!
//! A [`TopologyMask`] records which first-order transitions `i -> j` a model
//! may use. Second-order triples `(i, j, k)` are allowed exactly when both
//! `i -> j` and `j -> k` are. Masks are built for two structures:
//!
//! * left-to-right: no backward transitions, forward jumps bounded by a skip
//!   width, the last state keeps its self-loop;
//! * circular: each state connects to itself and its two ring neighbours,
//!   so the allowed set is symmetric and there is no absorbing state.
//!
//! An explicit mask is also available for derived models (for instance the
//! pair-state expansion of a second-order chain).

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum TopologyKind {
    LeftToRight { skip_width: usize },
    Circular,
    Explicit,
}

impl TopologyKind {
    pub fn is_circular(&self) -> bool {
        matches!(self, TopologyKind::Circular)
    }

    pub fn is_left_to_right(&self) -> bool {
        matches!(self, TopologyKind::LeftToRight { .. })
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TopologyMask {
    n_states: usize,
    kind: TopologyKind,
    allowed: Vec<bool>,
    successors: Vec<Vec<usize>>,
    predecessors: Vec<Vec<usize>>,
}

impl TopologyMask {
    /// Left-to-right band: `i -> j` allowed iff `0 <= j - i <= skip_width`.
    pub fn left_to_right(n_states: usize, skip_width: usize) -> Result<Self> {
        if n_states == 0 {
            return Err(Error::InvalidDimension(
                "left-to-right topology needs at least one state".into(),
            ));
        }
        if skip_width == 0 {
            return Err(Error::InvalidDimension(
                "skip width must be at least 1 (self-loop plus next state)".into(),
            ));
        }
        let mut allowed = vec![false; n_states * n_states];
        for i in 0..n_states {
            for j in i..n_states.min(i + skip_width + 1) {
                allowed[i * n_states + j] = true;
            }
        }
        Ok(Self::build(
            n_states,
            TopologyKind::LeftToRight { skip_width },
            allowed,
        ))
    }

    /// Ring topology: `i -> j` allowed iff `j` is `i - 1`, `i` or `i + 1` modulo N.
    pub fn circular(n_states: usize) -> Result<Self> {
        if n_states < 3 {
            return Err(Error::InvalidDimension(format!(
                "circular topology needs at least 3 states, got {n_states}"
            )));
        }
        let mut allowed = vec![false; n_states * n_states];
        for i in 0..n_states {
            for j in [(i + n_states - 1) % n_states, i, (i + 1) % n_states] {
                allowed[i * n_states + j] = true;
            }
        }
        Ok(Self::build(n_states, TopologyKind::Circular, allowed))
    }

    /// Arbitrary mask given row-major. Every state needs at least one successor.
    pub fn explicit(n_states: usize, allowed: Vec<bool>) -> Result<Self> {
        if n_states == 0 {
            return Err(Error::InvalidDimension(
                "topology needs at least one state".into(),
            ));
        }
        if allowed.len() != n_states * n_states {
            return Err(Error::DimensionMismatch {
                what: "explicit mask entries",
                expected: n_states * n_states,
                found: allowed.len(),
            });
        }
        if let Some(row) =
            (0..n_states).find(|&i| !allowed[i * n_states..(i + 1) * n_states].iter().any(|&a| a))
        {
            return Err(Error::InvalidDimension(format!(
                "state {row} has no allowed successor"
            )));
        }
        Ok(Self::build(n_states, TopologyKind::Explicit, allowed))
    }

    /// Rebuild a structured mask from its kind. Explicit masks cannot be
    /// recovered this way.
    pub fn from_kind(kind: TopologyKind, n_states: usize) -> Result<Self> {
        match kind {
            TopologyKind::LeftToRight { skip_width } => Self::left_to_right(n_states, skip_width),
            TopologyKind::Circular => Self::circular(n_states),
            TopologyKind::Explicit => Err(Error::InvalidConfig(
                "explicit topology must be given with its mask".into(),
            )),
        }
    }

    fn build(n_states: usize, kind: TopologyKind, allowed: Vec<bool>) -> Self {
        let successors = (0..n_states)
            .map(|i| {
                (0..n_states)
                    .filter(|&j| allowed[i * n_states + j])
                    .collect()
            })
            .collect();
        let predecessors = (0..n_states)
            .map(|j| {
                (0..n_states)
                    .filter(|&i| allowed[i * n_states + j])
                    .collect()
            })
            .collect();
        Self {
            n_states,
            kind,
            allowed,
            successors,
            predecessors,
        }
    }

    pub fn n_states(&self) -> usize {
        self.n_states
    }

    pub fn kind(&self) -> TopologyKind {
        self.kind
    }

    #[inline]
    pub fn allows(&self, i: usize, j: usize) -> bool {
        self.allowed[i * self.n_states + j]
    }

    #[inline]
    pub fn allows2(&self, i: usize, j: usize, k: usize) -> bool {
        self.allows(i, j) && self.allows(j, k)
    }

    /// States reachable from `i` in one step, ascending.
    pub fn successors(&self, i: usize) -> &[usize] {
        &self.successors[i]
    }

    /// States that can move to `j` in one step, ascending.
    pub fn predecessors(&self, j: usize) -> &[usize] {
        &self.predecessors[j]
    }

    /// Number of allowed first-order transitions.
    pub fn allowed_count(&self) -> usize {
        self.allowed.iter().filter(|&&a| a).count()
    }

    /// Row-major N x N allowed matrix.
    pub fn allowed_matrix(&self) -> &[bool] {
        &self.allowed
    }

    pub fn is_symmetric(&self) -> bool {
        let n = self.n_states;
        (0..n).all(|i| (0..n).all(|j| self.allows(i, j) == self.allows(j, i)))
    }

    /// Terminal backward value used by the lattices: `1/N` on a ring, `1` otherwise.
    pub fn backward_terminal(&self) -> f64 {
        if self.kind.is_circular() {
            1.0 / self.n_states as f64
        } else {
            1.0
        }
    }
}
