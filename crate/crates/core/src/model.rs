//! First- and second-order model types and their structural validation.
//!
//! States are 0-based in code. Probability tables are stored row-major:
//! `trans[i * N + j]` is the probability of moving from state `i` to `j`,
//! and `trans2[(i * N + j) * N + k]` the probability of entering `k` given
//! the two previous states `i`, `j`.

use std::fmt;

use crate::emission::{Emission, EmissionSpec};
use crate::error::{Error, Result};
use crate::inference::{self, StatePath, TrellisLattice};
use crate::obs::Observations;
use crate::topology::TopologyMask;

/// Tolerance on probability sums used by [`Hmm1Model::validate`] and friends.
pub const SUM_TOLERANCE: f64 = 1e-9;

#[derive(
    Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, serde::Serialize, serde::Deserialize,
)]
pub enum ModelOrder {
    #[serde(rename = "1")]
    First,
    #[serde(rename = "2")]
    Second,
}

impl ModelOrder {
    pub fn as_u8(self) -> u8 {
        match self {
            ModelOrder::First => 1,
            ModelOrder::Second => 2,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Hmm1Model {
    mask: TopologyMask,
    initial: Vec<f64>,
    trans: Vec<f64>,
    emissions: Vec<Emission>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Hmm2Model {
    mask: TopologyMask,
    initial: Vec<f64>,
    trans1: Vec<f64>,
    trans2: Vec<f64>,
    emissions: Vec<Emission>,
}

fn check_len(what: &'static str, expected: usize, found: usize) -> Result<()> {
    if expected != found {
        return Err(Error::DimensionMismatch {
            what,
            expected,
            found,
        });
    }
    Ok(())
}

fn check_emissions(emissions: &[Emission]) -> Result<()> {
    let Some(first) = emissions.first() else {
        return Ok(());
    };
    let shape = |e: &Emission| match e {
        Emission::Gmm(g) => (0u8, g.n_components(), g.dim()),
        Emission::Discrete(d) => (1u8, d.n_symbols(), 0),
    };
    let reference = shape(first);
    for e in emissions {
        if shape(e) != reference {
            return Err(Error::InvalidDimension(
                "states disagree on emission family or size".into(),
            ));
        }
        if let Emission::Gmm(g) = e {
            if g.means.len() != g.n_components() || g.variances.len() != g.n_components() {
                return Err(Error::InvalidDimension(
                    "mixture component tables have different lengths".into(),
                ));
            }
            if g.means
                .iter()
                .chain(&g.variances)
                .any(|v| v.len() != g.dim())
            {
                return Err(Error::InvalidDimension(
                    "mixture components disagree on dimension".into(),
                ));
            }
        }
    }
    Ok(())
}

impl Hmm1Model {
    /// Checks shapes only; use [`Hmm1Model::validate`] for probability constraints.
    pub fn new(
        mask: TopologyMask,
        initial: Vec<f64>,
        trans: Vec<f64>,
        emissions: Vec<Emission>,
    ) -> Result<Self> {
        let n = mask.n_states();
        check_len("initial distribution", n, initial.len())?;
        check_len("transition matrix", n * n, trans.len())?;
        check_len("emission list", n, emissions.len())?;
        check_emissions(&emissions)?;
        Ok(Self {
            mask,
            initial,
            trans,
            emissions,
        })
    }

    pub fn n_states(&self) -> usize {
        self.mask.n_states()
    }

    pub fn mask(&self) -> &TopologyMask {
        &self.mask
    }

    pub fn initial(&self) -> &[f64] {
        &self.initial
    }

    #[inline]
    pub fn trans(&self, i: usize, j: usize) -> f64 {
        self.trans[i * self.n_states() + j]
    }

    pub fn trans_row(&self, i: usize) -> &[f64] {
        let n = self.n_states();
        &self.trans[i * n..(i + 1) * n]
    }

    pub fn trans_matrix(&self) -> &[f64] {
        &self.trans
    }

    pub fn emissions(&self) -> &[Emission] {
        &self.emissions
    }

    pub fn with_emissions(mut self, emissions: Vec<Emission>) -> Result<Self> {
        check_len("emission list", self.n_states(), emissions.len())?;
        check_emissions(&emissions)?;
        self.emissions = emissions;
        Ok(self)
    }

    pub fn validate(&self) -> Vec<ValidationIssue> {
        let n = self.n_states();
        let mut issues = Vec::new();
        check_distribution(&self.initial, &mut issues, |sum| {
            ValidationIssue::InitialSum { sum }
        });
        for i in 0..n {
            check_distribution(self.trans_row(i), &mut issues, |sum| {
                ValidationIssue::RowSum { row: i, sum }
            });
            for j in 0..n {
                let v = self.trans(i, j);
                if !self.mask.allows(i, j) && v != 0.0 {
                    issues.push(ValidationIssue::MaskViolation {
                        from: i,
                        to: j,
                        value: v,
                    });
                }
            }
        }
        check_emission_constraints(&self.emissions, &mut issues);
        issues
    }

    pub fn is_valid(&self) -> bool {
        self.validate().is_empty()
    }
}

impl Hmm2Model {
    pub fn new(
        mask: TopologyMask,
        initial: Vec<f64>,
        trans1: Vec<f64>,
        trans2: Vec<f64>,
        emissions: Vec<Emission>,
    ) -> Result<Self> {
        let n = mask.n_states();
        check_len("initial distribution", n, initial.len())?;
        check_len("first-order transition matrix", n * n, trans1.len())?;
        check_len("second-order transition tensor", n * n * n, trans2.len())?;
        check_len("emission list", n, emissions.len())?;
        check_emissions(&emissions)?;
        Ok(Self {
            mask,
            initial,
            trans1,
            trans2,
            emissions,
        })
    }

    pub fn n_states(&self) -> usize {
        self.mask.n_states()
    }

    pub fn mask(&self) -> &TopologyMask {
        &self.mask
    }

    pub fn initial(&self) -> &[f64] {
        &self.initial
    }

    #[inline]
    pub fn trans1(&self, i: usize, j: usize) -> f64 {
        self.trans1[i * self.n_states() + j]
    }

    #[inline]
    pub fn trans2(&self, i: usize, j: usize, k: usize) -> f64 {
        let n = self.n_states();
        self.trans2[(i * n + j) * n + k]
    }

    pub fn trans1_matrix(&self) -> &[f64] {
        &self.trans1
    }

    pub fn trans2_tensor(&self) -> &[f64] {
        &self.trans2
    }

    /// Distribution over `k` given previous states `(i, j)`.
    pub fn trans2_row(&self, i: usize, j: usize) -> &[f64] {
        let n = self.n_states();
        let start = (i * n + j) * n;
        &self.trans2[start..start + n]
    }

    pub fn emissions(&self) -> &[Emission] {
        &self.emissions
    }

    pub fn with_emissions(mut self, emissions: Vec<Emission>) -> Result<Self> {
        check_len("emission list", self.n_states(), emissions.len())?;
        check_emissions(&emissions)?;
        self.emissions = emissions;
        Ok(self)
    }

    pub fn validate(&self) -> Vec<ValidationIssue> {
        let n = self.n_states();
        let mut issues = Vec::new();
        check_distribution(&self.initial, &mut issues, |sum| {
            ValidationIssue::InitialSum { sum }
        });
        for i in 0..n {
            check_distribution(&self.trans1[i * n..(i + 1) * n], &mut issues, |sum| {
                ValidationIssue::RowSum { row: i, sum }
            });
            for j in 0..n {
                let v = self.trans1(i, j);
                if !self.mask.allows(i, j) && v != 0.0 {
                    issues.push(ValidationIssue::MaskViolation {
                        from: i,
                        to: j,
                        value: v,
                    });
                }
                if self.mask.allows(i, j) {
                    check_distribution(self.trans2_row(i, j), &mut issues, |sum| {
                        ValidationIssue::PairRowSum {
                            prev: i,
                            current: j,
                            sum,
                        }
                    });
                }
                for k in 0..n {
                    let v = self.trans2(i, j, k);
                    if !self.mask.allows2(i, j, k) && v != 0.0 {
                        issues.push(ValidationIssue::MaskViolation2 { i, j, k, value: v });
                    }
                }
            }
        }
        check_emission_constraints(&self.emissions, &mut issues);
        issues
    }

    pub fn is_valid(&self) -> bool {
        self.validate().is_empty()
    }

    /// Equivalent first-order model over `N + N^2` states.
    ///
    /// States `0..N` are entry states occupied only at the first frame; state
    /// `N + j * N + k` stands for the pair (previous `j`, current `k`) and
    /// emits with `b_k`. Entry `j` moves to pair `(j, k)` with `trans1[j][k]`,
    /// pair `(i, j)` moves to `(j, k)` with `trans2[i][j][k]`. Pairs that the
    /// source mask never reaches get a uniform row so the expansion stays
    /// row-stochastic.
    pub fn pair_state_embedding(&self) -> Hmm1Model {
        let n = self.n_states();
        let big = n + n * n;
        let pair = |j: usize, k: usize| n + j * n + k;
        let mut allowed = vec![false; big * big];
        let mut trans = vec![0.0; big * big];
        for j in 0..n {
            for &k in self.mask.successors(j) {
                allowed[j * big + pair(j, k)] = true;
                trans[j * big + pair(j, k)] = self.trans1(j, k);
            }
        }
        for i in 0..n {
            for j in 0..n {
                let from = pair(i, j);
                let succ = self.mask.successors(j);
                for &k in succ {
                    allowed[from * big + pair(j, k)] = true;
                    trans[from * big + pair(j, k)] = if self.mask.allows(i, j) {
                        self.trans2(i, j, k)
                    } else {
                        1.0 / succ.len() as f64
                    };
                }
            }
        }
        let mut initial = vec![0.0; big];
        initial[..n].copy_from_slice(&self.initial);
        let emissions = (0..big)
            .map(|s| {
                if s < n {
                    self.emissions[s].clone()
                } else {
                    self.emissions[(s - n) % n].clone()
                }
            })
            .collect();
        let mask = TopologyMask::explicit(big, allowed).expect("expansion has no dead rows");
        Hmm1Model {
            mask,
            initial,
            trans,
            emissions,
        }
    }
}

fn check_distribution(
    values: &[f64],
    issues: &mut Vec<ValidationIssue>,
    on_bad_sum: impl Fn(f64) -> ValidationIssue,
) {
    if let Some(v) = values.iter().find(|v| !v.is_finite() || **v < 0.0) {
        issues.push(ValidationIssue::InvalidProbability { value: *v });
    }
    let sum: f64 = values.iter().sum();
    if (sum - 1.0).abs() > SUM_TOLERANCE {
        issues.push(on_bad_sum(sum));
    }
}

fn check_emission_constraints(emissions: &[Emission], issues: &mut Vec<ValidationIssue>) {
    for (state, e) in emissions.iter().enumerate() {
        match e {
            Emission::Gmm(g) => {
                check_distribution(&g.weights, issues, |sum| {
                    ValidationIssue::MixtureWeightSum { state, sum }
                });
                for (component, vars) in g.variances.iter().enumerate() {
                    for (dim, &value) in vars.iter().enumerate() {
                        if !(value > 0.0 && value.is_finite()) {
                            issues.push(ValidationIssue::NonPositiveVariance {
                                state,
                                component,
                                dim,
                                value,
                            });
                        }
                    }
                }
                if g.means.iter().flatten().any(|m| !m.is_finite()) {
                    issues.push(ValidationIssue::NonFiniteMean { state });
                }
            }
            Emission::Discrete(d) => {
                check_distribution(&d.probs, issues, |sum| ValidationIssue::SymbolSum {
                    state,
                    sum,
                });
            }
        }
    }
}

/// One violated model constraint.
#[derive(Debug, Clone, PartialEq)]
pub enum ValidationIssue {
    InitialSum {
        sum: f64,
    },
    RowSum {
        row: usize,
        sum: f64,
    },
    PairRowSum {
        prev: usize,
        current: usize,
        sum: f64,
    },
    MaskViolation {
        from: usize,
        to: usize,
        value: f64,
    },
    MaskViolation2 {
        i: usize,
        j: usize,
        k: usize,
        value: f64,
    },
    MixtureWeightSum {
        state: usize,
        sum: f64,
    },
    SymbolSum {
        state: usize,
        sum: f64,
    },
    NonPositiveVariance {
        state: usize,
        component: usize,
        dim: usize,
        value: f64,
    },
    NonFiniteMean {
        state: usize,
    },
    InvalidProbability {
        value: f64,
    },
}

impl fmt::Display for ValidationIssue {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match *self {
            ValidationIssue::InitialSum { sum } => write!(
                f,
                "initial distribution sums to {sum} (deficit {})",
                1.0 - sum
            ),
            ValidationIssue::RowSum { row, sum } => {
                write!(
                    f,
                    "transition row {row} sums to {sum} (deficit {})",
                    1.0 - sum
                )
            }
            ValidationIssue::PairRowSum { prev, current, sum } => write!(
                f,
                "second-order row ({prev}, {current}) sums to {sum} (deficit {})",
                1.0 - sum
            ),
            ValidationIssue::MaskViolation { from, to, value } => {
                write!(f, "transition {from} -> {to} is forbidden by the topology but has probability {value}")
            }
            ValidationIssue::MaskViolation2 { i, j, k, value } => {
                write!(f, "transition ({i}, {j}) -> {k} is forbidden by the topology but has probability {value}")
            }
            ValidationIssue::MixtureWeightSum { state, sum } => {
                write!(f, "mixture weights of state {state} sum to {sum}")
            }
            ValidationIssue::SymbolSum { state, sum } => {
                write!(f, "symbol probabilities of state {state} sum to {sum}")
            }
            ValidationIssue::NonPositiveVariance {
                state,
                component,
                dim,
                value,
            } => write!(
                f,
                "state {state} component {component} dimension {dim} has variance {value}"
            ),
            ValidationIssue::NonFiniteMean { state } => {
                write!(f, "state {state} has a non-finite mixture mean")
            }
            ValidationIssue::InvalidProbability { value } => {
                write!(f, "probability entry {value} is negative or not finite")
            }
        }
    }
}

/// A trained model of either order.
#[derive(Debug, Clone, PartialEq)]
pub enum AnyModel {
    First(Hmm1Model),
    Second(Hmm2Model),
}

impl AnyModel {
    pub fn order(&self) -> ModelOrder {
        match self {
            AnyModel::First(_) => ModelOrder::First,
            AnyModel::Second(_) => ModelOrder::Second,
        }
    }

    pub fn n_states(&self) -> usize {
        self.mask().n_states()
    }

    pub fn mask(&self) -> &TopologyMask {
        match self {
            AnyModel::First(m) => m.mask(),
            AnyModel::Second(m) => m.mask(),
        }
    }

    pub fn initial(&self) -> &[f64] {
        match self {
            AnyModel::First(m) => m.initial(),
            AnyModel::Second(m) => m.initial(),
        }
    }

    pub fn emissions(&self) -> &[Emission] {
        match self {
            AnyModel::First(m) => m.emissions(),
            AnyModel::Second(m) => m.emissions(),
        }
    }

    pub fn emission_spec(&self) -> Option<EmissionSpec> {
        self.emissions().first().map(|e| match e {
            Emission::Gmm(g) => EmissionSpec::Gmm {
                n_mixtures: g.n_components(),
                dim: g.dim(),
            },
            Emission::Discrete(d) => EmissionSpec::Discrete {
                n_symbols: d.n_symbols(),
            },
        })
    }

    pub fn validate(&self) -> Vec<ValidationIssue> {
        match self {
            AnyModel::First(m) => m.validate(),
            AnyModel::Second(m) => m.validate(),
        }
    }

    pub fn forward(&self, obs: Observations<'_>) -> Result<TrellisLattice> {
        match self {
            AnyModel::First(m) => inference::forward1(m, obs),
            AnyModel::Second(m) => inference::forward2(m, obs),
        }
    }

    pub fn log_likelihood(&self, obs: Observations<'_>) -> Result<f64> {
        Ok(self.forward(obs)?.log_likelihood)
    }

    pub fn viterbi(&self, obs: Observations<'_>) -> Result<StatePath> {
        match self {
            AnyModel::First(m) => inference::viterbi1(m, obs),
            AnyModel::Second(m) => inference::viterbi2(m, obs),
        }
    }

    pub fn sequence_log_prob(&self, obs: Observations<'_>, states: &[usize]) -> Result<f64> {
        match self {
            AnyModel::First(m) => inference::sequence_log_prob1(m, obs, states),
            AnyModel::Second(m) => inference::sequence_log_prob2(m, obs, states),
        }
    }
}

impl From<Hmm1Model> for AnyModel {
    fn from(m: Hmm1Model) -> Self {
        AnyModel::First(m)
    }
}

impl From<Hmm2Model> for AnyModel {
    fn from(m: Hmm2Model) -> Self {
        AnyModel::Second(m)
    }
}
