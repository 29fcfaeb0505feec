//! Parameter initialization and Baum-Welch training.
//!
//! Training a variant runs three stages: a structural initialization
//! (uniform over the transitions the topology allows), segmental k-means
//! for Gaussian-mixture emissions, then Baum-Welch reestimation until the
//! relative log-likelihood improvement drops below the tolerance.
//!
//! All constrained updates (rows with a floor, mixture weights, variances)
//! are exact maximizers of the EM auxiliary function over the floored
//! feasible set, so the training log-likelihood never decreases.

mod baum_welch;
mod kmeans;

pub use baum_welch::{baum_welch1, baum_welch2};
pub use kmeans::{segment_bounds, segmental_kmeans_init, variance_floors};

use serde::{Deserialize, Serialize};

use crate::emission::{Emission, EmissionSpec};
use crate::error::{Error, Result};
use crate::model::{AnyModel, Hmm1Model, Hmm2Model, ModelOrder};
use crate::obs::{Frames, Observations};
use crate::topology::{TopologyKind, TopologyMask};

/// Lower bounds applied by the reestimation formulas.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Floors {
    /// Relative to the per-dimension variance of the pooled training frames.
    pub variance: f64,
    /// Mixture weights, and symbol probabilities of discrete emissions.
    pub mixture_weight: f64,
    /// Transitions the topology allows.
    pub transition: f64,
}

impl Default for Floors {
    fn default() -> Self {
        Self {
            variance: 1e-4,
            mixture_weight: 1e-6,
            transition: 1e-8,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainConfig {
    pub max_iterations: usize,
    /// Stop once `|dLL| / |LL|` falls below this.
    pub rel_tol: f64,
    pub floors: Floors,
    /// Seed for k-means initialization.
    pub seed: u64,
    /// Average circular transition matrices with their transpose after training.
    pub symmetrize: bool,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            max_iterations: 100,
            rel_tol: 1e-6,
            floors: Floors::default(),
            seed: 0,
            symmetrize: false,
        }
    }
}

impl TrainConfig {
    pub fn check(&self) -> Result<()> {
        let f = &self.floors;
        if self.max_iterations == 0 {
            return Err(Error::InvalidConfig(
                "max_iterations must be at least 1".into(),
            ));
        }
        if !(self.rel_tol > 0.0) {
            return Err(Error::InvalidConfig("rel_tol must be positive".into()));
        }
        if !(f.variance > 0.0 && f.mixture_weight > 0.0 && f.transition > 0.0) {
            return Err(Error::InvalidConfig("all floors must be positive".into()));
        }
        Ok(())
    }
}

/// Outcome of a training run.
#[derive(Debug, Clone)]
pub struct TrainReport<M> {
    /// Total log-likelihood over the training set: entry `k` is measured
    /// after `k` reestimation steps (entry 0 is the starting model).
    pub log_likelihoods: Vec<f64>,
    pub iterations_run: usize,
    pub converged: bool,
    pub model: M,
}

impl<M> TrainReport<M> {
    pub fn final_log_likelihood(&self) -> f64 {
        *self
            .log_likelihoods
            .last()
            .expect("at least the initial likelihood is recorded")
    }

    pub fn map_model<N>(self, f: impl FnOnce(M) -> N) -> TrainReport<N> {
        TrainReport {
            log_likelihoods: self.log_likelihoods,
            iterations_run: self.iterations_run,
            converged: self.converged,
            model: f(self.model),
        }
    }

    pub fn summary(&self) -> TrainSummary {
        TrainSummary {
            iterations_run: self.iterations_run,
            converged: self.converged,
            final_log_likelihood: self.final_log_likelihood(),
            log_likelihoods: self.log_likelihoods.clone(),
        }
    }
}

/// The model-free part of a [`TrainReport`], for persistence.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainSummary {
    pub iterations_run: usize,
    pub converged: bool,
    pub final_log_likelihood: f64,
    pub log_likelihoods: Vec<f64>,
}

/// Everything needed to build and train one model variant.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ModelSpec {
    pub order: ModelOrder,
    pub topology: TopologyKind,
    pub n_states: usize,
    pub emission: EmissionSpec,
}

// ---------------------------------------------------------------------------
// Initialization
// ---------------------------------------------------------------------------

fn placeholders(n: usize, spec: &EmissionSpec) -> Result<Vec<Emission>> {
    spec.check()?;
    Ok(vec![spec.placeholder(); n])
}

/// Uniform over allowed successors, row-major `N x N`.
fn uniform_rows(mask: &TopologyMask) -> Vec<f64> {
    let n = mask.n_states();
    let mut trans = vec![0.0; n * n];
    for i in 0..n {
        let succ = mask.successors(i);
        for &j in succ {
            trans[i * n + j] = 1.0 / succ.len() as f64;
        }
    }
    trans
}

/// Uniform over allowed `k` for every allowed pair `(i, j)`.
fn uniform_tensor(mask: &TopologyMask) -> Vec<f64> {
    let n = mask.n_states();
    let mut trans2 = vec![0.0; n * n * n];
    for i in 0..n {
        for &j in mask.successors(i) {
            let succ = mask.successors(j);
            for &k in succ {
                trans2[(i * n + j) * n + k] = 1.0 / succ.len() as f64;
            }
        }
    }
    trans2
}

fn ltr_initial(n: usize) -> Vec<f64> {
    let mut initial = vec![0.0; n];
    initial[0] = 1.0;
    initial
}

/// Ring model: start uniformly, move to self or a ring neighbour with 1/3 each.
/// Gaussian-mixture emissions are placeholders until k-means runs.
pub fn init_circular1(n_states: usize, emission: &EmissionSpec) -> Result<Hmm1Model> {
    let mask = TopologyMask::circular(n_states)?;
    let trans = uniform_rows(&mask);
    Hmm1Model::new(
        mask,
        vec![1.0 / n_states as f64; n_states],
        trans,
        placeholders(n_states, emission)?,
    )
}

pub fn init_circular2(n_states: usize, emission: &EmissionSpec) -> Result<Hmm2Model> {
    let mask = TopologyMask::circular(n_states)?;
    let trans1 = uniform_rows(&mask);
    let trans2 = uniform_tensor(&mask);
    Hmm2Model::new(
        mask,
        vec![1.0 / n_states as f64; n_states],
        trans1,
        trans2,
        placeholders(n_states, emission)?,
    )
}

/// Left-to-right model that always starts in the first state.
pub fn init_ltr1(n_states: usize, skip_width: usize, emission: &EmissionSpec) -> Result<Hmm1Model> {
    let mask = TopologyMask::left_to_right(n_states, skip_width)?;
    let trans = uniform_rows(&mask);
    Hmm1Model::new(
        mask,
        ltr_initial(n_states),
        trans,
        placeholders(n_states, emission)?,
    )
}

pub fn init_ltr2(n_states: usize, skip_width: usize, emission: &EmissionSpec) -> Result<Hmm2Model> {
    let mask = TopologyMask::left_to_right(n_states, skip_width)?;
    let trans1 = uniform_rows(&mask);
    let trans2 = uniform_tensor(&mask);
    Hmm2Model::new(
        mask,
        ltr_initial(n_states),
        trans1,
        trans2,
        placeholders(n_states, emission)?,
    )
}

/// Structural initialization for a spec, before any data is seen.
pub fn init_model(spec: &ModelSpec) -> Result<AnyModel> {
    let n = spec.n_states;
    Ok(match (spec.order, spec.topology) {
        (ModelOrder::First, TopologyKind::Circular) => init_circular1(n, &spec.emission)?.into(),
        (ModelOrder::Second, TopologyKind::Circular) => init_circular2(n, &spec.emission)?.into(),
        (ModelOrder::First, TopologyKind::LeftToRight { skip_width }) => {
            init_ltr1(n, skip_width, &spec.emission)?.into()
        }
        (ModelOrder::Second, TopologyKind::LeftToRight { skip_width }) => {
            init_ltr2(n, skip_width, &spec.emission)?.into()
        }
        (_, TopologyKind::Explicit) => {
            return Err(Error::InvalidConfig(
                "training needs a left-to-right or circular topology".into(),
            ))
        }
    })
}

/// Initialize, seed mixtures by segmental k-means, then run Baum-Welch.
pub fn train(
    spec: &ModelSpec,
    obs_set: &[Observations<'_>],
    config: &TrainConfig,
) -> Result<TrainReport<AnyModel>> {
    config.check()?;
    if obs_set.is_empty() {
        return Err(Error::EmptyTrainingSet);
    }
    let mut model = init_model(spec)?;
    if let EmissionSpec::Gmm { n_mixtures, .. } = spec.emission {
        let frames: Vec<Frames<'_>> = obs_set
            .iter()
            .map(|o| match o {
                Observations::Frames(f) => Ok(*f),
                Observations::Symbols(_) => Err(Error::EmissionMismatch(
                    "Gaussian-mixture training needs feature vectors".into(),
                )),
            })
            .collect::<Result<_>>()?;
        let mixtures = segmental_kmeans_init(&frames, spec.n_states, n_mixtures, config)?;
        let emissions: Vec<Emission> = mixtures.into_iter().map(Emission::Gmm).collect();
        model = match model {
            AnyModel::First(m) => m.with_emissions(emissions)?.into(),
            AnyModel::Second(m) => m.with_emissions(emissions)?.into(),
        };
    }
    let report = match model {
        AnyModel::First(m) => baum_welch1(m, obs_set, config)?.map_model(|m| {
            if config.symmetrize && m.mask().kind().is_circular() {
                symmetrize_transitions(&m)
            } else {
                m
            }
            .into()
        }),
        AnyModel::Second(m) => baum_welch2(m, obs_set, config)?.map_model(Into::into),
    };
    Ok(report)
}

/// Projects a ring transition matrix toward symmetry: `(A + A^T) / 2`, then
/// rows renormalized. The result is row-stochastic but only approximately
/// symmetric.
pub fn symmetrize_transitions(model: &Hmm1Model) -> Hmm1Model {
    let n = model.n_states();
    let mut trans = vec![0.0; n * n];
    for i in 0..n {
        for j in 0..n {
            trans[i * n + j] = 0.5 * (model.trans(i, j) + model.trans(j, i));
        }
        let total: f64 = trans[i * n..(i + 1) * n].iter().sum();
        trans[i * n..(i + 1) * n]
            .iter_mut()
            .for_each(|v| *v /= total);
    }
    Hmm1Model::new(
        model.mask().clone(),
        model.initial().to_vec(),
        trans,
        model.emissions().to_vec(),
    )
    .expect("shapes unchanged")
}

/// Maximizes `sum_k counts[k] * ln p[k]` over distributions with
/// `p[k] >= floor` on allowed entries and `p[k] = 0` elsewhere.
///
/// Entries whose unconstrained optimum would fall below the floor are pinned
/// to it and the remaining mass is shared in proportion to the counts.
/// Callers must ensure `floor * allowed_count <= 1`.
pub(crate) fn floored_normalize(
    counts: &[f64],
    allowed: impl Fn(usize) -> bool,
    floor: f64,
) -> Vec<f64> {
    let free_init: Vec<usize> = (0..counts.len()).filter(|&k| allowed(k)).collect();
    let mut pinned = vec![false; counts.len()];
    let mut out = vec![0.0; counts.len()];
    loop {
        let free: Vec<usize> = free_init.iter().copied().filter(|&k| !pinned[k]).collect();
        let n_pinned = free_init.len() - free.len();
        let mass = 1.0 - floor * n_pinned as f64;
        let total: f64 = free.iter().map(|&k| counts[k]).sum();
        for &k in &free {
            out[k] = if total > 0.0 {
                mass * (counts[k] / total)
            } else {
                mass / free.len() as f64
            };
        }
        let violators: Vec<usize> = free.iter().copied().filter(|&k| out[k] < floor).collect();
        if violators.is_empty() || violators.len() == free.len() {
            for &k in &violators {
                out[k] = floor;
            }
            break;
        }
        for k in violators {
            pinned[k] = true;
            out[k] = floor;
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn circular_init_values() {
        let m = init_circular1(5, &EmissionSpec::Discrete { n_symbols: 5 }).unwrap();
        assert_eq!(m.initial(), &[0.2; 5]);
        // 1-based row 3 -> columns {2, 3, 4}
        let third = 1.0 / 3.0;
        assert_eq!(m.trans_row(2), &[0.0, third, third, third, 0.0]);
        for e in m.emissions() {
            assert_eq!(e.as_discrete().unwrap().probs, vec![0.2; 5]);
        }
        assert!(m.is_valid());
        assert!(init_circular1(2, &EmissionSpec::Discrete { n_symbols: 5 }).is_err());
    }

    #[test]
    fn circular2_init_values() {
        let m = init_circular2(5, &EmissionSpec::Discrete { n_symbols: 5 }).unwrap();
        assert!(m.is_valid());
        // 1-based (2, 3): three equal successors
        let row = m.trans2_row(1, 2);
        assert!((row.iter().sum::<f64>() - 1.0).abs() < 1e-15);
        assert_eq!(row.iter().filter(|&&v| v == 1.0 / 3.0).count(), 3);
        // 1-based (1, 3) is not a ring step
        assert!(m.trans2_row(0, 2).iter().all(|&v| v == 0.0));
        for e in m.emissions() {
            assert_eq!(e.as_discrete().unwrap().probs, vec![0.2; 5]);
        }
        assert_eq!(m.mask().backward_terminal(), 0.2);
        assert!(init_circular2(2, &EmissionSpec::Discrete { n_symbols: 5 }).is_err());
    }

    #[test]
    fn ltr_init_values() {
        let spec = EmissionSpec::Gmm {
            n_mixtures: 5,
            dim: 12,
        };
        let m = init_ltr1(5, 2, &spec).unwrap();
        assert_eq!(m.initial(), &[1.0, 0.0, 0.0, 0.0, 0.0]);
        let third = 1.0 / 3.0;
        assert_eq!(m.trans_row(0), &[third, third, third, 0.0, 0.0]);
        assert_eq!(m.trans_row(4), &[0.0, 0.0, 0.0, 0.0, 1.0]);
        assert!(m.is_valid());
        let single = init_ltr1(1, 1, &spec).unwrap();
        assert_eq!(single.trans_matrix(), &[1.0]);
        let m2 = init_ltr2(5, 2, &spec).unwrap();
        assert!(m2.is_valid(), "{:?}", m2.validate());
    }

    #[test]
    fn floored_normalize_matches_plain_when_inactive() {
        let p = floored_normalize(&[1.0, 3.0, 0.0, 4.0], |k| k != 2, 1e-8);
        assert_eq!(p, vec![0.125, 0.375, 0.0, 0.5]);
    }

    #[test]
    fn floored_normalize_pins_small_entries() {
        let p = floored_normalize(&[1e-12, 1.0, 1.0], |_| true, 0.01);
        assert_eq!(p[0], 0.01);
        assert!((p[1] - 0.495).abs() < 1e-15);
        assert!((p.iter().sum::<f64>() - 1.0).abs() < 1e-15);
    }

    #[test]
    fn floored_normalize_cascades() {
        // pinning the first entry pushes the second below the floor as well
        let p = floored_normalize(&[0.0, 0.105, 0.895], |_| true, 0.1);
        assert_eq!(p[0], 0.1);
        assert_eq!(p[1], 0.1);
        assert!((p[2] - 0.8).abs() < 1e-15);
    }

    #[test]
    fn floored_normalize_subnormal_counts() {
        let p = floored_normalize(&[7.633e-321, 0.0, 0.0], |_| true, 1e-8);
        assert!((p.iter().sum::<f64>() - 1.0).abs() < 1e-15);
    }

    #[test]
    fn config_rejects_zero_floor() {
        let mut c = TrainConfig::default();
        assert!(c.check().is_ok());
        c.floors.transition = 0.0;
        assert!(c.check().is_err());
    }
}
