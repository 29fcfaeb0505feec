//! Test-only model generators and independent oracles.
//!
//! Everything here works in plain probability space with its own density
//! code, so it shares no arithmetic with the library recursions it checks.

#![allow(dead_code)]

use chmm::{DiscreteDist, Emission, GaussianMixture, Hmm1Model, Hmm2Model, TopologyMask};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub type TestRng = ChaCha8Rng;

pub fn rng(seed: u64) -> TestRng {
    ChaCha8Rng::seed_from_u64(seed)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Topo {
    Ltr,
    Circular,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EmKind {
    Discrete { symbols: usize },
    Gmm { mixtures: usize, dim: usize },
}

/// Observation sequence owned by a test.
#[derive(Debug, Clone)]
pub enum OwnedObs {
    Symbols(Vec<usize>),
    Frames { data: Vec<f64>, dim: usize },
}

impl OwnedObs {
    pub fn view(&self) -> chmm::Observations<'_> {
        match self {
            OwnedObs::Symbols(s) => chmm::Observations::Symbols(s),
            OwnedObs::Frames { data, dim } => {
                chmm::Observations::Frames(chmm::Frames::new(data, *dim))
            }
        }
    }

    pub fn len(&self) -> usize {
        match self {
            OwnedObs::Symbols(s) => s.len(),
            OwnedObs::Frames { data, dim } => data.len() / dim,
        }
    }
}

pub fn mask(topo: Topo, n: usize) -> TopologyMask {
    match topo {
        Topo::Ltr => TopologyMask::left_to_right(n, 2).unwrap(),
        Topo::Circular => TopologyMask::circular(n).unwrap(),
    }
}

/// Random distribution over the `allowed` positions of a row of length `len`.
pub fn random_row(rng: &mut TestRng, len: usize, allowed: impl Fn(usize) -> bool) -> Vec<f64> {
    let mut row: Vec<f64> = (0..len)
        .map(|j| {
            if allowed(j) {
                rng.random_range(0.05..1.0)
            } else {
                0.0
            }
        })
        .collect();
    let total: f64 = row.iter().sum();
    row.iter_mut().for_each(|v| *v /= total);
    row
}

pub fn random_emissions(rng: &mut TestRng, n: usize, kind: EmKind) -> Vec<Emission> {
    (0..n)
        .map(|_| match kind {
            EmKind::Discrete { symbols } => Emission::Discrete(DiscreteDist {
                probs: random_row(rng, symbols, |_| true),
            }),
            EmKind::Gmm { mixtures, dim } => Emission::Gmm(GaussianMixture {
                weights: random_row(rng, mixtures, |_| true),
                means: (0..mixtures)
                    .map(|_| (0..dim).map(|_| rng.random_range(-1.5..1.5)).collect())
                    .collect(),
                variances: (0..mixtures)
                    .map(|_| (0..dim).map(|_| rng.random_range(0.3..1.5)).collect())
                    .collect(),
            }),
        })
        .collect()
}

fn random_initial(rng: &mut TestRng, topo: Topo, n: usize) -> Vec<f64> {
    match topo {
        Topo::Ltr => {
            let mut v = vec![0.0; n];
            v[0] = 1.0;
            v
        }
        Topo::Circular => random_row(rng, n, |_| true),
    }
}

pub fn random_hmm1(rng: &mut TestRng, topo: Topo, n: usize, kind: EmKind) -> Hmm1Model {
    let mask = mask(topo, n);
    let initial = random_initial(rng, topo, n);
    let mut trans = Vec::with_capacity(n * n);
    for i in 0..n {
        trans.extend(random_row(rng, n, |j| mask.allows(i, j)));
    }
    let emissions = random_emissions(rng, n, kind);
    Hmm1Model::new(mask, initial, trans, emissions).unwrap()
}

pub fn random_hmm2(rng: &mut TestRng, topo: Topo, n: usize, kind: EmKind) -> Hmm2Model {
    let mask = mask(topo, n);
    let initial = random_initial(rng, topo, n);
    let mut trans1 = Vec::with_capacity(n * n);
    for i in 0..n {
        trans1.extend(random_row(rng, n, |j| mask.allows(i, j)));
    }
    let mut trans2 = Vec::with_capacity(n * n * n);
    for i in 0..n {
        for j in 0..n {
            if mask.allows(i, j) {
                trans2.extend(random_row(rng, n, |k| mask.allows(j, k)));
            } else {
                trans2.extend(std::iter::repeat_n(0.0, n));
            }
        }
    }
    let emissions = random_emissions(rng, n, kind);
    Hmm2Model::new(mask, initial, trans1, trans2, emissions).unwrap()
}

pub fn random_obs(rng: &mut TestRng, kind: EmKind, len: usize) -> OwnedObs {
    match kind {
        EmKind::Discrete { symbols } => {
            OwnedObs::Symbols((0..len).map(|_| rng.random_range(0..symbols)).collect())
        }
        EmKind::Gmm { dim, .. } => OwnedObs::Frames {
            data: (0..len * dim)
                .map(|_| rng.random_range(-2.0..2.0))
                .collect(),
            dim,
        },
    }
}

// ---------------------------------------------------------------------------
// Oracles
// ---------------------------------------------------------------------------

/// Emission probability computed directly from the parameters.
pub fn emission_prob(e: &Emission, obs: &OwnedObs, t: usize) -> f64 {
    match (e, obs) {
        (Emission::Discrete(d), OwnedObs::Symbols(s)) => d.probs[s[t]],
        (Emission::Gmm(g), OwnedObs::Frames { data, dim }) => {
            let x = &data[t * dim..(t + 1) * dim];
            (0..g.weights.len())
                .map(|m| {
                    let mut p = g.weights[m];
                    for d in 0..*dim {
                        let var = g.variances[m][d];
                        let diff = x[d] - g.means[m][d];
                        p *= (-diff * diff / (2.0 * var)).exp()
                            / (2.0 * std::f64::consts::PI * var).sqrt();
                    }
                    p
                })
                .sum()
        }
        _ => panic!("emission/observation mismatch"),
    }
}

/// Every state sequence of length `len` over `n` states, in lexicographic order.
pub fn all_sequences(n: usize, len: usize) -> impl Iterator<Item = Vec<usize>> {
    let total = n.pow(len as u32);
    (0..total).map(move |mut code| {
        let mut seq = vec![0; len];
        for t in (0..len).rev() {
            seq[t] = code % n;
            code /= n;
        }
        seq
    })
}

/// Joint probability of a path and observations under a first-order model.
pub fn joint1(model: &Hmm1Model, obs: &OwnedObs, q: &[usize]) -> f64 {
    let mut p = model.initial()[q[0]] * emission_prob(&model.emissions()[q[0]], obs, 0);
    for t in 1..q.len() {
        p *= model.trans(q[t - 1], q[t]) * emission_prob(&model.emissions()[q[t]], obs, t);
    }
    p
}

/// Joint probability of a path and observations under a second-order model.
pub fn joint2(model: &Hmm2Model, obs: &OwnedObs, q: &[usize]) -> f64 {
    let mut p = model.initial()[q[0]] * emission_prob(&model.emissions()[q[0]], obs, 0);
    if q.len() > 1 {
        p *= model.trans1(q[0], q[1]) * emission_prob(&model.emissions()[q[1]], obs, 1);
    }
    for t in 2..q.len() {
        p *= model.trans2(q[t - 2], q[t - 1], q[t])
            * emission_prob(&model.emissions()[q[t]], obs, t);
    }
    p
}

/// Total probability and the best path (first in lexicographic order on ties).
pub fn enumerate(n: usize, len: usize, joint: impl Fn(&[usize]) -> f64) -> (f64, Vec<usize>, f64) {
    let mut total = 0.0;
    let mut best = (f64::NEG_INFINITY, Vec::new());
    for q in all_sequences(n, len) {
        let p = joint(&q);
        total += p;
        if p > best.0 {
            best = (p, q);
        }
    }
    (total, best.1, best.0)
}

/// Unscaled forward table, `alpha[t][i]`.
pub fn unscaled_forward1(model: &Hmm1Model, obs: &OwnedObs) -> Vec<Vec<f64>> {
    let n = model.n_states();
    let b = |t: usize, j: usize| emission_prob(&model.emissions()[j], obs, t);
    let mut alpha = vec![(0..n)
        .map(|i| model.initial()[i] * b(0, i))
        .collect::<Vec<_>>()];
    for t in 1..obs.len() {
        let prev = &alpha[t - 1];
        let next = (0..n)
            .map(|j| (0..n).map(|i| prev[i] * model.trans(i, j)).sum::<f64>() * b(t, j))
            .collect();
        alpha.push(next);
    }
    alpha
}

/// Unscaled backward table with terminal value `terminal`.
pub fn unscaled_backward1(model: &Hmm1Model, obs: &OwnedObs, terminal: f64) -> Vec<Vec<f64>> {
    let n = model.n_states();
    let len = obs.len();
    let b = |t: usize, j: usize| emission_prob(&model.emissions()[j], obs, t);
    let mut beta = vec![vec![terminal; n]; len];
    for t in (0..len - 1).rev() {
        beta[t] = (0..n)
            .map(|i| {
                (0..n)
                    .map(|j| model.trans(i, j) * b(t + 1, j) * beta[t + 1][j])
                    .sum()
            })
            .collect();
    }
    beta
}

/// Unscaled pair-indexed forward table: frame 0 has width N, later frames N^2.
pub fn unscaled_forward2(model: &Hmm2Model, obs: &OwnedObs) -> Vec<Vec<f64>> {
    let n = model.n_states();
    let b = |t: usize, j: usize| emission_prob(&model.emissions()[j], obs, t);
    let mut alpha = vec![(0..n)
        .map(|i| model.initial()[i] * b(0, i))
        .collect::<Vec<_>>()];
    for t in 1..obs.len() {
        let prev = &alpha[t - 1];
        let mut next = vec![0.0; n * n];
        for j in 0..n {
            for k in 0..n {
                let pred = if t == 1 {
                    prev[j] * model.trans1(j, k)
                } else {
                    (0..n)
                        .map(|i| prev[i * n + j] * model.trans2(i, j, k))
                        .sum()
                };
                next[j * n + k] = pred * b(t, k);
            }
        }
        alpha.push(next);
    }
    alpha
}

pub fn unscaled_backward2(model: &Hmm2Model, obs: &OwnedObs, terminal: f64) -> Vec<Vec<f64>> {
    let n = model.n_states();
    let len = obs.len();
    let b = |t: usize, j: usize| emission_prob(&model.emissions()[j], obs, t);
    let mut beta = vec![Vec::new(); len];
    beta[len - 1] = vec![terminal; if len == 1 { n } else { n * n }];
    for t in (0..len - 1).rev() {
        beta[t] = if t == 0 {
            (0..n)
                .map(|j| {
                    (0..n)
                        .map(|k| model.trans1(j, k) * b(1, k) * beta[1][j * n + k])
                        .sum()
                })
                .collect()
        } else {
            let mut s = vec![0.0; n * n];
            for i in 0..n {
                for j in 0..n {
                    s[i * n + j] = (0..n)
                        .map(|k| model.trans2(i, j, k) * b(t + 1, k) * beta[t + 1][j * n + k])
                        .sum();
                }
            }
            s
        };
    }
    beta
}

pub fn rel_close(a: f64, b: f64, tol: f64) -> bool {
    (a - b).abs() <= tol * a.abs().max(b.abs())
}
