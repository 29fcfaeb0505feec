//! Baum-Welch reestimation for first- and second-order models.

use rayon::prelude::*;

use super::{floored_normalize, variance_floors, TrainConfig, TrainReport};
use crate::emission::{log_sum_exp, DiscreteDist, Emission, EmissionTable, GaussianMixture};
use crate::error::{Error, Result};
use crate::inference::{backward1_table, backward2_table, forward1_table, forward2_table};
use crate::model::{Hmm1Model, Hmm2Model};
use crate::obs::{Frames, Observations};
use crate::topology::TopologyMask;

/// Expected counts from one utterance, already divided by `P(O | model)`.
struct UttStats {
    log_likelihood: f64,
    /// `gamma_0(i)`.
    first: Vec<f64>,
    /// `gamma_t(i)`, row-major `T x N`.
    gamma: Vec<f64>,
    /// First-order transition counts `N x N`; for second-order models only
    /// the transition out of frame 0.
    trans: Vec<f64>,
    /// Second-order counts `N^3`; empty for first-order models.
    trans2: Vec<f64>,
}

fn locate(err: Error, utterance: usize) -> Error {
    match err {
        Error::ImpossibleObservation { t } => Error::Training {
            utterance,
            frame: t,
        },
        other => other,
    }
}

fn e_step1(model: &Hmm1Model, obs: Observations<'_>, utterance: usize) -> Result<UttStats> {
    let n = model.n_states();
    let mask = model.mask();
    let table = EmissionTable::compute(model.emissions(), obs)?;
    let lattice = forward1_table(model, &table).map_err(|e| locate(e, utterance))?;
    let beta = backward1_table(model, &table, &lattice.log_scales)?;
    let alpha = &lattice.alpha;
    let n_frames = alpha.len();
    let norm = 1.0 / lattice.beta_terminal;

    let mut gamma = vec![0.0; n_frames * n];
    for t in 0..n_frames {
        for i in 0..n {
            gamma[t * n + i] = alpha[t][i] * beta[t][i] * norm;
        }
    }
    let mut trans = vec![0.0; n * n];
    let mut weighted = vec![0.0; n];
    for t in 0..n_frames.saturating_sub(1) {
        for j in 0..n {
            weighted[j] =
                (table.get(t + 1, j) + lattice.log_scales[t + 1]).exp() * beta[t + 1][j] * norm;
        }
        for i in 0..n {
            let a = alpha[t][i];
            if a == 0.0 {
                continue;
            }
            for &j in mask.successors(i) {
                trans[i * n + j] += a * model.trans(i, j) * weighted[j];
            }
        }
    }
    Ok(UttStats {
        log_likelihood: lattice.log_likelihood,
        first: gamma[..n].to_vec(),
        gamma,
        trans,
        trans2: Vec::new(),
    })
}

fn e_step2(model: &Hmm2Model, obs: Observations<'_>, utterance: usize) -> Result<UttStats> {
    let n = model.n_states();
    let mask = model.mask();
    let table = EmissionTable::compute(model.emissions(), obs)?;
    let lattice = forward2_table(model, &table).map_err(|e| locate(e, utterance))?;
    let beta = backward2_table(model, &table, &lattice.log_scales)?;
    let alpha = &lattice.alpha;
    let n_frames = alpha.len();
    let norm = 1.0 / lattice.beta_terminal;

    let mut gamma = vec![0.0; n_frames * n];
    for i in 0..n {
        gamma[i] = alpha[0][i] * beta[0][i] * norm;
    }
    for t in 1..n_frames {
        for j in 0..n {
            for k in 0..n {
                gamma[t * n + k] += alpha[t][j * n + k] * beta[t][j * n + k] * norm;
            }
        }
    }

    let mut weighted = vec![0.0; n * n];
    let fill_weighted = |t: usize, weighted: &mut Vec<f64>| {
        for j in 0..n {
            for k in 0..n {
                weighted[j * n + k] =
                    (table.get(t, k) + lattice.log_scales[t]).exp() * beta[t][j * n + k] * norm;
            }
        }
    };

    let mut trans = vec![0.0; n * n];
    fill_weighted(1, &mut weighted);
    for j in 0..n {
        for &k in mask.successors(j) {
            trans[j * n + k] = alpha[0][j] * model.trans1(j, k) * weighted[j * n + k];
        }
    }

    let mut trans2 = vec![0.0; n * n * n];
    for t in 1..n_frames - 1 {
        fill_weighted(t + 1, &mut weighted);
        for i in 0..n {
            for &j in mask.successors(i) {
                let a = alpha[t][i * n + j];
                if a == 0.0 {
                    continue;
                }
                for &k in mask.successors(j) {
                    trans2[(i * n + j) * n + k] += a * model.trans2(i, j, k) * weighted[j * n + k];
                }
            }
        }
    }
    Ok(UttStats {
        log_likelihood: lattice.log_likelihood,
        first: gamma[..n].to_vec(),
        gamma,
        trans,
        trans2,
    })
}

/// Serial, in-order reduction of per-utterance counts.
struct Totals {
    log_likelihood: f64,
    first: Vec<f64>,
    trans: Vec<f64>,
    trans2: Vec<f64>,
}

fn reduce(stats: &[UttStats]) -> Totals {
    let mut totals = Totals {
        log_likelihood: 0.0,
        first: vec![0.0; stats[0].first.len()],
        trans: vec![0.0; stats[0].trans.len()],
        trans2: vec![0.0; stats[0].trans2.len()],
    };
    for s in stats {
        totals.log_likelihood += s.log_likelihood;
        add_into(&mut totals.first, &s.first);
        add_into(&mut totals.trans, &s.trans);
        add_into(&mut totals.trans2, &s.trans2);
    }
    totals
}

fn add_into(acc: &mut [f64], x: &[f64]) {
    for (a, v) in acc.iter_mut().zip(x) {
        *a += v;
    }
}

/// Initial distribution: held fixed for left-to-right models, otherwise
/// proportional to the expected first-frame occupancy.
fn update_initial(mask: &TopologyMask, old: &[f64], first: &[f64]) -> Vec<f64> {
    let total: f64 = first.iter().sum();
    if mask.kind().is_left_to_right() || !(total > 0.0) {
        return old.to_vec();
    }
    first.iter().map(|v| v / total).collect()
}

/// Renormalizes one row of counts over the allowed entries; a row that was
/// never visited keeps its previous values.
fn update_row(
    old: &[f64],
    counts: &[f64],
    allowed: impl Fn(usize) -> bool,
    floor: f64,
) -> Vec<f64> {
    if !(counts.iter().sum::<f64>() > 0.0) {
        return old.to_vec();
    }
    floored_normalize(counts, allowed, floor)
}

fn update_trans(mask: &TopologyMask, old: &[f64], counts: &[f64], floor: f64) -> Vec<f64> {
    let n = mask.n_states();
    let mut out = Vec::with_capacity(n * n);
    for i in 0..n {
        let r = i * n..(i + 1) * n;
        out.extend(update_row(
            &old[r.clone()],
            &counts[r],
            |j| mask.allows(i, j),
            floor,
        ));
    }
    out
}

fn update_trans2(mask: &TopologyMask, old: &[f64], counts: &[f64], floor: f64) -> Vec<f64> {
    let n = mask.n_states();
    let mut out = old.to_vec();
    for i in 0..n {
        for &j in mask.successors(i) {
            let r = (i * n + j) * n..(i * n + j + 1) * n;
            let row = update_row(
                &old[r.clone()],
                &counts[r.clone()],
                |k| mask.allows(j, k),
                floor,
            );
            out[r].copy_from_slice(&row);
        }
    }
    out
}

/// Emission reestimation from per-frame state posteriors.
fn update_emissions(
    emissions: &[Emission],
    obs_set: &[Observations<'_>],
    stats: &[UttStats],
    config: &TrainConfig,
    var_floor: &[f64],
) -> Vec<Emission> {
    match emissions[0] {
        Emission::Discrete(_) => {
            update_discrete(emissions, obs_set, stats, config.floors.mixture_weight)
        }
        Emission::Gmm(_) => update_gmm(
            emissions,
            obs_set,
            stats,
            config.floors.mixture_weight,
            var_floor,
        ),
    }
}

fn update_discrete(
    emissions: &[Emission],
    obs_set: &[Observations<'_>],
    stats: &[UttStats],
    floor: f64,
) -> Vec<Emission> {
    let n = emissions.len();
    let n_symbols = emissions[0]
        .as_discrete()
        .expect("uniform emission type")
        .n_symbols();
    let mut counts = vec![vec![0.0; n_symbols]; n];
    for (obs, s) in obs_set.iter().zip(stats) {
        let Observations::Symbols(symbols) = obs else {
            unreachable!("checked by the emission table")
        };
        for (t, &sym) in symbols.iter().enumerate() {
            for (i, row) in counts.iter_mut().enumerate() {
                row[sym] += s.gamma[t * n + i];
            }
        }
    }
    emissions
        .iter()
        .zip(counts)
        .map(|(old, c)| {
            let old = &old.as_discrete().expect("uniform emission type").probs;
            Emission::Discrete(DiscreteDist {
                probs: update_row(old, &c, |_| true, floor),
            })
        })
        .collect()
}

/// Per-utterance first- and second-moment sums for every (state, component).
struct MixtureSums {
    /// `N x M` occupancy.
    occ: Vec<f64>,
    /// `N x M x D`.
    first: Vec<f64>,
}

fn mixture_responsibilities(
    mixtures: &[&GaussianMixture],
    frames: Frames<'_>,
    gamma: &[f64],
) -> Vec<f64> {
    let n = mixtures.len();
    let m = mixtures[0].n_components();
    let mut resp = vec![0.0; frames.len() * n * m];
    let mut buf = vec![0.0; m];
    for t in 0..frames.len() {
        for (i, g) in mixtures.iter().enumerate() {
            let occ = gamma[t * n + i];
            if occ == 0.0 {
                continue;
            }
            g.component_log_densities(frames.row(t), &mut buf);
            let total = log_sum_exp(&buf);
            let out = &mut resp[(t * n + i) * m..(t * n + i + 1) * m];
            for (r, &lp) in out.iter_mut().zip(&buf) {
                *r = occ * (lp - total).exp();
            }
        }
    }
    resp
}

fn update_gmm(
    emissions: &[Emission],
    obs_set: &[Observations<'_>],
    stats: &[UttStats],
    weight_floor: f64,
    var_floor: &[f64],
) -> Vec<Emission> {
    let mixtures: Vec<&GaussianMixture> = emissions
        .iter()
        .map(|e| e.as_gmm().expect("uniform emission type"))
        .collect();
    let n = mixtures.len();
    let m = mixtures[0].n_components();
    let dim = mixtures[0].dim();
    let frames: Vec<Frames<'_>> = obs_set
        .iter()
        .map(|o| match o {
            Observations::Frames(f) => *f,
            Observations::Symbols(_) => unreachable!("checked by the emission table"),
        })
        .collect();

    let resp: Vec<Vec<f64>> = frames
        .par_iter()
        .zip(stats)
        .map(|(f, s)| mixture_responsibilities(&mixtures, *f, &s.gamma))
        .collect();

    let partial: Vec<MixtureSums> = frames
        .par_iter()
        .zip(&resp)
        .map(|(f, r)| {
            let mut sums = MixtureSums {
                occ: vec![0.0; n * m],
                first: vec![0.0; n * m * dim],
            };
            for t in 0..f.len() {
                let x = f.row(t);
                for c in 0..n * m {
                    let w = r[t * n * m + c];
                    if w == 0.0 {
                        continue;
                    }
                    sums.occ[c] += w;
                    for (acc, &xd) in sums.first[c * dim..(c + 1) * dim].iter_mut().zip(x) {
                        *acc += w * xd;
                    }
                }
            }
            sums
        })
        .collect();
    let mut occ = vec![0.0; n * m];
    let mut means = vec![0.0; n * m * dim];
    for p in &partial {
        add_into(&mut occ, &p.occ);
        add_into(&mut means, &p.first);
    }
    for c in 0..n * m {
        if occ[c] > 0.0 {
            means[c * dim..(c + 1) * dim]
                .iter_mut()
                .for_each(|v| *v /= occ[c]);
        } else {
            means[c * dim..(c + 1) * dim].copy_from_slice(&mixtures[c / m].means[c % m]);
        }
    }

    let partial_sq: Vec<Vec<f64>> = frames
        .par_iter()
        .zip(&resp)
        .map(|(f, r)| {
            let mut sq = vec![0.0; n * m * dim];
            for t in 0..f.len() {
                let x = f.row(t);
                for c in 0..n * m {
                    let w = r[t * n * m + c];
                    if w == 0.0 {
                        continue;
                    }
                    let mu = &means[c * dim..(c + 1) * dim];
                    for d in 0..dim {
                        let diff = x[d] - mu[d];
                        sq[c * dim + d] += w * diff * diff;
                    }
                }
            }
            sq
        })
        .collect();
    let mut sq = vec![0.0; n * m * dim];
    for p in &partial_sq {
        add_into(&mut sq, p);
    }

    (0..n)
        .map(|i| {
            let old = mixtures[i];
            let state_occ = &occ[i * m..(i + 1) * m];
            let weights = update_row(&old.weights, state_occ, |_| true, weight_floor);
            let mut new_means = Vec::with_capacity(m);
            let mut new_vars = Vec::with_capacity(m);
            for k in 0..m {
                let c = i * m + k;
                new_means.push(means[c * dim..(c + 1) * dim].to_vec());
                if occ[c] > 0.0 {
                    new_vars.push(
                        (0..dim)
                            .map(|d| (sq[c * dim + d] / occ[c]).max(var_floor[d]))
                            .collect(),
                    );
                } else {
                    new_vars.push(old.variances[k].clone());
                }
            }
            Emission::Gmm(GaussianMixture {
                weights,
                means: new_means,
                variances: new_vars,
            })
        })
        .collect()
}

fn prepare(
    model_issues: Vec<crate::model::ValidationIssue>,
    obs_set: &[Observations<'_>],
    config: &TrainConfig,
) -> Result<Vec<f64>> {
    config.check()?;
    if obs_set.is_empty() {
        return Err(Error::EmptyTrainingSet);
    }
    if !model_issues.is_empty() {
        let text: Vec<String> = model_issues.iter().map(ToString::to_string).collect();
        return Err(Error::InvalidModel(text.join("; ")));
    }
    let frames: Vec<Frames<'_>> = obs_set
        .iter()
        .filter_map(|o| match o {
            Observations::Frames(f) => Some(*f),
            Observations::Symbols(_) => None,
        })
        .collect();
    Ok(if frames.is_empty() {
        Vec::new()
    } else {
        variance_floors(&frames, config.floors.variance)
    })
}

/// Drives E/M iterations until the relative improvement falls below
/// `rel_tol` or `max_iterations` updates have been made.
fn drive<M: Clone + Sync>(
    mut model: M,
    config: &TrainConfig,
    e_step: impl Fn(&M) -> Result<Vec<UttStats>>,
    m_step: impl Fn(&M, &[UttStats]) -> M,
) -> Result<TrainReport<M>> {
    let mut stats = e_step(&model)?;
    let mut log_likelihoods = vec![reduce_ll(&stats)];
    let mut converged = false;
    while log_likelihoods.len() <= config.max_iterations {
        let next = m_step(&model, &stats);
        let next_stats = e_step(&next)?;
        let ll = reduce_ll(&next_stats);
        let prev = *log_likelihoods.last().expect("nonempty");
        model = next;
        stats = next_stats;
        log_likelihoods.push(ll);
        if (ll - prev).abs() <= config.rel_tol * prev.abs().max(f64::MIN_POSITIVE) {
            converged = true;
            break;
        }
    }
    Ok(TrainReport {
        iterations_run: log_likelihoods.len() - 1,
        log_likelihoods,
        converged,
        model,
    })
}

fn reduce_ll(stats: &[UttStats]) -> f64 {
    stats.iter().map(|s| s.log_likelihood).sum()
}

/// Baum-Welch for a first-order model over a set of utterances.
pub fn baum_welch1(
    model: Hmm1Model,
    obs_set: &[Observations<'_>],
    config: &TrainConfig,
) -> Result<TrainReport<Hmm1Model>> {
    let var_floor = prepare(model.validate(), obs_set, config)?;
    let e_step = |m: &Hmm1Model| -> Result<Vec<UttStats>> {
        obs_set
            .par_iter()
            .enumerate()
            .map(|(u, obs)| e_step1(m, *obs, u))
            .collect()
    };
    let m_step = |m: &Hmm1Model, stats: &[UttStats]| -> Hmm1Model {
        let totals = reduce(stats);
        let mask = m.mask();
        let initial = update_initial(mask, m.initial(), &totals.first);
        let trans = update_trans(
            mask,
            m.trans_matrix(),
            &totals.trans,
            config.floors.transition,
        );
        let emissions = update_emissions(m.emissions(), obs_set, stats, config, &var_floor);
        Hmm1Model::new(mask.clone(), initial, trans, emissions).expect("shapes preserved")
    };
    drive(model, config, e_step, m_step)
}

/// Baum-Welch for a second-order model; every utterance needs three frames.
pub fn baum_welch2(
    model: Hmm2Model,
    obs_set: &[Observations<'_>],
    config: &TrainConfig,
) -> Result<TrainReport<Hmm2Model>> {
    let var_floor = prepare(model.validate(), obs_set, config)?;
    for (u, obs) in obs_set.iter().enumerate() {
        if obs.len() < 3 {
            return Err(Error::UtteranceTooShort {
                utterance: u,
                frames: obs.len(),
                required: 3,
            });
        }
    }
    let e_step = |m: &Hmm2Model| -> Result<Vec<UttStats>> {
        obs_set
            .par_iter()
            .enumerate()
            .map(|(u, obs)| e_step2(m, *obs, u))
            .collect()
    };
    let m_step = |m: &Hmm2Model, stats: &[UttStats]| -> Hmm2Model {
        let totals = reduce(stats);
        let mask = m.mask();
        let initial = update_initial(mask, m.initial(), &totals.first);
        let trans1 = update_trans(
            mask,
            m.trans1_matrix(),
            &totals.trans,
            config.floors.transition,
        );
        let trans2 = update_trans2(
            mask,
            m.trans2_tensor(),
            &totals.trans2,
            config.floors.transition,
        );
        let emissions = update_emissions(m.emissions(), obs_set, stats, config, &var_floor);
        Hmm2Model::new(mask.clone(), initial, trans1, trans2, emissions).expect("shapes preserved")
    };
    drive(model, config, e_step, m_step)
}
