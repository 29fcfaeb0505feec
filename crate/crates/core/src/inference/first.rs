use super::{
    argmax_first, check_nonempty, check_path, check_scales, normalize_log_slice, StatePath,
    TrellisLattice,
};
use crate::emission::EmissionTable;
use crate::error::{Error, Result};
use crate::model::{Hmm1Model, ModelOrder};
use crate::obs::Observations;

pub fn forward1(model: &Hmm1Model, obs: Observations<'_>) -> Result<TrellisLattice> {
    let table = EmissionTable::compute(model.emissions(), obs)?;
    forward1_table(model, &table)
}

pub fn backward1(
    model: &Hmm1Model,
    obs: Observations<'_>,
    log_scales: &[f64],
) -> Result<Vec<Vec<f64>>> {
    let table = EmissionTable::compute(model.emissions(), obs)?;
    backward1_table(model, &table, log_scales)
}

/// Forward pass followed by the backward pass sharing its scale factors.
pub fn forward_backward1(model: &Hmm1Model, obs: Observations<'_>) -> Result<TrellisLattice> {
    let table = EmissionTable::compute(model.emissions(), obs)?;
    let mut lattice = forward1_table(model, &table)?;
    lattice.beta = backward1_table(model, &table, &lattice.log_scales)?;
    Ok(lattice)
}

pub(crate) fn forward1_table(model: &Hmm1Model, table: &EmissionTable) -> Result<TrellisLattice> {
    let n = model.n_states();
    let n_frames = table.n_frames();
    check_nonempty(n_frames)?;
    let mask = model.mask();
    let mut alpha: Vec<Vec<f64>> = Vec::with_capacity(n_frames);
    let mut log_scales = Vec::with_capacity(n_frames);

    let mut slice: Vec<f64> = (0..n)
        .map(|i| model.initial()[i].ln() + table.get(0, i))
        .collect();
    for t in 0..n_frames {
        if t > 0 {
            let prev = &alpha[t - 1];
            slice = (0..n)
                .map(|j| {
                    let pred: f64 = mask
                        .predecessors(j)
                        .iter()
                        .map(|&i| prev[i] * model.trans(i, j))
                        .sum();
                    pred.ln() + table.get(t, j)
                })
                .collect();
        }
        let log_norm = normalize_log_slice(&mut slice).ok_or(Error::ImpossibleObservation { t })?;
        log_scales.push(-log_norm);
        alpha.push(std::mem::take(&mut slice));
    }
    let log_likelihood = -log_scales.iter().sum::<f64>();
    Ok(TrellisLattice {
        order: ModelOrder::First,
        n_states: n,
        alpha,
        beta: Vec::new(),
        log_scales,
        log_likelihood,
        beta_terminal: mask.backward_terminal(),
    })
}

pub(crate) fn backward1_table(
    model: &Hmm1Model,
    table: &EmissionTable,
    log_scales: &[f64],
) -> Result<Vec<Vec<f64>>> {
    let n = model.n_states();
    let n_frames = table.n_frames();
    check_nonempty(n_frames)?;
    check_scales(n_frames, log_scales)?;
    let mask = model.mask();
    let mut beta = vec![Vec::new(); n_frames];
    beta[n_frames - 1] = vec![mask.backward_terminal(); n];
    let mut weighted = vec![0.0; n];
    for t in (0..n_frames - 1).rev() {
        let next = &beta[t + 1];
        for j in 0..n {
            weighted[j] = (table.get(t + 1, j) + log_scales[t + 1]).exp() * next[j];
        }
        beta[t] = (0..n)
            .map(|i| {
                mask.successors(i)
                    .iter()
                    .map(|&j| model.trans(i, j) * weighted[j])
                    .sum()
            })
            .collect();
    }
    Ok(beta)
}

pub fn viterbi1(model: &Hmm1Model, obs: Observations<'_>) -> Result<StatePath> {
    let table = EmissionTable::compute(model.emissions(), obs)?;
    let n = model.n_states();
    let n_frames = table.n_frames();
    check_nonempty(n_frames)?;
    let mask = model.mask();
    let log_trans: Vec<f64> = model.trans_matrix().iter().map(|a| a.ln()).collect();

    let mut delta: Vec<f64> = (0..n)
        .map(|i| model.initial()[i].ln() + table.get(0, i))
        .collect();
    if delta.iter().all(|&d| d == f64::NEG_INFINITY) {
        return Err(Error::ImpossibleObservation { t: 0 });
    }
    let mut back = vec![0usize; n_frames * n];
    let mut next = vec![0.0; n];
    for t in 1..n_frames {
        for j in 0..n {
            let preds = mask.predecessors(j);
            let mut best = f64::NEG_INFINITY;
            let mut arg = preds.first().copied().unwrap_or(0);
            for &i in preds {
                let v = delta[i] + log_trans[i * n + j];
                if v > best {
                    best = v;
                    arg = i;
                }
            }
            next[j] = best + table.get(t, j);
            back[t * n + j] = arg;
        }
        if next.iter().all(|&d| d == f64::NEG_INFINITY) {
            return Err(Error::ImpossibleObservation { t });
        }
        std::mem::swap(&mut delta, &mut next);
    }

    let mut states = vec![0usize; n_frames];
    states[n_frames - 1] = argmax_first(&delta);
    let log_prob = delta[states[n_frames - 1]];
    for t in (1..n_frames).rev() {
        states[t - 1] = back[t * n + states[t]];
    }
    Ok(StatePath { states, log_prob })
}

/// Joint log probability of `states` and the observations; `-inf` when the
/// path uses a transition the topology forbids.
pub fn sequence_log_prob1(
    model: &Hmm1Model,
    obs: Observations<'_>,
    states: &[usize],
) -> Result<f64> {
    let table = EmissionTable::compute(model.emissions(), obs)?;
    let n_frames = table.n_frames();
    check_nonempty(n_frames)?;
    check_path(states, n_frames, model.n_states())?;
    let mut lp = model.initial()[states[0]].ln() + table.get(0, states[0]);
    for t in 1..n_frames {
        let (i, j) = (states[t - 1], states[t]);
        if !model.mask().allows(i, j) {
            return Ok(f64::NEG_INFINITY);
        }
        lp += model.trans(i, j).ln() + table.get(t, j);
    }
    Ok(lp)
}

/// `P(O | model)` evaluated through the transition at frame `t` (0-based):
/// `sum_i sum_j alpha_t(i) a_ij b_j(O_{t+1}) beta_{t+1}(j)`, with unscaled
/// forward and backward values. The result is the same for every valid `t`.
/// Unscaled arithmetic underflows on long inputs; meant for short sequences.
pub fn transition_likelihood(model: &Hmm1Model, obs: Observations<'_>, t: usize) -> Result<f64> {
    let table = EmissionTable::compute(model.emissions(), obs)?;
    let n = model.n_states();
    let n_frames = table.n_frames();
    if n_frames < 2 || t + 1 >= n_frames {
        return Err(Error::IndexOutOfRange {
            index: t,
            valid: format!("frames 0..{}", n_frames.saturating_sub(1)),
        });
    }
    let b = |t: usize, j: usize| table.get(t, j).exp();

    let mut alpha: Vec<f64> = (0..n).map(|i| model.initial()[i] * b(0, i)).collect();
    for s in 1..=t {
        alpha = (0..n)
            .map(|j| (0..n).map(|i| alpha[i] * model.trans(i, j)).sum::<f64>() * b(s, j))
            .collect();
    }
    let mut beta = vec![1.0; n];
    for s in (t + 1..n_frames - 1).rev() {
        beta = (0..n)
            .map(|i| {
                (0..n)
                    .map(|j| model.trans(i, j) * b(s + 1, j) * beta[j])
                    .sum()
            })
            .collect();
    }
    let mut p = 0.0;
    for i in 0..n {
        for j in 0..n {
            p += alpha[i] * model.trans(i, j) * b(t + 1, j) * beta[j];
        }
    }
    Ok(p)
}
