use super::{
    argmax_first, check_nonempty, check_path, check_scales, normalize_log_slice, StatePath,
    TrellisLattice,
};
use crate::emission::EmissionTable;
use crate::error::{Error, Result};
use crate::model::{Hmm2Model, ModelOrder};
use crate::obs::Observations;

pub fn forward2(model: &Hmm2Model, obs: Observations<'_>) -> Result<TrellisLattice> {
    let table = EmissionTable::compute(model.emissions(), obs)?;
    forward2_table(model, &table)
}

pub fn backward2(
    model: &Hmm2Model,
    obs: Observations<'_>,
    log_scales: &[f64],
) -> Result<Vec<Vec<f64>>> {
    let table = EmissionTable::compute(model.emissions(), obs)?;
    backward2_table(model, &table, log_scales)
}

pub fn forward_backward2(model: &Hmm2Model, obs: Observations<'_>) -> Result<TrellisLattice> {
    let table = EmissionTable::compute(model.emissions(), obs)?;
    let mut lattice = forward2_table(model, &table)?;
    lattice.beta = backward2_table(model, &table, &lattice.log_scales)?;
    Ok(lattice)
}

pub(crate) fn forward2_table(model: &Hmm2Model, table: &EmissionTable) -> Result<TrellisLattice> {
    let n = model.n_states();
    let n_frames = table.n_frames();
    check_nonempty(n_frames)?;
    let mask = model.mask();
    let mut alpha: Vec<Vec<f64>> = Vec::with_capacity(n_frames);
    let mut log_scales = Vec::with_capacity(n_frames);

    let mut first: Vec<f64> = (0..n)
        .map(|i| model.initial()[i].ln() + table.get(0, i))
        .collect();
    let log_norm = normalize_log_slice(&mut first).ok_or(Error::ImpossibleObservation { t: 0 })?;
    log_scales.push(-log_norm);
    alpha.push(first);

    for t in 1..n_frames {
        let prev = &alpha[t - 1];
        let mut slice = vec![f64::NEG_INFINITY; n * n];
        for j in 0..n {
            for &k in mask.successors(j) {
                let pred = if t == 1 {
                    prev[j] * model.trans1(j, k)
                } else {
                    mask.predecessors(j)
                        .iter()
                        .map(|&i| prev[i * n + j] * model.trans2(i, j, k))
                        .sum()
                };
                slice[j * n + k] = pred.ln() + table.get(t, k);
            }
        }
        let log_norm = normalize_log_slice(&mut slice).ok_or(Error::ImpossibleObservation { t })?;
        log_scales.push(-log_norm);
        alpha.push(slice);
    }
    let log_likelihood = -log_scales.iter().sum::<f64>();
    Ok(TrellisLattice {
        order: ModelOrder::Second,
        n_states: n,
        alpha,
        beta: Vec::new(),
        log_scales,
        log_likelihood,
        beta_terminal: mask.backward_terminal(),
    })
}

pub(crate) fn backward2_table(
    model: &Hmm2Model,
    table: &EmissionTable,
    log_scales: &[f64],
) -> Result<Vec<Vec<f64>>> {
    let n = model.n_states();
    let n_frames = table.n_frames();
    check_nonempty(n_frames)?;
    check_scales(n_frames, log_scales)?;
    let mask = model.mask();
    let terminal = mask.backward_terminal();
    let mut beta = vec![Vec::new(); n_frames];
    if n_frames == 1 {
        beta[0] = vec![terminal; n];
        return Ok(beta);
    }
    beta[n_frames - 1] = vec![terminal; n * n];
    let mut weighted = vec![0.0; n * n];
    for t in (0..n_frames - 1).rev() {
        let next = &beta[t + 1];
        for j in 0..n {
            for k in 0..n {
                weighted[j * n + k] =
                    (table.get(t + 1, k) + log_scales[t + 1]).exp() * next[j * n + k];
            }
        }
        beta[t] = if t == 0 {
            (0..n)
                .map(|j| {
                    mask.successors(j)
                        .iter()
                        .map(|&k| model.trans1(j, k) * weighted[j * n + k])
                        .sum()
                })
                .collect()
        } else {
            let mut slice = vec![0.0; n * n];
            for i in 0..n {
                for &j in mask.successors(i) {
                    slice[i * n + j] = mask
                        .successors(j)
                        .iter()
                        .map(|&k| model.trans2(i, j, k) * weighted[j * n + k])
                        .sum();
                }
            }
            slice
        };
    }
    Ok(beta)
}

pub fn viterbi2(model: &Hmm2Model, obs: Observations<'_>) -> Result<StatePath> {
    let table = EmissionTable::compute(model.emissions(), obs)?;
    let n = model.n_states();
    let n_frames = table.n_frames();
    check_nonempty(n_frames)?;
    let mask = model.mask();

    let first: Vec<f64> = (0..n)
        .map(|i| model.initial()[i].ln() + table.get(0, i))
        .collect();
    if first.iter().all(|&d| d == f64::NEG_INFINITY) {
        return Err(Error::ImpossibleObservation { t: 0 });
    }
    if n_frames == 1 {
        let best = argmax_first(&first);
        return Ok(StatePath {
            states: vec![best],
            log_prob: first[best],
        });
    }

    let log_trans1: Vec<f64> = model.trans1_matrix().iter().map(|a| a.ln()).collect();
    let log_trans2: Vec<f64> = model.trans2_tensor().iter().map(|a| a.ln()).collect();
    let mut delta = vec![f64::NEG_INFINITY; n * n];
    for j in 0..n {
        for k in 0..n {
            delta[j * n + k] = first[j] + log_trans1[j * n + k] + table.get(1, k);
        }
    }
    if delta.iter().all(|&d| d == f64::NEG_INFINITY) {
        return Err(Error::ImpossibleObservation { t: 1 });
    }

    // back[t][(j, k)] = best q_{t-2} given (q_{t-1}, q_t) = (j, k), for t >= 2
    let mut back = vec![0usize; n_frames * n * n];
    let mut next = vec![f64::NEG_INFINITY; n * n];
    for t in 2..n_frames {
        for j in 0..n {
            let preds = mask.predecessors(j);
            for k in 0..n {
                let mut best = f64::NEG_INFINITY;
                let mut arg = preds.first().copied().unwrap_or(0);
                for &i in preds {
                    let v = delta[i * n + j] + log_trans2[(i * n + j) * n + k];
                    if v > best {
                        best = v;
                        arg = i;
                    }
                }
                next[j * n + k] = best + table.get(t, k);
                back[(t * n + j) * n + k] = arg;
            }
        }
        if next.iter().all(|&d| d == f64::NEG_INFINITY) {
            return Err(Error::ImpossibleObservation { t });
        }
        std::mem::swap(&mut delta, &mut next);
    }

    let last = argmax_first(&delta);
    let log_prob = delta[last];
    let mut states = vec![0usize; n_frames];
    states[n_frames - 2] = last / n;
    states[n_frames - 1] = last % n;
    for t in (2..n_frames).rev() {
        states[t - 2] = back[(t * n + states[t - 1]) * n + states[t]];
    }
    Ok(StatePath { states, log_prob })
}

/// Joint log probability of a state path under the second-order chain;
/// `-inf` for a forbidden transition.
pub fn sequence_log_prob2(
    model: &Hmm2Model,
    obs: Observations<'_>,
    states: &[usize],
) -> Result<f64> {
    let table = EmissionTable::compute(model.emissions(), obs)?;
    let n_frames = table.n_frames();
    check_nonempty(n_frames)?;
    check_path(states, n_frames, model.n_states())?;
    let mask = model.mask();
    let mut lp = model.initial()[states[0]].ln() + table.get(0, states[0]);
    if n_frames == 1 {
        return Ok(lp);
    }
    if !mask.allows(states[0], states[1]) {
        return Ok(f64::NEG_INFINITY);
    }
    lp += model.trans1(states[0], states[1]).ln() + table.get(1, states[1]);
    for t in 2..n_frames {
        let (i, j, k) = (states[t - 2], states[t - 1], states[t]);
        if !mask.allows2(i, j, k) {
            return Ok(f64::NEG_INFINITY);
        }
        lp += model.trans2(i, j, k).ln() + table.get(t, k);
    }
    Ok(lp)
}
