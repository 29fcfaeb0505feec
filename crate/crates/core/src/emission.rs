//! Per-state output distributions.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::obs::Observations;

const LN_2PI: f64 = 1.837_877_066_409_345_3;

/// Diagonal-covariance Gaussian mixture.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GaussianMixture {
    pub weights: Vec<f64>,
    /// `M` mean vectors of length `D`.
    pub means: Vec<Vec<f64>>,
    /// `M` diagonal variance vectors of length `D`.
    pub variances: Vec<Vec<f64>>,
}

impl GaussianMixture {
    /// Equal weights, zero means, unit variances.
    pub fn placeholder(n_mixtures: usize, dim: usize) -> Self {
        Self {
            weights: vec![1.0 / n_mixtures as f64; n_mixtures],
            means: vec![vec![0.0; dim]; n_mixtures],
            variances: vec![vec![1.0; dim]; n_mixtures],
        }
    }

    pub fn n_components(&self) -> usize {
        self.weights.len()
    }

    pub fn dim(&self) -> usize {
        self.means.first().map_or(0, Vec::len)
    }

    /// `ln c_m + ln N(x; mu_m, Sigma_m)` for every component.
    pub fn component_log_densities(&self, x: &[f64], out: &mut [f64]) {
        for (m, slot) in out.iter_mut().enumerate() {
            let mut acc = 0.0;
            for ((&xd, &mu), &var) in x.iter().zip(&self.means[m]).zip(&self.variances[m]) {
                let diff = xd - mu;
                acc += LN_2PI + var.ln() + diff * diff / var;
            }
            *slot = self.weights[m].ln() - 0.5 * acc;
        }
    }

    pub fn log_density(&self, x: &[f64]) -> f64 {
        let mut buf = vec![0.0; self.n_components()];
        self.component_log_densities(x, &mut buf);
        log_sum_exp(&buf)
    }
}

/// Probability table over a finite symbol alphabet.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DiscreteDist {
    pub probs: Vec<f64>,
}

impl DiscreteDist {
    pub fn uniform(n_symbols: usize) -> Self {
        Self {
            probs: vec![1.0 / n_symbols as f64; n_symbols],
        }
    }

    pub fn n_symbols(&self) -> usize {
        self.probs.len()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum Emission {
    Gmm(GaussianMixture),
    Discrete(DiscreteDist),
}

impl Emission {
    pub fn as_gmm(&self) -> Option<&GaussianMixture> {
        match self {
            Emission::Gmm(g) => Some(g),
            Emission::Discrete(_) => None,
        }
    }

    pub fn as_discrete(&self) -> Option<&DiscreteDist> {
        match self {
            Emission::Discrete(d) => Some(d),
            Emission::Gmm(_) => None,
        }
    }
}

/// Which family of output distributions a model uses, with its sizes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum EmissionSpec {
    Gmm { n_mixtures: usize, dim: usize },
    Discrete { n_symbols: usize },
}

impl EmissionSpec {
    pub fn placeholder(&self) -> Emission {
        match *self {
            EmissionSpec::Gmm { n_mixtures, dim } => {
                Emission::Gmm(GaussianMixture::placeholder(n_mixtures, dim))
            }
            EmissionSpec::Discrete { n_symbols } => {
                Emission::Discrete(DiscreteDist::uniform(n_symbols))
            }
        }
    }

    pub(crate) fn check(&self) -> Result<()> {
        match *self {
            EmissionSpec::Gmm { n_mixtures, dim } if n_mixtures == 0 || dim == 0 => {
                Err(Error::InvalidDimension(
                    "mixture count and feature dimension must be positive".into(),
                ))
            }
            EmissionSpec::Discrete { n_symbols: 0 } => {
                Err(Error::InvalidDimension("symbol alphabet is empty".into()))
            }
            _ => Ok(()),
        }
    }
}

/// `ln b_j(O_t)` for every frame and state, row-major `T x N`.
#[derive(Debug, Clone)]
pub struct EmissionTable {
    n_frames: usize,
    n_states: usize,
    log: Vec<f64>,
}

impl EmissionTable {
    pub fn compute(emissions: &[Emission], obs: Observations<'_>) -> Result<Self> {
        let n_states = emissions.len();
        let n_frames = obs.len();
        let mut log = vec![0.0; n_frames * n_states];
        match obs {
            Observations::Frames(frames) => {
                let mut buf = Vec::new();
                for (j, e) in emissions.iter().enumerate() {
                    let g = e.as_gmm().ok_or_else(|| {
                        Error::EmissionMismatch(
                            "feature vectors given to a discrete-emission model".into(),
                        )
                    })?;
                    if g.dim() != frames.dim() {
                        return Err(Error::DimensionMismatch {
                            what: "feature dimension",
                            expected: g.dim(),
                            found: frames.dim(),
                        });
                    }
                    buf.resize(g.n_components(), 0.0);
                    for t in 0..n_frames {
                        g.component_log_densities(frames.row(t), &mut buf);
                        log[t * n_states + j] = log_sum_exp(&buf);
                    }
                }
            }
            Observations::Symbols(symbols) => {
                for (j, e) in emissions.iter().enumerate() {
                    let d = e.as_discrete().ok_or_else(|| {
                        Error::EmissionMismatch("symbols given to a Gaussian-mixture model".into())
                    })?;
                    for (t, &s) in symbols.iter().enumerate() {
                        let p = *d.probs.get(s).ok_or_else(|| Error::IndexOutOfRange {
                            index: s,
                            valid: format!("symbols 0..{}", d.n_symbols()),
                        })?;
                        log[t * n_states + j] = p.ln();
                    }
                }
            }
        }
        Ok(Self {
            n_frames,
            n_states,
            log,
        })
    }

    pub fn n_frames(&self) -> usize {
        self.n_frames
    }

    pub fn n_states(&self) -> usize {
        self.n_states
    }

    #[inline]
    pub fn get(&self, t: usize, j: usize) -> f64 {
        self.log[t * self.n_states + j]
    }

    pub fn frame(&self, t: usize) -> &[f64] {
        &self.log[t * self.n_states..(t + 1) * self.n_states]
    }
}

pub(crate) fn log_sum_exp(xs: &[f64]) -> f64 {
    let max = xs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if max == f64::NEG_INFINITY {
        return max;
    }
    max + xs.iter().map(|&x| (x - max).exp()).sum::<f64>().ln()
}
