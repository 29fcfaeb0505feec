//! LPC cepstrum frontend: pre-emphasis, Hamming framing, autocorrelation
//! LPC, cepstral conversion and optional cepstral mean subtraction.

pub mod audio;
pub mod cache;
mod dsp;

pub use dsp::{
    autocorrelation, frame_and_window, frame_count, hamming, lpc_levinson_durbin, lpc_to_cepstrum,
    pre_emphasize, Lpc,
};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::obs::{Frames, Observations};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FrontendConfig {
    pub sample_rate: u32,
    pub preemphasis: f64,
    pub window_ms: f64,
    pub hop_ms: f64,
    pub lpc_order: usize,
    pub cepstrum_order: usize,
    pub cms: bool,
}

impl Default for FrontendConfig {
    fn default() -> Self {
        Self {
            sample_rate: 8000,
            preemphasis: 0.95,
            window_ms: 30.0,
            hop_ms: 10.0,
            lpc_order: 12,
            cepstrum_order: 12,
            cms: false,
        }
    }
}

impl FrontendConfig {
    pub fn window_samples(&self) -> usize {
        (self.window_ms * self.sample_rate as f64 / 1000.0).round() as usize
    }

    pub fn hop_samples(&self) -> usize {
        (self.hop_ms * self.sample_rate as f64 / 1000.0).round() as usize
    }

    pub fn check(&self) -> Result<()> {
        let bad = |msg: &str| Err(Error::InvalidConfig(msg.into()));
        if self.sample_rate == 0 {
            return bad("sample_rate must be positive");
        }
        if !(0.0..1.0).contains(&self.preemphasis) {
            return bad("preemphasis must lie in [0, 1)");
        }
        if !(self.hop_ms > 0.0 && self.window_ms >= self.hop_ms) {
            return bad("need window_ms >= hop_ms > 0");
        }
        if self.lpc_order == 0 || self.cepstrum_order == 0 {
            return bad("lpc_order and cepstrum_order must be at least 1");
        }
        if self.cepstrum_order > self.lpc_order {
            return bad("cepstrum_order may not exceed lpc_order");
        }
        if self.hop_samples() == 0 || self.window_samples() <= self.lpc_order {
            return bad("window must hold more samples than the LPC order");
        }
        Ok(())
    }

    /// Stable 64-bit digest of every field.
    pub fn hash(&self) -> u64 {
        crate::files::digest64(&serde_json::to_vec(self).expect("config serializes"))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureMeta {
    pub source_id: String,
    pub config: FrontendConfig,
    pub cms_applied: bool,
    /// Frames whose autocorrelation energy was zero; their rows are zero.
    pub degenerate_frames: Vec<usize>,
}

/// `T x D` cepstral features, row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureMatrix {
    data: Vec<f64>,
    dim: usize,
    pub meta: FeatureMeta,
}

impl FeatureMatrix {
    pub fn new(data: Vec<f64>, dim: usize, meta: FeatureMeta) -> Result<Self> {
        if dim == 0 || !data.len().is_multiple_of(dim) {
            return Err(Error::InvalidDimension(format!(
                "{} values do not form rows of width {dim}",
                data.len()
            )));
        }
        if data.iter().any(|v| !v.is_finite()) {
            return Err(Error::Domain("feature values must be finite".into()));
        }
        Ok(Self { data, dim, meta })
    }

    pub fn n_frames(&self) -> usize {
        self.data.len() / self.dim
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn row(&self, t: usize) -> &[f64] {
        &self.data[t * self.dim..(t + 1) * self.dim]
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    pub fn frames(&self) -> Frames<'_> {
        Frames::new(&self.data, self.dim)
    }

    pub fn observations(&self) -> Observations<'_> {
        Observations::Frames(self.frames())
    }
}

/// Subtracts the per-coefficient utterance mean from every frame.
pub fn cepstral_mean_subtraction(features: &FeatureMatrix) -> FeatureMatrix {
    let dim = features.dim;
    let n = features.n_frames();
    // shifted by the first row so constant columns cancel exactly
    let mut mean = vec![0.0; dim];
    if n > 0 {
        let anchor = features.row(0);
        let mut acc = vec![0.0; dim];
        for t in 0..n {
            for ((a, v), x0) in acc.iter_mut().zip(features.row(t)).zip(anchor) {
                *a += v - x0;
            }
        }
        for ((m, a), x0) in mean.iter_mut().zip(&acc).zip(anchor) {
            *m = x0 + a / n as f64;
        }
    }
    let data = features
        .data
        .chunks(dim)
        .flat_map(|row| row.iter().zip(&mean).map(|(v, m)| v - m))
        .collect();
    FeatureMatrix {
        data,
        dim,
        meta: FeatureMeta {
            cms_applied: true,
            ..features.meta.clone()
        },
    }
}

/// Runs the whole frontend on a signal normalized to `[-1, 1)`.
pub fn extract_features(
    signal: &[f64],
    config: &FrontendConfig,
    source_id: &str,
) -> Result<FeatureMatrix> {
    config.check()?;
    let emphasized = pre_emphasize(signal, config.preemphasis);
    let frames = frame_and_window(&emphasized, config.window_samples(), config.hop_samples())?;
    let dim = config.cepstrum_order;
    let mut data = Vec::with_capacity(frames.len() * dim);
    let mut degenerate = Vec::new();
    for (t, frame) in frames.iter().enumerate() {
        let r = autocorrelation(frame, config.lpc_order)?;
        match lpc_levinson_durbin(&r, config.lpc_order) {
            Ok(lpc) => data.extend(lpc_to_cepstrum(&lpc.coeffs, dim)?),
            Err(Error::DegenerateFrame) => {
                degenerate.push(t);
                data.extend(std::iter::repeat_n(0.0, dim));
            }
            Err(e) => return Err(e),
        }
    }
    if degenerate.len() == frames.len() {
        return Err(Error::AllFramesDegenerate);
    }
    let matrix = FeatureMatrix::new(
        data,
        dim,
        FeatureMeta {
            source_id: source_id.to_owned(),
            config: *config,
            cms_applied: false,
            degenerate_frames: degenerate,
        },
    )?;
    Ok(if config.cms {
        cepstral_mean_subtraction(&matrix)
    } else {
        matrix
    })
}
