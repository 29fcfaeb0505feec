//! Signal-processing primitives of the LPC cepstrum frontend.

use std::f64::consts::PI;

use crate::error::{Error, Result};

/// `y[0] = x[0]`, `y[n] = x[n] - coeff * x[n - 1]`.
pub fn pre_emphasize(signal: &[f64], coeff: f64) -> Vec<f64> {
    let mut out = Vec::with_capacity(signal.len());
    let mut prev = None;
    for &x in signal {
        out.push(match prev {
            Some(p) => x - coeff * p,
            None => x,
        });
        prev = Some(x);
    }
    out
}

/// Symmetric Hamming window `0.54 - 0.46 cos(2 pi n / (W - 1))`.
pub fn hamming(len: usize) -> Vec<f64> {
    if len == 1 {
        return vec![1.0];
    }
    let denom = (len - 1) as f64;
    (0..len)
        .map(|n| 0.54 - 0.46 * (2.0 * PI * n as f64 / denom).cos())
        .collect()
}

/// Number of full windows of `window` samples taken every `hop` samples.
pub fn frame_count(n_samples: usize, window: usize, hop: usize) -> usize {
    if n_samples < window {
        0
    } else {
        (n_samples - window) / hop + 1
    }
}

/// Cuts the signal into overlapping frames and applies a Hamming window.
pub fn frame_and_window(signal: &[f64], window: usize, hop: usize) -> Result<Vec<Vec<f64>>> {
    if window == 0 || hop == 0 {
        return Err(Error::InvalidConfig(
            "window and hop must be at least one sample".into(),
        ));
    }
    if signal.len() < window {
        return Err(Error::SignalTooShort {
            samples: signal.len(),
            window,
        });
    }
    let w = hamming(window);
    Ok((0..frame_count(signal.len(), window, hop))
        .map(|f| {
            let start = f * hop;
            signal[start..start + window]
                .iter()
                .zip(&w)
                .map(|(x, c)| x * c)
                .collect()
        })
        .collect())
}

/// Biased autocorrelation `r[k] = sum_n x[n] x[n + k]` for `k = 0..=max_lag`.
pub fn autocorrelation(frame: &[f64], max_lag: usize) -> Result<Vec<f64>> {
    if max_lag >= frame.len() {
        return Err(Error::IndexOutOfRange {
            index: max_lag,
            valid: format!("lags 0..{}", frame.len()),
        });
    }
    Ok((0..=max_lag)
        .map(|k| {
            frame[..frame.len() - k]
                .iter()
                .zip(&frame[k..])
                .map(|(a, b)| a * b)
                .sum()
        })
        .collect())
}

/// Output of the Levinson-Durbin recursion.
#[derive(Debug, Clone, PartialEq)]
pub struct Lpc {
    /// Predictor `a[1..=p]` (stored 0-based), `x^[n] = sum_k a_k x[n - k]`.
    pub coeffs: Vec<f64>,
    /// Residual energy after the last stage, `E_p`.
    pub error: f64,
    /// Reflection coefficients `k[1..=p]`.
    pub reflection: Vec<f64>,
    /// Residual energy after every stage, `E_0 = r[0]` through `E_p`.
    pub energies: Vec<f64>,
}

/// Solves the Toeplitz normal equations for an order-`p` predictor.
///
/// If the residual energy reaches zero before order `p` (a perfectly
/// predictable frame), the remaining stages are skipped: their reflection
/// coefficients are zero and the energy stays at zero.
pub fn lpc_levinson_durbin(r: &[f64], order: usize) -> Result<Lpc> {
    if r.len() < order + 1 {
        return Err(Error::InvalidDimension(format!(
            "order {order} needs {} autocorrelation lags, got {}",
            order + 1,
            r.len()
        )));
    }
    if !(r[0] > 0.0) {
        return Err(Error::DegenerateFrame);
    }
    let mut a = vec![0.0; order];
    let mut reflection = vec![0.0; order];
    let mut energies = Vec::with_capacity(order + 1);
    let mut e = r[0];
    energies.push(e);
    let mut prev = vec![0.0; order];
    for i in 1..=order {
        if !(e > 0.0) {
            energies.push(0.0);
            continue;
        }
        let acc: f64 = (1..i).map(|j| a[j - 1] * r[i - j]).sum();
        let k = (r[i] - acc) / e;
        prev[..i - 1].copy_from_slice(&a[..i - 1]);
        for j in 1..i {
            a[j - 1] = prev[j - 1] - k * prev[i - j - 1];
        }
        a[i - 1] = k;
        reflection[i - 1] = k;
        e *= 1.0 - k * k;
        energies.push(e.max(0.0));
    }
    Ok(Lpc {
        coeffs: a,
        error: *energies.last().expect("E_0 is always present"),
        reflection,
        energies,
    })
}

/// Cepstrum of the all-pole model `1 / A(z)`:
/// `c_1 = a_1`, `c_n = a_n + sum_{k<n} (k/n) c_k a_{n-k}`.
pub fn lpc_to_cepstrum(a: &[f64], n_ceps: usize) -> Result<Vec<f64>> {
    if n_ceps > a.len() {
        return Err(Error::InvalidDimension(format!(
            "{n_ceps} cepstral coefficients requested from an order-{} predictor",
            a.len()
        )));
    }
    let mut c = vec![0.0; n_ceps];
    for n in 1..=n_ceps {
        let mut v = a[n - 1];
        for k in 1..n {
            v += (k as f64 / n as f64) * c[k - 1] * a[n - k - 1];
        }
        c[n - 1] = v;
    }
    Ok(c)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn pre_emphasis_examples() {
        let y = pre_emphasize(&[1.0, 1.0, 1.0], 0.95);
        assert_eq!(y[0], 1.0);
        assert!((y[1] - 0.05).abs() < 1e-15 && (y[2] - 0.05).abs() < 1e-15);
        assert_eq!(pre_emphasize(&[0.3, -0.2], 0.0), vec![0.3, -0.2]);
        assert_eq!(pre_emphasize(&[1.0, 0.0, 0.0], 0.95), vec![1.0, -0.95, 0.0]);
        assert!(pre_emphasize(&[], 0.95).is_empty());
    }

    #[test]
    fn framing_examples() {
        assert_eq!(frame_count(8000, 240, 80), 98);
        let frames = frame_and_window(&vec![1.0; 8000], 240, 80).unwrap();
        assert_eq!(frames.len(), 98);
        assert!(frames.iter().all(|f| f.len() == 240));
        let w = hamming(240);
        assert!((w[0] - 0.08).abs() < 1e-15 && (w[239] - 0.08).abs() < 1e-15);
        assert_eq!(frames[5], w);
        assert!(matches!(
            frame_and_window(&[0.0; 100], 240, 80),
            Err(Error::SignalTooShort {
                samples: 100,
                window: 240
            })
        ));
    }

    #[test]
    fn autocorrelation_examples() {
        assert_eq!(
            autocorrelation(&[1.0, 0.0, 0.0], 2).unwrap(),
            vec![1.0, 0.0, 0.0]
        );
        assert_eq!(autocorrelation(&[1.0, 1.0], 1).unwrap(), vec![2.0, 1.0]);
        assert!(autocorrelation(&[1.0, 1.0], 2).is_err());
    }

    #[test]
    fn levinson_examples() {
        let one = lpc_levinson_durbin(&[1.0, 0.5], 1).unwrap();
        assert_eq!(one.coeffs, vec![0.5]);
        assert_eq!(one.error, 0.75);
        let two = lpc_levinson_durbin(&[1.0, 0.5, 0.25], 2).unwrap();
        assert_eq!(two.coeffs, vec![0.5, 0.0]);
        assert_eq!(two.error, 0.75);
        assert!(matches!(
            lpc_levinson_durbin(&[0.0, 0.0], 1),
            Err(Error::DegenerateFrame)
        ));
        assert!(lpc_levinson_durbin(&[1.0], 1).is_err());
    }

    #[test]
    fn perfectly_predictable_input_stops_early() {
        // r of x[n] = (-1)^n: one stage predicts it exactly
        let lpc = lpc_levinson_durbin(&[1.0, -1.0, 1.0, -1.0], 3).unwrap();
        assert_eq!(lpc.coeffs, vec![-1.0, 0.0, 0.0]);
        assert_eq!(lpc.energies, vec![1.0, 0.0, 0.0, 0.0]);
    }

    #[test]
    fn cepstrum_examples() {
        let c = lpc_to_cepstrum(&[0.5, 0.0], 2).unwrap();
        assert_eq!(c, vec![0.5, 0.125]);
        let c = lpc_to_cepstrum(&[-0.3, 0.2, 0.1], 3).unwrap();
        assert_eq!(c[0], -0.3);
        assert!(lpc_to_cepstrum(&[0.1], 2).is_err());
    }
}
