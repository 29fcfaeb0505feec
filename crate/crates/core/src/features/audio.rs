//! Reading and writing 16-bit mono PCM.
//!
//! Samples are scaled by 1/32768, so decoded signals lie in `[-1, 1)`.

use std::path::Path;

use crate::error::{Error, Result};
use crate::files;

const SCALE: f64 = 32768.0;

/// Decoded audio and its sample rate.
#[derive(Debug, Clone, PartialEq)]
pub struct Signal {
    pub samples: Vec<f64>,
    pub sample_rate: u32,
}

pub fn read_wav(path: &Path) -> Result<Signal> {
    let mut reader = hound::WavReader::open(path)
        .map_err(|e| Error::Audio(format!("{}: {e}", path.display())))?;
    let spec = reader.spec();
    if spec.channels != 1
        || spec.bits_per_sample != 16
        || spec.sample_format != hound::SampleFormat::Int
    {
        return Err(Error::Audio(format!(
            "{}: expected 16-bit integer mono, found {} channel(s) of {}-bit {:?}",
            path.display(),
            spec.channels,
            spec.bits_per_sample,
            spec.sample_format
        )));
    }
    let samples = reader
        .samples::<i16>()
        .map(|s| s.map(|v| f64::from(v) / SCALE))
        .collect::<std::result::Result<Vec<_>, _>>()
        .map_err(|e| Error::Audio(format!("{}: {e}", path.display())))?;
    Ok(Signal {
        samples,
        sample_rate: spec.sample_rate,
    })
}

/// Headerless 16-bit little-endian samples at a caller-supplied rate.
pub fn read_raw(path: &Path, sample_rate: u32) -> Result<Signal> {
    let bytes = files::read(path)?;
    if bytes.len() % 2 != 0 {
        return Err(Error::Audio(format!(
            "{}: odd byte count {}",
            path.display(),
            bytes.len()
        )));
    }
    let samples = bytes
        .chunks_exact(2)
        .map(|b| f64::from(i16::from_le_bytes([b[0], b[1]])) / SCALE)
        .collect();
    Ok(Signal {
        samples,
        sample_rate,
    })
}

/// Chooses the decoder by extension: `.wav` or raw PCM otherwise.
pub fn read_audio(path: &Path, raw_sample_rate: u32) -> Result<Signal> {
    let is_wav = path
        .extension()
        .is_some_and(|e| e.eq_ignore_ascii_case("wav"));
    if is_wav {
        read_wav(path)
    } else {
        read_raw(path, raw_sample_rate)
    }
}

/// Quantizes to 16 bits, clipping to the representable range.
pub fn quantize(x: f64) -> i16 {
    (x * SCALE)
        .round()
        .clamp(f64::from(i16::MIN), f64::from(i16::MAX)) as i16
}

pub fn write_wav(path: &Path, samples: &[f64], sample_rate: u32) -> Result<()> {
    let spec = hound::WavSpec {
        channels: 1,
        sample_rate,
        bits_per_sample: 16,
        sample_format: hound::SampleFormat::Int,
    };
    let mut cursor = std::io::Cursor::new(Vec::new());
    {
        let mut writer =
            hound::WavWriter::new(&mut cursor, spec).map_err(|e| Error::Audio(e.to_string()))?;
        for &s in samples {
            writer
                .write_sample(quantize(s))
                .map_err(|e| Error::Audio(e.to_string()))?;
        }
        writer.finalize().map_err(|e| Error::Audio(e.to_string()))?;
    }
    files::write_atomic(path, &cursor.into_inner())
}
