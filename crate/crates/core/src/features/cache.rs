//! Feature cache files.
//!
//! Binary layout, all integers little-endian:
//!
//! | field            | type        |
//! |------------------|-------------|
//! | magic `"LPCC"`   | 4 bytes     |
//! | version (1)      | u16         |
//! | flags (bit 0: CMS applied) | u16 |
//! | frames `T`       | u32         |
//! | dimension `D`    | u32         |
//! | config hash      | u64         |
//! | degenerate count `K` | u32     |
//! | source id length `S` | u32     |
//! | config JSON length `C` | u32   |
//! | degenerate frame indices | `K` x u32 |
//! | source id        | `S` bytes UTF-8 |
//! | frontend config  | `C` bytes JSON |
//! | features         | `T * D` x f64, row-major |
//!
//! The config hash must match the embedded config on load.

use std::path::Path;

use super::{FeatureMatrix, FeatureMeta, FrontendConfig};
use crate::error::{Error, Result};
use crate::files;

const MAGIC: &[u8; 4] = b"LPCC";
const VERSION: u16 = 1;
const FLAG_CMS: u16 = 1;
const WHAT: &str = "feature cache";

pub fn encode(features: &FeatureMatrix) -> Vec<u8> {
    let meta = &features.meta;
    let config = serde_json::to_vec(&meta.config).expect("config serializes");
    let id = meta.source_id.as_bytes();
    let mut out = Vec::with_capacity(36 + features.as_slice().len() * 8 + id.len() + config.len());
    out.extend_from_slice(MAGIC);
    out.extend_from_slice(&VERSION.to_le_bytes());
    out.extend_from_slice(&(if meta.cms_applied { FLAG_CMS } else { 0 }).to_le_bytes());
    out.extend_from_slice(&(features.n_frames() as u32).to_le_bytes());
    out.extend_from_slice(&(features.dim() as u32).to_le_bytes());
    out.extend_from_slice(&meta.config.hash().to_le_bytes());
    out.extend_from_slice(&(meta.degenerate_frames.len() as u32).to_le_bytes());
    out.extend_from_slice(&(id.len() as u32).to_le_bytes());
    out.extend_from_slice(&(config.len() as u32).to_le_bytes());
    for &t in &meta.degenerate_frames {
        out.extend_from_slice(&(t as u32).to_le_bytes());
    }
    out.extend_from_slice(id);
    out.extend_from_slice(&config);
    for v in features.as_slice() {
        out.extend_from_slice(&v.to_le_bytes());
    }
    out
}

struct Reader<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        let end = self.pos.checked_add(n).filter(|&e| e <= self.bytes.len());
        let end =
            end.ok_or_else(|| Error::format(WHAT, format!("truncated at byte {}", self.pos)))?;
        let s = &self.bytes[self.pos..end];
        self.pos = end;
        Ok(s)
    }

    fn u16(&mut self) -> Result<u16> {
        Ok(u16::from_le_bytes(
            self.take(2)?.try_into().expect("2 bytes"),
        ))
    }

    fn u32(&mut self) -> Result<u32> {
        Ok(u32::from_le_bytes(
            self.take(4)?.try_into().expect("4 bytes"),
        ))
    }

    fn u64(&mut self) -> Result<u64> {
        Ok(u64::from_le_bytes(
            self.take(8)?.try_into().expect("8 bytes"),
        ))
    }
}

pub fn decode(bytes: &[u8]) -> Result<FeatureMatrix> {
    let mut r = Reader { bytes, pos: 0 };
    if r.take(4)? != MAGIC {
        return Err(Error::format(WHAT, "bad magic"));
    }
    let version = r.u16()?;
    if version != VERSION {
        return Err(Error::format(
            WHAT,
            format!("unsupported version {version}"),
        ));
    }
    let flags = r.u16()?;
    let n_frames = r.u32()? as usize;
    let dim = r.u32()? as usize;
    let hash = r.u64()?;
    let n_degenerate = r.u32()? as usize;
    let id_len = r.u32()? as usize;
    let config_len = r.u32()? as usize;
    let degenerate_frames = (0..n_degenerate)
        .map(|_| r.u32().map(|v| v as usize))
        .collect::<Result<Vec<_>>>()?;
    let source_id = std::str::from_utf8(r.take(id_len)?)
        .map_err(|e| Error::format(WHAT, format!("source id: {e}")))?
        .to_owned();
    let config: FrontendConfig = serde_json::from_slice(r.take(config_len)?)?;
    if config.hash() != hash {
        return Err(Error::format(
            WHAT,
            "config hash does not match embedded config",
        ));
    }
    let count = n_frames
        .checked_mul(dim)
        .ok_or_else(|| Error::format(WHAT, "frame count overflows"))?;
    let data: Vec<f64> = r
        .take(
            count
                .checked_mul(8)
                .ok_or_else(|| Error::format(WHAT, "size overflows"))?,
        )?
        .chunks_exact(8)
        .map(|b| f64::from_le_bytes(b.try_into().expect("8 bytes")))
        .collect();
    if r.pos != bytes.len() {
        return Err(Error::format(WHAT, "trailing bytes"));
    }
    if degenerate_frames.iter().any(|&t| t >= n_frames) {
        return Err(Error::format(WHAT, "degenerate frame index out of range"));
    }
    FeatureMatrix::new(
        data,
        dim,
        FeatureMeta {
            source_id,
            config,
            cms_applied: flags & FLAG_CMS != 0,
            degenerate_frames,
        },
    )
}

pub fn save(path: &Path, features: &FeatureMatrix) -> Result<()> {
    files::write_atomic(path, &encode(features))
}

pub fn load(path: &Path) -> Result<FeatureMatrix> {
    decode(&files::read(path)?)
}

/// Human-readable dump: `#` header lines, then one frame per line.
pub fn to_text(features: &FeatureMatrix) -> String {
    let meta = &features.meta;
    let mut out = format!(
        "# source {}\n# config_hash {:016x}\n# cms {}\n# frames {} dim {}\n# degenerate {:?}\n",
        meta.source_id,
        meta.config.hash(),
        meta.cms_applied,
        features.n_frames(),
        features.dim(),
        meta.degenerate_frames
    );
    for t in 0..features.n_frames() {
        let row: Vec<String> = features.row(t).iter().map(f64::to_string).collect();
        out.push_str(&row.join(" "));
        out.push('\n');
    }
    out
}
