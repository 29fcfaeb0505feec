//! Dataset manifests: tab-separated, one utterance per line, with a header.
//!
//! ```text
//! utterance_id  speaker_id  gender  word_id  condition  split  path
//! spk01_w1_neutral_train_00  spk01  male  w1  neutral  train  features/spk01_w1_neutral_train_00.lpcc
//! ```
//!
//! Relative paths are resolved against the manifest's directory. Blank lines
//! and lines starting with `#` are ignored.

use std::path::{Path, PathBuf};

use super::{Condition, Gender, Split};
use crate::error::{Error, Result};
use crate::files;

const HEADER: [&str; 7] = [
    "utterance_id",
    "speaker_id",
    "gender",
    "word_id",
    "condition",
    "split",
    "path",
];

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord)]
pub struct ManifestRow {
    pub utterance_id: String,
    pub speaker_id: String,
    pub gender: Gender,
    pub word_id: String,
    pub condition: Condition,
    pub split: Split,
    /// As written in the file.
    pub path: String,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct Manifest {
    pub rows: Vec<ManifestRow>,
    /// Directory relative paths are resolved against.
    pub base_dir: PathBuf,
}

impl Manifest {
    pub fn resolve(&self, row: &ManifestRow) -> PathBuf {
        let p = Path::new(&row.path);
        if p.is_absolute() {
            p.to_path_buf()
        } else {
            self.base_dir.join(p)
        }
    }

    pub fn split(&self, split: Split) -> impl Iterator<Item = &ManifestRow> {
        self.rows.iter().filter(move |r| r.split == split)
    }

    pub fn to_tsv(&self) -> String {
        let mut out = HEADER.join("\t");
        out.push('\n');
        for r in &self.rows {
            let fields = [
                r.utterance_id.as_str(),
                &r.speaker_id,
                r.gender.as_str(),
                &r.word_id,
                r.condition.as_str(),
                r.split.as_str(),
                &r.path,
            ];
            out.push_str(&fields.join("\t"));
            out.push('\n');
        }
        out
    }

    pub fn from_tsv(text: &str, base_dir: PathBuf) -> Result<Self> {
        let mut rows = Vec::new();
        let mut seen_header = false;
        for (lineno, line) in text.lines().enumerate() {
            let line = line.trim_end_matches('\r');
            if line.trim().is_empty() || line.starts_with('#') {
                continue;
            }
            let fields: Vec<&str> = line.split('\t').collect();
            if !seen_header {
                seen_header = true;
                if fields == HEADER {
                    continue;
                }
            }
            if fields.len() != HEADER.len() {
                return Err(Error::format(
                    "manifest",
                    format!(
                        "line {}: expected {} tab-separated fields, found {}",
                        lineno + 1,
                        HEADER.len(),
                        fields.len()
                    ),
                ));
            }
            let at = |e: Error| Error::format("manifest", format!("line {}: {e}", lineno + 1));
            rows.push(ManifestRow {
                utterance_id: fields[0].to_owned(),
                speaker_id: fields[1].to_owned(),
                gender: fields[2].parse().map_err(at)?,
                word_id: fields[3].to_owned(),
                condition: fields[4].parse().map_err(at)?,
                split: fields[5].parse().map_err(at)?,
                path: fields[6].to_owned(),
            });
        }
        Ok(Self { rows, base_dir })
    }
}

pub fn read_manifest(path: &Path) -> Result<Manifest> {
    let bytes = files::read(path)?;
    let text = std::str::from_utf8(&bytes).map_err(|e| Error::format("manifest", e.to_string()))?;
    let base = path.parent().map(Path::to_path_buf).unwrap_or_default();
    Manifest::from_tsv(text, base)
}

pub fn write_manifest(path: &Path, manifest: &Manifest) -> Result<()> {
    files::write_atomic(path, manifest.to_tsv().as_bytes())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn tsv_roundtrip() {
        let m = Manifest {
            rows: vec![ManifestRow {
                utterance_id: "u1".into(),
                speaker_id: "s1".into(),
                gender: Gender::Female,
                word_id: "w1".into(),
                condition: Condition::Shouted,
                split: Split::Test,
                path: "f/u1.lpcc".into(),
            }],
            base_dir: PathBuf::from("/data"),
        };
        let back = Manifest::from_tsv(&m.to_tsv(), PathBuf::from("/data")).unwrap();
        assert_eq!(back, m);
        assert_eq!(
            back.resolve(&back.rows[0]),
            PathBuf::from("/data/f/u1.lpcc")
        );
    }

    #[test]
    fn bad_lines_name_their_position() {
        let text = "utterance_id\tspeaker_id\tgender\tword_id\tcondition\tsplit\tpath\nu\ts\tmale\tw\tloud\ttest\tp\n";
        let err = Manifest::from_tsv(text, PathBuf::new())
            .unwrap_err()
            .to_string();
        assert!(err.contains("line 2"), "{err}");
        assert!(Manifest::from_tsv("a\tb\n", PathBuf::new()).is_err());
    }
}
