//! `chmm features`: audio to feature caches.

use std::collections::BTreeSet;
use std::path::{Path, PathBuf};

use chmm::features::{cache, FeatureMatrix};
use chmm::speaker_id::{read_manifest, write_manifest, Manifest};
use rayon::prelude::*;

use crate::config::CliConfig;
use crate::store::{load_features, path_component};
use crate::CliError;

struct Job {
    input: PathBuf,
    id: String,
    output: PathBuf,
}

fn summary(f: &FeatureMatrix) -> String {
    format!(
        "{} frames x {} coefficients, {} degenerate{}",
        f.n_frames(),
        f.dim(),
        f.meta.degenerate_frames.len(),
        if f.meta.cms_applied { ", cms" } else { "" }
    )
}

pub fn run(
    config: &CliConfig,
    inputs: &[PathBuf],
    manifest: Option<&Path>,
    out: &Path,
) -> Result<(), CliError> {
    let source = manifest.map(read_manifest).transpose()?;
    let mut jobs = Vec::new();
    let mut failures = Vec::new();
    match &source {
        Some(m) => {
            for row in &m.rows {
                match path_component(&row.utterance_id) {
                    Ok(id) => jobs.push(Job {
                        input: m.resolve(row),
                        id: id.to_owned(),
                        output: out.join("features").join(format!("{id}.lpcc")),
                    }),
                    Err(e) => failures.push(format!("{}: {e}", row.utterance_id)),
                }
            }
        }
        None => {
            let mut seen = BTreeSet::new();
            for input in inputs {
                let id = input
                    .file_stem()
                    .map(|s| s.to_string_lossy().into_owned())
                    .unwrap_or_default();
                if !seen.insert(id.clone()) {
                    failures.push(format!(
                        "{}: another input already produces {id}.lpcc",
                        input.display()
                    ));
                    continue;
                }
                jobs.push(Job {
                    input: input.clone(),
                    output: out.join(format!("{id}.lpcc")),
                    id,
                });
            }
        }
    }
    if jobs.is_empty() && failures.is_empty() {
        return Err(CliError::NoWork("no inputs given".into()));
    }
    for dir in [out.to_path_buf(), out.join("features")] {
        if source.is_some() || dir == out {
            std::fs::create_dir_all(&dir)
                .map_err(|e| CliError::Hard(format!("{}: {e}", dir.display())))?;
        }
    }

    let results: Vec<Result<String, String>> = jobs
        .par_iter()
        .map(|job| {
            let features =
                load_features(&job.input, &job.id, &config.frontend).map_err(|e| e.to_string())?;
            cache::save(&job.output, &features).map_err(|e| e.to_string())?;
            Ok(summary(&features))
        })
        .collect();

    let mut ok_ids = BTreeSet::new();
    for (job, result) in jobs.iter().zip(results) {
        match result {
            Ok(s) => {
                println!(
                    "ok    {} -> {}: {s}",
                    job.input.display(),
                    job.output.display()
                );
                ok_ids.insert(job.id.clone());
            }
            Err(e) => failures.push(format!("{}: {e}", job.input.display())),
        }
    }
    if let Some(m) = source {
        let rows = m
            .rows
            .into_iter()
            .filter(|r| ok_ids.contains(&r.utterance_id))
            .map(|mut r| {
                r.path = format!("features/{}.lpcc", r.utterance_id);
                r
            })
            .collect();
        let converted = Manifest {
            rows,
            base_dir: out.to_path_buf(),
        };
        write_manifest(&out.join("manifest.tsv"), &converted)?;
        println!(
            "wrote {} ({} rows)",
            out.join("manifest.tsv").display(),
            converted.rows.len()
        );
    }
    for f in &failures {
        println!("error {f}");
    }
    if failures.is_empty() {
        Ok(())
    } else {
        Err(CliError::Hard(format!(
            "{} of {} inputs failed",
            failures.len(),
            failures.len() + ok_ids.len()
        )))
    }
}
