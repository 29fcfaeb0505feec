//! `chmm evaluate`: identification over the test split, and reports.
//!
//! Writes `report.txt`, `report.json` and one `trials_<VARIANT>.tsv` per
//! variant into the report directory.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::Path;

use chmm::files::write_atomic;
use chmm::speaker_id::{
    comparison_report, evaluate, read_manifest, AccuracyGrid, Aggregates, ComparisonReport,
    EvalResult, GridRow, ReferenceRates, Scoring, SkippedTrial, Split, Variant,
};
use serde::{Deserialize, Serialize};

use crate::config::CliConfig;
use crate::store::{discover, load_registry, load_rows};
use crate::CliError;

#[derive(Serialize)]
struct VariantSection<'a> {
    variant: Variant,
    trials: usize,
    aggregates: &'a Aggregates,
    skipped: &'a [SkippedTrial],
}

#[derive(Serialize)]
struct ReportDoc<'a> {
    config_hash: String,
    scoring: Scoring,
    test_set: Option<&'a str>,
    results: Vec<VariantSection<'a>>,
    grid: &'a AccuracyGrid,
    comparison: Option<&'a ComparisonReport>,
}

/// Accuracy grid fixture: the rows plus optional expected improvement rates.
///
/// ```toml
/// reference = "CHMM2"
/// [[rows]]
/// variant = "LTRHMM1"
/// neutral = { male = 89.0, female = 91.0, average = 90.0 }
/// shouted = { male = 21.0, female = 25.0, average = 23.0 }
/// [expected]
/// LTRHMM1 = [6.1, 213.0]
/// ```
#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct Fixture {
    reference: Option<String>,
    rows: Vec<GridRow>,
    #[serde(default)]
    expected: BTreeMap<String, [f64; 2]>,
}

fn io_err(path: &Path, e: std::io::Error) -> CliError {
    CliError::Hard(format!("{}: {e}", path.display()))
}

fn write(dir: &Path, name: &str, text: &str) -> Result<(), CliError> {
    write_atomic(&dir.join(name), text.as_bytes())?;
    Ok(())
}

fn default_reference(variants: &[Variant]) -> Variant {
    if variants.contains(&Variant::Chmm2) {
        Variant::Chmm2
    } else {
        *variants.last().expect("at least one variant")
    }
}

pub fn from_fixtures(
    config: &CliConfig,
    path: &Path,
    reference: Option<Variant>,
    out: &Path,
) -> Result<(), CliError> {
    let text = std::fs::read_to_string(path).map_err(|e| io_err(path, e))?;
    let is_json = path
        .extension()
        .is_some_and(|e| e.eq_ignore_ascii_case("json"));
    let fixture: Fixture = if is_json {
        serde_json::from_str(&text)
            .map_err(|e| CliError::Hard(format!("{}: {e}", path.display())))?
    } else {
        toml::from_str(&text).map_err(|e| CliError::Hard(format!("{}: {e}", path.display())))?
    };
    let mut expected = ReferenceRates::default();
    for (k, v) in &fixture.expected {
        expected.rates.insert(k.parse()?, *v);
    }
    let grid = AccuracyGrid { rows: fixture.rows };
    let variants: Vec<Variant> = grid.rows.iter().map(|r| r.variant).collect();
    if variants.is_empty() {
        return Err(CliError::NoWork("the fixture has no rows".into()));
    }
    let fixture_ref = fixture.reference.as_deref().map(str::parse).transpose()?;
    let reference = reference
        .or(fixture_ref)
        .unwrap_or_else(|| default_reference(&variants));
    let comparison = grid.compare(reference, (!expected.rates.is_empty()).then_some(&expected))?;
    let hash = format!("{:016x}", config.hash());
    let text = format!("config {hash}\nsource fixture\n\n{}", comparison.to_text());
    let doc = ReportDoc {
        config_hash: hash,
        scoring: config.scoring,
        test_set: None,
        results: Vec::new(),
        grid: &comparison.grid,
        comparison: Some(&comparison),
    };
    std::fs::create_dir_all(out).map_err(|e| io_err(out, e))?;
    write(out, "report.txt", &text)?;
    write(
        out,
        "report.json",
        &(serde_json::to_string_pretty(&doc).map_err(chmm::Error::from)? + "\n"),
    )?;
    print!("{text}");
    Ok(())
}

fn trials_tsv(result: &EvalResult) -> String {
    let mut s = String::from(
        "utterance_id\tspeaker_id\tpredicted\tgender\tword_id\tcondition\tcorrect\tbest_score\n",
    );
    for t in &result.records {
        let best = t.scores.first().map_or(f64::NAN, |x| x.1);
        let _ = writeln!(
            s,
            "{}\t{}\t{}\t{}\t{}\t{}\t{}\t{:.6}",
            t.utterance_id,
            t.true_speaker,
            t.predicted,
            t.gender,
            t.word,
            t.condition,
            u8::from(t.correct()),
            best
        );
    }
    s
}

pub fn run(
    config: &CliConfig,
    variants: Option<Vec<Variant>>,
    manifest_path: &Path,
    reference: Option<Variant>,
    out: &Path,
) -> Result<(), CliError> {
    let manifest = read_manifest(manifest_path)?;
    if manifest.split(Split::Test).next().is_none() {
        return Err(CliError::NoWork("the manifest has no test rows".into()));
    }
    let store = &config.paths.models;
    let variants = variants.unwrap_or_else(|| discover(store));
    if variants.is_empty() {
        return Err(CliError::NoWork(format!(
            "no trained models under {}",
            store.display()
        )));
    }
    let registry = load_registry(store, &variants)?;
    let features = load_rows(&manifest, manifest.split(Split::Test), &config.frontend);
    let results: Vec<EvalResult> = variants
        .iter()
        .map(|&v| {
            evaluate(&registry, &manifest, v, config.scoring, |row| {
                features[&row.utterance_id]
                    .clone()
                    .map_err(chmm::Error::InvalidConfig)
            })
        })
        .collect();

    let comparison = if results.len() >= 2 {
        let reference = reference.unwrap_or_else(|| default_reference(&variants));
        Some(comparison_report(&results, reference, None)?)
    } else {
        None
    };
    let grid = AccuracyGrid::from_results(&results);
    let hash = format!("{:016x}", config.hash());
    let test_set = results[0].manifest_digest.as_str();

    let mut text = format!("config {hash}\ntest set {test_set}\n\n");
    match &comparison {
        Some(c) => text.push_str(&c.to_text()),
        None => text.push_str(&grid.to_text(Some(config.scoring))),
    }
    for r in &results {
        if !r.skipped.is_empty() {
            let _ = writeln!(
                text,
                "\nSkipped trials for {} ({}):",
                r.variant,
                r.skipped.len()
            );
            for s in &r.skipped {
                let _ = writeln!(text, "  {}: {}", s.utterance_id, s.reason);
            }
        }
    }
    let doc = ReportDoc {
        config_hash: hash,
        scoring: config.scoring,
        test_set: Some(test_set),
        results: results
            .iter()
            .map(|r| VariantSection {
                variant: r.variant,
                trials: r.records.len(),
                aggregates: &r.aggregates,
                skipped: &r.skipped,
            })
            .collect(),
        grid: &grid,
        comparison: comparison.as_ref(),
    };
    std::fs::create_dir_all(out).map_err(|e| io_err(out, e))?;
    write(out, "report.txt", &text)?;
    write(
        out,
        "report.json",
        &(serde_json::to_string_pretty(&doc).map_err(chmm::Error::from)? + "\n"),
    )?;
    for r in &results {
        write(out, &format!("trials_{}.tsv", r.variant), &trials_tsv(r))?;
    }
    print!("{text}");
    if results.iter().all(|r| r.empty) {
        return Err(CliError::NoWork("every trial was skipped".into()));
    }
    Ok(())
}
