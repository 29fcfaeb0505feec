//! `chmm synth`: synthetic corpus generation.

use std::path::Path;

use chmm::speaker_id::{generate_synthetic_corpus, Condition, Split, SynthSpec};

use crate::CliError;

pub fn run(spec_path: Option<&Path>, seed: Option<u64>, out: &Path) -> Result<(), CliError> {
    let mut spec = match spec_path {
        Some(p) => {
            let text = std::fs::read_to_string(p)
                .map_err(|e| CliError::Hard(format!("{}: {e}", p.display())))?;
            toml::from_str::<SynthSpec>(&text)
                .map_err(|e| CliError::Hard(format!("{}: {e}", p.display())))?
        }
        None => SynthSpec::default(),
    };
    if let Some(s) = seed {
        spec.seed = s;
    }
    spec.check()?;
    std::fs::create_dir_all(out).map_err(|e| CliError::Hard(format!("{}: {e}", out.display())))?;
    let manifest = generate_synthetic_corpus(&spec, out)?;
    let count = |split, cond| {
        manifest
            .rows
            .iter()
            .filter(|r| r.split == split && r.condition == cond)
            .count()
    };
    println!(
        "{} utterances from {} speakers x {} words (seed {}): {} train, {} neutral test, {} shouted test",
        manifest.rows.len(),
        spec.n_speakers,
        spec.n_words,
        spec.seed,
        count(Split::Train, Condition::Neutral),
        count(Split::Test, Condition::Neutral),
        count(Split::Test, Condition::Shouted),
    );
    println!("manifest: {}", out.join("manifest.tsv").display());
    Ok(())
}
