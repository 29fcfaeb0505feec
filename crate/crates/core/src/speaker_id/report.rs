//! Accuracy grids and improvement-rate comparisons between variants.

use std::collections::BTreeMap;
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use super::{Condition, EvalResult, Gender, Scoring, Variant};
use crate::error::{Error, Result};

/// Relative improvement `100 * (new - base) / base`, in percent.
pub fn improvement_rate(new_pct: f64, base_pct: f64) -> Result<f64> {
    if !(base_pct > 0.0) || !new_pct.is_finite() || !base_pct.is_finite() {
        return Err(Error::Domain(format!(
            "improvement rate needs a positive base accuracy, got {base_pct}"
        )));
    }
    Ok(100.0 * (new_pct - base_pct) / base_pct)
}

/// Rounds to one decimal, as reports display rates.
pub fn round1(x: f64) -> f64 {
    format!("{x:.1}").parse().expect("formatted float parses")
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GenderRates {
    pub male: Option<f64>,
    pub female: Option<f64>,
    pub average: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridRow {
    pub variant: Variant,
    pub neutral: GenderRates,
    pub shouted: GenderRates,
}

impl GridRow {
    pub fn from_result(result: &EvalResult) -> Self {
        let agg = &result.aggregates;
        let rates = |c: Condition| GenderRates {
            male: agg.percent(c, Gender::Male),
            female: agg.percent(c, Gender::Female),
            average: agg.average.get(&c).copied(),
        };
        Self {
            variant: result.variant,
            neutral: rates(Condition::Neutral),
            shouted: rates(Condition::Shouted),
        }
    }

    fn rates(&self, c: Condition) -> &GenderRates {
        match c {
            Condition::Neutral => &self.neutral,
            Condition::Shouted => &self.shouted,
        }
    }
}

/// Accuracy percentages per variant, gender and condition.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AccuracyGrid {
    pub rows: Vec<GridRow>,
}

/// Expected improvement rates to check computed ones against, keyed by the
/// variant being improved upon: `[neutral, shouted]`.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ReferenceRates {
    pub rates: BTreeMap<Variant, [f64; 2]>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ImprovementRow {
    pub base: Variant,
    pub neutral: Option<f64>,
    pub shouted: Option<f64>,
    pub expected: Option<[f64; 2]>,
    /// The one-decimal rounding of a computed rate differs from `expected`.
    pub discrepancy: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ComparisonReport {
    pub scoring: Option<Scoring>,
    pub reference: Variant,
    pub grid: AccuracyGrid,
    pub improvements: Vec<ImprovementRow>,
}

impl AccuracyGrid {
    pub fn from_results(results: &[EvalResult]) -> Self {
        Self {
            rows: results.iter().map(GridRow::from_result).collect(),
        }
    }

    pub fn row(&self, variant: Variant) -> Option<&GridRow> {
        self.rows.iter().find(|r| r.variant == variant)
    }

    /// Improvement of `reference` over every other row, per condition.
    pub fn compare(
        &self,
        reference: Variant,
        expected: Option<&ReferenceRates>,
    ) -> Result<ComparisonReport> {
        if self.rows.len() < 2 {
            return Err(Error::InvalidConfig(
                "a comparison needs at least two variants".into(),
            ));
        }
        let ref_row = self.row(reference).ok_or_else(|| {
            Error::InvalidConfig(format!("reference variant {reference} has no results"))
        })?;
        let rate = |base: &GridRow, c: Condition| -> Option<f64> {
            let new = ref_row.rates(c).average?;
            improvement_rate(new, base.rates(c).average?).ok()
        };
        let improvements = self
            .rows
            .iter()
            .filter(|r| r.variant != reference)
            .map(|base| {
                let neutral = rate(base, Condition::Neutral);
                let shouted = rate(base, Condition::Shouted);
                let exp = expected.and_then(|e| e.rates.get(&base.variant)).copied();
                let differs = |computed: Option<f64>, printed: f64| {
                    computed.is_none_or(|v| (round1(v) - printed).abs() > 1e-9)
                };
                ImprovementRow {
                    base: base.variant,
                    neutral,
                    shouted,
                    expected: exp,
                    discrepancy: exp
                        .is_some_and(|[n, s]| differs(neutral, n) || differs(shouted, s)),
                }
            })
            .collect();
        Ok(ComparisonReport {
            scoring: None,
            reference,
            grid: self.clone(),
            improvements,
        })
    }
}

/// Grid and improvement table for results computed on one test set.
pub fn comparison_report(
    results: &[EvalResult],
    reference: Variant,
    expected: Option<&ReferenceRates>,
) -> Result<ComparisonReport> {
    if let Some(first) = results.first() {
        for r in &results[1..] {
            if r.manifest_digest != first.manifest_digest {
                return Err(Error::ManifestMismatch(format!(
                    "{} used test set {}, {} used {}",
                    first.variant, first.manifest_digest, r.variant, r.manifest_digest
                )));
            }
            if r.scoring != first.scoring {
                return Err(Error::ManifestMismatch(format!(
                    "{} scored by {}, {} by {}",
                    first.variant, first.scoring, r.variant, r.scoring
                )));
            }
        }
    }
    let mut report = AccuracyGrid::from_results(results).compare(reference, expected)?;
    report.scoring = results.first().map(|r| r.scoring);
    Ok(report)
}

fn cell(v: Option<f64>) -> String {
    v.map_or_else(|| "-".to_owned(), |x| format!("{x:.1}"))
}

impl AccuracyGrid {
    /// Aligned accuracy table, three lines per variant.
    pub fn to_text(&self, scoring: Option<Scoring>) -> String {
        let mut out = String::new();
        let scoring = scoring.map_or(String::new(), |s| format!(" [scoring: {s}]"));
        let _ = writeln!(out, "Identification accuracy (%){scoring}");
        let _ = writeln!(
            out,
            "{:<9} {:<8} {:>8} {:>8}",
            "Model", "Gender", "Neutral", "Shouted"
        );
        for row in &self.rows {
            let lines = [
                ("Male", row.neutral.male, row.shouted.male),
                ("Female", row.neutral.female, row.shouted.female),
                ("Average", row.neutral.average, row.shouted.average),
            ];
            for (i, (label, n, s)) in lines.into_iter().enumerate() {
                let name = if i == 0 { row.variant.name() } else { "" };
                let _ = writeln!(out, "{name:<9} {label:<8} {:>8} {:>8}", cell(n), cell(s));
            }
        }
        out
    }
}

impl ComparisonReport {
    /// Accuracy grid followed by the improvement table.
    pub fn to_text(&self) -> String {
        let mut out = self.grid.to_text(self.scoring);
        let _ = writeln!(out);
        let _ = writeln!(
            out,
            "Improvement rate of {} over each model (%)",
            self.reference
        );
        let _ = writeln!(out, "{:<9} {:>8} {:>8}", "Model", "Neutral", "Shouted");
        for imp in &self.improvements {
            let _ = write!(
                out,
                "{:<9} {:>8} {:>8}",
                imp.base.name(),
                cell(imp.neutral),
                cell(imp.shouted)
            );
            if let Some([n, s]) = imp.expected {
                let verdict = if imp.discrepancy {
                    "MISMATCH"
                } else {
                    "matches"
                };
                let _ = write!(out, "  expected {n:.1} / {s:.1}: {verdict}");
            }
            out.push('\n');
        }
        out
    }

    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("report serializes");
        s.push('\n');
        s
    }
}
