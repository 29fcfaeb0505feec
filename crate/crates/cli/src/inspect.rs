//! `chmm inspect`: readable dump of a model file.

use std::fmt::Write as _;
use std::path::Path;

use chmm::model_io;
use chmm::{AnyModel, Emission, TopologyKind};

use crate::CliError;

fn row(values: &[f64]) -> String {
    values
        .iter()
        .map(|v| format!("{v:8.4}"))
        .collect::<Vec<_>>()
        .join(" ")
}

fn topology(kind: TopologyKind) -> String {
    match kind {
        TopologyKind::LeftToRight { skip_width } => {
            format!("left-to-right (skip width {skip_width})")
        }
        TopologyKind::Circular => "circular".into(),
        TopologyKind::Explicit => "explicit mask".into(),
    }
}

pub fn render(model: &AnyModel, training: Option<&model_io::TrainingMeta>) -> String {
    let n = model.n_states();
    let mut s = String::new();
    let _ = writeln!(s, "order      {}", model.order().as_u8());
    let _ = writeln!(s, "topology   {}", topology(model.mask().kind()));
    let _ = writeln!(s, "states     {n}");
    if let Some(t) = training {
        let _ = writeln!(
            s,
            "training   {} iterations, {}, log-likelihood {:.4}, config {}",
            t.iterations_run,
            if t.converged {
                "converged"
            } else {
                "not converged"
            },
            t.final_log_likelihood,
            t.config_hash
        );
    }
    let _ = writeln!(s, "\ninitial\n  {}", row(model.initial()));
    match model {
        AnyModel::First(m) => {
            let _ = writeln!(s, "\ntransitions a[i][j]");
            for i in 0..n {
                let _ = writeln!(s, "  {}", row(m.trans_row(i)));
            }
        }
        AnyModel::Second(m) => {
            let _ = writeln!(s, "\nfirst-step transitions a[i][j]");
            for i in 0..n {
                let _ = writeln!(s, "  {}", row(&m.trans1_matrix()[i * n..(i + 1) * n]));
            }
            let _ = writeln!(
                s,
                "\nsecond-order transitions a[i][j][k], rows of reachable pairs"
            );
            for i in 0..n {
                for j in 0..n {
                    if m.mask().allows(i, j) {
                        let _ = writeln!(s, "  ({i},{j}) {}", row(m.trans2_row(i, j)));
                    }
                }
            }
        }
    }
    for (j, e) in model.emissions().iter().enumerate() {
        let _ = writeln!(s, "\nstate {j}");
        match e {
            Emission::Gmm(g) => {
                for m in 0..g.n_components() {
                    let _ = writeln!(s, "  weight {:.4}", g.weights[m]);
                    let _ = writeln!(s, "    mean     {}", row(&g.means[m]));
                    let _ = writeln!(s, "    variance {}", row(&g.variances[m]));
                }
            }
            Emission::Discrete(d) => {
                let _ = writeln!(s, "  symbols {}", row(&d.probs));
            }
        }
    }
    s
}

pub fn run(path: &Path) -> Result<(), CliError> {
    let file = model_io::load(path)?;
    print!("{}", render(&file.model, file.training.as_ref()));
    Ok(())
}
