mod common;

use chmm::training::{
    baum_welch1, baum_welch2, init_circular1, init_circular2, init_ltr1, init_ltr2,
    segmental_kmeans_init, train, Floors, ModelSpec, TrainConfig,
};
use chmm::{
    DiscreteDist, Emission, EmissionSpec, Error, Frames, Hmm1Model, Hmm2Model, ModelOrder,
    Observations, TopologyKind, TopologyMask,
};
use common::{
    emission_prob, random_hmm1, random_hmm2, random_obs, rng, unscaled_backward1,
    unscaled_forward1, EmKind, OwnedObs, Topo,
};
use rand::Rng;

fn views(set: &[OwnedObs]) -> Vec<Observations<'_>> {
    set.iter().map(OwnedObs::view).collect()
}

fn fixed_iterations(n: usize) -> TrainConfig {
    TrainConfig {
        max_iterations: n,
        rel_tol: 1e-300,
        ..TrainConfig::default()
    }
}

fn loose_floors(n: usize) -> TrainConfig {
    TrainConfig {
        floors: Floors {
            variance: 1e-300,
            mixture_weight: 1e-300,
            transition: 1e-300,
        },
        ..fixed_iterations(n)
    }
}

fn full_two_state(initial: Vec<f64>, trans: Vec<f64>, probs: [Vec<f64>; 2]) -> Hmm1Model {
    let mask = TopologyMask::explicit(2, vec![true; 4]).unwrap();
    let emissions = probs
        .into_iter()
        .map(|p| Emission::Discrete(DiscreteDist { probs: p }))
        .collect();
    Hmm1Model::new(mask, initial, trans, emissions).unwrap()
}

#[test]
fn first_update_matches_direct_ratio_of_tables() {
    let model = full_two_state(
        vec![0.6, 0.4],
        vec![0.7, 0.3, 0.25, 0.75],
        [vec![0.5, 0.3, 0.2], vec![0.1, 0.4, 0.5]],
    );
    let obs = OwnedObs::Symbols(vec![0, 2, 1, 1, 0, 2, 2]);
    let alpha = unscaled_forward1(&model, &obs);
    let beta = unscaled_backward1(&model, &obs, 1.0);
    let len = obs.len();
    let b = |t: usize, j: usize| emission_prob(&model.emissions()[j], &obs, t);

    let report = baum_welch1(model.clone(), &[obs.view()], &fixed_iterations(1)).unwrap();
    assert_eq!(report.iterations_run, 1);
    let trained = &report.model;
    for i in 0..2 {
        let den: f64 = (0..len - 1).map(|t| alpha[t][i] * beta[t][i]).sum();
        for j in 0..2 {
            let num: f64 = (0..len - 1)
                .map(|t| alpha[t][i] * model.trans(i, j) * b(t + 1, j) * beta[t + 1][j])
                .sum();
            let expected = num / den;
            assert!(
                (trained.trans(i, j) - expected).abs() < 1e-12,
                "a[{i}][{j}] = {} vs {expected}",
                trained.trans(i, j)
            );
        }
    }
    let p: f64 = (0..2).map(|i| alpha[len - 1][i]).sum();
    for i in 0..2 {
        let expected = alpha[0][i] * beta[0][i] / p;
        assert!((trained.initial()[i] - expected).abs() < 1e-12);
    }
    let OwnedObs::Symbols(symbols) = &obs else {
        unreachable!()
    };
    for i in 0..2 {
        let occ: Vec<f64> = (0..len).map(|t| alpha[t][i] * beta[t][i] / p).collect();
        let total: f64 = occ.iter().sum();
        let probs = &trained.emissions()[i].as_discrete().unwrap().probs;
        for s in 0..3 {
            let hit: f64 = (0..len).filter(|&t| symbols[t] == s).map(|t| occ[t]).sum();
            assert!((probs[s] - hit / total).abs() < 1e-12);
        }
    }
}

fn assert_monotone(lls: &[f64], label: &str) {
    for w in lls.windows(2) {
        assert!(
            w[1] - w[0] >= -1e-8,
            "{label}: log-likelihood fell from {} to {}",
            w[0],
            w[1]
        );
    }
}

const KINDS: [EmKind; 2] = [
    EmKind::Discrete { symbols: 4 },
    EmKind::Gmm {
        mixtures: 2,
        dim: 3,
    },
];

#[test]
fn likelihood_never_decreases() {
    let mut r = rng(11);
    for topo in [Topo::Ltr, Topo::Circular] {
        for kind in KINDS {
            for trial in 0..4 {
                let n = 3 + trial % 2;
                let set: Vec<OwnedObs> = (0..3).map(|_| random_obs(&mut r, kind, 12)).collect();
                let m1 = random_hmm1(&mut r, topo, n, kind);
                let rep1 = baum_welch1(m1, &views(&set), &fixed_iterations(10)).unwrap();
                assert_eq!(rep1.log_likelihoods.len(), 11);
                assert_monotone(&rep1.log_likelihoods, &format!("order 1 {topo:?} {kind:?}"));
                let m2 = random_hmm2(&mut r, topo, n, kind);
                let rep2 = baum_welch2(m2, &views(&set), &fixed_iterations(10)).unwrap();
                assert_monotone(&rep2.log_likelihoods, &format!("order 2 {topo:?} {kind:?}"));
            }
        }
    }
}

fn check_floors(emissions: &[Emission], floors: &Floors, var_floor: f64) {
    for e in emissions {
        match e {
            Emission::Discrete(d) => assert!(d.probs.iter().all(|&p| p >= floors.mixture_weight)),
            Emission::Gmm(g) => {
                assert!(g.weights.iter().all(|&w| w >= floors.mixture_weight));
                assert!(g.variances.iter().flatten().all(|&v| v >= var_floor));
            }
        }
    }
}

#[test]
fn mask_stochasticity_and_floors_hold_after_every_iteration() {
    let mut r = rng(12);
    let config = TrainConfig::default();
    for topo in [Topo::Ltr, Topo::Circular] {
        for kind in KINDS {
            let set: Vec<OwnedObs> = (0..2).map(|_| random_obs(&mut r, kind, 10)).collect();
            // frames are uniform on [-2, 2): per-dimension variance is near 4/3
            let var_floor = 1e-4 * 0.5;
            let mut m1 = random_hmm1(&mut r, topo, 4, kind);
            let mut m2 = random_hmm2(&mut r, topo, 4, kind);
            for _ in 0..4 {
                m1 = baum_welch1(m1, &views(&set), &fixed_iterations(1))
                    .unwrap()
                    .model;
                assert!(m1.is_valid(), "{:?}", m1.validate());
                let mask = m1.mask();
                for i in 0..4 {
                    for j in 0..4 {
                        if mask.allows(i, j) {
                            assert!(m1.trans(i, j) >= config.floors.transition);
                        } else {
                            assert_eq!(m1.trans(i, j), 0.0);
                        }
                    }
                }
                check_floors(m1.emissions(), &config.floors, var_floor);

                m2 = baum_welch2(m2, &views(&set), &fixed_iterations(1))
                    .unwrap()
                    .model;
                assert!(m2.is_valid(), "{:?}", m2.validate());
                let mask = m2.mask();
                for i in 0..4 {
                    for j in 0..4 {
                        for k in 0..4 {
                            if mask.allows(i, j) && mask.allows(j, k) {
                                assert!(m2.trans2(i, j, k) >= config.floors.transition);
                            } else {
                                assert_eq!(m2.trans2(i, j, k), 0.0);
                            }
                        }
                        if mask.allows(i, j) {
                            let s: f64 = m2.trans2_row(i, j).iter().sum();
                            assert!((s - 1.0).abs() < 1e-9);
                        }
                    }
                }
                check_floors(m2.emissions(), &config.floors, var_floor);
            }
        }
    }
}

#[test]
fn reestimation_ignores_backward_terminal_constant() {
    let mut r = rng(13);
    for kind in KINDS {
        let ring = random_hmm1(&mut r, Topo::Circular, 4, kind);
        let same_mask = TopologyMask::explicit(4, ring.mask().allowed_matrix().to_vec()).unwrap();
        assert_eq!(ring.mask().backward_terminal(), 0.25);
        assert_eq!(same_mask.backward_terminal(), 1.0);
        let plain = Hmm1Model::new(
            same_mask,
            ring.initial().to_vec(),
            ring.trans_matrix().to_vec(),
            ring.emissions().to_vec(),
        )
        .unwrap();
        let set: Vec<OwnedObs> = (0..2).map(|_| random_obs(&mut r, kind, 9)).collect();
        let a = baum_welch1(ring, &views(&set), &fixed_iterations(1))
            .unwrap()
            .model;
        let b = baum_welch1(plain, &views(&set), &fixed_iterations(1))
            .unwrap()
            .model;
        let close = |x: &[f64], y: &[f64]| x.iter().zip(y).all(|(p, q)| (p - q).abs() < 1e-12);
        assert!(close(a.initial(), b.initial()));
        assert!(close(a.trans_matrix(), b.trans_matrix()));
        for (ea, eb) in a.emissions().iter().zip(b.emissions()) {
            match (ea, eb) {
                (Emission::Discrete(x), Emission::Discrete(y)) => {
                    assert!(close(&x.probs, &y.probs))
                }
                (Emission::Gmm(x), Emission::Gmm(y)) => {
                    assert!(close(&x.weights, &y.weights));
                    assert!(close(&x.means.concat(), &y.means.concat()));
                    assert!(close(&x.variances.concat(), &y.variances.concat()));
                }
                _ => unreachable!(),
            }
        }
    }
}

/// One EM step on the pair-state embedding with emissions tied to the
/// source state, written directly over unscaled tables.
fn tied_embedding_step(emb: &Hmm1Model, source_n: usize, set: &[OwnedObs]) -> (Hmm1Model, f64) {
    let s = emb.n_states();
    let emits = |e: usize| {
        if e < source_n {
            e
        } else {
            (e - source_n) % source_n
        }
    };
    let n_symbols = emb.emissions()[0].as_discrete().unwrap().n_symbols();
    let mut first = vec![0.0; s];
    let mut trans = vec![0.0; s * s];
    let mut sym = vec![vec![0.0; n_symbols]; source_n];
    let mut ll = 0.0;
    for obs in set {
        let alpha = unscaled_forward1(emb, obs);
        let beta = unscaled_backward1(emb, obs, 1.0);
        let len = obs.len();
        let p: f64 = alpha[len - 1].iter().sum();
        ll += p.ln();
        let OwnedObs::Symbols(symbols) = obs else {
            unreachable!()
        };
        for t in 0..len {
            for e in 0..s {
                let g = alpha[t][e] * beta[t][e] / p;
                if t == 0 {
                    first[e] += g;
                }
                sym[emits(e)][symbols[t]] += g;
                if t + 1 < len {
                    for f in 0..s {
                        trans[e * s + f] += alpha[t][e]
                            * emb.trans(e, f)
                            * emission_prob(&emb.emissions()[f], obs, t + 1)
                            * beta[t + 1][f]
                            / p;
                    }
                }
            }
        }
    }
    let total: f64 = first.iter().sum();
    let initial: Vec<f64> = first.iter().map(|v| v / total).collect();
    let mut new_trans = emb.trans_matrix().to_vec();
    for e in 0..s {
        let row = &trans[e * s..(e + 1) * s];
        let row_total: f64 = row.iter().sum();
        if row_total > 0.0 {
            for f in 0..s {
                new_trans[e * s + f] = row[f] / row_total;
            }
        }
    }
    let tied: Vec<DiscreteDist> = sym
        .iter()
        .map(|c| {
            let t: f64 = c.iter().sum();
            DiscreteDist {
                probs: c.iter().map(|v| v / t).collect(),
            }
        })
        .collect();
    let emissions = (0..s)
        .map(|e| Emission::Discrete(tied[emits(e)].clone()))
        .collect();
    (
        Hmm1Model::new(emb.mask().clone(), initial, new_trans, emissions).unwrap(),
        ll,
    )
}

#[test]
fn second_order_training_matches_tied_embedding() {
    let mut r = rng(14);
    let kind = EmKind::Discrete { symbols: 3 };
    for topo in [Topo::Circular, Topo::Ltr] {
        let n = 3;
        let model = random_hmm2(&mut r, topo, n, kind);
        let set: Vec<OwnedObs> = (0..2).map(|_| random_obs(&mut r, kind, 6)).collect();
        let iterations = 5;
        let report = baum_welch2(model.clone(), &views(&set), &loose_floors(iterations)).unwrap();

        let mut emb = model.pair_state_embedding();
        let mut lls = Vec::new();
        for _ in 0..=iterations {
            let (next, ll) = tied_embedding_step(&emb, n, &set);
            lls.push(ll);
            // the left-to-right start distribution is held fixed
            emb = if topo == Topo::Ltr {
                Hmm1Model::new(
                    next.mask().clone(),
                    emb.initial().to_vec(),
                    next.trans_matrix().to_vec(),
                    next.emissions().to_vec(),
                )
                .unwrap()
            } else {
                next
            };
        }
        for (k, (a, b)) in report.log_likelihoods.iter().zip(&lls).enumerate() {
            assert!((a - b).abs() < 1e-8, "{topo:?} iteration {k}: {a} vs {b}");
        }
    }
}

#[test]
fn single_state_models_converge_immediately() {
    let obs = OwnedObs::Symbols(vec![0, 1, 1, 2, 1, 0]);
    let model = init_ltr1(1, 1, &EmissionSpec::Discrete { n_symbols: 3 }).unwrap();
    let report = baum_welch1(model, &[obs.view()], &TrainConfig::default()).unwrap();
    assert!(report.converged);
    assert_eq!(report.model.trans(0, 0), 1.0);
    let probs = &report.model.emissions()[0].as_discrete().unwrap().probs;
    assert!((probs[1] - 0.5).abs() < 1e-12);
    // after the first update only the fixed point check remains
    assert_eq!(report.iterations_run, 2);
    assert_eq!(report.log_likelihoods[1], report.log_likelihoods[2]);

    let mut r = rng(15);
    let data: Vec<f64> = (0..40).map(|_| r.random_range(-1.0..1.0)).collect();
    let frames = Observations::Frames(Frames::new(&data, 2));
    for order in [ModelOrder::First, ModelOrder::Second] {
        let spec = ModelSpec {
            order,
            topology: TopologyKind::LeftToRight { skip_width: 1 },
            n_states: 1,
            emission: EmissionSpec::Gmm {
                n_mixtures: 1,
                dim: 2,
            },
        };
        // k-means on one state and one mixture is already the fitted Gaussian
        let report = train(&spec, &[frames], &TrainConfig::default()).unwrap();
        assert!(report.converged);
        assert_eq!(report.iterations_run, 1, "{order:?}");
    }
}

#[test]
fn planted_clusters_are_recovered() {
    let centers = [[-5.0, 2.0], [4.0, -3.0]];
    let offsets = [[0.3, 0.1], [-0.3, -0.1], [0.1, -0.2], [-0.1, 0.2]];
    let mut data = Vec::new();
    for c in centers {
        for o in offsets {
            data.extend([c[0] + o[0], c[1] + o[1]]);
        }
    }
    for seed in 0..10 {
        let config = TrainConfig {
            seed,
            ..TrainConfig::default()
        };
        let g = segmental_kmeans_init(&[Frames::new(&data, 2)], 1, 2, &config).unwrap();
        let mut means = g[0].means.clone();
        means.sort_by(|a, b| a[0].total_cmp(&b[0]));
        for (m, c) in means.iter().zip(centers) {
            assert!(
                (m[0] - c[0]).abs() < 1e-6 && (m[1] - c[1]).abs() < 1e-6,
                "seed {seed}: {m:?}"
            );
        }
        assert_eq!(g[0].weights, vec![0.5, 0.5]);
    }
}

#[test]
fn kmeans_is_deterministic_per_seed() {
    let mut r = rng(16);
    let data: Vec<f64> = (0..300).map(|_| r.random_range(-3.0..3.0)).collect();
    let f = Frames::new(&data, 3);
    let config = TrainConfig {
        seed: 42,
        ..TrainConfig::default()
    };
    let a = segmental_kmeans_init(&[f], 5, 3, &config).unwrap();
    let b = segmental_kmeans_init(&[f], 5, 3, &config).unwrap();
    assert_eq!(a, b);
}

fn gaussian_set(seed: u64, n_utts: usize, len: usize, dim: usize) -> Vec<OwnedObs> {
    let mut r = rng(seed);
    (0..n_utts)
        .map(|_| {
            let mut data = Vec::with_capacity(len * dim);
            for t in 0..len {
                let level = (t * 5 / len) as f64;
                for d in 0..dim {
                    data.push(
                        level * if d % 2 == 0 { 1.0 } else { -1.0 } + r.random_range(-0.5..0.5),
                    );
                }
            }
            OwnedObs::Frames { data, dim }
        })
        .collect()
}

#[test]
fn full_training_produces_valid_models() {
    let set = gaussian_set(17, 5, 40, 4);
    for (order, topology) in [
        (ModelOrder::Second, TopologyKind::Circular),
        (
            ModelOrder::First,
            TopologyKind::LeftToRight { skip_width: 2 },
        ),
        (ModelOrder::First, TopologyKind::Circular),
        (
            ModelOrder::Second,
            TopologyKind::LeftToRight { skip_width: 2 },
        ),
    ] {
        let spec = ModelSpec {
            order,
            topology,
            n_states: 5,
            emission: EmissionSpec::Gmm {
                n_mixtures: 5,
                dim: 4,
            },
        };
        let report = train(&spec, &views(&set), &TrainConfig::default()).unwrap();
        assert!(
            report.model.validate().is_empty(),
            "{:?}",
            report.model.validate()
        );
        assert_eq!(report.model.order(), order);
        assert_monotone(&report.log_likelihoods, &format!("{order:?} {topology:?}"));
    }
}

#[test]
fn training_errors() {
    let spec = ModelSpec {
        order: ModelOrder::First,
        topology: TopologyKind::Circular,
        n_states: 5,
        emission: EmissionSpec::Gmm {
            n_mixtures: 2,
            dim: 2,
        },
    };
    assert!(matches!(
        train(&spec, &[], &TrainConfig::default()),
        Err(Error::EmptyTrainingSet)
    ));

    let m2 = init_circular2(3, &EmissionSpec::Discrete { n_symbols: 2 }).unwrap();
    let short = [0usize, 1];
    let err = baum_welch2(
        m2,
        &[
            Observations::Symbols(&[0, 1, 1]),
            Observations::Symbols(&short),
        ],
        &TrainConfig::default(),
    )
    .unwrap_err();
    assert!(matches!(
        err,
        Error::UtteranceTooShort {
            utterance: 1,
            frames: 2,
            required: 3
        }
    ));

    let mut m1 = init_circular1(3, &EmissionSpec::Discrete { n_symbols: 2 }).unwrap();
    let never_one = Emission::Discrete(DiscreteDist {
        probs: vec![1.0, 0.0],
    });
    m1 = m1.with_emissions(vec![never_one; 3]).unwrap();
    let err = baum_welch1(
        m1,
        &[
            Observations::Symbols(&[0, 0, 0]),
            Observations::Symbols(&[0, 0, 1, 0]),
        ],
        &TrainConfig::default(),
    )
    .unwrap_err();
    assert!(
        matches!(
            err,
            Error::Training {
                utterance: 1,
                frame: 2
            }
        ),
        "{err:?}"
    );

    let bad: Hmm2Model = {
        let m = init_ltr2(3, 1, &EmissionSpec::Discrete { n_symbols: 2 }).unwrap();
        let mut t1 = m.trans1_matrix().to_vec();
        t1[0] = 0.9;
        Hmm2Model::new(
            m.mask().clone(),
            m.initial().to_vec(),
            t1,
            m.trans2_tensor().to_vec(),
            m.emissions().to_vec(),
        )
        .unwrap()
    };
    let err = baum_welch2(
        bad,
        &[Observations::Symbols(&[0, 1, 1])],
        &TrainConfig::default(),
    )
    .unwrap_err();
    assert!(matches!(err, Error::InvalidModel(_)));
}

#[test]
fn symmetrization_keeps_rows_stochastic() {
    let mut r = rng(18);
    let m = random_hmm1(&mut r, Topo::Circular, 5, EmKind::Discrete { symbols: 3 });
    let s = chmm::training::symmetrize_transitions(&m);
    assert!(s.is_valid(), "{:?}", s.validate());
    for i in 0..5 {
        for j in 0..5 {
            assert_eq!(s.trans(i, j) == 0.0, !m.mask().allows(i, j));
        }
    }
}
