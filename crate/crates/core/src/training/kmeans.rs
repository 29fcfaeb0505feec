//! Segmental k-means seeding of per-state Gaussian mixtures.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::{floored_normalize, TrainConfig};
use crate::emission::GaussianMixture;
use crate::error::{Error, Result};
use crate::obs::Frames;

const MAX_LLOYD_ITERATIONS: usize = 100;

/// Splits `n_frames` into `n_segments` contiguous ranges of near-equal
/// length; the longer segments come last.
pub fn segment_bounds(n_frames: usize, n_segments: usize) -> Vec<std::ops::Range<usize>> {
    let base = n_frames / n_segments;
    let extra = n_frames % n_segments;
    let mut start = 0;
    (0..n_segments)
        .map(|i| {
            let len = base + usize::from(i >= n_segments - extra);
            let r = start..start + len;
            start += len;
            r
        })
        .collect()
}

/// `rel_floor` times the per-dimension variance of all frames pooled.
/// A dimension with no spread gets `rel_floor` itself.
pub fn variance_floors(utterances: &[Frames<'_>], rel_floor: f64) -> Vec<f64> {
    let dim = utterances[0].dim();
    let mut count = 0usize;
    let mut mean = vec![0.0; dim];
    for f in utterances {
        for x in f.rows() {
            count += 1;
            for (m, &v) in mean.iter_mut().zip(x) {
                *m += v;
            }
        }
    }
    if count == 0 {
        return vec![rel_floor; dim];
    }
    mean.iter_mut().for_each(|m| *m /= count as f64);
    let mut var = vec![0.0; dim];
    for f in utterances {
        for x in f.rows() {
            for d in 0..dim {
                var[d] += (x[d] - mean[d]).powi(2);
            }
        }
    }
    var.iter()
        .map(|v| {
            let v = v / count as f64;
            if v > 0.0 {
                rel_floor * v
            } else {
                rel_floor
            }
        })
        .collect()
}

fn sq_dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

/// k-means++ seeding: first center uniform, later ones with probability
/// proportional to squared distance from the nearest chosen center.
fn seed_centers(points: &[&[f64]], k: usize, rng: &mut ChaCha8Rng) -> Vec<Vec<f64>> {
    let mut centers: Vec<Vec<f64>> = vec![points[rng.random_range(0..points.len())].to_vec()];
    let mut nearest: Vec<f64> = points.iter().map(|p| sq_dist(p, &centers[0])).collect();
    while centers.len() < k {
        let total: f64 = nearest.iter().sum();
        let pick = if total > 0.0 {
            let mut target = rng.random::<f64>() * total;
            let mut idx = points.len() - 1;
            for (i, &d) in nearest.iter().enumerate() {
                if target < d {
                    idx = i;
                    break;
                }
                target -= d;
            }
            idx
        } else {
            rng.random_range(0..points.len())
        };
        let c = points[pick].to_vec();
        for (n, p) in nearest.iter_mut().zip(points) {
            *n = n.min(sq_dist(p, &c));
        }
        centers.push(c);
    }
    centers
}

fn nearest_center(p: &[f64], centers: &[Vec<f64>]) -> usize {
    let mut best = 0;
    let mut best_d = f64::INFINITY;
    for (i, c) in centers.iter().enumerate() {
        let d = sq_dist(p, c);
        if d < best_d {
            best = i;
            best_d = d;
        }
    }
    best
}

/// Lloyd iterations from k-means++ seeds; returns the centers and the
/// cluster of every point.
fn kmeans(points: &[&[f64]], k: usize, rng: &mut ChaCha8Rng) -> (Vec<Vec<f64>>, Vec<usize>) {
    let dim = points[0].len();
    let mut centers = seed_centers(points, k, rng);
    let mut assign: Vec<usize> = points.iter().map(|p| nearest_center(p, &centers)).collect();
    for _ in 0..MAX_LLOYD_ITERATIONS {
        let mut sums = vec![vec![0.0; dim]; k];
        let mut counts = vec![0usize; k];
        for (p, &a) in points.iter().zip(&assign) {
            counts[a] += 1;
            for (s, &v) in sums[a].iter_mut().zip(*p) {
                *s += v;
            }
        }
        for c in 0..k {
            // an empty cluster keeps its previous center
            if counts[c] > 0 {
                centers[c] = sums[c].iter().map(|s| s / counts[c] as f64).collect();
            }
        }
        let next: Vec<usize> = points.iter().map(|p| nearest_center(p, &centers)).collect();
        if next == assign {
            break;
        }
        assign = next;
    }
    (centers, assign)
}

fn variance_of<'a>(points: impl Iterator<Item = &'a [f64]>, mean: &[f64]) -> Option<Vec<f64>> {
    let mut acc = vec![0.0; mean.len()];
    let mut count = 0usize;
    for p in points {
        count += 1;
        for d in 0..mean.len() {
            acc[d] += (p[d] - mean[d]).powi(2);
        }
    }
    (count > 0).then(|| acc.into_iter().map(|v| v / count as f64).collect())
}

/// One Gaussian mixture per state, fitted to the frames that fall in that
/// state's segment of every utterance.
pub fn segmental_kmeans_init(
    utterances: &[Frames<'_>],
    n_states: usize,
    n_mixtures: usize,
    config: &TrainConfig,
) -> Result<Vec<GaussianMixture>> {
    if utterances.is_empty() {
        return Err(Error::EmptyTrainingSet);
    }
    if n_states == 0 || n_mixtures == 0 {
        return Err(Error::InvalidDimension(
            "need at least one state and one mixture".into(),
        ));
    }
    let dim = utterances[0].dim();
    for (u, f) in utterances.iter().enumerate() {
        if f.dim() != dim {
            return Err(Error::DimensionMismatch {
                what: "feature dimension",
                expected: dim,
                found: f.dim(),
            });
        }
        if f.len() < n_states {
            return Err(Error::UtteranceTooShort {
                utterance: u,
                frames: f.len(),
                required: n_states,
            });
        }
    }
    let var_floor = variance_floors(utterances, config.floors.variance);
    let mut pools: Vec<Vec<&[f64]>> = vec![Vec::new(); n_states];
    for f in utterances {
        for (i, seg) in segment_bounds(f.len(), n_states).into_iter().enumerate() {
            pools[i].extend(seg.map(|t| f.row(t)));
        }
    }

    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    pools
        .iter()
        .map(|points| {
            let seg_mean: Vec<f64> = (0..dim)
                .map(|d| points.iter().map(|p| p[d]).sum::<f64>() / points.len() as f64)
                .collect();
            let seg_var =
                variance_of(points.iter().copied(), &seg_mean).expect("segment is nonempty");
            let (centers, assign) = if n_mixtures == 1 {
                (vec![seg_mean.clone()], vec![0; points.len()])
            } else {
                kmeans(points, n_mixtures, &mut rng)
            };
            let mut counts = vec![0.0; n_mixtures];
            let mut variances = Vec::with_capacity(n_mixtures);
            for (c, center) in centers.iter().enumerate() {
                let members = points
                    .iter()
                    .zip(&assign)
                    .filter(|(_, &a)| a == c)
                    .map(|(p, _)| *p);
                counts[c] = assign.iter().filter(|&&a| a == c).count() as f64;
                let var = variance_of(members, center).unwrap_or_else(|| seg_var.clone());
                variances.push(var.iter().zip(&var_floor).map(|(v, f)| v.max(*f)).collect());
            }
            Ok(GaussianMixture {
                weights: floored_normalize(&counts, |_| true, config.floors.mixture_weight),
                means: centers,
                variances,
            })
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn equal_segments() {
        let b = segment_bounds(10, 5);
        assert_eq!(b, vec![0..2, 2..4, 4..6, 6..8, 8..10]);
    }

    #[test]
    fn remainder_goes_to_later_segments() {
        let b = segment_bounds(12, 5);
        assert_eq!(b, vec![0..2, 2..4, 4..6, 6..9, 9..12]);
    }

    #[test]
    fn single_mixture_is_segment_average() {
        let data: Vec<f64> = (0..10).map(|v| v as f64).collect();
        let f = Frames::new(&data, 1);
        let g = segmental_kmeans_init(&[f], 5, 1, &TrainConfig::default()).unwrap();
        assert_eq!(g.len(), 5);
        for (i, mix) in g.iter().enumerate() {
            assert_eq!(mix.weights, vec![1.0]);
            assert_eq!(mix.means[0][0], 2.0 * i as f64 + 0.5);
            assert!((mix.variances[0][0] - 0.25).abs() < 1e-15);
        }
    }

    #[test]
    fn short_utterance_is_named() {
        let long = vec![0.0; 10];
        let short = vec![0.0; 3];
        let err = segmental_kmeans_init(
            &[Frames::new(&long, 1), Frames::new(&short, 1)],
            5,
            1,
            &TrainConfig::default(),
        )
        .unwrap_err();
        assert!(matches!(
            err,
            Error::UtteranceTooShort {
                utterance: 1,
                frames: 3,
                required: 5
            }
        ));
    }

    #[test]
    fn constant_dimension_gets_absolute_floor() {
        let data = vec![1.0, 5.0, 1.0, 7.0];
        let floors = variance_floors(&[Frames::new(&data, 2)], 1e-4);
        assert_eq!(floors[0], 1e-4);
        assert!((floors[1] - 1e-4).abs() < 1e-18);
    }
}
