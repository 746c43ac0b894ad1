//! Label-skewed client partitioning and the server's validation hold-out.

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Gamma};

use super::SimError;
use crate::seed::derive_seed;

/// Draws `p ~ Dirichlet(alpha, ..., alpha)` of dimension `n`.
///
/// Small concentrations underflow a direct Gamma draw to zero, so each
/// component is sampled in log space as `ln G(alpha + 1) + ln(U) / alpha`
/// and normalized with log-sum-exp.
pub fn sample_dirichlet<R: Rng>(alpha: f64, n: usize, rng: &mut R) -> Vec<f64> {
    let gamma = Gamma::new(alpha + 1.0, 1.0).expect("alpha > 0");
    let logs: Vec<f64> = (0..n)
        .map(|_| {
            let g: f64 = gamma.sample(rng);
            let u: f64 = rng.random::<f64>().max(f64::MIN_POSITIVE);
            g.max(f64::MIN_POSITIVE).ln() + u.ln() / alpha
        })
        .collect();
    let max = logs.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let weights: Vec<f64> = logs.iter().map(|l| (l - max).exp()).collect();
    let total: f64 = weights.iter().sum();
    weights.iter().map(|w| w / total).collect()
}

/// Splits `total` items by `proportions` with largest-remainder rounding;
/// leftover units go to the largest fractional parts, ties to lower index.
fn largest_remainder(proportions: &[f64], total: usize) -> Vec<usize> {
    let exact: Vec<f64> = proportions.iter().map(|p| p * total as f64).collect();
    let mut counts: Vec<usize> = exact.iter().map(|e| e.floor() as usize).collect();
    let assigned: usize = counts.iter().sum();
    let mut order: Vec<usize> = (0..proportions.len()).collect();
    order.sort_by(|&a, &b| {
        let fa = exact[a] - exact[a].floor();
        let fb = exact[b] - exact[b].floor();
        fb.total_cmp(&fa).then(a.cmp(&b))
    });
    for &i in order.iter().take(total.saturating_sub(assigned)) {
        counts[i] += 1;
    }
    counts
}

/// Partitions sample indices over `n_clients` with per-class Dirichlet
/// proportions. Clients left empty take one sample from the currently
/// largest client.
pub fn dirichlet_partition(labels: &[usize], n_clients: usize, alpha: f64, seed: u64) -> Result<Vec<Vec<usize>>, SimError> {
    if n_clients == 0 {
        return Err(SimError::InvalidConfig("n_clients must be positive"));
    }
    if !(alpha > 0.0 && alpha.is_finite()) {
        return Err(SimError::InvalidConfig("alpha must be positive"));
    }
    if labels.len() < n_clients {
        return Err(SimError::TooFewSamples {
            samples: labels.len(),
            clients: n_clients,
        });
    }

    let classes = labels.iter().max().map_or(0, |m| m + 1);
    let mut by_class: Vec<Vec<usize>> = vec![Vec::new(); classes];
    for (i, &l) in labels.iter().enumerate() {
        by_class[l].push(i);
    }

    let mut parts: Vec<Vec<usize>> = vec![Vec::new(); n_clients];
    for (c, mut members) in by_class.into_iter().enumerate() {
        if members.is_empty() {
            continue;
        }
        let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(seed, &[c as u64]));
        members.shuffle(&mut rng);
        let p = sample_dirichlet(alpha, n_clients, &mut rng);
        let counts = largest_remainder(&p, members.len());
        let mut start = 0;
        for (client, &count) in counts.iter().enumerate() {
            parts[client].extend_from_slice(&members[start..start + count]);
            start += count;
        }
    }

    while let Some(empty) = parts.iter().position(|p| p.is_empty()) {
        let donor = (0..n_clients)
            .max_by(|&a, &b| parts[a].len().cmp(&parts[b].len()).then(b.cmp(&a)))
            .expect("n_clients > 0");
        let moved = parts[donor].pop().expect("donor holds at least two samples");
        parts[empty].push(moved);
    }
    for p in &mut parts {
        p.sort_unstable();
    }
    Ok(parts)
}

/// Holds out `fraction` of each class. Returns `(kept, held_out)`, both
/// sorted.
pub fn stratified_split(labels: &[usize], fraction: f64, seed: u64) -> (Vec<usize>, Vec<usize>) {
    let classes = labels.iter().max().map_or(0, |m| m + 1);
    let mut kept = Vec::new();
    let mut held = Vec::new();
    for c in 0..classes {
        let mut members: Vec<usize> = (0..labels.len()).filter(|&i| labels[i] == c).collect();
        let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(seed, &[c as u64]));
        members.shuffle(&mut rng);
        let take = (fraction * members.len() as f64).round() as usize;
        held.extend_from_slice(&members[..take]);
        kept.extend_from_slice(&members[take..]);
    }
    kept.sort_unstable();
    held.sort_unstable();
    (kept, held)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn balanced_labels(classes: usize, per_class: usize) -> Vec<usize> {
        (0..classes * per_class).map(|i| i % classes).collect()
    }

    fn assert_partition(parts: &[Vec<usize>], n: usize) {
        let mut all: Vec<usize> = parts.iter().flatten().copied().collect();
        all.sort_unstable();
        assert_eq!(all, (0..n).collect::<Vec<_>>());
    }

    #[test]
    fn dirichlet_sums_to_one() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for alpha in [0.001, 0.1, 1.0, 100.0] {
            let p = sample_dirichlet(alpha, 20, &mut rng);
            assert!((p.iter().sum::<f64>() - 1.0).abs() < 1e-12);
            assert!(p.iter().all(|v| v.is_finite() && *v >= 0.0));
        }
    }

    #[test]
    fn largest_remainder_exact_total() {
        assert_eq!(largest_remainder(&[0.5, 0.5], 3), vec![2, 1]);
        assert_eq!(largest_remainder(&[0.2, 0.3, 0.5], 10), vec![2, 3, 5]);
        assert_eq!(largest_remainder(&[1.0 / 3.0; 3], 10).iter().sum::<usize>(), 10);
    }

    #[test]
    fn large_alpha_splits_evenly() {
        let labels = balanced_labels(4, 100);
        let parts = dirichlet_partition(&labels, 2, 1e6, 5).unwrap();
        assert_partition(&parts, labels.len());
        for part in &parts {
            for c in 0..4 {
                let count = part.iter().filter(|&&i| labels[i] == c).count();
                assert!((48..=52).contains(&count), "class {c}: {count}");
            }
        }
    }

    #[test]
    fn tiny_alpha_is_near_one_hot() {
        let labels = balanced_labels(10, 100);
        let parts = dirichlet_partition(&labels, 10, 0.001, 17).unwrap();
        assert_partition(&parts, labels.len());
        let uniform = (10f64).ln();
        let mean_entropy: f64 = parts
            .iter()
            .map(|p| {
                let mut h = [0usize; 10];
                p.iter().for_each(|&i| h[labels[i]] += 1);
                let n = p.len() as f64;
                -h.iter()
                    .filter(|&&c| c > 0)
                    .map(|&c| (c as f64 / n) * (c as f64 / n).ln())
                    .sum::<f64>()
            })
            .sum::<f64>()
            / parts.len() as f64;
        assert!(mean_entropy < 0.25 * uniform, "{mean_entropy}");
    }

    #[test]
    fn empty_clients_are_repaired() {
        let labels = balanced_labels(2, 10);
        let parts = dirichlet_partition(&labels, 15, 0.001, 1).unwrap();
        assert!(parts.iter().all(|p| !p.is_empty()));
        assert_partition(&parts, labels.len());
    }

    #[test]
    fn partition_errors() {
        assert!(matches!(
            dirichlet_partition(&[0, 1], 3, 1.0, 0),
            Err(SimError::TooFewSamples { samples: 2, clients: 3 })
        ));
        assert!(dirichlet_partition(&[0, 1], 0, 1.0, 0).is_err());
        assert!(dirichlet_partition(&[0, 1], 1, 0.0, 0).is_err());
    }

    #[test]
    fn partition_is_deterministic() {
        let labels = balanced_labels(5, 40);
        assert_eq!(
            dirichlet_partition(&labels, 7, 0.1, 9).unwrap(),
            dirichlet_partition(&labels, 7, 0.1, 9).unwrap()
        );
    }

    #[test]
    fn stratified_split_holds_out_each_class() {
        let labels = balanced_labels(4, 50);
        let (kept, held) = stratified_split(&labels, 0.1, 2);
        assert_eq!(held.len(), 20);
        assert_eq!(kept.len() + held.len(), 200);
        for c in 0..4 {
            assert_eq!(held.iter().filter(|&&i| labels[i] == c).count(), 5);
        }
    }
}
