//! Per-client scores derived from the round's updates.

use super::{ClientUpdate, SelectionError};

fn l2(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

fn check_lengths(updates: &[ClientUpdate]) -> Result<usize, SelectionError> {
    let first = updates.first().ok_or(SelectionError::NoUpdates)?;
    let dim = first.delta.len();
    for u in updates {
        if u.delta.len() != dim {
            return Err(SelectionError::LengthMismatch {
                client: u.client_id,
                expected: dim,
                got: u.delta.len(),
            });
        }
        if u.delta.iter().any(|v| !v.is_finite()) {
            return Err(SelectionError::NonFinite(u.client_id));
        }
    }
    Ok(dim)
}

/// Consensus relevance: `r_i = 1 - |d_i - mean| / (max_j |d_j - mean| + eps)`,
/// then min-max normalized to `[0, 1)`.
pub fn relevance_scores(updates: &[ClientUpdate], epsilon: f64) -> Result<Vec<f64>, SelectionError> {
    let dim = check_lengths(updates)?;
    let n = updates.len() as f64;
    let mut mean = vec![0.0; dim];
    for u in updates {
        for (m, v) in mean.iter_mut().zip(&u.delta) {
            *m += v;
        }
    }
    mean.iter_mut().for_each(|m| *m /= n);

    let dist: Vec<f64> = updates
        .iter()
        .map(|u| {
            u.delta
                .iter()
                .zip(&mean)
                .map(|(v, m)| (v - m) * (v - m))
                .sum::<f64>()
                .sqrt()
        })
        .collect();
    let max_dist = dist.iter().cloned().fold(0.0, f64::max);
    let raw: Vec<f64> = dist.iter().map(|d| 1.0 - d / (max_dist + epsilon)).collect();

    let lo = raw.iter().cloned().fold(f64::INFINITY, f64::min);
    let hi = raw.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    Ok(raw.iter().map(|r| (r - lo) / (hi - lo + epsilon)).collect())
}

/// Pairwise cosine similarity with a zero diagonal. A delta whose norm is
/// below `epsilon` is treated as dissimilar to everything.
pub fn similarity_matrix(updates: &[ClientUpdate], epsilon: f64) -> Result<Vec<Vec<f64>>, SelectionError> {
    check_lengths(updates)?;
    let norms: Vec<f64> = updates.iter().map(|u| l2(&u.delta)).collect();
    let n = updates.len();
    let mut s = vec![vec![0.0; n]; n];
    for i in 0..n {
        for j in i + 1..n {
            if norms[i] < epsilon || norms[j] < epsilon {
                continue;
            }
            let dot: f64 = updates[i].delta.iter().zip(&updates[j].delta).map(|(a, b)| a * b).sum();
            let cos = (dot / (norms[i] * norms[j])).clamp(-1.0, 1.0);
            s[i][j] = cos;
            s[j][i] = cos;
        }
    }
    Ok(s)
}

/// Blends normalized relevance with relative update magnitude:
/// `(1 - gamma) r_i + gamma |d_i| / (max_j |d_j| + eps)`.
pub fn magnitude_boosted_relevance(
    r_norm: &[f64],
    updates: &[ClientUpdate],
    gamma: f64,
    epsilon: f64,
) -> Result<Vec<f64>, SelectionError> {
    if r_norm.len() != updates.len() {
        return Err(SelectionError::DimensionMismatch {
            what: "relevance vector",
            expected: updates.len(),
            got: r_norm.len(),
        });
    }
    let norms: Vec<f64> = updates.iter().map(|u| l2(&u.delta)).collect();
    let max_norm = norms.iter().cloned().fold(0.0, f64::max);
    Ok(r_norm
        .iter()
        .zip(&norms)
        .map(|(r, m)| (1.0 - gamma) * r + gamma * m / (max_norm + epsilon))
        .collect())
}

/// Mean over parameter dimensions of the population standard deviation of
/// the selected deltas.
pub fn update_variance(selected: &[&ClientUpdate]) -> Result<f64, SelectionError> {
    let first = selected.first().ok_or(SelectionError::EmptySelection)?;
    let dim = first.delta.len();
    if let Some(bad) = selected.iter().find(|u| u.delta.len() != dim) {
        return Err(SelectionError::LengthMismatch {
            client: bad.client_id,
            expected: dim,
            got: bad.delta.len(),
        });
    }
    if dim == 0 {
        return Ok(0.0);
    }
    let m = selected.len() as f64;
    let mut total = 0.0;
    for d in 0..dim {
        let mean = selected.iter().map(|u| u.delta[d]).sum::<f64>() / m;
        let var = selected.iter().map(|u| (u.delta[d] - mean).powi(2)).sum::<f64>() / m;
        total += var.sqrt();
    }
    Ok(total / dim as f64)
}

/// Composite strategy score weights `(accuracy, redundancy weight, variance)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ScoreWeights {
    pub accuracy: f64,
    pub redundancy: f64,
    pub variance: f64,
}

impl ScoreWeights {
    pub const fn new(accuracy: f64, redundancy: f64, variance: f64) -> Self {
        Self {
            accuracy,
            redundancy,
            variance,
        }
    }
}

pub fn composite_score(accuracy: f64, lambda_r_s: f64, variance: f64, w: ScoreWeights) -> f64 {
    w.accuracy * accuracy + w.redundancy * lambda_r_s - w.variance * variance
}
