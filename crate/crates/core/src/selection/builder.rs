use std::collections::BTreeSet;

use super::strategy::StrategyConfig;
use super::{SelectionError, SelectionParams, SelectionState};
use crate::qubo::QuboMatrix;

/// Redundancy weight used by anti-clustering strategies for pairs whose
/// similarity exceeds `tau`.
pub const ANTI_CLUSTER_WEIGHT: f64 = 0.3;

/// Clients whose cumulative selection count has reached `max_selections`.
pub fn apply_max_selection_exclusion(state: &SelectionState, max_selections: usize) -> BTreeSet<usize> {
    state
        .counts
        .iter()
        .enumerate()
        .filter(|(_, &c)| c >= max_selections)
        .map(|(i, _)| i)
        .collect()
}

/// Effective redundancy weight for a pair with similarity `s`.
pub fn redundancy_weight(strat: &StrategyConfig, tau: f64, s: f64) -> f64 {
    if strat.anti_clustering && s > tau {
        ANTI_CLUSTER_WEIGHT
    } else {
        strat.lambda_r_s
    }
}

/// Builds the selection QUBO over the candidate pool.
///
/// Linear terms are `-beta_r r_i + lambda_c (1 - 2k)`; each unordered pair
/// gets `2 lambda_c + w S_ij`. The constant `lambda_c k^2` of the expanded
/// cardinality penalty is omitted. With `fairness_counts`, each linear term
/// also gains `fairness_weight (c_i / max_selections) beta_r`.
pub fn build_qubo(
    relevance: &[f64],
    similarity: &[Vec<f64>],
    strat: &StrategyConfig,
    params: &SelectionParams,
    fairness_counts: Option<&[usize]>,
) -> Result<QuboMatrix, SelectionError> {
    let n = relevance.len();
    if similarity.len() != n || similarity.iter().any(|row| row.len() != n) {
        return Err(SelectionError::DimensionMismatch {
            what: "similarity matrix",
            expected: n,
            got: similarity.len(),
        });
    }
    if let Some(counts) = fairness_counts {
        if counts.len() != n {
            return Err(SelectionError::DimensionMismatch {
                what: "fairness counts",
                expected: n,
                got: counts.len(),
            });
        }
    }
    let mut q = QuboMatrix::zeros(n)?;
    let k = params.k as f64;
    for i in 0..n {
        let mut linear = -params.beta_r * relevance[i] + strat.lambda_c * (1.0 - 2.0 * k);
        if let Some(counts) = fairness_counts {
            linear += params.fairness_weight * (counts[i] as f64 / params.max_selections as f64) * params.beta_r;
        }
        q.add_linear(i, linear);
        for (j, &s) in similarity[i].iter().enumerate().skip(i + 1) {
            q.add_pair(i, j, 2.0 * strat.lambda_c + redundancy_weight(strat, params.tau, s) * s);
        }
    }
    Ok(q)
}
