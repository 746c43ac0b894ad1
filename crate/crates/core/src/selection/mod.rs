//! QUBO-based client selection.
//!
//! Each round the server scores every update for relevance (closeness to the
//! mean update) and redundancy (pairwise cosine similarity), builds one QUBO
//! per strategy in the bank, solves it, and keeps the selection whose
//! temporarily aggregated model scores best on the validation split.

mod builder;
mod scores;
mod strategy;

use std::collections::BTreeMap;

use thiserror::Error;

use crate::qubo::{self, AnnealParams, QuboError, QuboMatrix};
use crate::seed::derive_seed;

pub use builder::{apply_max_selection_exclusion, build_qubo, redundancy_weight, ANTI_CLUSTER_WEIGHT};
pub use scores::{
    composite_score, magnitude_boosted_relevance, relevance_scores, similarity_matrix, update_variance,
    ScoreWeights,
};
pub use strategy::{strategy_bank, DatasetProfile, Strategy, StrategyConfig};

#[derive(Debug, Error)]
pub enum SelectionError {
    #[error("no client updates supplied")]
    NoUpdates,
    #[error("client {client} update has {got} parameters, expected {expected}")]
    LengthMismatch { client: usize, expected: usize, got: usize },
    #[error("client {0} update contains non-finite values")]
    NonFinite(usize),
    #[error("{what} has dimension {got}, expected {expected}")]
    DimensionMismatch { what: &'static str, expected: usize, got: usize },
    #[error("selection is empty")]
    EmptySelection,
    #[error("client id {0} is outside the selection state")]
    UnknownClient(usize),
    #[error("no selectable clients remain: every strategy produced an empty selection")]
    Infeasible,
    #[error("unknown strategy profile `{0}` (expected mnist or cinic10)")]
    UnknownProfile(String),
    #[error("unknown strategy `{0}`")]
    UnknownStrategy(String),
    #[error("invalid selection parameter: {0}")]
    InvalidParams(&'static str),
    #[error(transparent)]
    Qubo(#[from] QuboError),
}

/// One client's flattened parameter delta for the current round.
#[derive(Debug, Clone, PartialEq)]
pub struct ClientUpdate {
    pub client_id: usize,
    pub delta: Vec<f64>,
    pub num_samples: usize,
}

impl ClientUpdate {
    pub fn new(client_id: usize, delta: Vec<f64>, num_samples: usize) -> Self {
        Self {
            client_id,
            delta,
            num_samples,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SelectionParams {
    /// Relevance scaling.
    pub beta_r: f64,
    /// Target number of selected clients.
    pub k: usize,
    /// Anti-clustering similarity threshold.
    pub tau: f64,
    /// Magnitude-boost blend coefficient.
    pub gamma: f64,
    pub epsilon: f64,
    pub max_selections: usize,
    pub fairness_mode: bool,
    pub fairness_weight: f64,
    pub score_weights: ScoreWeights,
}

impl SelectionParams {
    pub fn for_profile(profile: DatasetProfile, k: usize) -> Self {
        Self {
            beta_r: 3.0,
            k,
            tau: profile.tau(),
            gamma: 0.3,
            epsilon: 1e-8,
            max_selections: usize::MAX,
            fairness_mode: false,
            fairness_weight: 1.0,
            score_weights: profile.score_weights(),
        }
    }

    pub fn validate(&self) -> Result<(), SelectionError> {
        if self.k == 0 {
            return Err(SelectionError::InvalidParams("k must be positive"));
        }
        if !(self.gamma > 0.0 && self.gamma < 1.0) {
            return Err(SelectionError::InvalidParams("gamma must lie in (0, 1)"));
        }
        if !(self.tau > 0.0 && self.tau <= 1.0) {
            return Err(SelectionError::InvalidParams("tau must lie in (0, 1]"));
        }
        if self.epsilon.is_nan() || self.epsilon <= 0.0 {
            return Err(SelectionError::InvalidParams("epsilon must be positive"));
        }
        if self.max_selections == 0 {
            return Err(SelectionError::InvalidParams("max_selections must be positive"));
        }
        if !self.beta_r.is_finite() || !self.fairness_weight.is_finite() {
            return Err(SelectionError::InvalidParams("weights must be finite"));
        }
        Ok(())
    }
}

/// Selection bookkeeping carried across rounds.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SelectionState {
    /// Cumulative selection count per client id.
    pub counts: Vec<usize>,
    pub round_index: usize,
}

impl SelectionState {
    pub fn new(n_clients: usize) -> Self {
        Self {
            counts: vec![0; n_clients],
            round_index: 0,
        }
    }
}

/// How each strategy's QUBO is solved.
#[derive(Debug, Clone, PartialEq)]
pub enum Solver {
    /// Simulated annealing with a per-instance schedule.
    Anneal(AnnealSchedule),
    /// Exhaustive enumeration; only for small pools.
    Exact,
}

/// Annealing settings resolved against each QUBO: the start temperature
/// defaults to the instance's largest coefficient magnitude and the sweep
/// count scales with the number of variables.
#[derive(Debug, Clone, PartialEq)]
pub struct AnnealSchedule {
    pub initial_temperature: Option<f64>,
    pub final_temperature: f64,
    pub sweeps_per_var: usize,
    pub restarts: usize,
    pub seed: u64,
}

impl Default for AnnealSchedule {
    fn default() -> Self {
        Self {
            initial_temperature: None,
            final_temperature: 1e-3,
            sweeps_per_var: 100,
            restarts: 4,
            seed: 0,
        }
    }
}

impl AnnealSchedule {
    pub fn params_for(&self, q: &QuboMatrix, stream: &[u64]) -> AnnealParams {
        let mut p = AnnealParams::for_qubo(q, derive_seed(self.seed, stream));
        if let Some(t0) = self.initial_temperature {
            p.initial_temperature = t0;
        }
        p.final_temperature = self.final_temperature;
        p.sweeps = self.sweeps_per_var * q.n();
        p.restarts = self.restarts;
        p
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct StrategyScore {
    pub strategy: Strategy,
    pub score: f64,
    pub accuracy: f64,
    pub variance: f64,
    pub selected: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SelectionOutcome {
    /// Selected client ids, ascending.
    pub selected: Vec<usize>,
    pub winning_strategy: Strategy,
    /// One entry per strategy, in bank order.
    pub per_strategy: Vec<StrategyScore>,
}

impl SelectionOutcome {
    pub fn winning_score(&self) -> f64 {
        self.per_strategy
            .iter()
            .find(|s| s.strategy == self.winning_strategy)
            .map(|s| s.score)
            .unwrap_or(f64::NEG_INFINITY)
    }
}

/// Top-`k` candidate positions by relevance, ties to the lower position.
fn top_k(relevance: &[f64], k: usize) -> Vec<usize> {
    let mut order: Vec<usize> = (0..relevance.len()).collect();
    order.sort_by(|&a, &b| relevance[b].total_cmp(&relevance[a]).then(a.cmp(&b)));
    order.truncate(k.min(relevance.len()));
    order.sort_unstable();
    order
}

/// Runs the strategy competition for one round and records the winner's
/// selection in `state`.
///
/// `eval_fn` receives the candidate client ids and returns the validation
/// accuracy of the global model after temporarily aggregating them.
pub fn select_clients<F>(
    updates: &[ClientUpdate],
    params: &SelectionParams,
    state: &mut SelectionState,
    bank: &[StrategyConfig],
    solver: &Solver,
    mut eval_fn: F,
) -> Result<SelectionOutcome, SelectionError>
where
    F: FnMut(&[usize]) -> f64,
{
    params.validate()?;
    if updates.is_empty() {
        return Err(SelectionError::NoUpdates);
    }
    if let Some(u) = updates.iter().find(|u| u.client_id >= state.counts.len()) {
        return Err(SelectionError::UnknownClient(u.client_id));
    }
    if bank.is_empty() {
        return Err(SelectionError::InvalidParams("strategy bank is empty"));
    }

    let relevance = relevance_scores(updates, params.epsilon)?;
    let similarity = similarity_matrix(updates, params.epsilon)?;
    let excluded = apply_max_selection_exclusion(state, params.max_selections);

    // Excluded clients are dropped from the variable space entirely.
    let pool: Vec<usize> = (0..updates.len())
        .filter(|&i| !excluded.contains(&updates[i].client_id))
        .collect();
    if pool.is_empty() {
        return Err(SelectionError::Infeasible);
    }
    let pool_sim: Vec<Vec<f64>> = pool
        .iter()
        .map(|&i| pool.iter().map(|&j| similarity[i][j]).collect())
        .collect();
    let pool_rel: Vec<f64> = pool.iter().map(|&i| relevance[i]).collect();
    let pool_counts: Vec<usize> = pool.iter().map(|&i| state.counts[updates[i].client_id]).collect();
    let magnitude = magnitude_boosted_relevance(&relevance, updates, params.gamma, params.epsilon)?;
    let pool_mag: Vec<f64> = pool.iter().map(|&i| magnitude[i]).collect();

    let mut accuracy_cache: BTreeMap<Vec<usize>, f64> = BTreeMap::new();
    let mut per_strategy = Vec::with_capacity(bank.len());
    let mut best: Option<(f64, usize)> = None;

    for (slot, strat) in bank.iter().enumerate() {
        let rel = if strat.magnitude_boost { &pool_mag } else { &pool_rel };
        let fairness = params.fairness_mode.then_some(pool_counts.as_slice());
        let q = build_qubo(rel, &pool_sim, strat, params, fairness)?;
        let x = match solver {
            Solver::Exact => qubo::solve_exact(&q)?,
            Solver::Anneal(schedule) => {
                let p = schedule.params_for(&q, &[state.round_index as u64, slot as u64]);
                qubo::solve_sa(&q, &p)?
            }
        };
        let mut picked = x.ones();
        if picked.is_empty() {
            picked = top_k(&pool_rel, params.k);
        }
        if picked.is_empty() {
            continue;
        }
        let mut ids: Vec<usize> = picked.iter().map(|&p| updates[pool[p]].client_id).collect();
        ids.sort_unstable();

        let chosen: Vec<&ClientUpdate> = picked.iter().map(|&p| &updates[pool[p]]).collect();
        let variance = update_variance(&chosen)?;
        let accuracy = *accuracy_cache
            .entry(ids.clone())
            .or_insert_with(|| eval_fn(&ids));
        let score = composite_score(accuracy, strat.lambda_r_s, variance, params.score_weights);
        if best.is_none_or(|(b, _)| score > b) {
            best = Some((score, per_strategy.len()));
        }
        per_strategy.push(StrategyScore {
            strategy: strat.strategy,
            score,
            accuracy,
            variance,
            selected: ids,
        });
    }

    let (_, winner) = best.ok_or(SelectionError::Infeasible)?;
    let selected = per_strategy[winner].selected.clone();
    for &id in &selected {
        state.counts[id] += 1;
    }
    state.round_index += 1;
    Ok(SelectionOutcome {
        selected,
        winning_strategy: per_strategy[winner].strategy,
        per_strategy,
    })
}
