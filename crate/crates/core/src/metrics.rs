//! Privacy-preservation proxies and participation statistics.
//!
//! Per-round privacy is the fraction of the pool whose update was not used
//! in that round. Cumulative privacy is reported two ways: the fraction of
//! clients never selected, and one minus the mean participation rate.

use thiserror::Error;

use crate::selection::{update_variance, ClientUpdate, SelectionError, Strategy};

#[derive(Debug, Error, PartialEq)]
pub enum MetricsError {
    #[error("selected size {selected} is outside [0, {n}]")]
    OutOfRange { selected: usize, n: usize },
    #[error("client pool must be non-empty")]
    EmptyPool,
    #[error("history is empty")]
    EmptyHistory,
    #[error("record for round {round} refers to client {client} in a pool of {n}")]
    UnknownClient { round: usize, client: usize, n: usize },
    #[error("record for round {round} was produced for a pool of {found}, expected {expected}")]
    PoolMismatch { round: usize, expected: usize, found: usize },
    #[error("selection is empty")]
    EmptySelection,
    #[error("invalid updates: {0}")]
    InvalidUpdates(String),
}

/// One round of one experiment.
#[derive(Debug, Clone, PartialEq)]
pub struct RoundRecord {
    /// 1-based round number.
    pub round: usize,
    pub n_clients: usize,
    /// Selected client ids, ascending.
    pub selected: Vec<usize>,
    pub winning_strategy: Option<Strategy>,
    pub accuracy: f64,
    pub loss: f64,
    pub per_round_privacy: f64,
    pub gradient_variance: f64,
}

impl RoundRecord {
    pub fn strategy_label(&self) -> &'static str {
        self.winning_strategy.map_or("n/a", Strategy::name)
    }
}

pub fn per_round_privacy(selected_size: usize, n: usize) -> Result<f64, MetricsError> {
    if n == 0 {
        return Err(MetricsError::EmptyPool);
    }
    if selected_size > n {
        return Err(MetricsError::OutOfRange {
            selected: selected_size,
            n,
        });
    }
    Ok(1.0 - selected_size as f64 / n as f64)
}

#[derive(Debug, Clone, PartialEq)]
pub struct ParticipationSummary {
    pub counts: Vec<usize>,
    pub rounds: usize,
    pub never_selected_fraction: f64,
    pub mean_participation_rate: f64,
    pub cumulative_privacy: f64,
}

pub fn participation_summary(history: &[RoundRecord], n: usize) -> Result<ParticipationSummary, MetricsError> {
    if history.is_empty() {
        return Err(MetricsError::EmptyHistory);
    }
    if n == 0 {
        return Err(MetricsError::EmptyPool);
    }
    let mut counts = vec![0usize; n];
    for r in history {
        if r.n_clients != n {
            return Err(MetricsError::PoolMismatch {
                round: r.round,
                expected: n,
                found: r.n_clients,
            });
        }
        for &id in &r.selected {
            *counts.get_mut(id).ok_or(MetricsError::UnknownClient {
                round: r.round,
                client: id,
                n,
            })? += 1;
        }
    }
    let never = counts.iter().filter(|&&c| c == 0).count();
    let total: usize = counts.iter().sum();
    let rate = total as f64 / (n * history.len()) as f64;
    Ok(ParticipationSummary {
        counts,
        rounds: history.len(),
        never_selected_fraction: never as f64 / n as f64,
        mean_participation_rate: rate,
        cumulative_privacy: 1.0 - rate,
    })
}

/// Update spread of the selected clients; see [`update_variance`].
pub fn gradient_variance(updates: &[ClientUpdate], selected: &[usize]) -> Result<f64, MetricsError> {
    let chosen: Vec<&ClientUpdate> = updates.iter().filter(|u| selected.contains(&u.client_id)).collect();
    if chosen.is_empty() {
        return Err(MetricsError::EmptySelection);
    }
    update_variance(&chosen).map_err(|e: SelectionError| MetricsError::InvalidUpdates(e.to_string()))
}

/// Client x alpha matrix of selection counts.
#[derive(Debug, Clone, PartialEq)]
pub struct Heatmap {
    pub alphas: Vec<f64>,
    /// `counts[client][alpha_index]`.
    pub counts: Vec<Vec<usize>>,
}

impl Heatmap {
    pub fn total(&self) -> usize {
        self.counts.iter().flatten().sum()
    }

    /// Delimited text with a `client` column followed by one column per alpha.
    pub fn to_table(&self, delimiter: char) -> String {
        let mut out = String::from("client");
        for a in &self.alphas {
            out.push(delimiter);
            out.push_str(&format!("alpha_{a}"));
        }
        out.push('\n');
        for (client, row) in self.counts.iter().enumerate() {
            out.push_str(&client.to_string());
            for c in row {
                out.push(delimiter);
                out.push_str(&c.to_string());
            }
            out.push('\n');
        }
        out
    }
}

/// Out-of-range client ids are ignored.
pub fn export_heatmap(histories: &[(f64, &[RoundRecord])], n: usize) -> Heatmap {
    let mut counts = vec![vec![0usize; histories.len()]; n];
    for (col, (_, history)) in histories.iter().enumerate() {
        for id in history.iter().flat_map(|r| r.selected.iter()) {
            if let Some(row) = counts.get_mut(*id) {
                row[col] += 1;
            }
        }
    }
    Heatmap {
        alphas: histories.iter().map(|(a, _)| *a).collect(),
        counts,
    }
}

/// Unweighted mean per round index across repeated runs; runs shorter than
/// the longest simply stop contributing.
pub fn mean_by_round(runs: &[Vec<f64>]) -> Vec<f64> {
    let len = runs.iter().map(Vec::len).max().unwrap_or(0);
    (0..len)
        .map(|t| {
            let vals: Vec<f64> = runs.iter().filter_map(|r| r.get(t).copied()).collect();
            vals.iter().sum::<f64>() / vals.len() as f64
        })
        .collect()
}
