use std::collections::BTreeSet;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::model::{accuracy_and_loss, loss_and_grad, GlobalModel};
use super::SimError;
use crate::data::Dataset;
use crate::selection::ClientUpdate;

#[derive(Debug, Clone, PartialEq)]
pub struct TrainConfig {
    /// Mini-batch SGD steps per client per round.
    pub local_iterations: usize,
    pub batch_size: usize,
    pub client_lr: f64,
    pub server_lr_fedavg: f64,
    pub server_lr_qubo: f64,
    pub rounds: usize,
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            local_iterations: 20,
            batch_size: 32,
            client_lr: 0.1,
            server_lr_fedavg: 0.065,
            server_lr_qubo: 0.082,
            rounds: 20,
            seed: 0,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<(), SimError> {
        if self.batch_size == 0 {
            return Err(SimError::InvalidConfig("batch_size must be positive"));
        }
        for lr in [self.client_lr, self.server_lr_fedavg, self.server_lr_qubo] {
            if !(lr > 0.0 && lr.is_finite()) {
                return Err(SimError::InvalidConfig("learning rates must be positive"));
            }
        }
        Ok(())
    }
}

/// Runs `local_iterations` SGD steps from the global parameters and returns
/// the resulting parameter delta. Batches walk a seeded shuffle of the
/// client's data cyclically.
pub fn local_train(
    global: &GlobalModel,
    data: &Dataset,
    cfg: &TrainConfig,
    client_id: usize,
    seed: u64,
) -> Result<ClientUpdate, SimError> {
    if data.is_empty() {
        return Err(SimError::EmptyDataset);
    }
    global.check_data(data)?;
    let mut order: Vec<usize> = (0..data.len()).collect();
    order.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));

    let batch = cfg.batch_size.min(data.len());
    let mut model = global.clone();
    let mut cursor = 0;
    let mut indices = Vec::with_capacity(batch);
    for _ in 0..cfg.local_iterations {
        indices.clear();
        for _ in 0..batch {
            indices.push(order[cursor]);
            cursor = (cursor + 1) % order.len();
        }
        let (_, grad) = loss_and_grad(&model, data, &indices);
        for (w, g) in model.params.iter_mut().zip(&grad) {
            *w -= cfg.client_lr * g;
        }
    }

    let delta = model.params.iter().zip(&global.params).map(|(new, old)| new - old).collect();
    Ok(ClientUpdate::new(client_id, delta, data.len()))
}

/// Sample-weighted average of the selected deltas, scaled by `server_lr`
/// and added to the global parameters. Summation runs in ascending client
/// id order regardless of list order.
pub fn fedavg_aggregate(
    global: &GlobalModel,
    updates: &[ClientUpdate],
    selected: &[usize],
    server_lr: f64,
) -> Result<GlobalModel, SimError> {
    let ids: BTreeSet<usize> = selected.iter().copied().collect();
    if ids.is_empty() {
        return Err(SimError::EmptySelection);
    }
    let mut chosen = Vec::with_capacity(ids.len());
    for &id in &ids {
        let u = updates
            .iter()
            .find(|u| u.client_id == id)
            .ok_or(SimError::UnknownClient(id))?;
        if u.delta.len() != global.params.len() {
            return Err(SimError::ParamCount {
                expected: global.params.len(),
                got: u.delta.len(),
            });
        }
        chosen.push(u);
    }
    let total: usize = chosen.iter().map(|u| u.num_samples).sum();
    if total == 0 {
        return Err(SimError::EmptyDataset);
    }

    let mut avg = vec![0.0; global.params.len()];
    for u in chosen {
        let weight = u.num_samples as f64 / total as f64;
        for (a, d) in avg.iter_mut().zip(&u.delta) {
            *a += weight * d;
        }
    }
    let params = global.params.iter().zip(&avg).map(|(w, a)| w + server_lr * a).collect();
    Ok(GlobalModel {
        params,
        arch: global.arch,
    })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Evaluation {
    pub accuracy: f64,
    pub loss: f64,
}

/// Top-1 accuracy (ties to the lowest class) and mean cross-entropy.
pub fn evaluate(model: &GlobalModel, test: &Dataset) -> Result<Evaluation, SimError> {
    if test.is_empty() {
        return Err(SimError::EmptyDataset);
    }
    model.check_data(test)?;
    let (accuracy, loss) = accuracy_and_loss(model, test);
    Ok(Evaluation { accuracy, loss })
}
