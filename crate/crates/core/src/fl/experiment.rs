//! Round loop for the three compared methods: full FedAvg, QUBO selection,
//! and random selection matched in size to the QUBO run.

use std::fmt;
use std::str::FromStr;

use rand::seq::index;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::model::{Architecture, GlobalModel};
use super::partition::{dirichlet_partition, stratified_split};
use super::train::{evaluate, fedavg_aggregate, local_train, TrainConfig};
use super::SimError;
use crate::data::Dataset;
use crate::metrics::{gradient_variance, per_round_privacy, RoundRecord};
use crate::seed::derive_seed;
use crate::selection::{
    select_clients, ClientUpdate, SelectionError, SelectionParams, SelectionState, Solver, StrategyConfig,
};

const STREAM_INIT: u64 = 0x1417;
const STREAM_TRAIN: u64 = 0x7a11;
const STREAM_RANDOM: u64 = 0x4a4d;
const STREAM_SPLIT: u64 = 0x5b17;
const STREAM_PARTITION: u64 = 0xd1c7;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Method {
    FedavgFull,
    Qubo,
    Random,
}

impl Method {
    pub const ALL: [Method; 3] = [Method::FedavgFull, Method::Qubo, Method::Random];

    pub fn name(self) -> &'static str {
        match self {
            Method::FedavgFull => "fedavg_full",
            Method::Qubo => "qubo",
            Method::Random => "random",
        }
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Method {
    type Err = SimError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Method::ALL
            .into_iter()
            .find(|m| m.name() == s)
            .ok_or_else(|| SimError::UnknownMethod(s.to_string()))
    }
}

/// Client shards plus the server's validation and test data.
#[derive(Debug, Clone)]
pub struct Federation {
    pub arch: Architecture,
    pub clients: Vec<Dataset>,
    pub validation: Dataset,
    pub test: Dataset,
}

impl Federation {
    /// Holds out a stratified validation split for the server and divides
    /// the rest of `train` over `n_clients` with Dirichlet label skew.
    pub fn partition(
        train: &Dataset,
        test: Dataset,
        n_clients: usize,
        alpha: f64,
        validation_fraction: f64,
        hidden: usize,
        seed: u64,
    ) -> Result<Self, SimError> {
        if !(0.0..1.0).contains(&validation_fraction) {
            return Err(SimError::InvalidConfig("validation_fraction must lie in [0, 1)"));
        }
        if hidden == 0 {
            return Err(SimError::InvalidConfig("hidden width must be positive"));
        }
        let (pool, held) = stratified_split(&train.labels, validation_fraction, derive_seed(seed, &[STREAM_SPLIT]));
        let pool_data = train.subset(&pool);
        let parts = dirichlet_partition(&pool_data.labels, n_clients, alpha, derive_seed(seed, &[STREAM_PARTITION]))?;
        let classes = train.classes.max(test.classes);
        Ok(Self {
            arch: Architecture::new(train.dims, hidden, classes),
            clients: parts.iter().map(|idx| pool_data.subset(idx)).collect(),
            validation: train.subset(&held),
            test,
        })
    }

    pub fn n_clients(&self) -> usize {
        self.clients.len()
    }
}

/// Everything one experiment cell needs.
#[derive(Debug, Clone)]
pub struct ExperimentSetup {
    pub federation: Federation,
    pub train: TrainConfig,
    pub selection: SelectionParams,
    pub bank: Vec<StrategyConfig>,
    pub solver: Solver,
}

impl ExperimentSetup {
    pub fn initial_model(&self) -> GlobalModel {
        GlobalModel::init(self.federation.arch, derive_seed(self.train.seed, &[STREAM_INIT]))
    }

    fn train_client(&self, global: &GlobalModel, round: usize, client: usize) -> Result<ClientUpdate, SimError> {
        let seed = derive_seed(self.train.seed, &[STREAM_TRAIN, round as u64, client as u64]);
        local_train(global, &self.federation.clients[client], &self.train, client, seed)
    }

    fn train_all(&self, global: &GlobalModel, round: usize) -> Result<Vec<ClientUpdate>, SimError> {
        (0..self.federation.n_clients())
            .map(|c| self.train_client(global, round, c))
            .collect()
    }
}

/// Result of one experiment: per-round records and the final model.
#[derive(Debug, Clone)]
pub struct ExperimentRun {
    pub records: Vec<RoundRecord>,
    pub final_model: GlobalModel,
}

/// Runs `train.rounds` rounds of `method`.
///
/// `Method::Random` needs `reference_sizes`, the per-round selection sizes
/// of the QUBO run it is matched against.
pub fn run_experiment(
    setup: &ExperimentSetup,
    method: Method,
    reference_sizes: Option<&[usize]>,
) -> Result<ExperimentRun, SimError> {
    setup.train.validate()?;
    let n = setup.federation.n_clients();
    if n == 0 {
        return Err(SimError::InvalidConfig("federation has no clients"));
    }
    if method == Method::Random {
        let sizes = reference_sizes.ok_or(SimError::MissingReferenceSizes)?;
        if sizes.len() < setup.train.rounds {
            return Err(SimError::MissingReferenceSizes);
        }
    }

    let mut global = setup.initial_model();
    let mut state = SelectionState::new(n);
    let mut records = Vec::with_capacity(setup.train.rounds);

    for round in 0..setup.train.rounds {
        let (updates, selected, winner, server_lr) = match method {
            Method::FedavgFull => {
                let updates = setup.train_all(&global, round)?;
                (updates, (0..n).collect::<Vec<_>>(), None, setup.train.server_lr_fedavg)
            }
            Method::Qubo => {
                let updates = setup.train_all(&global, round)?;
                let lr = setup.train.server_lr_qubo;
                let validation = &setup.federation.validation;
                let outcome = select_clients(
                    &updates,
                    &setup.selection,
                    &mut state,
                    &setup.bank,
                    &setup.solver,
                    |ids| {
                        fedavg_aggregate(&global, &updates, ids, lr)
                            .and_then(|m| evaluate(&m, validation))
                            .map_or(0.0, |e| e.accuracy)
                    },
                );
                match outcome {
                    Ok(out) => (updates, out.selected, Some(out.winning_strategy), lr),
                    // Every client has hit the selection cap: nobody is aggregated.
                    Err(SelectionError::Infeasible) => (updates, Vec::new(), None, lr),
                    Err(e) => return Err(e.into()),
                }
            }
            Method::Random => {
                let size = reference_sizes.expect("checked above")[round].min(n);
                let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(setup.train.seed, &[STREAM_RANDOM, round as u64]));
                let mut picked = index::sample(&mut rng, n, size).into_vec();
                picked.sort_unstable();
                let updates = picked
                    .iter()
                    .map(|&c| setup.train_client(&global, round, c))
                    .collect::<Result<Vec<_>, _>>()?;
                (updates, picked, None, setup.train.server_lr_fedavg)
            }
        };

        let spread = if selected.is_empty() {
            0.0
        } else {
            global = fedavg_aggregate(&global, &updates, &selected, server_lr)?;
            gradient_variance(&updates, &selected)?
        };
        let eval = evaluate(&global, &setup.federation.test)?;
        records.push(RoundRecord {
            round: round + 1,
            n_clients: n,
            per_round_privacy: per_round_privacy(selected.len(), n)?,
            selected,
            winning_strategy: winner,
            accuracy: eval.accuracy,
            loss: eval.loss,
            gradient_variance: spread,
        });
    }
    Ok(ExperimentRun {
        records,
        final_model: global,
    })
}
