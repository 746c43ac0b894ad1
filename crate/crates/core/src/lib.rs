//! Privacy-aware federated learning with QUBO-based client selection.
//!
//! * [`qubo`]: QUBO matrices, an exhaustive solver and simulated annealing.
//! * [`selection`]: relevance/similarity scoring, the ten-strategy bank and
//!   the per-round strategy competition.
//! * [`fl`]: Dirichlet partitioning, MLP local training, FedAvg and the
//!   three-method experiment loop.
//! * [`metrics`]: per-round and cumulative privacy proxies.
//! * [`data`]: synthetic blobs and IDX (MNIST) loading.

pub mod data;
pub mod fl;
pub mod metrics;
pub mod qubo;
pub mod selection;

mod seed;

pub use seed::derive_seed;
