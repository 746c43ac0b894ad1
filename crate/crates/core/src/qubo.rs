//! QUBO instances and solvers.
//!
//! A [`QuboMatrix`] stores a dense symmetric matrix. The energy of a binary
//! assignment `x` is `x^T Q x`: diagonal entries act as linear terms and
//! every unordered pair `{i, j}` contributes `(Q_ij + Q_ji) x_i x_j`. Pair
//! coefficients are therefore written as half-values into both mirror
//! entries by [`QuboMatrix::add_pair`].

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::seed::derive_seed;

/// Largest instance [`solve_exact`] will enumerate.
pub const MAX_EXACT_VARS: usize = 22;

const DEFAULT_FINAL_TEMPERATURE: f64 = 1e-3;

#[derive(Debug, Error, PartialEq)]
pub enum QuboError {
    #[error("QUBO must have at least one variable")]
    Empty,
    #[error("coefficient matrix has {len} entries, expected {n}x{n}")]
    Shape { n: usize, len: usize },
    #[error("coefficient ({row}, {col}) is not finite")]
    NonFinite { row: usize, col: usize },
    #[error("coefficient matrix is not symmetric at ({row}, {col})")]
    Asymmetric { row: usize, col: usize },
    #[error("assignment has {got} bits but the QUBO has {expected} variables")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("exact enumeration supports at most {MAX_EXACT_VARS} variables, got {0}")]
    TooLarge(usize),
    #[error("invalid anneal parameters: {0}")]
    InvalidParams(&'static str),
}

/// Dense symmetric QUBO coefficient matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct QuboMatrix {
    n: usize,
    coeffs: Vec<f64>,
}

impl QuboMatrix {
    /// All-zero instance over `n` variables.
    pub fn zeros(n: usize) -> Result<Self, QuboError> {
        if n == 0 {
            return Err(QuboError::Empty);
        }
        Ok(Self {
            n,
            coeffs: vec![0.0; n * n],
        })
    }

    /// Diagonal (linear-only) instance.
    pub fn diagonal(linear: &[f64]) -> Result<Self, QuboError> {
        let mut q = Self::zeros(linear.len())?;
        for (i, &v) in linear.iter().enumerate() {
            q.add_linear(i, v);
        }
        q.validate()?;
        Ok(q)
    }

    /// Build from a row-major `n x n` matrix that must already be symmetric.
    pub fn from_dense(n: usize, coeffs: Vec<f64>) -> Result<Self, QuboError> {
        if n == 0 {
            return Err(QuboError::Empty);
        }
        if coeffs.len() != n * n {
            return Err(QuboError::Shape { n, len: coeffs.len() });
        }
        let q = Self { n, coeffs };
        q.validate()?;
        Ok(q)
    }

    fn validate(&self) -> Result<(), QuboError> {
        for row in 0..self.n {
            for col in 0..self.n {
                let v = self.get(row, col);
                if !v.is_finite() {
                    return Err(QuboError::NonFinite { row, col });
                }
                if col > row && v != self.get(col, row) {
                    return Err(QuboError::Asymmetric { row, col });
                }
            }
        }
        Ok(())
    }

    pub fn n(&self) -> usize {
        self.n
    }

    #[inline]
    pub fn get(&self, row: usize, col: usize) -> f64 {
        self.coeffs[row * self.n + col]
    }

    /// Row-major view of the stored coefficients.
    pub fn coeffs(&self) -> &[f64] {
        &self.coeffs
    }

    /// Adds `value` to the linear term of variable `i`.
    pub fn add_linear(&mut self, i: usize, value: f64) {
        self.coeffs[i * self.n + i] += value;
    }

    /// Adds `value` to the coefficient of `x_i x_j` (i != j), split evenly
    /// over the two mirror entries.
    pub fn add_pair(&mut self, i: usize, j: usize, value: f64) {
        assert_ne!(i, j, "pair term needs two distinct variables");
        let half = 0.5 * value;
        self.coeffs[i * self.n + j] += half;
        self.coeffs[j * self.n + i] += half;
    }

    /// Effective coefficient of the unordered pair `{i, j}`.
    pub fn pair(&self, i: usize, j: usize) -> f64 {
        self.get(i, j) + self.get(j, i)
    }

    pub fn max_abs_coeff(&self) -> f64 {
        self.coeffs.iter().fold(0.0_f64, |m, v| m.max(v.abs()))
    }

    /// Multiplies every coefficient by `factor`.
    pub fn scaled(&self, factor: f64) -> Self {
        Self {
            n: self.n,
            coeffs: self.coeffs.iter().map(|v| v * factor).collect(),
        }
    }

    /// Simultaneously permutes rows and columns: variable `i` of the result
    /// is variable `perm[i]` of `self`.
    pub fn permuted(&self, perm: &[usize]) -> Self {
        assert_eq!(perm.len(), self.n);
        let n = self.n;
        let mut coeffs = vec![0.0; n * n];
        for i in 0..n {
            for j in 0..n {
                coeffs[i * n + j] = self.get(perm[i], perm[j]);
            }
        }
        Self { n, coeffs }
    }

    /// Energy change of flipping variable `i` given its current local field
    /// `field = sum_{j != i} (Q_ij + Q_ji) x_j`.
    #[inline]
    fn flip_delta(&self, i: usize, bit: bool, field: f64) -> f64 {
        let gain = self.get(i, i) + field;
        if bit {
            -gain
        } else {
            gain
        }
    }

    fn local_fields(&self, bits: &[bool]) -> Vec<f64> {
        (0..self.n)
            .map(|i| {
                (0..self.n)
                    .filter(|&j| j != i && bits[j])
                    .map(|j| self.pair(i, j))
                    .sum()
            })
            .collect()
    }

    fn apply_flip(&self, i: usize, bits: &mut [bool], fields: &mut [f64]) {
        bits[i] = !bits[i];
        let sign = if bits[i] { 1.0 } else { -1.0 };
        for (j, field) in fields.iter_mut().enumerate() {
            if j != i {
                *field += sign * self.pair(i, j);
            }
        }
    }
}

/// Binary decision vector.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct BitVector(pub Vec<bool>);

impl BitVector {
    pub fn zeros(n: usize) -> Self {
        Self(vec![false; n])
    }

    /// Decodes `code` with variable 0 as the most significant bit.
    pub fn from_code(code: u64, n: usize) -> Self {
        Self((0..n).map(|i| (code >> (n - 1 - i)) & 1 == 1).collect())
    }

    /// Integer encoding with variable 0 as the most significant bit. Ties
    /// between equal-energy assignments are broken towards the lower code.
    pub fn code(&self) -> u64 {
        self.0.iter().fold(0u64, |acc, &b| (acc << 1) | u64::from(b))
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn count_ones(&self) -> usize {
        self.0.iter().filter(|&&b| b).count()
    }

    /// Indices of the variables set to one.
    pub fn ones(&self) -> Vec<usize> {
        self.0
            .iter()
            .enumerate()
            .filter_map(|(i, &b)| b.then_some(i))
            .collect()
    }

    pub fn as_slice(&self) -> &[bool] {
        &self.0
    }
}

impl From<Vec<bool>> for BitVector {
    fn from(bits: Vec<bool>) -> Self {
        Self(bits)
    }
}

/// `x^T Q x` for a binary assignment.
pub fn energy(q: &QuboMatrix, x: &BitVector) -> Result<f64, QuboError> {
    if x.len() != q.n {
        return Err(QuboError::DimensionMismatch {
            expected: q.n,
            got: x.len(),
        });
    }
    Ok(energy_unchecked(q, x.as_slice()))
}

fn energy_unchecked(q: &QuboMatrix, bits: &[bool]) -> f64 {
    let n = q.n;
    let mut total = 0.0;
    for i in (0..n).filter(|&i| bits[i]) {
        total += q.get(i, i);
        for j in (i + 1..n).filter(|&j| bits[j]) {
            total += q.pair(i, j);
        }
    }
    total
}

/// Absolute tolerance for treating two energies of `q` as equal.
fn tie_tolerance(q: &QuboMatrix) -> f64 {
    1e-9 * (1.0 + q.coeffs.iter().map(|v| v.abs()).sum::<f64>())
}

/// Exhaustive global minimizer. Walks all `2^n` assignments in Gray-code
/// order with O(n) incremental updates per step.
pub fn solve_exact(q: &QuboMatrix) -> Result<BitVector, QuboError> {
    let n = q.n;
    if n > MAX_EXACT_VARS {
        return Err(QuboError::TooLarge(n));
    }
    let tol = tie_tolerance(q);
    let mut bits = vec![false; n];
    let mut fields = vec![0.0; n];
    let mut current = 0.0;
    let mut best_energy = 0.0;
    let mut best_code = 0u64;

    for step in 1u64..(1u64 << n) {
        // Gray code g(step) differs from g(step - 1) in bit `trailing_zeros(step)`,
        // counted from the least significant end; variable 0 is the most significant.
        let var = n - 1 - step.trailing_zeros() as usize;
        current += q.flip_delta(var, bits[var], fields[var]);
        q.apply_flip(var, &mut bits, &mut fields);

        let code = step ^ (step >> 1);
        if current < best_energy - tol
            || (current <= best_energy + tol && code < best_code)
        {
            best_energy = best_energy.min(current);
            best_code = code;
        }
    }
    Ok(BitVector::from_code(best_code, n))
}

/// Simulated-annealing parameters.
#[derive(Debug, Clone, PartialEq)]
pub struct AnnealParams {
    pub initial_temperature: f64,
    pub final_temperature: f64,
    /// Full passes over all variables per restart.
    pub sweeps: usize,
    pub restarts: usize,
    pub seed: u64,
}

impl AnnealParams {
    /// Defaults tuned for small selection instances: start at the largest
    /// coefficient magnitude, cool to 1e-3 over `100 n` sweeps, 4 restarts.
    pub fn for_qubo(q: &QuboMatrix, seed: u64) -> Self {
        Self {
            // An all-zero instance still needs a valid schedule.
            initial_temperature: q.max_abs_coeff().max(10.0 * DEFAULT_FINAL_TEMPERATURE),
            final_temperature: DEFAULT_FINAL_TEMPERATURE,
            sweeps: 100 * q.n(),
            restarts: 4,
            seed,
        }
    }

    pub fn validate(&self) -> Result<(), QuboError> {
        if !(self.final_temperature > 0.0 && self.final_temperature.is_finite()) {
            return Err(QuboError::InvalidParams("final_temperature must be positive"));
        }
        if !(self.initial_temperature > self.final_temperature
            && self.initial_temperature.is_finite())
        {
            return Err(QuboError::InvalidParams(
                "initial_temperature must exceed final_temperature",
            ));
        }
        if self.sweeps == 0 {
            return Err(QuboError::InvalidParams("sweeps must be at least 1"));
        }
        if self.restarts == 0 {
            return Err(QuboError::InvalidParams("restarts must be at least 1"));
        }
        Ok(())
    }

    fn cooling_ratio(&self) -> f64 {
        if self.sweeps <= 1 {
            return 1.0;
        }
        (self.final_temperature / self.initial_temperature).powf(1.0 / (self.sweeps - 1) as f64)
    }
}

/// Single-flip Metropolis annealing with geometric cooling. Returns the
/// lowest-energy assignment seen across all restarts.
pub fn solve_sa(q: &QuboMatrix, p: &AnnealParams) -> Result<BitVector, QuboError> {
    p.validate()?;
    let n = q.n;
    let tol = tie_tolerance(q);
    let ratio = p.cooling_ratio();

    let mut best: Option<(f64, BitVector)> = None;
    for restart in 0..p.restarts {
        let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(p.seed, &[restart as u64]));
        let mut bits: Vec<bool> = (0..n).map(|_| rng.random::<bool>()).collect();
        let mut fields = q.local_fields(&bits);
        let mut current = energy_unchecked(q, &bits);
        let mut run_best = (current, bits.clone());

        let mut temperature = p.initial_temperature;
        for _ in 0..p.sweeps {
            for i in 0..n {
                let delta = q.flip_delta(i, bits[i], fields[i]);
                let accept = delta <= 0.0 || rng.random::<f64>() < (-delta / temperature).exp();
                if accept {
                    q.apply_flip(i, &mut bits, &mut fields);
                    current += delta;
                    if current < run_best.0 - tol {
                        run_best = (current, bits.clone());
                    }
                }
            }
            temperature *= ratio;
        }

        let candidate = BitVector(run_best.1);
        let e = energy_unchecked(q, candidate.as_slice());
        let better = match &best {
            None => true,
            Some((be, bx)) => e < be - tol || (e <= be + tol && candidate.code() < bx.code()),
        };
        if better {
            best = Some((e, candidate));
        }
    }
    Ok(best.expect("restarts >= 1").1)
}
