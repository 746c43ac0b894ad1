//! Experiment configuration: a sectioned TOML file where unknown keys are
//! rejected.

use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use serde::{Deserialize, Serialize};

use qubofl::fl::{Method, TrainConfig};
use qubofl::selection::{AnnealSchedule, DatasetProfile, ScoreWeights, SelectionParams, Solver};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Config {
    pub scenario: ScenarioConfig,
    pub data: DataConfig,
    pub federation: FederationConfig,
    pub selection: SelectionConfig,
    #[serde(default)]
    pub anneal: AnnealConfig,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MethodName {
    FedavgFull,
    Qubo,
    Random,
}

impl From<MethodName> for Method {
    fn from(m: MethodName) -> Self {
        match m {
            MethodName::FedavgFull => Method::FedavgFull,
            MethodName::Qubo => Method::Qubo,
            MethodName::Random => Method::Random,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioConfig {
    pub name: String,
    pub methods: Vec<MethodName>,
    pub seeds: Vec<u64>,
    pub alphas: Vec<f64>,
    pub output_dir: PathBuf,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DataSource {
    Synthetic,
    Idx,
}

/// Either synthetic blobs or IDX files. Fields that do not apply to the
/// chosen source must be left out.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DataConfig {
    pub source: DataSource,
    #[serde(default = "default_validation_fraction")]
    pub validation_fraction: f64,

    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub classes: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub dims: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub train_per_class: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub test_per_class: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub spread: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub data_seed: Option<u64>,

    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub train_images: Option<PathBuf>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub train_labels: Option<PathBuf>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub test_images: Option<PathBuf>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub test_labels: Option<PathBuf>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub train_limit: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub test_limit: Option<usize>,
}

fn default_validation_fraction() -> f64 {
    0.1
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FederationConfig {
    pub n_clients: usize,
    pub rounds: usize,
    pub local_iterations: usize,
    pub batch_size: usize,
    pub hidden: usize,
    pub client_lr: f64,
    pub server_lr_fedavg: f64,
    pub server_lr_qubo: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ProfileName {
    Mnist,
    Cinic10,
}

impl From<ProfileName> for DatasetProfile {
    fn from(p: ProfileName) -> Self {
        match p {
            ProfileName::Mnist => DatasetProfile::Mnist,
            ProfileName::Cinic10 => DatasetProfile::Cinic10,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SolverName {
    Anneal,
    Exact,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SelectionConfig {
    pub profile: ProfileName,
    pub k: usize,
    /// Absent means no cap.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub max_selections: Option<usize>,
    #[serde(default)]
    pub fairness_mode: bool,
    #[serde(default = "default_fairness_weight")]
    pub fairness_weight: f64,
    #[serde(default = "default_beta_r")]
    pub beta_r: f64,
    /// Overrides the profile's anti-clustering threshold.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub tau: Option<f64>,
    /// Overrides the profile's (accuracy, redundancy, variance) weights.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub score_weights: Option<[f64; 3]>,
    #[serde(default = "default_solver")]
    pub solver: SolverName,
}

fn default_fairness_weight() -> f64 {
    1.0
}

fn default_beta_r() -> f64 {
    3.0
}

fn default_solver() -> SolverName {
    SolverName::Anneal
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AnnealConfig {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub initial_temperature: Option<f64>,
    pub final_temperature: f64,
    pub sweeps_per_var: usize,
    pub restarts: usize,
    pub seed: u64,
}

impl Default for AnnealConfig {
    fn default() -> Self {
        let s = AnnealSchedule::default();
        Self {
            initial_temperature: s.initial_temperature,
            final_temperature: s.final_temperature,
            sweeps_per_var: s.sweeps_per_var,
            restarts: s.restarts,
            seed: s.seed,
        }
    }
}

const PROFILES: [(&str, &str); 3] = [
    ("mnist-paper-scaled", include_str!("../profiles/mnist-paper-scaled.toml")),
    ("cinic-profile", include_str!("../profiles/cinic-profile.toml")),
    ("smoke", include_str!("../profiles/smoke.toml")),
];

pub fn profile_names() -> impl Iterator<Item = &'static str> {
    PROFILES.iter().map(|(n, _)| *n)
}

impl Config {
    /// Parses and validates. Syntax and type errors carry line numbers.
    pub fn parse(text: &str) -> Result<Self> {
        let cfg: Config = toml::from_str(text).map_err(|e| anyhow::anyhow!("invalid config: {e}"))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
        let mut cfg = Self::parse(&text).with_context(|| format!("in {}", path.display()))?;
        cfg.resolve_paths(path.parent().unwrap_or(Path::new(".")));
        Ok(cfg)
    }

    /// A built-in profile. Relative data paths resolve against the current
    /// directory when they exist there, otherwise against the workspace the
    /// binary was built from.
    pub fn profile(name: &str) -> Result<Self> {
        let Some((_, text)) = PROFILES.iter().find(|(n, _)| *n == name) else {
            bail!(
                "unknown profile `{name}` (available: {})",
                profile_names().collect::<Vec<_>>().join(", ")
            );
        };
        let mut cfg = Self::parse(text).with_context(|| format!("built-in profile {name}"))?;
        let workspace = Path::new(env!("CARGO_MANIFEST_DIR")).join("../..");
        let probe = cfg.data.train_images.clone();
        let base = match probe {
            Some(p) if !p.exists() && workspace.join(&p).exists() => workspace,
            _ => PathBuf::from("."),
        };
        cfg.resolve_paths(&base);
        Ok(cfg)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config is always serializable")
    }

    fn resolve_paths(&mut self, base: &Path) {
        let d = &mut self.data;
        for p in [&mut d.train_images, &mut d.train_labels, &mut d.test_images, &mut d.test_labels]
            .into_iter()
            .flatten()
        {
            if p.is_relative() && base != Path::new(".") {
                *p = base.join(&*p);
            }
        }
    }

    pub fn validate(&self) -> Result<()> {
        let s = &self.scenario;
        if s.methods.is_empty() {
            bail!("scenario.methods: at least one method is required");
        }
        if s.seeds.is_empty() {
            bail!("scenario.seeds: at least one seed is required");
        }
        if s.alphas.is_empty() {
            bail!("scenario.alphas: at least one alpha is required");
        }
        if let Some(a) = s.alphas.iter().find(|a| !(**a > 0.0 && a.is_finite())) {
            bail!("scenario.alphas: {a} is not a positive concentration");
        }
        if s.name.is_empty() {
            bail!("scenario.name must not be empty");
        }

        let d = &self.data;
        if !(0.0..1.0).contains(&d.validation_fraction) {
            bail!("data.validation_fraction must lie in [0, 1)");
        }
        let synthetic = [
            ("classes", d.classes.is_some()),
            ("dims", d.dims.is_some()),
            ("train_per_class", d.train_per_class.is_some()),
            ("test_per_class", d.test_per_class.is_some()),
            ("spread", d.spread.is_some()),
            ("data_seed", d.data_seed.is_some()),
        ];
        let idx = [
            ("train_images", d.train_images.is_some()),
            ("train_labels", d.train_labels.is_some()),
            ("test_images", d.test_images.is_some()),
            ("test_labels", d.test_labels.is_some()),
            ("train_limit", d.train_limit.is_some()),
            ("test_limit", d.test_limit.is_some()),
        ];
        let (required, forbidden, kind) = match d.source {
            DataSource::Synthetic => (&synthetic[..5], &idx[..], "synthetic"),
            DataSource::Idx => (&idx[..4], &synthetic[..], "idx"),
        };
        if let Some((field, _)) = required.iter().find(|(_, set)| !set) {
            bail!("data.{field} is required for source = \"{kind}\"");
        }
        if let Some((field, _)) = forbidden.iter().find(|(_, set)| *set) {
            bail!("data.{field} does not apply to source = \"{kind}\"");
        }

        let f = &self.federation;
        if f.n_clients == 0 {
            bail!("federation.n_clients must be positive");
        }
        if f.hidden == 0 {
            bail!("federation.hidden must be positive");
        }
        self.train_config(0)
            .validate()
            .map_err(|e| anyhow::anyhow!("federation: {e}"))?;

        let sel = &self.selection;
        if sel.k == 0 || sel.k > f.n_clients {
            bail!("selection.k must lie in [1, federation.n_clients]");
        }
        self.selection_params()
            .validate()
            .map_err(|e| anyhow::anyhow!("selection: {e}"))?;
        if sel.solver == SolverName::Exact && f.n_clients > 22 {
            bail!("selection.solver = \"exact\" supports at most 22 clients");
        }

        let a = &self.anneal;
        if a.final_temperature.is_nan() || a.final_temperature <= 0.0 {
            bail!("anneal.final_temperature must be positive");
        }
        if let Some(t0) = a.initial_temperature {
            if t0.is_nan() || t0 <= a.final_temperature {
                bail!("anneal.initial_temperature must exceed final_temperature");
            }
        }
        if a.sweeps_per_var == 0 || a.restarts == 0 {
            bail!("anneal.sweeps_per_var and anneal.restarts must be positive");
        }
        Ok(())
    }

    pub fn methods(&self) -> Vec<Method> {
        let mut m: Vec<Method> = self.scenario.methods.iter().map(|&m| m.into()).collect();
        m.sort();
        m.dedup();
        m
    }

    pub fn train_config(&self, seed: u64) -> TrainConfig {
        let f = &self.federation;
        TrainConfig {
            local_iterations: f.local_iterations,
            batch_size: f.batch_size,
            client_lr: f.client_lr,
            server_lr_fedavg: f.server_lr_fedavg,
            server_lr_qubo: f.server_lr_qubo,
            rounds: f.rounds,
            seed,
        }
    }

    pub fn selection_params(&self) -> SelectionParams {
        let sel = &self.selection;
        let mut p = SelectionParams::for_profile(sel.profile.into(), sel.k);
        p.beta_r = sel.beta_r;
        p.max_selections = sel.max_selections.unwrap_or(usize::MAX);
        p.fairness_mode = sel.fairness_mode;
        p.fairness_weight = sel.fairness_weight;
        if let Some(tau) = sel.tau {
            p.tau = tau;
        }
        if let Some([a, r, v]) = sel.score_weights {
            p.score_weights = ScoreWeights::new(a, r, v);
        }
        p
    }

    pub fn solver(&self) -> Solver {
        match self.selection.solver {
            SolverName::Exact => Solver::Exact,
            SolverName::Anneal => Solver::Anneal(AnnealSchedule {
                initial_temperature: self.anneal.initial_temperature,
                final_temperature: self.anneal.final_temperature,
                sweeps_per_var: self.anneal.sweeps_per_var,
                restarts: self.anneal.restarts,
                seed: self.anneal.seed,
            }),
        }
    }
}
