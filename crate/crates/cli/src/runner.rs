//! Executes the (method, alpha, seed) run matrix and writes result tables.

use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use qubofl::data::{load_idx, synth_blobs, Dataset};
use qubofl::fl::{run_experiment, ExperimentSetup, Federation, Method};
use qubofl::metrics::{export_heatmap, participation_summary, RoundRecord};
use qubofl::selection::{strategy_bank, Strategy};

use crate::config::{Config, DataSource};

#[derive(Debug, Clone, Default)]
pub struct RunOptions {
    pub out: Option<PathBuf>,
    pub seed_override: Option<u64>,
    /// Parallel cells; `None` uses rayon's default.
    pub jobs: Option<usize>,
}

/// One row of a per-run result table.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResultRow {
    pub run_id: String,
    pub method: String,
    pub alpha: f64,
    pub seed: u64,
    pub round: usize,
    pub n_selected: usize,
    pub per_round_privacy: f64,
    pub accuracy: f64,
    pub loss: f64,
    pub gradient_variance: f64,
    pub winning_strategy: String,
    pub selected_ids: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SummaryRow {
    pub run_id: String,
    pub method: String,
    pub alpha: f64,
    pub seed: u64,
    pub n_clients: usize,
    pub rounds: usize,
    pub final_accuracy: f64,
    pub max_accuracy: f64,
    pub mean_per_round_privacy: f64,
    pub cumulative_privacy: f64,
    pub never_selected_fraction: f64,
    pub mean_selected: f64,
    /// `Strategy:count` pairs joined by `;`, in bank order.
    pub strategy_wins: String,
}

#[derive(Debug, Clone)]
pub struct RunOutput {
    pub method: Method,
    pub alpha: f64,
    pub seed: u64,
    pub n_clients: usize,
    pub records: Vec<RoundRecord>,
}

impl RunOutput {
    pub fn run_id(&self) -> String {
        run_id(self.method, self.alpha, self.seed)
    }

    pub fn rows(&self) -> Vec<ResultRow> {
        let id = self.run_id();
        self.records
            .iter()
            .map(|r| ResultRow {
                run_id: id.clone(),
                method: self.method.name().to_string(),
                alpha: self.alpha,
                seed: self.seed,
                round: r.round,
                n_selected: r.selected.len(),
                per_round_privacy: r.per_round_privacy,
                accuracy: r.accuracy,
                loss: r.loss,
                gradient_variance: r.gradient_variance,
                winning_strategy: r.strategy_label().to_string(),
                selected_ids: r.selected.iter().map(|i| i.to_string()).collect::<Vec<_>>().join(";"),
            })
            .collect()
    }

    pub fn summary(&self) -> Result<SummaryRow> {
        let n = self.n_clients;
        let rounds = self.records.len();
        let (never, cumulative) = if rounds == 0 {
            (1.0, 1.0)
        } else {
            let s = participation_summary(&self.records, n)?;
            (s.never_selected_fraction, s.cumulative_privacy)
        };
        let mean = |f: &dyn Fn(&RoundRecord) -> f64| {
            if rounds == 0 {
                0.0
            } else {
                self.records.iter().map(f).sum::<f64>() / rounds as f64
            }
        };
        let wins: Vec<String> = Strategy::ALL
            .iter()
            .filter_map(|s| {
                let c = self.records.iter().filter(|r| r.winning_strategy == Some(*s)).count();
                (c > 0).then(|| format!("{s}:{c}"))
            })
            .collect();
        Ok(SummaryRow {
            run_id: self.run_id(),
            method: self.method.name().to_string(),
            alpha: self.alpha,
            seed: self.seed,
            n_clients: n,
            rounds,
            final_accuracy: self.records.last().map_or(0.0, |r| r.accuracy),
            max_accuracy: self.records.iter().map(|r| r.accuracy).fold(0.0, f64::max),
            mean_per_round_privacy: mean(&|r| r.per_round_privacy),
            cumulative_privacy: cumulative,
            never_selected_fraction: never,
            mean_selected: mean(&|r| r.selected.len() as f64),
            strategy_wins: wins.join(";"),
        })
    }
}

pub fn run_id(method: Method, alpha: f64, seed: u64) -> String {
    format!("{}_a{}_s{}", method.name(), alpha, seed)
}

/// Train and test data for the configured source.
pub fn load_data(cfg: &Config) -> Result<(Dataset, Dataset)> {
    let d = &cfg.data;
    match d.source {
        DataSource::Synthetic => {
            let classes = d.classes.expect("validated");
            let train_pc = d.train_per_class.expect("validated");
            let all = synth_blobs(
                classes,
                d.dims.expect("validated"),
                train_pc + d.test_per_class.expect("validated"),
                d.spread.expect("validated"),
                d.data_seed.unwrap_or(0),
            )?;
            // Samples are interleaved by class, so a prefix split stays balanced.
            let n_train = classes * train_pc;
            let test_idx: Vec<usize> = (n_train..all.len()).collect();
            Ok((all.truncated(n_train), all.subset(&test_idx)))
        }
        DataSource::Idx => {
            let path = |p: &Option<PathBuf>| p.clone().expect("validated");
            let train = load_idx(path(&d.train_images), path(&d.train_labels))?;
            let test = load_idx(path(&d.test_images), path(&d.test_labels))?;
            let train = d.train_limit.map_or(train.clone(), |n| train.truncated(n));
            let test = d.test_limit.map_or(test.clone(), |n| test.truncated(n));
            Ok((train, test))
        }
    }
}

/// Runs every requested method for one (alpha, seed) cell. Random selection
/// is size-matched to the QUBO run, which is executed even when not
/// requested.
pub fn run_cell(cfg: &Config, train: &Dataset, test: &Dataset, alpha: f64, seed: u64) -> Result<Vec<RunOutput>> {
    let f = &cfg.federation;
    let federation = Federation::partition(
        train,
        test.clone(),
        f.n_clients,
        alpha,
        cfg.data.validation_fraction,
        f.hidden,
        seed,
    )
    .with_context(|| format!("partitioning alpha={alpha} seed={seed}"))?;
    let setup = ExperimentSetup {
        federation,
        train: cfg.train_config(seed),
        selection: cfg.selection_params(),
        bank: strategy_bank(cfg.selection.profile.into()),
        solver: cfg.solver(),
    };
    let methods = cfg.methods();
    let wrap = |method: Method, records| RunOutput {
        method,
        alpha,
        seed,
        n_clients: f.n_clients,
        records,
    };

    let mut qubo = None;
    let mut out = Vec::new();
    for &method in &methods {
        let reference = match method {
            Method::Random => {
                if qubo.is_none() {
                    qubo = Some(run_experiment(&setup, Method::Qubo, None)?.records);
                }
                qubo.as_ref().map(|r: &Vec<RoundRecord>| r.iter().map(|x| x.selected.len()).collect::<Vec<_>>())
            }
            _ => None,
        };
        let records = run_experiment(&setup, method, reference.as_deref())
            .with_context(|| run_id(method, alpha, seed))?
            .records;
        if method == Method::Qubo {
            qubo = Some(records.clone());
        }
        out.push(wrap(method, records));
    }
    Ok(out)
}

#[derive(Debug, Clone)]
pub struct RunReport {
    pub out_dir: PathBuf,
    pub outputs: Vec<RunOutput>,
    pub summaries: Vec<SummaryRow>,
}

pub fn run(cfg: &Config, opts: &RunOptions) -> Result<RunReport> {
    let mut cfg = cfg.clone();
    if let Some(s) = opts.seed_override {
        cfg.scenario.seeds = vec![s];
    }
    let out_dir = opts.out.clone().unwrap_or_else(|| cfg.scenario.output_dir.clone());
    let (train, test) = load_data(&cfg).context("loading data")?;

    let cells: Vec<(f64, u64)> = cfg
        .scenario
        .alphas
        .iter()
        .flat_map(|&a| cfg.scenario.seeds.iter().map(move |&s| (a, s)))
        .collect();
    let mut pool = rayon::ThreadPoolBuilder::new();
    if let Some(j) = opts.jobs {
        pool = pool.num_threads(j.max(1));
    }
    let pool = pool.build().context("building thread pool")?;
    let results: Vec<Result<Vec<RunOutput>>> = pool.install(|| {
        cells
            .par_iter()
            .map(|&(a, s)| run_cell(&cfg, &train, &test, a, s))
            .collect()
    });
    let mut outputs = Vec::new();
    for r in results {
        outputs.extend(r?);
    }

    let results_dir = out_dir.join("results");
    fs::create_dir_all(&results_dir).with_context(|| format!("creating {}", results_dir.display()))?;
    for o in &outputs {
        write_rows(&results_dir.join(format!("{}.csv", o.run_id())), &o.rows())?;
    }
    let summaries = outputs.iter().map(RunOutput::summary).collect::<Result<Vec<_>>>()?;
    write_rows(&out_dir.join("summary.csv"), &summaries)?;
    write_heatmaps(&out_dir, &cfg, &outputs)?;

    Ok(RunReport {
        out_dir,
        outputs,
        summaries,
    })
}

fn write_heatmaps(out_dir: &Path, cfg: &Config, outputs: &[RunOutput]) -> Result<()> {
    for method in cfg.methods() {
        for &seed in &cfg.scenario.seeds {
            let histories: Vec<(f64, &[RoundRecord])> = outputs
                .iter()
                .filter(|o| o.method == method && o.seed == seed)
                .map(|o| (o.alpha, o.records.as_slice()))
                .collect();
            let h = export_heatmap(&histories, cfg.federation.n_clients);
            let path = out_dir.join(format!("heatmap_{}_s{}.csv", method.name(), seed));
            fs::write(&path, h.to_table(',')).with_context(|| format!("writing {}", path.display()))?;
        }
    }
    Ok(())
}

pub fn write_rows<T: Serialize>(path: &Path, rows: &[T]) -> Result<()> {
    let mut w = csv::Writer::from_path(path).with_context(|| format!("writing {}", path.display()))?;
    for r in rows {
        w.serialize(r)?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_rows<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<Vec<T>> {
    let mut r = csv::Reader::from_path(path).with_context(|| format!("reading {}", path.display()))?;
    r.deserialize()
        .collect::<Result<Vec<T>, _>>()
        .with_context(|| format!("parsing {}", path.display()))
}
