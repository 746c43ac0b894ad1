//! Aligns per-round results across methods and tallies QUBO strategy wins.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use anyhow::{bail, Context, Result};

use qubofl::fl::Method;
use qubofl::selection::Strategy;

use crate::runner::{read_rows, ResultRow};

/// (alpha, seed) with alpha ordered numerically.
#[derive(Debug, Clone, Copy, PartialEq)]
struct Cell(f64, u64);

impl Eq for Cell {}

impl PartialOrd for Cell {
    fn partial_cmp(&self, other: &Self) -> Option<std::cmp::Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for Cell {
    fn cmp(&self, other: &Self) -> std::cmp::Ordering {
        self.0.total_cmp(&other.0).then(self.1.cmp(&other.1))
    }
}

#[derive(Debug, Clone)]
pub struct Comparison {
    pub methods: Vec<Method>,
    /// Method the deltas are taken against others from: QUBO when present.
    pub reference: Method,
    pub rows: Vec<AlignedRound>,
    /// Winning-strategy counts over all QUBO rounds, in bank order, with
    /// `n/a` last for rounds that had no winner.
    pub histogram: Vec<(String, usize)>,
}

#[derive(Debug, Clone)]
pub struct AlignedRound {
    pub alpha: f64,
    pub seed: u64,
    pub round: usize,
    /// Indexed like `Comparison::methods`.
    pub accuracy: Vec<f64>,
    pub loss: Vec<f64>,
}

impl Comparison {
    pub fn delta_columns(&self) -> Vec<(Method, usize)> {
        self.methods
            .iter()
            .enumerate()
            .filter(|(_, m)| **m != self.reference)
            .map(|(i, m)| (*m, i))
            .collect()
    }

    fn reference_index(&self) -> usize {
        self.methods.iter().position(|m| *m == self.reference).expect("reference is a method")
    }

    fn header(&self) -> Vec<String> {
        let mut h = vec!["alpha".to_string(), "seed".to_string(), "round".to_string()];
        h.extend(self.methods.iter().map(|m| format!("acc_{m}")));
        h.extend(self.methods.iter().map(|m| format!("loss_{m}")));
        h.extend(self.delta_columns().iter().map(|(m, _)| format!("{}_minus_{}", self.reference, short(*m))));
        h
    }

    fn cells(&self, r: &AlignedRound, precision: Option<usize>) -> Vec<String> {
        let fmt = |v: f64| match precision {
            Some(p) => format!("{v:.p$}"),
            None => v.to_string(),
        };
        let mut c = vec![r.alpha.to_string(), r.seed.to_string(), r.round.to_string()];
        c.extend(r.accuracy.iter().map(|&v| fmt(v)));
        c.extend(r.loss.iter().map(|&v| fmt(v)));
        let base = r.accuracy[self.reference_index()];
        c.extend(self.delta_columns().iter().map(|&(_, i)| fmt(base - r.accuracy[i])));
        c
    }

    pub fn to_csv(&self) -> String {
        let mut out = self.header().join(",");
        out.push('\n');
        for r in &self.rows {
            out.push_str(&self.cells(r, None).join(","));
            out.push('\n');
        }
        out
    }

    /// Human-readable table with right-aligned columns, followed by the
    /// strategy histogram.
    pub fn render(&self) -> String {
        let header = self.header();
        let body: Vec<Vec<String>> = self.rows.iter().map(|r| self.cells(r, Some(4))).collect();
        let widths: Vec<usize> = (0..header.len())
            .map(|c| body.iter().map(|row| row[c].len()).chain([header[c].len()]).max().unwrap_or(0))
            .collect();
        let line = |cells: &[String]| {
            cells
                .iter()
                .zip(&widths)
                .map(|(s, w)| format!("{s:>w$}"))
                .collect::<Vec<_>>()
                .join("  ")
        };
        let mut out = line(&header);
        out.push('\n');
        for row in &body {
            out.push_str(&line(row));
            out.push('\n');
        }
        if !self.histogram.is_empty() {
            out.push_str("\nstrategy wins (qubo)\n");
            let w = self.histogram.iter().map(|(s, _)| s.len()).max().unwrap_or(0);
            for (s, c) in &self.histogram {
                let _ = writeln!(out, "{s:<w$}  {c}");
            }
        }
        out
    }

    pub fn histogram_csv(&self) -> String {
        let mut out = String::from("strategy,wins\n");
        for (s, c) in &self.histogram {
            let _ = writeln!(out, "{s},{c}");
        }
        out
    }
}

fn short(m: Method) -> &'static str {
    match m {
        Method::FedavgFull => "fedavg",
        other => other.name(),
    }
}

/// Reads every result table under `dir` (or `dir/results` when present).
pub fn compare(dir: &Path) -> Result<Comparison> {
    let results = if dir.join("results").is_dir() { dir.join("results") } else { dir.to_path_buf() };
    let mut files: Vec<_> = fs::read_dir(&results)
        .with_context(|| format!("reading {}", results.display()))?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.extension().is_some_and(|x| x == "csv"))
        .collect();
    files.sort();

    let mut runs: BTreeMap<Cell, BTreeMap<Method, Vec<ResultRow>>> = BTreeMap::new();
    for path in &files {
        let rows: Vec<ResultRow> = read_rows(path)?;
        for row in rows {
            let method: Method = row
                .method
                .parse()
                .with_context(|| format!("{}: round {}", path.display(), row.round))?;
            runs.entry(Cell(row.alpha, row.seed)).or_default().entry(method).or_default().push(row);
        }
    }

    let methods: BTreeSet<Method> = runs.values().flat_map(|m| m.keys().copied()).collect();
    if methods.len() < 2 {
        bail!(
            "{} holds results for {} method(s); comparison needs at least two",
            results.display(),
            methods.len()
        );
    }
    let methods: Vec<Method> = methods.into_iter().collect();
    let mut missing = Vec::new();
    for (cell, by_method) in &runs {
        for m in &methods {
            if !by_method.contains_key(m) {
                missing.push(format!("{m} alpha={} seed={}", cell.0, cell.1));
            }
        }
    }
    if !missing.is_empty() {
        bail!("run matrix is incomplete; missing cells:\n  {}", missing.join("\n  "));
    }

    let mut rows = Vec::new();
    for (cell, by_method) in &runs {
        let mut per: Vec<BTreeMap<usize, &ResultRow>> = Vec::new();
        for m in &methods {
            per.push(by_method[m].iter().map(|r| (r.round, r)).collect());
        }
        let rounds: BTreeSet<usize> = per[0].keys().copied().collect();
        for (m, p) in methods.iter().zip(&per) {
            if p.keys().copied().collect::<BTreeSet<_>>() != rounds {
                bail!("{m} alpha={} seed={} covers different rounds than {}", cell.0, cell.1, methods[0]);
            }
        }
        for round in rounds {
            rows.push(AlignedRound {
                alpha: cell.0,
                seed: cell.1,
                round,
                accuracy: per.iter().map(|p| p[&round].accuracy).collect(),
                loss: per.iter().map(|p| p[&round].loss).collect(),
            });
        }
    }

    let mut histogram = Vec::new();
    if methods.contains(&Method::Qubo) {
        let labels: Vec<&str> = runs
            .values()
            .flat_map(|m| m[&Method::Qubo].iter().map(|r| r.winning_strategy.as_str()))
            .collect();
        for s in Strategy::ALL {
            histogram.push((s.name().to_string(), labels.iter().filter(|l| **l == s.name()).count()));
        }
        let other = labels.iter().filter(|l| l.parse::<Strategy>().is_err()).count();
        if other > 0 {
            histogram.push(("n/a".to_string(), other));
        }
    }

    let reference = if methods.contains(&Method::Qubo) { Method::Qubo } else { methods[0] };
    Ok(Comparison {
        methods,
        reference,
        rows,
        histogram,
    })
}
