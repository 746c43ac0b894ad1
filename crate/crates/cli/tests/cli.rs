use std::fs;
use std::path::Path;

use qubofl::data::{synth_blobs, to_idx_bytes};
use qubofl_cli::runner::{read_rows, ResultRow, SummaryRow};
use qubofl_cli::{compare, run, Config, RunOptions};

const MINIMAL: &str = r#"
[scenario]
name = "tiny"
methods = ["fedavg_full", "qubo", "random"]
seeds = [3]
alphas = [0.5]
output_dir = "unused"

[data]
source = "synthetic"
classes = 3
dims = 6
train_per_class = 40
test_per_class = 10
spread = 0.2

[federation]
n_clients = 10
rounds = 3
local_iterations = 5
batch_size = 8
hidden = 8
client_lr = 0.2
server_lr_fedavg = 0.065
server_lr_qubo = 0.082

[selection]
profile = "mnist"
k = 3
"#;

fn opts(dir: &Path) -> RunOptions {
    RunOptions {
        out: Some(dir.to_path_buf()),
        ..RunOptions::default()
    }
}

fn result_files(dir: &Path) -> Vec<String> {
    let mut names: Vec<String> = fs::read_dir(dir.join("results"))
        .unwrap()
        .map(|e| e.unwrap().file_name().into_string().unwrap())
        .collect();
    names.sort();
    names
}

#[test]
fn minimal_config_writes_three_results_and_summary() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = Config::parse(MINIMAL).unwrap();
    run(&cfg, &opts(tmp.path())).unwrap();
    assert_eq!(
        result_files(tmp.path()),
        ["fedavg_full_a0.5_s3.csv", "qubo_a0.5_s3.csv", "random_a0.5_s3.csv"]
    );
    let summary: Vec<SummaryRow> = read_rows(&tmp.path().join("summary.csv")).unwrap();
    assert_eq!(summary.len(), 3);
    let header = fs::read_to_string(tmp.path().join("results/qubo_a0.5_s3.csv")).unwrap();
    assert!(header.starts_with(
        "run_id,method,alpha,seed,round,n_selected,per_round_privacy,accuracy,loss,gradient_variance,winning_strategy,selected_ids\n"
    ));
}

#[test]
fn summary_is_recomputable_from_results() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = Config::parse(MINIMAL).unwrap();
    run(&cfg, &opts(tmp.path())).unwrap();
    let summary: Vec<SummaryRow> = read_rows(&tmp.path().join("summary.csv")).unwrap();
    for s in summary {
        let rows: Vec<ResultRow> = read_rows(&tmp.path().join(format!("results/{}.csv", s.run_id))).unwrap();
        assert_eq!(s.rounds, rows.len());
        assert_eq!(s.final_accuracy, rows.last().unwrap().accuracy);
        assert_eq!(s.max_accuracy, rows.iter().map(|r| r.accuracy).fold(0.0, f64::max));
        let mean_priv = rows.iter().map(|r| r.per_round_privacy).sum::<f64>() / rows.len() as f64;
        assert!((s.mean_per_round_privacy - mean_priv).abs() < 1e-12);
        let mut seen = vec![false; s.n_clients];
        for r in &rows {
            let ids: Vec<usize> = r.selected_ids.split(';').filter(|x| !x.is_empty()).map(|x| x.parse().unwrap()).collect();
            assert_eq!(ids.len(), r.n_selected);
            ids.iter().for_each(|&i| seen[i] = true);
        }
        let never = seen.iter().filter(|s| !**s).count() as f64 / s.n_clients as f64;
        assert_eq!(s.never_selected_fraction, never);
        let wins: usize = s
            .strategy_wins
            .split(';')
            .filter(|x| !x.is_empty())
            .map(|x| x.rsplit(':').next().unwrap().parse::<usize>().unwrap())
            .sum();
        let labelled = rows.iter().filter(|r| r.winning_strategy != "n/a").count();
        assert_eq!(wins, labelled);
    }
}

#[test]
fn reruns_are_byte_identical() {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    let cfg = Config::parse(MINIMAL).unwrap();
    run(&cfg, &opts(a.path())).unwrap();
    run(&cfg, &RunOptions { jobs: Some(2), ..opts(b.path()) }).unwrap();
    for name in result_files(a.path()) {
        let path = format!("results/{name}");
        assert_eq!(fs::read(a.path().join(&path)).unwrap(), fs::read(b.path().join(&path)).unwrap());
    }
    assert_eq!(
        fs::read(a.path().join("summary.csv")).unwrap(),
        fs::read(b.path().join("summary.csv")).unwrap()
    );
}

#[test]
fn unknown_profile_names_the_field_and_line() {
    let bad = MINIMAL.replace("profile = \"mnist\"", "profile = \"imagenet\"");
    let err = format!("{:#}", Config::parse(&bad).unwrap_err());
    assert!(err.contains("imagenet"), "{err}");
    assert!(err.contains("profile"), "{err}");
    assert!(err.contains("line 28"), "{err}");
}

#[test]
fn unknown_keys_are_rejected_with_line() {
    let bad = MINIMAL.replace("k = 3", "k = 3\nlamda_c = 2.0");
    let err = format!("{:#}", Config::parse(&bad).unwrap_err());
    assert!(err.contains("lamda_c") && err.contains("line 30"), "{err}");
}

#[test]
fn semantic_errors_name_the_field() {
    let cases = [
        (MINIMAL.replace("seeds = [3]", "seeds = []"), "scenario.seeds"),
        (MINIMAL.replace("methods = [\"fedavg_full\", \"qubo\", \"random\"]", "methods = []"), "scenario.methods"),
        (MINIMAL.replace("k = 3", "k = 11"), "selection.k"),
        (MINIMAL.replace("spread = 0.2", ""), "data.spread"),
        (MINIMAL.replace("spread = 0.2", "spread = 0.2\ntrain_images = \"x\""), "data.train_images"),
    ];
    for (text, field) in cases {
        let err = format!("{:#}", Config::parse(&text).unwrap_err());
        assert!(err.contains(field), "{field}: {err}");
    }
}

#[test]
fn config_round_trips() {
    let cfg = Config::parse(MINIMAL).unwrap();
    assert_eq!(Config::parse(&cfg.to_toml()).unwrap(), cfg);
    let mut richer = cfg.clone();
    richer.selection.max_selections = Some(4);
    richer.selection.tau = Some(0.95);
    richer.selection.score_weights = Some([1.0, 0.5, 0.25]);
    richer.anneal.initial_temperature = Some(2.5);
    assert_eq!(Config::parse(&richer.to_toml()).unwrap(), richer);
}

#[test]
fn seed_override_replaces_seed_list() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = Config::parse(MINIMAL).unwrap();
    run(&cfg, &RunOptions { seed_override: Some(9), ..opts(tmp.path()) }).unwrap();
    assert!(result_files(tmp.path()).iter().all(|f| f.ends_with("_s9.csv")));
}

#[test]
fn idx_source_loads_relative_to_config() {
    let tmp = tempfile::tempdir().unwrap();
    let data = synth_blobs(3, 16, 40, 0.2, 1).unwrap();
    let (img, lbl) = to_idx_bytes(&data, 4, 4).unwrap();
    fs::create_dir(tmp.path().join("d")).unwrap();
    for (name, bytes) in [("tr-img", &img), ("tr-lbl", &lbl), ("te-img", &img), ("te-lbl", &lbl)] {
        fs::write(tmp.path().join("d").join(name), bytes).unwrap();
    }
    let text = MINIMAL
        .replace(
            "classes = 3\ndims = 6\ntrain_per_class = 40\ntest_per_class = 10\nspread = 0.2",
            "train_images = \"d/tr-img\"\ntrain_labels = \"d/tr-lbl\"\ntest_images = \"d/te-img\"\ntest_labels = \"d/te-lbl\"\ntest_limit = 30",
        )
        .replace("source = \"synthetic\"", "source = \"idx\"")
        .replace("methods = [\"fedavg_full\", \"qubo\", \"random\"]", "methods = [\"qubo\"]");
    let path = tmp.path().join("exp.toml");
    fs::write(&path, text).unwrap();
    let cfg = Config::load(&path).unwrap();
    let report = run(&cfg, &opts(&tmp.path().join("out"))).unwrap();
    assert_eq!(report.outputs.len(), 1);
    assert_eq!(report.outputs[0].records.len(), 3);
}

#[test]
fn compare_aligns_methods_and_counts_strategies() {
    let tmp = tempfile::tempdir().unwrap();
    let mut cfg = Config::parse(MINIMAL).unwrap();
    cfg.scenario.seeds = vec![1, 2];
    cfg.scenario.alphas = vec![0.1, 1.0];
    run(&cfg, &opts(tmp.path())).unwrap();
    let cmp = compare(tmp.path()).unwrap();
    assert_eq!(cmp.rows.len(), 2 * 2 * 3);
    let csv = cmp.to_csv();
    let header = csv.lines().next().unwrap();
    assert!(header.contains("qubo_minus_fedavg") && header.contains("qubo_minus_random"), "{header}");
    let total: usize = cmp.histogram.iter().map(|(_, c)| c).sum();
    assert_eq!(total, 3 * 2 * 2);
    let table = cmp.render();
    assert!(table.contains("strategy wins"));
}

#[test]
fn compare_rejects_single_method_and_missing_cells() {
    let tmp = tempfile::tempdir().unwrap();
    let mut cfg = Config::parse(MINIMAL).unwrap();
    cfg.scenario.methods = vec![qubofl_cli::config::MethodName::Qubo];
    run(&cfg, &opts(tmp.path())).unwrap();
    assert!(compare(tmp.path()).is_err());

    let full = tempfile::tempdir().unwrap();
    let mut cfg = Config::parse(MINIMAL).unwrap();
    cfg.scenario.seeds = vec![1, 2];
    run(&cfg, &opts(full.path())).unwrap();
    fs::remove_file(full.path().join("results/random_a0.5_s2.csv")).unwrap();
    let err = compare(full.path()).unwrap_err().to_string();
    assert!(err.contains("random alpha=0.5 seed=2"), "{err}");
}
