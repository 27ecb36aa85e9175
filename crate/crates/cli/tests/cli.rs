use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use pcskew::matrix::DataMatrix;
use pcskew::sim::{self, Case, ScoreDistribution, SimSpec};
use pcskew_cli::document::{ResultDocument, SCHEMA_VERSION};
use pcskew_cli::input::{self, Delimiter, InputError, Orientation, ReadOptions};
use serde_json::Value;

fn bin() -> Command {
    let mut c = Command::new(env!("CARGO_BIN_EXE_pcskew"));
    c.env_remove("PC_COUNT_THREADS").env("RUST_LOG", "off");
    c
}

fn run(args: &[&str]) -> Output {
    bin().args(args).output().unwrap()
}

fn write_csv(path: &Path, x: &DataMatrix) {
    let mut s = String::new();
    for row in x.values().rows() {
        let cells: Vec<String> = row.iter().map(|v| format!("{v}")).collect();
        s.push_str(&cells.join(","));
        s.push('\n');
    }
    std::fs::write(path, s).unwrap();
}

/// Three well-separated spikes over unit noise.
fn spiked_file(dir: &Path, n: usize, d: usize, seed: u64) -> PathBuf {
    let model = sim::eigen_model(d, 3, 0.3, 1.0, 0.0).unwrap();
    let z = sim::sample_panel(n, d, ScoreDistribution::StandardNormal, seed, 0);
    let path = dir.join(format!("spiked_{n}x{d}_{seed}.csv"));
    write_csv(&path, &sim::synth_data(&model, &z).unwrap());
    path
}

fn schema() -> jsonschema::Validator {
    let text = include_str!("../schema/result-document.schema.json");
    jsonschema::validator_for(&serde_json::from_str(text).unwrap()).unwrap()
}

fn assert_valid(doc: &Value) {
    let validator = schema();
    let errors: Vec<String> = validator.iter_errors(doc).map(|e| format!("{e} at {}", e.instance_path())).collect();
    assert!(errors.is_empty(), "{errors:#?}");
}

fn document(out: &Output) -> Value {
    assert!(out.status.success(), "stderr: {}", String::from_utf8_lossy(&out.stderr));
    serde_json::from_slice(&out.stdout).unwrap()
}

fn error_object(out: &Output) -> Value {
    let stderr = String::from_utf8_lossy(&out.stderr);
    let last = stderr.lines().last().unwrap_or_default();
    serde_json::from_str(last).unwrap_or_else(|_| panic!("no JSON error object in {stderr}"))
}

fn without_timing(mut v: Value) -> Value {
    v.as_object_mut().unwrap().remove("timing");
    v
}

#[test]
fn reads_rows_and_columns() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("m.csv");
    std::fs::write(&path, "1,2\n3,4\n5,6\n").unwrap();
    let rows = input::read_matrix(&path, &ReadOptions::default()).unwrap();
    assert_eq!((rows.matrix.n(), rows.matrix.d()), (3, 2));
    assert_eq!(rows.warnings.len(), 1, "n > d without an explicit orientation warns");
    let cols = input::read_matrix(
        &path,
        &ReadOptions {
            orientation: Some(Orientation::Columns),
            ..Default::default()
        },
    )
    .unwrap();
    assert_eq!((cols.matrix.n(), cols.matrix.d()), (2, 3));
    assert_eq!(cols.matrix.values()[[1, 2]], 6.0);
    assert!(cols.warnings.is_empty());
}

#[test]
fn parse_errors_name_the_cell() {
    let t = |text: &str| input::parse_table(text, Delimiter::Auto, false);
    assert_eq!(t("1,2\n3,NA\n"), Err(InputError::MissingValue { line: 2, column: 2 }));
    assert_eq!(t("1,2\n3,,4\n").unwrap_err(), InputError::RaggedRows { line: 2, expected: 2, found: 3 });
    assert_eq!(
        t("1,2\n\n3,x\n"),
        Err(InputError::Parse {
            line: 3,
            column: 2,
            token: "x".into()
        })
    );
    assert_eq!(t("1,inf\n").unwrap_err(), InputError::Parse { line: 1, column: 2, token: "inf".into() });
    assert_eq!(t("# only a comment\n\n"), Err(InputError::EmptyInput));
}

#[test]
fn delimiters_and_header() {
    let ws = input::parse_table("a b c\n1  2\t3\n4 5 6\n", Delimiter::Space, true).unwrap();
    assert_eq!(ws.shape(), &[2, 3]);
    let tab = input::parse_table("1\t2\n3\t4\n", Delimiter::Auto, false).unwrap();
    assert_eq!(tab[[1, 0]], 3.0);
    assert!(input::parse_table("x,y\n1,2\n", Delimiter::Auto, false).is_err());
}

#[test]
fn estimate_finds_three_spikes() {
    let dir = tempfile::tempdir().unwrap();
    let file = spiked_file(dir.path(), 60, 2000, 4);
    let doc = document(&run(&["estimate", file.to_str().unwrap()]));
    assert_valid(&doc);
    for e in doc["estimates"].as_array().unwrap() {
        assert_eq!(e["m_hat"], 3, "{}", e["test"]);
    }
    assert_eq!(doc["input"]["n"], 60);
    assert_eq!(doc["input"]["d"], 2000);
    let bytes = std::fs::read(&file).unwrap();
    assert_eq!(doc["input"]["sha256"], input::sha256_hex(&bytes));
    assert_eq!(doc["scree"].as_array().unwrap().len(), 60);
}

#[test]
fn documents_are_deterministic_and_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let file = spiked_file(dir.path(), 40, 800, 5);
    let a = run(&["estimate", file.to_str().unwrap(), "--center"]);
    let b = run(&["estimate", file.to_str().unwrap(), "--center"]);
    assert_eq!(without_timing(document(&a)), without_timing(document(&b)));
    let parsed: ResultDocument = serde_json::from_slice(&a.stdout).unwrap();
    assert_eq!(parsed.to_json().as_bytes(), a.stdout.as_slice());
}

#[test]
fn alpha_choice_does_not_matter_on_a_sharp_transition() {
    let dir = tempfile::tempdir().unwrap();
    let file = spiked_file(dir.path(), 60, 2000, 6);
    let lo = document(&run(&["estimate", file.to_str().unwrap(), "--alpha", "0.1"]));
    let hi = document(&run(&["estimate", file.to_str().unwrap(), "--alpha", "0.5"]));
    for (a, b) in lo["estimates"].as_array().unwrap().iter().zip(hi["estimates"].as_array().unwrap()) {
        assert_eq!(a["m_hat"], b["m_hat"]);
    }
}

#[test]
fn missing_file_fails_without_output() {
    let dir = tempfile::tempdir().unwrap();
    let out_path = dir.path().join("out.json");
    let plots = dir.path().join("plots");
    let out = run(&[
        "estimate",
        dir.path().join("absent.csv").to_str().unwrap(),
        "--out",
        out_path.to_str().unwrap(),
        "--plot-data",
        plots.to_str().unwrap(),
    ]);
    assert_eq!(out.status.code(), Some(2));
    assert_eq!(error_object(&out)["error"]["kind"], "input");
    assert!(!out_path.exists());
    assert!(!plots.exists());
    assert!(out.stdout.is_empty());
}

#[test]
fn exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    let file = spiked_file(dir.path(), 30, 200, 7);
    let f = file.to_str().unwrap();
    assert_eq!(run(&["estimate", f, "--alpha", "1.5"]).status.code(), Some(4));
    assert_eq!(run(&["estimate", f, "--max-k", "40"]).status.code(), Some(4));
    assert_eq!(run(&["estimate", f, "--bogus"]).status.code(), Some(4));
    assert_eq!(run(&["simulate", "--reps", "0"]).status.code(), Some(4));
    // A spike below the first tail eigenvalue.
    let out = run(&["simulate", "--case", "custom", "--d", "20", "--s", "0.1", "--reps", "1", "--n", "12"]);
    assert_eq!(out.status.code(), Some(4));
    assert_eq!(error_object(&out)["error"]["exit_code"], 4);

    let tiny = dir.path().join("tiny.csv");
    std::fs::write(&tiny, "1,2,3\n4,5,7\n9,1,1\n").unwrap();
    assert_eq!(run(&["estimate", tiny.to_str().unwrap(), "--test", "dagostino"]).status.code(), Some(2));

    // Rank one: every residual beyond the first component is zero.
    let flat = dir.path().join("flat.csv");
    let rows: Vec<String> = (1..=12).map(|i| format!("{i},{},{}", 2 * i, 3 * i)).collect();
    std::fs::write(&flat, rows.join("\n")).unwrap();
    let out = run(&["estimate", flat.to_str().unwrap(), "--orientation", "rows", "--max-k", "2"]);
    assert_eq!(out.status.code(), Some(3), "{}", String::from_utf8_lossy(&out.stderr));

    assert_eq!(run(&["version"]).status.code(), Some(0));
    assert_eq!(run(&["--help"]).status.code(), Some(0));
}

#[test]
fn plot_data_files() {
    let dir = tempfile::tempdir().unwrap();
    let file = spiked_file(dir.path(), 40, 500, 8);
    let plots = dir.path().join("plots");
    let out_path = dir.path().join("doc.json");
    let out = run(&[
        "estimate",
        file.to_str().unwrap(),
        "--max-k",
        "10",
        "--out",
        out_path.to_str().unwrap(),
        "--plot-data",
        plots.to_str().unwrap(),
    ]);
    assert!(out.status.success());
    assert!(out.stdout.is_empty());
    let p = std::fs::read_to_string(plots.join("pvalues.tsv")).unwrap();
    let lines: Vec<&str> = p.lines().collect();
    assert_eq!(lines[0], "k\tp_triples\tp_dagostino");
    assert_eq!(lines.len(), 12);
    for line in &lines[1..] {
        let cells: Vec<f64> = line.split('\t').map(|c| c.parse().unwrap()).collect();
        assert_eq!(cells.len(), 3);
    }
    let scree = std::fs::read_to_string(plots.join("scree.tsv")).unwrap();
    let last: Vec<f64> = scree.lines().last().unwrap().split('\t').map(|c| c.parse().unwrap()).collect();
    assert!((last[2] - 100.0).abs() < 1e-9);
    let doc: Value = serde_json::from_str(&std::fs::read_to_string(out_path).unwrap()).unwrap();
    assert_valid(&doc);
}

#[test]
fn alpha_sweep_reuses_document_pvalues() {
    let dir = tempfile::tempdir().unwrap();
    let file = spiked_file(dir.path(), 60, 2000, 9);
    let prior_path = dir.path().join("prior.json");
    let out = run(&["estimate", file.to_str().unwrap(), "--out", prior_path.to_str().unwrap()]);
    assert!(out.status.success());
    let prior: Value = serde_json::from_str(&std::fs::read_to_string(&prior_path).unwrap()).unwrap();

    let plots = dir.path().join("plots");
    let reused = document(&run(&[
        "alpha-sweep",
        "--from",
        prior_path.to_str().unwrap(),
        "--alphas",
        "0.02,0.1,0.5,0.9",
        "--plot-data",
        plots.to_str().unwrap(),
    ]));
    assert_valid(&reused);
    assert_eq!(reused["timing"]["reused_pvalues"], true);
    assert_eq!(reused["input"], prior["input"]);
    let fresh = document(&run(&["alpha-sweep", file.to_str().unwrap(), "--alphas", "0.02,0.1,0.5,0.9"]));
    assert_valid(&fresh);
    assert_eq!(fresh["timing"]["reused_pvalues"], false);
    assert_eq!(fresh["alpha_sweep"], reused["alpha_sweep"]);

    let table = std::fs::read_to_string(plots.join("alpha_sweep.tsv")).unwrap();
    assert_eq!(table.lines().count(), 5);
    assert!(table.starts_with("alpha\tm_hat_triples\tm_hat_dagostino\n"));

    // A one-point grid is the plain estimate.
    let single = document(&run(&["alpha-sweep", "--from", prior_path.to_str().unwrap(), "--alphas", "0.1"]));
    for (series, e) in single["alpha_sweep"].as_array().unwrap().iter().zip(prior["estimates"].as_array().unwrap()) {
        assert_eq!(series["points"][0]["m_hat"], e["m_hat"]);
    }
}

#[test]
fn simulate_presets_and_config() {
    let out = document(&run(&["simulate", "--case", "IV", "--d", "300", "--n", "30", "--m", "2", "--reps", "3"]));
    assert_valid(&out);
    let cfg = &out["config"];
    assert_eq!((cfg["s"].as_f64(), cfg["g"].as_f64(), cfg["beta"].as_f64()), (Some(0.1), Some(0.5), Some(0.3)));
    assert_eq!(cfg["distribution"], "student_t3");
    assert_eq!(out["simulation"]["replicates"].as_array().unwrap().len(), 3);

    let dir = tempfile::tempdir().unwrap();
    let config = dir.path().join("sim.conf");
    std::fs::write(&config, "# small run\ncase = II\nd = 300\nn = 30\nm = 2\nreps = 2\nseed = 11\nestimators = dagostino\n").unwrap();
    let plots = dir.path().join("plots");
    let out = document(&run(&[
        "simulate",
        "--config",
        config.to_str().unwrap(),
        "--seed",
        "12",
        "--plot-data",
        plots.to_str().unwrap(),
    ]));
    assert_eq!(out["config"]["seed"], 12, "flags win over the config file");
    assert_eq!(out["config"]["replicates"], 2);
    assert_eq!(out["config"]["beta"].as_f64(), Some(0.3));
    let hist = std::fs::read_to_string(plots.join("histogram.tsv")).unwrap();
    assert!(hist.starts_with("m_hat\tdagostino\n"));

    // The echoed config is itself a valid config file.
    let echoed = dir.path().join("echo.json");
    std::fs::write(&echoed, out["config"].to_string()).unwrap();
    let again = document(&run(&["simulate", "--config", echoed.to_str().unwrap()]));
    assert_eq!(again["simulation"], out["simulation"]);
}

#[test]
fn scaled_down_case_one_simulation() {
    let out = document(&run(&[
        "simulate", "--case", "I", "--m", "3", "--d", "2000", "--n", "100", "--reps", "50", "--estimators", "dagostino",
    ]));
    let mean = out["simulation"]["methods"]["dagostino"]["mean"].as_f64().unwrap();
    assert!((2.8..=3.2).contains(&mean), "{mean}");
}

#[test]
fn thread_variable() {
    let sim_args = ["simulate", "--d", "200", "--n", "20", "--m", "1", "--reps", "4"];
    let one = bin().args(sim_args).env("PC_COUNT_THREADS", "1").output().unwrap();
    let many = bin().args(sim_args).env("PC_COUNT_THREADS", "3").output().unwrap();
    assert_eq!(without_timing(document(&one)), without_timing(document(&many)));
    let bad = bin().args(sim_args).env("PC_COUNT_THREADS", "zero").output().unwrap();
    assert_eq!(bad.status.code(), Some(4));
}

#[test]
fn schema_version_matches_published_schema() {
    let schema: Value = serde_json::from_str(include_str!("../schema/result-document.schema.json")).unwrap();
    assert_eq!(schema["properties"]["schema_version"]["const"], SCHEMA_VERSION);
}

#[test]
fn spec_round_trips_via_document_config() {
    let mut spec = SimSpec::case(Case::III, 250, 25, 2);
    spec.replicates = 1;
    let doc_config = serde_json::to_value(pcskew_cli::document::RunConfig::Simulation(spec.clone())).unwrap();
    let back: pcskew_cli::document::RunConfig = serde_json::from_value(doc_config).unwrap();
    assert_eq!(back, pcskew_cli::document::RunConfig::Simulation(spec));
}
