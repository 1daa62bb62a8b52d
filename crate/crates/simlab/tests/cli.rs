//! End-to-end tests against the compiled `simlab` binary: exit codes,
//! output determinism, and stable CSV schemas.

use std::path::Path;
use std::process::{Command, Output};

fn simlab(args: &[&str], dir: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_simlab"))
        .args(args)
        .current_dir(dir)
        .output()
        .expect("binary runs")
}

#[test]
fn help_and_version_exit_zero() {
    let dir = tempfile::tempdir().unwrap();
    for flag in ["--help", "--version"] {
        let out = simlab(&[flag], dir.path());
        assert!(out.status.success(), "{flag} exited nonzero");
    }
    let help = simlab(&["--help"], dir.path());
    let text = String::from_utf8(help.stdout).unwrap();
    for sub in ["run", "sample", "integrate", "markov", "process", "ssa", "mcmc"] {
        assert!(text.contains(sub), "--help does not mention '{sub}'");
    }
}

#[test]
fn usage_error_exits_two() {
    let dir = tempfile::tempdir().unwrap();
    let out = simlab(&["frobnicate"], dir.path());
    assert_eq!(out.status.code(), Some(2));
    let out = simlab(&["run"], dir.path()); // missing --scenario
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn unknown_scenario_exits_two_and_lists_registry() {
    let dir = tempfile::tempdir().unwrap();
    let out = simlab(&["run", "--scenario", "nope"], dir.path());
    assert_eq!(out.status.code(), Some(2));
    let err = String::from_utf8(out.stderr).unwrap();
    assert!(err.contains("monty_hall") && err.contains("portfolio_var"), "{err}");
}

#[test]
fn model_error_exits_three() {
    let dir = tempfile::tempdir().unwrap();
    std::fs::write(
        dir.path().join("reducible.json"),
        r#"{"labels": ["a", "b"], "P": [[1.0, 0.0], [0.0, 1.0]]}"#,
    )
    .unwrap();
    let out = simlab(
        &["markov", "stationary", "--chain", "reducible.json"],
        dir.path(),
    );
    assert_eq!(out.status.code(), Some(3));
}

#[test]
fn same_seed_gives_byte_identical_output_files() {
    let dir = tempfile::tempdir().unwrap();
    let run = |name: &str| {
        let out = simlab(
            &[
                "run", "--scenario", "gamblers_ruin", "--seed", "1", "--n", "2000",
                "--out", name,
            ],
            dir.path(),
        );
        assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
        std::fs::read(dir.path().join(name)).unwrap()
    };
    let (a, b) = (run("a.csv"), run("b.csv"));
    assert_eq!(a, b);
}

#[test]
fn monty_hall_summary_covers_two_thirds() {
    let dir = tempfile::tempdir().unwrap();
    let out = simlab(
        &["run", "--scenario", "monty_hall", "--n", "100000", "--seed", "1"],
        dir.path(),
    );
    assert!(out.status.success());
    let text = String::from_utf8(out.stdout).unwrap();
    let field = |key: &str| -> f64 {
        text.split_whitespace()
            .find_map(|tok| tok.strip_prefix(&format!("{key}=")))
            .unwrap_or_else(|| panic!("summary line lacks {key}=: {text}"))
            .parse()
            .unwrap()
    };
    let (est, hw) = (field("estimate"), field("half_width"));
    assert!(
        (est - 2.0 / 3.0).abs() <= hw,
        "estimate {est} ± {hw} does not cover 2/3"
    );
}

#[test]
fn snakes_ladders_reports_the_three_board_statistics() {
    let dir = tempfile::tempdir().unwrap();
    std::fs::write(
        dir.path().join("board.json"),
        r#"{"size": 30, "jumps": {"3": 14, "12": 5}}"#,
    )
    .unwrap();
    let out = simlab(
        &[
            "run", "--scenario", "snakes_ladders", "--board", "board.json", "--n",
            "10000",
        ],
        dir.path(),
    );
    assert!(out.status.success());
    let text = String::from_utf8(out.stdout).unwrap();
    for key in ["estimate=", "p_exactly_30=", "p_within_30="] {
        assert!(text.contains(key), "summary lacks {key}: {text}");
    }
}

#[test]
fn csv_schema_is_stable_for_scenario_runs() {
    let dir = tempfile::tempdir().unwrap();
    let golden = [
        ("gamblers_ruin", "n,estimate,half_width,exact"),
        ("mc_pi", "n,estimate,half_width,exact"),
        ("sir_ode", "time,s,i,r"),
        ("weather_chain", "state,pi1,pi2,stationary,p7_row0"),
    ];
    for (scenario, header) in golden {
        let file = format!("{scenario}.csv");
        let out = simlab(
            &[
                "run", "--scenario", scenario, "--seed", "1", "--n", "2000", "--out",
                &file,
            ],
            dir.path(),
        );
        assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
        let text = std::fs::read_to_string(dir.path().join(file)).unwrap();
        assert!(
            text.contains(&format!("\r\n{header}\r\n")),
            "{scenario} artifact lost its header '{header}':\n{text}"
        );
        assert!(text.starts_with("# command,run"));
        assert!(text.contains("# seed,1"));
    }
}

#[test]
fn json_artifact_parses_and_embeds_parameters() {
    let dir = tempfile::tempdir().unwrap();
    let out = simlab(
        &[
            "run", "--scenario", "european_call", "--n", "500", "--seed", "4",
            "--format", "json", "--out", "call.json", "--quiet",
        ],
        dir.path(),
    );
    assert!(out.status.success());
    assert!(out.stdout.is_empty(), "--quiet still printed to stdout");
    let text = std::fs::read_to_string(dir.path().join("call.json")).unwrap();
    let doc: serde_json::Value = serde_json::from_str(&text).unwrap();
    assert_eq!(doc["meta"]["scenario"], "european_call");
    assert_eq!(doc["meta"]["param:strike"], "100");
    assert!(doc["tables"]["results"]["rows"].as_array().unwrap().len() >= 1);
}

#[test]
fn sample_writes_one_variate_per_line_plus_histogram() {
    let dir = tempfile::tempdir().unwrap();
    let out = simlab(
        &[
            "sample", "--dist", "exponential", "--params", "lambda=2", "--n", "400",
            "--hist", "10", "--seed", "6", "--out", "draws.csv",
        ],
        dir.path(),
    );
    assert!(out.status.success());
    let text = std::fs::read_to_string(dir.path().join("draws.csv")).unwrap();
    let data_lines = text
        .lines()
        .skip_while(|l| *l != "value")
        .skip(1)
        .take_while(|l| !l.is_empty())
        .count();
    assert_eq!(data_lines, 400);
    assert!(text.contains("# table,histogram"));
    assert!(text.contains("bin_left,bin_right,count"));
}

#[test]
fn ssa_run_writes_ensemble_grid() {
    let dir = tempfile::tempdir().unwrap();
    let out = simlab(
        &[
            "ssa", "run", "--model", "decay", "--reps", "20", "--grid", "0.5",
            "--seed", "2", "--out", "ens.csv",
        ],
        dir.path(),
    );
    assert!(out.status.success());
    let text = std::fs::read_to_string(dir.path().join("ens.csv")).unwrap();
    assert!(text.contains("time,mean_y"));
    // grid 0..=4 in steps of 0.5 → 9 data rows
    let rows = text
        .lines()
        .skip_while(|l| *l != "time,mean_y")
        .skip(1)
        .take_while(|l| !l.is_empty())
        .count();
    assert_eq!(rows, 9);
}
