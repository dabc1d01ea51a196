//! End-to-end tests of the `mousedyn` binary.

use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn mousedyn(args: &[&str], cwd: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_mousedyn"))
        .args(args)
        .current_dir(cwd)
        .env_remove("MOUSEDYN_OUTPUT_DIR")
        .output()
        .expect("binary runs")
}

fn stdout(output: &Output) -> String {
    String::from_utf8_lossy(&output.stdout).into_owned()
}

fn stderr(output: &Output) -> String {
    String::from_utf8_lossy(&output.stderr).into_owned()
}

fn synth_logs(dir: &Path, users: u32, seconds: u32) {
    let out = mousedyn(
        &[
            "synth",
            "--users",
            &users.to_string(),
            "--duration",
            &seconds.to_string(),
            "--seed",
            "9",
            "--output",
            "logs",
        ],
        dir,
    );
    assert!(out.status.success(), "{}", stderr(&out));
}

#[test]
fn parse_reports_duplicates_and_writes_cleaned_logs() {
    let dir = tempfile::tempdir().unwrap();
    fs::create_dir(dir.path().join("logs")).unwrap();
    // Two duplicate rows, mirroring the published listing's red rows.
    fs::write(
        dir.path().join("logs/user_0.txt"),
        "Timestamp\tX\tY\tEvent Type\tUser ID\n\
         1.00 10 10 -1 0\n1.01 11 10 -1 0\n1.02 11 10 -1 0\n\
         1.03 12 11 -1 0\n1.04 12 11 -1 0\n1.05 13 12 -1 0\n",
    )
    .unwrap();

    // A clean second file reports zero duplicates.
    fs::write(
        dir.path().join("logs/user_1.txt"),
        "1.00 10 10 -1 1\n1.01 11 10 -1 1\n1.02 12 10 -1 1\n",
    )
    .unwrap();

    let out = mousedyn(&["parse", "--input", "logs", "--output", "cleaned"], dir.path());
    assert!(out.status.success(), "{}", stderr(&out));
    let text = stdout(&out);
    assert!(text.contains("2 duplicates removed"), "{text}");
    assert!(text.contains("0 duplicates removed"), "{text}");
    assert!(text.contains("duplicates removed: 2"), "{text}");

    let cleaned = fs::read_to_string(dir.path().join("cleaned/user_0.txt")).unwrap();
    assert_eq!(cleaned.lines().count(), 4);
}

#[test]
fn parse_fails_on_empty_directory_and_bad_lines() {
    let dir = tempfile::tempdir().unwrap();
    fs::create_dir(dir.path().join("logs")).unwrap();
    let out = mousedyn(&["parse", "--input", "logs", "--output", "x"], dir.path());
    assert!(!out.status.success());
    assert!(stderr(&out).contains("no input files"), "{}", stderr(&out));

    fs::write(dir.path().join("logs/bad.txt"), "1.0 abc 3 -1 0\n").unwrap();
    let out = mousedyn(&["parse", "--input", "logs", "--output", "x"], dir.path());
    assert!(!out.status.success());
    assert!(stderr(&out).contains("field 2"), "{}", stderr(&out));
}

#[test]
fn run_produces_reports_models_datasets_and_stable_manifest() {
    let dir = tempfile::tempdir().unwrap();
    synth_logs(dir.path(), 3, 30);

    let run = |out_dir: &str| {
        let out = mousedyn(
            &[
                "run", "--input", "logs", "--output", out_dir, "--trees", "10", "--seed", "9",
                "--scenario", "A,B",
            ],
            dir.path(),
        );
        assert!(out.status.success(), "{}", stderr(&out));
        out
    };
    let first = run("out");

    for file in [
        "out/manifest.txt",
        "out/reports/scenario_a.csv",
        "out/reports/scenario_a.txt",
        "out/reports/scenario_b.csv",
        "out/reports/scenario_b.txt",
        "out/models/user_0.json",
        "out/models/user_2.json",
        "out/datasets/user_1_train.csv",
        "out/datasets/user_1_test.csv",
    ] {
        assert!(dir.path().join(file).is_file(), "missing {file}");
    }
    assert!(stdout(&first).contains("Scenario A results"));
    assert!(stdout(&first).contains("Scenario B results"));

    // Identical rerun must reproduce identical bytes.
    let manifest = fs::read(dir.path().join("out/manifest.txt")).unwrap();
    let report_a = fs::read(dir.path().join("out/reports/scenario_a.csv")).unwrap();
    run("out");
    assert_eq!(fs::read(dir.path().join("out/manifest.txt")).unwrap(), manifest);
    assert_eq!(
        fs::read(dir.path().join("out/reports/scenario_a.csv")).unwrap(),
        report_a
    );

    let manifest = String::from_utf8(manifest).unwrap();
    assert!(manifest.contains("config.seed=9"));
    assert!(manifest.contains("config.n_trees=10"));
    assert!(manifest.contains("counts.total_train_genuine="));
    assert!(manifest.contains("input.user_0.txt.sha256="));
}

#[test]
fn run_scenario_selection_controls_report_files() {
    let dir = tempfile::tempdir().unwrap();
    synth_logs(dir.path(), 3, 20);
    let out = mousedyn(
        &[
            "run", "--input", "logs", "--output", "out", "--trees", "5", "--seed", "9",
            "--scenario", "A",
        ],
        dir.path(),
    );
    assert!(out.status.success(), "{}", stderr(&out));
    assert!(dir.path().join("out/reports/scenario_a.csv").is_file());
    assert!(!dir.path().join("out/reports/scenario_b.csv").exists());
}

#[test]
fn config_file_applies_and_flags_override_it() {
    let dir = tempfile::tempdir().unwrap();
    fs::write(
        dir.path().join("run.conf"),
        "synth_users=3\nsynth_duration=20\nn_trees=5\nseed=4\nscenario=A\noutput_dir=confout\n",
    )
    .unwrap();
    let out = mousedyn(
        &["run", "--config", "run.conf", "--trees", "7"],
        dir.path(),
    );
    assert!(out.status.success(), "{}", stderr(&out));
    let manifest = fs::read_to_string(dir.path().join("confout/manifest.txt")).unwrap();
    assert!(manifest.contains("config.n_trees=7"), "{manifest}");
    assert!(manifest.contains("config.synth_users=3"));
    assert!(dir.path().join("confout/sessions/user_0.txt").is_file());
}

#[test]
fn score_streams_a_log_through_a_model() {
    let dir = tempfile::tempdir().unwrap();
    synth_logs(dir.path(), 3, 30);
    let out = mousedyn(
        &[
            "run", "--input", "logs", "--output", "out", "--trees", "10", "--seed", "9",
            "--scenario", "A",
        ],
        dir.path(),
    );
    assert!(out.status.success(), "{}", stderr(&out));

    // The owner's own session authenticates at a high rate.
    let own = mousedyn(
        &[
            "score",
            "--model",
            "out/models/user_0.json",
            "--log",
            "logs/user_0.txt",
        ],
        dir.path(),
    );
    assert!(own.status.success(), "{}", stderr(&own));
    let text = stdout(&own);
    assert!(text.contains("scored"), "{text}");
    assert!(text.lines().next().unwrap().starts_with("0\t"), "{text}");

    // An imposter replay scores without error (decisions are not errors).
    let imposter = mousedyn(
        &[
            "score",
            "--model",
            "out/models/user_0.json",
            "--log",
            "logs/user_1.txt",
        ],
        dir.path(),
    );
    assert!(imposter.status.success());

    // A log shorter than one window scores nothing.
    let head: String = fs::read_to_string(dir.path().join("logs/user_0.txt"))
        .unwrap()
        .lines()
        .take(5)
        .map(|l| format!("{l}\n"))
        .collect();
    fs::write(dir.path().join("short.txt"), head).unwrap();
    let short = mousedyn(
        &[
            "score",
            "--model",
            "out/models/user_0.json",
            "--log",
            "short.txt",
        ],
        dir.path(),
    );
    assert!(short.status.success());
    assert!(stdout(&short).contains("0 actions scored"));

    // Threshold outside [0, 1] is rejected.
    let bad = mousedyn(
        &[
            "score",
            "--model",
            "out/models/user_0.json",
            "--log",
            "logs/user_0.txt",
            "--threshold",
            "1.01",
        ],
        dir.path(),
    );
    assert!(!bad.status.success());
    assert!(stderr(&bad).contains("threshold"), "{}", stderr(&bad));
}

#[test]
fn output_dir_env_var_overrides_flags() {
    let dir = tempfile::tempdir().unwrap();
    synth_logs(dir.path(), 3, 20);
    let out = Command::new(env!("CARGO_BIN_EXE_mousedyn"))
        .args([
            "run", "--input", "logs", "--output", "flagdir", "--trees", "5", "--seed", "9",
            "--scenario", "A",
        ])
        .current_dir(dir.path())
        .env("MOUSEDYN_OUTPUT_DIR", "envdir")
        .output()
        .unwrap();
    assert!(out.status.success(), "{}", stderr(&out));
    assert!(dir.path().join("envdir/manifest.txt").is_file());
    assert!(!dir.path().join("flagdir").exists());
}

#[test]
fn mixed_user_file_aborts_with_stage_and_user() {
    let dir = tempfile::tempdir().unwrap();
    fs::create_dir(dir.path().join("logs")).unwrap();
    fs::write(
        dir.path().join("logs/mixed.txt"),
        "1.0 1 1 -1 0\n1.1 2 2 -1 1\n",
    )
    .unwrap();
    let out = mousedyn(
        &["run", "--input", "logs", "--output", "out"],
        dir.path(),
    );
    assert!(!out.status.success());
    let err = stderr(&out);
    assert!(err.contains("mixed.txt") && err.contains("user id"), "{err}");
}
