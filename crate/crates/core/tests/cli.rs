use std::process::{Command, Output};

use fracpoisson::large_deviations::rate_ld;
use fracpoisson::model::ModelParams;
use serde_json::Value;

fn run(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_fracpoisson"))
        .args(args)
        .env_remove("FRACPOISSON_SEED")
        .output()
        .unwrap()
}

fn json(out: &Output) -> Value {
    assert_eq!(
        out.status.code(),
        Some(0),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    serde_json::from_slice(&out.stdout).unwrap()
}

#[test]
fn rate_ld_matches_library() {
    let out = run(&[
        "rate-ld", "--nu", "0.7", "--lambda", "0.6,0.9", "--x", "1.0,0.5",
    ]);
    let v = json(&out);
    let p = ModelParams::new(0.7, vec![0.6, 0.9]).unwrap();
    let lib = rate_ld(&p, &[1.0, 0.5]).unwrap();
    assert_eq!(v["value"].as_f64().unwrap(), lib.value.to_f64());
    let maximizer: Vec<f64> = v["maximizer"]
        .as_array()
        .unwrap()
        .iter()
        .map(|x| x.as_f64().unwrap())
        .collect();
    let expected: Vec<f64> = lib.maximizer.unwrap().iter().map(|x| x.to_f64()).collect();
    assert_eq!(maximizer, expected);
}

#[test]
fn infinite_values_are_strings() {
    let v = json(&run(&[
        "estimate",
        "--nu-unknown",
        "--lambda",
        "0.6,0.9",
        "--t",
        "200",
        "--sum",
        "0",
    ]));
    assert_eq!(v["nu_hat"], "inf");
    let v = json(&run(&[
        "rate-ld", "--nu", "0.7", "--lambda", "0.6,0.9", "--x", "-0.3,0.2",
    ]));
    assert_eq!(v["value"], "inf");
    let v = json(&run(&[
        "rate-j", "--nu", "0.7", "--lambda", "0.6,0.9", "--nu-hat", "inf",
    ]));
    assert!((v["value"].as_f64().unwrap() - 1.5f64.powf(1.0 / 0.7)).abs() < 1e-14);
}

#[test]
fn exit_codes() {
    let out = run(&["estimate", "--lambda", "0.3,0.4", "--t", "10", "--sum", "3"]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("estimator requires s(lambda) >= 1"));
    assert_eq!(
        run(&["rate-ld", "--nu", "1.5", "--lambda", "1", "--x", "1"])
            .status
            .code(),
        Some(2)
    );
    assert_eq!(
        run(&["rate-ld", "--nu", "0.7", "--lambda", "1,2", "--x", "1"])
            .status
            .code(),
        Some(2)
    );
    assert_eq!(run(&["no-such-command"]).status.code(), Some(2));
    // A value beyond the f64 range is a numerical failure.
    let out = run(&["ml", "--alpha", "0.5", "--beta", "1", "--z", "40"]);
    assert_eq!(out.status.code(), Some(1));
    let v = json(&run(&[
        "ml", "--alpha", "0.5", "--beta", "1", "--z", "40", "--log",
    ]));
    assert!(v["log_value"].as_f64().unwrap() > 1500.0);
}

#[test]
fn every_subcommand_has_help() {
    for cmd in [
        "ml",
        "pmf",
        "mgf",
        "moments",
        "rate-ld",
        "rate-md",
        "estimate",
        "rate-j",
        "sample",
        "experiment",
    ] {
        let out = run(&[cmd, "--help"]);
        assert_eq!(out.status.code(), Some(0), "{cmd}");
        let text = String::from_utf8_lossy(&out.stdout);
        assert!(text.contains("--format") || cmd == "experiment", "{cmd}");
    }
}

#[test]
fn csv_output_has_header_and_records() {
    let out = run(&[
        "pmf",
        "--nu",
        "0.7",
        "--lambda",
        "0.6,0.9",
        "--t",
        "1",
        "--max-sum",
        "2",
        "--format",
        "csv",
    ]);
    assert_eq!(out.status.code(), Some(0));
    let mut reader = csv::Reader::from_reader(out.stdout.as_slice());
    let header: Vec<String> = reader.headers().unwrap().iter().map(String::from).collect();
    assert_eq!(header, ["k_1", "k_2", "sum", "log_pmf", "pmf"]);
    assert_eq!(reader.records().count(), 6);
}

#[test]
fn json_outputs_reparse() {
    let cases: &[&[&str]] = &[
        &["ml", "--alpha", "0.7", "--beta", "1", "--z", "5"],
        &[
            "pmf",
            "--nu",
            "0.7",
            "--lambda",
            "0.6,0.9",
            "--t",
            "2",
            "--marginal",
        ],
        &[
            "pmf", "--nu", "0.7", "--lambda", "0.6,0.9", "--t", "2", "--k", "1,2",
        ],
        &[
            "mgf", "--nu", "0.7", "--lambda", "0.6,0.9", "--t", "2", "--theta", "-0.3,0.2",
        ],
        &["moments", "--nu", "0.7", "--lambda", "0.6,0.9", "--t", "5"],
        &[
            "rate-md", "--nu", "0.7", "--lambda", "0.6,0.9", "--x", "0.2,-0.1",
        ],
        &[
            "rate-ld", "--nu", "0.7", "--lambda", "0.6,0.9", "--x", "1,0.5", "--oracle",
        ],
        &[
            "sample", "--nu", "0.7", "--lambda", "0.6,0.9", "--t", "5", "--n", "3",
        ],
    ];
    for args in cases {
        let v = json(&run(args));
        assert!(v.is_object() || v.is_array(), "{args:?}");
    }
}

#[test]
fn sample_seed_from_environment() {
    let base = [
        "sample", "--nu", "0.7", "--lambda", "0.6,0.9", "--t", "5", "--n", "20",
    ];
    let with_env = |seed: &str| {
        Command::new(env!("CARGO_BIN_EXE_fracpoisson"))
            .args(base)
            .env("FRACPOISSON_SEED", seed)
            .output()
            .unwrap()
            .stdout
    };
    let mut flagged = base.to_vec();
    flagged.extend(["--seed", "77"]);
    assert_eq!(with_env("77"), run(&flagged).stdout);
    assert_ne!(with_env("77"), with_env("78"));
}

#[test]
fn experiment_reports_are_byte_identical() {
    let dir = tempfile::tempdir().unwrap();
    let config = dir.path().join("exp.json");
    std::fs::write(
        &config,
        r#"{"kind":"ld","params":{"nu":0.7,"lambda":[0.6,0.9]},"t_grid":[5,10],
            "n_per_t":3000,"event":{"type":"half_space","normal":[1,1],"offset":3.5},"seed":3}"#,
    )
    .unwrap();
    let mut reports = Vec::new();
    for stem in ["a", "b"] {
        let stem = dir.path().join(stem);
        let v = json(&run(&[
            "experiment",
            "--config",
            config.to_str().unwrap(),
            "--output",
            stem.to_str().unwrap(),
        ]));
        let csv = std::fs::read(v["csv"].as_str().unwrap()).unwrap();
        let js = std::fs::read(v["json"].as_str().unwrap()).unwrap();
        reports.push((csv, js));
    }
    assert_eq!(reports[0], reports[1]);
    let parsed: Value = serde_json::from_slice(&reports[0].1).unwrap();
    assert_eq!(parsed["rows"].as_array().unwrap().len(), 2);

    // Default output stem sits next to the config.
    json(&run(&["experiment", "--config", config.to_str().unwrap()]));
    assert!(dir.path().join("exp.report.csv").exists());

    let bad = dir.path().join("bad.json");
    std::fs::write(&bad, r#"{"kind":"ld"}"#).unwrap();
    assert_eq!(
        run(&["experiment", "--config", bad.to_str().unwrap()])
            .status
            .code(),
        Some(2)
    );
}
