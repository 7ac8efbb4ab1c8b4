//! The `robexplain` binary, driven end to end through its subcommands.

use std::path::Path;
use std::process::{Command, Output};

fn run(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_robexplain"))
        .args(args)
        .output()
        .unwrap()
}

fn ok(args: &[&str]) {
    let out = run(args);
    assert!(
        out.status.success(),
        "{args:?}: {}",
        String::from_utf8_lossy(&out.stderr)
    );
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

#[test]
fn subcommands_chain() {
    let dir = tempfile::tempdir().unwrap();
    let p = |name: &str| dir.path().join(name);
    let (data, model) = (p("data.txt"), p("model.json"));
    ok(&[
        "generate",
        "--d",
        "120",
        "--n-benign",
        "200",
        "--n-malware",
        "150",
        "--n-strong",
        "10",
        "--seed",
        "3",
        "--out",
        s(&data),
    ]);
    ok(&[
        "train",
        "--data",
        s(&data),
        "--classifier",
        "logistic",
        "--out",
        s(&model),
    ]);
    assert!(p("model.json.manifest.json").exists());

    ok(&[
        "attack",
        "--model",
        s(&model),
        "--data",
        s(&data),
        "--epsilon-grid",
        "1,2,5",
        "--fpr",
        "0.05",
        "--out",
        s(&p("attack.csv")),
    ]);
    let attack = std::fs::read_to_string(p("attack.csv")).unwrap();
    assert!(attack.starts_with("sample_id,eps,score_before,score_after,evaded,eps_min"));
    assert_eq!(attack.lines().count(), 1 + 150 * 3);

    ok(&[
        "explain",
        "--model",
        s(&model),
        "--data",
        s(&data),
        "--p",
        "20",
        "--out",
        s(&p("rel.csv")),
    ]);
    ok(&[
        "evenness",
        "--relevances",
        s(&p("rel.csv")),
        "--m",
        "50",
        "--out",
        s(&p("even.csv")),
    ]);
    ok(&[
        "robustness",
        "--model",
        s(&model),
        "--data",
        s(&data),
        "--eps-grid",
        "1,3",
        "--fpr",
        "0.05",
        "--out",
        s(&p("rob.csv")),
    ]);
    ok(&[
        "correlate",
        "--x",
        &format!("{}:e2", s(&p("even.csv"))),
        "--y",
        &format!("{}:R_sample", s(&p("rob_samples.csv"))),
        "--on",
        "sample_id",
        "--out",
        s(&p("corr.csv")),
    ]);
    let corr = std::fs::read_to_string(p("corr.csv")).unwrap();
    assert!(corr.starts_with("method,coefficient,p_value,n,degenerate"));
    assert!(
        corr.lines()
            .skip(1)
            .all(|l| l.split(',').nth(3) == Some("150")),
        "{corr}"
    );
}

#[test]
fn errors_are_reported_as_json() {
    let dir = tempfile::tempdir().unwrap();
    let out = run(&[
        "train",
        "--data",
        s(&dir.path().join("missing.txt")),
        "--out",
        s(&dir.path().join("m.json")),
    ]);
    assert_eq!(out.status.code(), Some(1));
    let err: serde_json::Value = serde_json::from_slice(&out.stderr).unwrap();
    assert!(err["error"]["kind"].is_string());
    assert!(err["error"]["message"].is_string());
}

#[test]
fn experiment_writes_artifacts() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("exp.toml");
    std::fs::write(
        &cfg,
        "eps_grid = [1, 2, 4]\nn_attacked = 10\nig_steps = 10\nm = 20\n\n\
         [dataset]\nkind = \"synthetic\"\nd = 80\nn_benign = 120\nn_malware = 80\nn_strong = 8\n\n\
         [[classifiers]]\nclassifier = \"svm\"\n",
    )
    .unwrap();
    let out = dir.path().join("out");
    ok(&["experiment", "--config", s(&cfg), "--out", s(&out)]);
    for f in [
        "summary.csv",
        "robustness.csv",
        "samples.csv",
        "correlations.csv",
        "manifest.json",
    ] {
        assert!(out.join(f).exists(), "{f}");
    }
}

#[test]
fn shipped_configs_parse() {
    let dir = Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs");
    let mut n = 0;
    for entry in std::fs::read_dir(dir).unwrap() {
        let path = entry.unwrap().path();
        if path.extension().is_some_and(|e| e == "toml") {
            robexplain::pipeline::ExperimentConfig::load(&path)
                .unwrap()
                .validate()
                .unwrap();
            n += 1;
        }
    }
    assert!(n >= 3);
}
