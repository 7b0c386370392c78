use std::path::Path;
use std::process::{Command, Output};

const SMALL: [&str; 6] = ["--set", "train_size=400", "--set", "test_size=400", "--set", "epochs=2"];

fn spurlab(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_spurlab")).args(args).output().unwrap()
}

fn ok(args: &[&str]) -> String {
    let out = spurlab(args);
    assert!(
        out.status.success(),
        "{args:?} failed: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    String::from_utf8(out.stdout).unwrap()
}

fn p(path: &Path) -> &str {
    path.to_str().unwrap()
}

#[test]
fn usage_errors_exit_with_two() {
    let out = spurlab(&["train", "--method", "standard"]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).starts_with("error: usage:"));
    let out = spurlab(&["frobnicate"]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn config_errors_name_the_key() {
    let dir = tempfile::tempdir().unwrap();
    let out = spurlab(&["gen", "--out", p(dir.path()), "--set", "epcohs=3"]);
    assert_eq!(out.status.code(), Some(1));
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.starts_with("error: config:"), "{err}");
    assert!(err.contains("epcohs"));
    assert_eq!(err.lines().count(), 1);

    let cfg = dir.path().join("run.cfg");
    std::fs::write(&cfg, "epochs = 3\nepochs = 4\n").unwrap();
    let out = spurlab(&["gen", "--out", p(dir.path()), "--config", p(&cfg)]);
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("run.cfg:2: duplicate key `epochs`"));
}

#[test]
fn missing_files_are_io_errors() {
    let out = spurlab(&["eval", "--model", "/nonexistent/model", "--data", "/nonexistent"]);
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).starts_with("error: io:"));
}

#[test]
fn pipeline_from_gen_to_project() {
    let dir = tempfile::tempdir().unwrap();
    let data = dir.path().join("data");
    let init = dir.path().join("planted.model");
    let run = dir.path().join("run");

    let mut args = vec!["gen", "--out", p(&data)];
    args.extend(SMALL);
    let sizes = ok(&args);
    assert!(sizes.contains("train_biased"));
    for f in ["vocab.tsv", "bias.txt", "train_pool.tsv", "test_challenging.tsv", "run.cfg"] {
        assert!(data.join(f).exists(), "{f}");
    }

    let mut args = vec!["plant", "--out", p(&init)];
    args.extend(SMALL);
    ok(&args);

    let mut args = vec!["train", "--method", "nfl-co", "--data", p(&data), "--init", p(&init), "--out", p(&run)];
    args.extend(SMALL);
    ok(&args);
    let log = std::fs::read_to_string(run.join("train.log")).unwrap();
    assert_eq!(log.lines().count(), 2);
    let model = run.join("model");

    let eval = ok(&["eval", "--model", p(&model), "--data", p(&data), "--name", "co"]);
    let row = eval.lines().find(|l| l.starts_with("co\t")).unwrap();
    let cols: Vec<f64> = row.split('\t').skip(1).map(|c| c.parse().unwrap()).collect();
    assert!((cols[2] - (cols[1] - cols[0])).abs() < 1e-9);

    let nn = ok(&["neighbors", "--model", p(&model), "--target", "s_neg", "--k", "5"]);
    assert_eq!(nn.lines().filter(|l| !l.is_empty()).count(), 6);

    let score = ok(&[
        "score", "--reference", p(&model), "--initial", p(&init), "--finetuned", p(&init), "--data", p(&data),
        "--target", "s_pos", "--k", "20",
    ]);
    let last = score.lines().last().unwrap();
    assert!(last.ends_with("\t20\t0.0000\t0.000000"), "{last}");

    let csv = dir.path().join("proj.csv");
    let svg = dir.path().join("proj.svg");
    ok(&["project", "--model", p(&model), "--reference", p(&model), "--out", p(&csv), "--svg", p(&svg)]);
    assert!(std::fs::read_to_string(&csv).unwrap().starts_with("surface,px,py,polarity\n"));
    assert!(std::fs::read_to_string(&svg).unwrap().starts_with("<svg"));

    let out = spurlab(&["neighbors", "--model", p(&model), "--target", "BOS"]);
    assert_eq!(out.status.code(), Some(1));
}

#[test]
fn train_is_deterministic() {
    let dir = tempfile::tempdir().unwrap();
    let data = dir.path().join("data");
    let init = dir.path().join("planted.model");
    let mut args = vec!["gen", "--out", p(&data)];
    args.extend(SMALL);
    ok(&args);
    let mut args = vec!["plant", "--out", p(&init)];
    args.extend(SMALL);
    ok(&args);
    let mut models = Vec::new();
    for name in ["a", "b"] {
        let out = dir.path().join(name);
        let mut args = vec!["train", "--data", p(&data), "--init", p(&init), "--out", p(&out), "--epochs", "1"];
        args.extend(SMALL);
        ok(&args);
        models.push(std::fs::read(out.join("model")).unwrap());
    }
    assert_eq!(models[0], models[1]);
}

#[test]
fn gradcheck_reports_every_method() {
    let out = ok(&["gradcheck"]);
    for m in ["standard", "nfl-f", "nfl-co", "nfl-cp", "nfl-pt"] {
        let line = out.lines().find(|l| l.starts_with(&format!("{m}\t"))).unwrap();
        assert!(line.ends_with("\tok"), "{line}");
    }
}
