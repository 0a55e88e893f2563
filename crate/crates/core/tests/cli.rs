use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn cfkit(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_cfkit")).args(args).output().unwrap()
}

fn stdout(out: &Output) -> String {
    String::from_utf8(out.stdout.clone()).unwrap()
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

struct Fixture {
    _dir: tempfile::TempDir,
    root: PathBuf,
}

impl Fixture {
    fn new() -> Self {
        let dir = tempfile::tempdir().unwrap();
        let root = dir.path().to_path_buf();
        std::fs::write(
            root.join("m1.csv"),
            "user,item,rating\nu1,i1,4\nu1,i2,2\nu2,i1,4\nu2,i3,5\nu3,i2,3\nu3,i3,1\n",
        )
        .unwrap();
        Fixture { _dir: dir, root }
    }

    fn path(&self, name: &str) -> PathBuf {
        self.root.join(name)
    }
}

#[test]
fn bias_fit_and_predict() {
    let f = Fixture::new();
    let model = f.path("bias.txt");
    let out = cfkit(&[
        "fit",
        "--algo",
        "bias",
        "--input",
        s(&f.path("m1.csv")),
        "--output",
        s(&model),
        "--alpha-item",
        "0",
        "--alpha-user",
        "0",
    ]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let out = cfkit(&["predict", "--model", s(&model), "--user", "u1", "--item", "i3"]);
    assert_eq!(out.status.code(), Some(0));
    assert_eq!(stdout(&out).trim().parse::<f64>().unwrap(), 2.75);
    // unknown user: global mean plus the item offset
    let out = cfkit(&["predict", "--model", s(&model), "--user", "nobody", "--item", "i3"]);
    let v: f64 = stdout(&out).trim().parse().unwrap();
    assert!((v - 3.0).abs() < 1e-12, "{v}");
}

#[test]
fn itemknn_predict_needs_ratings() {
    let f = Fixture::new();
    let model = f.path("knn.txt");
    assert!(cfkit(&[
        "fit",
        "--algo",
        "itemknn",
        "--input",
        s(&f.path("m1.csv")),
        "--output",
        s(&model)
    ])
    .status
    .success());
    let out = cfkit(&["predict", "--model", s(&model), "--user", "u2", "--item", "i2"]);
    assert_eq!(out.status.code(), Some(1));
    let out = cfkit(&[
        "predict",
        "--model",
        s(&model),
        "--input",
        s(&f.path("m1.csv")),
        "--user",
        "u2",
        "--item",
        "i2",
    ]);
    assert_eq!(out.status.code(), Some(0));
    assert_eq!(stdout(&out).trim().parse::<f64>().unwrap(), 0.5);
}

#[test]
fn recommend_excludes_rated_items() {
    let f = Fixture::new();
    let model = f.path("bias.txt");
    assert!(cfkit(&[
        "fit",
        "--algo",
        "bias",
        "--input",
        s(&f.path("m1.csv")),
        "--output",
        s(&model)
    ])
    .status
    .success());
    let out = cfkit(&[
        "recommend",
        "--model",
        s(&model),
        "--input",
        s(&f.path("m1.csv")),
        "--user",
        "u1",
        "-n",
        "5",
    ]);
    assert!(out.status.success());
    let text = stdout(&out);
    let items: Vec<&str> = text.lines().map(|l| l.split('\t').next().unwrap()).collect();
    assert_eq!(items, ["i3"]);
    let out = cfkit(&[
        "recommend",
        "--model",
        s(&model),
        "--input",
        s(&f.path("m1.csv")),
        "--user",
        "u1",
        "-n",
        "5",
        "--include-rated",
    ]);
    assert_eq!(stdout(&out).lines().count(), 3);
}

#[test]
fn related_by_lift_and_cosine() {
    let f = Fixture::new();
    let out = cfkit(&[
        "related",
        "--input",
        s(&f.path("m1.csv")),
        "--item",
        "i2",
        "-n",
        "2",
        "--method",
        "lift",
    ]);
    assert!(out.status.success());
    assert_eq!(stdout(&out), "i1\t0.75\ni3\t0.75\n");
    let out = cfkit(&[
        "related",
        "--input",
        s(&f.path("m1.csv")),
        "--item",
        "i2",
        "-n",
        "1",
        "--method",
        "cosine",
    ]);
    assert!(stdout(&out).starts_with("i1\t"), "{}", stdout(&out));
    let out = cfkit(&[
        "related",
        "--input",
        s(&f.path("m1.csv")),
        "--item",
        "nope",
        "-n",
        "1",
        "--method",
        "lift",
    ]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn synth_then_eval() {
    let f = Fixture::new();
    let (data, truth) = (f.path("r.csv"), f.path("t.csv"));
    let out = cfkit(&[
        "synth",
        "--users",
        "50",
        "--items",
        "30",
        "--density",
        "0.4",
        "--sigma",
        "0.3",
        "--seed",
        "1",
        "--output",
        s(&data),
        "--truth",
        s(&truth),
    ]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    assert_eq!(std::fs::read_to_string(&truth).unwrap().lines().count(), 1 + 50 * 30);
    for algo in ["bias", "itemknn", "mf"] {
        let out = cfkit(&[
            "eval",
            "--algo",
            algo,
            "--input",
            s(&data),
            "--test-fraction",
            "0.2",
            "--seed",
            "4",
        ]);
        assert!(out.status.success(), "{algo}: {}", String::from_utf8_lossy(&out.stderr));
        let report = stdout(&out);
        let fields: Vec<&str> = report
            .split_whitespace()
            .map(|kv| kv.split('=').next().unwrap())
            .collect();
        assert_eq!(fields, ["rmse", "mae", "coverage", "n"]);
    }
}

#[test]
fn exit_codes() {
    let f = Fixture::new();
    assert_eq!(cfkit(&["--help"]).status.code(), Some(0));
    assert_eq!(cfkit(&["--version"]).status.code(), Some(0));
    assert_eq!(cfkit(&[]).status.code(), Some(1));
    assert_eq!(cfkit(&["fit", "--algo", "svd"]).status.code(), Some(1));
    // flags from another algorithm's group
    let out = cfkit(&[
        "fit",
        "--algo",
        "bias",
        "--input",
        s(&f.path("m1.csv")),
        "--output",
        s(&f.path("x")),
        "--k",
        "3",
    ]);
    assert_eq!(out.status.code(), Some(1));
    let out = cfkit(&[
        "fit",
        "--algo",
        "bias",
        "--input",
        s(&f.path("missing.csv")),
        "--output",
        s(&f.path("x")),
    ]);
    assert_eq!(out.status.code(), Some(2));
    std::fs::write(f.path("bad.csv"), "u1,i1,4\nu1,i2,abc\n").unwrap();
    let out = cfkit(&[
        "fit",
        "--algo",
        "bias",
        "--input",
        s(&f.path("bad.csv")),
        "--output",
        s(&f.path("x")),
    ]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("line 2"));
    let out = cfkit(&[
        "eval",
        "--algo",
        "bias",
        "--input",
        s(&f.path("m1.csv")),
        "--test-fraction",
        "1.5",
        "--seed",
        "1",
    ]);
    assert_eq!(out.status.code(), Some(1));
}
