use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use serde_json::Value;

const D0_CSV: &str = "\
10.0.0.1,-,/a,-,-,2014-01-05,10:00:00
10.0.0.1,-,/b,-,-,2014-01-05,10:01:00
10.0.0.1,-,/c,-,-,2014-01-05,10:02:00
10.0.0.2,-,/a,-,-,2014-01-05,10:00:00
10.0.0.2,-,/b,-,-,2014-01-05,10:01:00
10.0.0.3,-,/a,-,-,2014-01-05,10:00:00
10.0.0.3,-,/c,-,-,2014-01-05,10:01:00
";

fn run(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_webprefetch"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn stdout(out: &Output) -> String {
    String::from_utf8(out.stdout.clone()).unwrap()
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

struct Fixture {
    dir: tempfile::TempDir,
}

impl Fixture {
    fn new() -> Self {
        let dir = tempfile::tempdir().unwrap();
        fs::write(dir.path().join("d0.csv"), D0_CSV).unwrap();
        Fixture { dir }
    }

    fn path(&self, name: &str) -> PathBuf {
        self.dir.path().join(name)
    }

    fn train_d0(&self, model: &str) -> Output {
        run(&[
            "train",
            s(&self.path("d0.csv")),
            "--format",
            "csv",
            "--alpha1",
            "0.4",
            "--alpha2",
            "0.4",
            "--model",
            s(&self.path(model)),
        ])
    }
}

#[test]
fn train_and_predict_d0() {
    let fx = Fixture::new();
    let out = fx.train_d0("m.json");
    assert!(out.status.success(), "{out:?}");
    assert!(stdout(&out).contains("pages           3 -> 2"));

    let model: Value =
        serde_json::from_str(&fs::read_to_string(fx.path("m.json")).unwrap()).unwrap();
    let rules = model["rules"].as_array().unwrap();
    assert_eq!(rules.len(), 1);
    assert_eq!(rules[0]["antecedent"], 0);
    assert_eq!(rules[0]["consequent"], 1);
    assert_eq!(rules[0]["support"], 0.5);

    let m = s(&fx.path("m.json")).to_string();
    let out = run(&["predict", "--model", &m, "/a"]);
    assert_eq!(
        (out.status.code(), stdout(&out).as_str()),
        (Some(0), "/b\n")
    );
    let out = run(&["predict", "--model", &m, "/unknown.html"]);
    assert_eq!(
        (out.status.code(), stdout(&out).as_str()),
        (Some(0), "ABSTAIN\n")
    );
    let out = run(&["predict", "--model", &m, "/c"]);
    assert_eq!(stdout(&out), "ABSTAIN\n");
    let out = run(&["predict", "--model", &m, "/c", "--fallback-popular"]);
    assert_eq!(stdout(&out), "/a\n");
}

#[test]
fn predict_topk() {
    let fx = Fixture::new();
    let m = fx.path("m.json");
    let out = run(&[
        "train",
        s(&fx.path("d0.csv")),
        "--format",
        "csv",
        "--alpha1",
        "0",
        "--alpha2",
        "0",
        "--model",
        s(&m),
    ]);
    assert!(out.status.success());
    let out = run(&["predict", "--model", s(&m), "/a", "--topk", "2"]);
    assert_eq!(stdout(&out), "/b\n/c\n");
}

#[test]
fn train_is_byte_reproducible() {
    let fx = Fixture::new();
    assert!(fx.train_d0("m1.json").status.success());
    assert!(fx.train_d0("m2.json").status.success());
    assert_eq!(
        fs::read(fx.path("m1.json")).unwrap(),
        fs::read(fx.path("m2.json")).unwrap()
    );
}

#[test]
fn evaluate_self_test_text_and_json_agree() {
    let fx = Fixture::new();
    let d0 = fx.path("d0.csv");
    let base = [
        "evaluate",
        s(&d0),
        "--format",
        "csv",
        "--alpha1",
        "0.4",
        "--alpha2",
        "0.4",
        "--train-split",
        "1.0",
        "--self-test",
    ];
    let report = fx.path("report.json");
    let mut args = base.to_vec();
    args.extend(["--json", "--report", s(&report)]);
    let out = run(&args);
    assert!(out.status.success(), "{out:?}");
    let json: Value = serde_json::from_str(&stdout(&out)).unwrap();
    let file: Value = serde_json::from_str(&fs::read_to_string(&report).unwrap()).unwrap();
    assert_eq!(json, file);
    // all three D0 sessions: [A,B,C] 2 chances/1 try/1 hit, [A,B] 1/1/1, [A,C] 1/1/0
    assert_eq!(json["opportunities"], 4);
    assert_eq!(json["attempted"], 3);
    assert_eq!(json["hits"], 2);
    assert_eq!(json["applicability"], 0.75);

    let text = stdout(&run(&base));
    let field = |name: &str| -> String {
        text.lines()
            .find(|l| l.starts_with(name))
            .and_then(|l| l.split_whitespace().nth(1))
            .unwrap()
            .to_string()
    };
    for key in ["opportunities", "attempted", "hits"] {
        assert_eq!(field(key), json[key].to_string());
    }
    for key in ["accuracy", "applicability"] {
        let v: f64 = field(key).parse().unwrap();
        assert!((v - json[key].as_f64().unwrap()).abs() < 1e-6);
    }
}

#[test]
fn exit_codes() {
    let fx = Fixture::new();
    let d0 = s(&fx.path("d0.csv")).to_string();
    // usage errors
    assert_eq!(
        run(&["evaluate", &d0, "--format", "csv", "--alpha1", "1.5"])
            .status
            .code(),
        Some(2)
    );
    assert_eq!(
        run(&["train", &d0, "--format", "csv"]).status.code(),
        Some(2)
    );
    assert_eq!(
        run(&["evaluate", &d0, "--format", "csv", "--train-split", "0"])
            .status
            .code(),
        Some(2)
    );
    assert_eq!(
        run(&["evaluate", &d0, "--format", "csv", "--cache-size", "0"])
            .status
            .code(),
        Some(2)
    );
    assert_eq!(run(&["frobnicate"]).status.code(), Some(2));

    // runtime errors
    let missing = run(&[
        "train",
        s(&fx.path("nope.log")),
        "--model",
        s(&fx.path("m.json")),
    ]);
    assert_eq!(missing.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&missing.stderr).contains("nope.log"));

    fs::write(fx.path("empty.log"), "").unwrap();
    let empty = run(&[
        "train",
        s(&fx.path("empty.log")),
        "--model",
        s(&fx.path("m.json")),
    ]);
    assert_eq!(empty.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&empty.stderr).contains("no data"));

    let out = run(&["predict", "--model", s(&fx.path("missing.json")), "/a"]);
    assert_eq!(out.status.code(), Some(1));
}

#[test]
fn parse_error_names_file_and_line() {
    let fx = Fixture::new();
    let log = fx.path("bad.log");
    fs::write(
        &log,
        "1.1.1.1 - - [10/Oct/2000:13:55:36 -0700] \"GET /a HTTP/1.0\" 200 10\nnot a log line\n",
    )
    .unwrap();
    let out = run(&["train", s(&log), "--model", s(&fx.path("m.json"))]);
    assert_eq!(out.status.code(), Some(1));
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains("bad.log") && err.contains("line 2"), "{err}");
}

#[test]
fn clf_ingest_filters_and_normalizes() {
    let fx = Fixture::new();
    let log = fx.path("access.log");
    fs::write(
        &log,
        r#"1.1.1.1 - - [10/Oct/2000:13:55:36 -0700] "GET /Index.HTML?x=1 HTTP/1.0" 200 10
1.1.1.1 - - [10/Oct/2000:13:55:37 -0700] "GET /logo.png HTTP/1.0" 200 10
1.1.1.1 - - [10/Oct/2000:13:55:38 -0700] "POST /form HTTP/1.0" 200 10
1.1.1.1 - - [10/Oct/2000:13:55:39 -0700] "GET /missing HTTP/1.0" 404 -
1.1.1.1 - - [10/Oct/2000:13:56:00 -0700] "GET /docs/../about HTTP/1.0" 200 -
"#,
    )
    .unwrap();
    let out = run(&["ingest", s(&log)]);
    assert!(out.status.success(), "{out:?}");
    assert_eq!(
        stdout(&out),
        "1.1.1.1,-,/index.html,-,-,2000-10-10,20:55:36\n1.1.1.1,-,/about,-,-,2000-10-10,20:56:00\n"
    );
}

#[test]
fn gen_train_evaluate_round_trip() {
    let fx = Fixture::new();
    let log = fx.path("synthetic.csv");
    let gen = |path: &Path, format: &str| {
        run(&[
            "gen",
            "--n-pages",
            "20",
            "--dominant-prob",
            "0.6",
            "--n-sessions",
            "2000",
            "--seed",
            "5",
            "--format",
            format,
            "-o",
            s(path),
        ])
    };
    assert!(gen(&log, "csv").status.success());
    let again = fx.path("again.csv");
    assert!(gen(&again, "csv").status.success());
    assert_eq!(fs::read(&log).unwrap(), fs::read(&again).unwrap());

    let clf = fx.path("synthetic.log");
    assert!(gen(&clf, "clf").status.success());

    let mut reports = Vec::new();
    for (path, format) in [(&log, "csv"), (&clf, "clf")] {
        let out = run(&[
            "evaluate",
            s(path),
            "--format",
            format,
            "--no-cluster",
            "--alpha1",
            "0",
            "--alpha2",
            "0",
            "--json",
            "--cache-size",
            "2",
        ]);
        assert!(out.status.success(), "{out:?}");
        let report: Value = serde_json::from_str(&stdout(&out)).unwrap();
        let acc = report["accuracy"].as_f64().unwrap();
        assert!((acc - 0.6).abs() < 0.05, "{acc}");
        assert!(
            report["cache_hit_rate"].as_f64().unwrap()
                >= acc * report["applicability"].as_f64().unwrap()
        );
        reports.push(report);
    }
    assert_eq!(reports[0], reports[1]);

    let model = fx.path("m.json");
    assert!(
        run(&["train", s(&log), "--format", "csv", "--model", s(&model)])
            .status
            .success()
    );
    let out = run(&["inspect", "--model", s(&model), "--rules", "3"]);
    assert!(out.status.success());
    let text = stdout(&out);
    assert!(text.contains("rules") && text.contains("=>"), "{text}");
}
