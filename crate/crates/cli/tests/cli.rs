use std::io::Write;
use std::process::{Command, Stdio};

use serde_json::Value;

struct Run {
    code: i32,
    stdout: String,
    stderr: String,
}

impl Run {
    fn json(&self) -> Value {
        serde_json::from_str(&self.stdout).unwrap_or_else(|e| panic!("{e}: {}\n{}", self.stdout, self.stderr))
    }
}

fn netprice(args: &[&str], stdin: &str) -> Run {
    netprice_env(args, stdin, &[])
}

fn netprice_env(args: &[&str], stdin: &str, env: &[(&str, &str)]) -> Run {
    let mut cmd = Command::new(env!("CARGO_BIN_EXE_netprice"));
    cmd.args(args)
        .env_remove("MARKET_SEED")
        .stdin(Stdio::piped())
        .stdout(Stdio::piped())
        .stderr(Stdio::piped());
    for (k, v) in env {
        cmd.env(k, v);
    }
    let mut child = cmd.spawn().expect("spawn netprice");
    child.stdin.take().unwrap().write_all(stdin.as_bytes()).unwrap();
    let out = child.wait_with_output().unwrap();
    Run {
        code: out.status.code().unwrap_or(-1),
        stdout: String::from_utf8(out.stdout).unwrap(),
        stderr: String::from_utf8(out.stderr).unwrap(),
    }
}

fn pipe(steps: &[&[&str]]) -> Run {
    let mut input = String::new();
    let mut last = None;
    for args in steps {
        let r = netprice(args, &input);
        input = r.stdout.clone();
        last = Some(r);
    }
    last.unwrap()
}

#[test]
fn four_goods_pipeline() {
    let r = pipe(&[&["gen", "--family", "fig1"], &["dynamics", "--alg", "path"], &["check", "--ne"]]);
    assert_eq!(r.code, 0, "{}", r.stderr);
    let v = r.json();
    assert_eq!(v["ne"], true);
    assert_eq!(v["revenue"], "7");
    assert_eq!(v["max_welfare"], "8");
    let prices: Vec<&str> = v["prices"].as_object().unwrap().values().map(|p| p.as_str().unwrap()).collect();
    assert_eq!(prices, ["0", "1", "5", "1"]);
}

#[test]
fn unpriced_market_is_an_equilibrium() {
    let r = pipe(&[&["gen", "--family", "path", "--values", "3,1/2"], &["check", "--expect-ne"]]);
    assert_eq!(r.code, 0, "{}", r.stderr);
    let v = r.json();
    assert_eq!(v["ne"], true);
    assert_eq!(v["revenue"], "0");
    assert!(v["prices"].as_object().unwrap().values().all(|p| p == "inf"));
}

#[test]
fn instance_round_trips() {
    let bundle = netprice(&["gen", "--family", "random-hyper", "--n", "7", "--k", "3", "--edges", "6", "--seed", "9"], "");
    let dyn_out = netprice(&["dynamics", "--alg", "generic", "--schedule", "random", "--seed", "4"], &bundle.stdout);
    assert!(dyn_out.code == 0 || dyn_out.code == 3, "{}", dyn_out.stderr);
    assert_eq!(bundle.json()["instance"], dyn_out.json()["instance"]);
    let checked = netprice(&["check", "--ne"], &dyn_out.stdout);
    assert_eq!(checked.json()["instance"], bundle.json()["instance"]);
    assert_eq!(checked.json()["prices"], dyn_out.json()["prices"]);
}

#[test]
fn malicious_zero_seller_gives_negative_verdict() {
    let bundle = netprice(&["gen", "--family", "fig1"], "").stdout;
    let r = netprice(&["check", "--profile", "ne", "--expect-non-malicious"], &bundle);
    assert_eq!(r.code, 1);
    assert_eq!(r.json()["non_malicious_ne"], false);
    let r = netprice(&["check", "--profile", "ne", "--bound", "graph"], &bundle);
    assert_eq!(r.code, 1);
    assert!(r.json()["bounds"][0]["error"].as_str().unwrap().contains("non-malicious"));
}

#[test]
fn bound_reports() {
    let clique = pipe(&[
        &["gen", "--family", "clique", "--n", "4"],
        &["dynamics", "--alg", "generic", "--policy", "non-malicious"],
        &["check", "--expect-non-malicious", "--bound", "graph", "--bound", "thm3"],
    ]);
    assert_eq!(clique.code, 0, "{}", clique.stderr);
    let v = clique.json();
    assert_eq!(v["revenue"], "3");
    assert_eq!(v["bounds"][0]["holds"], true);
    assert_eq!(v["bounds"][0]["parameters"]["w"], "2");
    assert_eq!(v["bounds"][0], v["bounds"][1]);

    let gadget = netprice(&["gen", "--family", "clique-gadget", "--w", "2", "--d", "4"], "").stdout;
    let ne = netprice(&["dynamics", "--alg", "generic", "--schedule", "random", "--seed", "1"], &gadget);
    assert_eq!(ne.code, 0);
    let r = netprice(&["check", "--expect-ne", "--bound", "clique-gadget-cap:2,4"], &ne.stdout);
    assert_eq!(r.code, 0, "{}", r.stdout);
    let r = netprice(&["check", "--bound", "clique-gadget-cap:3,4"], &ne.stdout);
    assert_eq!(r.code, 1);
}

#[test]
fn monopolist_grid_and_profile() {
    let star = netprice(&["gen", "--family", "harmonic-star", "--d", "8"], "").stdout;
    let r = netprice(&["monopolist", "--step", "1/1680", "--bound", "1"], &star);
    assert_eq!(r.code, 0, "{}", r.stderr);
    assert_eq!(r.json()["revenue"], "761/280");
    assert_eq!(r.json()["method"], "grid_exact");
    // the witness prices pipe straight into the checker
    let again = netprice(&["check"], &r.stdout);
    assert_eq!(again.json()["revenue"], "761/280");

    let gadget = netprice(&["gen", "--family", "clique-gadget", "--w", "2", "--d", "4"], "").stdout;
    let r = netprice(&["monopolist", "--method", "profile", "--profile", "monopolist"], &gadget);
    assert_eq!(r.json()["revenue"], "25/4");
    let r = netprice(&["monopolist", "--method", "profile"], &gadget);
    assert_eq!(r.code, 2);
}

#[test]
fn budget_and_cap_exit_3() {
    let star = netprice(&["gen", "--family", "harmonic-star", "--d", "8"], "").stdout;
    let r = netprice(&["monopolist", "--step", "1/1680", "--bound", "1", "--budget", "10"], &star);
    assert_eq!(r.code, 3);
    assert!(r.stderr.contains("budget"));
    let clique = netprice(&["gen", "--family", "clique", "--n", "4"], "").stdout;
    let r = netprice(&["dynamics", "--alg", "generic", "--cap", "1"], &clique);
    assert_eq!(r.code, 3);
    assert_eq!(r.json()["converged"], false);
}

#[test]
fn usage_errors_exit_2() {
    assert_eq!(netprice(&["dynamics"], "").code, 2);
    assert_eq!(netprice(&["gen", "--family", "nope"], "").code, 2);
    assert_eq!(netprice(&["check"], "{}").code, 2);
    assert_eq!(netprice(&["check"], "not json").code, 2);
    let fig1 = netprice(&["gen", "--family", "fig1"], "").stdout;
    let r = netprice(&["dynamics", "--alg", "cycle"], &fig1);
    assert_eq!(r.code, 2);
    assert!(r.stderr.contains("cycle"));
}

#[test]
fn tree_algorithms() {
    let obs = netprice(&["gen", "--family", "six-nine-one"], "").stdout;
    let r = netprice(&["dynamics", "--alg", "tree-fixed", "--seller", "D", "--price", "1/2"], &obs);
    assert_eq!(r.code, 0, "{}", r.stderr);
    let v = r.json();
    assert_eq!(v["seller_utility"], "1/2");
    let prices: Vec<&str> = v["prices"].as_object().unwrap().values().map(|p| p.as_str().unwrap()).collect();
    assert_eq!(prices, ["6", "17/2", "1/2", "1/2"]);

    let r = pipe(&[
        &["gen", "--family", "random-tree", "--n", "9", "--seed", "5"],
        &["dynamics", "--alg", "tree"],
        &["check", "--expect-non-malicious"],
    ]);
    assert_eq!(r.code, 0, "{}", r.stdout);
}

#[test]
fn replay_detects_tampering() {
    let clique = netprice(&["gen", "--family", "clique", "--n", "4"], "").stdout;
    let r = netprice(&["dynamics", "--alg", "generic", "--schedule", "random", "--seed", "2"], &clique);
    let mut doc = r.json();
    let ok = netprice(&["dynamics", "--alg", "replay"], &doc.to_string());
    assert_eq!(ok.code, 0);
    assert_eq!(ok.json()["reproduced"], true);
    doc["trace"]["steps"][0]["new"] = Value::String("7".into());
    let bad = netprice(&["dynamics", "--alg", "replay"], &doc.to_string());
    assert_eq!(bad.code, 1);
    assert_eq!(bad.json()["reproduced"], false);
}

#[test]
fn metrics_report() {
    let r = pipe(&[&["gen", "--family", "clique", "--n", "6"], &["metrics"]]);
    let v = r.json();
    assert_eq!(v["max_degree"], 5);
    assert_eq!(v["arboricity"], "3");
    let r = pipe(&[&["gen", "--family", "clique", "--n", "6"], &["metrics", "--node-limit", "3"]]);
    // greedy bounds: the interval must contain the exact value 3
    let iv = r.json()["arboricity"].as_str().unwrap().to_string();
    let (lo, hi) = iv.trim_matches(['[', ']']).split_once(',').unwrap();
    assert_eq!(lo, "3");
    assert!(hi.parse::<usize>().unwrap() >= 3);
}

#[test]
fn experiment_is_deterministic_and_persists_capped_runs() {
    let dir = tempfile::tempdir().unwrap();
    let p = |name: &str| dir.path().join(name).display().to_string();
    let traces = p("traces");
    let common = [
        "experiment", "--family", "random-graph", "--n", "6", "--trials", "40", "--trace-dir", &traces,
    ];
    let a = netprice_env(&[&common[..], &["--csv", &p("a.csv"), "--jobs", "1"]].concat(), "", &[("MARKET_SEED", "11")]);
    let b = netprice_env(&[&common[..], &["--csv", &p("b.csv"), "--jobs", "3"]].concat(), "", &[("MARKET_SEED", "11")]);
    let c = netprice(&[&common[..], &["--csv", &p("c.csv"), "--seed", "11"]].concat(), "");
    assert_eq!(a.code, 0, "{}", a.stderr);
    assert_eq!(c.code, 0, "{}", c.stderr);
    let csv_a = std::fs::read_to_string(p("a.csv")).unwrap();
    assert_eq!(csv_a, std::fs::read_to_string(p("b.csv")).unwrap());
    assert_eq!(csv_a, std::fs::read_to_string(p("c.csv")).unwrap());
    assert_eq!(a.json(), b.json());
    assert_eq!(a.json()["converged"], 40);
    assert_eq!(csv_a.lines().count(), 41);

    let capped = netprice(&[&common[..], &["--csv", &p("d.csv"), "--cap", "1"]].concat(), "");
    assert_eq!(capped.code, 3);
    let mut reader = csv::Reader::from_path(p("d.csv")).unwrap();
    let headers = reader.headers().unwrap().clone();
    let conv = headers.iter().position(|h| h == "converged").unwrap();
    let file = headers.iter().position(|h| h == "trace_file").unwrap();
    let mut persisted = 0;
    for row in reader.records() {
        let row = row.unwrap();
        if &row[conv] == "false" {
            let text = std::fs::read_to_string(&row[file]).unwrap();
            let r = netprice(&["dynamics", "--alg", "replay"], &text);
            assert_eq!(r.json()["reproduced"], true);
            persisted += 1;
        } else {
            assert!(row[file].is_empty());
        }
    }
    assert!(persisted > 0);
    assert_eq!(capped.json()["counterexamples"].as_array().unwrap().len(), persisted);
}
