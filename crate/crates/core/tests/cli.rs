use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use gelo::embedding::EmbeddingMatrix;
use gelo::matches::{parse_matches, write_matches, Dataset, MatchRecord};
use gelo::stats::paired_t_test;
use gelo::synthetic::{generate_synthetic, SyntheticSpec};
use tempfile::TempDir;

const SMALL: &str = "dim = 16\nepochs = 1\nwalks_per_node = 4\nwalk_length = 20\neval_seeds = 2\n";

fn gelo(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_gelo")).args(args).output().unwrap()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

fn path(p: &Path) -> &str {
    p.to_str().unwrap()
}

struct Fixture {
    dir: TempDir,
}

impl Fixture {
    fn new() -> Self {
        Fixture {
            dir: tempfile::tempdir().unwrap(),
        }
    }

    fn file(&self, name: &str, contents: &str) -> PathBuf {
        let p = self.dir.path().join(name);
        fs::write(&p, contents).unwrap();
        p
    }

    fn dataset(&self, name: &str, ds: &Dataset) -> PathBuf {
        let p = self.dir.path().join(name);
        write_matches(ds, fs::File::create(&p).unwrap()).unwrap();
        p
    }

    fn out(&self, name: &str) -> PathBuf {
        self.dir.path().join(name)
    }

    fn synthetic(&self, name: &str, spec: SyntheticSpec) -> PathBuf {
        self.dataset(name, &generate_synthetic(&spec).unwrap().dataset)
    }
}

fn run_ok(args: &[&str]) -> Output {
    let o = gelo(args);
    assert!(o.status.success(), "gelo {args:?} failed: {}", stderr(&o));
    o
}

fn read(p: PathBuf) -> String {
    fs::read_to_string(&p).unwrap_or_else(|e| panic!("{}: {e}", p.display()))
}

fn kv(text: &str) -> BTreeMap<String, String> {
    text.lines()
        .filter_map(|l| l.split_once(" = "))
        .map(|(k, v)| (k.to_owned(), v.to_owned()))
        .collect()
}

#[test]
fn rate_single_match() {
    let f = Fixture::new();
    let m = f.file("m.csv", "1,alice,bob,A\n");
    let out = f.out("o");
    let o = run_ok(&["rate", path(&m), "--out", path(&out)]);
    assert!(String::from_utf8_lossy(&o.stdout).contains("ratings.tsv"));
    assert_eq!(read(out.join("ratings.tsv")), "alice\t1525.0000\nbob\t1475.0000\n");
}

#[test]
fn rate_empty_file() {
    let f = Fixture::new();
    let m = f.file("m.csv", "");
    let out = f.out("o");
    run_ok(&["rate", path(&m), "--out", path(&out)]);
    assert_eq!(read(out.join("ratings.tsv")), "");
}

#[test]
fn malformed_row_names_the_line() {
    let f = Fixture::new();
    let m = f.file("m.csv", "timestamp,side_a,side_b,winner\n1,a,b,A\n2,a,b\n");
    let o = gelo(&["rate", path(&m), "--out", path(&f.out("o"))]);
    assert!(!o.status.success());
    let err = stderr(&o);
    assert!(err.contains("line 3"), "{err}");
    assert!(o.stdout.is_empty());
}

#[test]
fn missing_file_and_bad_config_fail() {
    let f = Fixture::new();
    let o = gelo(&["rate", path(&f.out("nope.csv"))]);
    assert!(!o.status.success());
    assert!(stderr(&o).contains("nope.csv"));

    let m = f.file("m.csv", "1,a,b,A\n");
    let conf = f.file("bad.conf", "dim = 16\nwalk_lenght = 3\n");
    let o = gelo(&["rate", path(&m), "--config", path(&conf)]);
    assert!(!o.status.success());
    assert!(stderr(&o).contains("bad.conf:2"), "{}", stderr(&o));
}

#[test]
fn skipped_rows_warn_on_stderr() {
    let f = Fixture::new();
    let m = f.file("m.csv", "1,a,a,A\n2,a,b,D\n3,a,b,B\n");
    let out = f.out("o");
    let o = run_ok(&["rate", path(&m), "--out", path(&out)]);
    let err = stderr(&o);
    assert!(err.contains("line 1") && err.contains("line 2"), "{err}");
    assert_eq!(read(out.join("ratings.tsv")).lines().count(), 2);
}

#[test]
fn gelo_smoke_on_fifty_players() {
    let f = Fixture::new();
    let m = f.synthetic(
        "m.csv",
        SyntheticSpec {
            player_count: 50,
            match_count: 600,
            ..Default::default()
        },
    );
    let conf = f.file("c.conf", SMALL);
    let out = f.out("o");
    let o = run_ok(&["gelo", path(&m), "--config", path(&conf), "--out", path(&out)]);
    let listed = String::from_utf8_lossy(&o.stdout).lines().count();
    assert_eq!(listed, 4);

    let emb = EmbeddingMatrix::<f64>::read_word2vec(read(out.join("embeddings.txt")).as_bytes()).unwrap();
    assert_eq!(emb.dim(), 16);
    let ratings = read(out.join("gelo_ratings.tsv"));
    assert_eq!(ratings.lines().count(), emb.len());
    let report = read(out.join("adjustment.tsv"));
    assert_eq!(report.lines().count(), emb.len());
    // sorted by post score, descending
    let posts: Vec<f64> = report
        .lines()
        .map(|l| l.split('\t').nth(4).unwrap().parse().unwrap())
        .collect();
    assert!(posts.windows(2).all(|w| w[0] >= w[1]));
}

#[test]
fn gelo_deterministic_runs_match() {
    let f = Fixture::new();
    let m = f.synthetic(
        "m.csv",
        SyntheticSpec {
            player_count: 50,
            match_count: 600,
            ..Default::default()
        },
    );
    let conf = f.file("c.conf", SMALL);
    let (a, b) = (f.out("a"), f.out("b"));
    run_ok(&[
        "gelo",
        path(&m),
        "--config",
        path(&conf),
        "--deterministic",
        "--out",
        path(&a),
    ]);
    run_ok(&[
        "gelo",
        path(&m),
        "--config",
        path(&conf),
        "--deterministic",
        "--threads",
        "3",
        "--out",
        path(&b),
    ]);
    for name in ["embeddings.txt", "adjustment.tsv", "gelo_ratings.tsv", "graph.tsv"] {
        assert_eq!(read(a.join(name)), read(b.join(name)), "{name}");
    }

    let c = f.out("c");
    run_ok(&[
        "gelo",
        path(&m),
        "--config",
        path(&conf),
        "--seed",
        "2",
        "--out",
        path(&c),
    ]);
    assert_ne!(read(a.join("embeddings.txt")), read(c.join("embeddings.txt")));
}

#[test]
fn gelo_parallel_mode_completes() {
    let f = Fixture::new();
    let m = f.synthetic(
        "m.csv",
        SyntheticSpec {
            player_count: 50,
            match_count: 600,
            ..Default::default()
        },
    );
    let conf = f.file("c.conf", SMALL);
    let out = f.out("o");
    run_ok(&[
        "gelo",
        path(&m),
        "--config",
        path(&conf),
        "--parallel",
        "--threads",
        "4",
        "--out",
        path(&out),
    ]);
    let emb = EmbeddingMatrix::<f64>::read_word2vec(read(out.join("embeddings.txt")).as_bytes()).unwrap();
    assert!(emb.rows().all(|(_, r)| r.iter().all(|v| v.is_finite())));

    let o = gelo(&["gelo", path(&m), "--parallel", "--deterministic"]);
    assert!(!o.status.success());
}

#[test]
fn all_single_meetings_give_floor_weights() {
    let f = Fixture::new();
    let names: Vec<String> = (0..8).map(|i| format!("s{i}")).collect();
    let mut matches = Vec::new();
    for i in 0..names.len() {
        for j in i + 1..names.len() {
            let (w, l) = if (i + j) % 2 == 0 { (i, j) } else { (j, i) };
            matches.push(MatchRecord::duel(matches.len() as u64, &names[w], &names[l]).unwrap());
        }
    }
    let m = f.dataset("m.csv", &Dataset::from_matches(matches));
    let conf = f.file("c.conf", SMALL);
    let out = f.out("o");
    run_ok(&["gelo", path(&m), "--config", path(&conf), "--out", path(&out)]);
    let graph = read(out.join("graph.tsv"));
    assert_eq!(graph.lines().count(), 28);
    for line in graph.lines() {
        let cols: Vec<&str> = line.split('\t').collect();
        assert!(cols[0] < cols[1]);
        assert_eq!((cols[2], cols[4]), ("1", "0.010000"), "{line}");
    }
}

fn eval_fixture(f: &Fixture, extra: &str) -> PathBuf {
    let m = f.synthetic(
        "m.csv",
        SyntheticSpec {
            player_count: 60,
            match_count: 1300,
            ..Default::default()
        },
    );
    let conf = f.file("c.conf", &format!("{SMALL}{extra}"));
    let out = f.out("o");
    run_ok(&["eval", path(&m), "--config", path(&conf), "--out", path(&out)]);
    out
}

#[test]
fn eval_report_layout_and_statistics() {
    let f = Fixture::new();
    let out = eval_fixture(&f, "");
    let tsv = read(out.join("eval.tsv"));
    let rows: Vec<Vec<&str>> = tsv.lines().map(|l| l.split('\t').collect()).collect();
    assert_eq!(rows.len(), 25);
    for (i, r) in rows[..20].iter().enumerate() {
        assert_eq!(r[0], (i / 2 + 1).to_string());
        assert_eq!(r[1], if i % 2 == 0 { "elo" } else { "gelo" });
    }
    let labels: Vec<&str> = rows[20..].iter().map(|r| r[0]).collect();
    assert_eq!(labels, ["avg", "ci_low", "ci_high", "t", "p"]);

    let kv = kv(&read(out.join("eval.kv")));
    let per_window = |sys: &str| -> Vec<f64> {
        (1..=10)
            .map(|i| kv[&format!("window.{i}.{sys}.error_rate")].parse().unwrap())
            .collect()
    };
    let standalone = paired_t_test(&per_window("elo"), &per_window("gelo")).unwrap();
    let r = standalone.regular().expect("per-window errors differ");
    let t: f64 = kv["paired.t"].parse().unwrap();
    let p: f64 = kv["paired.p"].parse().unwrap();
    assert!((t - r.t_statistic).abs() <= 1e-12 * r.t_statistic.abs().max(1.0));
    assert!((p - r.p_value).abs() <= 1e-12);
    let tsv_t: f64 = rows[23][1].parse().unwrap();
    let tsv_p: f64 = rows[24][1].parse().unwrap();
    assert!((tsv_t - r.t_statistic).abs() <= 5e-7);
    assert!((tsv_p - r.p_value).abs() <= 5e-7);
}

#[test]
fn eval_single_window() {
    let f = Fixture::new();
    let out = eval_fixture(&f, "units = 4\n");
    let tsv = read(out.join("eval.tsv"));
    let rows: Vec<&str> = tsv.lines().collect();
    assert_eq!(rows.len(), 7);
    assert!(rows[0].starts_with("1\telo\t") && rows[1].starts_with("1\tgelo\t"));
    // one window: no spread, so the intervals and the test are undefined
    assert_eq!(rows[3], "ci_low\tNA\tNA");
    assert_eq!(rows[5], "t\tNA");
}

#[test]
fn eval_too_few_units_fails() {
    let f = Fixture::new();
    let m = f.file("m.csv", "1,a,b,A\n2,b,c,A\n3,c,a,B\n");
    let o = gelo(&["eval", path(&m), "--out", path(&f.out("o"))]);
    assert!(!o.status.success());
    assert!(!stderr(&o).is_empty());
}

#[test]
fn simulate_round_trips() {
    let f = Fixture::new();
    let spec = f.file(
        "s.spec",
        "player_count = 20\nlow_activity_fraction = 0.5\nmatch_count = 100\nseed = 3\n",
    );
    let (a, b) = (f.out("a"), f.out("b"));
    run_ok(&["simulate", path(&spec), "--out", path(&a)]);
    run_ok(&["simulate", path(&spec), "--out", path(&b)]);
    let text = read(a.join("matches.csv"));
    assert_eq!(text, read(b.join("matches.csv")));

    let parsed = parse_matches(text.as_bytes()).unwrap();
    assert_eq!(parsed.skipped, 0);
    assert_eq!(parsed.dataset.len(), 100);
    let data_rows = text
        .lines()
        .filter(|l| l.starts_with(|c: char| c.is_ascii_digit()))
        .count();
    assert_eq!(data_rows, 100);

    let c = f.out("c");
    run_ok(&["simulate", path(&spec), "--seed", "4", "--out", path(&c)]);
    assert_ne!(text, read(c.join("matches.csv")));
}

#[test]
fn simulate_infeasible_spec_fails() {
    let f = Fixture::new();
    let spec = f.file(
        "s.spec",
        "player_count = 10\nlow_activity_fraction = 1\nlow_activity_budget = 1\nmatch_count = 100\n",
    );
    let o = gelo(&["simulate", path(&spec), "--out", path(&f.out("o"))]);
    assert!(!o.status.success());
    assert!(stderr(&o).contains("eligible"), "{}", stderr(&o));
}
