use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use tempfile::TempDir;

const LINE: &str = "insert 0 1 0\ninsert 1 1 1\ninsert 2 1 3\n";

fn dynkclust(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_dynkclust")).args(args).output().expect("binary runs")
}

fn write(dir: &TempDir, name: &str, text: &str) -> String {
    let path = dir.path().join(name);
    fs::write(&path, text).unwrap();
    path.to_str().unwrap().to_owned()
}

fn metrics(path: &Path) -> Vec<Vec<String>> {
    fs::read_to_string(path)
        .unwrap()
        .lines()
        .map(|l| l.split(',').map(str::to_owned).collect())
        .collect()
}

fn random_stream(n: u64, seed: u64) -> String {
    let mut x = seed;
    let mut next = move || {
        x = x.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
        (x >> 33) as f64 / (1u64 << 31) as f64
    };
    let mut text = String::new();
    for i in 0..n {
        text.push_str(&format!("insert {i} {} {} {}\n", 1.0 + next(), 10.0 * next(), 10.0 * next()));
        if i % 4 == 3 {
            text.push_str(&format!("delete {}\n", i - 2));
        }
    }
    text
}

#[test]
fn empty_stream_gives_empty_metrics() {
    let dir = TempDir::new().unwrap();
    let stream = write(&dir, "empty.txt", "# nothing\n");
    let out = dir.path().join("m.csv");
    let res = dynkclust(&["run", "--stream", &stream, "--k", "2", "--metrics-out", out.to_str().unwrap()]);
    assert!(res.status.success(), "{}", String::from_utf8_lossy(&res.stderr));
    assert_eq!(fs::read_to_string(&out).unwrap(), "");
}

#[test]
fn line_stream_k1_final_proper_cost() {
    let dir = TempDir::new().unwrap();
    let stream = write(&dir, "line.txt", LINE);
    let out = dir.path().join("m.csv");
    let res = dynkclust(&[
        "run", "--stream", &stream, "--k", "1", "--epsilon", "0.5", "--p", "1", "--seed", "7",
        "--metrics-out", out.to_str().unwrap(), "--strict",
    ]);
    assert!(res.status.success(), "{}", String::from_utf8_lossy(&res.stderr));
    let rows = metrics(&out);
    assert_eq!(rows[0][4], "proper_cost");
    assert_eq!(rows.len(), 4);
    assert_eq!(rows[3][4].parse::<f64>().unwrap(), 3.0);
    assert_eq!(rows[3][9], "0");
}

#[test]
fn oracle_table() {
    let dir = TempDir::new().unwrap();
    let stream = write(&dir, "line.txt", LINE);
    let res = dynkclust(&["oracle", "--stream", &stream, "--k", "3", "--p", "1"]);
    assert!(res.status.success());
    assert_eq!(String::from_utf8(res.stdout).unwrap(), "k,opt,centers\n1,3,1\n2,1,0 2\n3,0,0 1 2\n");
}

#[test]
fn oracle_compare_passes() {
    let dir = TempDir::new().unwrap();
    let stream = write(&dir, "s.txt", &random_stream(12, 3));
    let out = dir.path().join("m.csv");
    let res = dynkclust(&[
        "run", "--stream", &stream, "--k", "2", "--metrics-out", out.to_str().unwrap(), "--oracle-compare", "3",
    ]);
    assert!(res.status.success(), "{}", String::from_utf8_lossy(&res.stderr));
    let table = String::from_utf8(res.stdout).unwrap();
    assert!(table.starts_with("update_idx,n_live,cost,opt,ratio,lower,upper,pass\n"));
    assert!(table.lines().skip(1).all(|l| l.ends_with(",true")));
}

#[test]
fn identical_runs_are_byte_identical() {
    let dir = TempDir::new().unwrap();
    let stream = write(&dir, "s.txt", &random_stream(40, 11));
    let a = dir.path().join("a.csv");
    let b = dir.path().join("b.csv");
    for out in [&a, &b] {
        let res = dynkclust(&[
            "run", "--stream", &stream, "--k", "3", "--seed", "42", "--metrics-out", out.to_str().unwrap(),
        ]);
        assert!(res.status.success());
    }
    assert_eq!(fs::read(&a).unwrap(), fs::read(&b).unwrap());
}

#[test]
fn value_mode_writes_estimates() {
    let dir = TempDir::new().unwrap();
    let stream = write(&dir, "two.txt", "insert 0 1 0\ninsert 1 1 4\n");
    let out = dir.path().join("v.csv");
    let res = dynkclust(&["value", "--stream", &stream, "--k", "1", "--metrics-out", out.to_str().unwrap()]);
    assert!(res.status.success());
    let rows = metrics(&out);
    assert_eq!(rows[1][8].parse::<f64>().unwrap(), 0.0);
    assert_eq!(rows[2][8].parse::<f64>().unwrap(), 12.0);
    assert_eq!(rows[2][3], "");
}

#[test]
fn ufl_reports_open_mass() {
    let dir = TempDir::new().unwrap();
    let stream = write(&dir, "two.txt", "insert 0 1 0\ninsert 1 1 4\n");
    let res = dynkclust(&["ufl", "--stream", &stream, "--lambda", "1000"]);
    assert!(res.status.success());
    let text = String::from_utf8(res.stdout).unwrap();
    let mut lines = text.lines();
    assert_eq!(lines.next(), Some("lambda,open_mass,connection_cost,total_cost"));
    let summary: Vec<f64> = lines.next().unwrap().split(',').map(|v| v.parse().unwrap()).collect();
    assert_eq!(summary[0], 1000.0);
    assert!(summary[1] > 0.0);
    assert!(text.contains("\nid,y\n0,"));
}

#[test]
fn parse_error_names_the_line() {
    let dir = TempDir::new().unwrap();
    let stream = write(&dir, "bad.txt", "insert 0 1 0\ninsert one 1 0\n");
    let out = dir.path().join("m.csv");
    let res = dynkclust(&["run", "--stream", &stream, "--k", "1", "--metrics-out", out.to_str().unwrap()]);
    assert_eq!(res.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&res.stderr).contains("line 2"));
}

#[test]
fn update_error_names_the_line() {
    let dir = TempDir::new().unwrap();
    let stream = write(&dir, "bad.txt", "insert 0 1 0\ndelete 5\n");
    let out = dir.path().join("m.csv");
    let res = dynkclust(&["run", "--stream", &stream, "--k", "1", "--metrics-out", out.to_str().unwrap()]);
    assert_eq!(res.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&res.stderr).contains("line 2"));
}
