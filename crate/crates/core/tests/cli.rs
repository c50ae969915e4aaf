use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use tempfile::TempDir;

fn mapsim(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_mapsim")).args(args).output().expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8(o.stdout.clone()).unwrap()
}

fn write(dir: &TempDir, name: &str, text: &str) -> PathBuf {
    let path = dir.path().join(name);
    fs::write(&path, text).unwrap();
    path
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

const FIG2_EDGES: &str = "1 2\n1 3\n2 3\n3 4\n4 5\n6 7\n6 8\n7 9\n8 9\n5 6\n";
const FIG2_TREE: &str = "\
# two modules
1:1 0.15 \"3\" 3
1:2 0.1 \"1\" 1
1:3 0.1 \"2\" 2
1:4 0.1 \"4\" 4
1:5 0.1 \"5\" 5
2:1 0.15 \"6\" 6
2:2 0.1 \"7\" 7
2:3 0.1 \"8\" 8
2:4 0.1 \"9\" 9
";

fn two_cliques() -> String {
    let mut text = String::new();
    for base in [0, 5] {
        for i in 0..5 {
            for j in i + 1..5 {
                text.push_str(&format!("{} {}\n", base + i, base + j));
            }
        }
    }
    text + "4 5\n"
}

#[test]
fn score_golden_pairs() {
    let dir = TempDir::new().unwrap();
    let edges = write(&dir, "g.txt", FIG2_EDGES);
    let tree = write(&dir, "g.tree", FIG2_TREE);
    let o = mapsim(&["score", s(&edges), s(&tree), "--pair", "5", "3"]);
    assert_eq!(o.status.code(), Some(0));
    assert_eq!(stdout(&o), "5 3 2.5e-1 2.000000\n");

    let pairs = write(&dir, "pairs.txt", "5 7\n5 42\n3 5\n");
    let o = mapsim(&["score", s(&edges), s(&tree), "--pairs", s(&pairs)]);
    assert_eq!(o.status.code(), Some(1));
    let out = stdout(&o);
    let lines: Vec<&str> = out.lines().collect();
    assert_eq!(lines.len(), 2);
    assert!(lines[0].starts_with("5 7 ") && lines[0].ends_with(" 6.906891"), "{}", lines[0]);
    assert!(lines[1].starts_with("3 5 "));
    assert!(String::from_utf8_lossy(&o.stderr).contains("line 2"));
}

#[test]
fn score_zero_rate_prints_inf() {
    // 1 and 2 only link to each other, so module {1,2} has no recorded exit
    let dir = TempDir::new().unwrap();
    let edges = write(&dir, "g.txt", "1 2\n2 1\n3 1\n3 4\n4 3\n");
    let tree = write(&dir, "g.tree", "1:1 0 \"1\" 1\n1:2 0 \"2\" 2\n2:1 0 \"3\" 3\n2:2 0 \"4\" 4\n");
    let o = mapsim(&["score", s(&edges), s(&tree), "--directed", "--pair", "1", "4"]);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    assert_eq!(stdout(&o), "1 4 0e0 inf\n");
}

#[test]
fn codelength_of_flat_triangle() {
    let dir = TempDir::new().unwrap();
    let edges = write(&dir, "t.txt", "1 2\n2 3\n3 1\n");
    let tree = write(&dir, "t.tree", "1 0.33 \"a\" 1\n2 0.33 \"b\" 2\n3 0.33 \"c\" 3\n");
    let o = mapsim(&["codelength", s(&edges), s(&tree)]);
    assert_eq!(o.status.code(), Some(0));
    assert_eq!(stdout(&o), "codelength=1.584963\n");
}

#[test]
fn partition_two_cliques_is_reproducible() {
    let dir = TempDir::new().unwrap();
    let edges = write(&dir, "c.txt", &two_cliques());
    let (a, b) = (dir.path().join("a.tree"), dir.path().join("b.tree"));
    for out in [&a, &b] {
        let o = mapsim(&["partition", s(&edges), "--trials", "10", "--seed", "3", "-o", s(out)]);
        assert_eq!(o.status.code(), Some(0));
        assert!(stdout(&o).trim_end().ends_with(" modules=2"), "{}", stdout(&o));
    }
    let text = fs::read_to_string(&a).unwrap();
    assert_eq!(text, fs::read_to_string(&b).unwrap());
    let tops: std::collections::HashSet<&str> = text
        .lines()
        .filter(|l| !l.starts_with('#'))
        .map(|l| l.split(':').next().unwrap())
        .collect();
    assert_eq!(tops.len(), 2);

    // the written tree reproduces the reported codelength
    let o = mapsim(&["codelength", s(&edges), s(&a)]);
    let first = stdout(&mapsim(&["partition", s(&edges), "--trials", "10", "--seed", "3", "-o", s(&a)]));
    let reported = first.split_whitespace().next().unwrap();
    assert_eq!(stdout(&o).trim_end(), reported);
}

#[test]
fn partition_keeps_largest_component() {
    let dir = TempDir::new().unwrap();
    let edges = write(&dir, "c.txt", &(two_cliques() + "100 101\n"));
    let out = dir.path().join("t.tree");
    let o = mapsim(&["partition", s(&edges), "--trials", "2", "-o", s(&out)]);
    assert_eq!(o.status.code(), Some(0));
    assert!(String::from_utf8_lossy(&o.stderr).contains("10 of 12 nodes"));
    assert_eq!(fs::read_to_string(&out).unwrap().lines().filter(|l| !l.starts_with('#')).count(), 10);
}

#[test]
fn generate_counts_and_errors() {
    let dir = TempDir::new().unwrap();
    let out = dir.path().join("g.txt");
    let o = mapsim(&["generate", "--nodes", "20", "--degree", "4", "--seed", "1", "-o", s(&out)]);
    assert_eq!(o.status.code(), Some(0));
    assert_eq!(fs::read_to_string(&out).unwrap().lines().count(), 40);
    assert_eq!(mapsim(&["generate", "--nodes", "21", "--degree", "4"]).status.code(), Some(1));
    let again = mapsim(&["generate", "--nodes", "20", "--degree", "4", "--seed", "1"]);
    assert_eq!(stdout(&again), fs::read_to_string(&out).unwrap());
}

#[test]
fn evaluate_writes_report() {
    let dir = TempDir::new().unwrap();
    let edges = dir.path().join("g.txt");
    assert!(mapsim(&["generate", "--nodes", "60", "--degree", "4", "-o", s(&edges)]).status.success());
    let json = dir.path().join("r.json");
    let o = mapsim(&["evaluate", s(&edges), "--trials", "3", "--method", "mapsim1", "-o", s(&json)]);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    let line = stdout(&o);
    assert!(line.starts_with("auc=") && line.contains("±") && line.contains(" aupr="), "{line}");
    let report: serde_json::Value = serde_json::from_str(&fs::read_to_string(&json).unwrap()).unwrap();
    assert_eq!(report["folds"].as_array().unwrap().len(), 5);
    assert_eq!(report["config"]["method"], "mapsim_one_module");
}

#[test]
fn usage_and_input_errors() {
    let dir = TempDir::new().unwrap();
    let edges = write(&dir, "c.txt", &two_cliques());
    assert_eq!(mapsim(&["evaluate", s(&edges), "--folds", "1"]).status.code(), Some(1));
    assert_eq!(mapsim(&["partition", s(&edges), "--bogus"]).status.code(), Some(1));
    assert_eq!(mapsim(&[]).status.code(), Some(1));
    assert_eq!(mapsim(&["--help"]).status.code(), Some(0));
    let missing = dir.path().join("missing.txt");
    let o = mapsim(&["partition", s(&missing), "-o", s(&dir.path().join("x.tree"))]);
    assert_eq!(o.status.code(), Some(2));
    assert!(!o.stderr.is_empty());
    let bad = write(&dir, "bad.txt", "1 2\n2 x\n");
    assert_eq!(mapsim(&["partition", s(&bad), "-o", s(&dir.path().join("x.tree"))]).status.code(), Some(2));
    let bad_tree = write(&dir, "bad.tree", "1 0.1 \"0\" 0\n");
    assert_eq!(mapsim(&["codelength", s(&edges), s(&bad_tree)]).status.code(), Some(2));
}

#[test]
fn thread_setting_and_computation_failures() {
    let dir = TempDir::new().unwrap();
    let edges = write(&dir, "c.txt", &two_cliques());
    let o = Command::new(env!("CARGO_BIN_EXE_mapsim"))
        .args(["partition", s(&edges), "--directed", "-o", s(&dir.path().join("x.tree"))])
        .env("MAPSIM_THREADS", "0")
        .output()
        .unwrap();
    assert_eq!(o.status.code(), Some(1));
    // a complete digraph has no absent pairs to sample negatives from
    let complete: String = (1..=4).flat_map(|u| (1..=4).filter(move |&v| v != u).map(move |v| format!("{u} {v}\n"))).collect();
    let tiny = write(&dir, "t.txt", &complete);
    let o = mapsim(&["evaluate", s(&tiny), "--directed", "--trials", "1"]);
    assert_eq!(o.status.code(), Some(3), "{}", String::from_utf8_lossy(&o.stderr));
}
