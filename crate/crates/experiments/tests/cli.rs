use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use dpr_core::format::parse_partials;

fn dpr(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_dpr")).args(args).output().unwrap()
}

fn ok(args: &[&str]) -> String {
    let out = dpr(args);
    assert!(out.status.success(), "{args:?}: {}", String::from_utf8_lossy(&out.stderr));
    String::from_utf8(out.stdout).unwrap()
}

fn path(p: &Path) -> &str {
    p.to_str().unwrap()
}

#[test]
fn simulate_writes_round_files() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("sim");
    ok(&["simulate", "--n-p", "12", "--n-r", "3", "--seed", "5", "--out", path(&out)]);
    for f in ["truth.txt", "partials.txt", "scores.csv", "assignment.csv", "meta.txt"] {
        assert!(out.join(f).exists(), "{f} missing");
    }
    let partials = parse_partials(&fs::read_to_string(out.join("partials.txt")).unwrap()).unwrap();
    assert_eq!(partials.len(), 12);
    assert!(partials.iter().all(|p| p.len() == 3 && p.is_strict()));
    let scores = fs::read_to_string(out.join("scores.csv")).unwrap();
    assert!(scores.starts_with("proposal_id,true_score,bias,error_sd\n"));
    assert_eq!(scores.lines().count(), 13);
}

#[test]
fn assign_respects_constraints() {
    let dir = tempfile::tempdir().unwrap();
    let cfile = dir.path().join("c.txt");
    fs::write(&cfile, "# conflicts\n0: 1 2\n3: 4\n").unwrap();
    let csv = ok(&["assign", "--n", "8", "--m", "3", "--balanced", "--seed", "1", "--constraints", path(&cfile)]);
    let mut lines = csv.lines();
    assert_eq!(lines.next(), Some("reviewer_id,proposal_1,proposal_2,proposal_3"));
    let mut counts = [0; 8];
    for (r, line) in lines.enumerate() {
        let f: Vec<usize> = line.split(',').map(|x| x.parse().unwrap()).collect();
        assert_eq!(f[0], r);
        let set = &f[1..];
        assert_eq!(set.len(), 3);
        assert!(!set.contains(&r));
        if r == 0 {
            assert!(!set.contains(&1) && !set.contains(&2));
        }
        if r == 3 {
            assert!(!set.contains(&4));
        }
        for &p in set {
            counts[p] += 1;
        }
    }
    assert_eq!(counts, [3; 8]);
}

#[test]
fn assign_reports_infeasible_constraints() {
    let dir = tempfile::tempdir().unwrap();
    let cfile = dir.path().join("c.txt");
    fs::write(&cfile, "1: 0 2 3\n").unwrap();
    let out = dpr(&["assign", "--n", "4", "--m", "2", "--constraints", path(&cfile)]);
    assert!(!out.status.success());
    assert!(String::from_utf8_lossy(&out.stderr).contains("reviewer 1"));
}

#[test]
fn aggregate_mbc_and_cigr() {
    let dir = tempfile::tempdir().unwrap();
    let input = dir.path().join("p.txt");
    fs::write(&input, "0: 1 2 3\n1: 2 (3 0)\n2: 1 3 0\n3: 1 2 0\n").unwrap();

    let mbc = dir.path().join("mbc");
    ok(&["aggregate", "--method", "mbc", "--input", path(&input), "--out", path(&mbc)]);
    let table = fs::read_to_string(mbc.join("ranking.csv")).unwrap();
    let mut lines = table.lines();
    assert_eq!(lines.next(), Some("proposal_id,score,rank"));
    // Proposal 1 collects every point it could: 2 + 2 + 2 over 6.
    assert_eq!(lines.next(), Some("1,1.0,1"));
    assert!(!mbc.join("cigr_meta.txt").exists());

    let cigr = dir.path().join("cigr");
    ok(&["aggregate", "--input", path(&input), "--out", path(&cigr), "--seed", "3"]);
    let meta = fs::read_to_string(cigr.join("cigr_meta.txt")).unwrap();
    assert!(meta.contains("best_cost = 0"));
    assert!(meta.contains("near_optimal_set = "));
    let ranks: Vec<String> = fs::read_to_string(cigr.join("ranking.csv"))
        .unwrap()
        .lines()
        .skip(1)
        .map(|l| l.split(',').next().unwrap().to_string())
        .collect();
    assert_eq!(ranks, ["1", "2", "3", "0"]);
}

#[test]
fn aggregate_rejects_malformed_input() {
    let dir = tempfile::tempdir().unwrap();
    let input = dir.path().join("p.txt");
    fs::write(&input, "0: 1 2\n1: 2 (3\n").unwrap();
    let out = dpr(&["aggregate", "--input", path(&input), "--out", path(dir.path())]);
    assert!(!out.status.success());
    assert!(String::from_utf8_lossy(&out.stderr).contains("line 2"));
}

#[test]
fn sweep_table_layout() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("s");
    ok(&["sweep", "--param", "sd_s", "--grid", "2,30", "--replicates", "3", "--methods", "mbc", "--out", path(&out)]);
    let table = fs::read_to_string(out.join("sweep.csv")).unwrap();
    let lines: Vec<&str> = table.lines().collect();
    assert_eq!(lines[0], "param,value,method,mode,mean_ci,ci_hw,mean_t02,t02_hw,n_reps");
    assert_eq!(lines.len(), 3);
    assert!(lines[1].starts_with("sd_s,2.0,mbc,random,"));
    let meta = fs::read_to_string(out.join("meta.txt")).unwrap();
    assert!(meta.starts_with("version = "));
    assert!(meta.contains("grid = 2,30"));
}

#[test]
fn multistage_rejects_narrow_bands() {
    let dir = tempfile::tempdir().unwrap();
    let out = dpr(&["multistage", "--band-width", "4", "--replicates", "2", "--out", path(dir.path())]);
    assert!(!out.status.success());
    assert!(String::from_utf8_lossy(&out.stderr).contains("band width"));
}
