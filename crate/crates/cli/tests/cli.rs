use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;

fn trilayer(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_trilayer"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8(o.stdout.clone()).unwrap()
}

#[test]
fn gen_matches_the_library_golden_file() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("net.json");
    let o = trilayer(&[
        "gen", "--layers", "3", "--width", "2", "--activation", "tanh", "--seed", "42", "--out",
        out.to_str().unwrap(),
    ]);
    assert!(o.status.success(), "{o:?}");
    let golden = Path::new(env!("CARGO_MANIFEST_DIR")).join("../core/tests/golden/fnn_l3_n2_tanh_seed42.json");
    assert_eq!(std::fs::read_to_string(out).unwrap(), std::fs::read_to_string(golden).unwrap());
}

#[test]
fn solve_reports_are_deterministic_apart_from_wall_time() {
    let args = [
        "solve", "--layers", "7", "--width", "8", "--activation", "relu", "--mode", "backward", "--solver",
        "cyclic", "--seed", "1",
    ];
    let strip = |o: &Output| {
        assert!(o.status.success(), "{o:?}");
        let mut v: Value = serde_json::from_str(&stdout(o)).unwrap();
        let wall = v.as_object_mut().unwrap().remove("wall_ms");
        assert!(wall.is_some());
        v
    };
    let a = strip(&trilayer(&args));
    let b = strip(&trilayer(&args));
    assert_eq!(a, b);
    assert!(a["oracle_max_abs_err"].as_f64().unwrap() < 1e-9);
    assert_eq!(a["recursion_depth"], 2);
    for key in ["fma", "activation", "parallel_steps", "peak_blocks_live"] {
        assert!(a["work"][key].is_u64(), "{key}");
    }
    assert!(a["predicted_work"]["fma"].is_u64());
}

#[test]
fn solve_writes_csv_to_a_file() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("r.csv");
    let o = trilayer(&[
        "solve", "--kind", "rnn", "--layers", "3", "--tau", "5", "--solver", "hybrid:jacobi+substitution",
        "--format", "csv", "--out", out.to_str().unwrap(),
    ]);
    assert!(o.status.success(), "{o:?}");
    let text = std::fs::read_to_string(out).unwrap();
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(lines.len(), 2);
    let header: Vec<&str> = lines[0].split(',').collect();
    let row: Vec<&str> = lines[1].split(',').collect();
    assert_eq!(header.len(), row.len());
    let col = |name: &str| row[header.iter().position(|h| *h == name).unwrap()];
    assert!(col("iterations").parse::<usize>().unwrap() <= 5);
    assert_eq!(col("converged"), "true");
}

#[test]
fn verify_exit_codes() {
    let ok = trilayer(&["verify", "--layers", "3", "--width", "4", "--solver", "bicgstab"]);
    assert_eq!(ok.status.code(), Some(0), "{ok:?}");
    assert!(stdout(&ok).starts_with("ok:"));

    // Known ill-conditioned forward system: the trace is missed by about 2e-6.
    let miss = trilayer(&[
        "verify", "--layers", "15", "--width", "8", "--activation", "sigmoid", "--mode", "forward", "--solver",
        "substitution", "--seed", "1035",
    ]);
    assert_eq!(miss.status.code(), Some(1), "{miss:?}");
    assert!(stdout(&miss).starts_with("FAILED"));

    let bad = trilayer(&["verify", "--kind", "rnn", "--tau", "2", "--solver", "richardson"]);
    assert_eq!(bad.status.code(), Some(2));
    let unknown = trilayer(&["verify", "--solver", "gmres"]);
    assert!(!unknown.status.success());
}

#[test]
fn bench_emits_one_row_per_grid_point() {
    let run = |exec: &str| {
        let o = trilayer(&[
            "bench", "--layers", "3,7", "--width", "2,3", "--activation", "tanh,leaky:0.1", "--solver",
            "cyclic,jacobi", "--seeds", "2", "--exec", exec,
        ]);
        assert!(o.status.success(), "{o:?}");
        stdout(&o)
    };
    let drop_wall = |text: &str| -> Vec<String> {
        text.lines()
            .map(|l| l.rsplit_once(',').unwrap().0.to_string())
            .collect()
    };
    let par = run("parallel");
    assert_eq!(par.lines().count(), 1 + 2 * 2 * 2 * 2 * 2);
    assert_eq!(drop_wall(&par), drop_wall(&run("sequential")));
}

#[test]
fn appendix_check_reports_json() {
    for mode in ["forward", "backward"] {
        let o = trilayer(&["appendix-check", "--layers", "7", "--width", "3", "--mode", mode]);
        assert!(o.status.success(), "{o:?}");
        let v: Value = serde_json::from_str(&stdout(&o)).unwrap();
        assert_eq!(v["passed"], true);
        assert!(v["max_deviation"].as_f64().unwrap() < 1e-12);
    }
    let rnn = trilayer(&["appendix-check", "--kind", "rnn", "--tau", "3"]);
    assert_eq!(rnn.status.code(), Some(2));
}

#[test]
fn stale_sweep_starts_exact() {
    let o = trilayer(&["stale", "--layers", "7", "--width", "8", "--count", "5", "--sigmas", "0,1e-3,1e-1"]);
    assert!(o.status.success(), "{o:?}");
    let v: Value = serde_json::from_str(&stdout(&o)).unwrap();
    let medians: Vec<f64> = v.as_array().unwrap().iter().map(|p| p["median_error"].as_f64().unwrap()).collect();
    assert_eq!(medians[0], 0.0);
    assert!(medians[1] > 0.0 && medians[2] > medians[1]);
}
