use std::path::PathBuf;
use std::process::{Command, Output};

fn nonsignal(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_nonsignal"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8(o.stdout.clone()).unwrap()
}

fn stderr(o: &Output) -> String {
    String::from_utf8(o.stderr.clone()).unwrap()
}

/// Parses a CSV section into its header and rows of fields.
fn csv(text: &str) -> (Vec<String>, Vec<Vec<String>>) {
    let mut lines = text.lines();
    let header = lines.next().unwrap().split(',').map(String::from).collect();
    let rows = lines
        .take_while(|l| !l.is_empty())
        .map(|l| l.split(',').map(String::from).collect())
        .collect();
    (header, rows)
}

fn scratch(name: &str) -> PathBuf {
    let dir = PathBuf::from(env!("CARGO_TARGET_TMPDIR")).join("cli-tests");
    std::fs::create_dir_all(&dir).unwrap();
    dir.join(name)
}

#[test]
fn box_pr_is_valid() {
    let o = nonsignal(&["box", "--d", "3", "--kind", "prj", "--j", "1"]);
    assert_eq!(o.status.code(), Some(0));
    assert!(stderr(&o).contains("valid: true"));
    assert!(stderr(&o).contains("no-signalling: true"));
    let doc: serde_json::Value = serde_json::from_str(&stdout(&o)).unwrap();
    assert_eq!(doc["scenario"], serde_json::json!([3, 2, 3, 3]));
    // x=1, y=1: b - a + 1 ≡ 1, so the diagonal carries 1/3
    let p = doc["probs"][1][1][2][2].as_f64().unwrap();
    assert!((p - 1.0 / 3.0).abs() < 1e-15);
    assert_eq!(doc["probs"][1][1][2][0].as_f64().unwrap(), 0.0);
}

#[test]
fn box_isotropic_entries() {
    let o = nonsignal(&["box", "--d", "2", "--kind", "isotropic", "--E", "0.5"]);
    assert_eq!(o.status.code(), Some(0));
    let doc: serde_json::Value = serde_json::from_str(&stdout(&o)).unwrap();
    for x in 0..2 {
        for y in 0..2 {
            for a in 0..2 {
                for b in 0..2 {
                    let on_rule = (b + 2 - a) % 2 == (x * y) % 2;
                    let expected = if on_rule { 0.375 } else { 0.125 };
                    assert_eq!(doc["probs"][x][y][a][b].as_f64().unwrap(), expected);
                }
            }
        }
    }
}

#[test]
fn box_bad_parameters_exit_2() {
    assert_eq!(
        nonsignal(&["box", "--d", "1", "--kind", "uniform"])
            .status
            .code(),
        Some(2)
    );
    assert_eq!(
        nonsignal(&["box", "--d", "2", "--kind", "isotropic"])
            .status
            .code(),
        Some(2)
    );
    assert_eq!(
        nonsignal(&["box", "--d", "2", "--kind", "isotropic", "--E", "1.5"])
            .status
            .code(),
        Some(2)
    );
    assert_eq!(
        nonsignal(&["box", "--d", "3", "--kind", "prj", "--j", "3"])
            .status
            .code(),
        Some(2)
    );
    assert_eq!(
        nonsignal(&["box", "--kind", "uniform"]).status.code(),
        Some(2)
    );
    assert_eq!(
        nonsignal(&["box", "--d", "2", "--kind", "bogus"])
            .status
            .code(),
        Some(2)
    );
}

#[test]
fn protocol_noiseless_rows() {
    let o = nonsignal(&[
        "protocol",
        "--d",
        "2",
        "--n",
        "1",
        "--E",
        "1",
        "--trials",
        "1000",
        "--seed",
        "7",
        "--exact-i",
    ]);
    assert_eq!(o.status.code(), Some(0));
    let (header, rows) = csv(&stdout(&o));
    assert_eq!(
        header.join(","),
        "d,n,E,p_closed,p_empirical,fano_bound,exact_I"
    );
    assert_eq!(rows, vec![vec!["2", "1", "1", "1", "1", "2", "2"]]);
}

#[test]
fn protocol_simulation_within_three_sigma() {
    let o = nonsignal(&[
        "protocol", "--d", "3", "--n", "2", "--E", "0.5", "--trials", "100000", "--seed", "1",
    ]);
    assert_eq!(o.status.code(), Some(0));
    let (_, rows) = csv(&stdout(&o));
    let p: f64 = rows[0][3].parse().unwrap();
    let emp: f64 = rows[0][4].parse().unwrap();
    assert_eq!(p, 0.5);
    assert!((emp - p).abs() <= 3.0 * (p * (1.0 - p) / 1e5).sqrt());
    assert_eq!(rows[0][6], "", "exact_I only when requested");
}

#[test]
fn protocol_grid_is_sorted_and_skips_unaffordable_exact() {
    let o = nonsignal(&[
        "protocol",
        "--d",
        "7,2",
        "--n",
        "2,1",
        "--E",
        "0.9,0.3",
        "--trials",
        "2000",
        "--exact-i",
    ]);
    assert_eq!(o.status.code(), Some(0));
    let (_, rows) = csv(&stdout(&o));
    let keys: Vec<_> = rows
        .iter()
        .map(|r| (r[0].clone(), r[1].clone(), r[2].clone()))
        .collect();
    let mut sorted = keys.clone();
    sorted.sort_by(|a, b| {
        let k = |t: &(String, String, String)| {
            (
                t.0.parse::<usize>().unwrap(),
                t.1.parse::<u32>().unwrap(),
                t.2.parse::<f64>().unwrap(),
            )
        };
        k(a).partial_cmp(&k(b)).unwrap()
    });
    assert_eq!(keys, sorted);
    assert_eq!(rows.len(), 8);
    for r in &rows {
        let affordable = r[0] == "2" || r[1] == "1";
        assert_eq!(!r[6].is_empty(), affordable, "row {r:?}");
    }
}

#[test]
fn protocol_bad_flags_exit_2() {
    assert_eq!(
        nonsignal(&["protocol", "--d", "2", "--n", "1"])
            .status
            .code(),
        Some(2)
    );
    assert_eq!(
        nonsignal(&["protocol", "--d", "2", "--n", "0", "--E", "0.5"])
            .status
            .code(),
        Some(2)
    );
    assert_eq!(
        nonsignal(&["protocol", "--d", "2", "--n", "1", "--E", "0.5", "--trials", "0"])
            .status
            .code(),
        Some(2)
    );
}

#[test]
fn same_seed_is_byte_identical() {
    let args = [
        "protocol", "--d", "3,5", "--n", "1,2", "--E", "0.8", "--trials", "50000", "--seed", "11",
    ];
    let first = nonsignal(&args);
    let second = nonsignal(&args);
    assert_eq!(first.stdout, second.stdout);

    let single = Command::new(env!("CARGO_BIN_EXE_nonsignal"))
        .args(args)
        .env("NONSIGNAL_THREADS", "1")
        .output()
        .unwrap();
    assert_eq!(first.stdout, single.stdout);
}

#[test]
fn bad_thread_count_exit_2() {
    let o = Command::new(env!("CARGO_BIN_EXE_nonsignal"))
        .args(["box", "--d", "2", "--kind", "uniform"])
        .env("NONSIGNAL_THREADS", "zero")
        .output()
        .unwrap();
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn figure2_d2_tail() {
    let o = nonsignal(&["figure2", "--d-list", "2", "--n-max", "30"]);
    assert_eq!(o.status.code(), Some(0));
    let text = stdout(&o);
    let (header, rows) = csv(&text);
    assert_eq!(header.join(","), "d,n,e_critical,e_tsirelson");
    assert_eq!(rows.len(), 30);
    assert_eq!(rows[29][..3], ["2", "30", "0.710967"]);
    assert!(rows.iter().all(|r| r[3] == "0.707107"));
    let table = text.split("\n\n").nth(1).unwrap();
    assert_eq!(table, "d,e_ic,n_at_opt\n2,0.710967,30\n");
}

#[test]
fn figure2_optimum_rows() {
    let o = nonsignal(&["figure2", "--d-list", "10,2,5", "--n-max", "30"]);
    let text = stdout(&o);
    let (_, rows) = csv(&text);
    assert_eq!(rows.len(), 90);
    assert_eq!(rows[0][0], "2");
    assert_eq!(rows[89][0], "10");
    let (_, table) = csv(text.split("\n\n").nth(1).unwrap());
    assert_eq!(table[1], ["5", "0.699831", "7"]);
    assert_eq!(table[2], ["10", "0.679647", "5"]);
    assert!(table[2][1].parse::<f64>().unwrap() < std::f64::consts::FRAC_1_SQRT_2);
}

#[test]
fn figure2_files_with_manifests() {
    let out = scratch("curve.csv");
    let table = scratch("table.csv");
    let o = nonsignal(&[
        "figure2",
        "--d-list",
        "5",
        "--n-max",
        "40",
        "--out",
        out.to_str().unwrap(),
        "--table-out",
        table.to_str().unwrap(),
    ]);
    assert_eq!(o.status.code(), Some(0));
    assert!(o.stdout.is_empty());
    assert_eq!(
        std::fs::read_to_string(&table).unwrap(),
        "d,e_ic,n_at_opt\n5,0.699831,7\n"
    );
    let curve = std::fs::read_to_string(&out).unwrap();
    let min = csv(&curve)
        .1
        .iter()
        .map(|r| r[2].parse::<f64>().unwrap())
        .fold(1.0, f64::min);
    assert!(min <= 0.701);

    let manifest: serde_json::Value = serde_json::from_str(
        &std::fs::read_to_string(format!("{}.manifest.json", out.display())).unwrap(),
    )
    .unwrap();
    assert_eq!(manifest["command"], "figure2");
    assert_eq!(manifest["parameters"]["nMax"], "40");
    assert_eq!(manifest["outputPath"], out.to_str().unwrap());
    assert!(manifest["seed"].is_null());
    assert!(manifest["toolVersion"].is_string());
}

#[test]
fn q1_d2_boundary_and_dump() {
    let dump = scratch("moment.json");
    let o = nonsignal(&[
        "q1",
        "--d-list",
        "2",
        "--dump-moment",
        dump.to_str().unwrap(),
    ]);
    assert_eq!(o.status.code(), Some(0));
    let (header, rows) = csv(&stdout(&o));
    assert_eq!(header, ["d", "e_ml"]);
    let e: f64 = rows[0][1].parse().unwrap();
    assert!((e - 0.707).abs() <= 1e-3);
    let doc: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(&dump).unwrap()).unwrap();
    assert_eq!(doc["operators"].as_array().unwrap().len(), 5);
}

#[test]
fn q1_guards() {
    assert_eq!(nonsignal(&["q1", "--d-list", "7"]).status.code(), Some(2));
    assert_eq!(
        nonsignal(&["q1", "--d-list", "2", "--tol-e", "1e-6"])
            .status
            .code(),
        Some(2)
    );
}
