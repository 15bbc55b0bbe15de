use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;

fn goddard(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_goddard")).args(args).output().expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8(o.stdout.clone()).unwrap()
}

#[test]
fn classify_prints_regime() {
    let o = goddard(&["classify", "--phi", "quadratic:k=0.5,b=1", "--g", "0.3", "--alpha", "0.5"]);
    assert_eq!(o.status.code(), Some(0));
    assert_eq!(stdout(&o).lines().next(), Some("I.1.a {Ia}"));

    let o = goddard(&["classify", "--phi", "quadratic:k=0.5,b=1", "--g", "0.3", "--alpha", "1.6"]);
    assert_eq!(stdout(&o).lines().next(), Some("I.3 {Ia,Ib,IIa,IIb,III}"));

    let o = goddard(&["classify", "--phi", "linear:gamma=1", "--g", "0.5", "--alpha", "3"]);
    assert!(stdout(&o).lines().next().unwrap().ends_with("{Ia}"));
}

#[test]
fn invalid_input_exits_2() {
    let cases: &[&[&str]] = &[
        &["classify", "--phi", "quadratic:k=0.5,b=1", "--alpha", "0.5"],
        &["classify", "--phi", "quadratic:k=0.5,b=1", "--g", "1.2", "--alpha", "0.5"],
        &["classify", "--phi", "cubic:a=1", "--g", "0.3", "--alpha", "0.5"],
        &["solve", "--phi", "linear:gamma=1", "--g", "0.5", "--T", "1", "--m0", "1.4", "--mT", "1.5"],
        &["solve", "--phi", "linear:gamma=1", "--g", "0.5", "--T", "1", "--m0", "1.4"],
        &["sweep", "--phi", "linear:gamma=1", "--g-range", "0.1:0.9"],
        &["no-such-command"],
    ];
    for args in cases {
        let o = goddard(args);
        assert_eq!(o.status.code(), Some(2), "{args:?}: {}", String::from_utf8_lossy(&o.stderr));
    }
}

fn read_dir_sorted(dir: &Path) -> Vec<(String, Vec<u8>)> {
    let mut files: Vec<(String, Vec<u8>)> = fs::read_dir(dir)
        .unwrap()
        .map(|e| {
            let p = e.unwrap().path();
            (p.file_name().unwrap().to_string_lossy().into_owned(), fs::read(&p).unwrap())
        })
        .collect();
    files.sort();
    files
}

#[test]
fn solve_is_deterministic_and_verifies() {
    let (a, b) = (tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap());
    let base = ["solve", "--phi", "quadratic:k=0.5,b=1", "--g", "0.4", "--T", "3", "--m0", "2", "--mT", "1"];
    let o1 = goddard(&[&base[..], &["--out", a.path().to_str().unwrap(), "--jobs", "1"]].concat());
    let o2 = goddard(&[&base[..], &["--out", b.path().to_str().unwrap(), "--jobs", "3"]].concat());
    assert_eq!(o1.status.code(), Some(0), "{}", String::from_utf8_lossy(&o1.stderr));
    assert_eq!(o1.stdout, o2.stdout);
    let files = read_dir_sorted(a.path());
    assert_eq!(files, read_dir_sorted(b.path()));
    assert!(files.iter().any(|(n, _)| n == "solve.json"));

    let summary: Value = serde_json::from_slice(&fs::read(a.path().join("solve.json")).unwrap()).unwrap();
    let best = &summary["extremals"][0];
    for key in ["type", "alpha", "switch_times", "s_T", "residual_norm", "regime", "admitted", "file"] {
        assert!(!best[key].is_null(), "summary lacks {key}");
    }

    let input = a.path().join(best["file"].as_str().unwrap());
    let stored: Value = serde_json::from_slice(&fs::read(&input).unwrap()).unwrap();
    assert_eq!(stored["type"], best["type"]);
    assert_eq!(stored["mp_report"]["pass"], Value::Bool(true));
    let traj = &stored["trajectory"];
    for key in ["grid", "s", "x", "m", "u", "psi"] {
        assert!(traj[key].is_array(), "trajectory lacks {key}");
    }
    let model = ["--phi", "quadratic:k=0.5,b=1", "--g", "0.4", "--T", "3", "--m0", "2", "--mT", "1"];
    let o = goddard(&[&["verify", "--input", input.to_str().unwrap()][..], &model[..]].concat());
    assert_eq!(o.status.code(), Some(0), "{}", stdout(&o));
    assert_eq!(stdout(&o).lines().last(), Some("PASS"));

    let alpha = stored["alpha"].as_f64().unwrap() + 1e-3;
    let bumped = alpha.to_string();
    let o = goddard(&[&["verify", "--input", input.to_str().unwrap(), "--alpha", &bumped][..], &model[..]].concat());
    assert_eq!(o.status.code(), Some(3));
    assert!(stdout(&o).contains("maximality FAIL"));
}

#[test]
fn full_thrust_record() {
    let dir = tempfile::tempdir().unwrap();
    let o = goddard(&[
        "solve",
        "--phi",
        "linear:gamma=1",
        "--g",
        "0.5",
        "--T",
        "1",
        "--m0",
        "2.4",
        "--mT",
        "1",
        "--out",
        dir.path().to_str().unwrap(),
    ]);
    assert_eq!(o.status.code(), Some(0));
    assert!(stdout(&o).starts_with("full thrust s_T 1.8393972058572"));
    let rec: Value =
        serde_json::from_slice(&fs::read(dir.path().join("extremal_00_full_thrust.json")).unwrap()).unwrap();
    assert!(rec["trajectory"]["u"].as_array().unwrap().iter().all(|u| u.as_f64() == Some(1.0)));
}

#[test]
fn config_file_with_flag_override() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("run.json");
    fs::write(&cfg, r#"{"phi": {"variant": "quadratic", "k": 0.5, "b": 1.0}, "g": 0.6, "alpha": 0.5}"#).unwrap();
    let o = goddard(&["classify", "--config", cfg.to_str().unwrap()]);
    assert!(stdout(&o).starts_with("III."));
    let o = goddard(&["classify", "--config", cfg.to_str().unwrap(), "--g", "0.3"]);
    assert_eq!(stdout(&o).lines().next(), Some("I.1.a {Ia}"));

    fs::write(&cfg, r#"{"phi": "linear:gamma=1", "gravity": 0.3}"#).unwrap();
    let o = goddard(&["classify", "--config", cfg.to_str().unwrap(), "--alpha", "1"]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn exclusion_table_is_ordered_and_complete() {
    let args =
        ["exclude-iii", "--k-range", "0.2:1:3", "--b-range", "0.5:2:2", "--g-range", "0.1:0.9:3", "--alpha-n", "4"];
    let o1 = goddard(&[&args[..], &["--jobs", "1"]].concat());
    let o3 = goddard(&[&args[..], &["--jobs", "3"]].concat());
    assert_eq!(o1.status.code(), Some(0));
    assert_eq!(o1.stdout, o3.stdout);
    let mut rdr = csv::Reader::from_reader(o1.stdout.as_slice());
    assert_eq!(
        rdr.headers().unwrap().iter().collect::<Vec<_>>(),
        "cell,k,b,g,alpha,status,branch,d_b,d_c,cases,b_z2,b_z3,c_z2,c_z3,levels,admissible_levels,excluded,shooting,note"
            .split(',')
            .collect::<Vec<_>>()
    );
    let rows: Vec<csv::StringRecord> = rdr.records().map(Result::unwrap).collect();
    assert_eq!(rows.len(), 3 * 2 * 3 * 4);
    for (i, r) in rows.iter().enumerate() {
        assert_eq!(r[0].parse::<usize>().unwrap(), i);
        assert_eq!(&r[5], "excluded");
        assert_eq!(&r[16], "true");
    }
}

#[test]
fn sweep_rows() {
    let o =
        goddard(&["sweep", "--phi", "quadratic:k=0.5,b=1", "--g-range", "0.05:0.95:20", "--alpha-range", "0.1:3:20"]);
    assert_eq!(o.status.code(), Some(0));
    let mut rdr = csv::Reader::from_reader(o.stdout.as_slice());
    assert_eq!(
        rdr.headers().unwrap().iter().collect::<Vec<_>>(),
        ["g", "alpha", "regime", "candidates", "best_type", "s_T", "boundary_flag"]
    );
    let rows: Vec<csv::StringRecord> = rdr.records().map(Result::unwrap).collect();
    assert_eq!(rows.len(), 400);
    assert!(rows.iter().all(|r| !r[2].is_empty() && r[3].starts_with('{')));

    let o = goddard(&["sweep", "--phi", "linear:gamma=1", "--g-range", "0.05:0.95:5", "--alpha-range", "0.1:3:5"]);
    let rows: Vec<csv::StringRecord> =
        csv::Reader::from_reader(o.stdout.as_slice()).records().map(Result::unwrap).collect();
    assert!(rows.iter().all(|r| &r[3] == "{Ia}"));
}

#[test]
fn oracle_row() {
    let o = goddard(&[
        "oracle",
        "--phi",
        "linear:gamma=1",
        "--g",
        "0.3",
        "--T",
        "1",
        "--m0",
        "1.4",
        "--mT",
        "1",
        "--cells",
        "200",
        "--restarts",
        "1",
        "--grid-n",
        "20",
    ]);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    let mut rdr = csv::Reader::from_reader(o.stdout.as_slice());
    let row = rdr.records().next().unwrap().unwrap();
    let direct: f64 = row[0].parse().unwrap();
    let extremal: f64 = row[6].parse().unwrap();
    assert!(direct <= extremal + 1e-6, "{direct} vs {extremal}");
}
