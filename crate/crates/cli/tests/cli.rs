use std::path::Path;
use std::process::{Command, Output};

fn prvem(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_prvem"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn code(out: &Output) -> i32 {
    out.status.code().expect("exited normally")
}

fn stdout(out: &Output) -> String {
    String::from_utf8_lossy(&out.stdout).into_owned()
}

fn csv_rows(path: &Path) -> Vec<Vec<String>> {
    std::fs::read_to_string(path)
        .unwrap()
        .lines()
        .map(|l| l.split(',').map(str::to_string).collect())
        .collect()
}

#[test]
fn uniform_table_to_csv() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("tab.csv");
    let o = prvem(&[
        "--case",
        "ex61",
        "--mesh",
        "square",
        "--n",
        "4",
        "--levels",
        "3",
        "--nu",
        "1e-8",
        "--rhs",
        "robust",
        "--out",
        out.to_str().unwrap(),
    ]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    assert!(stdout(&o).contains("case ex61"));
    let rows = csv_rows(&out);
    assert_eq!(rows.len(), 4);
    let rate = rows[0].iter().position(|h| h == "rate_u").unwrap();
    assert!(rows[1][rate].is_empty());
    let r: f64 = rows[3][rate].parse().unwrap();
    assert!((0.8..1.3).contains(&r), "rate {r}");
}

#[test]
fn adaptive_trace_to_csv() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("trace.csv");
    let o = prvem(&[
        "--case",
        "ex64",
        "--adaptive",
        "--delta",
        "0.4",
        "--tol",
        "10000",
        "--max-iters",
        "3",
        "--n",
        "2",
        "--out",
        out.to_str().unwrap(),
    ]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    assert!(stdout(&o).contains("slopes over the last 3 iterations"));
    let rows = csv_rows(&out);
    assert_eq!(rows[0][0], "iteration");
    assert_eq!(rows.len(), 4);
    let marked = rows[0].iter().position(|h| h == "marked").unwrap();
    assert!(rows[1..]
        .iter()
        .all(|r| r[marked].parse::<usize>().unwrap() > 0));
}

#[test]
fn raster_case_writes_vtk() {
    let dir = tempfile::tempdir().unwrap();
    let raster = dir.path().join("fib.txt");
    std::fs::write(&raster, "4 4\n1 1e6 1 1\n1 1e6 1 1\n1 1 1e6 1\n1 1 1e6 1\n").unwrap();
    let vtk = dir.path().join("out.vtk");
    let o = prvem(&[
        "--case",
        "fibrous",
        "--kappa-raster",
        raster.to_str().unwrap(),
        "--mesh",
        "square",
        "--n",
        "8",
        "--vtk",
        vtk.to_str().unwrap(),
    ]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let text = std::fs::read_to_string(vtk).unwrap();
    assert!(text.contains("CELLS 64 "));
    assert!(text.contains("SCALARS kappa_inv"));
}

#[test]
fn mesh_file_single_level() {
    let dir = tempfile::tempdir().unwrap();
    let mesh = dir.path().join("m.json");
    std::fs::write(
        &mesh,
        r#"{"vertices": [[0,0],[0.5,0],[1,0],[0,1],[0.5,1],[1,1]], "cells": [[0,1,4,3],[1,2,5,4]]}"#,
    )
    .unwrap();
    let spec = format!("file:{}", mesh.display());
    let o = prvem(&["--case", "ex61", "--mesh", &spec, "--quad-degree", "6"]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    // a fixed mesh cannot be refined uniformly
    assert_eq!(
        code(&prvem(&[
            "--case", "ex61", "--mesh", &spec, "--levels", "2"
        ])),
        2
    );
}

#[test]
fn bad_flags_exit_2() {
    let dir = tempfile::tempdir().unwrap();
    let bad_raster = dir.path().join("bad.txt");
    std::fs::write(&bad_raster, "2 2\n1 -1\n1 1\n").unwrap();
    let bad_raster = bad_raster.to_str().unwrap();
    let cases: &[&[&str]] = &[
        &["--rhs", "foo"],
        &["--case", "nope"],
        &["--mesh", "hexagons"],
        &["--mesh", "file:/definitely/not/here.json"],
        &["--quad-degree", "5"],
        &["--n", "0"],
        &["--levels", "0"],
        &["--nu", "-1"],
        &["--kappa", "0"],
        &["--adaptive", "--delta", "1.5"],
        &["--adaptive", "--max-iters", "0"],
        &["--case", "foam"],
        &["--case", "foam", "--kappa-raster", bad_raster],
        &["--no-such-flag"],
    ];
    for args in cases {
        let o = prvem(args);
        assert_eq!(
            code(&o),
            2,
            "{args:?}: {}",
            String::from_utf8_lossy(&o.stderr)
        );
        assert!(!o.stderr.is_empty());
    }
}

#[test]
fn numerical_failure_exits_1() {
    let o = prvem(&["--case", "ex61", "--n", "4", "--nu", "1e300"]);
    assert_eq!(code(&o), 1);
    assert!(String::from_utf8_lossy(&o.stderr).contains("non-finite"));
}

#[test]
fn help_exits_0() {
    let o = prvem(&["--help"]);
    assert_eq!(code(&o), 0);
    assert!(stdout(&o).contains("--kappa-raster"));
}
