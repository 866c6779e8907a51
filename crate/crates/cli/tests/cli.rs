//! Command-line contract: formats, exit codes, configuration precedence.

use std::path::Path;
use std::process::{Command, Output};

use nhrabi::oracle::diagonalize;
use nhrabi::output::{number, parse_number, SCAN_HEADER, SPECTRUM_HEADER};
use nhrabi::{FockSpace, ModelParams};

fn nhrabi(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_nhrabi")).args(args).output().expect("binary runs")
}

fn stdout(out: &Output) -> String {
    String::from_utf8(out.stdout.clone()).unwrap()
}

fn fields(line: &str) -> Vec<&str> {
    line.split(',').collect()
}

#[test]
fn real_g_curves() {
    let out = nhrabi(&["gfun", "--delta", "0.5", "--g", "0.25", "--e-min", "-0.5", "--e-max", "3.5", "--steps", "9"]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let text = stdout(&out);
    let mut lines = text.lines();
    assert_eq!(lines.next(), Some("E,re_Gp,re_Gm"));
    let rows: Vec<&str> = lines.collect();
    assert_eq!(rows.len(), 9);
    assert_eq!(parse_number(fields(rows[0])[0]), Some(-0.5));
    assert_eq!(parse_number(fields(rows[8])[0]), Some(3.5));
}

#[test]
fn empty_energy_window_is_one_row() {
    let out = nhrabi(&["gfun", "--delta", "0.5", "--g", "0.25", "--e-min", "0.3", "--e-max", "0.3"]);
    assert_eq!(out.status.code(), Some(0));
    assert_eq!(stdout(&out).lines().count(), 2);
}

#[test]
fn pole_cells_are_empty() {
    // E = 1 + g² lies on a pole line
    let out = nhrabi(&["gfun", "--delta", "0.5", "--g", "0.25", "--e-min", "1.0625", "--e-max", "1.0625"]);
    assert_eq!(out.status.code(), Some(0));
    let text = stdout(&out);
    let row = text.lines().nth(1).unwrap();
    assert_eq!(fields(row)[1..], ["", ""]);
}

#[test]
fn complex_plane_is_mirror_symmetric() {
    let out = nhrabi(&[
        "gfun", "--complex", "--delta", "2.5", "--g", "0.8", "--e-min", "0.5", "--e-max", "2.5", "--steps", "21",
        "--im-min", "-1", "--im-max", "1", "--im-steps", "21",
    ]);
    assert_eq!(out.status.code(), Some(0));
    let text = stdout(&out);
    let mut lines = text.lines();
    assert_eq!(lines.next(), Some("re_E,im_E,ln_abs2_Gp,ln_abs2_Gm"));
    let rows: Vec<Vec<f64>> = lines.map(|l| fields(l).iter().map(|f| parse_number(f).unwrap_or(f64::NAN)).collect()).collect();
    assert_eq!(rows.len(), 21 * 21);
    for r in &rows {
        let mirror = rows.iter().find(|m| m[0] == r[0] && (m[1] + r[1]).abs() < 1e-12).unwrap();
        for c in 2..4 {
            assert!((mirror[c] - r[c]).abs() < 1e-9 * (1.0 + r[c].abs()) || (mirror[c].is_nan() && r[c].is_nan()));
        }
    }
}

#[test]
fn closed_form_column() {
    let out = nhrabi(&["spectrum", "--delta", "2.5", "--steps", "1", "--g-min", "0", "--g-max", "0"]);
    assert_eq!(out.status.code(), Some(0));
    let text = stdout(&out);
    assert_eq!(text.lines().next(), Some(SPECTRUM_HEADER));
    let closed: Vec<f64> = text
        .lines()
        .skip(1)
        .filter(|l| l.ends_with("closed-form"))
        .map(|l| parse_number(fields(l)[1]).unwrap())
        .collect();
    assert_eq!(closed, vec![-1.25, -0.25, 0.75, 1.25, 1.75, 2.25, 2.75, 3.25]);
}

#[test]
fn oracle_rows_equal_direct_diagonalization() {
    let dir = tempfile::tempdir().unwrap();
    let out_path = dir.path().join("s.csv");
    let out = nhrabi(&["spectrum", "--delta", "2.5", "--g-min", "0.05", "--g-max", "0.95", "--steps", "10", "--out", out_path.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(0));
    let text = std::fs::read_to_string(&out_path).unwrap();
    let rows: Vec<&str> = text.lines().skip(1).filter(|l| l.ends_with(",oracle")).collect();
    assert!(rows.len() >= 20);
    let step = rows.len() / 20;
    for row in rows.iter().step_by(step).take(20) {
        let f = fields(row);
        let g = parse_number(f[0]).unwrap();
        let pairs = diagonalize(&ModelParams::new(2.5, g).unwrap(), &FockSpace::default()).unwrap();
        let hit = pairs.iter().any(|p| number(p.value.re) == f[1] && number(p.value.im) == f[2] && p.parity.symbol() == f[3]);
        assert!(hit, "row {row} not reproduced");
    }
}

#[test]
fn degenerate_records() {
    let out = nhrabi(&["degenerate", "--delta", "2.5", "--n", "1"]);
    assert_eq!(out.status.code(), Some(0));
    let v: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(v[0]["found"], true);
    assert!((v[0]["g_star"].as_f64().unwrap() - 0.375).abs() < 1e-9);

    let out = nhrabi(&["degenerate", "--delta", "1.0", "--n", "1"]);
    assert_eq!(out.status.code(), Some(0));
    let v: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(v[0]["found"], false);
}

#[test]
fn ep_window_without_point_is_not_found() {
    let out = nhrabi(&["ep", "--delta", "2.5", "--g-min", "0.05", "--g-max", "0.1"]);
    assert_eq!(out.status.code(), Some(0));
    let v: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(v[0]["found"], false);
}

#[test]
fn configuration_errors_exit_two() {
    for args in [
        vec!["spectrum", "--delta", "abc"],
        vec!["spectrum", "--delta", "2.5", "--steps", "0"],
        vec!["spectrum", "--delta", "2.5", "--format", "xml"],
        vec!["spectrum"],
        vec!["fs", "--delta", "2.5", "--tracking", "sideways"],
    ] {
        assert_eq!(nhrabi(&args).status.code(), Some(2), "{args:?}");
    }
}

#[test]
fn flags_override_config_file() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("run.cfg");
    std::fs::write(&cfg, "# sweep\ndelta = 1.5\ncutoff=80\nsteps=11\n").unwrap();
    let out = nhrabi(&["spectrum", "--config", cfg.to_str().unwrap(), "--cutoff", "90", "--show-config"]);
    assert_eq!(out.status.code(), Some(0));
    let text = stdout(&out);
    assert!(text.lines().any(|l| l == "delta=1.5"), "{text}");
    assert!(text.lines().any(|l| l == "cutoff=90"));
    assert!(text.lines().any(|l| l == "steps=11"));

    std::fs::write(&cfg, "delta = 1.5\nbogus = 3\n").unwrap();
    assert_eq!(nhrabi(&["spectrum", "--config", cfg.to_str().unwrap()]).status.code(), Some(2));
}

#[test]
fn scan_output_and_plot_script() {
    let dir = tempfile::tempdir().unwrap();
    let out_path = dir.path().join("fs.csv");
    let out = nhrabi(&[
        "fs", "--delta", "2.5", "--g-min", "0.1", "--g-max", "0.2", "--steps", "5", "--branches", "0,1", "--cutoff", "40",
        "--plot-script", "--out", out_path.to_str().unwrap(),
    ]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let text = std::fs::read_to_string(&out_path).unwrap();
    assert_eq!(text.lines().next(), Some(SCAN_HEADER));
    assert_eq!(text.lines().count(), 11);
    assert!(Path::new(&format!("{}.plot.py", out_path.display())).exists());
    assert!(!Path::new(&format!("{}.failures", out_path.display())).exists());
}

#[test]
fn json_and_csv_agree() {
    let csv = nhrabi(&["degenerate", "--delta", "2.5", "--n", "1,2", "--format", "csv"]);
    let json = nhrabi(&["degenerate", "--delta", "2.5", "--n", "1,2", "--format", "json"]);
    let v: serde_json::Value = serde_json::from_slice(&json.stdout).unwrap();
    let text = stdout(&csv);
    let rows: Vec<&str> = text.lines().skip(1).collect();
    assert_eq!(rows.len(), 2);
    for (row, rec) in rows.iter().zip(v.as_array().unwrap()) {
        let g = parse_number(fields(row)[3]).unwrap();
        assert_eq!(g, rec["g_star"].as_f64().unwrap());
    }
}
