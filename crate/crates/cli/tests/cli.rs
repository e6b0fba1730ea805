use std::path::Path;
use std::process::{Command, Output};

use omt_cli::error::CliError;
use omt_core::OmtError;

fn omt(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_omt"))
        .args(args)
        .current_dir(dir)
        .env_remove("OMT_QUADRATURE")
        .output()
        .expect("run omt")
}

fn stdout(o: &Output) -> String {
    String::from_utf8(o.stdout.clone()).unwrap()
}

fn value(text: &str, key: &str) -> String {
    text.lines()
        .find_map(|l| l.strip_prefix(&format!("{key} = ")))
        .unwrap_or_else(|| panic!("no '{key}' in\n{text}"))
        .to_string()
}

fn csv_rows(path: &Path) -> Vec<(f64, f64, String)> {
    let text = std::fs::read_to_string(path).unwrap();
    let mut lines = text.lines();
    assert_eq!(lines.next(), Some("z1,z2,class"));
    lines
        .map(|l| {
            let mut f = l.split(',');
            (
                f.next().unwrap().parse().unwrap(),
                f.next().unwrap().parse().unwrap(),
                f.next().unwrap().to_string(),
            )
        })
        .collect()
}

#[test]
fn hommel_region_grid() {
    let dir = tempfile::tempdir().unwrap();
    let o = omt(dir.path(), &["region", "--proc", "hommel", "--alpha", "0.025", "--grid", "256"]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let rows = csv_rows(&dir.path().join("region.csv"));
    assert_eq!(rows.len(), 256 * 256);
    let c = -1.959_963_984_540_054;
    for (z1, z2, class) in &rows {
        if *z1 <= c && *z2 <= c {
            assert_eq!(class, "both");
        }
    }
    assert_eq!(value(&stdout(&o), "procedure"), "hommel");
}

#[test]
fn optimal_pi1_region_is_hommel_below_the_bound() {
    let dir = tempfile::tempdir().unwrap();
    let h = omt(dir.path(), &["region", "--proc", "hommel", "-o", "hommel.csv"]);
    assert!(h.status.success());
    let args = [
        "region", "--proc", "omt", "--objective", "pi1", "--theta1", "-2", "--theta2", "-2",
        "--alpha", "0.025", "-o", "omt.csv",
    ];
    let o = omt(dir.path(), &args);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let a = std::fs::read(dir.path().join("hommel.csv")).unwrap();
    let b = std::fs::read(dir.path().join("omt.csv")).unwrap();
    assert!(a == b);
}

#[test]
fn combo_region_is_asymmetric() {
    let dir = tempfile::tempdir().unwrap();
    let args = ["region", "--proc", "omt", "--objective", "combo", "--theta1", "-3.4", "--theta2", "-2.7"];
    let o = omt(dir.path(), &args);
    assert!(o.status.success());
    let out = stdout(&o);
    assert_ne!(value(&out, "cells_only1"), value(&out, "cells_only2"));
}

#[test]
fn null_power_rows() {
    let dir = tempfile::tempdir().unwrap();
    let o = omt(
        dir.path(),
        &["power", "--theta1", "0", "--theta2", "0", "--proc", "hommel,closed_stouffer"],
    );
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let out = stdout(&o);
    let fwer = out.lines().find(|l| l.starts_with("fwer,")).unwrap();
    let v: Vec<f64> = fwer.split(',').skip(1).map(|x| x.parse().unwrap()).collect();
    assert_eq!(fwer.split(',').nth(1), Some("0.0250"));
    assert!(v[1] < 0.025);
}

#[test]
fn power_table_with_simulation() {
    let dir = tempfile::tempdir().unwrap();
    let o = omt(
        dir.path(),
        &["power", "--proc", "hommel,omt:pi1", "--theta1", "-2", "--theta2", "-2.5", "--mc", "--reps", "20000"],
    );
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let out = stdout(&o);
    let header = out.lines().next().unwrap();
    assert_eq!(
        header,
        "measure,hommel,omt[pi1],hommel:mc,hommel:se,omt[pi1]:mc,omt[pi1]:se"
    );
    assert_eq!(out.lines().count(), 6);
    // Same seed, same output.
    let again = omt(
        dir.path(),
        &["power", "--proc", "hommel,omt:pi1", "--theta1", "-2", "--theta2", "-2.5", "--mc", "--reps", "20000"],
    );
    assert_eq!(out, stdout(&again));
}

#[test]
fn default_table_has_five_columns() {
    let dir = tempfile::tempdir().unwrap();
    let o = omt(dir.path(), &["power"]);
    assert!(o.status.success());
    let out = stdout(&o);
    assert_eq!(
        out.lines().next().unwrap(),
        "measure,omt[any],omt[pi1],omt[combo],closed_stouffer,hommel"
    );
}

#[test]
fn allocation_commands() {
    let dir = tempfile::tempdir().unwrap();
    let o = omt(
        dir.path(),
        &["allocate", "--N", "4800", "--grid", "0,0.25,0.5,0.75,1", "--measure", "pi_any"],
    );
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let r: f64 = value(&stdout(&o), "argmax pi_any").parse().unwrap();
    assert!(r == 0.0 || r == 1.0);
    let csv = std::fs::read_to_string(dir.path().join("allocation.csv")).unwrap();
    assert!(csv.starts_with("r,pi_avg,pi_any,pi_1,pi_combo\n"));
    assert_eq!(csv.lines().count(), 6);

    let o = omt(dir.path(), &["allocate", "--N", "600", "--grid", "0.25,0.5", "-o", "-"]);
    assert!(o.status.success());
    let out = stdout(&o);
    let pi1 = |r: &str| -> f64 {
        let line = out.lines().find(|l| l.starts_with(r)).unwrap();
        line.split(',').nth(3).unwrap().parse().unwrap()
    };
    assert!(pi1("0.2500") > pi1("0.5000"));

    let o = omt(dir.path(), &["allocate", "--grid", ""]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn apex_report() {
    let dir = tempfile::tempdir().unwrap();
    let o = omt(dir.path(), &["apex"]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let out = stdout(&o);
    let p1: f64 = value(&out, "p1").parse().unwrap();
    let p2: f64 = value(&out, "p2").parse().unwrap();
    assert!((p1 - 0.032).abs() <= 0.001);
    assert!((p2 - 0.006).abs() <= 0.001);
    assert_eq!(value(&out, "decision hommel"), "only2");
    assert_eq!(value(&out, "decision fixed_sequence"), "none");
    let t: Vec<f64> = value(&out, "theta_design")
        .split(',')
        .map(|x| x.parse().unwrap())
        .collect();
    assert!((t[0] + 3.397).abs() < 0.01);
}

#[test]
fn savings_and_unachievable() {
    let dir = tempfile::tempdir().unwrap();
    let o = omt(dir.path(), &["savings", "--measure", "pi_avg"]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let out = stdout(&o);
    assert_eq!(out.lines().next(), Some("measure,omt_power,n_reference,n_required,savings_pct"));
    let row: Vec<&str> = out.lines().nth(1).unwrap().split(',').collect();
    assert_eq!(row[0], "pi_avg");
    let n: u64 = row[3].parse().unwrap();
    assert!(n > 4800);

    let o = omt(dir.path(), &["savings", "--measure", "pi_any", "--n-cap", "5000"]);
    assert_eq!(o.status.code(), Some(4));
}

#[test]
fn config_file_and_overrides() {
    let dir = tempfile::tempdir().unwrap();
    std::fs::write(
        dir.path().join("run.cfg"),
        "# null run\nprocedures = hommel\ntheta1 = 0\ntheta2 = 0\nalpha = 0.05\n",
    )
    .unwrap();
    let o = omt(dir.path(), &["power", "--config", "run.cfg"]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    assert!(stdout(&o).contains("fwer,0.0500"));
    let o = omt(dir.path(), &["power", "--config", "run.cfg", "--alpha", "0.025"]);
    assert!(stdout(&o).contains("fwer,0.0250"));

    std::fs::write(dir.path().join("bad.cfg"), "alpah = 0.05\n").unwrap();
    let o = omt(dir.path(), &["power", "--config", "bad.cfg"]);
    assert_eq!(o.status.code(), Some(2));
    let o = omt(dir.path(), &["power", "--set", "bogus=1"]);
    assert_eq!(o.status.code(), Some(2));
    let o = omt(dir.path(), &["power", "--alpha", "0.7"]);
    assert_eq!(o.status.code(), Some(2));
    let o = omt(dir.path(), &["power", "--theta1", "-2", "--theta2", "-2", "--rho", "0.3", "--proc", "omt"]);
    assert_eq!(o.status.code(), Some(2));
    let o = omt(dir.path(), &["nonsense"]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn dumped_config_reproduces_the_run() {
    let dir = tempfile::tempdir().unwrap();
    let args = ["power", "--proc", "hommel,omt:combo", "--theta1", "-3.4", "--theta2", "-2.7"];
    let direct = omt(dir.path(), &args);
    assert!(direct.status.success());
    let mut dump_args = args.to_vec();
    dump_args.push("--dump-config");
    let dump = omt(dir.path(), &dump_args);
    std::fs::write(dir.path().join("dump.cfg"), dump.stdout).unwrap();
    let replay = omt(dir.path(), &["power", "--config", "dump.cfg"]);
    assert_eq!(direct.stdout, replay.stdout);

    let dump = omt(dir.path(), &["apex", "--dump-config"]);
    std::fs::write(dir.path().join("apex.cfg"), &dump.stdout).unwrap();
    assert!(stdout(&dump).contains("calibration = design"));
    let a = omt(dir.path(), &["apex"]);
    let b = omt(dir.path(), &["apex", "--config", "apex.cfg"]);
    assert_eq!(a.stdout, b.stdout);
}

#[test]
fn quadrature_profile_from_environment() {
    let dir = tempfile::tempdir().unwrap();
    let run = |profile: &str| {
        Command::new(env!("CARGO_BIN_EXE_omt"))
            .args(["power", "--proc", "hommel", "--theta1", "-2", "--theta2", "-2"])
            .current_dir(dir.path())
            .env("OMT_QUADRATURE", profile)
            .output()
            .unwrap()
    };
    let coarse = run("coarse");
    let fine = run("fine");
    assert!(coarse.status.success() && fine.status.success());
    assert_eq!(coarse.stdout, fine.stdout);
    assert_eq!(run("bogus").status.code(), Some(2));
}

#[test]
fn exit_code_mapping() {
    let e = CliError::from(OmtError::ToleranceNotMet {
        estimate: 1e-3,
        tolerance: 1e-8,
    });
    assert_eq!(e.exit_code(), 3);
    assert_eq!(CliError::from(OmtError::MaxIterations(10)).exit_code(), 3);
    assert_eq!(CliError::from(OmtError::Domain("x".into())).exit_code(), 2);
    let u = OmtError::Unachievable { target: 1.0, cap: 10 };
    assert_eq!(CliError::from(u).exit_code(), 4);
}

#[test]
fn in_process_run_reports_help() {
    let mut out = Vec::new();
    let mut err = Vec::new();
    let code = omt_cli::run(["omt", "--help"], None, &mut out, &mut err);
    assert_eq!(code, 0);
    assert!(String::from_utf8(out).unwrap().contains("region"));
}
