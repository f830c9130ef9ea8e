use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use wetsim::scenario::{FREESPACE_SCENARIO, ROOM_SCENARIO};

fn wetsim(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_wetsim"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn write(dir: &Path, name: &str, text: &str) -> PathBuf {
    let p = dir.join(name);
    fs::write(&p, text).unwrap();
    p
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

fn run(scenario: &Path, out: &Path, extra: &[&str]) -> Output {
    let mut args = vec!["run", scenario.to_str().unwrap(), "--out", out.to_str().unwrap(), "--quiet"];
    args.extend_from_slice(extra);
    wetsim(&args)
}

fn listing(dir: &Path) -> Vec<String> {
    let mut names: Vec<String> = fs::read_dir(dir)
        .unwrap()
        .map(|e| e.unwrap().file_name().to_string_lossy().into_owned())
        .collect();
    names.sort();
    names
}

#[test]
fn empty_scenario_is_a_parse_error() {
    let tmp = tempfile::tempdir().unwrap();
    let p = write(tmp.path(), "empty.scenario", "");
    let o = run(&p, &tmp.path().join("out"), &[]);
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).contains("line 1"), "{}", stderr(&o));
}

#[test]
fn transmitter_outside_room_names_the_field() {
    let tmp = tempfile::tempdir().unwrap();
    let text = ROOM_SCENARIO.replace("position = [0.0, 6.7, 0.0]", "position = [0.0, 9.7, 0.0]");
    let p = write(tmp.path(), "bad.scenario", &text);
    let o = wetsim(&["check", p.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).contains("transmitters[1].position"), "{}", stderr(&o));
}

#[test]
fn unknown_flag_and_unknown_grid_are_usage_errors() {
    let tmp = tempfile::tempdir().unwrap();
    let p = write(tmp.path(), "fs.scenario", FREESPACE_SCENARIO);
    let out = tmp.path().join("out");
    assert_eq!(run(&p, &out, &["--bogus"]).status.code(), Some(1));
    assert_eq!(run(&p, &out, &["--schemes", "sp9"]).status.code(), Some(1));
    assert_eq!(run(&p, &out, &["--schemes", "xp"]).status.code(), Some(1));
    assert_eq!(run(&p, &out, &["--grids", "nowhere"]).status.code(), Some(1));
    assert_eq!(wetsim(&["--help"]).status.code(), Some(0));
}

#[test]
fn missing_file_is_reported() {
    let o = wetsim(&["check", "/nonexistent/x.scenario"]);
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).contains("cannot read"));
}

#[test]
fn scheme_subset_limits_outputs() {
    let tmp = tempfile::tempdir().unwrap();
    let p = write(tmp.path(), "fs.scenario", FREESPACE_SCENARIO);
    let out = tmp.path().join("out");
    let o = run(&p, &out, &["--schemes", "sp1", "--grids", "line"]);
    assert!(o.status.success(), "{}", stderr(&o));
    assert_eq!(
        listing(&out),
        ["coverage.csv", "field_line_sp1.csv", "summary.json", "summary.txt"]
    );
    let coverage = fs::read_to_string(out.join("coverage.csv")).unwrap();
    let mut lines = coverage.lines();
    assert_eq!(lines.next(), Some("p_req_dBm,coverage_fraction,scheme,grid_name"));
    assert!(lines.all(|l| l.ends_with(",sp1,line")));
}

#[test]
fn field_csv_layout() {
    let tmp = tempfile::tempdir().unwrap();
    let p = write(tmp.path(), "fs.scenario", FREESPACE_SCENARIO);
    let out = tmp.path().join("out");
    assert!(run(&p, &out, &["--schemes", "mpcsd", "--grids", "line"]).status.success());
    let text = fs::read_to_string(out.join("field_line_mpcsd.csv")).unwrap();
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(lines[0], "x_m,y_m,z_m,power_dBm,scheme");
    assert_eq!(lines.len(), 1 + 191);
    assert_eq!(lines[1].split(',').nth(1), Some("0.5000"));
    let dbm = lines[1].split(',').nth(3).unwrap();
    assert_eq!(dbm.split('.').nth(1).map(str::len), Some(3));
}

#[test]
fn order_zero_room_matches_free_space() {
    let tmp = tempfile::tempdir().unwrap();
    let room = write(tmp.path(), "room.scenario", ROOM_SCENARIO);
    let fs_path = write(tmp.path(), "fs.scenario", FREESPACE_SCENARIO);
    let a = tmp.path().join("room");
    let b = tmp.path().join("fs");
    assert!(run(&room, &a, &["--max-order", "0"]).status.success());
    assert!(run(&fs_path, &b, &[]).status.success());
    for name in listing(&a).into_iter().filter(|n| n.ends_with(".csv")) {
        assert_eq!(
            fs::read(a.join(&name)).unwrap(),
            fs::read(b.join(&name)).unwrap(),
            "{name} differs"
        );
    }
}

#[test]
fn oracle_check_with_seed_succeeds() {
    let tmp = tempfile::tempdir().unwrap();
    let p = write(tmp.path(), "room.scenario", ROOM_SCENARIO);
    let out = tmp.path().join("out");
    let o = run(&p, &out, &["--grids", "line", "--oracle-check", "--seed", "11"]);
    assert!(o.status.success(), "{}", stderr(&o));
    let summary: serde_json::Value = serde_json::from_str(&fs::read_to_string(out.join("summary.json")).unwrap()).unwrap();
    assert_eq!(summary["oracle_check"]["points_checked"], 191);
}

#[test]
fn p_req_overrides_shape_the_curve() {
    let tmp = tempfile::tempdir().unwrap();
    let p = write(tmp.path(), "fs.scenario", FREESPACE_SCENARIO);
    let out = tmp.path().join("out");
    let o = run(
        &p,
        &out,
        &["--schemes", "sp1", "--grids", "line", "--p-req-min", "-20", "--p-req-max", "-10", "--p-req-step", "5"],
    );
    assert!(o.status.success(), "{}", stderr(&o));
    let text = fs::read_to_string(out.join("coverage.csv")).unwrap();
    let first = text.lines().nth(1).unwrap();
    let last = text.lines().last().unwrap();
    assert!(first.starts_with("-20.000,1.000000,"), "{first}");
    assert!(last.starts_with("-10.000,"), "{last}");
    let bad = run(&p, &out, &["--p-req-min", "5", "--p-req-max", "-5"]);
    assert_eq!(bad.status.code(), Some(1));
}

#[test]
fn bundled_examples_validate_and_round_trip() {
    let tmp = tempfile::tempdir().unwrap();
    for which in ["freespace", "room"] {
        let o = wetsim(&["example", which]);
        assert!(o.status.success());
        let p = write(tmp.path(), &format!("{which}.scenario"), &String::from_utf8(o.stdout).unwrap());
        let c = wetsim(&["check", p.to_str().unwrap()]);
        assert!(c.status.success(), "{}", stderr(&c));
        assert!(String::from_utf8_lossy(&c.stdout).contains("2 transmitters, 3 grids, 4393 points"));
    }
}
