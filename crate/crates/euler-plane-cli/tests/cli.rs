//! End-to-end tests of the `euler-plane` binary: commands, exit codes,
//! report determinism and SVG emission.

use std::fs;
use std::path::PathBuf;
use std::process::{Command, Output};

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_euler-plane"))
}

fn run(args: &[&str]) -> Output {
    bin().args(args).output().expect("binary should run")
}

fn temp_dir(name: &str) -> PathBuf {
    let dir = std::env::temp_dir().join(format!("euler-plane-cli-{}-{}", name, std::process::id()));
    fs::create_dir_all(&dir).unwrap();
    dir
}

fn stdout(out: &Output) -> String {
    String::from_utf8_lossy(&out.stdout).into_owned()
}

fn stderr(out: &Output) -> String {
    String::from_utf8_lossy(&out.stderr).into_owned()
}

/// The hashed region of a report: everything before the [digest] block.
fn body(report: &str) -> &str {
    report.split("\n[digest]\n").next().unwrap()
}

#[test]
fn zoo_list_prints_the_catalog() {
    let out = run(&["zoo", "list"]);
    assert!(out.status.success());
    let text = stdout(&out);
    for name in [
        "bestvina",
        "genus2-smooth",
        "torus-shear",
        "randomized-torus",
        "commuting-rotation-twist",
        "free-translations",
        "pullback-degree-one",
    ] {
        assert!(text.contains(name), "missing {} in:\n{}", name, text);
    }
}

#[test]
fn help_and_usage_errors() {
    assert!(run(&["help"]).status.success());
    assert_eq!(run(&[]).status.code(), Some(2));
    assert_eq!(run(&["frobnicate"]).status.code(), Some(2));
    assert_eq!(run(&["zoo"]).status.code(), Some(2));
    assert_eq!(run(&["run"]).status.code(), Some(2));
    assert_eq!(run(&["run", "torus-shear", "--method", "psychic"]).status.code(), Some(2));
}

#[test]
fn recipe_scene_reports_its_twist_power() {
    let dir = temp_dir("bestvina");
    let scene_path = dir.join("bestvina2.scene");
    fs::write(
        &scene_path,
        "euler-plane scene v1\n\n[group]\ngenus = 1\nrecipe = bestvina\n\n[method]\nname = lift\nn = 2\n",
    )
    .unwrap();
    let report_path = dir.join("report.txt");
    let out = run(&[
        "run",
        scene_path.to_str().unwrap(),
        "--report",
        report_path.to_str().unwrap(),
    ]);
    assert!(out.status.success(), "stderr: {}", stderr(&out));
    let report = fs::read_to_string(&report_path).unwrap();
    assert!(report.contains("name = bestvina(2)"), "{}", report);
    assert!(report.contains("[result lift]\nvalue = 2\n"), "{}", report);
    assert!(report.contains("passes = true"));
    fs::remove_dir_all(&dir).ok();
}

#[test]
fn parse_errors_exit_2_with_positions() {
    let dir = temp_dir("parse-error");
    let scene_path = dir.join("bad.scene");
    fs::write(
        &scene_path,
        "euler-plane scene v1\n\n[group]\ngenus = 1\n\n[primitives]\nt = translation dx=1 dy=0\n\n[generators]\na1 = t * q\n",
    )
    .unwrap();
    let out = run(&["run", scene_path.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(2));
    let err = stderr(&out);
    assert!(err.contains("line 10"), "{}", err);
    assert!(err.contains("`q`"), "{}", err);
    fs::remove_dir_all(&dir).ok();
}

#[test]
fn relator_violations_exit_4() {
    let dir = temp_dir("relator");
    let scene_path = dir.join("broken.scene");
    fs::write(
        &scene_path,
        "euler-plane scene v1\n\n[group]\ngenus = 1\n\n[primitives]\nd = dilation cx=0 cy=0 factor=2\nt = translation dx=1 dy=0\n\n[generators]\na1 = d\nb1 = t\n\n[method]\nname = lift\nbasepoint = (3,0)\nR = 0.5\n",
    )
    .unwrap();
    let out = run(&["run", scene_path.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(4));
    assert!(stderr(&out).contains("relator violation"));
    fs::remove_dir_all(&dir).ok();
}

#[test]
fn missing_plans_exit_2() {
    let out = run(&["run", "free-translations", "--method", "signed-sum"]);
    assert_eq!(out.status.code(), Some(2));
    assert!(stderr(&out).contains("no plan"));
}

#[test]
fn all_methods_agree_on_the_shear_and_reports_are_deterministic() {
    let dir = temp_dir("determinism");
    let r1 = dir.join("r1.txt");
    let r2 = dir.join("r2.txt");
    let out1 = run(&["run", "torus-shear", "--report", r1.to_str().unwrap()]);
    let out2 = run(&["run", "torus-shear", "--report", r2.to_str().unwrap()]);
    assert!(out1.status.success(), "stderr: {}", stderr(&out1));
    assert!(out2.status.success());
    let t1 = fs::read_to_string(&r1).unwrap();
    let t2 = fs::read_to_string(&r2).unwrap();
    assert_eq!(body(&t1), body(&t2), "hashed regions must be byte-identical");
    assert!(t1.contains("agree = true"));
    assert!(t1.contains("[result signed-sum]"));
    assert!(t1.contains("[result writhe-diff]"));
    assert!(t1.contains("value = 0"));
    fs::remove_dir_all(&dir).ok();
}

#[test]
fn accumulating_orbits_are_skipped_not_certified() {
    let dir = temp_dir("bestvina-all");
    let report_path = dir.join("r.txt");
    let out = run(&[
        "run",
        "bestvina",
        "--report",
        report_path.to_str().unwrap(),
    ]);
    assert!(out.status.success(), "stderr: {}", stderr(&out));
    let report = fs::read_to_string(&report_path).unwrap();
    assert!(report.contains("[result lift]\nvalue = 1\n"));
    assert!(report.contains("[result graphical]\nvalue = 1\n"));
    assert!(report.contains("[skipped signed-sum]"));
    assert!(report.contains("[skipped writhe-diff]"));
    assert!(report.contains("agree = true"));
    fs::remove_dir_all(&dir).ok();
}

#[test]
fn exploratory_signed_sum_is_marked_non_certified() {
    let out = run(&["run", "commuting-rotation-twist", "--method", "signed-sum"]);
    assert!(out.status.success());
    assert!(stdout(&out).contains("NON-CERTIFIED"));
}

#[test]
fn svg_emission_is_deterministic_and_well_formed() {
    let dir = temp_dir("svg");
    let s1 = dir.join("a.svg");
    let s2 = dir.join("b.svg");
    for s in [&s1, &s2] {
        let out = run(&["run", "torus-shear", "--svg", s.to_str().unwrap()]);
        assert!(out.status.success(), "stderr: {}", stderr(&out));
    }
    let t1 = fs::read_to_string(&s1).unwrap();
    let t2 = fs::read_to_string(&s2).unwrap();
    assert_eq!(t1, t2);
    assert!(t1.starts_with("<svg "));
    assert!(t1.trim_end().ends_with("</svg>"));
    assert!(t1.contains("X_3 (plateau at 7)"));
    fs::remove_dir_all(&dir).ok();
}

#[test]
fn verbose_echoes_the_canonical_scene() {
    let out = run(&["run", "torus-shear", "--method", "lift", "--verbose"]);
    assert!(out.status.success());
    let text = stdout(&out);
    assert!(text.contains("euler-plane scene v1"));
    assert!(text.contains("recipe = torus-shear"));
}
