use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use tempfile::TempDir;

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_cdk-lab"))
}

fn scenarios() -> Vec<PathBuf> {
    let dir = Path::new(env!("CARGO_MANIFEST_DIR")).join("../../scenarios");
    let mut out: Vec<PathBuf> = fs::read_dir(dir)
        .unwrap()
        .map(|e| e.unwrap().path())
        .filter(|p| p.extension().is_some_and(|e| e == "scn"))
        .collect();
    out.sort();
    out
}

fn run(args: &[&str], cwd: &Path) -> Output {
    bin().args(args).current_dir(cwd).output().unwrap()
}

fn run_scenario(scn: &Path, out: &Path) -> Output {
    bin().arg("run").arg(scn).arg("--out").arg(out).output().unwrap()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

#[test]
fn bundled_scenarios_pass_and_are_byte_stable() {
    let list = scenarios();
    assert!(list.len() >= 7);
    let (a, b) = (TempDir::new().unwrap(), TempDir::new().unwrap());
    for scn in &list {
        for dir in [&a, &b] {
            let o = run_scenario(scn, dir.path());
            assert_eq!(o.status.code(), Some(0), "{}: {}", scn.display(), stderr(&o));
        }
    }
    let mut files: Vec<_> = fs::read_dir(a.path()).unwrap().map(|e| e.unwrap().file_name()).collect();
    files.sort();
    assert!(files.iter().any(|f| f == "log2_demo.csv"));
    for f in files {
        let x = fs::read(a.path().join(&f)).unwrap();
        let y = fs::read(b.path().join(&f)).unwrap();
        assert_eq!(x, y, "{f:?} differs between runs");
    }
}

#[test]
fn log2_scenario_reports_the_drop() {
    let dir = TempDir::new().unwrap();
    let scn = scenarios().into_iter().find(|p| p.ends_with("log2_demo.scn")).unwrap();
    assert!(run_scenario(&scn, dir.path()).status.success());
    let report: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(dir.path().join("log2_demo.json")).unwrap()).unwrap();
    let drop = report["steps"][0]["details"]["drop"].as_f64().unwrap();
    assert!((drop - std::f64::consts::LN_2).abs() <= 1e-9, "{drop}");
}

#[test]
fn path_scenario_is_unique_and_map_induced() {
    let dir = TempDir::new().unwrap();
    let scn = scenarios().into_iter().find(|p| p.ends_with("path_unique.scn")).unwrap();
    assert!(run_scenario(&scn, dir.path()).status.success());
    let text = fs::read_to_string(dir.path().join("path_unique.json")).unwrap();
    assert!(text.contains("\"outcome\": \"unique_map_induced\""));
}

#[test]
fn seed_changes_only_sampled_sections() {
    let dir = TempDir::new().unwrap();
    let write = |seed: u64| {
        let scn = dir.path().join(format!("s{seed}.scn"));
        fs::write(
            &scn,
            format!(
                r#"{{"name": "s{seed}", "seed": {seed}, "pipeline": [
                    {{"op": "split", "n": 6, "pairs": [[0, 1, 0.5], [2, 3, 0.5]]}},
                    {{"op": "split", "n": 8}}]}}"#
            ),
        )
        .unwrap();
        assert!(run_scenario(&scn, dir.path()).status.success());
        let v: serde_json::Value =
            serde_json::from_str(&fs::read_to_string(dir.path().join(format!("s{seed}.json"))).unwrap()).unwrap();
        v
    };
    let (x, y) = (write(1), write(2));
    assert_eq!(x["steps"][0], y["steps"][0]);
    assert_ne!(x["steps"][1], y["steps"][1]);
}

#[test]
fn empty_pipeline_gives_empty_report() {
    let dir = TempDir::new().unwrap();
    let scn = dir.path().join("empty.scn");
    fs::write(&scn, r#"{"name": "empty", "seed": 0, "pipeline": []}"#).unwrap();
    let o = run_scenario(&scn, dir.path());
    assert_eq!(o.status.code(), Some(0));
    let text = fs::read_to_string(dir.path().join("empty.json")).unwrap();
    assert!(text.contains("\"steps\": []"));
}

#[test]
fn unknown_op_is_a_structural_error() {
    let dir = TempDir::new().unwrap();
    let scn = dir.path().join("bad.scn");
    fs::write(&scn, "{\"name\": \"bad\",\n \"pipeline\": [\n {\"op\": \"teleport\"}]}").unwrap();
    let o = run_scenario(&scn, dir.path());
    assert_eq!(o.status.code(), Some(1));
    let msg = stderr(&o);
    assert!(msg.contains("teleport") && msg.contains("line 3"), "{msg}");
}

#[test]
fn failed_verdict_exits_with_two() {
    let dir = TempDir::new().unwrap();
    let scn = dir.path().join("fail.scn");
    fs::write(
        &scn,
        r#"{"name": "fail", "space": {"kind": "grid", "side": 3, "step": 0.5, "norm": "inf"},
            "measures": {"a": {"uniform": ["0_0", "0_1"]}, "b": {"uniform": ["2_0", "2_1"]}},
            "pipeline": [{"op": "unique", "mu0": "a", "mu1": "b", "steps": 2}]}"#,
    )
    .unwrap();
    assert_eq!(run_scenario(&scn, dir.path()).status.code(), Some(2));
}

#[test]
fn subcommands_chain_through_files() {
    let dir = TempDir::new().unwrap();
    let d = dir.path();
    let ok = |args: &[&str]| {
        let o = run(args, d);
        assert_eq!(o.status.code(), Some(0), "{args:?}: {}", stderr(&o));
    };
    ok(&["gen", "--grid", "3", "--step", "0.5", "--norm", "inf", "--out", "space.json"]);
    fs::write(d.join("a.json"), r#"{"uniform": ["0_0", "0_2"]}"#).unwrap();
    fs::write(d.join("b.json"), r#"{"dirac": "2_1"}"#).unwrap();
    let pair = ["--space", "space.json", "--mu0", "a.json", "--mu1", "b.json"];
    ok(&[&["w2", "--csv", "plan.csv", "--out", "w2.json"][..], &pair].concat());
    let csv = fs::read_to_string(d.join("plan.csv")).unwrap();
    assert!(csv.starts_with("source_id,target_id,mass\n"), "{csv}");
    ok(&["lift", "--space", "space.json", "--plan", "plan.csv", "--steps", "2", "--out", "geo.json"]);
    ok(&["cd-check", "--space", "space.json", "--plan", "geo.json", "--K", "0"]);
    ok(&["branch-scan", "--space", "space.json", "--plan", "geo.json"]);
    ok(&[&["mix-demo", "--steps", "2"][..], &pair].concat());
    ok(&["split", "--n", "7", "--seed", "4"]);
    ok(&["log2-demo", "--plot", "plot.csv", "--out", "log2.json"]);
    assert!(fs::read_to_string(d.join("plot.csv")).unwrap().starts_with("time,entropy,series\n"));

    let o = run(&["gen", "--grid", "3", "--step", "0.3"], d);
    assert_eq!(o.status.code(), Some(1), "non-dyadic step must be rejected");
}

#[test]
fn strong_cd_exit_codes() {
    let dir = TempDir::new().unwrap();
    let d = dir.path();
    fs::write(d.join("grid.json"), r#"{"kind": "grid", "side": 3, "step": 0.5, "norm": "inf"}"#).unwrap();
    fs::write(d.join("path.json"), r#"{"kind": "grid", "side": 5, "step": 0.5, "norm": "1", "dim": 1}"#).unwrap();
    fs::write(d.join("a.json"), r#"{"uniform": ["0_0", "0_1"]}"#).unwrap();
    fs::write(d.join("b.json"), r#"{"uniform": ["2_0", "2_1"]}"#).unwrap();
    fs::write(d.join("c.json"), r#"{"uniform": ["0", "1"]}"#).unwrap();
    fs::write(d.join("e.json"), r#"{"uniform": ["3", "4"]}"#).unwrap();
    let grid = run(&["strong-cd", "--space", "grid.json", "--mu0", "a.json", "--mu1", "b.json", "--steps", "2"], d);
    assert_eq!(grid.status.code(), Some(2));
    let path = run(&["strong-cd", "--space", "path.json", "--mu0", "c.json", "--mu1", "e.json", "--steps", "3"], d);
    assert_eq!(path.status.code(), Some(0), "{}", stderr(&path));
}

#[test]
fn thread_cap_is_validated() {
    let dir = TempDir::new().unwrap();
    let o = bin().args(["split", "--n", "5"]).env("CDK_LAB_THREADS", "many").current_dir(dir.path()).output().unwrap();
    assert_eq!(o.status.code(), Some(1));
    let o = bin().args(["split", "--n", "5"]).env("CDK_LAB_THREADS", "1").current_dir(dir.path()).output().unwrap();
    assert_eq!(o.status.code(), Some(0));
}
