use std::path::Path;
use std::process::{Command, Output};

use dbrp::io::{self, PlanDoc};
use dbrp::scene::{is_goal, replay};

fn dbrp(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_dbrp")).args(args).env_remove("DBRP_SEED").output().expect("binary runs")
}

fn path(p: &Path) -> &str {
    p.to_str().unwrap()
}

#[test]
fn gen_plan_refine_replay() {
    let dir = tempfile::tempdir().unwrap();
    let scene = dir.path().join("scene.json");
    let plan = dir.path().join("plan.json");
    let refined = dir.path().join("refined.json");
    let svg = dir.path().join("plan.svg");

    let out = dbrp(&["gen", "--n", "5", "--phi", "0.3", "--seed", "4", "--out", path(&scene)]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let out = dbrp(&[
        "plan",
        "--scene",
        path(&scene),
        "--algo",
        "astar-ds",
        "--time-limit",
        "3",
        "--out",
        path(&plan),
        "--svg",
        path(&svg),
    ]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let out =
        dbrp(&["refine", "--scene", path(&scene), "--plan", path(&plan), "--mode", "dynamic", "--out", path(&refined)]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));

    let inst = io::load_instance(&scene).unwrap();
    let tol = inst.state.layout().tolerance();
    let before = io::read_json::<PlanDoc>(&plan).unwrap().to_plan(&inst).unwrap();
    let after = io::read_json::<PlanDoc>(&refined).unwrap().to_plan(&inst).unwrap();
    for p in [&before, &after] {
        let r = replay(&inst.state, p.kinds()).unwrap();
        assert!(is_goal(r.final_state(), &inst.goal, tol));
    }
    assert!(after.total_cost <= before.total_cost + 1e-9);
    assert!(std::fs::read_to_string(&svg).unwrap().starts_with("<svg"));
}

#[test]
fn gen_is_deterministic_and_seed_comes_from_env() {
    let a = dbrp(&["gen", "--n", "4", "--phi", "0.2", "--seed", "11"]);
    let b = Command::new(env!("CARGO_BIN_EXE_dbrp"))
        .args(["gen", "--n", "4", "--phi", "0.2"])
        .env("DBRP_SEED", "11")
        .output()
        .unwrap();
    assert!(a.status.success());
    assert_eq!(a.stdout, b.stdout);
    let c = dbrp(&["gen", "--n", "4", "--phi", "0.2", "--seed", "12"]);
    assert_ne!(a.stdout, c.stdout);
}

#[test]
fn solved_scene_gives_empty_plan() {
    let dir = tempfile::tempdir().unwrap();
    let scene = dir.path().join("scene.json");
    std::fs::write(
        &scene,
        r#"{"schema": 1, "table": {"w": 1, "h": 1}, "mode": "ee",
            "objects": [{"id": "cup", "category": "low_mass", "w": 0.1, "d": 0.1, "x": 0.4, "y": 0.4}],
            "goal": [{"id": "cup", "x": 0.4, "y": 0.4}]}"#,
    )
    .unwrap();
    let out = dbrp(&["plan", "--scene", path(&scene), "--time-limit", "1"]);
    assert!(out.status.success());
    let doc: PlanDoc = io::parse(std::str::from_utf8(&out.stdout).unwrap()).unwrap();
    assert!(doc.actions.is_empty());
    assert_eq!(doc.total_cost, Some(0.0));
}

#[test]
fn exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    let scene = dir.path().join("scene.json");

    // Usage and input errors.
    assert_eq!(dbrp(&["plan"]).status.code(), Some(2));
    assert_eq!(dbrp(&["plan", "--scene", "/nonexistent/scene.json"]).status.code(), Some(2));
    std::fs::write(&scene, "{\"schema\": 2}").unwrap();
    assert_eq!(dbrp(&["plan", "--scene", path(&scene)]).status.code(), Some(2));

    // Overlapping objects.
    std::fs::write(
        &scene,
        r#"{"schema": 1, "table": {"w": 0.3, "h": 0.3}, "mode": "ee",
            "objects": [
              {"id": "a", "category": "high_mass", "w": 0.25, "d": 0.25, "x": 0.15, "y": 0.15},
              {"id": "b", "category": "high_mass", "w": 0.25, "d": 0.25, "x": 0.15, "y": 0.15}
            ],
            "goal": [{"id": "a", "x": 0.15, "y": 0.15}, {"id": "b", "x": 0.15, "y": 0.15}]}"#,
    )
    .unwrap();
    assert_eq!(dbrp(&["plan", "--scene", path(&scene), "--time-limit", "1"]).status.code(), Some(2));

    // Two heavy objects swapping places in a strip with no room to pass.
    std::fs::write(
        &scene,
        r#"{"schema": 1, "table": {"w": 0.5, "h": 0.21}, "mode": "ee",
            "objects": [
              {"id": "a", "category": "high_mass", "w": 0.2, "d": 0.2, "x": 0.12, "y": 0.105},
              {"id": "b", "category": "high_mass", "w": 0.2, "d": 0.2, "x": 0.38, "y": 0.105}
            ],
            "goal": [{"id": "a", "x": 0.38, "y": 0.105}, {"id": "b", "x": 0.12, "y": 0.105}]}"#,
    )
    .unwrap();
    let out = dbrp(&["plan", "--scene", path(&scene), "--algo", "mcts-ns", "--time-limit", "0.5"]);
    assert_eq!(out.status.code(), Some(1), "{}", String::from_utf8_lossy(&out.stderr));
}

#[test]
fn render_is_deterministic() {
    let dir = tempfile::tempdir().unwrap();
    let scene = dir.path().join("scene.json");
    let (a, b) = (dir.path().join("a.svg"), dir.path().join("b.svg"));
    assert!(dbrp(&["gen", "--n", "6", "--phi", "0.4", "--seed", "2", "--out", path(&scene)]).status.success());
    for out in [&a, &b] {
        assert!(dbrp(&["render", "--scene", path(&scene), "--out", path(out)]).status.success());
    }
    assert_eq!(std::fs::read(&a).unwrap(), std::fs::read(&b).unwrap());
}

#[test]
fn match_detections() {
    let dir = tempfile::tempdir().unwrap();
    let det = dir.path().join("det.json");
    std::fs::write(
        &det,
        r#"{"schema": 1,
            "initial": [{"class": "cup", "cx": 0, "cy": 0, "w": 1, "h": 1}, {"class": "cup", "cx": 1, "cy": 0, "w": 1, "h": 1}],
            "target": [{"class": "cup", "cx": 0.9, "cy": 0, "w": 1, "h": 1}, {"class": "cup", "cx": 0.1, "cy": 0, "w": 1, "h": 1}]}"#,
    )
    .unwrap();
    let out = dbrp(&["match", "--detections", path(&det)]);
    assert!(out.status.success());
    let v: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(v["pairs"], serde_json::json!([[0, 1], [1, 0]]));

    std::fs::write(
        &det,
        r#"{"schema": 1, "initial": [{"class": "cup", "cx": 0, "cy": 0, "w": 1, "h": 1}], "target": []}"#,
    )
    .unwrap();
    assert_eq!(dbrp(&["match", "--detections", path(&det)]).status.code(), Some(2));
}

#[test]
fn config_file_is_applied_and_checked() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("cfg.json");
    std::fs::write(&cfg, r#"{"c_pp": 0.5}"#).unwrap();
    let out = dbrp(&["--config", path(&cfg), "gen", "--n", "3", "--phi", "0.2"]);
    assert!(out.status.success());
    let v: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(v["c_pp"], serde_json::json!(0.5));

    std::fs::write(&cfg, r#"{"budget": 3}"#).unwrap();
    assert_eq!(dbrp(&["--config", path(&cfg), "gen", "--n", "3", "--phi", "0.2"]).status.code(), Some(2));
}
