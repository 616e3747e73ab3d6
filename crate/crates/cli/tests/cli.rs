//! The binary as a black box: its output and its exit status.

use std::path::Path;
use std::process::{Command, Output};

use region_search::actions;
use region_search::config::Config;
use region_search::harness::{load_samples, SampleSchema};
use region_search::perceptor::{score_scene, HashingEmbedder, Instruction, PrefixTemplate, Scene, UiElement};
use region_search::planner::{run_search, SearchConfig, SearchTrace};
use serde_json::{json, Value};

fn bin() -> Command {
    let mut cmd = Command::new(env!("CARGO_BIN_EXE_region-search"));
    cmd.env_remove("EMBEDDER_URL").env_remove("GROUNDER_URL");
    cmd
}

fn run(args: &[&str]) -> Output {
    bin().args(args).output().unwrap()
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

fn element(id: usize, b: [f64; 4], description: &str, interactive: bool) -> Value {
    json!({"id": id, "box": b, "description": description, "interactive": interactive})
}

fn sample(instruction: &str, gt: [f64; 4], data_type: &str, elements: Vec<Value>) -> Value {
    json!({
        "image": "shot.png", "width": 1920, "height": 1080, "domain_tag": "desktop",
        "instruction": instruction, "gt_box": gt, "data_type": data_type, "group": "desktop",
        "elements": elements
    })
}

fn scene_fixture() -> Value {
    sample(
        "save file",
        [100., 100., 220., 140.],
        "text",
        vec![
            element(0, [100., 100., 220., 140.], "save file", true),
            element(1, [1500., 120., 1640., 160.], "print chart", true),
            element(2, [300., 800., 420., 840.], "zoom palette", false),
            element(3, [1200., 700., 1300., 740.], "sort table", true),
            element(4, [260., 110., 340., 140.], "export file", true),
        ],
    )
}

fn write_json(dir: &Path, name: &str, value: &Value) -> String {
    let path = dir.join(name);
    std::fs::write(&path, serde_json::to_string_pretty(value).unwrap()).unwrap();
    path.display().to_string()
}

fn library_result(config: &SearchConfig) -> region_search::SearchResult {
    let v = scene_fixture();
    let elements: Vec<UiElement> = serde_json::from_value(v["elements"].clone()).unwrap();
    let scene = Scene::new("shot.png", 1920, 1080, "desktop", elements).unwrap();
    let template = PrefixTemplate::default();
    let instr = Instruction::new("save file", "desktop", &template).unwrap();
    let scored = score_scene(&scene, &instr, &template, &HashingEmbedder::new(256)).unwrap();
    run_search(&scored, config).unwrap()
}

#[test]
fn search_prints_the_engine_result() {
    let dir = tempfile::tempdir().unwrap();
    let scene = write_json(dir.path(), "scene.json", &scene_fixture());
    let out = run(&["search", "--scene", &scene, "--json"]);
    assert!(out.status.success(), "{}", stderr(&out));
    let printed: Value = serde_json::from_str(&stdout(&out)).unwrap();
    let expected = library_result(&SearchConfig::default());
    assert_eq!(printed["best_region"], json!(expected.best_region));
    assert_eq!(printed["best_reward"]["total"], json!(expected.best_reward.total));
    assert_eq!(printed["node_count"], json!(expected.node_count));

    let text = stdout(&run(&["search", "--scene", &scene]));
    let b = expected.best_region.to_array();
    assert!(text.contains(&format!("best region: [{}, {}, {}, {}]", b[0], b[1], b[2], b[3])), "{text}");
}

#[test]
fn zero_budget_prints_root_focus() {
    let dir = tempfile::tempdir().unwrap();
    let scene = write_json(dir.path(), "scene.json", &scene_fixture());
    let out = run(&["search", "--scene", &scene, "--json", "--budget", "0"]);
    let printed: Value = serde_json::from_str(&stdout(&out)).unwrap();
    let root = library_result(&SearchConfig { rollout_budget: 0, ..SearchConfig::default() });
    assert_eq!(printed["node_count"], json!(1));
    assert_eq!(printed["best_region"], json!(root.trace.nodes[0].region));
    let v = scene_fixture();
    let elements: Vec<UiElement> = serde_json::from_value(v["elements"].clone()).unwrap();
    let scene = Scene::new("shot.png", 1920, 1080, "desktop", elements).unwrap();
    let template = PrefixTemplate::default();
    let instr = Instruction::new("save file", "desktop", &template).unwrap();
    let scored = score_scene(&scene, &instr, &template, &HashingEmbedder::new(256)).unwrap();
    let focus = actions::focus(&scored.bounds(), &scored, &Default::default()).region().unwrap();
    assert_eq!(printed["best_region"], json!(focus));
}

#[test]
fn trace_and_dot_exports() {
    let dir = tempfile::tempdir().unwrap();
    let scene = write_json(dir.path(), "scene.json", &scene_fixture());
    let trace = dir.path().join("t.json");
    let dot = dir.path().join("t.dot");
    let out = run(&["search", "--scene", &scene, "--trace", trace.to_str().unwrap(), "--dot", dot.to_str().unwrap()]);
    assert!(out.status.success(), "{}", stderr(&out));
    let parsed = SearchTrace::from_json(&std::fs::read_to_string(&trace).unwrap()).unwrap();
    assert_eq!(parsed, library_result(&SearchConfig::default()).trace);

    let exported = run(&["export-dot", "--trace", trace.to_str().unwrap()]);
    assert_eq!(stdout(&exported), std::fs::read_to_string(&dot).unwrap());
    assert!(stdout(&exported).starts_with("digraph search {"));
    for node in &parsed.nodes {
        assert!(stdout(&exported).contains(&format!("n{} [label=", node.id)));
    }
}

#[test]
fn exit_codes() {
    let missing = run(&["search", "--scene", "/definitely/missing.json", "--instruction", "x"]);
    assert_eq!(missing.status.code(), Some(1));
    assert!(stderr(&missing).contains("/definitely/missing.json"));

    let bad_weights = run(&["--print-config", "--alpha", "0.9"]);
    assert_eq!(bad_weights.status.code(), Some(2));
    assert!(stderr(&bad_weights).contains("search.reward_weights.alpha+beta+gamma"), "{}", stderr(&bad_weights));

    let dir = tempfile::tempdir().unwrap();
    let cfg = write_json(dir.path(), "c.json", &json!({"search": {"budget": 3}}));
    let unknown = run(&["--config", &cfg, "--print-config"]);
    assert_eq!(unknown.status.code(), Some(2));

    let empty = write_json(dir.path(), "empty.json", &json!([]));
    assert_eq!(run(&["bench", "--samples", &empty]).status.code(), Some(1));

    let dense = run(&["gen", "--out", dir.path().join("g").to_str().unwrap(), "--max-elements", "60"]);
    assert_eq!(dense.status.code(), Some(1));
    assert!(stderr(&dense).contains("60 elements"), "{}", stderr(&dense));

    let scene = write_json(dir.path(), "scene.json", &scene_fixture());
    let down = bin()
        .args(["search", "--scene", &scene, "--provider", "remote"])
        .env("EMBEDDER_URL", "http://127.0.0.1:9/")
        .output()
        .unwrap();
    assert_eq!(down.status.code(), Some(3), "{}", stderr(&down));
}

#[test]
fn printed_config_reproduces_the_run() {
    let dir = tempfile::tempdir().unwrap();
    let first = run(&["--print-config", "--budget", "5", "--no-con", "--actions", "focus,scatter", "--tau", "0.2"]);
    assert!(first.status.success(), "{}", stderr(&first));
    let dumped = Config::from_json(&stdout(&first)).unwrap();
    assert_eq!(dumped.search.rollout_budget, 5);
    assert!(!dumped.search.reward_terms.concentration);
    assert_eq!(dumped.search.actions.label(), "focus,scatter");
    assert_eq!(dumped.search.reward_weights.tau, 0.2);

    let path = dir.path().join("dump.json");
    std::fs::write(&path, stdout(&first)).unwrap();
    let second = run(&["--config", path.to_str().unwrap(), "--print-config"]);
    assert_eq!(stdout(&first), stdout(&second));
}

#[test]
fn endpoint_env_vars_and_flag_precedence() {
    let out = bin()
        .args(["--print-config"])
        .env("EMBEDDER_URL", "http://embed.local/")
        .env("GROUNDER_URL", "http://ground.local/")
        .output()
        .unwrap();
    let c = Config::from_json(&stdout(&out)).unwrap();
    assert_eq!(c.provider.endpoint.as_deref(), Some("http://embed.local/"));
    assert_eq!(c.grounder.endpoint.as_deref(), Some("http://ground.local/"));

    let flagged = bin()
        .args(["--print-config", "--embedder-url", "http://flag.local/"])
        .env("EMBEDDER_URL", "http://embed.local/")
        .output()
        .unwrap();
    let c = Config::from_json(&stdout(&flagged)).unwrap();
    assert_eq!(c.provider.endpoint.as_deref(), Some("http://flag.local/"));
}

#[test]
fn gen_is_idempotent_and_loadable() {
    let dir = tempfile::tempdir().unwrap();
    let a = dir.path().join("a");
    let b = dir.path().join("b");
    for out in [&a, &b] {
        let o = run(&["gen", "--out", out.to_str().unwrap(), "--scenes", "200", "--profile", "easy", "--seed", "9"]);
        assert!(o.status.success(), "{}", stderr(&o));
    }
    for name in ["samples.json", "embeddings.json"] {
        assert_eq!(std::fs::read(a.join(name)).unwrap(), std::fs::read(b.join(name)).unwrap());
    }
    let samples = load_samples(a.join("samples.json"), SampleSchema::Native).unwrap();
    assert_eq!(samples.len(), 200);
}

/// Four samples; the last one's instruction names a different element than
/// its ground truth, so the search crops it away.
fn bench_fixture() -> Value {
    let far = |i: usize| element(i, [1500., 900., 1620., 940.], "print chart", true);
    json!([
        sample(
            "save file",
            [100., 100., 220., 140.],
            "text",
            vec![element(0, [100., 100., 220., 140.], "save file", true), far(1)]
        ),
        sample(
            "open menu",
            [800., 500., 860., 540.],
            "icon",
            vec![element(0, [800., 500., 860., 540.], "open menu", true), far(1)]
        ),
        sample(
            "undo history",
            [40., 1000., 120., 1040.],
            "icon",
            vec![far(0), element(1, [40., 1000., 120., 1040.], "undo history", true)]
        ),
        sample(
            "save file",
            [1500., 900., 1620., 940.],
            "text",
            vec![element(0, [100., 100., 220., 140.], "save file", true), far(1)]
        ),
    ])
}

#[test]
fn bench_matches_hand_count() {
    let dir = tempfile::tempdir().unwrap();
    let samples = write_json(dir.path(), "s.json", &bench_fixture());
    let out_dir = dir.path().join("out");
    let perfect = ["--base-success", "1", "--clutter-penalty", "0", "--resolution-penalty", "0"];

    let mut args = vec!["bench", "--samples", &samples, "--out", out_dir.to_str().unwrap()];
    args.extend(perfect);
    let o = run(&args);
    assert!(o.status.success(), "{}", stderr(&o));
    let report: Value = serde_json::from_str(&std::fs::read_to_string(out_dir.join("report.json")).unwrap()).unwrap();
    assert_eq!(report["overall"]["avg"], json!({"correct": 3, "total": 4}));
    assert_eq!(report["overall"]["text"], json!({"correct": 1, "total": 2}));
    assert_eq!(report["overall"]["icon"], json!({"correct": 2, "total": 2}));
    assert!(std::fs::read_to_string(out_dir.join("report.txt")).unwrap().contains("0.750 (3/4)"));

    let mut args = vec!["bench", "--samples", &samples, "--baseline", "full"];
    args.extend(perfect);
    assert!(stdout(&run(&args)).contains("1.000 (4/4)"));
}

#[test]
fn ablation_flags_change_the_policy() {
    let dir = tempfile::tempdir().unwrap();
    let samples = write_json(dir.path(), "s.json", &bench_fixture());
    let focus_only = stdout(&run(&["bench", "--samples", &samples, "--actions", "focus"]));
    assert!(focus_only.contains("policy: search[focus|rel+cov+con]"), "{focus_only}");
    let all = stdout(&run(&["bench", "--samples", &samples]));
    assert!(all.contains("policy: search[focus,shift,scatter|rel+cov+con]"), "{all}");
    let no_con = stdout(&run(&["bench", "--samples", &samples, "--no-con"]));
    assert!(no_con.contains("|rel+cov]"), "{no_con}");
    let none = stdout(&run(&["bench", "--samples", &samples, "--actions", "none"]));
    assert!(none.contains("policy: full-screen"), "{none}");
}
