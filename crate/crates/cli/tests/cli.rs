use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn fixture(rel: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR"))
        .join("tests/fixtures")
        .join(rel)
}

fn amcg(args: &[&str], out: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_amcg"))
        .args(["--quiet", "--out"])
        .arg(out)
        .args(args)
        .output()
        .expect("binary runs")
}

fn lines(path: &Path) -> Vec<String> {
    std::fs::read_to_string(path)
        .unwrap()
        .lines()
        .map(str::to_string)
        .collect()
}

fn write(dir: &Path, name: &str, text: &str) -> String {
    let p = dir.join(name);
    std::fs::write(&p, text).unwrap();
    p.display().to_string()
}

const SMALL: &str = r#"{
  "language": "en",
  "capabilities": [
    {"name": "cities", "templates": ["{CITY} is {ADJ}."],
     "lexicon": {"CITY": ["Delhi", "Paris", "New York"], "ADJ": ["wonderful", "beautiful", "nice", "famous"]}},
    {"name": "empty", "templates": [], "lexicon": {}}
  ]
}"#;

#[test]
fn expand_writes_every_sentence() {
    let dir = tempfile::tempdir().unwrap();
    let cl = write(dir.path(), "cl.json", SMALL);
    let o = amcg(&["expand", &cl], dir.path());
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let got = lines(&dir.path().join("cities.txt"));
    assert_eq!(got.len(), 12);
    assert!(got.contains(&"New York is famous.".to_string()));
    assert!(lines(&dir.path().join("empty.txt")).is_empty());
}

#[test]
fn expand_limit_is_seeded() {
    let dir = tempfile::tempdir().unwrap();
    let cl = write(dir.path(), "cl.json", SMALL);
    let a = dir.path().join("a");
    let b = dir.path().join("b");
    for out in [&a, &b] {
        let o = amcg(
            &[
                "expand",
                &cl,
                "--capability",
                "cities",
                "--limit",
                "5",
                "--seed",
                "9",
            ],
            out,
        );
        assert!(o.status.success());
    }
    let got = lines(&a.join("cities.txt"));
    assert_eq!(got.len(), 5);
    assert_eq!(got, lines(&b.join("cities.txt")));
}

#[test]
fn malformed_template_is_input_error() {
    let dir = tempfile::tempdir().unwrap();
    let bad = SMALL.replace("{CITY} is {ADJ}.", "{CITY is {ADJ}.");
    let cl = write(dir.path(), "cl.json", &bad);
    let o = amcg(&["expand", &cl], dir.path());
    assert_eq!(o.status.code(), Some(2));
    assert!(!dir.path().join("cities.txt").exists());
}

#[test]
fn cold_cache_fails_without_writing() {
    let dir = tempfile::tempdir().unwrap();
    let src = write(dir.path(), "s.txt", "This is good.\n");
    let out = dir.path().join("out");
    let o = amcg(
        &["translate", &src, "--to", "hi", "--provider", "cache-only"],
        &out,
    );
    assert_eq!(o.status.code(), Some(4));
    assert!(!out.exists());
}

#[test]
fn translate_with_mock_rules() {
    let dir = tempfile::tempdir().unwrap();
    let src = write(
        dir.path(),
        "s.txt",
        "This is a good aircraft.\nThis is a good service.\n",
    );
    let rules = fixture("agreement/hi_rules.json");
    let o = amcg(
        &[
            "translate",
            &src,
            "--to",
            "hi",
            "--provider",
            "mock",
            "--rules",
            rules.to_str().unwrap(),
        ],
        dir.path(),
    );
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    assert_eq!(
        lines(&dir.path().join("s.hi.txt")),
        ["yah acha viman hai.", "yah achi seva hai."]
    );
}

#[test]
fn induce_single_sentence() {
    let dir = tempfile::tempdir().unwrap();
    let src = write(dir.path(), "one.txt", "yah acha hai\n");
    let o = amcg(&["induce", &src, "--language", "hi"], dir.path());
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let cl: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(dir.path().join("checklist.json")).unwrap())
            .unwrap();
    assert_eq!(cl["capabilities"][0]["name"], "one");
    assert_eq!(cl["capabilities"][0]["templates"][0], "yah acha hai");
    assert!(dir.path().join("report.json").exists());
}

#[test]
fn diff_against_itself_is_perfect() {
    let dir = tempfile::tempdir().unwrap();
    let cl = fixture("sa/checklist.json");
    let cl = cl.to_str().unwrap();
    let o = amcg(&["diff", cl, cl, "--json"], dir.path());
    assert!(o.status.success());
    let r: serde_json::Value = serde_json::from_slice(&o.stdout).unwrap();
    assert_eq!(r["precision"], 1.0);
    assert_eq!(r["recall"], 1.0);
    assert_eq!(r["matched"], 32);
}

#[test]
fn lint_flags_problems() {
    let dir = tempfile::tempdir().unwrap();
    let cl = write(
        dir.path(),
        "cl.json",
        r#"{"language": "en", "capabilities": [
            {"name": "c", "templates": ["{A-0} and {A-1}", "{A} or {A}", "plain"], "lexicon": {"A": ["x"], "B": ["x"]}}
        ]}"#,
    );
    let o = amcg(&["lint", &cl], dir.path());
    assert!(o.status.success());
    let text = String::from_utf8(o.stdout).unwrap();
    assert!(text.contains("needs 2 distinct A terminals"), "{text}");
    assert!(text.contains("no placeholders"), "{text}");
    assert!(text.contains("repeats {A-0}"), "{text}");
    assert!(text.contains("B is unused"), "{text}");
    assert!(text.ends_with("5 warning(s)\n"), "{text}");
}

#[test]
fn pipeline_writes_outputs_and_manifest() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = fixture("agreement/amcg.toml");
    let o = amcg(&["--config", cfg.to_str().unwrap(), "pipeline"], dir.path());
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let manifest: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(dir.path().join("manifest.json")).unwrap())
            .unwrap();
    for name in ["checklist.json", "report.json", "metrics.json"] {
        assert!(dir.path().join(name).exists());
        assert_eq!(manifest["outputs"][name].as_str().unwrap().len(), 64);
    }
    assert_eq!(manifest["config_sha256"].as_str().unwrap().len(), 64);
}

#[test]
fn pipeline_requires_config() {
    let dir = tempfile::tempdir().unwrap();
    assert_eq!(amcg(&["pipeline"], dir.path()).status.code(), Some(2));
}
