use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use serde_json::Value;

const SMALL: &str = r#"
name = "small"
output = "small"
stages = ["spectrum", "evolve", "expansion-check"]

[potential]
family = "bump"
v0 = 30.0
a = 4.0

[grid]
n = 1024
r_max = 40.0

[evolve]
t_end = 2.0
record_every = 32
"#;

fn critwave(args: &[&str], out_root: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_critwave"))
        .args(args)
        .env("CRITWAVE_OUT", out_root)
        .output()
        .expect("binary runs")
}

fn write_config(dir: &Path, text: &str) -> PathBuf {
    let path = dir.join("config.toml");
    fs::write(&path, text).unwrap();
    path
}

fn files_under(dir: &Path) -> BTreeMap<PathBuf, Vec<u8>> {
    let mut out = BTreeMap::new();
    let mut pending = vec![dir.to_path_buf()];
    while let Some(d) = pending.pop() {
        for entry in fs::read_dir(&d).unwrap() {
            let path = entry.unwrap().path();
            if path.is_dir() {
                pending.push(path);
            } else {
                out.insert(path.strip_prefix(dir).unwrap().to_path_buf(), fs::read(&path).unwrap());
            }
        }
    }
    out
}

fn manifest(dir: &Path) -> Value {
    serde_json::from_slice(&fs::read(dir.join("manifest.json")).unwrap()).unwrap()
}

#[test]
fn describe_lists_the_stage_graph() {
    let tmp = tempfile::tempdir().unwrap();
    let out = critwave(&["describe", "run"], tmp.path());
    assert!(out.status.success());
    let text = String::from_utf8(out.stdout).unwrap();
    for stage in ["steady-find", "spectrum", "manifold-shoot", "channel-scan", "onepass", "norms"] {
        assert!(text.contains(stage), "missing {stage}");
    }
}

#[test]
fn describe_suggests_near_misses() {
    let tmp = tempfile::tempdir().unwrap();
    let out = critwave(&["describe", "chanel-scan"], tmp.path());
    assert_eq!(out.status.code(), Some(1));
    let err = String::from_utf8(out.stderr).unwrap();
    assert!(err.contains("did you mean") && err.contains("channel-scan"), "{err}");
}

#[test]
fn invalid_config_reports_every_field() {
    let tmp = tempfile::tempdir().unwrap();
    let path = write_config(tmp.path(), "[grid]\nn = 2\n[evolve]\ncfl = 2.0\n[norms]\ndraws = 0\n");
    let out = critwave(&["run", path.to_str().unwrap()], tmp.path());
    assert_eq!(out.status.code(), Some(1));
    let err = String::from_utf8(out.stderr).unwrap();
    for field in ["grid.n", "evolve.cfl", "norms.draws"] {
        assert!(err.contains(field), "missing {field} in {err}");
    }
    assert!(!tmp.path().join("critwave-out").exists());
}

#[test]
fn unknown_field_is_rejected() {
    let tmp = tempfile::tempdir().unwrap();
    let path = write_config(tmp.path(), "[grid]\ncells = 10\n");
    let out = critwave(&["steady-find", path.to_str().unwrap()], tmp.path());
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8(out.stderr).unwrap().contains("cells"));
}

#[test]
fn free_potential_skips_unstable_stages() {
    let tmp = tempfile::tempdir().unwrap();
    let config = Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs/minimal.toml");
    let out = critwave(&["run", config.to_str().unwrap()], tmp.path());
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let m = manifest(&tmp.path().join("minimal"));
    assert_eq!(m["success"], Value::Bool(true));
    let stages = m["stages"].as_array().unwrap();
    let status = |name: &str| stages.iter().find(|s| s["name"] == name).unwrap()["status"].clone();
    assert_eq!(status("steady-find"), "completed");
    for skipped in ["manifold-shoot", "channel-scan"] {
        assert_eq!(status(skipped), "skipped", "{skipped}");
    }
}

#[test]
fn single_stage_pulls_in_prerequisites() {
    let tmp = tempfile::tempdir().unwrap();
    let path = write_config(tmp.path(), SMALL);
    let out = critwave(&["spectrum", path.to_str().unwrap()], tmp.path());
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let dir = tmp.path().join("small");
    assert!(dir.join("steady_states.json").exists() && dir.join("spectrum.json").exists());
    assert!(!dir.join("expansion.json").exists());
    let names: Vec<String> =
        manifest(&dir)["stages"].as_array().unwrap().iter().map(|s| s["name"].as_str().unwrap().to_string()).collect();
    assert_eq!(names, ["steady-find", "spectrum"]);
}

#[test]
fn runs_are_reproducible() {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    for root in [&a, &b] {
        let path = write_config(root.path(), SMALL);
        let out = critwave(&["run", path.to_str().unwrap()], root.path());
        assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    }
    let mut fa = files_under(&a.path().join("small"));
    let mut fb = files_under(&b.path().join("small"));
    let ma = fa.remove(Path::new("manifest.json")).unwrap();
    let mb = fb.remove(Path::new("manifest.json")).unwrap();
    assert!(fa.len() > 3);
    assert_eq!(fa.keys().collect::<Vec<_>>(), fb.keys().collect::<Vec<_>>());
    for (name, bytes) in &fa {
        assert!(bytes == &fb[name], "{} differs", name.display());
    }
    let strip = |bytes: &[u8]| {
        let mut v: Value = serde_json::from_slice(bytes).unwrap();
        v.as_object_mut().unwrap().remove("wall_clock_seconds");
        for s in v["stages"].as_array_mut().unwrap() {
            s.as_object_mut().unwrap().remove("seconds");
        }
        v
    };
    assert_eq!(strip(&ma), strip(&mb));
}

#[test]
fn stale_manifest_is_replaced() {
    let tmp = tempfile::tempdir().unwrap();
    let path = write_config(tmp.path(), SMALL);
    let dir = tmp.path().join("small");
    fs::create_dir_all(&dir).unwrap();
    fs::write(dir.join("manifest.json"), b"not json").unwrap();
    let out = critwave(&["steady-find", path.to_str().unwrap()], tmp.path());
    assert!(out.status.success());
    assert_eq!(manifest(&dir)["success"], Value::Bool(true));
    assert!(fs::read_dir(&dir).unwrap().all(|e| !e.unwrap().file_name().to_string_lossy().ends_with(".tmp")));
}

#[test]
fn readme_config_example_parses() {
    let readme = fs::read_to_string(Path::new(env!("CARGO_MANIFEST_DIR")).join("../../README.md")).unwrap();
    let start = readme.find("```toml\n").unwrap() + "```toml\n".len();
    let len = readme[start..].find("```").unwrap();
    let cfg = critwave::config::ExperimentConfig::from_toml(&readme[start..start + len]).unwrap();
    assert_eq!(cfg.steady.select_nodes, Some(1));
}
