use std::path::Path;
use std::process::{Command, Output};

const SMALL: &str = "\
terrain_width_px = 1536
terrain_height_px = 1536
h_max = 400
count = 3
view_w = 256
view_h = 192
rae_input_w = 128
rae_input_h = 96
max_epochs = 3
rotations = 0
";

fn altiloc(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_altiloc"))
        .current_dir(dir)
        .env_remove("ALTILOC_SEED")
        .args(args)
        .output()
        .expect("spawn altiloc")
}

fn code(out: &Output) -> i32 {
    out.status.code().expect("exit code")
}

#[test]
fn unknown_config_key_is_a_config_error() {
    let dir = tempfile::tempdir().unwrap();
    std::fs::write(dir.path().join("bad.cfg"), "not_a_key = 1\n").unwrap();
    let out = altiloc(dir.path(), &["--config", "bad.cfg", "generate"]);
    assert_eq!(code(&out), 2, "{}", String::from_utf8_lossy(&out.stderr));
}

#[test]
fn invalid_flag_value_is_a_config_error() {
    let dir = tempfile::tempdir().unwrap();
    let out = altiloc(dir.path(), &["generate", "--success_radius_m", "-5"]);
    assert_eq!(code(&out), 2);
    let out = altiloc(dir.path(), &["generate", "--seed", "abc"]);
    assert_eq!(code(&out), 2);
}

#[test]
fn missing_raster_is_a_data_error() {
    let dir = tempfile::tempdir().unwrap();
    let out = altiloc(dir.path(), &["build-index"]);
    assert_eq!(code(&out), 3, "{}", String::from_utf8_lossy(&out.stderr));
}

#[test]
fn seed_layers_resolve_in_order() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    std::fs::write(d.join("run.cfg"), format!("{SMALL}seed = 1\n")).unwrap();
    let run = |seed_env: Option<&str>, extra: &[&str], manifest: &str| {
        let mut cmd = Command::new(env!("CARGO_BIN_EXE_altiloc"));
        cmd.current_dir(d).env_remove("ALTILOC_SEED");
        if let Some(s) = seed_env {
            cmd.env("ALTILOC_SEED", s);
        }
        let out = cmd
            .args(["--config", "run.cfg", "generate", "--no-images", "--manifest", manifest])
            .args(extra)
            .output()
            .unwrap();
        assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
        std::fs::read_to_string(d.join(manifest)).unwrap()
    };
    let file = run(None, &[], "a.csv");
    let env = run(Some("2"), &[], "b.csv");
    let flag = run(Some("2"), &["--seed", "1"], "c.csv");
    assert_ne!(file, env);
    assert_eq!(file, flag);
}

#[test]
fn pipeline_runs_and_rejects_a_mismatched_index() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    std::fs::write(d.join("run.cfg"), SMALL).unwrap();
    for args in [&["generate"][..], &["train-rae", "--views", "30"], &["build-index"], &["train-vpr"]] {
        let mut full = vec!["--config", "run.cfg"];
        full.extend_from_slice(args);
        let out = altiloc(d, &full);
        assert!(out.status.success(), "{args:?}: {}", String::from_utf8_lossy(&out.stderr));
    }

    let out = altiloc(d, &["--config", "run.cfg", "query", "images/00000.ppm", "images/00001.ppm"]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let stdout = String::from_utf8(out.stdout).unwrap();
    let lines: Vec<serde_json::Value> = stdout.lines().map(|l| serde_json::from_str(l).unwrap()).collect();
    assert_eq!(lines.len(), 2);
    assert_eq!(lines[0]["id"], "00000");
    assert_eq!(lines[0]["cells"].as_array().unwrap().len(), 3);

    let out = altiloc(d, &["--config", "run.cfg", "eval"]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let report: serde_json::Value = serde_json::from_slice(&std::fs::read(d.join("out/report.json")).unwrap()).unwrap();
    assert_eq!(report["n_total"], 3);
    assert!(d.join("out/queries.csv").exists());

    let out = altiloc(d, &["--config", "run.cfg", "build-index", "--vpr_input", "128", "--index", "other.algx"]);
    assert!(out.status.success());
    let out = altiloc(d, &["--config", "run.cfg", "query", "--index", "other.algx", "images/00000.ppm"]);
    assert_eq!(code(&out), 4, "{}", String::from_utf8_lossy(&out.stderr));
}
