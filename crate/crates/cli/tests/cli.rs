use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use serde_json::{json, Value};
use tempfile::TempDir;
use texsep_core::io::read_field;

fn texsep(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_texsep"))
        .args(args)
        .output()
        .expect("spawn texsep")
}

fn code(out: &Output) -> i32 {
    out.status.code().expect("exit code")
}

/// Small scene: one rectangle and one tone, optionally with noise.
fn small_scene(noise: bool) -> Value {
    let mut scene = json!({
        "size": 32,
        "cartoon": [{ "shape": { "kind": "rect", "x0": 1.0, "y0": 1.0, "x1": 3.0, "y1": 4.0 }, "level": 1.0 }],
        "textures": [{ "envelope": { "kind": "full" }, "amplitude": 0.2, "omega": 8.0 }],
    });
    if noise {
        scene["noise"] = json!({ "sigma": 0.1, "cutoff": 6, "seed": 0 });
    }
    scene
}

fn write_config(dir: &Path, settings: Value) -> String {
    let path = dir.join("config.json");
    fs::write(&path, serde_json::to_string(&settings).unwrap()).unwrap();
    path.to_str().unwrap().to_string()
}

fn bytes(dir: &Path, name: &str) -> Vec<u8> {
    fs::read(dir.join(name)).unwrap_or_else(|e| panic!("{name}: {e}"))
}

#[test]
fn synth_is_deterministic_and_seeded() {
    let tmp = TempDir::new().unwrap();
    let cfg = write_config(tmp.path(), json!({ "scene": small_scene(true) }));
    let run = |dir: &str, seed: &str| {
        let out_dir = tmp.path().join(dir);
        let out = texsep(&[
            "synth",
            "--config",
            &cfg,
            "--out-dir",
            out_dir.to_str().unwrap(),
            "--seed",
            seed,
        ]);
        assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
        bytes(&out_dir, "f.raw")
    };
    let a = run("a", "4");
    assert_eq!(a, run("b", "4"));
    assert_ne!(a, run("c", "5"));
}

#[test]
fn manifest_replays_byte_identical() {
    let tmp = TempDir::new().unwrap();
    let first = tmp.path().join("first");
    let cfg = write_config(
        tmp.path(),
        json!({ "scene": small_scene(false), "mu": 5.0, "outer_iterations": 30, "outer_tolerance": 1e-4 }),
    );
    let out = texsep(&[
        "decompose",
        "--config",
        &cfg,
        "--out-dir",
        first.to_str().unwrap(),
    ]);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));

    let second = tmp.path().join("second");
    let manifest = first.join("manifest.json");
    let out = texsep(&[
        "decompose",
        "--config",
        manifest.to_str().unwrap(),
        "--out-dir",
        second.to_str().unwrap(),
    ]);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    for name in ["u.raw", "v.raw", "w.raw", "u.png"] {
        assert_eq!(bytes(&first, name), bytes(&second, name), "{name}");
    }
    let m: Value = serde_json::from_slice(&bytes(&second, "manifest.json")).unwrap();
    assert_eq!(m["command"], "decompose");
    assert!(m["outputs"]
        .as_array()
        .unwrap()
        .iter()
        .any(|f| f == "w.raw"));
}

#[test]
fn constant_image_has_no_texture() {
    let tmp = TempDir::new().unwrap();
    let scene = json!({
        "size": 16,
        "cartoon": [{ "shape": { "kind": "full" }, "level": 3.0 }],
    });
    let cfg = write_config(tmp.path(), json!({ "scene": scene }));
    let dir = tmp.path().join("out");
    let out = texsep(&[
        "decompose",
        "--config",
        &cfg,
        "--out-dir",
        dir.to_str().unwrap(),
    ]);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    let u = read_field(&dir.join("u.raw")).unwrap();
    let w = read_field(&dir.join("w.raw")).unwrap();
    assert!(w.max_abs() <= 1e-12);
    assert!(u.as_slice().iter().all(|&x| (x - 3.0).abs() <= 1e-12));
}

#[test]
fn unconverged_run_exits_with_warning() {
    let tmp = TempDir::new().unwrap();
    let cfg = write_config(
        tmp.path(),
        json!({ "scene": small_scene(false), "mu": 5.0 }),
    );
    let dir = tmp.path().join("out");
    let out = texsep(&[
        "decompose",
        "--config",
        &cfg,
        "--out-dir",
        dir.to_str().unwrap(),
        "--outer-iterations",
        "1",
    ]);
    assert_eq!(code(&out), 3, "{}", String::from_utf8_lossy(&out.stderr));
    let m: Value = serde_json::from_slice(&bytes(&dir, "manifest.json")).unwrap();
    assert!(!m["warnings"].as_array().unwrap().is_empty());
}

#[test]
fn invalid_inputs_exit_2() {
    let tmp = TempDir::new().unwrap();
    let dir = tmp.path().join("out");
    let dir = dir.to_str().unwrap();

    let cfg = write_config(
        tmp.path(),
        json!({ "scene": small_scene(false), "sweep": [], "texture": 0 }),
    );
    assert_eq!(
        code(&texsep(&["curves", "--config", &cfg, "--out-dir", dir])),
        2
    );

    let mut scene = small_scene(false);
    scene["textures"][0]["omega"] = json!(40.0);
    let cfg = write_config(tmp.path(), json!({ "scene": scene }));
    assert_eq!(
        code(&texsep(&["synth", "--config", &cfg, "--out-dir", dir])),
        2
    );

    let cfg = write_config(
        tmp.path(),
        json!({ "scene": small_scene(false), "lambda": -1.0 }),
    );
    assert_eq!(
        code(&texsep(&["decompose", "--config", &cfg, "--out-dir", dir])),
        2
    );

    let cfg = write_config(tmp.path(), json!({ "no_such_setting": 1 }));
    assert_eq!(
        code(&texsep(&["synth", "--config", &cfg, "--out-dir", dir])),
        2
    );

    let missing = tmp.path().join("missing.pgm");
    assert_eq!(
        code(&texsep(&[
            "decompose",
            "--input",
            missing.to_str().unwrap(),
            "--out-dir",
            dir
        ])),
        2
    );
}

#[test]
fn pipelines_and_experiments_run_on_a_small_grid() {
    let tmp = TempDir::new().unwrap();
    let cfg = write_config(
        tmp.path(),
        json!({ "scene": small_scene(false), "scales": 2, "texture": 0, "outer_iterations": 30 }),
    );
    let run = |cmd: &str, extra: &[&str]| {
        let dir = tmp.path().join(cmd);
        let mut args = vec![cmd, "--config", &cfg, "--out-dir", dir.to_str().unwrap()];
        args.extend_from_slice(extra);
        let out = texsep(&args);
        assert!(
            matches!(code(&out), 0 | 3),
            "{cmd}: {}",
            String::from_utf8_lossy(&out.stderr)
        );
        let m: Value = serde_json::from_slice(&bytes(&dir, "manifest.json")).unwrap();
        for f in m["outputs"].as_array().unwrap() {
            assert!(dir.join(f.as_str().unwrap()).exists(), "{cmd}: {f}");
        }
        m["results"].clone()
    };
    let mts = run("mts", &[]);
    assert!(
        mts["reconstruction_error"].as_f64().unwrap() <= 1e-10 * mts["range"].as_f64().unwrap()
    );
    let dmts = run("dmts", &["--directions", "4,2"]);
    assert!(dmts["directional_sum_error"].as_f64().unwrap() <= 1e-10);
    assert_eq!(dmts["channel_energy"][0].as_array().unwrap().len(), 4);
    let curves = run("curves", &["--sweep", "6,7,8"]);
    assert!(curves["slope"].as_f64().unwrap().is_finite());
    assert_eq!(
        fs::read_to_string(tmp.path().join("curves/curves.csv"))
            .unwrap()
            .lines()
            .filter(|l| !l.starts_with('#'))
            .count(),
        4
    );
    let spectrum = run("spectrum", &[]);
    assert!(spectrum["axis_leakage_ratio"].as_f64().unwrap().is_finite());
}
