#![allow(dead_code)]

use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use serde_json::{json, Value};

pub const TWO_PI: f64 = std::f64::consts::TAU;

pub fn bin() -> Command {
    let mut cmd = Command::new(env!("CARGO_BIN_EXE_floquet-lie"));
    cmd.env_remove("FLOQUET_LIE_THREADS");
    cmd
}

/// Runs a config-driven verb with `config` written into `dir`.
pub fn run(verb: &str, dir: &Path, config: &Value, extra: &[&str]) -> Output {
    std::fs::create_dir_all(dir).unwrap();
    let path = dir.join(format!("{verb}.json"));
    std::fs::write(&path, serde_json::to_string_pretty(config).unwrap()).unwrap();
    bin()
        .arg(verb)
        .arg("--config")
        .arg(&path)
        .arg("--out")
        .arg(dir)
        .args(extra)
        .output()
        .expect("binary runs")
}

pub fn read_json(path: PathBuf) -> Value {
    serde_json::from_str(
        &std::fs::read_to_string(&path).unwrap_or_else(|e| panic!("{}: {e}", path.display())),
    )
    .unwrap()
}

/// `phi(t) = eps (cos t, sin t, 0) + (0, 0, c)` in algebra coordinates.
pub fn rotating_field(group: &str, eps: f64, c: f64, n_t: usize, n_s: usize) -> Value {
    json!({
        "schema_version": 1,
        "group": group,
        "curve": {"fourier": {
            "period": TWO_PI,
            "cos": [[0.0, eps], [0.0], [c]],
            "sin": [[0.0], [0.0, eps], [0.0]]
        }},
        "grid": {"n_t": n_t, "n_s": n_s}
    })
}

/// SL(2,R) system with monodromy `-diag(e^{pi b}, e^{-pi b})`: a half turn of
/// the compact generator followed by a hyperbolic boost.
pub fn not_in_image(b: f64) -> Value {
    json!({
        "schema_version": 1,
        "group": "SL2R",
        "curve": {"piecewise": {"period": TWO_PI, "segments": [
            {"t_start": 0.0, "t_end": std::f64::consts::PI, "value": [0.0, 0.0, 2.0]},
            {"t_start": std::f64::consts::PI, "t_end": TWO_PI, "value": [2.0 * b, 0.0, 0.0]}
        ]}},
        "grid": {"n_t": 64, "n_s": 16}
    })
}

pub fn rigid_body(inertia: [f64; 3], n_t: usize, n_s: usize) -> Value {
    json!({
        "schema_version": 1,
        "grid": {"n_t": n_t, "n_s": n_s},
        "rigid_body": {"inertia": inertia, "radius": 1.0, "theta_max": 0.5}
    })
}

pub fn vec3(v: &Value) -> [f64; 3] {
    let a = v.as_array().expect("array");
    [0, 1, 2].map(|i| a[i].as_f64().unwrap())
}

/// Parsed sweep CSV rows.
pub fn sweep_rows(path: &Path) -> Vec<Vec<f64>> {
    let mut r = csv::Reader::from_path(path).unwrap();
    r.records()
        .map(|rec| rec.unwrap().iter().map(|x| x.parse().unwrap()).collect())
        .collect()
}
