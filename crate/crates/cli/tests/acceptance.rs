//! End-to-end acceptance table: one PASS/FAIL line per criterion at pinned
//! tolerances. Runs without the libtest harness, so the table is always
//! printed; the process exits non-zero if any line fails.

mod common;

use common::*;
use floquet_lie::euler::rotating_field_curve;
use floquet_lie::integrator::solve_fundamental;
use floquet_lie::phases::{split_phases, HomotopyKind, PhaseConfig, PhaseReport};
use floquet_lie::selftest::{
    adjoint_derivative_residual, exp_derivative_residual, inverse_rule_residual,
    product_rule_residual,
};
use floquet_lie::GroupId;
use nalgebra::{Matrix3, Rotation3, Vector3};

struct Table {
    results: Vec<bool>,
}

impl Table {
    fn record(&mut self, id: usize, name: &str, passed: bool, detail: String) {
        let tag = if passed { "PASS" } else { "FAIL" };
        println!("{tag} [{id}] {name}: {detail}");
        self.results.push(passed);
    }
}

fn phases(
    curve: &floquet_lie::integrator::PeriodicCurve,
    n: usize,
    homotopy: HomotopyKind,
) -> PhaseReport {
    let cfg = PhaseConfig {
        n_t: n,
        n_s: n,
        homotopy,
        ..PhaseConfig::default()
    };
    split_phases(curve, &cfg).expect("pipeline succeeds").report
}

/// Rotating-field closed form `exp(t e3) exp(t (eps e1 + (c - 1) e3))`,
/// built from nalgebra's rotation exponential.
fn so3_closed_form(eps: f64, c: f64, t: f64) -> Matrix3<f64> {
    let turn = Rotation3::from_scaled_axis(Vector3::new(0.0, 0.0, t));
    let frame = Rotation3::from_scaled_axis(Vector3::new(eps, 0.0, c - 1.0) * t);
    (turn * frame).into_inner()
}

fn splitting(t: &mut Table) {
    let mut ok = true;
    let mut detail = Vec::new();
    for (label, curve) in [
        ("SO3", rotating_field_curve(GroupId::So3, 0.3, 0.4)),
        ("SL2R", rotating_field_curve(GroupId::Sl2r, 0.2, 0.6)),
    ] {
        let r256 = phases(&curve, 256, HomotopyKind::LinearScale).splitting_residual;
        let r512 = phases(&curve, 512, HomotopyKind::LinearScale).splitting_residual;
        let ratio = r256 / r512;
        ok &= r256 <= 1e-6 && ratio >= 4.0;
        detail.push(format!(
            "{label} {r256:.2e} at 256, ratio {ratio:.1} to 512"
        ));
    }
    t.record(
        1,
        "k = k_dyn + k_geom (tol 1e-6, ratio >= 4)",
        ok,
        detail.join("; "),
    );
}

fn closed_form_monodromy(t: &mut Table) {
    let (eps, c) = (0.3, 0.4);
    let sol = solve_fundamental(&rotating_field_curve(GroupId::So3, eps, c), 256).unwrap();
    let m = sol.monodromy();
    let expected =
        Rotation3::from_scaled_axis(Vector3::new(eps, 0.0, c - 1.0) * TWO_PI).into_inner();
    let err = (m.matrix() - expected).amax();
    // The closed form solves f' = hat(w) f, checked by centered differences.
    let mut sub: f64 = 0.0;
    for &tt in &[0.3, 1.7, 4.4] {
        let h = 1e-5;
        let deriv = (so3_closed_form(eps, c, tt + h) - so3_closed_form(eps, c, tt - h)) / (2.0 * h);
        let w = Vector3::new(eps * tt.cos(), eps * tt.sin(), c);
        sub = sub.max((deriv - w.cross_matrix() * so3_closed_form(eps, c, tt)).amax());
    }
    t.record(
        2,
        "SO3 monodromy = exp(2 pi (eps, 0, c - 1)) (tol 1e-8)",
        err <= 1e-8 && sub <= 1e-8,
        format!("{err:.2e}; closed form substituted {sub:.1e}"),
    );
}

fn reducibility(t: &mut Table, dir: &std::path::Path) {
    let b = 0.3;
    let out = run("analyze", dir, &not_in_image(b), &[]);
    let err = read_json(dir.join("error.json"));
    let mono = &err["monodromy"];
    let m: Vec<f64> = mono["m"]
        .as_array()
        .unwrap()
        .iter()
        .map(|x| x.as_f64().unwrap())
        .collect();
    let want = [
        -(std::f64::consts::PI * b).exp(),
        0.0,
        0.0,
        -(-std::f64::consts::PI * b).exp(),
    ];
    let m_err = m
        .iter()
        .zip(want)
        .map(|(a, w)| (a - w).abs())
        .fold(0.0, f64::max);
    let v = vec3(&mono["adjoint_log"]);
    let v_err = (v[0] - TWO_PI * b).abs().max(v[1].abs()).max(v[2].abs());
    let ok = out.status.code() == Some(1)
        && err["error"]["kind"] == "UniformReducibilityViolated"
        && mono["log_status"] == "NotInImage"
        && mono["adjoint_reducible"] == true
        && mono["trace"].as_f64().unwrap() < -2.0
        && m_err <= 1e-10
        && v_err <= 1e-10;
    t.record(
        3,
        "SL2 -diag(e^{pi b}, e^{-pi b}) not in image; Euler system reducible",
        ok,
        format!(
            "status {}, tr {:.4}, |m - m_exact| {m_err:.1e}, |v - (2 pi b, 0, 0)| {v_err:.1e}",
            mono["log_status"],
            mono["trace"].as_f64().unwrap()
        ),
    );
}

fn d_identities(t: &mut Table) {
    let h = TWO_PI / 1024.0;
    let coarse = TWO_PI / 16.0;
    let mut ok = true;
    let mut detail = Vec::new();
    let fs: [(&str, fn(f64) -> floquet_lie::Result<f64>); 4] = [
        ("D exp", exp_derivative_residual),
        ("D inverse", inverse_rule_residual),
        ("D product", product_rule_residual),
        ("d Ad", adjoint_derivative_residual),
    ];
    for (name, f) in fs {
        let r = f(h).unwrap();
        let order = (f(coarse).unwrap() / f(0.5 * coarse).unwrap()).log2();
        ok &= r <= 1e-8 && (3.5..=4.5).contains(&order);
        detail.push(format!("{name} {r:.1e} (order {order:.2})"));
    }
    let mut ratios = Vec::new();
    for curve in [
        rotating_field_curve(GroupId::So3, 0.3, 0.4),
        rotating_field_curve(GroupId::Sl2r, 0.2, 0.6),
    ] {
        let a = phases(&curve, 128, HomotopyKind::LinearScale).curvature_residual;
        let b = phases(&curve, 256, HomotopyKind::LinearScale).curvature_residual;
        ratios.push(a / b);
    }
    ok &= ratios.iter().all(|r| (12.0..=20.0).contains(r));
    detail.push(format!(
        "curvature ratio SO3 {:.1}, SL2R {:.1}",
        ratios[0], ratios[1]
    ));
    t.record(
        4,
        "D-identities (tol 1e-8, O(h^4)); curvature ratio in [12, 20]",
        ok,
        detail.join("; "),
    );
}

fn homotopy_independence(t: &mut Table) {
    let curve = rotating_field_curve(GroupId::So3, 0.3, 0.4);
    let lin = phases(&curve, 256, HomotopyKind::LinearScale);
    let geo = phases(&curve, 256, HomotopyKind::Geodesic);
    let gap = lin
        .k_geom
        .distance(&geo.k_geom)
        .max(lin.k_dyn.distance(&geo.k_dyn));
    t.record(
        5,
        "linear vs geodesic homotopy at s = 1 (tol 1e-6)",
        gap <= 1e-6,
        format!("{gap:.2e}"),
    );
}

fn surface_pairing(t: &mut Table) {
    let mut worst: f64 = 0.0;
    for curve in [
        rotating_field_curve(GroupId::So3, 0.3, 0.4),
        rotating_field_curve(GroupId::Sl2r, 0.2, 0.6),
    ] {
        let r = phases(&curve, 128, HomotopyKind::LinearScale);
        worst = r.surface_check.iter().fold(worst, |a, b| a.max(*b));
    }
    t.record(
        6,
        "<e_i*, k_geom> = Kirillov surface integral (tol 1e-10)",
        worst <= 1e-10,
        format!("{worst:.2e}"),
    );
}

fn rigid_body(t: &mut Table, dir: &std::path::Path) {
    let out = run("rigidbody", dir, &rigid_body_config(), &[]);
    let report = read_json(dir.join("report.json"));
    let s = &report["summary"];
    let get = |k: &str| s[k].as_f64().unwrap_or(f64::INFINITY);
    let (rec3, oracle, iso) = (
        get("max_dyn_rec3_gap"),
        get("max_geom_oracle_gap"),
        get("max_isotropy"),
    );
    let drift = get("casimir_drift").max(get("energy_drift"));
    let ok = out.status.success()
        && s["rec1_rec3_agree"] == true
        && rec3 <= 1e-8
        && oracle <= 1e-6
        && iso <= 1e-8
        && drift <= 1e-9;
    t.record(
        7,
        "rigid body I = (1, 2, 3), r = 1, theta_max = 0.5",
        ok,
        format!(
            "dyn pairing vs 2Th {rec3:.1e}, geom pairing vs area oracle {oracle:.1e}, isotropy {iso:.1e}, drift {drift:.1e}"
        ),
    );
}

fn rigid_body_config() -> serde_json::Value {
    common::rigid_body([1.0, 2.0, 3.0], 1024, 256)
}

fn integrator(t: &mut Table) {
    let (eps, c) = (0.3, 0.4);
    let curve = rotating_field_curve(GroupId::So3, eps, c);
    let err = |n: usize| {
        let sol = solve_fundamental(&curve, n).unwrap();
        (0..=n)
            .map(|j| (sol.values[j].matrix() - so3_closed_form(eps, c, sol.t(j))).amax())
            .fold(0.0, f64::max)
    };
    let errs: Vec<f64> = [16, 32, 64, 128].into_iter().map(err).collect();
    let orders: Vec<f64> = errs.windows(2).map(|w| (w[0] / w[1]).log2()).collect();
    let mut drift: f64 = 0.0;
    for group in [GroupId::So3, GroupId::Sl2r] {
        drift = drift.max(
            solve_fundamental(&rotating_field_curve(group, 0.3, 0.4), 1024)
                .unwrap()
                .stats
                .max_drift,
        );
    }
    let ok = orders.iter().all(|o| (3.8..=4.2).contains(o)) && drift <= 1e-9;
    t.record(
        8,
        "RKMK4 order in [3.8, 4.2]; drift at h = 2 pi/1024 (tol 1e-9)",
        ok,
        format!("orders {orders:.3?}, drift {drift:.1e}"),
    );
}

fn determinism(t: &mut Table) {
    let selftest = |threads: &str| {
        bin()
            .args(["--threads", threads, "selftest"])
            .output()
            .unwrap()
            .stdout
    };
    let tables = [selftest("1"), selftest("4"), selftest("4")];
    let cfg = rotating_field("SL2R", 0.2, 0.6, 64, 64);
    let sweep = |threads: &str| {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("c.json");
        std::fs::write(&path, cfg.to_string()).unwrap();
        bin()
            .args([
                "--threads",
                threads,
                "sweep",
                "--tolerance-override",
                "splitting=1e-3",
                "--config",
            ])
            .arg(&path)
            .arg("--out")
            .arg(dir.path())
            .status()
            .unwrap();
        std::fs::read(dir.path().join("sweep.csv")).unwrap_or_default()
    };
    let csvs = [sweep("1"), sweep("4"), sweep("4")];
    let ok = !tables[0].is_empty()
        && tables.iter().all(|x| *x == tables[0])
        && !csvs[0].is_empty()
        && csvs.iter().all(|x| *x == csvs[0]);
    t.record(
        9,
        "selftest and sweep byte-identical across reruns and threads",
        ok,
        format!("{} + {} bytes", tables[0].len(), csvs[0].len()),
    );
}

fn main() {
    let dir = tempfile::tempdir().unwrap();
    let mut t = Table {
        results: Vec::new(),
    };
    splitting(&mut t);
    closed_form_monodromy(&mut t);
    reducibility(&mut t, &dir.path().join("reducibility"));
    d_identities(&mut t);
    homotopy_independence(&mut t);
    surface_pairing(&mut t);
    rigid_body(&mut t, &dir.path().join("rigidbody"));
    integrator(&mut t);
    determinism(&mut t);
    let failed = t.results.iter().filter(|p| !**p).count();
    println!(
        "acceptance: {} of {} criteria passed",
        t.results.len() - failed,
        t.results.len()
    );
    if failed > 0 {
        std::process::exit(1);
    }
}
