use std::f64::consts::PI;

use floquet_lie::euler::rotating_field_curve;
use floquet_lie::floquet::{
    analytic_dt_p, continue_log_branch, floquet_factor, monodromy, DEFAULT_PERIODICITY_TOLERANCE,
};
use floquet_lie::integrator::{
    d_operator, solve_family_with, solve_fundamental, PeriodicCurve, DEFAULT_DRIFT_TOLERANCE,
};
use floquet_lie::parallel::Execution;
use floquet_lie::phases::build_linear_homotopy;
use floquet_lie::selftest::sl2_not_in_image_curve;
use floquet_lie::{AlgebraElement, FloquetError, GroupElement, GroupId};
use nalgebra::{Matrix2, Vector3};

/// Exponential of an sl(2,R) element computed on the 2x2 matrix by
/// nalgebra, independently of the library's closed-form exponential.
fn sl2_exp(w: Vector3<f64>) -> Matrix2<f64> {
    let a1 = 0.5 * w[0];
    let a2 = 0.5 * (w[2] - w[1]);
    let a3 = -0.5 * (w[1] + w[2]);
    Matrix2::new(a1, a2, a3, -a1).exp()
}

/// `B(s)` of the rotating-field family scaled by `s`: in the co-rotating
/// frame the monodromy is `exp(2 pi e3) exp(2 pi B(s))`.
fn frame_generator(eps: f64, c: f64, s: f64) -> Vector3<f64> {
    Vector3::new(s * eps, 0.0, s * c - 1.0)
}

/// Continuous logarithm of the scaled rotating-field monodromy with
/// `k(0) = 0`, written in terms of the rotation rate `nu` of `B`
/// (`|B|` on so(3), `2 sqrt(-det)` on sl(2,R)): `k = 2 pi B (1 - 1/nu)`.
fn k_oracle(group: GroupId, eps: f64, c: f64, s: f64) -> Vector3<f64> {
    let b = frame_generator(eps, c, s);
    let nu = match group {
        GroupId::So3 => b.norm(),
        GroupId::Sl2r => (b[2] * b[2] - b[0] * b[0] - b[1] * b[1]).sqrt(),
    };
    b * (2.0 * PI * (1.0 - 1.0 / nu))
}

#[test]
fn so3_monodromy_has_closed_form() {
    let curve = rotating_field_curve(GroupId::So3, 0.3, 0.4);
    let m = solve_fundamental(&curve, 256).unwrap().monodromy();
    let expected =
        AlgebraElement::from_coords(GroupId::So3, frame_generator(0.3, 0.4, 1.0) * (2.0 * PI))
            .exp();
    assert!(m.distance(&expected) < 1e-8);
}

#[test]
fn sl2_monodromy_matches_2x2_oracle() {
    let curve = rotating_field_curve(GroupId::Sl2r, 0.2, 0.6);
    let m = solve_fundamental(&curve, 256).unwrap().monodromy();
    let expected = -sl2_exp(frame_generator(0.2, 0.6, 1.0) * (2.0 * PI));
    let got = m.matrix().fixed_view::<2, 2>(0, 0).into_owned();
    assert!(
        (got - expected).norm() < 1e-8,
        "{}",
        (got - expected).norm()
    );
    let report = monodromy(&solve_fundamental(&curve, 256).unwrap()).unwrap();
    assert!(report.reducible);
    assert!(report.log.reconstruct().distance(&m) < 1e-10);
}

#[test]
fn continued_logarithm_matches_oracle_along_the_family() {
    for (group, eps, c) in [(GroupId::So3, 0.3, 0.4), (GroupId::Sl2r, 0.2, 0.6)] {
        let curve = rotating_field_curve(group, eps, c);
        let fam = solve_family_with(
            &build_linear_homotopy(&curve),
            32,
            256,
            DEFAULT_DRIFT_TOLERANCE,
            Execution::Parallel,
        )
        .unwrap();
        let ks = continue_log_branch(&fam.monodromies(), &fam.s_grid).unwrap();
        for (k, &s) in ks.iter().zip(&fam.s_grid) {
            let err = (k.coords() - k_oracle(group, eps, c, s)).norm();
            assert!(err < 1e-7, "{group:?} s={s}: {err:e}");
        }
    }
}

#[test]
fn final_phase_is_stable_under_refinement() {
    let curve = rotating_field_curve(GroupId::Sl2r, 0.2, 0.6);
    let family = build_linear_homotopy(&curve);
    let k_end = |n_s, n_t| {
        let fam = solve_family_with(
            &family,
            n_s,
            n_t,
            DEFAULT_DRIFT_TOLERANCE,
            Execution::Parallel,
        )
        .unwrap();
        *continue_log_branch(&fam.monodromies(), &fam.s_grid)
            .unwrap()
            .last()
            .unwrap()
    };
    let coarse = k_end(16, 256);
    let fine = k_end(64, 512);
    assert!(coarse.distance(&fine) < 1e-7);
}

#[test]
fn constant_family_has_trivial_factor() {
    let a = AlgebraElement::new(GroupId::So3, [0.1, 0.2, -0.15]);
    let curve = PeriodicCurve::constant(a, 2.0 * PI);
    let fam = solve_family_with(
        &build_linear_homotopy(&curve),
        8,
        64,
        DEFAULT_DRIFT_TOLERANCE,
        Execution::Parallel,
    )
    .unwrap();
    let ks = continue_log_branch(&fam.monodromies(), &fam.s_grid).unwrap();
    for (k, &s) in ks.iter().zip(&fam.s_grid) {
        assert!(k.distance(&a.scale(2.0 * PI * s)) < 1e-12);
    }
    let grid = floquet_factor(
        &fam,
        &ks,
        DEFAULT_PERIODICITY_TOLERANCE,
        Execution::Sequential,
    )
    .unwrap();
    let id = GroupElement::identity(GroupId::So3);
    assert!(grid.p.iter().flatten().all(|p| p.distance(&id) < 1e-12));
}

#[test]
fn factor_is_periodic_and_reconstructs_the_solution() {
    for (group, eps, c) in [(GroupId::So3, 0.3, 0.4), (GroupId::Sl2r, 0.2, 0.6)] {
        let curve = rotating_field_curve(group, eps, c);
        let fam = solve_family_with(
            &build_linear_homotopy(&curve),
            16,
            256,
            DEFAULT_DRIFT_TOLERANCE,
            Execution::Parallel,
        )
        .unwrap();
        let ks = continue_log_branch(&fam.monodromies(), &fam.s_grid).unwrap();
        let grid = floquet_factor(
            &fam,
            &ks,
            DEFAULT_PERIODICITY_TOLERANCE,
            Execution::Parallel,
        )
        .unwrap();
        assert!(grid.periodicity_residual < 1e-12, "{group:?}");
        let (i, j) = (11, 97);
        let t = grid.t(i, j);
        let rebuilt = grid.p[i][j] * ks[i].scale(t / grid.periods[i]).exp();
        assert!(rebuilt.distance(&fam.rows[i].values[j]) < 1e-12);
        // p(t) from the closed form at s = 1
        let n = grid.n_t;
        for jj in [0, 40, 200] {
            let t = grid.t(16, jj);
            let f = AlgebraElement::new(group, [0.0, 0.0, t]).exp()
                * AlgebraElement::from_coords(group, frame_generator(eps, c, 1.0) * t).exp();
            let p = f * AlgebraElement::from_coords(
                group,
                k_oracle(group, eps, c, 1.0) * (-t / (2.0 * PI)),
            )
            .exp();
            assert!(grid.p[16][jj].distance(&p) < 1e-7, "{group:?} j={jj}");
        }
        assert!(grid.p[16][n].distance(&grid.p[16][0]) < 1e-10);
    }
}

#[test]
fn wrong_branch_breaks_periodicity() {
    let curve = rotating_field_curve(GroupId::So3, 0.3, 0.4);
    let fam = solve_family_with(
        &build_linear_homotopy(&curve),
        8,
        64,
        DEFAULT_DRIFT_TOLERANCE,
        Execution::Parallel,
    )
    .unwrap();
    let mut ks = continue_log_branch(&fam.monodromies(), &fam.s_grid).unwrap();
    ks[4] = ks[4].scale(1.1);
    let err = floquet_factor(
        &fam,
        &ks,
        DEFAULT_PERIODICITY_TOLERANCE,
        Execution::Parallel,
    )
    .unwrap_err();
    assert!(matches!(err, FloquetError::Factorization { s, .. } if s == 0.5));
}

#[test]
fn analytic_factor_derivative_matches_differences() {
    let curve = rotating_field_curve(GroupId::Sl2r, 0.2, 0.6);
    let fam = solve_family_with(
        &build_linear_homotopy(&curve),
        8,
        512,
        DEFAULT_DRIFT_TOLERANCE,
        Execution::Parallel,
    )
    .unwrap();
    let ks = continue_log_branch(&fam.monodromies(), &fam.s_grid).unwrap();
    let grid = floquet_factor(
        &fam,
        &ks,
        DEFAULT_PERIODICITY_TOLERANCE,
        Execution::Parallel,
    )
    .unwrap();
    // The row holds one full period with the end node repeating the start.
    let row = &grid.p[8];
    let worst = (0..=grid.n_t)
        .map(|j| {
            d_operator(row, grid.step(8), j, true)
                .unwrap()
                .distance(&analytic_dt_p(&grid, 8, j))
        })
        .fold(0.0, f64::max);
    assert!(worst < 1e-8, "{worst:e}");
}

#[test]
fn uniform_reducibility_violation_is_reported() {
    // Monodromy -diag(e^pi, e^-pi): hyperbolic with negative trace.
    let m = solve_fundamental(&sl2_not_in_image_curve(1.0), 64)
        .unwrap()
        .monodromy();
    let expected = GroupElement::sl2(-PI.exp(), 0.0, 0.0, -(-PI).exp());
    assert!(m.distance(&expected) < 1e-10);
    let ms = [GroupElement::identity(GroupId::Sl2r), m];
    let err = continue_log_branch(&ms, &[0.0, 1.0]).unwrap_err();
    assert!(
        matches!(err, FloquetError::UniformReducibilityViolated { .. }),
        "{err}"
    );
}

#[test]
fn coarse_s_grid_is_refused() {
    // Half a turn past pi sampled at two nodes: both branches are equally plausible.
    let curve = PeriodicCurve::constant(
        AlgebraElement::new(GroupId::So3, [0.0, 0.0, 0.55]),
        2.0 * PI,
    );
    let fam = solve_family_with(
        &build_linear_homotopy(&curve),
        1,
        16,
        DEFAULT_DRIFT_TOLERANCE,
        Execution::Parallel,
    )
    .unwrap();
    let err = continue_log_branch(&fam.monodromies(), &fam.s_grid).unwrap_err();
    assert!(
        matches!(
            err,
            FloquetError::BranchJump { .. } | FloquetError::BranchAmbiguity { .. }
        ),
        "{err}"
    );
}
