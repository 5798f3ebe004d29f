use floquet_lie::euler::rotating_field_curve;
use floquet_lie::parallel::Execution;
use floquet_lie::phases::{
    dynamic_phase_pairing, geometric_phase_surface, split_phases, HomotopyKind, PhaseAnalysis,
    PhaseConfig,
};
use floquet_lie::{CoalgebraElement, GroupId};

fn config(n: usize, homotopy: HomotopyKind) -> PhaseConfig {
    PhaseConfig {
        n_t: n,
        n_s: n,
        homotopy,
        ..PhaseConfig::default()
    }
}

fn so3() -> floquet_lie::integrator::PeriodicCurve {
    rotating_field_curve(GroupId::So3, 0.3, 0.4)
}

fn sl2() -> floquet_lie::integrator::PeriodicCurve {
    rotating_field_curve(GroupId::Sl2r, 0.2, 0.6)
}

fn analyze(curve: &floquet_lie::integrator::PeriodicCurve, n: usize) -> PhaseAnalysis {
    split_phases(curve, &config(n, HomotopyKind::LinearScale)).unwrap()
}

#[test]
fn log_phase_splits_and_converges() {
    for curve in [so3(), sl2()] {
        let coarse = analyze(&curve, 128).report;
        let fine = analyze(&curve, 256).report;
        assert!(
            fine.splitting_residual < 1e-6,
            "{:e}",
            fine.splitting_residual
        );
        let ratio = coarse.splitting_residual / fine.splitting_residual;
        assert!(ratio >= 4.0, "{:?}: ratio {ratio}", curve.group());
        // every node of the sweep splits, not only the endpoint
        assert!(fine.rows.iter().all(|r| r.splitting_residual < 1e-6));
    }
}

#[test]
fn geometric_phase_does_not_depend_on_the_homotopy() {
    for curve in [so3(), sl2()] {
        let linear = split_phases(&curve, &config(128, HomotopyKind::LinearScale))
            .unwrap()
            .report;
        let geodesic = split_phases(&curve, &config(128, HomotopyKind::Geodesic))
            .unwrap()
            .report;
        assert_eq!(geodesic.homotopy_kind, HomotopyKind::Geodesic);
        assert!(linear.k.distance(&geodesic.k) < 1e-12);
        assert!(linear.k_dyn.distance(&geodesic.k_dyn) < 1e-8);
        // The two surfaces differ, so the only discrepancy left is discretization.
        let gap = linear.k_geom.distance(&geodesic.k_geom);
        assert!(gap < 1e-6, "{gap:e}");
        assert!(gap <= linear.splitting_residual + geodesic.splitting_residual + 1e-10);
        assert!(geodesic.splitting_residual < 1e-6);
    }
}

#[test]
fn geometric_phase_pairs_to_the_kirillov_surface_integral() {
    for curve in [so3(), sl2()] {
        let a = analyze(&curve, 64);
        assert!(
            a.report.surface_check.iter().all(|r| *r < 1e-10),
            "{:?}",
            a.report.surface_check
        );
        let mu = CoalgebraElement::new(curve.group(), [0.7, -0.4, 1.1]);
        let last = a.factor.n_s();
        let surface = geometric_phase_surface(&mu, &a.factor, last).unwrap();
        assert!((surface - mu.pair(&a.report.k_geom)).abs() < 1e-10);
        let zero = CoalgebraElement::zero(curve.group());
        assert_eq!(
            geometric_phase_surface(&zero, &a.factor, last).unwrap(),
            0.0
        );
        assert_eq!(dynamic_phase_pairing(&a.factor, last, &zero), 0.0);
    }
}

#[test]
fn dynamic_phase_from_the_hamiltonian() {
    for curve in [so3(), sl2()] {
        let a = analyze(&curve, 64);
        let last = a.factor.n_s();
        for i in 0..3 {
            let mu = CoalgebraElement::basis(curve.group(), i);
            let h = dynamic_phase_pairing(&a.factor, last, &mu);
            assert!((h - mu.pair(&a.report.k_dyn)).abs() < 1e-12);
        }
    }
}

#[test]
fn coadjoint_monodromy_is_the_exponential_of_ad_star() {
    for curve in [so3(), sl2()] {
        let a = analyze(&curve, 64);
        let k = a.report.k;
        let expected = (-k.ad_matrix().transpose()).exp();
        let m = a.monodromy.m;
        for i in 0..3 {
            let mu = CoalgebraElement::basis(curve.group(), i);
            let got = m.coadjoint(&mu);
            assert!((got.coords() - expected.column(i)).norm() < 1e-10);
        }
    }
}

#[test]
fn factor_grid_is_flat_to_fourth_order() {
    for curve in [so3(), sl2()] {
        let coarse = analyze(&curve, 128).report.curvature_residual;
        let fine = analyze(&curve, 256).report.curvature_residual;
        let ratio = coarse / fine;
        assert!(
            (12.0..=20.0).contains(&ratio),
            "{:?}: ratio {ratio}",
            curve.group()
        );
    }
}

#[test]
fn sequential_and_parallel_reports_agree_bitwise() {
    let mut cfg = config(32, HomotopyKind::LinearScale);
    cfg.exec = Execution::Sequential;
    let seq = split_phases(&sl2(), &cfg).unwrap().report;
    cfg.exec = Execution::Parallel;
    let par = split_phases(&sl2(), &cfg).unwrap().report;
    assert_eq!(seq.k_geom, par.k_geom);
    assert_eq!(seq.k_dyn, par.k_dyn);
    assert_eq!(seq.curvature_residual, par.curvature_residual);
    assert_eq!(seq.surface_check, par.surface_check);
}
