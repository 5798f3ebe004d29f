use floquet_lie::selftest::{format_table, run_selftest, SelftestOptions};

#[test]
fn every_check_passes() {
    let checks = run_selftest(SelftestOptions::default());
    assert!(checks.len() >= 10);
    for c in &checks {
        assert!(c.passed, "{}: {:e} > {:e}", c.name, c.residual, c.tolerance);
    }
}

#[test]
fn flipped_coadjoint_sign_is_caught() {
    let checks = run_selftest(SelftestOptions {
        flip_ad_star_sign: true,
    });
    assert!(checks.iter().any(|c| !c.passed));
}

#[test]
fn table_is_reproducible() {
    let a = format_table(&run_selftest(SelftestOptions::default()));
    let b = format_table(&run_selftest(SelftestOptions::default()));
    assert_eq!(a, b);
    assert!(a.contains("PASS"));
}
