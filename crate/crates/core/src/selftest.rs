//! Invariant suite behind the `selftest` command. Every random input comes
//! from a fixed seed, so reruns print identical tables.

use std::f64::consts::PI;

use nalgebra::Matrix3;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::euler::rotating_field_curve;
use crate::fd::{derivative_stencil, Boundary};
use crate::integrator::{d_operator, solve_fundamental, PeriodicCurve, Segment};
use crate::lie::{
    ad_star_unchecked, AlgebraElement, CoalgebraElement, GroupElement, GroupId, LogStatus,
};
use crate::phases::{split_phases, zero_curvature_residual, PhaseConfig};
use crate::{floquet, Result};

const SEED: u64 = 0x5EED_F10C;
const TRIALS: usize = 64;

#[derive(Debug, Clone, PartialEq)]
pub struct Check {
    pub name: &'static str,
    pub residual: f64,
    pub tolerance: f64,
    pub passed: bool,
}

impl Check {
    fn new(name: &'static str, residual: f64, tolerance: f64) -> Self {
        Check {
            name,
            residual,
            tolerance,
            passed: residual <= tolerance,
        }
    }
}

/// Test hooks for mutation canaries.
#[derive(Debug, Clone, Copy, Default)]
pub struct SelftestOptions {
    /// Flip the sign of `ad*` inside the suite.
    pub flip_ad_star_sign: bool,
}

fn random_element(rng: &mut ChaCha8Rng, group: GroupId, scale: f64) -> AlgebraElement {
    AlgebraElement::new(
        group,
        [
            scale * rng.random_range(-1.0..1.0),
            scale * rng.random_range(-1.0..1.0),
            scale * rng.random_range(-1.0..1.0),
        ],
    )
}

fn random_covector(rng: &mut ChaCha8Rng, group: GroupId) -> CoalgebraElement {
    CoalgebraElement::new(
        group,
        [
            rng.random_range(-1.0..1.0),
            rng.random_range(-1.0..1.0),
            rng.random_range(-1.0..1.0),
        ],
    )
}

fn curve_a(group: GroupId) -> AlgebraElement {
    AlgebraElement::new(group, [0.9, -0.4, 0.6])
}

fn curve_b(group: GroupId) -> AlgebraElement {
    AlgebraElement::new(group, [-0.3, 0.8, 0.5])
}

/// Test curve `alpha(t) = exp(t a) exp(sin(t) b)`.
fn alpha(group: GroupId, t: f64) -> GroupElement {
    curve_a(group).scale(t).exp() * curve_b(group).scale(t.sin()).exp()
}

fn beta(group: GroupId, t: f64) -> GroupElement {
    AlgebraElement::new(group, [0.2, 0.5, -0.7])
        .scale(t * t)
        .exp()
}

const T0: f64 = 0.7;

fn samples(h: f64, f: impl Fn(f64) -> GroupElement) -> Vec<GroupElement> {
    (0..5).map(|j| f(T0 + (j as f64 - 2.0) * h)).collect()
}

/// `|D exp(t a) - a|` at step `h`.
pub fn exp_derivative_residual(h: f64) -> Result<f64> {
    let mut worst: f64 = 0.0;
    for group in [GroupId::So3, GroupId::Sl2r] {
        let a = curve_a(group);
        let d = d_operator(&samples(h, |t| a.scale(t).exp()), h, 2, false)?;
        worst = worst.max(d.distance(&a));
    }
    Ok(worst)
}

/// `D alpha = a + cos(t) Ad_{exp(ta)} b`, by hand.
fn d_alpha_exact(group: GroupId, t: f64) -> AlgebraElement {
    curve_a(group)
        + curve_a(group)
            .scale(t)
            .exp()
            .adjoint(&curve_b(group).scale(t.cos()))
}

/// `|D(alpha^-1) + Ad_{alpha^-1} D alpha|`, with `D alpha` exact and
/// `D(alpha^-1)` differenced. (Differencing both sides makes the identity
/// hold to roundoff on any grid, which hides the stencil order.)
pub fn inverse_rule_residual(h: f64) -> Result<f64> {
    let mut worst: f64 = 0.0;
    for group in [GroupId::So3, GroupId::Sl2r] {
        let d = d_alpha_exact(group, T0);
        let d_inv = d_operator(&samples(h, |t| alpha(group, t).inverse()), h, 2, false)?;
        let want = -alpha(group, T0).inverse().adjoint(&d);
        worst = worst.max(d_inv.distance(&want));
    }
    Ok(worst)
}

/// `|D(alpha beta) - D alpha - Ad_alpha D beta|`.
pub fn product_rule_residual(h: f64) -> Result<f64> {
    let mut worst: f64 = 0.0;
    for group in [GroupId::So3, GroupId::Sl2r] {
        let da = d_operator(&samples(h, |t| alpha(group, t)), h, 2, false)?;
        let db = d_operator(&samples(h, |t| beta(group, t)), h, 2, false)?;
        let dab = d_operator(
            &samples(h, |t| alpha(group, t) * beta(group, t)),
            h,
            2,
            false,
        )?;
        let want = da + alpha(group, T0).adjoint(&db);
        worst = worst.max(dab.distance(&want));
    }
    Ok(worst)
}

/// `|d/dt Ad_alpha - ad_{D alpha} Ad_alpha|` with the time derivative of the
/// adjoint matrix taken by the same stencil.
pub fn adjoint_derivative_residual(h: f64) -> Result<f64> {
    let mut worst: f64 = 0.0;
    for group in [GroupId::So3, GroupId::Sl2r] {
        let vals = samples(h, |t| alpha(group, t));
        let stencil = derivative_stencil(2, 5, Boundary::Error)?;
        let mut d_ad = Matrix3::zeros();
        for (idx, w) in stencil {
            d_ad += vals[idx].adjoint_matrix() * w;
        }
        d_ad /= h;
        let d = d_operator(&vals, h, 2, false)?;
        let want = d.ad_matrix() * vals[2].adjoint_matrix();
        worst = worst.max((d_ad - want).norm());
    }
    Ok(worst)
}

/// Zero-curvature residual of `sigma(s, t) = exp(s a) exp(t b)` on a 9x9 grid
/// with spacing `h`.
pub fn product_curvature_residual(h: f64) -> Result<f64> {
    let mut worst: f64 = 0.0;
    for group in [GroupId::So3, GroupId::Sl2r] {
        let (a, b) = (curve_a(group), curve_b(group));
        let grid: Vec<Vec<GroupElement>> = (0..9)
            .map(|i| {
                (0..9)
                    .map(|j| a.scale(i as f64 * h).exp() * b.scale(j as f64 * h).exp())
                    .collect()
            })
            .collect();
        worst = worst.max(zero_curvature_residual(&grid, h, h)?);
    }
    Ok(worst)
}

/// Two-segment SL(2,R) system with monodromy `-diag(e^{pi b}, e^{-pi b})`.
pub fn sl2_not_in_image_curve(b: f64) -> PeriodicCurve {
    PeriodicCurve::piecewise(
        GroupId::Sl2r,
        2.0 * PI,
        vec![
            Segment {
                t_start: 0.0,
                t_end: PI,
                value: AlgebraElement::new(GroupId::Sl2r, [0.0, 0.0, 2.0]),
            },
            Segment {
                t_start: PI,
                t_end: 2.0 * PI,
                value: AlgebraElement::new(GroupId::Sl2r, [2.0 * b, 0.0, 0.0]),
            },
        ],
    )
    .expect("segments partition the period")
}

fn algebraic_checks(rng: &mut ChaCha8Rng, opts: SelftestOptions, out: &mut Vec<Check>) {
    let ad_star = |x: &AlgebraElement, mu: &CoalgebraElement| {
        let v = ad_star_unchecked(x, mu);
        if opts.flip_ad_star_sign {
            CoalgebraElement::from_coords(v.group(), -v.coords())
        } else {
            v
        }
    };
    let mut jacobi: f64 = 0.0;
    let (mut kir, mut anti, mut roundtrip, mut hom, mut coad) =
        (0.0f64, 0.0f64, 0.0f64, 0.0f64, 0.0f64);
    for group in [GroupId::So3, GroupId::Sl2r] {
        jacobi = jacobi.max(group.context().jacobi_residual());
        for _ in 0..TRIALS {
            let x = random_element(rng, group, 1.0);
            let y = random_element(rng, group, 1.0);
            let eta = random_covector(rng, group);
            // Kirillov form through the coadjoint tangent vectors
            let via_ad_star = ad_star(&x, &eta).pair(&y);
            kir = kir.max((via_ad_star - eta.pair(&x.commutator(&y))).abs());
            anti = anti.max((via_ad_star + ad_star(&y, &eta).pair(&x)).abs());

            let z = random_element(rng, group, 1.5);
            let log = crate::lie::log_group(&z.exp()).expect("exp lands on the group");
            roundtrip = roundtrip.max(log.reconstruct().distance(&z.exp()));

            let g = random_element(rng, group, 1.0).exp();
            let h = random_element(rng, group, 1.0).exp();
            hom = hom.max((g * h).adjoint(&x).distance(&g.adjoint(&h.adjoint(&x))));
            coad =
                coad.max((g.coadjoint(&eta).pair(&x) - eta.pair(&g.inverse().adjoint(&x))).abs());
        }
    }
    out.push(Check::new("structure constants: Jacobi", jacobi, 1e-14));
    out.push(Check::new(
        "kirillov antisymmetry via ad*",
        kir.max(anti),
        1e-13,
    ));
    out.push(Check::new("exp/log round trip", roundtrip, 1e-10));
    out.push(Check::new("Ad homomorphism", hom, 1e-12));
    out.push(Check::new("coadjoint pairing identity", coad, 1e-13));
}

/// Runs the suite and returns one row per check.
pub fn run_selftest(opts: SelftestOptions) -> Vec<Check> {
    let mut rng = ChaCha8Rng::seed_from_u64(SEED);
    let mut out = Vec::new();
    algebraic_checks(&mut rng, opts, &mut out);

    let h = 2.0 * PI / 1024.0;
    let or_inf = |r: Result<f64>| r.unwrap_or(f64::INFINITY);
    out.push(Check::new(
        "D exp(ta) = a",
        or_inf(exp_derivative_residual(h)),
        1e-8,
    ));
    out.push(Check::new(
        "D inverse",
        or_inf(inverse_rule_residual(h)),
        1e-8,
    ));
    out.push(Check::new(
        "D product",
        or_inf(product_rule_residual(h)),
        1e-8,
    ));
    out.push(Check::new(
        "d/dt Ad = ad_D Ad",
        or_inf(adjoint_derivative_residual(h)),
        1e-8,
    ));
    out.push(Check::new(
        "zero curvature exp(sa)exp(tb)",
        or_inf(product_curvature_residual(h)),
        1e-8,
    ));

    let so3 = rotating_field_curve(GroupId::So3, 0.3, 0.4);
    let monodromy_err = solve_fundamental(&so3, 256)
        .map(|sol| {
            let want = AlgebraElement::new(GroupId::So3, [0.3, 0.0, -0.6])
                .scale(2.0 * PI)
                .exp();
            sol.monodromy().distance(&want)
        })
        .unwrap_or(f64::INFINITY);
    out.push(Check::new("rotating-field monodromy", monodromy_err, 1e-8));

    let b = 0.3;
    let fixture = solve_fundamental(&sl2_not_in_image_curve(b), 16)
        .and_then(|sol| floquet::monodromy(&sol))
        .map(|rep| {
            if rep.log.status == LogStatus::NotInImage && rep.adjoint_reducible {
                (rep.adjoint_log_coords - nalgebra::Vector3::new(2.0 * PI * b, 0.0, 0.0)).norm()
            } else {
                f64::INFINITY
            }
        })
        .unwrap_or(f64::INFINITY);
    out.push(Check::new("sl2 reducibility criterion", fixture, 1e-12));

    let cfg = PhaseConfig {
        n_t: 128,
        n_s: 128,
        ..PhaseConfig::default()
    };
    match split_phases(&so3, &cfg) {
        Ok(a) => {
            out.push(Check::new(
                "splitting k = k_dyn + k_geom",
                a.report.splitting_residual,
                1e-6,
            ));
            let surface = a.report.surface_check.iter().cloned().fold(0.0, f64::max);
            out.push(Check::new(
                "surface integral vs double integral",
                surface,
                1e-10,
            ));
        }
        Err(_) => {
            out.push(Check::new(
                "splitting k = k_dyn + k_geom",
                f64::INFINITY,
                1e-6,
            ));
            out.push(Check::new(
                "surface integral vs double integral",
                f64::INFINITY,
                1e-10,
            ));
        }
    }
    out
}

/// Fixed-width table, one line per check.
pub fn format_table(checks: &[Check]) -> String {
    let mut s = format!(
        "{:<40} {:>12} {:>10}  result\n",
        "check", "residual", "tolerance"
    );
    for c in checks {
        s.push_str(&format!(
            "{:<40} {:>12.4e} {:>10.1e}  {}\n",
            c.name,
            c.residual,
            c.tolerance,
            if c.passed { "PASS" } else { "FAIL" }
        ));
    }
    s
}
