//! Time integration of `df/dt = phi(t) f`, `f(0) = e` on the group.
//!
//! Smooth coefficient curves are integrated with a fourth-order
//! Runge-Kutta-Munthe-Kaas scheme: the stages live in the algebra, the
//! inverse of `dexp` is truncated after the double commutator, and each step
//! ends with the exact update `f <- exp(theta) f`. Piecewise-constant curves
//! are integrated exactly as products of exponentials.

use std::f64::consts::PI;

use crate::error::{FloquetError, Result};
use crate::fd::{right_log_derivative, Boundary};
use crate::lie::{ensure_same, AlgebraElement, GroupElement, GroupId};
use crate::parallel::{try_map_indexed, Execution};
use crate::phases::{HomotopyFamily, HomotopyKind};

pub const DEFAULT_DRIFT_TOLERANCE: f64 = 1e-9;

/// Real Fourier coefficients per algebra coordinate; index `n` multiplies
/// `cos(n w t)` and `sin(n w t)` with `w = 2 pi / period`.
#[derive(Debug, Clone, PartialEq)]
pub struct FourierCoefficients {
    pub cos: [Vec<f64>; 3],
    pub sin: [Vec<f64>; 3],
}

#[derive(Debug, Clone, PartialEq)]
pub struct Segment {
    pub t_start: f64,
    pub t_end: f64,
    pub value: AlgebraElement,
}

#[derive(Debug, Clone, PartialEq)]
pub enum CurveForm {
    Fourier(FourierCoefficients),
    PiecewiseConstant(Vec<Segment>),
}

/// A periodic curve in the algebra.
#[derive(Debug, Clone, PartialEq)]
pub struct PeriodicCurve {
    group: GroupId,
    period: f64,
    form: CurveForm,
}

impl PeriodicCurve {
    pub fn fourier(group: GroupId, period: f64, coefficients: FourierCoefficients) -> Result<Self> {
        check_period(period)?;
        let finite = coefficients
            .cos
            .iter()
            .chain(coefficients.sin.iter())
            .flatten()
            .all(|c| c.is_finite());
        if !finite {
            return Err(FloquetError::InvalidInput(
                "non-finite Fourier coefficient".into(),
            ));
        }
        Ok(PeriodicCurve {
            group,
            period,
            form: CurveForm::Fourier(coefficients),
        })
    }

    pub fn constant(value: AlgebraElement, period: f64) -> Self {
        let c = value.coords();
        PeriodicCurve {
            group: value.group(),
            period,
            form: CurveForm::Fourier(FourierCoefficients {
                cos: [vec![c[0]], vec![c[1]], vec![c[2]]],
                sin: [vec![0.0], vec![0.0], vec![0.0]],
            }),
        }
    }

    pub fn zero(group: GroupId) -> Self {
        Self::constant(AlgebraElement::zero(group), 2.0 * PI)
    }

    /// Piecewise-constant curve; segments must partition `[0, period)` in
    /// order.
    pub fn piecewise(group: GroupId, period: f64, segments: Vec<Segment>) -> Result<Self> {
        check_period(period)?;
        if segments.is_empty() {
            return Err(FloquetError::InvalidInput(
                "piecewise curve needs at least one segment".into(),
            ));
        }
        let mut expected_start = 0.0;
        for (i, seg) in segments.iter().enumerate() {
            ensure_same(group, seg.value.group())?;
            if seg.t_start != expected_start {
                return Err(FloquetError::InvalidInput(format!(
                    "segment {i} starts at {} but the previous one ends at {expected_start}",
                    seg.t_start
                )));
            }
            if !(seg.t_end > seg.t_start) {
                return Err(FloquetError::InvalidInput(format!("segment {i} is empty")));
            }
            expected_start = seg.t_end;
        }
        if expected_start != period {
            return Err(FloquetError::InvalidInput(format!(
                "segments end at {expected_start}, expected the period {period}"
            )));
        }
        Ok(PeriodicCurve {
            group,
            period,
            form: CurveForm::PiecewiseConstant(segments),
        })
    }

    pub fn group(&self) -> GroupId {
        self.group
    }

    pub fn period(&self) -> f64 {
        self.period
    }

    pub fn form(&self) -> &CurveForm {
        &self.form
    }

    /// Value at `t`, extended periodically.
    pub fn evaluate(&self, t: f64) -> AlgebraElement {
        let tr = t.rem_euclid(self.period);
        match &self.form {
            CurveForm::Fourier(fc) => {
                let w = 2.0 * PI / self.period;
                let mut c = [0.0; 3];
                for (i, ci) in c.iter_mut().enumerate() {
                    for (n, a) in fc.cos[i].iter().enumerate() {
                        *ci += a * (n as f64 * w * tr).cos();
                    }
                    for (n, b) in fc.sin[i].iter().enumerate().skip(1) {
                        *ci += b * (n as f64 * w * tr).sin();
                    }
                }
                AlgebraElement::new(self.group, c)
            }
            CurveForm::PiecewiseConstant(segs) => segs[segment_index(segs, tr)].value,
        }
    }

    pub fn scaled(&self, s: f64) -> PeriodicCurve {
        let form = match &self.form {
            CurveForm::Fourier(fc) => CurveForm::Fourier(FourierCoefficients {
                cos: fc
                    .cos
                    .clone()
                    .map(|v| v.into_iter().map(|c| c * s).collect()),
                sin: fc
                    .sin
                    .clone()
                    .map(|v| v.into_iter().map(|c| c * s).collect()),
            }),
            CurveForm::PiecewiseConstant(segs) => CurveForm::PiecewiseConstant(
                segs.iter()
                    .map(|seg| Segment {
                        value: seg.value.scale(s),
                        ..seg.clone()
                    })
                    .collect(),
            ),
        };
        PeriodicCurve {
            group: self.group,
            period: self.period,
            form,
        }
    }
}

fn check_period(period: f64) -> Result<()> {
    if period.is_finite() && period > 0.0 {
        Ok(())
    } else {
        Err(FloquetError::InvalidInput(format!(
            "period must be positive, got {period}"
        )))
    }
}

fn segment_index(segs: &[Segment], t: f64) -> usize {
    segs.partition_point(|seg| seg.t_start <= t)
        .saturating_sub(1)
}

/// `evaluate_curve(phi, t)`.
pub fn evaluate_curve(curve: &PeriodicCurve, t: f64) -> AlgebraElement {
    curve.evaluate(t)
}

fn dexpinv(u: &AlgebraElement, v: &AlgebraElement) -> AlgebraElement {
    let uv = u.commutator(v);
    *v - uv.scale(0.5) + u.commutator(&uv).scale(1.0 / 12.0)
}

/// One RKMK4 step given the coefficient at the start, midpoint and end of
/// the step.
pub fn rkmk4_step(
    g: &GroupElement,
    a0: &AlgebraElement,
    a_mid: &AlgebraElement,
    a1: &AlgebraElement,
    h: f64,
) -> GroupElement {
    let k1 = a0.scale(h);
    let k2 = dexpinv(&k1.scale(0.5), a_mid).scale(h);
    let k3 = dexpinv(&k2.scale(0.5), a_mid).scale(h);
    let k4 = dexpinv(&k3, a1).scale(h);
    let theta = (k1 + k4 + (k2 + k3).scale(2.0)).scale(1.0 / 6.0);
    theta.exp() * *g
}

fn exact_piecewise_step(g: &GroupElement, curve: &PeriodicCurve, t: f64, h: f64) -> GroupElement {
    let CurveForm::PiecewiseConstant(segs) = curve.form() else {
        unreachable!("exact stepping is only used for piecewise curves")
    };
    let period = curve.period();
    let mut out = *g;
    let mut cur = t.rem_euclid(period);
    let mut remaining = h;
    let mut idx = segment_index(segs, cur);
    while remaining > 0.0 {
        let seg = &segs[idx];
        let dt = (seg.t_end - cur).min(remaining);
        if dt > 0.0 {
            out = seg.value.scale(dt).exp() * out;
            remaining -= dt;
        }
        cur = seg.t_end;
        idx += 1;
        if idx == segs.len() {
            idx = 0;
            cur = 0.0;
        }
    }
    out
}

/// Advances `g` from `t` to `t + h`. Exact for constant and piecewise-constant
/// coefficients.
pub fn step(g: &GroupElement, curve: &PeriodicCurve, t: f64, h: f64) -> GroupElement {
    assert!(h > 0.0, "step size must be positive");
    match curve.form() {
        CurveForm::Fourier(_) => rkmk4_step(
            g,
            &curve.evaluate(t),
            &curve.evaluate(t + 0.5 * h),
            &curve.evaluate(t + h),
            h,
        ),
        CurveForm::PiecewiseConstant(_) => exact_piecewise_step(g, curve, t, h),
    }
}

/// How the coefficient of a single row is supplied to the solver.
#[derive(Debug, Clone)]
pub enum RowDriver {
    /// Values at the half-step nodes `t_j = j * period / (2 N_t)`,
    /// `j = 0..=2 N_t`.
    HalfNodes(Vec<AlgebraElement>),
    /// Evaluate the curve at the nodes and midpoints.
    Curve(PeriodicCurve),
}

#[derive(Debug, Clone)]
pub struct RowSpec {
    pub period: f64,
    pub driver: RowDriver,
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct StepStats {
    pub max_drift: f64,
    pub steps: usize,
}

/// Fundamental solution sampled on a uniform grid over one period.
#[derive(Debug, Clone)]
pub struct FundamentalSolution {
    pub period: f64,
    /// `f(t_j)` for `j = 0..=N_t`.
    pub values: Vec<GroupElement>,
    /// Coefficient `phi(t_j)` at the same nodes.
    pub phi: Vec<AlgebraElement>,
    pub stats: StepStats,
}

impl FundamentalSolution {
    pub fn n_t(&self) -> usize {
        self.values.len() - 1
    }

    pub fn step_size(&self) -> f64 {
        self.period / self.n_t() as f64
    }

    pub fn t(&self, j: usize) -> f64 {
        j as f64 * self.step_size()
    }

    pub fn t_grid(&self) -> Vec<f64> {
        (0..=self.n_t()).map(|j| self.t(j)).collect()
    }

    pub fn group(&self) -> GroupId {
        self.values[0].group()
    }

    /// `f(period)`.
    pub fn monodromy(&self) -> GroupElement {
        *self.values.last().expect("solution has nodes")
    }
}

fn check_steps(n_t: usize) -> Result<()> {
    if n_t < 8 || n_t % 2 != 0 {
        return Err(FloquetError::InvalidInput(format!(
            "N_t must be even and at least 8, got {n_t}"
        )));
    }
    Ok(())
}

/// Solves one row over `[0, periods * period]` with `n_t` steps per period.
pub(crate) fn solve_row(
    group: GroupId,
    spec: &RowSpec,
    n_t: usize,
    periods: usize,
    drift_tolerance: f64,
    s: Option<f64>,
) -> Result<FundamentalSolution> {
    let h = spec.period / n_t as f64;
    let total = n_t * periods;
    let mut values = Vec::with_capacity(total + 1);
    let mut phi = Vec::with_capacity(total + 1);
    let mut g = GroupElement::identity(group);
    let mut max_drift: f64 = 0.0;
    values.push(g);

    match &spec.driver {
        RowDriver::HalfNodes(half) => {
            if half.len() != 2 * n_t + 1 {
                return Err(FloquetError::InvalidInput(format!(
                    "row has {} half-node samples, expected {}",
                    half.len(),
                    2 * n_t + 1
                )));
            }
            for j in 0..total {
                let jj = j % n_t;
                g = rkmk4_step(&g, &half[2 * jj], &half[2 * jj + 1], &half[2 * jj + 2], h);
                max_drift = max_drift.max(g.manifold_residual());
                values.push(g);
                phi.push(half[2 * jj]);
            }
            phi.push(half[0]);
        }
        RowDriver::Curve(curve) => {
            for j in 0..total {
                let t = j as f64 * h;
                g = step(&g, curve, t, h);
                max_drift = max_drift.max(g.manifold_residual());
                values.push(g);
                phi.push(curve.evaluate(t));
            }
            phi.push(curve.evaluate(total as f64 * h));
        }
    }

    if !(max_drift <= drift_tolerance) {
        return Err(FloquetError::Drift {
            s,
            drift: max_drift,
            tolerance: drift_tolerance,
        });
    }
    Ok(FundamentalSolution {
        period: spec.period * periods as f64,
        values,
        phi,
        stats: StepStats {
            max_drift,
            steps: total,
        },
    })
}

/// Fundamental solution over one period with `n_t` uniform steps.
pub fn solve_fundamental(curve: &PeriodicCurve, n_t: usize) -> Result<FundamentalSolution> {
    solve_fundamental_with(curve, n_t, DEFAULT_DRIFT_TOLERANCE)
}

pub fn solve_fundamental_with(
    curve: &PeriodicCurve,
    n_t: usize,
    drift_tolerance: f64,
) -> Result<FundamentalSolution> {
    solve_fundamental_periods(curve, n_t, 1, drift_tolerance)
}

/// Fundamental solution over `periods` consecutive periods, `n_t` steps each.
pub fn solve_fundamental_periods(
    curve: &PeriodicCurve,
    n_t: usize,
    periods: usize,
    drift_tolerance: f64,
) -> Result<FundamentalSolution> {
    check_steps(n_t)?;
    let spec = RowSpec {
        period: curve.period(),
        driver: RowDriver::Curve(curve.clone()),
    };
    solve_row(
        curve.group(),
        &spec,
        n_t,
        periods.max(1),
        drift_tolerance,
        None,
    )
}

/// Fundamental solutions of every row of a homotopy family.
#[derive(Debug, Clone)]
pub struct FamilySolution {
    pub s_grid: Vec<f64>,
    pub rows: Vec<FundamentalSolution>,
    pub kind: HomotopyKind,
    pub provenance: String,
}

impl FamilySolution {
    pub fn n_s(&self) -> usize {
        self.s_grid.len() - 1
    }

    pub fn n_t(&self) -> usize {
        self.rows[0].n_t()
    }

    pub fn group(&self) -> GroupId {
        self.rows[0].group()
    }

    pub fn periods(&self) -> Vec<f64> {
        self.rows.iter().map(|r| r.period).collect()
    }

    pub fn monodromies(&self) -> Vec<GroupElement> {
        self.rows.iter().map(|r| r.monodromy()).collect()
    }
}

pub fn solve_family(family: &HomotopyFamily, n_s: usize, n_t: usize) -> Result<FamilySolution> {
    solve_family_with(
        family,
        n_s,
        n_t,
        DEFAULT_DRIFT_TOLERANCE,
        Execution::default(),
    )
}

/// Solves every row `s_i = i / n_s`. Rows are independent and may run in
/// parallel; each row is computed exactly as a standalone solve would.
pub fn solve_family_with(
    family: &HomotopyFamily,
    n_s: usize,
    n_t: usize,
    drift_tolerance: f64,
    exec: Execution,
) -> Result<FamilySolution> {
    check_steps(n_t)?;
    if n_s < 1 {
        return Err(FloquetError::InvalidInput("N_s must be positive".into()));
    }
    let s_grid: Vec<f64> = (0..=n_s).map(|i| i as f64 / n_s as f64).collect();
    let group = family.group();
    let rows = try_map_indexed(n_s + 1, exec, |i| {
        let spec = family.row_spec(i, n_s, n_t)?;
        solve_row(group, &spec, n_t, 1, drift_tolerance, Some(s_grid[i]))
    })?;
    Ok(FamilySolution {
        s_grid,
        rows,
        kind: family.kind(),
        provenance: family.provenance().to_string(),
    })
}

/// Right logarithmic derivative `D alpha` of a sampled curve at `index` by a
/// fourth-order centered stencil. Boundary nodes need `periodic`.
pub fn d_operator(
    values: &[GroupElement],
    grid_spacing: f64,
    index: usize,
    periodic: bool,
) -> Result<AlgebraElement> {
    let boundary = if periodic {
        Boundary::Periodic
    } else {
        Boundary::Error
    };
    right_log_derivative(values, grid_spacing, index, boundary)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use nalgebra::Matrix3;

    fn rot_z(theta: f64) -> Matrix3<f64> {
        Matrix3::new(
            theta.cos(),
            -theta.sin(),
            0.0,
            theta.sin(),
            theta.cos(),
            0.0,
            0.0,
            0.0,
            1.0,
        )
    }

    #[test]
    fn curve_evaluation_basics() {
        let a = AlgebraElement::new(GroupId::So3, [0.1, -0.2, 0.3]);
        let c = PeriodicCurve::constant(a, 2.0 * PI);
        for t in [0.0, 1.3, -4.0, 100.0] {
            assert_eq!(c.evaluate(t), a);
        }
        let f = PeriodicCurve::fourier(
            GroupId::So3,
            2.0 * PI,
            FourierCoefficients {
                cos: [vec![0.0, 0.3, 0.1], vec![0.2], vec![0.4, 0.0, 0.0, -0.2]],
                sin: [vec![0.0, 0.0, 0.5], vec![0.0, 0.3], vec![]],
            },
        )
        .unwrap();
        for t in [0.0, 0.7, 2.5, 5.9] {
            let d = f.evaluate(t).distance(&f.evaluate(t + 2.0 * PI));
            assert!(d <= 1e-14, "{d}");
        }
        let pw = PeriodicCurve::piecewise(
            GroupId::So3,
            2.0 * PI,
            vec![
                Segment {
                    t_start: 0.0,
                    t_end: PI,
                    value: a,
                },
                Segment {
                    t_start: PI,
                    t_end: 2.0 * PI,
                    value: -a,
                },
            ],
        )
        .unwrap();
        assert_eq!(pw.evaluate(1.0), a);
        assert_eq!(pw.evaluate(4.0), -a);
        assert_eq!(pw.evaluate(1.0 + 2.0 * PI), a);
    }

    #[test]
    fn piecewise_rejects_gaps() {
        let a = AlgebraElement::zero(GroupId::So3);
        let segs = vec![
            Segment {
                t_start: 0.0,
                t_end: 1.0,
                value: a,
            },
            Segment {
                t_start: 1.5,
                t_end: 2.0 * PI,
                value: a,
            },
        ];
        assert!(PeriodicCurve::piecewise(GroupId::So3, 2.0 * PI, segs).is_err());
    }

    #[test]
    fn constant_coefficients_step_exactly() {
        for group in [GroupId::So3, GroupId::Sl2r] {
            let a = AlgebraElement::new(group, [0.3, -0.7, 1.1]);
            let curve = PeriodicCurve::constant(a, 2.0 * PI);
            let g = a.scale(0.4).exp();
            let h = 0.37;
            let got = step(&g, &curve, 0.2, h);
            let want = a.scale(h).exp() * g;
            assert!(got.distance(&want) <= 1e-14);
        }
    }

    #[test]
    fn zero_curve_gives_identity() {
        let sol = solve_fundamental(&PeriodicCurve::zero(GroupId::Sl2r), 16).unwrap();
        for v in &sol.values {
            assert_eq!(*v, GroupElement::identity(GroupId::Sl2r));
        }
    }

    #[test]
    fn constant_rotation_about_z() {
        let omega = 0.7;
        let curve = PeriodicCurve::constant(
            AlgebraElement::new(GroupId::So3, [0.0, 0.0, omega]),
            2.0 * PI,
        );
        let sol = solve_fundamental(&curve, 64).unwrap();
        for (j, v) in sol.values.iter().enumerate() {
            assert_abs_diff_eq!(*v.matrix(), rot_z(omega * sol.t(j)), epsilon = 1e-13);
        }
    }

    #[test]
    fn rejects_bad_step_counts() {
        let c = PeriodicCurve::zero(GroupId::So3);
        assert!(solve_fundamental(&c, 6).is_err());
        assert!(solve_fundamental(&c, 9).is_err());
    }

    #[test]
    fn piecewise_steps_straddling_a_jump_are_exact() {
        let a = AlgebraElement::new(GroupId::So3, [0.0, 0.0, 1.0]);
        let b = AlgebraElement::new(GroupId::So3, [1.0, 0.0, 0.0]);
        let curve = PeriodicCurve::piecewise(
            GroupId::So3,
            2.0 * PI,
            vec![
                Segment {
                    t_start: 0.0,
                    t_end: 1.0,
                    value: a,
                },
                Segment {
                    t_start: 1.0,
                    t_end: 2.0 * PI,
                    value: b,
                },
            ],
        )
        .unwrap();
        let sol = solve_fundamental(&curve, 10).unwrap();
        let want = b.scale(2.0 * PI - 1.0).exp() * a.exp();
        assert!(sol.monodromy().distance(&want) <= 1e-13);
    }

    #[test]
    fn d_operator_needs_periodicity_at_the_ends() {
        let a = AlgebraElement::new(GroupId::So3, [0.2, 0.1, -0.3]);
        let h = 0.01;
        let vals: Vec<_> = (0..11).map(|j| a.scale(j as f64 * h).exp()).collect();
        let d = d_operator(&vals, h, 5, false).unwrap();
        assert!(d.distance(&a) < 1e-10);
        assert!(matches!(
            d_operator(&vals, h, 0, false),
            Err(FloquetError::Boundary { .. })
        ));
        let constant = vec![GroupElement::identity(GroupId::So3); 9];
        assert_eq!(d_operator(&constant, h, 4, false).unwrap().norm(), 0.0);
    }
}
