//! Homotopy families, the dynamic/geometric splitting of the log phase, the
//! symplectic surface-integral form of the geometric phase and the
//! zero-curvature diagnostic.
//!
//! With `q = p^-1`, the analytic identity `D_t q = k / T - Ad_q phi` gives
//! `k = k_dyn + int_0^T D_t q dt`, and the zero-curvature equation for `q`
//! turns the last term into
//!
//! ```text
//! k_geom(s) = int_0^s int_0^T(u) [D_u q(u, t), D_t q(u, t)] dt du.
//! ```
//!
//! When the period varies with `s`, `D_u` is taken at fixed normalized time
//! `t / T(u)`, which is what differencing across rows of the shared index
//! grid produces.

use std::fmt;
use std::sync::Arc;

use nalgebra::Matrix3;
use serde::{Deserialize, Serialize};

use crate::error::{FloquetError, Result};
use crate::fd::{
    composite_weights, derivative_stencil, right_log_derivative, simpson_weights, Boundary,
};
use crate::floquet::{
    analytic_dt_p, analytic_dt_p_inv, continue_log_branch_with, floquet_factor, monodromy_of,
    rotation_generator, ContinuationOptions, FloquetFactorGrid, MonodromyReport,
    DEFAULT_BRANCH_JUMP, DEFAULT_PERIODICITY_TOLERANCE,
};
use crate::integrator::{
    solve_family_with, solve_fundamental_with, FamilySolution, FundamentalSolution, PeriodicCurve,
    RowDriver, RowSpec, DEFAULT_DRIFT_TOLERANCE,
};
use crate::lie::{
    dexp_matrices, log_group, AlgebraElement, CoalgebraElement, GroupId, LogOptions, LogStatus,
};
use crate::parallel::{map_indexed, try_map_indexed, Execution};

pub const DEFAULT_SPLITTING_TOLERANCE: f64 = 1e-6;

/// Largest step of the `t`-continuation of `log p(t)` accepted when building
/// a geodesic homotopy.
const GEODESIC_LOG_JUMP: f64 = 0.5;
/// `log p(T)` must return to zero within this distance for the geodesic
/// family to consist of closed loops.
const GEODESIC_CLOSURE: f64 = 1e-6;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum HomotopyKind {
    #[default]
    LinearScale,
    Geodesic,
    UserSupplied,
}

impl fmt::Display for HomotopyKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            HomotopyKind::LinearScale => "linear_scale",
            HomotopyKind::Geodesic => "geodesic",
            HomotopyKind::UserSupplied => "user_supplied",
        })
    }
}

pub type FamilyFn = Arc<dyn Fn(f64, f64) -> AlgebraElement + Send + Sync>;

#[derive(Clone)]
enum FamilySource {
    Linear(PeriodicCurve),
    /// `p(s, t) = exp(s L(t))`, `k(s) = s k`, with `L = log p` and `L'`
    /// sampled at the half-step nodes of an `N_t` grid.
    Geodesic {
        period: f64,
        n_t: usize,
        k: AlgebraElement,
        log_p: Vec<AlgebraElement>,
        dlog_p: Vec<AlgebraElement>,
    },
    Function {
        group: GroupId,
        period: f64,
        phi: FamilyFn,
    },
    /// Precomputed half-node samples of every row, with per-row periods.
    Tabulated {
        group: GroupId,
        periods: Vec<f64>,
        rows: Vec<Vec<AlgebraElement>>,
    },
}

/// A family `phi(s, t)` of periodic curves with `phi(0, t) = 0`.
#[derive(Clone)]
pub struct HomotopyFamily {
    kind: HomotopyKind,
    source: FamilySource,
    base_curve: Option<PeriodicCurve>,
    provenance: String,
}

impl fmt::Debug for HomotopyFamily {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("HomotopyFamily")
            .field("kind", &self.kind)
            .field("group", &self.group())
            .field("provenance", &self.provenance)
            .finish_non_exhaustive()
    }
}

impl HomotopyFamily {
    pub fn kind(&self) -> HomotopyKind {
        self.kind
    }

    pub fn provenance(&self) -> &str {
        &self.provenance
    }

    pub fn base_curve(&self) -> Option<&PeriodicCurve> {
        self.base_curve.as_ref()
    }

    pub fn group(&self) -> GroupId {
        match &self.source {
            FamilySource::Linear(c) => c.group(),
            FamilySource::Geodesic { k, .. } => k.group(),
            FamilySource::Function { group, .. } | FamilySource::Tabulated { group, .. } => *group,
        }
    }

    /// `phi(s, t) = f(s, t)` for an arbitrary user function. The caller is
    /// responsible for periodicity in `t` and for `f(0, t) = 0`.
    pub fn user_supplied(
        group: GroupId,
        period: f64,
        phi: FamilyFn,
        provenance: impl Into<String>,
    ) -> Self {
        HomotopyFamily {
            kind: HomotopyKind::UserSupplied,
            source: FamilySource::Function { group, period, phi },
            base_curve: None,
            provenance: provenance.into(),
        }
    }

    /// Family given by half-node samples per row (`2 N_t + 1` values on
    /// `[0, periods[i]]`), as produced by reduced mechanical systems whose
    /// period changes along the family.
    pub fn tabulated(
        group: GroupId,
        periods: Vec<f64>,
        rows: Vec<Vec<AlgebraElement>>,
        provenance: impl Into<String>,
    ) -> Result<Self> {
        if periods.len() != rows.len() || rows.len() < 2 {
            return Err(FloquetError::InvalidInput(
                "tabulated family needs matching periods and at least two rows".into(),
            ));
        }
        if let Some(bad) = rows.iter().find(|r| r.len() != rows[0].len()) {
            return Err(FloquetError::InvalidInput(format!(
                "tabulated rows differ in length ({} vs {})",
                bad.len(),
                rows[0].len()
            )));
        }
        Ok(HomotopyFamily {
            kind: HomotopyKind::UserSupplied,
            source: FamilySource::Tabulated {
                group,
                periods,
                rows,
            },
            base_curve: None,
            provenance: provenance.into(),
        })
    }

    /// Period and coefficient samples of row `i` of an `n_s x n_t` grid.
    pub fn row_spec(&self, i: usize, n_s: usize, n_t: usize) -> Result<RowSpec> {
        let s = i as f64 / n_s as f64;
        match &self.source {
            FamilySource::Linear(curve) => Ok(RowSpec {
                period: curve.period(),
                driver: RowDriver::Curve(curve.scaled(s)),
            }),
            FamilySource::Geodesic {
                period,
                n_t: built_for,
                k,
                log_p,
                dlog_p,
            } => {
                if *built_for != n_t {
                    return Err(FloquetError::InvalidInput(format!(
                        "geodesic family was sampled for N_t = {built_for}, requested {n_t}"
                    )));
                }
                let ks = k.scale(s / period);
                let half = log_p
                    .iter()
                    .zip(dlog_p)
                    .map(|(l, dl)| {
                        let x = l.scale(s);
                        let p = x.exp();
                        let (dexp, _) = dexp_matrices(&x);
                        let dt_p = AlgebraElement::from_coords(x.group(), dexp * dl.coords() * s);
                        p.adjoint(&ks) + dt_p
                    })
                    .collect();
                Ok(RowSpec {
                    period: *period,
                    driver: RowDriver::HalfNodes(half),
                })
            }
            FamilySource::Function { period, phi, .. } => {
                let h = period / (2 * n_t) as f64;
                Ok(RowSpec {
                    period: *period,
                    driver: RowDriver::HalfNodes(
                        (0..=2 * n_t).map(|j| phi(s, j as f64 * h)).collect(),
                    ),
                })
            }
            FamilySource::Tabulated { periods, rows, .. } => {
                if rows.len() != n_s + 1 || rows[i].len() != 2 * n_t + 1 {
                    return Err(FloquetError::InvalidInput(format!(
                        "tabulated family has {} rows of {} samples, grid needs {} rows of {}",
                        rows.len(),
                        rows[0].len(),
                        n_s + 1,
                        2 * n_t + 1
                    )));
                }
                Ok(RowSpec {
                    period: periods[i],
                    driver: RowDriver::HalfNodes(rows[i].clone()),
                })
            }
        }
    }
}

/// `phi(s, t) = s phi(t)`.
pub fn build_linear_homotopy(phi: &PeriodicCurve) -> HomotopyFamily {
    HomotopyFamily {
        kind: HomotopyKind::LinearScale,
        source: FamilySource::Linear(phi.clone()),
        base_curve: Some(phi.clone()),
        provenance: "phi(s,t) = s*phi(t)".into(),
    }
}

/// Geodesic contraction `p(s, t) = exp(s log p(t))` of the Floquet loop of
/// `solution` with log phase `k(s) = s k`.
///
/// `solution` must be sampled on `2 N_t` steps; its nodes become the
/// half-step nodes of the `N_t` family. The coefficient of every row follows
/// from `phi = Ad_p k / T + D_t p`, where `D_t p` is evaluated through the
/// differential of `exp` rather than by differencing.
pub fn build_geodesic_homotopy(
    solution: &FundamentalSolution,
    k: &AlgebraElement,
) -> Result<HomotopyFamily> {
    let n2 = solution.n_t();
    if n2 % 4 != 0 {
        return Err(FloquetError::InvalidInput(format!(
            "geodesic construction needs 2*N_t steps with N_t even, got {n2}"
        )));
    }
    let period = solution.period;
    let group = solution.group();
    let mut log_p = Vec::with_capacity(n2 + 1);
    let mut dlog_p = Vec::with_capacity(n2 + 1);
    let mut prev = AlgebraElement::zero(group);
    for j in 0..=n2 {
        let t = solution.t(j);
        let p = solution.values[j] * k.scale(-t / period).exp();
        let log = log_group(&p)?;
        if log.status == LogStatus::NotInImage {
            return Err(FloquetError::HomotopyUnavailable(format!(
                "Floquet factor leaves the exponential image at t = {t}"
            )));
        }
        let mut candidates = log.candidates(2);
        if let Some(gen) = rotation_generator(&prev) {
            for n in -2..=2 {
                let c = log.principal + gen.scale(2.0 * std::f64::consts::PI * n as f64);
                if c.exp().distance(&p) <= 1e-8 {
                    candidates.push(c);
                }
            }
        }
        let l = candidates
            .into_iter()
            .min_by(|a, b| a.distance(&prev).total_cmp(&b.distance(&prev)))
            .expect("principal candidate");
        if l.distance(&prev) > GEODESIC_LOG_JUMP {
            return Err(FloquetError::HomotopyUnavailable(format!(
                "log of the Floquet factor is discontinuous at t = {t}"
            )));
        }
        let dt_p = solution.phi[j] - p.adjoint(&k.scale(1.0 / period));
        let (_, dexpinv) = dexp_matrices(&l);
        log_p.push(l);
        dlog_p.push(AlgebraElement::from_coords(group, dexpinv * dt_p.coords()));
        prev = l;
    }
    let closure = log_p[n2].norm();
    if closure > GEODESIC_CLOSURE {
        return Err(FloquetError::HomotopyUnavailable(format!(
            "log of the Floquet loop ends at {closure:.3e} instead of 0; the loop winds around the group"
        )));
    }
    Ok(HomotopyFamily {
        kind: HomotopyKind::Geodesic,
        source: FamilySource::Geodesic {
            period,
            n_t: n2 / 2,
            k: *k,
            log_p,
            dlog_p,
        },
        base_curve: None,
        provenance: "p(s,t) = exp(s*log p(t)), k(s) = s*k".into(),
    })
}

/// `k_dyn(s) = int_0^T Ad_{p^-1} phi dt` by composite Simpson.
pub fn dynamic_phase(grid: &FloquetFactorGrid, s_idx: usize) -> AlgebraElement {
    let w = simpson_weights(grid.n_t, grid.step(s_idx));
    let mut acc = AlgebraElement::zero(grid.group());
    for (j, wj) in w.iter().enumerate() {
        acc = acc
            + grid.p[s_idx][j]
                .inverse()
                .adjoint(&grid.phi[s_idx][j])
                .scale(*wj);
    }
    acc
}

/// `<mu, k_dyn> = -int_0^T H_t(Ad*_{p^-1} mu) dt` with `H_t(xi) = -<xi, phi>`,
/// evaluated on the coadjoint side.
pub fn dynamic_phase_pairing(grid: &FloquetFactorGrid, s_idx: usize, mu: &CoalgebraElement) -> f64 {
    let w = simpson_weights(grid.n_t, grid.step(s_idx));
    let mut acc = 0.0;
    for (j, wj) in w.iter().enumerate() {
        let xi = grid.p[s_idx][j].coadjoint(mu);
        let hamiltonian = -xi.pair(&grid.phi[s_idx][j]);
        acc -= wj * hamiltonian;
    }
    acc
}

/// `D_u p^-1` at every node, differencing across rows at fixed index.
fn du_p_inv(grid: &FloquetFactorGrid, exec: Execution) -> Result<Vec<Vec<AlgebraElement>>> {
    let ns1 = grid.s_grid.len();
    if ns1 < 9 {
        return Err(FloquetError::Resolution(format!(
            "the s-grid needs at least 9 nodes for the geometric phase, has {ns1}"
        )));
    }
    let h_s = grid.s_grid[1] - grid.s_grid[0];
    let q: Vec<Vec<Matrix3<f64>>> = grid
        .p
        .iter()
        .map(|row| row.iter().map(|p| *p.inverse().matrix()).collect())
        .collect();
    try_map_indexed(ns1, exec, |m| {
        let stencil = derivative_stencil(m, ns1, Boundary::OneSided)?;
        Ok((0..=grid.n_t)
            .map(|j| {
                let mut d = Matrix3::zeros();
                for &(idx, w) in &stencil {
                    d += q[idx][j] * w;
                }
                d /= h_s;
                // right translation by q^-1 = p
                AlgebraElement::from_matrix(grid.group(), &(d * grid.p[m][j].matrix()))
            })
            .collect())
    })
}

fn accumulate_in_s<T: Copy>(
    grid: &FloquetFactorGrid,
    inner: &[T],
    s_idx: usize,
    zero: T,
    axpy: impl Fn(T, f64, T) -> T,
) -> T {
    let h_s = grid.s_grid[1] - grid.s_grid[0];
    composite_weights(s_idx, h_s)
        .iter()
        .enumerate()
        .fold(zero, |acc, (m, w)| axpy(acc, *w, inner[m]))
}

/// `k_geom(s_i)` for every node of the s-grid.
pub fn geometric_phase_all(
    grid: &FloquetFactorGrid,
    exec: Execution,
) -> Result<Vec<AlgebraElement>> {
    let du = du_p_inv(grid, exec)?;
    let inner: Vec<AlgebraElement> = map_indexed(grid.s_grid.len(), exec, |m| {
        let w = simpson_weights(grid.n_t, grid.step(m));
        let mut acc = AlgebraElement::zero(grid.group());
        for (j, wj) in w.iter().enumerate() {
            acc = acc
                + du[m][j]
                    .commutator(&analytic_dt_p_inv(grid, m, j))
                    .scale(*wj);
        }
        acc
    });
    let zero = AlgebraElement::zero(grid.group());
    Ok((0..grid.s_grid.len())
        .map(|i| accumulate_in_s(grid, &inner, i, zero, |acc, w, x| acc + x.scale(w)))
        .collect())
}

pub fn geometric_phase(grid: &FloquetFactorGrid, s_idx: usize) -> Result<AlgebraElement> {
    Ok(geometric_phase_all(grid, Execution::default())?[s_idx])
}

/// Inner `t`-integral of the pulled-back Kirillov form on row `m`.
fn surface_row(
    mu: &CoalgebraElement,
    grid: &FloquetFactorGrid,
    du: &[Vec<AlgebraElement>],
    m: usize,
) -> f64 {
    let w = simpson_weights(grid.n_t, grid.step(m));
    w.iter()
        .enumerate()
        .map(|(j, wj)| {
            let p = &grid.p[m][j];
            let f = p.coadjoint(mu);
            let du_p = -p.adjoint(&du[m][j]);
            let dt_p = analytic_dt_p(grid, m, j);
            wj * crate::lie::kirillov(&f, &du_p, &dt_p).expect("one group throughout the grid")
        })
        .sum()
}

/// Surface integrals for the three basis covectors, at every node of the
/// s-grid.
fn surface_basis_with(
    grid: &FloquetFactorGrid,
    du: &[Vec<AlgebraElement>],
    exec: Execution,
) -> Vec<[f64; 3]> {
    let group = grid.group();
    let inner: Vec<[f64; 3]> = map_indexed(grid.s_grid.len(), exec, |m| {
        [0, 1, 2].map(|i| surface_row(&CoalgebraElement::basis(group, i), grid, du, m))
    });
    (0..grid.s_grid.len())
        .map(|s_idx| {
            accumulate_in_s(grid, &inner, s_idx, [0.0; 3], |acc, w, x| {
                [0, 1, 2].map(|i| acc[i] + w * x[i])
            })
        })
        .collect()
}

/// Integral of the pulled-back Kirillov form `F* omega` over the cylinder
/// `[0, s] x [0, T]` with orientation `du ^ dt`, where
/// `F(u, t) = Ad*_{p^-1(u,t)} mu`.
pub fn geometric_phase_surface(
    mu: &CoalgebraElement,
    grid: &FloquetFactorGrid,
    s_idx: usize,
) -> Result<f64> {
    let du = du_p_inv(grid, Execution::default())?;
    let inner: Vec<f64> = (0..grid.s_grid.len())
        .map(|m| surface_row(mu, grid, &du, m))
        .collect();
    Ok(accumulate_in_s(grid, &inner, s_idx, 0.0, |acc, w, x| {
        acc + w * x
    }))
}

/// Surface integrals for the basis covectors `e_i*` at every node of the
/// s-grid. The integral is linear in the covector, so
/// `sum_i mu_i S[s][i]` equals [`geometric_phase_surface`] for `mu`.
pub fn geometric_phase_surface_all(
    grid: &FloquetFactorGrid,
    exec: Execution,
) -> Result<Vec<[f64; 3]>> {
    let du = du_p_inv(grid, exec)?;
    Ok(surface_basis_with(grid, &du, exec))
}

/// `max |d_s D_t sigma - d_t D_s sigma + [D_t sigma, D_s sigma]|` over
/// interior nodes of a two-parameter grid `sigma[i][j] = sigma(s_i, t_j)`.
pub fn zero_curvature_residual(
    sigma: &[Vec<crate::lie::GroupElement>],
    h_s: f64,
    h_t: f64,
) -> Result<f64> {
    let ns1 = sigma.len();
    let nt1 = sigma.first().map_or(0, |r| r.len());
    if ns1 < 5 || nt1 < 5 {
        return Err(FloquetError::Resolution(format!(
            "zero-curvature stencils need a 5x5 grid, got {ns1}x{nt1}"
        )));
    }
    let dt: Vec<Vec<AlgebraElement>> = sigma
        .iter()
        .map(|row| {
            (0..nt1)
                .map(|j| right_log_derivative(row, h_t, j, Boundary::OneSided))
                .collect::<Result<_>>()
        })
        .collect::<Result<_>>()?;
    let mut ds = vec![Vec::with_capacity(nt1); ns1];
    for j in 0..nt1 {
        let column: Vec<_> = sigma.iter().map(|row| row[j]).collect();
        for (i, out) in ds.iter_mut().enumerate() {
            out.push(right_log_derivative(&column, h_s, i, Boundary::OneSided)?);
        }
    }
    let mut worst: f64 = 0.0;
    for i in 2..ns1 - 2 {
        let si = derivative_stencil(i, ns1, Boundary::Error)?;
        for j in 2..nt1 - 2 {
            let tj = derivative_stencil(j, nt1, Boundary::Error)?;
            let ds_dt = si
                .iter()
                .fold(nalgebra::Vector3::zeros(), |acc, &(idx, w)| {
                    acc + dt[idx][j].coords() * w
                })
                / h_s;
            let dt_ds = tj
                .iter()
                .fold(nalgebra::Vector3::zeros(), |acc, &(idx, w)| {
                    acc + ds[i][idx].coords() * w
                })
                / h_t;
            let br = dt[i][j].commutator(&ds[i][j]);
            worst = worst.max((ds_dt - dt_ds + br.coords()).norm());
        }
    }
    Ok(worst)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Tolerances {
    pub drift: f64,
    pub splitting: f64,
    pub periodicity: f64,
    pub branch_jump: f64,
}

impl Default for Tolerances {
    fn default() -> Self {
        Tolerances {
            drift: DEFAULT_DRIFT_TOLERANCE,
            splitting: DEFAULT_SPLITTING_TOLERANCE,
            periodicity: DEFAULT_PERIODICITY_TOLERANCE,
            branch_jump: DEFAULT_BRANCH_JUMP,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PhaseConfig {
    pub n_t: usize,
    pub n_s: usize,
    pub homotopy: HomotopyKind,
    pub tolerances: Tolerances,
    pub exec: Execution,
}

impl Default for PhaseConfig {
    fn default() -> Self {
        PhaseConfig {
            n_t: 256,
            n_s: 64,
            homotopy: HomotopyKind::LinearScale,
            tolerances: Tolerances::default(),
            exec: Execution::default(),
        }
    }
}

/// Phases at one node of the s-grid.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SweepRow {
    pub s: f64,
    pub period: f64,
    pub k: AlgebraElement,
    pub k_dyn: AlgebraElement,
    pub k_geom: AlgebraElement,
    pub splitting_residual: f64,
    pub periodicity_residual: f64,
}

#[derive(Debug, Clone)]
pub struct PhaseReport {
    pub k: AlgebraElement,
    pub k_dyn: AlgebraElement,
    pub k_geom: AlgebraElement,
    pub splitting_residual: f64,
    /// Zero-curvature residual of `p` in normalized time `t / T(s)`.
    pub curvature_residual: f64,
    pub periodicity_residual: f64,
    pub max_drift: f64,
    /// `|<e_i*, k_geom> - surface integral|` per basis covector.
    pub surface_check: [f64; 3],
    pub homotopy_kind: HomotopyKind,
    pub homotopy_provenance: String,
    /// How `k(s)` was chosen, and how other branches of `k(1)` arise.
    pub k_rule: String,
    pub branch_rule: String,
    pub n_t: usize,
    pub n_s: usize,
    pub rows: Vec<SweepRow>,
}

/// Everything computed by the phase pipeline.
#[derive(Debug, Clone)]
pub struct PhaseAnalysis {
    pub report: PhaseReport,
    pub monodromy: MonodromyReport,
    pub solution: FamilySolution,
    pub factor: FloquetFactorGrid,
}

/// Runs the pipeline on an explicit family: solve every row, continue the
/// log branch from `k(0) = 0`, factor, and split the phases at every node.
pub fn analyze_family(family: &HomotopyFamily, config: &PhaseConfig) -> Result<PhaseAnalysis> {
    let tol = &config.tolerances;
    let solution = solve_family_with(family, config.n_s, config.n_t, tol.drift, config.exec)?;
    let monodromies = solution.monodromies();
    let continuation = ContinuationOptions {
        branch_jump: tol.branch_jump,
        log: LogOptions::default(),
    };
    let k_of_s = continue_log_branch_with(&monodromies, &solution.s_grid, &continuation)?;
    let factor = floquet_factor(&solution, &k_of_s, tol.periodicity, config.exec)?;

    let k_dyn: Vec<AlgebraElement> = map_indexed(factor.s_grid.len(), config.exec, |i| {
        dynamic_phase(&factor, i)
    });
    let du = du_p_inv(&factor, config.exec)?;
    let k_geom = geometric_phase_all(&factor, config.exec)?;

    let rows: Vec<SweepRow> = (0..factor.s_grid.len())
        .map(|i| SweepRow {
            s: factor.s_grid[i],
            period: factor.periods[i],
            k: k_of_s[i],
            k_dyn: k_dyn[i],
            k_geom: k_geom[i],
            splitting_residual: (k_of_s[i] - k_dyn[i] - k_geom[i]).norm(),
            periodicity_residual: factor.row_periodicity[i],
        })
        .collect();
    let last = config.n_s;
    let group = family.group();
    let surface = surface_basis_with(&factor, &du, config.exec);
    let surface_check = [0, 1, 2].map(|i| {
        let mu = CoalgebraElement::basis(group, i);
        (mu.pair(&k_geom[last]) - surface[last][i]).abs()
    });
    let normalized_t = 1.0 / config.n_t as f64;
    let curvature_residual = zero_curvature_residual(&factor.p, factor.s_grid[1], normalized_t)?;
    let monodromy = monodromy_of(&monodromies[last])?;
    let max_drift = solution
        .rows
        .iter()
        .map(|r| r.stats.max_drift)
        .fold(0.0, f64::max);

    let report = PhaseReport {
        k: k_of_s[last],
        k_dyn: k_dyn[last],
        k_geom: k_geom[last],
        splitting_residual: rows[last].splitting_residual,
        curvature_residual,
        periodicity_residual: factor.periodicity_residual,
        max_drift,
        surface_check,
        homotopy_kind: family.kind(),
        homotopy_provenance: family.provenance().to_string(),
        k_rule: "continuation from k(0) = 0 along the s-grid (nearest logarithm)".into(),
        branch_rule: monodromy.log.branch_rule.describe(),
        n_t: config.n_t,
        n_s: config.n_s,
        rows,
    };
    Ok(PhaseAnalysis {
        report,
        monodromy,
        solution,
        factor,
    })
}

/// End-to-end splitting `k = k_dyn + k_geom` for a single system.
///
/// The linear family `s phi` always runs first; its successful continuation
/// supplies `k` and shows that the Floquet loop is contractible. With
/// [`HomotopyKind::Geodesic`] the phases are then recomputed on the geodesic
/// contraction of that loop.
pub fn split_phases(phi: &PeriodicCurve, config: &PhaseConfig) -> Result<PhaseAnalysis> {
    let linear = analyze_family(&build_linear_homotopy(phi), config)?;
    match config.homotopy {
        HomotopyKind::LinearScale => Ok(linear),
        HomotopyKind::Geodesic => {
            let fine = solve_fundamental_with(phi, 2 * config.n_t, config.tolerances.drift)?;
            let family = build_geodesic_homotopy(&fine, &linear.report.k)?;
            analyze_family(&family, config)
        }
        HomotopyKind::UserSupplied => Err(FloquetError::InvalidInput(
            "user-supplied families go through analyze_family".into(),
        )),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lie::GroupElement;
    use std::f64::consts::PI;

    fn small_config() -> PhaseConfig {
        PhaseConfig {
            n_t: 64,
            n_s: 16,
            ..PhaseConfig::default()
        }
    }

    #[test]
    fn zero_and_constant_curves() {
        let zero = split_phases(&PeriodicCurve::zero(GroupId::So3), &small_config()).unwrap();
        assert_eq!(zero.report.k.norm(), 0.0);
        assert_eq!(zero.report.k_dyn.norm(), 0.0);
        assert_eq!(zero.report.k_geom.norm(), 0.0);

        let a = AlgebraElement::new(GroupId::So3, [0.1, 0.2, -0.15]);
        let r = split_phases(&PeriodicCurve::constant(a, 2.0 * PI), &small_config())
            .unwrap()
            .report;
        assert!(r.k.distance(&a.scale(2.0 * PI)) < 1e-12);
        assert!(r.k_dyn.distance(&a.scale(2.0 * PI)) < 1e-12);
        assert!(r.k_geom.norm() < 1e-12);
    }

    #[test]
    fn linear_family_slices() {
        let a = AlgebraElement::new(GroupId::Sl2r, [0.3, 0.0, 0.5]);
        let fam = build_linear_homotopy(&PeriodicCurve::constant(a, 2.0 * PI));
        let RowDriver::Curve(first) = fam.row_spec(0, 8, 8).unwrap().driver else {
            panic!("linear rows are curves")
        };
        assert_eq!(first.evaluate(1.0).norm(), 0.0);
        let RowDriver::Curve(last) = fam.row_spec(8, 8, 8).unwrap().driver else {
            panic!("linear rows are curves")
        };
        assert_eq!(&last, fam.base_curve().unwrap());
    }

    #[test]
    fn geodesic_family_of_identity_loop_is_constant_in_t() {
        let a = AlgebraElement::new(GroupId::So3, [0.0, 0.3, 0.2]);
        let sol = solve_fundamental_with(&PeriodicCurve::constant(a, 2.0 * PI), 32, 1e-9).unwrap();
        let k = a.scale(2.0 * PI);
        let fam = build_geodesic_homotopy(&sol, &k).unwrap();
        let RowDriver::HalfNodes(half) = fam.row_spec(4, 8, 16).unwrap().driver else {
            panic!("geodesic rows are tabulated")
        };
        for x in half {
            assert!(x.distance(&a.scale(0.5)) < 1e-12);
        }
    }

    #[test]
    fn zero_curvature_vanishes_for_constant_grids() {
        let g = AlgebraElement::new(GroupId::So3, [0.3, 0.1, 0.2]).exp();
        let grid = vec![vec![g; 9]; 9];
        assert_eq!(zero_curvature_residual(&grid, 0.1, 0.1).unwrap(), 0.0);
    }

    #[test]
    fn geometric_phase_needs_nine_s_nodes() {
        let cfg = PhaseConfig {
            n_t: 16,
            n_s: 4,
            ..PhaseConfig::default()
        };
        let curve = PeriodicCurve::constant(AlgebraElement::basis(GroupId::So3, 0), 2.0 * PI);
        assert!(matches!(
            split_phases(&curve, &cfg),
            Err(FloquetError::Resolution(_))
        ));
        let _ = GroupElement::identity(GroupId::So3);
    }
}
