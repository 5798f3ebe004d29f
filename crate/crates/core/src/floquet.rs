//! Monodromy, reducibility, continuation of the log phase `k(s)` along a
//! family and the periodic Floquet factor `p(s, t) = f(s, t) exp(-t k(s) / T(s))`.

use std::f64::consts::PI;

use nalgebra::Vector3;

use crate::error::{FloquetError, Result};
use crate::integrator::{FamilySolution, FundamentalSolution};
use crate::lie::{
    log_group_with, AlgebraElement, GroupElement, GroupId, LogOptions, LogResult, LogStatus,
};
use crate::parallel::{try_map_indexed, Execution};

pub const DEFAULT_BRANCH_JUMP: f64 = 0.5;
pub const DEFAULT_PERIODICITY_TOLERANCE: f64 = 1e-8;

/// Number of full turns tried on each side of the principal logarithm.
const BRANCH_TURNS: i32 = 2;

#[derive(Debug, Clone)]
pub struct MonodromyReport {
    pub m: GroupElement,
    pub log: LogResult,
    pub reducible: bool,
    /// Reducibility of the associated linear Euler system `x' = ad_phi x`.
    /// Its monodromy is `Ad_m`, and `Ad_{-I} = id`, so it is reducible
    /// even when `m` itself is not.
    pub adjoint_reducible: bool,
    /// Coordinates `v` with `Ad_m = exp(ad_v)`.
    pub adjoint_log_coords: Vector3<f64>,
}

pub fn monodromy(f: &FundamentalSolution) -> Result<MonodromyReport> {
    monodromy_of(&f.monodromy())
}

pub fn monodromy_of(m: &GroupElement) -> Result<MonodromyReport> {
    let log = log_group_with(m, &LogOptions::default())?;
    Ok(MonodromyReport {
        m: *m,
        reducible: log.in_image(),
        adjoint_reducible: true,
        adjoint_log_coords: *log.principal.coords(),
        log,
    })
}

/// Unit rotation generator of `x`: `J` with `exp(2 pi J) = e` and `x`
/// a multiple of `J`. Exists for nonzero SO(3) elements and elliptic
/// SL(2,R) elements.
pub fn rotation_generator(x: &AlgebraElement) -> Option<AlgebraElement> {
    let c = x.coords();
    match x.group() {
        GroupId::So3 => {
            let n = c.norm();
            (n > 1e-12).then(|| x.scale(1.0 / n))
        }
        GroupId::Sl2r => {
            let delta = 0.25 * (c[0] * c[0] + c[1] * c[1] - c[2] * c[2]);
            (delta < -1e-24).then(|| x.scale(1.0 / (-delta).sqrt()))
        }
    }
}

#[derive(Debug, Clone, Copy)]
pub struct ContinuationOptions {
    /// A step is rejected when the chosen branch moves more than
    /// `branch_jump * 2 pi`, or when the runner-up is closer than
    /// `best / branch_jump`.
    pub branch_jump: f64,
    pub log: LogOptions,
}

impl Default for ContinuationOptions {
    fn default() -> Self {
        ContinuationOptions {
            branch_jump: DEFAULT_BRANCH_JUMP,
            log: LogOptions::default(),
        }
    }
}

/// All logarithms of `m` within `BRANCH_TURNS` turns of the principal one,
/// including those along the rotation generator of `previous`, which is the
/// only source of branches when `m` is central.
fn branch_candidates(
    log: &LogResult,
    m: &GroupElement,
    previous: &AlgebraElement,
) -> Vec<AlgebraElement> {
    let mut out = log.candidates(BRANCH_TURNS);
    if let Some(gen) = rotation_generator(previous) {
        for n in -BRANCH_TURNS..=BRANCH_TURNS {
            let c = log.principal + gen.scale(2.0 * PI * n as f64);
            if c.exp().distance(m) <= 1e-8 {
                out.push(c);
            }
        }
    }
    out
}

/// Smooth branch `k(s)` with `exp k(s) = m(s)` and `k(0) = 0`, chosen node by
/// node as the candidate logarithm closest to the previous value.
pub fn continue_log_branch(m_of_s: &[GroupElement], s_grid: &[f64]) -> Result<Vec<AlgebraElement>> {
    continue_log_branch_with(m_of_s, s_grid, &ContinuationOptions::default())
}

pub fn continue_log_branch_with(
    m_of_s: &[GroupElement],
    s_grid: &[f64],
    opts: &ContinuationOptions,
) -> Result<Vec<AlgebraElement>> {
    if m_of_s.is_empty() || m_of_s.len() != s_grid.len() {
        return Err(FloquetError::InvalidInput(
            "monodromy list and s-grid must be non-empty and of equal length".into(),
        ));
    }
    let group = m_of_s[0].group();
    let start = m_of_s[0].distance(&GroupElement::identity(group));
    if start > 1e-10 {
        return Err(FloquetError::InvalidInput(format!(
            "family must start at the identity (distance {start:.3e})"
        )));
    }
    let mut ks = vec![AlgebraElement::zero(group)];
    for (m, &s) in m_of_s.iter().zip(s_grid).skip(1) {
        let log = log_group_with(m, &opts.log)?;
        if log.status == LogStatus::NotInImage {
            return Err(FloquetError::UniformReducibilityViolated { s });
        }
        let prev = *ks.last().expect("seeded with k(0)");
        let mut scored: Vec<(f64, AlgebraElement)> = branch_candidates(&log, m, &prev)
            .into_iter()
            .map(|c| (c.distance(&prev), c))
            .collect();
        scored.sort_by(|a, b| a.0.total_cmp(&b.0));
        let (best, chosen) = scored[0];
        let threshold = opts.branch_jump * 2.0 * PI;
        if best > threshold {
            return Err(FloquetError::BranchJump {
                s,
                jump: best,
                threshold,
            });
        }
        if let Some(&(runner_up, _)) = scored.iter().find(|(_, c)| c.distance(&chosen) > 1e-9) {
            if runner_up < best / opts.branch_jump {
                return Err(FloquetError::BranchAmbiguity { s, best, runner_up });
            }
        }
        ks.push(chosen);
    }
    Ok(ks)
}

/// Floquet factor on the family grid.
#[derive(Debug, Clone)]
pub struct FloquetFactorGrid {
    pub s_grid: Vec<f64>,
    /// Period `T(s)` of every row.
    pub periods: Vec<f64>,
    pub n_t: usize,
    /// `p[i][j] = p(s_i, t_j)` with `t_j = j T(s_i) / N_t`.
    pub p: Vec<Vec<GroupElement>>,
    /// `phi(s_i, t_j)` carried over from the family.
    pub phi: Vec<Vec<AlgebraElement>>,
    pub k_of_s: Vec<AlgebraElement>,
    /// `max_s |p(s, T(s)) - p(s, 0)|`.
    pub periodicity_residual: f64,
    pub row_periodicity: Vec<f64>,
}

impl FloquetFactorGrid {
    pub fn n_s(&self) -> usize {
        self.s_grid.len() - 1
    }

    pub fn group(&self) -> GroupId {
        self.p[0][0].group()
    }

    pub fn t(&self, s_idx: usize, t_idx: usize) -> f64 {
        t_idx as f64 * self.periods[s_idx] / self.n_t as f64
    }

    pub fn step(&self, s_idx: usize) -> f64 {
        self.periods[s_idx] / self.n_t as f64
    }
}

/// Builds `p(s, t)` and checks its periodicity in `t` row by row.
pub fn floquet_factor(
    family: &FamilySolution,
    k_of_s: &[AlgebraElement],
    periodicity_tolerance: f64,
    exec: Execution,
) -> Result<FloquetFactorGrid> {
    if k_of_s.len() != family.rows.len() {
        return Err(FloquetError::InvalidInput(format!(
            "{} log phases for {} family rows",
            k_of_s.len(),
            family.rows.len()
        )));
    }
    let rows = try_map_indexed(family.rows.len(), exec, |i| {
        let row = &family.rows[i];
        let period = row.period;
        let k = k_of_s[i];
        let p: Vec<GroupElement> = row
            .values
            .iter()
            .enumerate()
            .map(|(j, f)| *f * k.scale(-row.t(j) / period).exp())
            .collect();
        let residual = p[row.n_t()].distance(&p[0]);
        if !(residual <= periodicity_tolerance) {
            return Err(FloquetError::Factorization {
                s: family.s_grid[i],
                residual,
                tolerance: periodicity_tolerance,
            });
        }
        Ok((p, residual))
    })?;
    let row_periodicity: Vec<f64> = rows.iter().map(|r| r.1).collect();
    Ok(FloquetFactorGrid {
        s_grid: family.s_grid.clone(),
        periods: family.periods(),
        n_t: family.n_t(),
        p: rows.into_iter().map(|r| r.0).collect(),
        phi: family.rows.iter().map(|r| r.phi.clone()).collect(),
        k_of_s: k_of_s.to_vec(),
        periodicity_residual: row_periodicity.iter().cloned().fold(0.0, f64::max),
        row_periodicity,
    })
}

/// `D_t p = phi - Ad_p k / T`, read off the factorization without any
/// differencing in `t`.
pub fn analytic_dt_p(grid: &FloquetFactorGrid, s_idx: usize, t_idx: usize) -> AlgebraElement {
    let k = grid.k_of_s[s_idx].scale(1.0 / grid.periods[s_idx]);
    grid.phi[s_idx][t_idx] - grid.p[s_idx][t_idx].adjoint(&k)
}

/// `D_t p^-1 = k / T - Ad_{p^-1} phi`.
pub fn analytic_dt_p_inv(grid: &FloquetFactorGrid, s_idx: usize, t_idx: usize) -> AlgebraElement {
    let k = grid.k_of_s[s_idx].scale(1.0 / grid.periods[s_idx]);
    k - grid.p[s_idx][t_idx]
        .inverse()
        .adjoint(&grid.phi[s_idx][t_idx])
}
