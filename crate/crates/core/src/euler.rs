//! Linear Euler systems on the algebra and its dual, and reconstruction
//! phases of the free rigid body.
//!
//! The rigid body moves on a sphere `|xi| = r` in `so(3)*` by
//! `xi' = -ad*_{dh/dxi} xi`. We use the Hamiltonian
//! `h(xi) = 1/2 sum xi_i^2 / I_i - |xi|^2 / (2 I_3)`, i.e. the kinetic energy
//! shifted by a Casimir. The shift changes no trajectory but makes the
//! gradient vanish at the rest point on the `I_3` axis, so the family of
//! coefficient curves `phi(s, t) = dh/dxi (xi_s(t))` starts at zero.

use std::f64::consts::PI;

use nalgebra::Vector3;

use crate::error::{FloquetError, Result};
use crate::fd::simpson_weights;
use crate::integrator::{solve_fundamental, FourierCoefficients, PeriodicCurve};
use crate::lie::{AlgebraElement, CoalgebraElement, GroupId};
use crate::parallel::{try_map_indexed, Execution};
use crate::phases::{
    analyze_family, geometric_phase_surface_all, HomotopyFamily, HomotopyKind, PhaseAnalysis,
    PhaseConfig, Tolerances,
};

/// Samples of a trajectory together with its conserved quantities.
#[derive(Debug, Clone)]
pub struct EulerTrajectory {
    pub t_grid: Vec<f64>,
    pub points: Vec<Vector3<f64>>,
    pub casimir: Vec<f64>,
    /// Energy along the trajectory; empty for non-autonomous flows.
    pub energy: Vec<f64>,
}

fn spread(values: &[f64]) -> f64 {
    let (lo, hi) = values
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), v| {
            (lo.min(*v), hi.max(*v))
        });
    if values.is_empty() {
        0.0
    } else {
        hi - lo
    }
}

impl EulerTrajectory {
    pub fn casimir_drift(&self) -> f64 {
        spread(&self.casimir)
    }

    pub fn energy_drift(&self) -> f64 {
        spread(&self.energy)
    }
}

/// Invariant of the (co)adjoint action: `|v|` on so(3), and
/// `v_1^2 + v_2^2 - v_3^2` on sl(2,R) in the fixed coordinates.
pub fn casimir(group: GroupId, v: &Vector3<f64>) -> f64 {
    match group {
        GroupId::So3 => v.norm(),
        GroupId::Sl2r => v[0] * v[0] + v[1] * v[1] - v[2] * v[2],
    }
}

/// `x(t) = Ad_{f(t)} x0`.
pub fn linear_euler_flow(
    phi: &PeriodicCurve,
    x0: &AlgebraElement,
    n_t: usize,
) -> Result<EulerTrajectory> {
    crate::lie::ensure_same(phi.group(), x0.group())?;
    let sol = solve_fundamental(phi, n_t)?;
    let points: Vec<Vector3<f64>> = sol.values.iter().map(|f| *f.adjoint(x0).coords()).collect();
    Ok(EulerTrajectory {
        t_grid: sol.t_grid(),
        casimir: points.iter().map(|p| casimir(phi.group(), p)).collect(),
        points,
        energy: Vec::new(),
    })
}

/// `xi(t) = Ad*_{f(t)^-1} xi0`, the flow of `xi' = -ad*_phi xi`.
pub fn coadjoint_euler_flow(
    phi: &PeriodicCurve,
    xi0: &CoalgebraElement,
    n_t: usize,
) -> Result<EulerTrajectory> {
    crate::lie::ensure_same(phi.group(), xi0.group())?;
    let sol = solve_fundamental(phi, n_t)?;
    let points: Vec<Vector3<f64>> = sol
        .values
        .iter()
        .map(|f| *f.coadjoint(xi0).coords())
        .collect();
    Ok(EulerTrajectory {
        t_grid: sol.t_grid(),
        casimir: points.iter().map(|p| casimir(phi.group(), p)).collect(),
        points,
        energy: Vec::new(),
    })
}

/// Turns Fourier coefficients of the matrix entries `[[a1, a2], [a3, -a1]]`
/// into an sl(2,R) curve in the coordinates `w = (2 a1, -a2 - a3, a2 - a3)`,
/// in which the Euler flow reads `x' = diag(1, 1, -1) (w x x)`.
pub fn sl2_euler_coords(entries: &FourierCoefficients, period: f64) -> Result<PeriodicCurve> {
    let map = |a: &[Vec<f64>; 3]| -> [Vec<f64>; 3] {
        let n = a.iter().map(Vec::len).max().unwrap_or(0);
        let get = |i: usize, k: usize| a[i].get(k).copied().unwrap_or(0.0);
        [
            (0..n).map(|k| 2.0 * get(0, k)).collect(),
            (0..n).map(|k| -get(1, k) - get(2, k)).collect(),
            (0..n).map(|k| get(1, k) - get(2, k)).collect(),
        ]
    };
    PeriodicCurve::fourier(
        GroupId::Sl2r,
        period,
        FourierCoefficients {
            cos: map(&entries.cos),
            sin: map(&entries.sin),
        },
    )
}

/// `phi(t) = eps cos t e_1 + eps sin t e_2 + c e_3`, a field of constant
/// strength rotating about the third axis with unit frequency.
pub fn rotating_field_curve(group: GroupId, eps: f64, c: f64) -> PeriodicCurve {
    PeriodicCurve::fourier(
        group,
        2.0 * PI,
        FourierCoefficients {
            cos: [vec![0.0, eps], vec![0.0], vec![c]],
            sin: [vec![0.0], vec![0.0, eps], vec![0.0]],
        },
    )
    .expect("finite coefficients")
}

/// Free rigid body with principal moments `inertia`, the last one largest.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RigidBody {
    pub inertia: [f64; 3],
}

impl RigidBody {
    pub fn new(inertia: [f64; 3]) -> Result<Self> {
        if inertia.iter().any(|i| !(i.is_finite() && *i > 0.0)) {
            return Err(FloquetError::InvalidInput(
                "principal moments must be positive".into(),
            ));
        }
        let [i1, i2, i3] = inertia;
        let spherical = i1 == i2 && i2 == i3;
        if !spherical && !(i3 > i1 && i3 > i2) {
            return Err(FloquetError::InvalidInput(
                "the third principal moment must be the strictly largest one (stable axis)".into(),
            ));
        }
        Ok(RigidBody { inertia })
    }

    pub fn is_spherical(&self) -> bool {
        self.inertia[0] == self.inertia[1] && self.inertia[1] == self.inertia[2]
    }

    /// Kinetic energy `1/2 sum xi_i^2 / I_i`.
    pub fn kinetic_energy(&self, xi: &Vector3<f64>) -> f64 {
        0.5 * (0..3).map(|i| xi[i] * xi[i] / self.inertia[i]).sum::<f64>()
    }

    /// Casimir-shifted energy used as the Hamiltonian of the family.
    pub fn energy(&self, xi: &Vector3<f64>) -> f64 {
        self.kinetic_energy(xi) - 0.5 * xi.norm_squared() / self.inertia[2]
    }

    /// `dh/dxi`.
    pub fn gradient(&self, xi: &Vector3<f64>) -> Vector3<f64> {
        let c = 1.0 / self.inertia[2];
        Vector3::new(
            xi[0] * (1.0 / self.inertia[0] - c),
            xi[1] * (1.0 / self.inertia[1] - c),
            0.0,
        )
    }

    /// `xi' = -ad*_{dh/dxi} xi = dh/dxi x xi`.
    pub fn rhs(&self, xi: &Vector3<f64>) -> Vector3<f64> {
        self.gradient(xi).cross(xi)
    }

    /// Frequency of small oscillations about the rest point `(0, 0, r)`.
    pub fn linear_frequency(&self, r: f64) -> f64 {
        let c = 1.0 / self.inertia[2];
        r * ((1.0 / self.inertia[0] - c) * (1.0 / self.inertia[1] - c)).sqrt()
    }

    fn rk4(&self, xi: &Vector3<f64>, h: f64) -> Vector3<f64> {
        let k1 = self.rhs(xi);
        let k2 = self.rhs(&(xi + k1 * (0.5 * h)));
        let k3 = self.rhs(&(xi + k2 * (0.5 * h)));
        let k4 = self.rhs(&(xi + k3 * h));
        xi + (k1 + (k2 + k3) * 2.0 + k4) * (h / 6.0)
    }
}

/// Steps per linear period used while searching for the return time.
const DETECTION_STEPS: f64 = 8192.0;
/// Longest integration substep used when sampling orbits.
const MAX_SUBSTEP: f64 = 2e-3;
/// Orbit search gives up after this many linear periods.
const MAX_PERIODS: f64 = 50.0;
const CLOSURE_TOLERANCE: f64 = 1e-8;

/// Return time of the orbit through `xi0` (with `xi0_y = 0`, `xi0_x > 0`) to
/// the half-plane `y = 0, x > 0`. The flow leaves the plane towards `y < 0`
/// and comes back from `y > 0`; the crossing step is located by Hermite
/// interpolation and polished by Newton iteration on the step length.
fn return_time(body: &RigidBody, xi0: &Vector3<f64>, t_lin: f64, s: f64) -> Result<f64> {
    let h = t_lin / DETECTION_STEPS;
    let t_max = MAX_PERIODS * t_lin;
    let mut t = 0.0;
    let mut x = *xi0;
    loop {
        let next = body.rk4(&x, h);
        if x[1] > 0.0 && next[1] <= 0.0 && next[0] > 0.0 {
            let (y0, y1) = (x[1], next[1]);
            let (d0, d1) = (body.rhs(&x)[1] * h, body.rhs(&next)[1] * h);
            // cubic Hermite on [0, 1]
            let cubic = |u: f64| {
                let u2 = u * u;
                let u3 = u2 * u;
                (2.0 * u3 - 3.0 * u2 + 1.0) * y0
                    + (u3 - 2.0 * u2 + u) * d0
                    + (-2.0 * u3 + 3.0 * u2) * y1
                    + (u3 - u2) * d1
            };
            let dcubic = |u: f64| {
                let u2 = u * u;
                (6.0 * u2 - 6.0 * u) * y0
                    + (3.0 * u2 - 4.0 * u + 1.0) * d0
                    + (-6.0 * u2 + 6.0 * u) * y1
                    + (3.0 * u2 - 2.0 * u) * d1
            };
            let mut u = y0 / (y0 - y1);
            for _ in 0..20 {
                let du = cubic(u) / dcubic(u);
                u = (u - du).clamp(0.0, 1.0);
                if du.abs() < 1e-15 {
                    break;
                }
            }
            let mut tau = u * h;
            for _ in 0..20 {
                let at = body.rk4(&x, tau);
                let dtau = at[1] / body.rhs(&at)[1];
                tau -= dtau;
                if dtau.abs() < 1e-16 * t_lin {
                    break;
                }
            }
            let at = body.rk4(&x, tau);
            if at[1].abs() > 1e-10 {
                return Err(FloquetError::OrbitDetection {
                    s,
                    reason: format!("section residual {:.3e} after refinement", at[1].abs()),
                });
            }
            return Ok(t + tau);
        }
        x = next;
        t += h;
        if t > t_max {
            return Err(FloquetError::OrbitDetection {
                s,
                reason: format!("no return to the section within {t_max:.3} time units"),
            });
        }
    }
}

/// Family of closed rigid-body orbits on the sphere of radius `r`, starting
/// at the polar angles `theta = s * theta_max` from the `I_3` axis.
#[derive(Debug, Clone)]
pub struct RigidBodyFamily {
    pub body: RigidBody,
    pub orbit_radius: f64,
    pub theta_max: f64,
    pub s_grid: Vec<f64>,
    pub n_t: usize,
    pub periods: Vec<f64>,
    pub base_points: Vec<CoalgebraElement>,
    /// Orbits sampled at the `2 N_t + 1` half-step nodes of `[0, T(s)]`.
    pub orbits: Vec<EulerTrajectory>,
    /// `|xi_s(T(s)) - xi_s(0)|`.
    pub closure: Vec<f64>,
    /// Spherical body: every point is an equilibrium.
    pub degenerate: bool,
}

impl RigidBodyFamily {
    pub fn homotopy(&self) -> Result<HomotopyFamily> {
        let rows = self
            .orbits
            .iter()
            .map(|orbit| {
                orbit
                    .points
                    .iter()
                    .map(|xi| AlgebraElement::from_coords(GroupId::So3, self.body.gradient(xi)))
                    .collect()
            })
            .collect();
        HomotopyFamily::tabulated(
            GroupId::So3,
            self.periods.clone(),
            rows,
            format!(
                "rigid body I = {:?}, r = {}, xi0(s) at polar angle s*{} from the I_3 axis",
                self.body.inertia, self.orbit_radius, self.theta_max
            ),
        )
    }

    pub fn casimir_drift(&self) -> f64 {
        self.orbits
            .iter()
            .map(EulerTrajectory::casimir_drift)
            .fold(0.0, f64::max)
    }

    pub fn energy_drift(&self) -> f64 {
        self.orbits
            .iter()
            .map(EulerTrajectory::energy_drift)
            .fold(0.0, f64::max)
    }

    pub fn max_closure(&self) -> f64 {
        self.closure.iter().cloned().fold(0.0, f64::max)
    }
}

pub fn rigid_body_family(
    inertia: [f64; 3],
    orbit_radius: f64,
    theta_max: f64,
    n_s: usize,
    n_t: usize,
    exec: Execution,
) -> Result<RigidBodyFamily> {
    let body = RigidBody::new(inertia)?;
    if !(orbit_radius > 0.0 && orbit_radius.is_finite()) {
        return Err(FloquetError::InvalidInput(
            "orbit radius must be positive".into(),
        ));
    }
    if !(theta_max > 0.0 && theta_max < 0.5 * PI) {
        return Err(FloquetError::InvalidInput(
            "theta_max must lie in (0, pi/2)".into(),
        ));
    }
    if n_s < 1 || n_t < 8 || n_t % 2 != 0 {
        return Err(FloquetError::InvalidInput(
            "need N_s >= 1 and even N_t >= 8".into(),
        ));
    }
    let s_grid: Vec<f64> = (0..=n_s).map(|i| i as f64 / n_s as f64).collect();
    let degenerate = body.is_spherical();
    let t_lin = if degenerate {
        2.0 * PI
    } else {
        2.0 * PI / body.linear_frequency(orbit_radius)
    };

    let rows = try_map_indexed(n_s + 1, exec, |i| {
        let s = s_grid[i];
        let theta = s * theta_max;
        let xi0 = orbit_radius * Vector3::new(theta.sin(), 0.0, theta.cos());
        let period = if degenerate || i == 0 {
            t_lin
        } else {
            return_time(&body, &xi0, t_lin, s)?
        };
        let n_half = 2 * n_t;
        let dt = period / n_half as f64;
        let sub = (dt / MAX_SUBSTEP).ceil().max(1.0) as usize;
        let h = dt / sub as f64;
        let mut points = Vec::with_capacity(n_half + 1);
        let mut x = xi0;
        points.push(x);
        for _ in 0..n_half {
            for _ in 0..sub {
                x = body.rk4(&x, h);
            }
            points.push(x);
        }
        let closure = (x - xi0).norm();
        if !(closure <= CLOSURE_TOLERANCE) {
            return Err(FloquetError::OrbitDetection {
                s,
                reason: format!("orbit does not close: |xi(T) - xi(0)| = {closure:.3e}"),
            });
        }
        let trajectory = EulerTrajectory {
            t_grid: (0..=n_half).map(|j| j as f64 * dt).collect(),
            casimir: points.iter().map(|p| p.norm()).collect(),
            energy: points.iter().map(|p| body.kinetic_energy(p)).collect(),
            points,
        };
        Ok((
            period,
            CoalgebraElement::from_coords(GroupId::So3, xi0),
            trajectory,
            closure,
        ))
    })?;

    let mut fam = RigidBodyFamily {
        body,
        orbit_radius,
        theta_max,
        s_grid,
        n_t,
        periods: Vec::with_capacity(n_s + 1),
        base_points: Vec::with_capacity(n_s + 1),
        orbits: Vec::with_capacity(n_s + 1),
        closure: Vec::with_capacity(n_s + 1),
        degenerate,
    };
    for (period, xi0, orbit, closure) in rows {
        fam.periods.push(period);
        fam.base_points.push(xi0);
        fam.orbits.push(orbit);
        fam.closure.push(closure);
    }
    Ok(fam)
}

/// Signed Kirillov area enclosed by the orbit `gamma_s` around the rest
/// point, `r * oint (1 - cos Theta) dPhi` in spherical angles about the
/// `I_3` axis, traversed in the direction of the flow. Orbits traversed
/// clockwise seen from the rest point give negative areas.
///
/// The angular speed `Phi'` comes from the equations of motion, and the
/// periodic trapezoid rule makes the sum spectrally accurate.
pub fn spherical_area_oracle(fam: &RigidBodyFamily, s_idx: usize) -> Result<f64> {
    if fam.degenerate || s_idx == 0 {
        return Ok(0.0);
    }
    let orbit = &fam.orbits[s_idx];
    let r = fam.orbit_radius;
    let n = orbit.points.len() - 1;
    let h = fam.periods[s_idx] / n as f64;
    let mut sum = 0.0;
    let mut sign = 0.0;
    for xi in &orbit.points[..n] {
        let v = fam.body.rhs(xi);
        let rho2 = xi[0] * xi[0] + xi[1] * xi[1];
        if rho2 < 1e-24 {
            return Err(FloquetError::OracleUnavailable(
                "orbit passes through the pole".into(),
            ));
        }
        let dphi = (xi[0] * v[1] - xi[1] * v[0]) / rho2;
        if sign == 0.0 {
            sign = dphi.signum();
        } else if dphi.signum() != sign {
            return Err(FloquetError::OracleUnavailable(
                "azimuth is not monotone along the orbit".into(),
            ));
        }
        sum += (1.0 - xi[2] / xi.norm()) * dphi * h;
    }
    Ok(r * sum)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ReconstructionRow {
    pub s: f64,
    pub period: f64,
    pub k: AlgebraElement,
    pub k_dyn: AlgebraElement,
    pub k_geom: AlgebraElement,
    /// `<xi0_s, k_dyn>`.
    pub dyn_pairing: f64,
    /// `<xi0_s, k_geom>`.
    pub geom_pairing: f64,
    /// `int_0^T <xi_s(t), dh/dxi> dt`.
    pub rec1: f64,
    /// Symplectic area of the swept surface, from the surface integral.
    pub rec2: f64,
    /// `2 T(s) h(xi0_s)`.
    pub rec3: f64,
    /// Independent spherical-area value, when available.
    pub oracle: Option<f64>,
    /// `|Ad*_{m(s)} xi0_s - xi0_s|`.
    pub isotropy: f64,
    /// `max_t |Ad*_{p^-1(s,t)} xi0_s - xi_s(t)|`.
    pub factor_orbit_residual: f64,
}

#[derive(Debug, Clone)]
pub struct RigidBodyAnalysis {
    pub rows: Vec<ReconstructionRow>,
    pub phases: PhaseAnalysis,
    pub degenerate: bool,
}

/// Runs the phase pipeline on the family `phi(s, t) = dh/dxi (xi_s(t))`
/// with variable period and evaluates the reconstruction identities at
/// every node.
pub fn reconstruction_phases(
    fam: &RigidBodyFamily,
    tolerances: Tolerances,
    exec: Execution,
) -> Result<RigidBodyAnalysis> {
    let family = fam.homotopy()?;
    let config = PhaseConfig {
        n_t: fam.n_t,
        n_s: fam.s_grid.len() - 1,
        homotopy: HomotopyKind::UserSupplied,
        tolerances,
        exec,
    };
    let phases = analyze_family(&family, &config)?;
    let grid = &phases.factor;
    let surface = geometric_phase_surface_all(grid, exec)?;
    let rows = try_map_indexed(fam.s_grid.len(), exec, |i| {
        let xi0 = fam.base_points[i];
        let sweep = &phases.report.rows[i];
        let period = fam.periods[i];
        let orbit = &fam.orbits[i];
        let w = simpson_weights(fam.n_t, period / fam.n_t as f64);
        let rec1 = w
            .iter()
            .enumerate()
            .map(|(j, wj)| {
                let xi = orbit.points[2 * j];
                wj * xi.dot(&fam.body.gradient(&xi))
            })
            .sum();
        let m = phases.solution.rows[i].monodromy();
        let factor_orbit_residual = (0..=fam.n_t)
            .map(|j| (grid.p[i][j].coadjoint(&xi0).coords() - orbit.points[2 * j]).norm())
            .fold(0.0, f64::max);
        Ok(ReconstructionRow {
            s: fam.s_grid[i],
            period,
            k: sweep.k,
            k_dyn: sweep.k_dyn,
            k_geom: sweep.k_geom,
            dyn_pairing: xi0.pair(&sweep.k_dyn),
            geom_pairing: xi0.pair(&sweep.k_geom),
            rec1,
            rec2: (0..3).map(|k| xi0.coords()[k] * surface[i][k]).sum(),
            rec3: 2.0 * period * fam.body.energy(xi0.coords()),
            oracle: spherical_area_oracle(fam, i).ok(),
            isotropy: (m.coadjoint(&xi0).coords() - xi0.coords()).norm(),
            factor_orbit_residual,
        })
    })?;
    Ok(RigidBodyAnalysis {
        rows,
        phases,
        degenerate: fam.degenerate,
    })
}
