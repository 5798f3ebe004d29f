//! Matrix Lie group kernels for SO(3) and SL(2,R).
//!
//! Both groups are carried in 3x3 matrices. SO(3) uses its defining
//! representation; SL(2,R) is embedded block-diagonally as `diag(g, 1)` for
//! group elements and `diag(x, 0)` for algebra elements. The embedding is a
//! faithful homomorphism, so products, inverses, conjugations and commutators
//! of the embedded matrices agree with the 2x2 ones. Exponential and logarithm
//! are group specific and operate on the relevant block.
//!
//! Algebra coordinates use fixed bases:
//!
//! * SO(3): the hat basis, `[e_i, e_j] = eps_ijk e_k`, so coordinates are the
//!   usual axis-angle vector.
//! * SL(2,R): coordinates `w = (2 a1, -a2 - a3, a2 - a3)` of the traceless
//!   matrix `[[a1, a2], [a3, -a1]]`. In these coordinates the adjoint action
//!   reads `ad_w x = I (w x x)` with `I = diag(1, 1, -1)`.
//!
//! The dual pairing is the coordinate dot product in the fixed basis, so
//! `ad*_x` is the transpose of `ad_x` and the coadjoint action
//! `Ad*_{g^-1}` is the transpose of `Ad_{g^-1}`.

use std::f64::consts::PI;
use std::fmt;
use std::ops::{Add, Mul, Neg, Sub};
use std::sync::OnceLock;

use nalgebra::{Matrix3, SMatrix, Vector3};
use serde::{Deserialize, Serialize};

use crate::error::{FloquetError, Result};

/// Window around closed-form singularities (SO(3) angle near 0 or pi,
/// SL(2,R) half-trace near +-1) inside which series or symmetric-part
/// formulas are used.
pub const DEFAULT_LOG_WINDOW: f64 = 1e-4;

/// Manifold residual accepted by [`log_group`] before the input is rejected.
pub const DEFAULT_MANIFOLD_TOLERANCE: f64 = 1e-8;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum GroupId {
    #[serde(rename = "SO3")]
    So3,
    #[serde(rename = "SL2R")]
    Sl2r,
}

impl GroupId {
    pub fn context(self) -> &'static LieContext {
        static SO3: OnceLock<LieContext> = OnceLock::new();
        static SL2R: OnceLock<LieContext> = OnceLock::new();
        match self {
            GroupId::So3 => SO3.get_or_init(|| LieContext::build(GroupId::So3)),
            GroupId::Sl2r => SL2R.get_or_init(|| LieContext::build(GroupId::Sl2r)),
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            GroupId::So3 => "SO3",
            GroupId::Sl2r => "SL2R",
        }
    }
}

impl fmt::Display for GroupId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// Static description of a supported group and its algebra.
#[derive(Debug, Clone)]
pub struct LieContext {
    pub group: GroupId,
    /// Dimension of the algebra.
    pub dim: usize,
    /// Size of the defining matrices (3 for SO(3), 2 for SL(2,R)).
    pub matrix_size: usize,
    /// Basis matrices in the 3x3 carrier representation.
    pub basis: [Matrix3<f64>; 3],
    /// `c[i][j][k]` with `[e_i, e_j] = sum_k c[i][j][k] e_k`.
    pub structure_constants: [[[f64; 3]; 3]; 3],
}

impl LieContext {
    fn build(group: GroupId) -> Self {
        let basis = match group {
            GroupId::So3 => [
                Matrix3::new(0.0, 0.0, 0.0, 0.0, 0.0, -1.0, 0.0, 1.0, 0.0),
                Matrix3::new(0.0, 0.0, 1.0, 0.0, 0.0, 0.0, -1.0, 0.0, 0.0),
                Matrix3::new(0.0, -1.0, 0.0, 1.0, 0.0, 0.0, 0.0, 0.0, 0.0),
            ],
            GroupId::Sl2r => [
                Matrix3::new(0.5, 0.0, 0.0, 0.0, -0.5, 0.0, 0.0, 0.0, 0.0),
                Matrix3::new(0.0, -0.5, 0.0, -0.5, 0.0, 0.0, 0.0, 0.0, 0.0),
                Matrix3::new(0.0, 0.5, 0.0, -0.5, 0.0, 0.0, 0.0, 0.0, 0.0),
            ],
        };
        let mut structure_constants = [[[0.0; 3]; 3]; 3];
        for i in 0..3 {
            for j in 0..3 {
                let c = basis[i] * basis[j] - basis[j] * basis[i];
                let coords = project(group, &c);
                structure_constants[i][j] = [coords[0], coords[1], coords[2]];
            }
        }
        LieContext {
            group,
            dim: 3,
            matrix_size: match group {
                GroupId::So3 => 3,
                GroupId::Sl2r => 2,
            },
            basis,
            structure_constants,
        }
    }

    /// Largest violation of antisymmetry or of the Jacobi identity over all
    /// basis triples, evaluated on the structure constants.
    pub fn jacobi_residual(&self) -> f64 {
        let c = &self.structure_constants;
        let mut worst: f64 = 0.0;
        for i in 0..3 {
            for j in 0..3 {
                for k in 0..3 {
                    worst = worst.max((c[i][j][k] + c[j][i][k]).abs());
                }
            }
        }
        for i in 0..3 {
            for j in 0..3 {
                for k in 0..3 {
                    for m in 0..3 {
                        let mut sum = 0.0;
                        for l in 0..3 {
                            sum += c[j][k][l] * c[i][l][m]
                                + c[k][i][l] * c[j][l][m]
                                + c[i][j][l] * c[k][l][m];
                        }
                        worst = worst.max(sum.abs());
                    }
                }
            }
        }
        worst
    }
}

/// Coordinates of a carrier matrix in the fixed algebra basis. Components
/// outside the algebra (symmetric part for SO(3), trace for SL(2,R)) are
/// discarded.
fn project(group: GroupId, m: &Matrix3<f64>) -> Vector3<f64> {
    match group {
        GroupId::So3 => Vector3::new(
            0.5 * (m[(2, 1)] - m[(1, 2)]),
            0.5 * (m[(0, 2)] - m[(2, 0)]),
            0.5 * (m[(1, 0)] - m[(0, 1)]),
        ),
        GroupId::Sl2r => {
            let a1 = 0.5 * (m[(0, 0)] - m[(1, 1)]);
            let a2 = m[(0, 1)];
            let a3 = m[(1, 0)];
            Vector3::new(2.0 * a1, -a2 - a3, a2 - a3)
        }
    }
}

fn assemble(group: GroupId, w: &Vector3<f64>) -> Matrix3<f64> {
    match group {
        GroupId::So3 => Matrix3::new(0.0, -w[2], w[1], w[2], 0.0, -w[0], -w[1], w[0], 0.0),
        GroupId::Sl2r => {
            let a1 = 0.5 * w[0];
            let a2 = 0.5 * (w[2] - w[1]);
            let a3 = -0.5 * (w[1] + w[2]);
            Matrix3::new(a1, a2, 0.0, a3, -a1, 0.0, 0.0, 0.0, 0.0)
        }
    }
}

pub(crate) fn ensure_same(expected: GroupId, found: GroupId) -> Result<()> {
    if expected == found {
        Ok(())
    } else {
        Err(FloquetError::Context { expected, found })
    }
}

/// An element of the Lie algebra, stored both as basis coordinates and as
/// its carrier matrix.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AlgebraElement {
    group: GroupId,
    coords: Vector3<f64>,
    matrix: Matrix3<f64>,
}

impl AlgebraElement {
    pub fn zero(group: GroupId) -> Self {
        Self::from_coords(group, Vector3::zeros())
    }

    pub fn from_coords(group: GroupId, coords: Vector3<f64>) -> Self {
        AlgebraElement {
            group,
            coords,
            matrix: assemble(group, &coords),
        }
    }

    pub fn new(group: GroupId, coords: [f64; 3]) -> Self {
        Self::from_coords(group, Vector3::from(coords))
    }

    /// Basis element `e_i`.
    pub fn basis(group: GroupId, i: usize) -> Self {
        let mut c = Vector3::zeros();
        c[i] = 1.0;
        Self::from_coords(group, c)
    }

    /// Projects a carrier matrix onto the algebra.
    pub fn from_matrix(group: GroupId, m: &Matrix3<f64>) -> Self {
        Self::from_coords(group, project(group, m))
    }

    /// SL(2,R) element `[[a1, a2], [a3, -a1]]`.
    pub fn sl2_from_entries(a1: f64, a2: f64, a3: f64) -> Self {
        Self::from_coords(GroupId::Sl2r, Vector3::new(2.0 * a1, -a2 - a3, a2 - a3))
    }

    pub fn group(&self) -> GroupId {
        self.group
    }

    pub fn coords(&self) -> &Vector3<f64> {
        &self.coords
    }

    pub fn matrix(&self) -> &Matrix3<f64> {
        &self.matrix
    }

    pub fn norm(&self) -> f64 {
        self.coords.norm()
    }

    pub fn scale(&self, a: f64) -> Self {
        Self::from_coords(self.group, self.coords * a)
    }

    /// Matrix commutator `xy - yx`. Panics on mixed groups; use [`bracket`]
    /// for a checked version.
    pub fn commutator(&self, other: &Self) -> Self {
        assert_eq!(
            self.group, other.group,
            "bracket of elements from different groups"
        );
        Self::from_matrix(
            self.group,
            &(self.matrix * other.matrix - other.matrix * self.matrix),
        )
    }

    /// Matrix of `ad_x` acting on coordinates.
    pub fn ad_matrix(&self) -> Matrix3<f64> {
        let c = &self.group.context().structure_constants;
        let mut ad = Matrix3::zeros();
        for j in 0..3 {
            for k in 0..3 {
                let mut v = 0.0;
                for i in 0..3 {
                    v += self.coords[i] * c[i][j][k];
                }
                ad[(k, j)] = v;
            }
        }
        ad
    }

    pub fn exp(&self) -> GroupElement {
        exp_unchecked(self)
    }

    pub fn distance(&self, other: &Self) -> f64 {
        (self.coords - other.coords).norm()
    }
}

impl Add for AlgebraElement {
    type Output = AlgebraElement;
    fn add(self, rhs: Self) -> Self {
        assert_eq!(
            self.group, rhs.group,
            "sum of elements from different groups"
        );
        AlgebraElement::from_coords(self.group, self.coords + rhs.coords)
    }
}

impl Sub for AlgebraElement {
    type Output = AlgebraElement;
    fn sub(self, rhs: Self) -> Self {
        assert_eq!(
            self.group, rhs.group,
            "difference of elements from different groups"
        );
        AlgebraElement::from_coords(self.group, self.coords - rhs.coords)
    }
}

impl Neg for AlgebraElement {
    type Output = AlgebraElement;
    fn neg(self) -> Self {
        AlgebraElement::from_coords(self.group, -self.coords)
    }
}

impl Mul<AlgebraElement> for f64 {
    type Output = AlgebraElement;
    fn mul(self, rhs: AlgebraElement) -> AlgebraElement {
        rhs.scale(self)
    }
}

/// A covector in the dual of the algebra, in the dual basis.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CoalgebraElement {
    group: GroupId,
    coords: Vector3<f64>,
}

impl CoalgebraElement {
    pub fn zero(group: GroupId) -> Self {
        Self::from_coords(group, Vector3::zeros())
    }

    pub fn from_coords(group: GroupId, coords: Vector3<f64>) -> Self {
        CoalgebraElement { group, coords }
    }

    pub fn new(group: GroupId, coords: [f64; 3]) -> Self {
        Self::from_coords(group, Vector3::from(coords))
    }

    /// Dual basis covector `e_i*`.
    pub fn basis(group: GroupId, i: usize) -> Self {
        let mut c = Vector3::zeros();
        c[i] = 1.0;
        Self::from_coords(group, c)
    }

    pub fn group(&self) -> GroupId {
        self.group
    }

    pub fn coords(&self) -> &Vector3<f64> {
        &self.coords
    }

    pub fn norm(&self) -> f64 {
        self.coords.norm()
    }

    pub fn pair(&self, x: &AlgebraElement) -> f64 {
        assert_eq!(self.group, x.group, "pairing across different groups");
        self.coords.dot(&x.coords)
    }
}

/// A group element in the 3x3 carrier representation.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GroupElement {
    group: GroupId,
    matrix: Matrix3<f64>,
}

impl GroupElement {
    pub fn identity(group: GroupId) -> Self {
        GroupElement {
            group,
            matrix: Matrix3::identity(),
        }
    }

    /// Wraps a carrier matrix without validation. For SL(2,R) the matrix must
    /// have the `diag(g, 1)` block form.
    pub fn from_matrix(group: GroupId, matrix: Matrix3<f64>) -> Self {
        GroupElement { group, matrix }
    }

    /// SL(2,R) element from its 2x2 entries.
    pub fn sl2(a: f64, b: f64, c: f64, d: f64) -> Self {
        GroupElement {
            group: GroupId::Sl2r,
            matrix: Matrix3::new(a, b, 0.0, c, d, 0.0, 0.0, 0.0, 1.0),
        }
    }

    /// The center element `-I` of SL(2,R).
    pub fn sl2_minus_identity() -> Self {
        Self::sl2(-1.0, 0.0, 0.0, -1.0)
    }

    pub fn group(&self) -> GroupId {
        self.group
    }

    pub fn matrix(&self) -> &Matrix3<f64> {
        &self.matrix
    }

    /// Entries of the defining matrix in row-major order (9 values for
    /// SO(3), 4 for SL(2,R)).
    pub fn defining_entries(&self) -> Vec<f64> {
        let n = self.group.context().matrix_size;
        let mut out = Vec::with_capacity(n * n);
        for i in 0..n {
            for j in 0..n {
                out.push(self.matrix[(i, j)]);
            }
        }
        out
    }

    pub fn inverse(&self) -> Self {
        let matrix = match self.group {
            GroupId::So3 => self.matrix.transpose(),
            GroupId::Sl2r => {
                let m = &self.matrix;
                let det = m[(0, 0)] * m[(1, 1)] - m[(0, 1)] * m[(1, 0)];
                Matrix3::new(
                    m[(1, 1)] / det,
                    -m[(0, 1)] / det,
                    0.0,
                    -m[(1, 0)] / det,
                    m[(0, 0)] / det,
                    0.0,
                    0.0,
                    0.0,
                    1.0,
                )
            }
        };
        GroupElement {
            group: self.group,
            matrix,
        }
    }

    /// Distance from the group manifold: `max(|g^T g - I|, |det g - 1|)` for
    /// SO(3) and `|det g - 1|` for SL(2,R).
    pub fn manifold_residual(&self) -> f64 {
        match self.group {
            GroupId::So3 => {
                let orth = (self.matrix.transpose() * self.matrix - Matrix3::identity()).norm();
                orth.max((self.matrix.determinant() - 1.0).abs())
            }
            GroupId::Sl2r => {
                let m = &self.matrix;
                let det = m[(0, 0)] * m[(1, 1)] - m[(0, 1)] * m[(1, 0)];
                (det - 1.0).abs()
            }
        }
    }

    /// Trace of the defining matrix.
    pub fn trace(&self) -> f64 {
        match self.group {
            GroupId::So3 => self.matrix.trace(),
            GroupId::Sl2r => self.matrix[(0, 0)] + self.matrix[(1, 1)],
        }
    }

    /// Frobenius distance between defining matrices.
    pub fn distance(&self, other: &Self) -> f64 {
        (self.matrix - other.matrix).norm()
    }

    /// `Ad_g x = g x g^-1`.
    pub fn adjoint(&self, x: &AlgebraElement) -> AlgebraElement {
        assert_eq!(self.group, x.group, "adjoint across different groups");
        AlgebraElement::from_matrix(
            self.group,
            &(self.matrix * x.matrix * self.inverse().matrix),
        )
    }

    /// Matrix of `Ad_g` acting on algebra coordinates.
    pub fn adjoint_matrix(&self) -> Matrix3<f64> {
        if self.group == GroupId::So3 {
            return self.matrix;
        }
        let inv = self.inverse().matrix;
        let basis = &self.group.context().basis;
        let mut out = Matrix3::zeros();
        for j in 0..3 {
            let col = project(self.group, &(self.matrix * basis[j] * inv));
            out.set_column(j, &col);
        }
        out
    }

    /// `Ad*_{g^-1} mu`, the left coadjoint action.
    pub fn coadjoint(&self, mu: &CoalgebraElement) -> CoalgebraElement {
        assert_eq!(self.group, mu.group, "coadjoint across different groups");
        let ad_inv = self.inverse().adjoint_matrix();
        CoalgebraElement::from_coords(self.group, ad_inv.transpose() * mu.coords)
    }
}

impl Mul for GroupElement {
    type Output = GroupElement;
    fn mul(self, rhs: Self) -> Self {
        assert_eq!(
            self.group, rhs.group,
            "product of elements from different groups"
        );
        GroupElement {
            group: self.group,
            matrix: self.matrix * rhs.matrix,
        }
    }
}

impl Mul<&GroupElement> for &GroupElement {
    type Output = GroupElement;
    fn mul(self, rhs: &GroupElement) -> GroupElement {
        *self * *rhs
    }
}

/// Outcome classification of a logarithm.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum LogStatus {
    /// The principal logarithm is the only one in the principal strip.
    Unique,
    /// The element sits on the branch cut (rotation angle near pi); several
    /// logarithms of equal size exist.
    BranchFamily,
    /// Not in the image of `exp`; `center_factor * exp(principal)` holds
    /// with `center_factor = -I`.
    NotInImage,
}

/// How further logarithms of the same element are obtained from the
/// principal one.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum BranchRule {
    /// No other logarithm exists (hyperbolic or parabolic SL(2,R), or the
    /// element is not in the exponential image).
    Single,
    /// Logarithms are `principal + 2 pi n * generator` for integer `n`,
    /// where `exp(2 pi * generator) = e`. For SO(3) the generator is the
    /// unit rotation axis; for elliptic SL(2,R) it is the complex structure
    /// `J` with `J^2 = -I`.
    Periodic { generator: AlgebraElement },
    /// Identity or `-I`: any rotation generator works, so the branch must
    /// come from context (e.g. the previous point of a continuation).
    Degenerate,
}

impl BranchRule {
    pub fn describe(&self) -> String {
        match self {
            BranchRule::Single => "single logarithm".to_string(),
            BranchRule::Periodic { generator } => {
                let g = generator.coords();
                format!("principal + 2*pi*n*[{:.6}, {:.6}, {:.6}]", g[0], g[1], g[2])
            }
            BranchRule::Degenerate => "central element: branch taken from context".to_string(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LogResult {
    pub status: LogStatus,
    pub principal: AlgebraElement,
    /// `-I` when the input is not in the exponential image.
    pub center_factor: Option<GroupElement>,
    pub branch_rule: BranchRule,
}

impl LogResult {
    pub fn in_image(&self) -> bool {
        !matches!(self.status, LogStatus::NotInImage)
    }

    /// `center_factor * exp(principal)`, which reproduces the input in every
    /// case.
    pub fn reconstruct(&self) -> GroupElement {
        let e = self.principal.exp();
        match &self.center_factor {
            Some(c) => *c * e,
            None => e,
        }
    }

    /// Logarithms of the same element reachable by `n` full turns, for
    /// `n` in `-turns..=turns`. Always starts with the principal value.
    pub fn candidates(&self, turns: i32) -> Vec<AlgebraElement> {
        let mut out = vec![self.principal];
        if let BranchRule::Periodic { generator } = &self.branch_rule {
            for n in 1..=turns {
                for sign in [1.0, -1.0] {
                    out.push(self.principal + generator.scale(sign * 2.0 * PI * n as f64));
                }
            }
        }
        out
    }
}

#[derive(Debug, Clone, Copy)]
pub struct LogOptions {
    pub window: f64,
    pub manifold_tolerance: f64,
}

impl Default for LogOptions {
    fn default() -> Self {
        LogOptions {
            window: DEFAULT_LOG_WINDOW,
            manifold_tolerance: DEFAULT_MANIFOLD_TOLERANCE,
        }
    }
}

fn exp_unchecked(x: &AlgebraElement) -> GroupElement {
    match x.group {
        GroupId::So3 => {
            let theta2 = x.coords.norm_squared();
            let (a, b) = if theta2 < 1e-4 {
                (
                    1.0 - theta2 / 6.0 + theta2 * theta2 / 120.0 - theta2.powi(3) / 5040.0,
                    0.5 - theta2 / 24.0 + theta2 * theta2 / 720.0 - theta2.powi(3) / 40320.0,
                )
            } else {
                let theta = theta2.sqrt();
                (theta.sin() / theta, (1.0 - theta.cos()) / theta2)
            };
            let k = x.matrix;
            GroupElement {
                group: GroupId::So3,
                matrix: Matrix3::identity() + k * a + k * k * b,
            }
        }
        GroupId::Sl2r => {
            let m = &x.matrix;
            // x^2 = delta * I on the 2x2 block
            let delta = m[(0, 0)] * m[(0, 0)] + m[(0, 1)] * m[(1, 0)];
            let (c, s) = sl2_exp_coefficients(delta);
            GroupElement::sl2(
                c + s * m[(0, 0)],
                s * m[(0, 1)],
                s * m[(1, 0)],
                c + s * m[(1, 1)],
            )
        }
    }
}

/// `(cosh sqrt(d), sinh sqrt(d) / sqrt(d))`, continued analytically to
/// `d <= 0`.
fn sl2_exp_coefficients(delta: f64) -> (f64, f64) {
    if delta.abs() < 1e-2 {
        let mut c = 0.0;
        let mut s = 0.0;
        let mut term = 1.0; // delta^n / (2n)!
        for n in 0..9 {
            c += term;
            let odd = term / (2 * n + 1) as f64; // delta^n / (2n+1)!
            s += odd;
            term = odd * delta / (2 * n + 2) as f64;
        }
        (c, s)
    } else if delta > 0.0 {
        let r = delta.sqrt();
        (r.cosh(), r.sinh() / r)
    } else {
        let r = (-delta).sqrt();
        (r.cos(), r.sin() / r)
    }
}

/// `mu / sinh(mu)` where `cosh(mu) = 1 + eps`, valid for small `eps` of
/// either sign.
fn near_parabolic_ratio(eps: f64) -> f64 {
    let y = 2.0 * eps - eps * eps / 3.0 + 4.0 * eps.powi(3) / 45.0;
    1.0 - y / 6.0 + 7.0 * y * y / 360.0 - 31.0 * y.powi(3) / 15120.0
}

fn log_so3(g: &GroupElement, opts: &LogOptions) -> LogResult {
    let r = &g.matrix;
    let s = Vector3::new(
        0.5 * (r[(2, 1)] - r[(1, 2)]),
        0.5 * (r[(0, 2)] - r[(2, 0)]),
        0.5 * (r[(1, 0)] - r[(0, 1)]),
    );
    let sin_theta = s.norm();
    let cos_theta = ((r.trace() - 1.0) * 0.5).clamp(-1.0, 1.0);
    let theta = sin_theta.atan2(cos_theta);

    if PI - theta < opts.window {
        // Near pi the skew part vanishes; recover the axis from the
        // symmetric part (1 - cos) a a^T.
        let sym = (r + r.transpose()) * 0.5 - Matrix3::identity() * cos_theta;
        let one_minus_cos = 1.0 - cos_theta;
        let mut best = 0;
        for i in 1..3 {
            if sym[(i, i)] > sym[(best, best)] {
                best = i;
            }
        }
        let ai = (sym[(best, best)] / one_minus_cos).max(0.0).sqrt();
        let mut axis: Vector3<f64> = sym.column(best) / (one_minus_cos * ai);
        axis /= axis.norm();
        if axis.dot(&s) < 0.0 {
            axis = -axis;
        }
        let generator = AlgebraElement::from_coords(GroupId::So3, axis);
        return LogResult {
            status: LogStatus::BranchFamily,
            principal: generator.scale(theta),
            center_factor: None,
            branch_rule: BranchRule::Periodic { generator },
        };
    }

    let ratio = if theta < opts.window {
        let t2 = theta * theta;
        1.0 + t2 / 6.0 + 7.0 * t2 * t2 / 360.0
    } else {
        theta / sin_theta
    };
    let principal = AlgebraElement::from_coords(GroupId::So3, s * ratio);
    let branch_rule = if theta > 1e-12 {
        BranchRule::Periodic {
            generator: AlgebraElement::from_coords(GroupId::So3, s / sin_theta),
        }
    } else {
        BranchRule::Degenerate
    };
    LogResult {
        status: LogStatus::Unique,
        principal,
        center_factor: None,
        branch_rule,
    }
}

/// Logarithm of an SL(2,R) element whose half-trace is `u >= 1 - window`,
/// or any elliptic element; `None` when the element is not in the image.
fn log_sl2_block(a: f64, b: f64, c: f64, d: f64, opts: &LogOptions) -> Option<LogResult> {
    let u = 0.5 * (a + d);
    // traceless part of the block
    let t1 = 0.5 * (a - d);
    let principal_from =
        |ratio: f64| AlgebraElement::sl2_from_entries(t1 * ratio, b * ratio, c * ratio);

    if (u - 1.0).abs() <= opts.window {
        let principal = principal_from(near_parabolic_ratio(u - 1.0));
        let traceless_norm = (t1 * t1 + b * b + c * c).sqrt();
        let branch_rule = if u < 1.0 && traceless_norm > 1e-12 {
            let sin_theta = ((1.0 - u) * (1.0 + u)).sqrt();
            BranchRule::Periodic {
                generator: principal_from(1.0 / sin_theta),
            }
        } else if traceless_norm <= 1e-12 {
            BranchRule::Degenerate
        } else {
            BranchRule::Single
        };
        return Some(LogResult {
            status: LogStatus::Unique,
            principal,
            center_factor: None,
            branch_rule,
        });
    }
    if u > 1.0 {
        let mu = u.acosh();
        let sinh_mu = ((u - 1.0) * (u + 1.0)).sqrt();
        return Some(LogResult {
            status: LogStatus::Unique,
            principal: principal_from(mu / sinh_mu),
            center_factor: None,
            branch_rule: BranchRule::Single,
        });
    }
    if u > -1.0 {
        let theta = u.acos();
        let sin_theta = ((1.0 - u) * (1.0 + u)).sqrt();
        let status = if u < -1.0 + opts.window {
            LogStatus::BranchFamily
        } else {
            LogStatus::Unique
        };
        return Some(LogResult {
            status,
            principal: principal_from(theta / sin_theta),
            center_factor: None,
            branch_rule: BranchRule::Periodic {
                generator: principal_from(1.0 / sin_theta),
            },
        });
    }
    None
}

fn log_sl2(g: &GroupElement, opts: &LogOptions) -> LogResult {
    let m = &g.matrix;
    let (a, b, c, d) = (m[(0, 0)], m[(0, 1)], m[(1, 0)], m[(1, 1)]);
    let u = 0.5 * (a + d);

    if (u + 1.0).abs() <= opts.window {
        let dist = ((a + 1.0).powi(2) + b * b + c * c + (d + 1.0).powi(2)).sqrt();
        if dist <= 1e-10 {
            // -I = exp(pi J) for every complex structure J; report the
            // standard rotation generator [[0, 1], [-1, 0]].
            let generator = AlgebraElement::sl2_from_entries(0.0, 1.0, -1.0);
            return LogResult {
                status: LogStatus::BranchFamily,
                principal: generator.scale(PI),
                center_factor: None,
                branch_rule: BranchRule::Degenerate,
            };
        }
    }
    if let Some(res) = log_sl2_block(a, b, c, d, opts) {
        return res;
    }
    // tr g <= -2 and g != -I: g = (-I) exp(k) with -g hyperbolic or parabolic.
    let inner = log_sl2_block(-a, -b, -c, -d, opts).expect("negated element has half-trace >= 1");
    LogResult {
        status: LogStatus::NotInImage,
        principal: inner.principal,
        center_factor: Some(GroupElement::sl2_minus_identity()),
        branch_rule: BranchRule::Single,
    }
}

/// Checked commutator `[x, y]`.
pub fn bracket(x: &AlgebraElement, y: &AlgebraElement) -> Result<AlgebraElement> {
    ensure_same(x.group, y.group)?;
    Ok(x.commutator(y))
}

/// Closed-form exponential (Rodrigues for SO(3), trace-based for SL(2,R)).
pub fn exp_group(x: &AlgebraElement) -> GroupElement {
    exp_unchecked(x)
}

/// Principal logarithm with branch classification.
pub fn log_group(g: &GroupElement) -> Result<LogResult> {
    log_group_with(g, &LogOptions::default())
}

pub fn log_group_with(g: &GroupElement, opts: &LogOptions) -> Result<LogResult> {
    let residual = g.manifold_residual();
    if !(residual <= opts.manifold_tolerance) {
        return Err(FloquetError::InvalidGroupElement {
            residual,
            tolerance: opts.manifold_tolerance,
        });
    }
    Ok(match g.group {
        GroupId::So3 => log_so3(g, opts),
        GroupId::Sl2r => log_sl2(g, opts),
    })
}

pub fn adjoint(g: &GroupElement, x: &AlgebraElement) -> Result<AlgebraElement> {
    ensure_same(g.group, x.group)?;
    Ok(g.adjoint(x))
}

/// `ad*_x mu`, defined by `<ad*_x mu, y> = <mu, [x, y]>`.
pub fn ad_star(x: &AlgebraElement, mu: &CoalgebraElement) -> Result<CoalgebraElement> {
    ensure_same(x.group, mu.group)?;
    Ok(ad_star_unchecked(x, mu))
}

pub(crate) fn ad_star_unchecked(x: &AlgebraElement, mu: &CoalgebraElement) -> CoalgebraElement {
    CoalgebraElement::from_coords(x.group, x.ad_matrix().transpose() * mu.coords)
}

/// `Ad*_{g^-1} mu`.
pub fn coadjoint(g: &GroupElement, mu: &CoalgebraElement) -> Result<CoalgebraElement> {
    ensure_same(g.group, mu.group)?;
    Ok(g.coadjoint(mu))
}

pub fn pairing(mu: &CoalgebraElement, x: &AlgebraElement) -> Result<f64> {
    ensure_same(mu.group, x.group)?;
    Ok(mu.pair(x))
}

/// Kirillov form on the coadjoint orbit through `eta`, evaluated on the
/// tangent vectors `ad*_x eta` and `ad*_y eta`.
pub fn kirillov(eta: &CoalgebraElement, x: &AlgebraElement, y: &AlgebraElement) -> Result<f64> {
    ensure_same(eta.group, x.group)?;
    ensure_same(eta.group, y.group)?;
    Ok(eta.pair(&x.commutator(y)))
}

/// `(dexp_X, dexp_X^-1)` as matrices on algebra coordinates, where
/// `dexp_X = (exp(ad_X) - 1) / ad_X` is the right-trivialised differential
/// of `exp`: `D exp(X(t)) = dexp_{X(t)} X'(t)`.
pub fn dexp_matrices(x: &AlgebraElement) -> (Matrix3<f64>, Matrix3<f64>) {
    let ad = x.ad_matrix();
    let mut aug = SMatrix::<f64, 6, 6>::zeros();
    aug.fixed_view_mut::<3, 3>(0, 0).copy_from(&ad);
    aug.fixed_view_mut::<3, 3>(0, 3)
        .copy_from(&Matrix3::identity());
    let e = aug.exp();
    let dexp: Matrix3<f64> = e.fixed_view::<3, 3>(0, 3).into_owned();
    let inv = dexp
        .try_inverse()
        .expect("dexp is invertible away from ad-eigenvalues 2*pi*i*n");
    (dexp, inv)
}
