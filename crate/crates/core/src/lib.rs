//! Floquet analysis of periodic Lie systems `df/dt = phi(t) f` on SO(3) and
//! SL(2,R).
//!
//! The pipeline runs from a periodic coefficient curve to the monodromy
//! `m = f(T)`, a continued logarithm `k` with `exp k = m`, the periodic
//! Floquet factor `p(t) = f(t) exp(-t k / T)`, and the splitting
//! `k = k_dyn + k_geom` into a dynamic phase (a time integral along the
//! factor) and a geometric phase (a surface integral over a contraction of
//! the loop `p`). The [`euler`] module applies this to linear Euler systems
//! and to reconstruction phases of the free rigid body.

pub mod error;
pub mod euler;
pub mod fd;
pub mod floquet;
pub mod integrator;
pub mod lie;
pub mod parallel;
pub mod phases;
pub mod selftest;

pub use error::{FloquetError, Result};
pub use lie::{AlgebraElement, CoalgebraElement, GroupElement, GroupId};
