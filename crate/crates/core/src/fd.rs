//! Fourth-order finite-difference stencils and composite quadrature weights
//! on uniform grids.

use crate::error::{FloquetError, Result};
use crate::lie::{AlgebraElement, GroupElement};
use nalgebra::Matrix3;

/// Treatment of stencils that reach past the ends of a grid.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Boundary {
    /// Only interior nodes are allowed.
    Error,
    /// The grid samples one period and its last node repeats the first;
    /// indices wrap modulo `len - 1`.
    Periodic,
    /// Five-point one-sided stencils near the ends.
    OneSided,
}

const CENTERED: [f64; 5] = [1.0, -8.0, 0.0, 8.0, -1.0];
const FORWARD0: [f64; 5] = [-25.0, 48.0, -36.0, 16.0, -3.0];
const FORWARD1: [f64; 5] = [-3.0, -10.0, 18.0, -6.0, 1.0];

/// Node indices and weights of a fourth-order first-derivative stencil at
/// `index`. Weights are scaled by 1/12 and must be divided by the spacing.
pub fn derivative_stencil(
    index: usize,
    len: usize,
    boundary: Boundary,
) -> Result<[(usize, f64); 5]> {
    if len < 5 {
        return Err(FloquetError::Resolution(format!(
            "derivative stencils need at least 5 nodes, grid has {len}"
        )));
    }
    let pack = |start: usize, w: [f64; 5], reversed: bool| {
        let mut out = [(0usize, 0.0f64); 5];
        for k in 0..5 {
            out[k] = if reversed {
                (start + 4 - k, -w[k] / 12.0)
            } else {
                (start + k, w[k] / 12.0)
            };
        }
        out
    };
    if index >= 2 && index + 2 < len {
        return Ok(pack(index - 2, CENTERED, false));
    }
    match boundary {
        Boundary::Error => Err(FloquetError::Boundary { index, len }),
        Boundary::Periodic => {
            let n = len - 1;
            let mut out = [(0usize, 0.0f64); 5];
            for k in 0..5 {
                let idx = (index as isize + k as isize - 2).rem_euclid(n as isize) as usize;
                out[k] = (idx, CENTERED[k] / 12.0);
            }
            Ok(out)
        }
        Boundary::OneSided => Ok(match index {
            0 => pack(0, FORWARD0, false),
            1 => pack(0, FORWARD1, false),
            i if i == len - 2 => pack(len - 5, FORWARD1, true),
            _ => pack(len - 5, FORWARD0, true),
        }),
    }
}

/// Right logarithmic derivative `(d alpha/dt) alpha^-1` of a sampled group
/// curve, projected onto the algebra.
pub fn right_log_derivative(
    values: &[GroupElement],
    spacing: f64,
    index: usize,
    boundary: Boundary,
) -> Result<AlgebraElement> {
    let stencil = derivative_stencil(index, values.len(), boundary)?;
    let mut deriv = Matrix3::zeros();
    for (idx, w) in stencil {
        deriv += values[idx].matrix() * w;
    }
    deriv /= spacing;
    let g = &values[index];
    Ok(AlgebraElement::from_matrix(
        g.group(),
        &(deriv * g.inverse().matrix()),
    ))
}

/// Weights for integrating over the first `intervals + 1` nodes of a uniform
/// grid with spacing `h`: composite Simpson for an even interval count,
/// Simpson plus a closing 3/8 panel for an odd count >= 3. A single interval
/// uses the cubic rule on nodes 0..=3, so the returned vector can be longer
/// than `intervals + 1`.
pub fn composite_weights(intervals: usize, h: f64) -> Vec<f64> {
    match intervals {
        0 => vec![0.0],
        1 => vec![9.0 * h / 24.0, 19.0 * h / 24.0, -5.0 * h / 24.0, h / 24.0],
        n => {
            let mut w = vec![0.0; n + 1];
            let simpson_end = if n % 2 == 0 { n } else { n - 3 };
            for i in (0..simpson_end).step_by(2) {
                w[i] += h / 3.0;
                w[i + 1] += 4.0 * h / 3.0;
                w[i + 2] += h / 3.0;
            }
            if n % 2 == 1 {
                let s = simpson_end;
                w[s] += 3.0 * h / 8.0;
                w[s + 1] += 9.0 * h / 8.0;
                w[s + 2] += 9.0 * h / 8.0;
                w[s + 3] += 3.0 * h / 8.0;
            }
            w
        }
    }
}

/// Composite Simpson weights over `intervals` (even) panels.
pub fn simpson_weights(intervals: usize, h: f64) -> Vec<f64> {
    debug_assert!(intervals % 2 == 0);
    composite_weights(intervals, h)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn quadrature_is_exact_for_cubics() {
        let f = |x: f64| 1.0 - 2.0 * x + 0.5 * x * x + 0.3 * x * x * x;
        let anti = |x: f64| x - x * x + x.powi(3) / 6.0 + 0.075 * x.powi(4);
        let h = 0.125;
        for n in 0..12 {
            let w = composite_weights(n, h);
            let got: f64 = w.iter().enumerate().map(|(i, w)| w * f(i as f64 * h)).sum();
            let want = anti(n as f64 * h);
            assert!((got - want).abs() < 1e-13, "n = {n}: {got} vs {want}");
        }
    }

    #[test]
    fn stencils_differentiate_quartics_exactly() {
        let f = |x: f64| 0.2 + x - 0.7 * x * x + 0.1 * x.powi(3) - 0.05 * x.powi(4);
        let df = |x: f64| 1.0 - 1.4 * x + 0.3 * x * x - 0.2 * x.powi(3);
        let h = 0.1;
        let len = 9;
        for i in 0..len {
            let s = derivative_stencil(i, len, Boundary::OneSided).unwrap();
            let got: f64 = s.iter().map(|&(k, w)| w * f(k as f64 * h)).sum::<f64>() / h;
            assert!((got - df(i as f64 * h)).abs() < 1e-11, "index {i}");
        }
        assert!(matches!(
            derivative_stencil(1, len, Boundary::Error),
            Err(FloquetError::Boundary { index: 1, len: 9 })
        ));
    }

    #[test]
    fn periodic_stencil_wraps() {
        let n = 16;
        let h = 2.0 * std::f64::consts::PI / n as f64;
        for i in [0, 1, n - 1, n] {
            let s = derivative_stencil(i, n + 1, Boundary::Periodic).unwrap();
            let got: f64 = s
                .iter()
                .map(|&(k, w)| w * (k as f64 * h).sin())
                .sum::<f64>()
                / h;
            assert!((got - (i as f64 * h).cos()).abs() < 1e-3);
        }
    }
}
