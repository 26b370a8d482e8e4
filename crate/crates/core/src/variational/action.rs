use serde::{Deserialize, Serialize};

use super::hamiltonian::Lagrangian;
use crate::error::{Error, Result};
use crate::fk::RateFunction;

/// End-point contribution to the action.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum BoundaryTerm {
    /// `kappa |phi(T) + p|^2`.
    Square { kappa: f64 },
    Constant(f64),
    None,
}

impl BoundaryTerm {
    pub const FULL_SQUARE: BoundaryTerm = BoundaryTerm::Square { kappa: 1.0 };
    pub const HALF_SQUARE: BoundaryTerm = BoundaryTerm::Square { kappa: 0.5 };

    /// Coefficient `kappa` of the transversality condition (0 unless square).
    pub fn kappa(&self) -> f64 {
        match self {
            BoundaryTerm::Square { kappa } => *kappa,
            _ => 0.0,
        }
    }

    /// Value at the end point `y = phi(T) + p`.
    pub fn value(&self, y: f64) -> f64 {
        match self {
            BoundaryTerm::Square { kappa } => kappa * y * y,
            BoundaryTerm::Constant(c) => *c,
            BoundaryTerm::None => 0.0,
        }
    }

    /// Derivative with respect to the end point.
    pub fn gradient(&self, y: f64) -> f64 {
        2.0 * self.kappa() * y
    }
}

/// Components of the action of a path.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ActionParts {
    /// `int L0(phi') ds`.
    pub kinetic: f64,
    /// `int U(phi + p) ds`.
    pub potential: f64,
    pub boundary: f64,
}

impl ActionParts {
    pub fn total(&self) -> f64 {
        self.kinetic + self.potential + self.boundary
    }
}

/// Second-order finite-difference derivative on a possibly nonuniform grid.
pub(crate) fn derivative(s: &[f64], y: &[f64]) -> Vec<f64> {
    let n = s.len();
    if n < 2 {
        return vec![0.0; n];
    }
    if n == 2 {
        let d = (y[1] - y[0]) / (s[1] - s[0]);
        return vec![d, d];
    }
    let three = |i: usize, j: usize, k: usize, at: usize| {
        // derivative at s[at] of the quadratic through (i, j, k)
        let (x0, x1, x2) = (s[i], s[j], s[k]);
        let x = s[at];
        y[i] * ((x - x1) + (x - x2)) / ((x0 - x1) * (x0 - x2))
            + y[j] * ((x - x0) + (x - x2)) / ((x1 - x0) * (x1 - x2))
            + y[k] * ((x - x0) + (x - x1)) / ((x2 - x0) * (x2 - x1))
    };
    let mut d = Vec::with_capacity(n);
    d.push(three(0, 1, 2, 0));
    for i in 1..n - 1 {
        d.push(three(i - 1, i, i + 1, i));
    }
    d.push(three(n - 3, n - 2, n - 1, n - 1));
    d
}

fn trapezoid(s: &[f64], f: &[f64]) -> f64 {
    s.windows(2).zip(f.windows(2)).map(|(x, y)| 0.5 * (y[0] + y[1]) * (x[1] - x[0])).sum()
}

/// Action pieces with `phi'` supplied.
pub fn action_parts_with_derivative(
    l: &Lagrangian,
    rate: &RateFunction,
    s: &[f64],
    phi: &[f64],
    dphi: &[f64],
    p: f64,
    boundary: BoundaryTerm,
) -> Result<ActionParts> {
    if s.len() != phi.len() || s.len() != dphi.len() || s.is_empty() {
        return Err(Error::Argument("path arrays must be non-empty and of equal length".into()));
    }
    let lk: Vec<f64> = dphi.iter().map(|&u| l.l0(u)).collect::<Result<_>>()?;
    let u: Vec<f64> = phi.iter().map(|&y| rate.value(y + p)).collect();
    Ok(ActionParts {
        kinetic: trapezoid(s, &lk),
        potential: trapezoid(s, &u),
        boundary: boundary.value(phi[phi.len() - 1] + p),
    })
}

/// `int (L0(phi') + U(phi + p)) ds + boundary` by the composite trapezoid
/// rule, with `phi'` from second-order finite differences.
pub fn action_value(l: &Lagrangian, rate: &RateFunction, s: &[f64], phi: &[f64], p: f64, boundary: BoundaryTerm) -> Result<f64> {
    action_parts(l, rate, s, phi, p, boundary).map(|a| a.total())
}

pub fn action_parts(l: &Lagrangian, rate: &RateFunction, s: &[f64], phi: &[f64], p: f64, boundary: BoundaryTerm) -> Result<ActionParts> {
    if s.len() != phi.len() {
        return Err(Error::Argument("path arrays must be of equal length".into()));
    }
    action_parts_with_derivative(l, rate, s, phi, &derivative(s, phi), p, boundary)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::levy::LevyModel;

    #[test]
    fn zero_path() {
        let s: Vec<f64> = (0..=100).map(|i| i as f64 / 100.0).collect();
        let zero = vec![0.0; s.len()];
        let l = Lagrangian::gaussian(1.0);
        assert_eq!(action_value(&l, &RateFunction::quadratic(0.5), &s, &zero, 0.0, BoundaryTerm::None).unwrap(), 0.0);

        let t = 0.3;
        let s: Vec<f64> = (0..=100).map(|i| t + (1.0 - t) * i as f64 / 100.0).collect();
        let lj = Lagrangian::new(&LevyModel::two_point(1.0, 1.0)).unwrap();
        let a = action_value(&lj, &RateFunction::QuadraticMinusLinear, &s, &zero, 0.5, BoundaryTerm::Constant(1.0)).unwrap();
        assert!((a - (-0.25 * (1.0 - t) + 1.0)).abs() < 1e-14);
    }

    #[test]
    fn finite_differences_are_second_order() {
        let s: Vec<f64> = (0..=50).map(|i| (i as f64 / 50.0).powf(1.3)).collect();
        let y: Vec<f64> = s.iter().map(|x| x * x).collect();
        for (x, d) in s.iter().zip(derivative(&s, &y)) {
            assert!((d - 2.0 * x).abs() < 1e-12);
        }
    }
}
