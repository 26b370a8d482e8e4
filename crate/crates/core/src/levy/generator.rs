use serde::{Deserialize, Serialize};

use super::measure::Atom;
use super::model::{EffectiveDynamics, LevyModel};
use crate::error::{Error, Result};

/// Uniform spatial grid `lower + i * spacing`, `i = 0..len`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct UniformGrid {
    pub lower: f64,
    pub spacing: f64,
    pub len: usize,
}

impl UniformGrid {
    pub fn new(lower: f64, spacing: f64, len: usize) -> Result<Self> {
        if !(spacing.is_finite() && spacing > 0.0) {
            return Err(Error::Argument(format!("grid spacing must be > 0, got {spacing}")));
        }
        if len < 3 {
            return Err(Error::Argument(format!("grid needs at least 3 points, got {len}")));
        }
        Ok(UniformGrid { lower, spacing, len })
    }

    /// `n` points on `[-half_width, half_width]`.
    pub fn symmetric(half_width: f64, n: usize) -> Result<Self> {
        if n < 3 {
            return Err(Error::Argument(format!("grid needs at least 3 points, got {n}")));
        }
        Self::new(-half_width, 2.0 * half_width / (n - 1) as f64, n)
    }

    pub fn point(&self, i: usize) -> f64 {
        self.lower + i as f64 * self.spacing
    }

    pub fn upper(&self) -> f64 {
        self.point(self.len - 1)
    }

    pub fn points(&self) -> Vec<f64> {
        (0..self.len).map(|i| self.point(i)).collect()
    }

    /// Linear interpolation of grid values; `None` outside the grid.
    pub fn interpolate(&self, values: &[f64], x: f64) -> Option<f64> {
        let s = (x - self.lower) / self.spacing;
        let last = (self.len - 1) as f64;
        if s < -1e-9 || s > last + 1e-9 {
            return None;
        }
        let s = s.clamp(0.0, last);
        let i = (s.floor() as usize).min(self.len - 2);
        let w = s - i as f64;
        Some((1.0 - w) * values[i] + w * values[i + 1])
    }
}

/// A jump shift expressed in grid units: exact index offset or interpolation.
#[derive(Debug, Clone, Copy)]
pub(crate) enum Shift {
    Exact(isize),
    Fractional { base: isize, weight: f64 },
}

impl Shift {
    pub(crate) fn of(size: f64, spacing: f64) -> Shift {
        let s = size / spacing;
        let r = s.round();
        if (s - r).abs() <= 1e-9 * (1.0 + r.abs()) {
            Shift::Exact(r as isize)
        } else {
            let base = s.floor();
            Shift::Fractional { base: base as isize, weight: s - base }
        }
    }

    /// Value of `f(x_i + size)` with `f = 0` off the grid; `None` marks truncation.
    #[inline]
    pub(crate) fn apply(&self, f: &[f64], i: usize) -> Option<f64> {
        let n = f.len() as isize;
        let i = i as isize;
        match *self {
            Shift::Exact(k) => {
                let j = i + k;
                if j < 0 || j >= n {
                    None
                } else {
                    Some(f[j as usize])
                }
            }
            Shift::Fractional { base, weight } => {
                let j = i + base;
                if j < 0 || j + 1 >= n {
                    None
                } else {
                    Some((1.0 - weight) * f[j as usize] + weight * f[j as usize + 1])
                }
            }
        }
    }
}

/// Result of applying the generator on a grid.
#[derive(Debug, Clone, PartialEq)]
pub struct GeneratorOutput {
    pub values: Vec<f64>,
    /// Points whose stencil or jump shifts left the grid (treated as `f = 0` there).
    pub truncated: Vec<bool>,
}

impl GeneratorOutput {
    pub fn boundary_truncated(&self) -> bool {
        self.truncated.iter().any(|t| *t)
    }
}

/// `Af = b f' + (D/2) f'' + sum_k rate_k (f(p + k) - f(p))` on a uniform grid,
/// with the regime-scaled coefficients of `model`. Central differences for the
/// local part, exact shifts or linear interpolation for the jumps.
pub fn apply_generator(model: &LevyModel, f: &[f64], grid: &UniformGrid) -> Result<GeneratorOutput> {
    model.validate()?;
    if f.len() != grid.len {
        return Err(Error::Argument(format!("f has {} values but grid has {} points", f.len(), grid.len)));
    }
    let dynamics = model.effective();
    let h = grid.spacing;
    let n = grid.len;
    let shifts: Vec<(Shift, f64)> = dynamics.atoms.iter().map(|a| (Shift::of(a.size, h), a.rate)).collect();
    let mut values = vec![0.0; n];
    let mut truncated = vec![false; n];
    let local = dynamics.drift != 0.0 || dynamics.diffusion != 0.0;
    for i in 0..n {
        let mut acc = 0.0;
        if local {
            let (left, right) = match (i.checked_sub(1), i + 1 < n) {
                (Some(l), true) => (f[l], f[i + 1]),
                (None, true) => {
                    truncated[i] = true;
                    (0.0, f[i + 1])
                }
                (Some(l), false) => {
                    truncated[i] = true;
                    (f[l], 0.0)
                }
                (None, false) => unreachable!("grid has at least 3 points"),
            };
            acc += dynamics.drift * (right - left) / (2.0 * h);
            acc += 0.5 * dynamics.diffusion * (right - 2.0 * f[i] + left) / (h * h);
        }
        for (shift, rate) in &shifts {
            let shifted = match shift.apply(f, i) {
                Some(v) => v,
                None => {
                    truncated[i] = true;
                    0.0
                }
            };
            acc += rate * (shifted - f[i]);
        }
        values[i] = acc;
    }
    Ok(GeneratorOutput { values, truncated })
}

/// Pointwise generator of a smooth function, `Af(p)`, with fourth-order
/// central differences for the local part and exact jump shifts.
pub fn generator_at<F: Fn(f64) -> f64>(model: &LevyModel, f: &F, p: f64) -> f64 {
    generator_with(&model.effective(), f, p)
}

pub(crate) fn generator_with<F: Fn(f64) -> f64>(dynamics: &EffectiveDynamics, f: &F, p: f64) -> f64 {
    let h = 1e-3 * (1.0 + p.abs());
    let (fm2, fm1, f0, fp1, fp2) = (f(p - 2.0 * h), f(p - h), f(p), f(p + h), f(p + 2.0 * h));
    let d1 = (fm2 - 8.0 * fm1 + 8.0 * fp1 - fp2) / (12.0 * h);
    let d2 = (-fm2 + 16.0 * fm1 - 30.0 * f0 + 16.0 * fp1 - fp2) / (12.0 * h * h);
    let jumps: f64 = dynamics.atoms.iter().map(|Atom { size, rate }| rate * (f(p + size) - f0)).sum();
    dynamics.drift * d1 + 0.5 * dynamics.diffusion * d2 + jumps
}
