use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::levy::LevyModel;

/// Rate (potential) `U` in the exponential weight `exp(-int U ds)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "snake_case", deny_unknown_fields)]
pub enum RateFunction {
    /// `U(p) = c p^2`.
    Quadratic { c: f64 },
    /// `U(p) = p^2 - p`.
    QuadraticMinusLinear,
    /// `U(p) = sum_i coeffs[i] p^i`.
    Polynomial { coeffs: Vec<f64> },
    /// `U(p) = |p|^(1/2)`; admissible only for subordinators.
    HalfPower,
}

impl RateFunction {
    pub fn quadratic(c: f64) -> Self {
        RateFunction::Quadratic { c }
    }

    pub fn polynomial(coeffs: &[f64]) -> Self {
        RateFunction::Polynomial { coeffs: coeffs.to_vec() }
    }

    /// Ascending polynomial coefficients, `None` for non-polynomial families.
    pub fn coefficients(&self) -> Option<Vec<f64>> {
        match self {
            RateFunction::Quadratic { c } => Some(vec![0.0, 0.0, *c]),
            RateFunction::QuadraticMinusLinear => Some(vec![0.0, -1.0, 1.0]),
            RateFunction::Polynomial { coeffs } => {
                let mut c = coeffs.clone();
                while c.len() > 1 && *c.last().unwrap() == 0.0 {
                    c.pop();
                }
                Some(c)
            }
            RateFunction::HalfPower => None,
        }
    }

    #[inline]
    pub fn value(&self, p: f64) -> f64 {
        match self {
            RateFunction::Quadratic { c } => c * p * p,
            RateFunction::QuadraticMinusLinear => p * p - p,
            RateFunction::Polynomial { coeffs } => coeffs.iter().rev().fold(0.0, |acc, c| acc * p + c),
            RateFunction::HalfPower => p.abs().sqrt(),
        }
    }

    /// `n`-th derivative; exact for the polynomial families.
    pub fn derivative(&self, n: u32, p: f64) -> f64 {
        if n == 0 {
            return self.value(p);
        }
        let poly = |c: &[f64]| -> f64 {
            c.iter()
                .enumerate()
                .skip(n as usize)
                .map(|(i, ci)| {
                    let falling: f64 = (0..n as usize).map(|j| (i - j) as f64).product();
                    ci * falling * p.powi((i - n as usize) as i32)
                })
                .sum()
        };
        match self {
            RateFunction::Quadratic { c } => poly(&[0.0, 0.0, *c]),
            RateFunction::QuadraticMinusLinear => poly(&[0.0, -1.0, 1.0]),
            RateFunction::Polynomial { coeffs } => poly(coeffs),
            RateFunction::HalfPower => {
                // d^n/dp^n |p|^(1/2) = sgn(p)^n (1/2)(1/2 - 1)...(1/2 - n + 1) |p|^(1/2 - n)
                let coeff: f64 = (0..n).map(|j| 0.5 - j as f64).product();
                let sign = if p < 0.0 && n % 2 == 1 { -1.0 } else { 1.0 };
                sign * coeff * p.abs().powf(0.5 - n as f64)
            }
        }
    }

    /// Infimum over the real line.
    pub fn lower_bound(&self) -> f64 {
        match self {
            RateFunction::Quadratic { .. } | RateFunction::HalfPower => 0.0,
            RateFunction::QuadraticMinusLinear => -0.25,
            RateFunction::Polynomial { .. } => {
                // scan; admissible polynomials are coercive so the minimum is interior
                let mut lo = f64::INFINITY;
                for i in -40_000..=40_000 {
                    lo = lo.min(self.value(i as f64 * 1e-3));
                }
                lo
            }
        }
    }

    /// Admissibility: bounded below with `U(p) >= c |p|^a` at infinity
    /// (checked numerically), or bounded; `HalfPower` only for subordinators.
    pub fn validate(&self, model: &LevyModel) -> Result<()> {
        match self {
            RateFunction::Quadratic { c } => {
                if !(c.is_finite() && *c >= 0.0) {
                    return Err(Error::Config(format!("rate.c must be >= 0, got {c}")));
                }
            }
            RateFunction::QuadraticMinusLinear => {}
            RateFunction::Polynomial { coeffs } => {
                if coeffs.is_empty() || coeffs.iter().any(|c| !c.is_finite()) {
                    return Err(Error::Config("rate.coeffs must be a non-empty list of finite numbers".into()));
                }
                let c = self.coefficients().unwrap();
                let degree = c.len() - 1;
                if degree > 0 {
                    if degree % 2 == 1 || c[degree] <= 0.0 {
                        return Err(Error::Config(
                            "rate polynomial is unbounded below (need even degree and positive leading coefficient)".into(),
                        ));
                    }
                    // U(p) >= c |p| for |p| large, probed on a window
                    for i in 1..=200 {
                        let p = 10.0 * i as f64;
                        if self.value(p) < 1e-3 * p || self.value(-p) < 1e-3 * p {
                            return Err(Error::Config(format!("rate fails the growth bound U(p) >= c|p| near |p| = {p}")));
                        }
                    }
                }
            }
            RateFunction::HalfPower => {
                if !model.is_subordinator() {
                    return Err(Error::Config("rate family half_power requires a subordinator model".into()));
                }
            }
        }
        Ok(())
    }
}

/// Initial (or terminal) data `g`. `hbar` is the model's scale (1 when unscaled).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "snake_case", deny_unknown_fields)]
pub enum BoundaryData {
    /// `exp(-c p^2 / hbar)`, times `(2 pi hbar)^(-1/2)` when normalized.
    ScaledGaussian { c: f64, normalized: bool },
    /// `exp(-1 / hbar)`.
    ConstantExp,
    /// `g = 1`.
    One,
    /// `((p - center)/width)^order * exp(-((p - center)/width)^2 / 2)`.
    Schwartz { center: f64, width: f64, order: u32 },
}

impl BoundaryData {
    pub fn validate(&self) -> Result<()> {
        match self {
            BoundaryData::ScaledGaussian { c, .. } if !(c.is_finite() && *c > 0.0) => {
                Err(Error::Config(format!("data.c must be > 0, got {c}")))
            }
            BoundaryData::Schwartz { width, center, .. } if !(width.is_finite() && *width > 0.0 && center.is_finite()) => {
                Err(Error::Config(format!("data.width must be > 0, got {width}")))
            }
            _ => Ok(()),
        }
    }

    /// `(ln |g(p)|, sign g(p))`; sign 0 encodes `g(p) = 0`.
    #[inline]
    pub fn log_abs_sign(&self, p: f64, hbar: f64) -> (f64, f64) {
        match self {
            BoundaryData::ScaledGaussian { c, normalized } => {
                let mut l = -c * p * p / hbar;
                if *normalized {
                    l -= 0.5 * (2.0 * std::f64::consts::PI * hbar).ln();
                }
                (l, 1.0)
            }
            BoundaryData::ConstantExp => (-1.0 / hbar, 1.0),
            BoundaryData::One => (0.0, 1.0),
            BoundaryData::Schwartz { center, width, order } => {
                let z = (p - center) / width;
                let e = -0.5 * z * z;
                if *order == 0 {
                    (e, 1.0)
                } else if z == 0.0 {
                    (f64::NEG_INFINITY, 0.0)
                } else {
                    let sign = if z < 0.0 && order % 2 == 1 { -1.0 } else { 1.0 };
                    (e + *order as f64 * z.abs().ln(), sign)
                }
            }
        }
    }

    pub fn value(&self, p: f64, hbar: f64) -> f64 {
        let (l, s) = self.log_abs_sign(p, hbar);
        if s == 0.0 {
            0.0
        } else {
            s * l.exp()
        }
    }

    pub fn is_positive(&self) -> bool {
        !matches!(self, BoundaryData::Schwartz { order, .. } if *order > 0)
    }

    /// Boundary contribution `c |phi(T) + p|^2` (or a constant) it induces in
    /// the semiclassical action.
    pub fn boundary_term(&self) -> crate::variational::BoundaryTerm {
        use crate::variational::BoundaryTerm;
        match self {
            BoundaryData::ScaledGaussian { c, .. } => BoundaryTerm::Square { kappa: *c },
            BoundaryData::ConstantExp => BoundaryTerm::Constant(1.0),
            BoundaryData::One | BoundaryData::Schwartz { .. } => BoundaryTerm::None,
        }
    }
}

/// Whether `g` is prescribed at time 0 or at the horizon.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Direction {
    ForwardFromInitial,
    /// Realized by `ubar(t, .) = u(T - t, .)`; the engines always integrate
    /// the initial-value problem in elapsed time.
    BackwardFromTerminal,
}

/// A Feynman-Kac problem: dynamics, rate, data, horizon and direction.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProblemSpec {
    pub model: LevyModel,
    pub rate: RateFunction,
    pub data: BoundaryData,
    pub horizon: f64,
    pub direction: Direction,
}

impl ProblemSpec {
    pub fn new(model: LevyModel, rate: RateFunction, data: BoundaryData, horizon: f64, direction: Direction) -> Result<Self> {
        let s = ProblemSpec { model, rate, data, horizon, direction };
        s.validate()?;
        Ok(s)
    }

    pub fn forward(model: LevyModel, rate: RateFunction, data: BoundaryData, horizon: f64) -> Self {
        ProblemSpec { model, rate, data, horizon, direction: Direction::ForwardFromInitial }
    }

    pub fn backward(model: LevyModel, rate: RateFunction, data: BoundaryData, horizon: f64) -> Self {
        ProblemSpec { model, rate, data, horizon, direction: Direction::BackwardFromTerminal }
    }

    pub fn validate(&self) -> Result<()> {
        self.model.validate()?;
        self.rate.validate(&self.model)?;
        self.data.validate()?;
        if !(self.horizon.is_finite() && self.horizon > 0.0) {
            return Err(Error::Config(format!("horizon must be > 0, got {}", self.horizon)));
        }
        Ok(())
    }

    pub fn hbar(&self) -> f64 {
        self.model.hbar()
    }

    /// Same problem with the model moved to `Scaled { hbar }`.
    pub fn with_hbar(&self, hbar: f64) -> Self {
        ProblemSpec { model: self.model.clone().scaled(hbar), ..self.clone() }
    }

    /// Elapsed time of the internal initial-value problem at physical time `t`.
    pub fn elapsed(&self, t: f64) -> Result<f64> {
        match self.direction {
            Direction::ForwardFromInitial => {
                if !(t.is_finite() && t >= 0.0) {
                    return Err(Error::Argument(format!("time must be >= 0, got {t}")));
                }
                Ok(t)
            }
            Direction::BackwardFromTerminal => {
                if !(t.is_finite() && (0.0..=self.horizon).contains(&t)) {
                    return Err(Error::Argument(format!("time {t} outside [0, {}]", self.horizon)));
                }
                Ok(self.horizon - t)
            }
        }
    }

    /// Physical time reached after `elapsed` units of internal integration.
    pub fn physical(&self, elapsed: f64) -> f64 {
        match self.direction {
            Direction::ForwardFromInitial => elapsed,
            Direction::BackwardFromTerminal => self.horizon - elapsed,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn derivatives_of_polynomials() {
        let u = RateFunction::polynomial(&[1.0, -2.0, 0.5, 0.0, 0.1]);
        let p = 1.3;
        let h = 1e-4;
        for n in 1..=3 {
            let fd = (u.derivative(n - 1, p + h) - u.derivative(n - 1, p - h)) / (2.0 * h);
            assert!((u.derivative(n, p) - fd).abs() < 1e-6, "n = {n}");
        }
        assert!((u.derivative(4, p) - 2.4).abs() < 1e-12);
        assert_eq!(u.derivative(5, p), 0.0);
        assert_eq!(RateFunction::QuadraticMinusLinear.derivative(1, 0.5), 0.0);
    }

    #[test]
    fn admissibility_rules() {
        let bm = LevyModel::brownian(1.0);
        assert!(RateFunction::polynomial(&[0.0]).validate(&bm).is_ok());
        assert!(RateFunction::polynomial(&[1.0, -1.0, 1.0]).validate(&bm).is_ok());
        assert!(RateFunction::polynomial(&[0.0, 1.0]).validate(&bm).is_err());
        assert!(RateFunction::polynomial(&[0.0, 0.0, -1.0]).validate(&bm).is_err());
        assert!(RateFunction::HalfPower.validate(&bm).is_err());
        assert!(RateFunction::HalfPower.validate(&LevyModel::gamma_subordinator()).is_ok());
        assert!((RateFunction::QuadraticMinusLinear.lower_bound() + 0.25).abs() < 1e-15);
    }

    #[test]
    fn data_values() {
        let g = BoundaryData::ScaledGaussian { c: 0.5, normalized: true };
        let h = 0.1;
        let v = g.value(0.2, h);
        let exact = (-(0.5 * 0.04) / h).exp() / (2.0 * std::f64::consts::PI * h).sqrt();
        assert!((v - exact).abs() < 1e-14);
        assert!((BoundaryData::ConstantExp.value(3.0, 0.5) - (-2f64).exp()).abs() < 1e-15);
        let s = BoundaryData::Schwartz { center: 0.0, width: 1.0, order: 1 };
        assert!(s.value(-1.0, 1.0) < 0.0);
        assert_eq!(s.value(0.0, 1.0), 0.0);
    }

    #[test]
    fn time_reversal() {
        let s = ProblemSpec::backward(
            LevyModel::brownian(1.0),
            RateFunction::quadratic(0.5),
            BoundaryData::One,
            1.0,
        );
        assert_eq!(s.elapsed(0.25).unwrap(), 0.75);
        assert_eq!(s.physical(0.75), 0.25);
        assert!(s.elapsed(1.5).is_err());
    }
}
