use serde::{Deserialize, Serialize};

use super::measure::{Atom, JumpMeasure, JumpSampler};
use crate::error::{Error, Result};

/// Scaling regime of a Levy model.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum Regime {
    Unscaled,
    /// Semiclassical family: diffusion `hbar * sigma2`, jump rate `nu / hbar`,
    /// jump sizes `hbar * k`. The drift is left unchanged.
    Scaled { hbar: f64 },
}

/// Levy triplet `(b, sigma^2, nu)` plus its scaling regime.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LevyModel {
    pub drift: f64,
    pub sigma2: f64,
    pub jumps: JumpMeasure,
    pub regime: Regime,
}

/// Parameters of the process actually simulated, after applying the regime.
#[derive(Debug, Clone)]
pub struct EffectiveDynamics {
    pub drift: f64,
    pub diffusion: f64,
    /// Jump atoms `(size, rate)` already scaled by the regime.
    pub atoms: Vec<Atom>,
    pub jump_rate: f64,
    pub(crate) jump_scale: f64,
    pub(crate) sampler: JumpSampler,
}

impl LevyModel {
    pub fn new(drift: f64, sigma2: f64, jumps: JumpMeasure, regime: Regime) -> Result<Self> {
        let m = LevyModel { drift, sigma2, jumps, regime };
        m.validate()?;
        Ok(m)
    }

    /// Standard Brownian motion with variance `sigma2` per unit time.
    pub fn brownian(sigma2: f64) -> Self {
        LevyModel { drift: 0.0, sigma2, jumps: JumpMeasure::None, regime: Regime::Unscaled }
    }

    /// Pure-jump model with `mu = (mass/2)(delta_alpha + delta_-alpha)`.
    pub fn two_point(alpha: f64, mass: f64) -> Self {
        LevyModel {
            drift: 0.0,
            sigma2: 0.0,
            jumps: JumpMeasure::TwoPoint { alpha, mass },
            regime: Regime::Unscaled,
        }
    }

    /// Truncated gamma subordinator with default truncation.
    pub fn gamma_subordinator() -> Self {
        LevyModel { drift: 0.0, sigma2: 0.0, jumps: JumpMeasure::gamma(), regime: Regime::Unscaled }
    }

    pub fn scaled(mut self, hbar: f64) -> Self {
        self.regime = Regime::Scaled { hbar };
        self
    }

    pub fn unscaled(mut self) -> Self {
        self.regime = Regime::Unscaled;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if !self.drift.is_finite() {
            return Err(Error::Config(format!("drift must be finite, got {}", self.drift)));
        }
        if !(self.sigma2.is_finite() && self.sigma2 >= 0.0) {
            return Err(Error::Config(format!("sigma2 must be >= 0, got {}", self.sigma2)));
        }
        if let Regime::Scaled { hbar } = self.regime {
            if !(hbar.is_finite() && hbar > 0.0) {
                return Err(Error::Config(format!("hbar must be > 0, got {hbar}")));
            }
        }
        self.jumps.validate()?;
        if matches!(self.jumps, JumpMeasure::GammaDensity { .. }) && !self.is_subordinator() {
            return Err(Error::Config(
                "jumps.kind = gamma requires a subordinator (drift >= 0, sigma2 = 0)".into(),
            ));
        }
        Ok(())
    }

    /// `hbar` of the scaled regime, `1` otherwise.
    pub fn hbar(&self) -> f64 {
        match self.regime {
            Regime::Unscaled => 1.0,
            Regime::Scaled { hbar } => hbar,
        }
    }

    pub fn is_scaled(&self) -> bool {
        matches!(self.regime, Regime::Scaled { .. })
    }

    /// Almost surely nondecreasing paths.
    pub fn is_subordinator(&self) -> bool {
        self.drift >= 0.0 && self.sigma2 == 0.0 && self.jumps.positive_support()
    }

    pub fn effective(&self) -> EffectiveDynamics {
        let h = self.hbar();
        let atoms: Vec<Atom> =
            self.jumps.atoms().into_iter().map(|a| Atom { size: h * a.size, rate: a.rate / h }).collect();
        EffectiveDynamics {
            drift: self.drift,
            diffusion: h * self.sigma2,
            atoms,
            jump_rate: self.jumps.total_mass() / h,
            jump_scale: h,
            sampler: self.jumps.sampler(),
        }
    }
}

/// Real part of the Levy-Khintchine exponent
/// `V(x) = sigma^2 x^2 / 2 + int (1 - cos(xk)) nu(dk)` of the base triplet.
///
/// The drift only enters the imaginary part, see [`characteristic_exponent_imag`].
pub fn characteristic_exponent(model: &LevyModel, x: f64) -> Result<f64> {
    model.validate()?;
    let jump_part = match &model.jumps {
        JumpMeasure::None => 0.0,
        JumpMeasure::TwoPoint { alpha, mass } => mass * (1.0 - (x * alpha).cos()),
        JumpMeasure::FiniteAtomic(atoms) => atoms.iter().map(|a| a.rate * (1.0 - (x * a.size).cos())).sum(),
        JumpMeasure::GammaDensity { epsilon, cutoff } => {
            let f = |s: f64| {
                let k = s.exp();
                (1.0 - (x * k).cos()) * (-k).exp()
            };
            crate::quadrature::adaptive_simpson(&f, epsilon.ln(), cutoff.ln(), 1e-12)
        }
    };
    Ok(0.5 * model.sigma2 * x * x + jump_part)
}

/// Imaginary part `b x + int sin(xk) nu(dk)` of the exponent; zero for
/// symmetric models without drift.
pub fn characteristic_exponent_imag(model: &LevyModel, x: f64) -> Result<f64> {
    model.validate()?;
    let jump_part = match &model.jumps {
        JumpMeasure::GammaDensity { epsilon, cutoff } => {
            let f = |s: f64| {
                let k = s.exp();
                (x * k).sin() * (-k).exp()
            };
            crate::quadrature::adaptive_simpson(&f, epsilon.ln(), cutoff.ln(), 1e-12)
        }
        _ => 0.0,
    };
    Ok(model.drift * x + jump_part)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn exponent_examples() {
        let b = LevyModel::brownian(1.0);
        assert_eq!(characteristic_exponent(&b, 2.0).unwrap(), 2.0);
        let tp = LevyModel::two_point(1.0, 1.0);
        assert_eq!(characteristic_exponent(&tp, 0.0).unwrap(), 0.0);
        let v = characteristic_exponent(&tp, std::f64::consts::PI).unwrap();
        assert!((v - 2.0).abs() < 1e-15);
    }

    #[test]
    fn gamma_requires_subordinator() {
        let mut m = LevyModel::gamma_subordinator();
        m.drift = -0.5;
        assert!(matches!(characteristic_exponent(&m, 1.0), Err(Error::Config(_))));
        m.drift = 0.0;
        m.sigma2 = 0.1;
        assert!(m.validate().is_err());
    }

    #[test]
    fn negative_sigma2_names_the_field() {
        let m = LevyModel::brownian(-1.0);
        match m.validate() {
            Err(Error::Config(msg)) => assert!(msg.contains("sigma2")),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn scaled_effective_parameters() {
        let m = LevyModel { drift: 0.3, sigma2: 2.0, ..LevyModel::two_point(1.0, 1.0) }.scaled(0.1);
        let e = m.effective();
        assert!((e.diffusion - 0.2).abs() < 1e-15);
        assert!((e.jump_rate - 10.0).abs() < 1e-12);
        assert_eq!(e.drift, 0.3);
        assert!((e.atoms[1].size - 0.1).abs() < 1e-15);
        assert!((e.atoms[1].rate - 5.0).abs() < 1e-12);
    }

    proptest! {
        #[test]
        fn exponent_even_nonnegative(x in -20.0f64..20.0, alpha in 0.1f64..3.0, mass in 0.1f64..4.0, s2 in 0.0f64..2.0) {
            let m = LevyModel { sigma2: s2, ..LevyModel::two_point(alpha, mass) };
            let a = characteristic_exponent(&m, x).unwrap();
            let b = characteristic_exponent(&m, -x).unwrap();
            prop_assert!(a >= 0.0);
            prop_assert!((a - b).abs() <= 1e-12 * (1.0 + a.abs()));
            prop_assert_eq!(characteristic_exponent(&m, 0.0).unwrap(), 0.0);
        }
    }
}
