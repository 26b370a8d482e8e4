use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::quadrature::adaptive_simpson;

/// Default lower truncation of the gamma Levy density.
pub const GAMMA_EPSILON: f64 = 1e-4;
/// Default upper cutoff of the gamma Levy density.
pub const GAMMA_CUTOFF: f64 = 30.0;
/// Log-spaced midpoint nodes used to discretize the gamma density.
pub const GAMMA_NODES: usize = 256;

/// A single point mass `rate * delta_size` of a jump measure.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Atom {
    pub size: f64,
    pub rate: f64,
}

/// Jump (Levy) measure of a one-dimensional Levy process.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum JumpMeasure {
    None,
    /// `(mass / 2) * (delta_alpha + delta_{-alpha})`.
    TwoPoint { alpha: f64, mass: f64 },
    /// Finite symmetric sum of point masses.
    FiniteAtomic(Vec<Atom>),
    /// `exp(-k) / k dk` restricted to `[epsilon, cutoff]`.
    GammaDensity { epsilon: f64, cutoff: f64 },
}

impl JumpMeasure {
    pub fn gamma() -> Self {
        JumpMeasure::GammaDensity { epsilon: GAMMA_EPSILON, cutoff: GAMMA_CUTOFF }
    }

    pub fn validate(&self) -> Result<()> {
        match self {
            JumpMeasure::None => Ok(()),
            JumpMeasure::TwoPoint { alpha, mass } => {
                if !(alpha.is_finite() && *alpha > 0.0) {
                    return Err(Error::Config(format!("jumps.alpha must be > 0, got {alpha}")));
                }
                if !(mass.is_finite() && *mass > 0.0) {
                    return Err(Error::Config(format!("jumps.mass must be > 0, got {mass}")));
                }
                Ok(())
            }
            JumpMeasure::FiniteAtomic(atoms) => {
                if atoms.is_empty() {
                    return Err(Error::Config("jumps.atoms must not be empty".into()));
                }
                for a in atoms {
                    if !(a.rate.is_finite() && a.rate > 0.0) {
                        return Err(Error::Config(format!("jumps.atoms rate must be > 0, got {}", a.rate)));
                    }
                    if !a.size.is_finite() || a.size == 0.0 {
                        return Err(Error::Config(format!("jumps.atoms size must be finite and non-zero, got {}", a.size)));
                    }
                }
                // k -> -k symmetry with matching rates
                for a in atoms {
                    let mirrored: f64 = atoms
                        .iter()
                        .filter(|b| (b.size + a.size).abs() <= 1e-12 * a.size.abs())
                        .map(|b| b.rate)
                        .sum();
                    let same: f64 = atoms
                        .iter()
                        .filter(|b| (b.size - a.size).abs() <= 1e-12 * a.size.abs())
                        .map(|b| b.rate)
                        .sum();
                    if (mirrored - same).abs() > 1e-12 * same {
                        return Err(Error::Config(format!(
                            "jumps.atoms must be symmetric under k -> -k (atom {} has no mirror of equal rate)",
                            a.size
                        )));
                    }
                }
                Ok(())
            }
            JumpMeasure::GammaDensity { epsilon, cutoff } => {
                if !(epsilon.is_finite() && *epsilon > 0.0 && cutoff.is_finite() && cutoff > epsilon) {
                    return Err(Error::Config(format!(
                        "jumps.epsilon/jumps.cutoff must satisfy 0 < epsilon < cutoff, got {epsilon}, {cutoff}"
                    )));
                }
                Ok(())
            }
        }
    }

    pub fn is_none(&self) -> bool {
        matches!(self, JumpMeasure::None)
    }

    pub fn is_symmetric(&self) -> bool {
        !matches!(self, JumpMeasure::GammaDensity { .. })
    }

    /// True when every jump is positive (subordinator-compatible).
    pub fn positive_support(&self) -> bool {
        match self {
            JumpMeasure::None | JumpMeasure::GammaDensity { .. } => true,
            JumpMeasure::TwoPoint { .. } => false,
            JumpMeasure::FiniteAtomic(atoms) => atoms.iter().all(|a| a.size > 0.0),
        }
    }

    /// Discrete representation: exact for atomic measures, log-spaced
    /// midpoint quadrature for the gamma density.
    pub fn atoms(&self) -> Vec<Atom> {
        match self {
            JumpMeasure::None => Vec::new(),
            JumpMeasure::TwoPoint { alpha, mass } => vec![
                Atom { size: -alpha, rate: 0.5 * mass },
                Atom { size: *alpha, rate: 0.5 * mass },
            ],
            JumpMeasure::FiniteAtomic(atoms) => atoms.clone(),
            JumpMeasure::GammaDensity { epsilon, cutoff } => {
                let (lo, hi) = (epsilon.ln(), cutoff.ln());
                let ds = (hi - lo) / GAMMA_NODES as f64;
                (0..GAMMA_NODES)
                    .map(|j| {
                        let k = (lo + (j as f64 + 0.5) * ds).exp();
                        // nu(dk) = exp(-k)/k dk = exp(-e^s) ds
                        Atom { size: k, rate: (-k).exp() * ds }
                    })
                    .collect()
            }
        }
    }

    /// `int k^n nu(dk)`; `n = 0` is the total mass.
    pub fn moment(&self, n: u32) -> f64 {
        match self {
            JumpMeasure::None => 0.0,
            JumpMeasure::TwoPoint { alpha, mass } => {
                if n % 2 == 1 {
                    0.0
                } else {
                    mass * alpha.powi(n as i32)
                }
            }
            JumpMeasure::FiniteAtomic(atoms) => atoms.iter().map(|a| a.rate * a.size.powi(n as i32)).sum(),
            JumpMeasure::GammaDensity { epsilon, cutoff } => {
                // in s = ln k: int exp(n s) exp(-e^s) ds
                let f = |s: f64| (n as f64 * s - s.exp()).exp();
                adaptive_simpson(&f, epsilon.ln(), cutoff.ln(), 1e-13)
            }
        }
    }

    pub fn total_mass(&self) -> f64 {
        self.moment(0)
    }

    /// Largest absolute jump size in the support.
    pub fn max_jump(&self) -> f64 {
        match self {
            JumpMeasure::None => 0.0,
            JumpMeasure::TwoPoint { alpha, .. } => *alpha,
            JumpMeasure::FiniteAtomic(atoms) => atoms.iter().map(|a| a.size.abs()).fold(0.0, f64::max),
            JumpMeasure::GammaDensity { cutoff, .. } => *cutoff,
        }
    }

    pub(crate) fn sampler(&self) -> JumpSampler {
        match self {
            JumpMeasure::None => JumpSampler::None,
            JumpMeasure::TwoPoint { alpha, .. } => JumpSampler::TwoPoint { alpha: *alpha },
            JumpMeasure::FiniteAtomic(atoms) => {
                let mut acc = 0.0;
                let mut cumulative = Vec::with_capacity(atoms.len());
                for a in atoms {
                    acc += a.rate;
                    cumulative.push(acc);
                }
                JumpSampler::Atomic { sizes: atoms.iter().map(|a| a.size).collect(), cumulative }
            }
            JumpMeasure::GammaDensity { epsilon, cutoff } => {
                JumpSampler::Gamma { ln_lo: epsilon.ln(), ln_hi: cutoff.ln() }
            }
        }
    }
}

/// Draws jump sizes from the normalized jump measure.
#[derive(Debug, Clone)]
pub(crate) enum JumpSampler {
    None,
    TwoPoint { alpha: f64 },
    Atomic { sizes: Vec<f64>, cumulative: Vec<f64> },
    Gamma { ln_lo: f64, ln_hi: f64 },
}

impl JumpSampler {
    pub(crate) fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        match self {
            JumpSampler::None => 0.0,
            JumpSampler::TwoPoint { alpha } => {
                if rng.random::<bool>() {
                    *alpha
                } else {
                    -alpha
                }
            }
            JumpSampler::Atomic { sizes, cumulative } => {
                let total = *cumulative.last().unwrap_or(&0.0);
                let u = rng.random::<f64>() * total;
                let idx = cumulative.partition_point(|&c| c <= u).min(sizes.len() - 1);
                sizes[idx]
            }
            JumpSampler::Gamma { ln_lo, ln_hi } => loop {
                // density of s = ln k is proportional to exp(-e^s) <= 1
                let s = ln_lo + (ln_hi - ln_lo) * rng.random::<f64>();
                if rng.random::<f64>() < (-s.exp()).exp() {
                    return s.exp();
                }
            },
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn two_point_atoms_are_symmetric_halves() {
        let m = JumpMeasure::TwoPoint { alpha: 1.5, mass: 2.0 };
        let atoms = m.atoms();
        assert_eq!(atoms.len(), 2);
        assert_eq!(atoms[0].size, -1.5);
        assert_eq!(atoms[1].rate, 1.0);
        assert_eq!(m.total_mass(), 2.0);
        assert_eq!(m.moment(2), 2.0 * 2.25);
        assert_eq!(m.moment(3), 0.0);
    }

    #[test]
    fn asymmetric_atoms_are_rejected() {
        let m = JumpMeasure::FiniteAtomic(vec![
            Atom { size: 1.0, rate: 0.5 },
            Atom { size: -1.0, rate: 0.25 },
        ]);
        assert!(matches!(m.validate(), Err(Error::Config(_))));
        let ok = JumpMeasure::FiniteAtomic(vec![
            Atom { size: 1.0, rate: 0.5 },
            Atom { size: -1.0, rate: 0.5 },
            Atom { size: 2.0, rate: 0.1 },
            Atom { size: -2.0, rate: 0.1 },
        ]);
        assert!(ok.validate().is_ok());
    }

    #[test]
    fn gamma_mass_matches_exponential_integral() {
        // E1(1e-4) - E1(30) with E1(x) = -gamma - ln x + x - x^2/4 + ...
        let eps: f64 = 1e-4;
        let e1 = -0.577_215_664_901_532_9 - eps.ln() + eps - eps * eps / 4.0;
        let m = JumpMeasure::gamma();
        assert!((m.total_mass() - e1).abs() < 1e-9, "{}", m.total_mass());
        // first moment int exp(-k) dk over [eps, 30]
        let m1 = (-eps).exp() - (-30f64).exp();
        assert!((m.moment(1) - m1).abs() < 1e-10);
        // quadrature atoms carry nearly the same mass
        let q: f64 = m.atoms().iter().map(|a| a.rate).sum();
        assert!((q - m.total_mass()).abs() / m.total_mass() < 1e-3);
    }

    #[test]
    fn gamma_sampler_matches_normalized_mean() {
        let m = JumpMeasure::gamma();
        let s = m.sampler();
        let mut rng = crate::rng::path_rng(11, 0);
        let n = 200_000;
        let mean: f64 = (0..n).map(|_| s.sample(&mut rng)).sum::<f64>() / n as f64;
        let exact = m.moment(1) / m.total_mass();
        let sd = (m.moment(2) / m.total_mass() - exact * exact).sqrt();
        assert!((mean - exact).abs() < 4.0 * sd / (n as f64).sqrt(), "{mean} vs {exact}");
    }
}
