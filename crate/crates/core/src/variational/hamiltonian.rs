use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::levy::{Atom, JumpMeasure, LevyModel};

/// Largest exponent accepted in `exp(x k)`.
const EXP_SAFE: f64 = 700.0;

/// Cumulant Hamiltonian `H0(x) = b x + sigma^2 x^2 / 2 + int (e^{xk} - 1) nu(dk)`
/// of the base (unscaled) triplet.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Hamiltonian {
    pub drift: f64,
    pub sigma2: f64,
    atoms: Vec<Atom>,
    max_jump: f64,
}

impl Hamiltonian {
    pub fn new(model: &LevyModel) -> Result<Self> {
        model.validate()?;
        let atoms = model.jumps.atoms();
        let max_jump = atoms.iter().fold(0.0f64, |m, a| m.max(a.size.abs()));
        Ok(Hamiltonian { drift: model.drift, sigma2: model.sigma2, atoms, max_jump })
    }

    pub fn gaussian(sigma2: f64) -> Self {
        Hamiltonian { drift: 0.0, sigma2, atoms: Vec::new(), max_jump: 0.0 }
    }

    pub fn atoms(&self) -> &[Atom] {
        &self.atoms
    }

    fn check(&self, x: f64) -> Result<()> {
        if !x.is_finite() || x.abs() * self.max_jump > EXP_SAFE {
            return Err(Error::Range(format!("H0 evaluated at x = {x} overflows")));
        }
        Ok(())
    }

    pub fn h0(&self, x: f64) -> Result<f64> {
        self.check(x)?;
        let jumps: f64 = self.atoms.iter().map(|a| a.rate * (x * a.size).exp_m1()).sum();
        Ok(self.drift * x + 0.5 * self.sigma2 * x * x + jumps)
    }

    pub fn h0_prime(&self, x: f64) -> Result<f64> {
        self.check(x)?;
        let jumps: f64 = self.atoms.iter().map(|a| a.rate * a.size * (x * a.size).exp()).sum();
        Ok(self.drift + self.sigma2 * x + jumps)
    }

    pub fn h0_second(&self, x: f64) -> Result<f64> {
        self.check(x)?;
        let jumps: f64 = self.atoms.iter().map(|a| a.rate * a.size * a.size * (x * a.size).exp()).sum();
        Ok(self.sigma2 + jumps)
    }

    pub fn is_strictly_convex(&self) -> bool {
        self.sigma2 > 0.0 || self.atoms.iter().any(|a| a.rate > 0.0 && a.size != 0.0)
    }
}

/// `H0(x)`; exact for atomic measures, midpoint quadrature for the gamma density.
pub fn hamiltonian_h0(h: &Hamiltonian, x: f64) -> Result<f64> {
    h.h0(x)
}

/// Closed forms available for `L0`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum LagrangianForm {
    /// `L0(u) = (u - b)^2 / (2 sigma^2)`.
    Gaussian { drift: f64, sigma2: f64 },
    /// `L0(u) = (u/a) asinh(u/(m a)) - m sqrt(1 + (u/(m a))^2) + m`.
    TwoPoint { alpha: f64, mass: f64 },
    NumericLegendre,
}

/// `L0(u) = sup_x (x u - H0(x))`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Lagrangian {
    pub hamiltonian: Hamiltonian,
    pub form: LagrangianForm,
}

/// Value of the Legendre transform and the maximizing `x`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Legendre {
    pub value: f64,
    pub argmax: f64,
}

impl Lagrangian {
    /// Picks the closed form when the model has one.
    pub fn new(model: &LevyModel) -> Result<Self> {
        let hamiltonian = Hamiltonian::new(model)?;
        if !hamiltonian.is_strictly_convex() {
            return Err(Error::Config("H0 must be strictly convex (need sigma2 > 0 or jumps)".into()));
        }
        let form = match (&model.jumps, model.sigma2, model.drift) {
            (JumpMeasure::None, s, b) => LagrangianForm::Gaussian { drift: b, sigma2: s },
            (JumpMeasure::TwoPoint { alpha, mass }, s, b) if s == 0.0 && b == 0.0 => {
                LagrangianForm::TwoPoint { alpha: *alpha, mass: *mass }
            }
            _ => LagrangianForm::NumericLegendre,
        };
        Ok(Lagrangian { hamiltonian, form })
    }

    /// Forces the iterative transform, e.g. to test it against a closed form.
    pub fn numeric(model: &LevyModel) -> Result<Self> {
        let mut l = Lagrangian::new(model)?;
        l.form = LagrangianForm::NumericLegendre;
        Ok(l)
    }

    pub fn gaussian(sigma2: f64) -> Self {
        Lagrangian { hamiltonian: Hamiltonian::gaussian(sigma2), form: LagrangianForm::Gaussian { drift: 0.0, sigma2 } }
    }

    pub fn l0(&self, u: f64) -> Result<f64> {
        Ok(legendre_l0(self, u)?.value)
    }

    /// `L0'(u)`, which equals the maximizer `x*(u)`.
    pub fn l0_prime(&self, u: f64) -> Result<f64> {
        Ok(legendre_l0(self, u)?.argmax)
    }

    /// `L0''(u) = 1 / H0''(x*(u))`.
    pub fn l0_second(&self, u: f64) -> Result<f64> {
        let x = self.l0_prime(u)?;
        Ok(1.0 / self.hamiltonian.h0_second(x)?)
    }
}

/// Legendre transform with its maximizer. Closed forms bypass iteration; the
/// numeric path solves `H0'(x) = u` by Newton safeguarded with a bisection
/// bracket found by doubling.
pub fn legendre_l0(l: &Lagrangian, u: f64) -> Result<Legendre> {
    if !u.is_finite() {
        return Err(Error::Range(format!("L0 evaluated at u = {u}")));
    }
    match l.form {
        LagrangianForm::Gaussian { drift, sigma2 } => {
            let x = (u - drift) / sigma2;
            Ok(Legendre { value: 0.5 * (u - drift) * x, argmax: x })
        }
        LagrangianForm::TwoPoint { alpha, mass } => {
            let r = u / (mass * alpha);
            let x = r.asinh() / alpha;
            Ok(Legendre { value: u * x - mass * (r.hypot(1.0) - 1.0), argmax: x })
        }
        LagrangianForm::NumericLegendre => numeric_legendre(&l.hamiltonian, u),
    }
}

fn numeric_legendre(h: &Hamiltonian, u: f64) -> Result<Legendre> {
    let f = |x: f64| -> Result<f64> { Ok(h.h0_prime(x)? - u) };
    let f0 = f(0.0)?;
    if f0 == 0.0 {
        return Ok(Legendre { value: -h.h0(0.0)?, argmax: 0.0 });
    }
    // bracket by doubling away from 0
    let dir = if f0 < 0.0 { 1.0 } else { -1.0 };
    let (mut lo, mut hi) = (0.0, dir);
    let mut step = 1.0;
    loop {
        let v = f(hi).map_err(|_| Error::Range(format!("u = {u} outside the range of H0'")))?;
        if v * f0 <= 0.0 {
            break;
        }
        lo = hi;
        step *= 2.0;
        hi = dir * step;
    }
    if lo > hi {
        std::mem::swap(&mut lo, &mut hi);
    }
    let mut x = 0.5 * (lo + hi);
    for _ in 0..200 {
        let fx = f(x)?;
        if fx == 0.0 {
            break;
        }
        if fx < 0.0 {
            lo = x;
        } else {
            hi = x;
        }
        let d = h.h0_second(x)?;
        let mut next = x - fx / d;
        if !(next > lo && next < hi) {
            next = 0.5 * (lo + hi);
        }
        if (next - x).abs() <= 1e-15 * (1.0 + x.abs()) {
            x = next;
            break;
        }
        x = next;
    }
    Ok(Legendre { value: u * x - h.h0(x)?, argmax: x })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn two_point(alpha: f64) -> LevyModel {
        LevyModel::two_point(alpha, 1.0)
    }

    #[test]
    fn h0_examples() {
        let h = Hamiltonian::new(&two_point(1.0)).unwrap();
        assert_eq!(h.h0(0.0).unwrap(), 0.0);
        assert!((h.h0(1.0).unwrap() - 0.543081).abs() < 1e-6);
        assert!((Hamiltonian::new(&LevyModel::brownian(1.0)).unwrap().h0(2.0).unwrap() - 2.0).abs() < 1e-15);
        assert!(matches!(h.h0(1e3), Err(Error::Range(_))));
    }

    #[test]
    fn l0_examples() {
        for model in [LevyModel::brownian(1.0), two_point(1.0), LevyModel::gamma_subordinator()] {
            let l = Lagrangian::new(&model).unwrap();
            if matches!(model.jumps, JumpMeasure::GammaDensity { .. }) {
                // H0' > 0 for a subordinator, so u = 0 is not attained
                assert!(matches!(legendre_l0(&l, 0.0), Err(Error::Range(_))));
                continue;
            }
            let r = legendre_l0(&l, 0.0).unwrap();
            assert!(r.value.abs() < 1e-15 && r.argmax.abs() < 1e-15);
        }
        let l = Lagrangian::new(&two_point(1.0)).unwrap();
        assert!((l.l0(1.0).unwrap() - 0.467160).abs() < 1e-6);
    }

    #[test]
    fn numeric_matches_two_point_closed_form() {
        for alpha in [0.5, 1.0, 2.0] {
            let closed = Lagrangian::new(&two_point(alpha)).unwrap();
            let numeric = Lagrangian::numeric(&two_point(alpha)).unwrap();
            let mut worst = 0.0f64;
            for i in -400..=400 {
                let u = i as f64 / 400.0 * 10.0 * alpha;
                worst = worst.max((closed.l0(u).unwrap() - numeric.l0(u).unwrap()).abs());
            }
            assert!(worst <= 1e-8, "alpha = {alpha}: {worst}");
        }
    }

    #[test]
    fn legendre_involution() {
        // sup_u (x u - L0(u)) recovers H0; maximize on a fine grid then polish
        let l = Lagrangian::numeric(&two_point(1.0)).unwrap();
        for x in [-1.5, -0.3, 0.0, 0.7, 1.2] {
            let target = l.hamiltonian.h0(x).unwrap();
            // the maximizer is u = H0'(x); search around it without using that fact
            let (mut a, mut b) = (-20.0f64, 20.0f64);
            for _ in 0..200 {
                let m1 = a + (b - a) / 3.0;
                let m2 = b - (b - a) / 3.0;
                if x * m1 - l.l0(m1).unwrap() < x * m2 - l.l0(m2).unwrap() {
                    a = m1;
                } else {
                    b = m2;
                }
            }
            let u = 0.5 * (a + b);
            assert!((x * u - l.l0(u).unwrap() - target).abs() < 1e-6, "x = {x}");
        }
    }

    proptest! {
        #[test]
        fn fenchel_young(u in -8.0f64..8.0, x in -2.0f64..2.0, alpha in 0.3f64..2.0) {
            let l = Lagrangian::numeric(&two_point(alpha)).unwrap();
            let r = legendre_l0(&l, u).unwrap();
            let h = &l.hamiltonian;
            prop_assert!(x * u <= r.value + h.h0(x).unwrap() + 1e-10);
            prop_assert!((r.argmax * u - r.value - h.h0(r.argmax).unwrap()).abs() <= 1e-8);
        }

        #[test]
        fn l0_nonnegative_and_convex(u in -6.0f64..6.0, d in 0.01f64..1.0) {
            let l = Lagrangian::numeric(&LevyModel { sigma2: 0.5, ..two_point(1.0) }).unwrap();
            let (a, b, c) = (l.l0(u - d).unwrap(), l.l0(u).unwrap(), l.l0(u + d).unwrap());
            prop_assert!(b >= -1e-14);
            prop_assert!(a + c - 2.0 * b >= -1e-9);
        }
    }
}
