use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use super::wiener::{check_mc, estimate, exact, weighted_power, wiener_paths};
use crate::error::{Error, Result};
use crate::fk::{MCEstimate, McConfig, RateFunction};
use crate::variational::{BoundaryTerm, MinimizerResult};

/// Fewest paths accepted by the prefactor estimators.
pub const MIN_PREFACTOR_PATHS: usize = 10_000;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PrefactorDirection {
    /// Terminal data at time 1: `F'' = F`, `F(1) = 1/(2 pi)`, `F'(1) = -1/pi`.
    Forward,
    /// Initial data at time 0: `F*(0) = 1/(2 pi)`, `F*'(0) = 1/pi`.
    Backward,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PrefactorSpec {
    pub direction: PrefactorDirection,
    pub t: f64,
}

impl PrefactorSpec {
    pub fn forward(t: f64) -> Self {
        PrefactorSpec { direction: PrefactorDirection::Forward, t }
    }

    pub fn backward(t: f64) -> Self {
        PrefactorSpec { direction: PrefactorDirection::Backward, t }
    }

    fn validate(&self) -> Result<()> {
        if !(0.0..=1.0).contains(&self.t) {
            return Err(Error::Argument(format!("prefactor time must lie in [0, 1], got {}", self.t)));
        }
        Ok(())
    }

    /// Length of the Wiener horizon in the matching expectation.
    pub fn horizon(&self) -> f64 {
        match self.direction {
            PrefactorDirection::Forward => 1.0 - self.t,
            PrefactorDirection::Backward => self.t,
        }
    }
}

/// `F` from its closed form and from RK4 integration, with `K = (2 pi F)^(-1/2)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PrefactorValue {
    pub f: f64,
    pub f_ode: f64,
    pub k: f64,
    pub k_ode: f64,
}

pub fn prefactor_f(spec: &PrefactorSpec) -> Result<PrefactorValue> {
    spec.validate()?;
    let tau = spec.horizon();
    let f = (tau.cosh() + 2.0 * tau.sinh()) / (2.0 * PI);
    // integrate F'' = F over the horizon from the boundary data; in the
    // forward case run backwards from 1, which is the same system in tau = 1 - t
    let steps = 10_000;
    let h = tau / steps as f64;
    let (mut y, mut dy) = (1.0 / (2.0 * PI), 1.0 / PI);
    for _ in 0..steps {
        let k1 = (dy, y);
        let k2 = (dy + 0.5 * h * k1.1, y + 0.5 * h * k1.0);
        let k3 = (dy + 0.5 * h * k2.1, y + 0.5 * h * k2.0);
        let k4 = (dy + h * k3.1, y + h * k3.0);
        y += h / 6.0 * (k1.0 + 2.0 * k2.0 + 2.0 * k3.0 + k4.0);
        dy += h / 6.0 * (k1.1 + 2.0 * k2.1 + 2.0 * k3.1 + k4.1);
    }
    let k = |f: f64| (2.0 * PI * f).powf(-0.5);
    Ok(PrefactorValue { f, f_ode: y, k: k(f), k_ode: k(y) })
}

/// `E exp(-1/2 int_0^tau W^2 ds - W_tau^2)` with `tau` the horizon of `spec`.
pub fn prefactor_mc(spec: &PrefactorSpec, mc: &McConfig) -> Result<MCEstimate> {
    spec.validate()?;
    check_mc(mc, MIN_PREFACTOR_PATHS)?;
    let tau = spec.horizon();
    if tau == 0.0 {
        return Ok(exact(1.0, mc));
    }
    let xs = wiener_paths(tau, mc, |w, h| {
        let end = w[w.len() - 1];
        (-0.5 * weighted_power(w, h, 2, &|_| 1.0) - end * end).exp()
    });
    Ok(estimate(&xs, mc))
}

/// `V''`, `V'''`, `V''''` along the minimizer, sampled on the Wiener grid.
fn along(v: &RateFunction, phi: &MinimizerResult, q: f64, order: u32, steps: usize) -> Vec<f64> {
    let (t0, t1) = (phi.start(), phi.end());
    (0..=steps)
        .map(|k| {
            let s = t0 + (t1 - t0) * k as f64 / steps as f64;
            v.derivative(order, phi.path_at(s) + q)
        })
        .collect()
}

fn grid_steps(horizon: f64, dt: f64) -> usize {
    ((horizon / dt) - 1e-9).ceil().max(1.0) as usize
}

/// `K0 = E exp(1/2 F''(phi)(W, W)) = E exp(-1/2 int V''(phi + q) W^2 ds - kappa W_t^2)`.
pub fn gaussian_k0(v: &RateFunction, phi: &MinimizerResult, q: f64, boundary: BoundaryTerm, mc: &McConfig) -> Result<MCEstimate> {
    mc.validate()?;
    let horizon = phi.end() - phi.start();
    let kappa = boundary.kappa();
    let steps = grid_steps(horizon, mc.dt);
    let v2 = along(v, phi, q, 2, steps);
    let xs = wiener_paths(horizon, mc, |w, h| {
        let end = w[w.len() - 1];
        (-0.5 * weighted_power(w, h, 2, &|k| v2[k]) - kappa * end * end).exp()
    });
    Ok(estimate(&xs, mc))
}

/// `K1bar` together with `K0` from the same paths and the ratio used in the
/// drift correction.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct K1Estimate {
    pub k1bar: MCEstimate,
    pub k0: MCEstimate,
    pub ratio: f64,
    /// Delta-method standard error of `ratio`.
    pub ratio_stderr: f64,
}

/// Single pass over Wiener paths evaluating
/// `exp(F''/2) (G''/2 + G' F3 / 6 + G F4 / 24 + G F3^2 / 72)` with
/// `G'(W) = int V'' W + 2 kappa W_t`, `G'' = int V''' W^2`,
/// `F3 = -int V''' W^3`, `F4 = -int V'''' W^4` along the minimizer.
pub fn gaussian_k1bar(v: &RateFunction, phi: &MinimizerResult, q: f64, boundary: BoundaryTerm, mc: &McConfig) -> Result<K1Estimate> {
    mc.validate()?;
    let horizon = phi.end() - phi.start();
    let kappa = boundary.kappa();
    let steps = grid_steps(horizon, mc.dt);
    let (v2, v3, v4) = (along(v, phi, q, 2, steps), along(v, phi, q, 3, steps), along(v, phi, q, 4, steps));
    let g = phi.g_value;
    let pairs = wiener_paths(horizon, mc, |w, h| {
        let end = w[w.len() - 1];
        let e = (-0.5 * weighted_power(w, h, 2, &|k| v2[k]) - kappa * end * end).exp();
        let g1 = weighted_power(w, h, 1, &|k| v2[k]) + 2.0 * kappa * end;
        let g2 = weighted_power(w, h, 2, &|k| v3[k]);
        let f3 = -weighted_power(w, h, 3, &|k| v3[k]);
        let f4 = -weighted_power(w, h, 4, &|k| v4[k]);
        (e * (0.5 * g2 + g1 * f3 / 6.0 + g * f4 / 24.0 + g * f3 * f3 / 72.0), e)
    });
    let xs: Vec<f64> = pairs.iter().map(|p| p.0).collect();
    let es: Vec<f64> = pairs.iter().map(|p| p.1).collect();
    let (k1bar, k0) = (estimate(&xs, mc), estimate(&es, mc));
    let n = xs.len() as f64;
    let ratio = k1bar.mean / k0.mean;
    let cov = xs.iter().zip(&es).map(|(x, e)| (x - k1bar.mean) * (e - k0.mean)).sum::<f64>() / (n - 1.0);
    let (vx, ve) = ((k1bar.stderr * k1bar.stderr) * n, (k0.stderr * k0.stderr) * n);
    let ratio_var = (vx - 2.0 * ratio * cov + ratio * ratio * ve).max(0.0) / (n * k0.mean * k0.mean);
    Ok(K1Estimate { k1bar, k0, ratio, ratio_stderr: ratio_var.sqrt() })
}

/// `P = E exp(-int_t^1 sigma_s^2 ds)` with
/// `sigma_s = alpha sqrt(cosh rho(s)) W_{s - t}` along the jump minimizer.
pub fn jump_prefactor_mc(alpha: f64, zbar: &MinimizerResult, mc: &McConfig) -> Result<MCEstimate> {
    if !(alpha.is_finite() && alpha > 0.0) {
        return Err(Error::Argument(format!("alpha must be > 0, got {alpha}")));
    }
    check_mc(mc, 2)?;
    let Some(_) = zbar.rho else {
        return Err(Error::Argument("minimizer carries no rho profile; use solve_el_jump".into()));
    };
    let (t0, t1) = (zbar.start(), zbar.end());
    let horizon = t1 - t0;
    let steps = grid_steps(horizon, mc.dt);
    // rho lives on [t, 1] like the minimizer; W starts afresh at s = t
    let c: Vec<f64> = (0..=steps)
        .map(|k| {
            let s = t0 + horizon * k as f64 / steps as f64;
            alpha * alpha * zbar.rho_at(s).unwrap().cosh()
        })
        .collect();
    let xs = wiener_paths(horizon, mc, |w, h| (-weighted_power(w, h, 2, &|k| c[k])).exp());
    Ok(estimate(&xs, mc))
}

/// `E exp(-w^2/2 int_0^tau W^2 - beta/2 W_tau^2) = (cosh(w tau) + (beta/w) sinh(w tau))^(-1/2)`.
pub fn cameron_martin(omega: f64, beta: f64, tau: f64) -> f64 {
    if omega == 0.0 {
        return (1.0 + beta * tau).powf(-0.5);
    }
    ((omega * tau).cosh() + beta / omega * (omega * tau).sinh()).powf(-0.5)
}
