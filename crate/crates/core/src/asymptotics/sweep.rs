use serde::{Deserialize, Serialize};

use super::prefactor::cameron_martin;
use crate::error::{Error, Result};
use crate::fk::{fk_estimate, BoundaryData, McConfig, ProblemSpec};
use crate::levy::JumpMeasure;
use crate::pide::{solve_pide_scaled, GridParams};
use crate::variational::{solve_el_momentum, Lagrangian, MinimizerResult};

/// Data source for `u^hbar`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "source", rename_all = "snake_case")]
pub enum SweepSource {
    Pide { grid: GridParams },
    Mc { mc: McConfig },
}

/// Default ladder.
pub const DEFAULT_LADDER: [f64; 5] = [0.4, 0.2, 0.1, 0.05, 0.025];

/// Fit of `ln u = -A / hbar + ln C + r(hbar)` over an `hbar` ladder.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExpansionReport {
    pub p: f64,
    pub t: f64,
    pub hbars: Vec<f64>,
    /// `ln u` per `hbar`, with the `(2 pi hbar)^(-1/2)` normalization removed when present.
    pub log_values: Vec<f64>,
    /// Weighted (`1/hbar`) least-squares action.
    pub fitted_action: f64,
    pub fitted_prefactor: f64,
    /// Action from the two smallest `hbar`.
    pub local_action: f64,
    pub predicted_action: f64,
    pub predicted_prefactor: Option<f64>,
    pub action_rel_error: f64,
    pub local_action_rel_error: f64,
    pub prefactor_rel_error: Option<f64>,
    pub residuals: Vec<f64>,
    pub complete: bool,
    pub failures: Vec<String>,
}

/// Extremal matching the problem: Hamiltonian flow of the model's `H0`, the
/// problem's rate and the boundary term its data induce.
pub fn sweep_minimizer(spec: &ProblemSpec, p: f64, t: f64) -> Result<MinimizerResult> {
    let elapsed = spec.elapsed(t)?;
    if elapsed == 0.0 {
        return Err(Error::Argument("sweep needs a positive elapsed time".into()));
    }
    let l = Lagrangian::new(&spec.model.clone().unscaled())?;
    solve_el_momentum(&l, &spec.rate, p, 0.0, elapsed, spec.data.boundary_term())
}

/// Gaussian prefactor when it has a closed form: Brownian models with a
/// quadratic rate, and extremals that stay at rest (`phi = 0`).
fn predicted_prefactor(spec: &ProblemSpec, minimizer: &MinimizerResult, p: f64, tau: f64) -> Option<f64> {
    let kappa = spec.data.boundary_term().kappa();
    let coeffs = spec.rate.coefficients();
    let at_rest = minimizer.path.iter().all(|y| y.abs() < 1e-12);
    let variance = match &spec.model.jumps {
        JumpMeasure::None => {
            let c = coeffs.filter(|c| c.len() == 3 && c[2] > 0.0)?;
            return Some(cameron_martin((2.0 * c[2] * spec.model.sigma2).sqrt(), 2.0 * kappa * spec.model.sigma2, tau));
        }
        _ if at_rest => Lagrangian::new(&spec.model.clone().unscaled()).ok()?.hamiltonian.h0_second(0.0).ok()?,
        _ => return None,
    };
    let curvature = spec.rate.derivative(2, p);
    if curvature < 0.0 {
        return None;
    }
    Some(cameron_martin((curvature * variance).sqrt(), 2.0 * kappa * variance, tau))
}

/// Weighted least squares of `y = -A x + c` with `x = 1/hbar`, weights `x`.
fn fit(hbars: &[f64], ys: &[f64]) -> (f64, f64) {
    let (mut sw, mut sx, mut sy, mut sxx, mut sxy) = (0.0, 0.0, 0.0, 0.0, 0.0);
    for (h, y) in hbars.iter().zip(ys) {
        let x = 1.0 / h;
        let w = x;
        sw += w;
        sx += w * x;
        sy += w * y;
        sxx += w * x * x;
        sxy += w * x * y;
    }
    let slope = (sw * sxy - sx * sy) / (sw * sxx - sx * sx);
    let intercept = (sy - slope * sx) / sw;
    (-slope, intercept)
}

/// Runs the problem over a strictly decreasing ladder of at least 4 `hbar`
/// values and fits the large-deviation expansion at `(t, p)`.
pub fn hbar_sweep(spec: &ProblemSpec, p: f64, t: f64, hbars: &[f64], source: &SweepSource) -> Result<ExpansionReport> {
    if hbars.len() < 4 {
        return Err(Error::Argument(format!("hbar ladder needs at least 4 values, got {}", hbars.len())));
    }
    if !hbars.windows(2).all(|w| w[1] < w[0]) || hbars.iter().any(|h| !(h.is_finite() && *h > 0.0)) {
        return Err(Error::Argument("hbar ladder must be positive and strictly decreasing".into()));
    }
    spec.validate()?;
    let minimizer = sweep_minimizer(spec, p, t)?;
    let tau = spec.elapsed(t)?;
    let normalized = matches!(spec.data, BoundaryData::ScaledGaussian { normalized: true, .. });

    let mut used = Vec::new();
    let mut ys = Vec::new();
    let mut failures = Vec::new();
    for &h in hbars {
        let log_u = match source {
            SweepSource::Pide { grid } => solve_pide_scaled(spec, h, &grid.with_store_every(1)).and_then(|sol| {
                let u = sol.value_at(t, p)?;
                if u > 0.0 {
                    Ok(u.ln())
                } else {
                    Err(Error::Solver(format!("non-positive grid value {u} at hbar = {h}")))
                }
            }),
            SweepSource::Mc { mc } => fk_estimate(&spec.with_hbar(h), t, p, mc).map(|e| e.log_mean),
        };
        match log_u {
            Ok(l) => {
                used.push(h);
                ys.push(if normalized { l + 0.5 * (2.0 * std::f64::consts::PI * h).ln() } else { l });
            }
            Err(e) => failures.push(format!("hbar = {h}: {e}")),
        }
    }
    if used.len() < 2 {
        return Err(Error::Solver(format!("sweep produced fewer than two values: {}", failures.join("; "))));
    }
    let (fitted_action, log_c) = fit(&used, &ys);
    let n = used.len();
    let local_action = -(ys[n - 1] - ys[n - 2]) / (1.0 / used[n - 1] - 1.0 / used[n - 2]);
    let residuals: Vec<f64> = used.iter().zip(&ys).map(|(h, y)| y - (-fitted_action / h + log_c)).collect();
    let predicted_action = minimizer.total;
    let predicted_prefactor = predicted_prefactor(spec, &minimizer, p, tau);
    let fitted_prefactor = log_c.exp();
    let rel = |a: f64, b: f64| if b == 0.0 { (a - b).abs() } else { ((a - b) / b).abs() };
    Ok(ExpansionReport {
        p,
        t,
        hbars: used,
        log_values: ys,
        fitted_action,
        fitted_prefactor,
        local_action,
        predicted_action,
        predicted_prefactor,
        action_rel_error: rel(fitted_action, predicted_action),
        local_action_rel_error: rel(local_action, predicted_action),
        prefactor_rel_error: predicted_prefactor.map(|c| rel(fitted_prefactor, c)),
        residuals,
        complete: failures.is_empty(),
        failures,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fk::RateFunction;
    use crate::levy::LevyModel;

    fn harmonic() -> ProblemSpec {
        ProblemSpec::backward(
            LevyModel::brownian(1.0),
            RateFunction::quadratic(0.5),
            BoundaryData::ScaledGaussian { c: 1.0, normalized: false },
            1.0,
        )
    }

    #[test]
    fn ladder_must_decrease() {
        let src = SweepSource::Mc { mc: McConfig::new(100, 0.1, 1) };
        let mut rev = DEFAULT_LADDER;
        rev.reverse();
        assert!(matches!(hbar_sweep(&harmonic(), 0.4, 0.5, &rev, &src), Err(Error::Argument(_))));
        assert!(hbar_sweep(&harmonic(), 0.4, 0.5, &DEFAULT_LADDER[..3], &src).is_err());
    }

    #[test]
    fn harmonic_sweep_recovers_action_and_prefactor() {
        let grid = GridParams::new(4.0, 641, 2e-3);
        let r = hbar_sweep(&harmonic(), 0.4, 0.5, &DEFAULT_LADDER, &SweepSource::Pide { grid }).unwrap();
        assert!(r.complete);
        assert!((r.predicted_action - 0.10236).abs() < 1e-5);
        assert!(r.action_rel_error < 0.01, "{r:?}");
        assert!(r.prefactor_rel_error.unwrap() < 0.1, "{r:?}");
        assert!((r.predicted_prefactor.unwrap() - 0.678873).abs() < 1e-6);
    }

    #[test]
    fn jump_sweep_predictions() {
        let spec = ProblemSpec::backward(LevyModel::two_point(1.0, 1.0), RateFunction::QuadraticMinusLinear, BoundaryData::ConstantExp, 1.0);
        let z = sweep_minimizer(&spec, 0.5, 0.0).unwrap();
        assert!((z.total - 0.75).abs() < 1e-12);
        let c = predicted_prefactor(&spec, &z, 0.5, 1.0).unwrap();
        assert!((c - 2f64.sqrt().cosh().powf(-0.5)).abs() < 1e-12);
    }
}
