use serde::{Deserialize, Serialize};

use super::prefactor::{gaussian_k1bar, K1Estimate};
use crate::error::Result;
use crate::fk::{McConfig, RateFunction};
use crate::levy::LevyModel;
use crate::variational::{solve_el_config, solve_el_momentum, BoundaryTerm, Lagrangian, MinimizerResult};

/// `hbar grad u / u ~ leading + correction_coeff * hbar`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DriftPrediction {
    pub leading: f64,
    pub correction_coeff: f64,
    pub correction_stderr: f64,
    /// `G` at the extremal.
    pub g_value: f64,
    #[serde(skip)]
    pub minimizer: Option<MinimizerResult>,
    #[serde(skip)]
    pub k1: Option<K1Estimate>,
}

/// Configuration representation: `leading = -G(phi*)`,
/// `correction_coeff = -K1bar / K0`.
pub fn drift_prediction_config(v: &RateFunction, q: f64, t: f64, boundary: BoundaryTerm, mc: &McConfig) -> Result<DriftPrediction> {
    let phi = solve_el_config(v, q, 0.0, t, boundary)?;
    let k1 = gaussian_k1bar(v, &phi, q, boundary, mc)?;
    Ok(DriftPrediction {
        leading: -phi.g_value,
        correction_coeff: if k1.ratio == 0.0 { 0.0 } else { -k1.ratio },
        correction_stderr: k1.ratio_stderr,
        g_value: phi.g_value,
        minimizer: Some(phi),
        k1: Some(k1),
    })
}

/// Momentum representation: `leading = -G~(phi~*) = L0'(phi~*'(0))`, no
/// first-order correction.
pub fn drift_prediction_momentum(model: &LevyModel, u: &RateFunction, p: f64, t: f64, boundary: BoundaryTerm) -> Result<DriftPrediction> {
    let l = Lagrangian::new(model)?;
    let phi = solve_el_momentum(&l, u, p, 0.0, t, boundary)?;
    Ok(DriftPrediction {
        leading: -phi.g_value,
        correction_coeff: 0.0,
        correction_stderr: 0.0,
        g_value: phi.g_value,
        minimizer: Some(phi),
        k1: None,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn symmetric_point_has_no_drift() {
        let mc = McConfig::new(1000, 1e-2, 1);
        let c = drift_prediction_config(&RateFunction::polynomial(&[0.0, 0.0, 0.5, 0.0, 0.1]), 0.0, 1.0, BoundaryTerm::HALF_SQUARE, &mc).unwrap();
        assert!(c.leading.abs() < 1e-14);
        let m = drift_prediction_momentum(&LevyModel::two_point(1.0, 1.0), &RateFunction::quadratic(0.5), 0.0, 1.0, BoundaryTerm::HALF_SQUARE).unwrap();
        assert!(m.leading.abs() < 1e-14);
    }

    #[test]
    fn quadratic_config_closed_form() {
        // (phi + q)(s) = q (cosh s + B sinh s), phi'(1) = -(phi(1) + 1)
        let mc = McConfig::new(1000, 1e-2, 1);
        let c = drift_prediction_config(&RateFunction::quadratic(0.5), 1.0, 1.0, BoundaryTerm::HALF_SQUARE, &mc).unwrap();
        let (ch, sh) = (1f64.cosh(), 1f64.sinh());
        let b = -(sh + ch) / (ch + sh);
        assert!((c.leading - b).abs() < 1e-9);
        assert_eq!(c.correction_coeff, 0.0);
    }

    #[test]
    fn self_dual_momentum_equals_config() {
        let mc = McConfig::new(100, 1e-2, 1);
        let c = drift_prediction_config(&RateFunction::quadratic(0.5), 1.0, 0.5, BoundaryTerm::HALF_SQUARE, &mc).unwrap();
        let m = drift_prediction_momentum(&LevyModel::brownian(1.0), &RateFunction::quadratic(0.5), 1.0, 0.5, BoundaryTerm::HALF_SQUARE).unwrap();
        assert!((c.leading - m.leading).abs() <= 1e-8);
    }
}
