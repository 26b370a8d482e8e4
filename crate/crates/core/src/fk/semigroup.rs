use serde::{Deserialize, Serialize};

use super::estimator::{weighted_expectation, McConfig};
use super::problem::ProblemSpec;
use crate::error::Result;
use crate::levy::generator_with;
use crate::quadrature::gauss_legendre;
use crate::rng::derive_seed;

/// `|T_t g(x) - g(x) - int_0^t T_s (A g - U g / hbar)(x) ds|` with its
/// Monte Carlo uncertainty.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SemigroupResidual {
    pub residual: f64,
    /// Combined standard error of the two sides.
    pub stderr: f64,
    pub lhs: f64,
    pub rhs: f64,
}

/// Semigroup identity check at elapsed time `t`. The left side and every
/// Gauss-Legendre node use independent seeds derived from `mc.seed`.
pub fn semigroup_residual(spec: &ProblemSpec, x: f64, t: f64, quad_points: usize, mc: &McConfig) -> Result<SemigroupResidual> {
    spec.validate()?;
    mc.validate()?;
    if t == 0.0 {
        return Ok(SemigroupResidual { residual: 0.0, stderr: 0.0, lhs: 0.0, rhs: 0.0 });
    }
    let hbar = spec.hbar();
    let g = |y: f64| spec.data.value(y, hbar);
    let lhs_mc = McConfig { seed: derive_seed(mc.seed, 0), ..*mc };
    let terminal = weighted_expectation(spec, t, x, &lhs_mc, |y| spec.data.log_abs_sign(y, hbar))?;
    let lhs = terminal.mean - g(x);

    let dynamics = spec.model.effective();
    let reduced = |y: f64| {
        let v = generator_with(&dynamics, &g, y) - spec.rate.value(y) / hbar * g(y);
        if v == 0.0 {
            (f64::NEG_INFINITY, 0.0)
        } else {
            (v.abs().ln(), v.signum())
        }
    };
    let mut rhs = 0.0;
    let mut var = terminal.stderr * terminal.stderr;
    for (j, (s, w)) in gauss_legendre(quad_points.max(1), 0.0, t).into_iter().enumerate() {
        let node_mc = McConfig { seed: derive_seed(mc.seed, j as u64 + 1), ..*mc };
        let e = weighted_expectation(spec, s, x, &node_mc, reduced)?;
        rhs += w * e.mean;
        var += w * w * e.stderr * e.stderr;
    }
    Ok(SemigroupResidual { residual: (lhs - rhs).abs(), stderr: var.sqrt(), lhs, rhs })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fk::{BoundaryData, RateFunction};
    use crate::levy::LevyModel;

    fn spec(model: LevyModel) -> ProblemSpec {
        ProblemSpec::forward(
            model,
            RateFunction::quadratic(0.5),
            BoundaryData::Schwartz { center: 0.0, width: 1.0, order: 0 },
            1.0,
        )
    }

    #[test]
    fn zero_time_is_exact() {
        let r = semigroup_residual(&spec(LevyModel::brownian(1.0)), 0.2, 0.0, 4, &McConfig::new(10, 0.01, 1)).unwrap();
        assert_eq!(r.residual, 0.0);
    }

    #[test]
    fn identity_holds_within_noise() {
        for model in [LevyModel::brownian(1.0), LevyModel::two_point(1.0, 1.0)] {
            let r = semigroup_residual(&spec(model), 0.3, 0.1, 6, &McConfig::new(20_000, 1e-3, 4)).unwrap();
            assert!(r.residual <= 3.0 * r.stderr, "{r:?}");
            assert!(r.lhs.abs() > 5.0 * r.stderr, "signal should dominate noise: {r:?}");
        }
    }
}
