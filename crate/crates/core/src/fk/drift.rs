use serde::{Deserialize, Serialize};

use super::estimator::{map_paths, rate_integral, McConfig, MCEstimate};
use super::problem::ProblemSpec;
use crate::error::{Error, Result};
use crate::levy::check_horizon;

/// Number of contiguous path batches used by the jackknife.
pub const JACKKNIFE_BATCHES: usize = 20;

/// `hbar * d/dp ln u` by a central difference on common random numbers.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DriftEstimate {
    pub value: f64,
    pub stderr: f64,
    pub hbar: f64,
    pub delta: f64,
    /// Estimate of `u(t, p)` from the same paths.
    pub u: MCEstimate,
}

/// `hbar (u(p + dp) - u(p - dp)) / (2 dp u(p))` for the problem at scale
/// `hbar`, all three values from identical paths; batch-jackknife stderr.
pub fn drift_estimate(spec: &ProblemSpec, hbar: f64, t: f64, p: f64, delta: f64, mc: &McConfig) -> Result<DriftEstimate> {
    if !(hbar.is_finite() && hbar > 0.0) {
        return Err(Error::Argument(format!("hbar must be > 0, got {hbar}")));
    }
    if !(delta.is_finite() && delta > 0.0) {
        return Err(Error::Argument(format!("delta must be > 0, got {delta}")));
    }
    let spec = spec.with_hbar(hbar);
    spec.validate()?;
    mc.validate()?;
    let elapsed = spec.elapsed(t)?;
    let n = mc.n_paths;
    let weights: Vec<[(f64, f64); 3]> = if elapsed == 0.0 {
        let w = [p - delta, p, p + delta].map(|y| spec.data.log_abs_sign(y, hbar));
        vec![w; n]
    } else {
        let dt = mc.dt.min(elapsed);
        check_horizon(elapsed, dt)?;
        let dynamics = spec.model.effective();
        map_paths(&dynamics, elapsed, dt, n, mc.seed, |buf| {
            let x = buf.values[buf.values.len() - 1];
            [p - delta, p, p + delta].map(|y| {
                let (l, s) = spec.data.log_abs_sign(y + x, hbar);
                (l - rate_integral(&spec.rate, buf, y) / hbar, s)
            })
        })
    };

    let mut shift = f64::NEG_INFINITY;
    for w in &weights {
        for &(l, s) in w {
            if s != 0.0 {
                if l.is_nan() || l == f64::INFINITY {
                    return Err(Error::Config("exponent overflow in the Feynman-Kac weight".into()));
                }
                shift = shift.max(l);
            }
        }
    }
    if !shift.is_finite() {
        return Err(Error::Degenerate("all path weights vanish".into()));
    }

    let batches = JACKKNIFE_BATCHES.min(n);
    let mut sums = vec![[0.0f64; 3]; batches];
    let mut sum_sq0 = 0.0;
    for (i, w) in weights.iter().enumerate() {
        let b = i * batches / n;
        for k in 0..3 {
            let (l, s) = w[k];
            if s != 0.0 {
                let e = s * (l - shift).exp();
                sums[b][k] += e;
                if k == 1 {
                    sum_sq0 += e * e;
                }
            }
        }
    }
    let total: [f64; 3] = std::array::from_fn(|k| sums.iter().map(|b| b[k]).sum());
    if total[1] / (n as f64) < 10.0 * f64::EPSILON {
        return Err(Error::Degenerate(format!(
            "u(t, p) at p = {p} is below 10 machine epsilon relative to the largest path weight"
        )));
    }
    let quotient = |s: [f64; 3]| hbar * (s[2] - s[0]) / (2.0 * delta * s[1]);
    let value = quotient(total);
    let loo: Vec<f64> = sums.iter().map(|b| quotient(std::array::from_fn(|k| total[k] - b[k]))).collect();
    let bn = batches as f64;
    let mean_loo = loo.iter().sum::<f64>() / bn;
    let stderr = ((bn - 1.0) / bn * loo.iter().map(|v| (v - mean_loo).powi(2)).sum::<f64>()).sqrt();

    let nf = n as f64;
    let m = total[1] / nf;
    let var = ((sum_sq0 - total[1] * m) / (nf - 1.0)).max(0.0);
    let log_mean = shift + m.abs().ln();
    let u = MCEstimate {
        mean: m.signum() * log_mean.exp(),
        stderr: shift.exp() * (var / nf).sqrt(),
        log_mean,
        n_paths: n,
        dt: mc.dt,
        seed: mc.seed,
    };
    Ok(DriftEstimate { value, stderr, hbar, delta, u })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fk::{BoundaryData, RateFunction};
    use crate::levy::LevyModel;

    fn harmonic() -> ProblemSpec {
        ProblemSpec::forward(
            LevyModel::brownian(1.0),
            RateFunction::quadratic(0.5),
            BoundaryData::ScaledGaussian { c: 0.5, normalized: true },
            0.5,
        )
    }

    #[test]
    fn symmetric_point_has_zero_drift() {
        for model in [LevyModel::brownian(1.0), LevyModel::two_point(1.0, 1.0)] {
            let spec = ProblemSpec { model, ..harmonic() };
            let d = drift_estimate(&spec, 0.2, 0.5, 0.0, 1e-3, &McConfig::new(4000, 1e-2, 3)).unwrap();
            assert!(d.value.abs() <= 3.0 * d.stderr + 1e-12, "{d:?}");
        }
    }

    #[test]
    fn harmonic_drift_is_exact_in_hbar() {
        // For quadratic rate and Gaussian data hbar d/dp ln u = B p with
        // B = -(sinh t + cosh t)/(cosh t + sinh t) = -1 at kappa = 1/2.
        let d = drift_estimate(&harmonic(), 0.1, 0.5, 1.0, 1e-3, &McConfig::new(20_000, 1e-2, 5)).unwrap();
        assert!((d.value + 1.0).abs() < 4.0 * d.stderr + 0.01, "{d:?}");
    }

    #[test]
    fn halving_delta_is_second_order() {
        let mc = McConfig::new(2000, 1e-2, 8);
        let a = drift_estimate(&harmonic(), 0.2, 0.5, 0.7, 2e-2, &mc).unwrap();
        let b = drift_estimate(&harmonic(), 0.2, 0.5, 0.7, 1e-2, &mc).unwrap();
        let c = drift_estimate(&harmonic(), 0.2, 0.5, 0.7, 5e-3, &mc).unwrap();
        let (d1, d2) = ((a.value - b.value).abs(), (b.value - c.value).abs());
        assert!(d2 < 0.4 * d1, "{d1} {d2}");
    }

    #[test]
    fn bad_arguments() {
        let mc = McConfig::new(10, 1e-2, 1);
        assert!(drift_estimate(&harmonic(), 0.0, 0.5, 0.0, 1e-3, &mc).is_err());
        assert!(drift_estimate(&harmonic(), 0.1, 0.5, 0.0, 0.0, &mc).is_err());
    }
}
