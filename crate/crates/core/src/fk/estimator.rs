use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::problem::{ProblemSpec, RateFunction};
use crate::error::{Error, Result};
use crate::levy::{check_horizon, simulate, EffectiveDynamics, PathBuffer};
use crate::rng::path_rng;

/// Monte Carlo controls.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct McConfig {
    pub n_paths: usize,
    pub dt: f64,
    pub seed: u64,
}

impl McConfig {
    pub fn new(n_paths: usize, dt: f64, seed: u64) -> Self {
        McConfig { n_paths, dt, seed }
    }

    pub(crate) fn validate(&self) -> Result<()> {
        if self.n_paths < 2 {
            return Err(Error::Argument(format!("n_paths must be >= 2, got {}", self.n_paths)));
        }
        if !(self.dt.is_finite() && self.dt > 0.0) {
            return Err(Error::Argument(format!("dt must be > 0, got {}", self.dt)));
        }
        Ok(())
    }
}

/// Monte Carlo estimate; `stderr` is the sample standard deviation over `sqrt(n_paths)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MCEstimate {
    pub mean: f64,
    pub stderr: f64,
    /// `ln |mean|`, accurate even when `mean` underflows.
    pub log_mean: f64,
    pub n_paths: usize,
    pub dt: f64,
    pub seed: u64,
}

impl MCEstimate {
    /// Whether `value` lies within `k` standard errors.
    pub fn within(&self, value: f64, k: f64) -> bool {
        (self.mean - value).abs() <= k * self.stderr
    }
}

/// Signed log-weights `(ln |w|, sign w)`, aggregated with a max shift.
#[derive(Debug, Clone, Copy)]
pub(crate) struct LogMoments {
    pub shift: f64,
    pub sum: f64,
    pub sum_sq: f64,
    pub n: usize,
}

impl LogMoments {
    pub fn from_weights<I: Iterator<Item = (f64, f64)> + Clone>(w: I) -> Result<LogMoments> {
        let mut shift = f64::NEG_INFINITY;
        let mut n = 0;
        for (l, s) in w.clone() {
            n += 1;
            if s == 0.0 {
                continue;
            }
            if l.is_nan() || l == f64::INFINITY {
                return Err(Error::Config(
                    "exponent overflow in the Feynman-Kac weight (rate unbounded below?)".into(),
                ));
            }
            shift = shift.max(l);
        }
        let (mut sum, mut sum_sq) = (0.0, 0.0);
        if shift.is_finite() {
            for (l, s) in w {
                if s != 0.0 {
                    let e = (l - shift).exp();
                    sum += s * e;
                    sum_sq += e * e;
                }
            }
        }
        Ok(LogMoments { shift, sum, sum_sq, n })
    }

    pub fn estimate(&self, dt: f64, seed: u64) -> MCEstimate {
        let n = self.n as f64;
        if !self.shift.is_finite() {
            return MCEstimate { mean: 0.0, stderr: 0.0, log_mean: f64::NEG_INFINITY, n_paths: self.n, dt, seed };
        }
        let m = self.sum / n;
        let var = ((self.sum_sq - self.sum * m) / (n - 1.0)).max(0.0);
        let log_mean = self.shift + m.abs().ln();
        let scale = self.shift.exp();
        MCEstimate {
            mean: m.signum() * log_mean.exp(),
            stderr: scale * (var / n).sqrt(),
            log_mean,
            n_paths: self.n,
            dt,
            seed,
        }
    }
}

/// Simulate `n` increment paths on `[0, t]` and map each through `eval`, in
/// path-index order.
pub(crate) fn map_paths<T, F>(dynamics: &EffectiveDynamics, t: f64, dt: f64, n: usize, seed: u64, eval: F) -> Vec<T>
where
    T: Send,
    F: Fn(&PathBuffer) -> T + Sync,
{
    (0..n)
        .into_par_iter()
        .map_init(PathBuffer::default, |buf, i| {
            let mut rng = path_rng(seed, i as u64);
            simulate(dynamics, t, dt, false, &mut rng, buf);
            eval(buf)
        })
        .collect()
}

/// Trapezoid of `U(p + X_s)` on the jump-augmented grid, using the left limit
/// at the right end of every segment.
#[inline]
pub(crate) fn rate_integral(rate: &RateFunction, buf: &PathBuffer, p: f64) -> f64 {
    let (times, values, jumps) = (&buf.times, &buf.values, &buf.jumps);
    let mut acc = 0.0;
    let mut right = rate.value(p + values[0]);
    for i in 1..times.len() {
        let left_end = right;
        let left_limit = if jumps[i] == 0.0 {
            right = rate.value(p + values[i]);
            right
        } else {
            right = rate.value(p + values[i]);
            rate.value(p + values[i] - jumps[i])
        };
        acc += 0.5 * (left_end + left_limit) * (times[i] - times[i - 1]);
    }
    acc
}

fn effective_dt(elapsed: f64, dt: f64) -> f64 {
    dt.min(elapsed)
}

/// `E[f(p + X_t) exp(-int_0^t U(p + X_s) ds / hbar)]` with `t` the elapsed time.
/// `f` returns `(ln |f|, sign f)`.
pub(crate) fn weighted_expectation<F>(spec: &ProblemSpec, elapsed: f64, p: f64, mc: &McConfig, f: F) -> Result<MCEstimate>
where
    F: Fn(f64) -> (f64, f64) + Sync,
{
    mc.validate()?;
    if elapsed == 0.0 {
        let (l, s) = f(p);
        let mean = if s == 0.0 { 0.0 } else { s * l.exp() };
        return Ok(MCEstimate { mean, stderr: 0.0, log_mean: l, n_paths: mc.n_paths, dt: mc.dt, seed: mc.seed });
    }
    let dt = effective_dt(elapsed, mc.dt);
    check_horizon(elapsed, dt)?;
    let dynamics = spec.model.effective();
    let inv_hbar = 1.0 / spec.hbar();
    let weights = map_paths(&dynamics, elapsed, dt, mc.n_paths, mc.seed, |buf| {
        let (l, s) = f(p + buf.values[buf.values.len() - 1]);
        (l - inv_hbar * rate_integral(&spec.rate, buf, p), s)
    });
    Ok(LogMoments::from_weights(weights.iter().copied())?.estimate(mc.dt, mc.seed))
}

/// Feynman-Kac estimate of `u(t, p)`; in the scaled regime the exponent is
/// divided by `hbar`.
pub fn fk_estimate(spec: &ProblemSpec, t: f64, p: f64, mc: &McConfig) -> Result<MCEstimate> {
    spec.validate()?;
    let elapsed = spec.elapsed(t)?;
    let hbar = spec.hbar();
    weighted_expectation(spec, elapsed, p, mc, |y| spec.data.log_abs_sign(y, hbar))
}

/// Estimates at several start points from one shared path ensemble.
pub fn fk_estimate_many(spec: &ProblemSpec, t: f64, points: &[f64], mc: &McConfig) -> Result<Vec<MCEstimate>> {
    spec.validate()?;
    mc.validate()?;
    let elapsed = spec.elapsed(t)?;
    let hbar = spec.hbar();
    if elapsed == 0.0 {
        return points.iter().map(|&p| weighted_expectation(spec, 0.0, p, mc, |y| spec.data.log_abs_sign(y, hbar))).collect();
    }
    let dt = effective_dt(elapsed, mc.dt);
    check_horizon(elapsed, dt)?;
    let dynamics = spec.model.effective();
    let k = points.len();
    let flat: Vec<(f64, f64)> = map_paths(&dynamics, elapsed, dt, mc.n_paths, mc.seed, |buf| {
        let x = buf.values[buf.values.len() - 1];
        points
            .iter()
            .map(|&p| {
                let (l, s) = spec.data.log_abs_sign(p + x, hbar);
                (l - rate_integral(&spec.rate, buf, p) / hbar, s)
            })
            .collect::<Vec<_>>()
    })
    .into_iter()
    .flatten()
    .collect();
    (0..k)
        .map(|j| Ok(LogMoments::from_weights(flat.iter().skip(j).step_by(k).copied())?.estimate(mc.dt, mc.seed)))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fk::{BoundaryData, RateFunction};
    use crate::levy::LevyModel;

    fn bm_spec(rate: RateFunction, data: BoundaryData) -> ProblemSpec {
        ProblemSpec::forward(LevyModel::brownian(1.0), rate, data, 1.0)
    }

    #[test]
    fn zero_rate_and_unit_data_give_one() {
        for model in [LevyModel::brownian(1.0), LevyModel::two_point(1.0, 1.0), LevyModel::gamma_subordinator()] {
            let spec = ProblemSpec::forward(model, RateFunction::polynomial(&[0.0]), BoundaryData::One, 1.0);
            let e = fk_estimate(&spec, 1.0, 0.3, &McConfig::new(64, 0.1, 1)).unwrap();
            assert_eq!(e.mean, 1.0);
            assert_eq!(e.stderr, 0.0);
        }
    }

    #[test]
    fn too_few_paths() {
        let spec = bm_spec(RateFunction::quadratic(0.5), BoundaryData::One);
        assert!(matches!(fk_estimate(&spec, 1.0, 0.0, &McConfig::new(1, 0.1, 1)), Err(Error::Argument(_))));
    }

    #[test]
    fn harmonic_closed_form() {
        // E exp(-1/2 int_0^1 W^2) = cosh(1)^(-1/2)
        let spec = bm_spec(RateFunction::quadratic(0.5), BoundaryData::One);
        let e = fk_estimate(&spec, 1.0, 0.0, &McConfig::new(20_000, 1e-2, 5)).unwrap();
        let exact = 1.0 / 1f64.cosh().sqrt();
        // trapezoid bias at dt = 1e-2 is far below the noise
        assert!((e.mean - exact).abs() < 4.0 * e.stderr + 1e-4, "{e:?} vs {exact}");
        assert!(e.mean > 0.0 && e.mean <= 1.0);
    }

    #[test]
    fn pure_jump_integral_is_exact() {
        // piecewise-constant paths need no time grid: a single path with dt = t
        let spec = ProblemSpec::forward(LevyModel::two_point(1.0, 1.0), RateFunction::quadratic(1.0), BoundaryData::One, 1.0);
        let a = fk_estimate(&spec, 1.0, 0.2, &McConfig::new(500, 1.0, 3)).unwrap();
        let b = fk_estimate(&spec, 1.0, 0.2, &McConfig::new(500, 1e-3, 3)).unwrap();
        assert_eq!(a.mean, b.mean);
    }

    #[test]
    fn log_space_survives_underflow() {
        let spec = bm_spec(RateFunction::quadratic(0.5), BoundaryData::ConstantExp).with_hbar(1e-3);
        let e = fk_estimate(&spec, 1.0, 1.0, &McConfig::new(200, 1e-2, 2)).unwrap();
        assert_eq!(e.mean, 0.0);
        assert!(e.log_mean.is_finite());
        let scaled = 1e-3 * e.log_mean;
        assert!(scaled > -1.6 && scaled < -1.3, "{scaled}");
    }

    #[test]
    fn many_points_match_single() {
        let spec = bm_spec(RateFunction::QuadraticMinusLinear, BoundaryData::ScaledGaussian { c: 0.5, normalized: false });
        let mc = McConfig::new(300, 0.05, 9);
        let many = fk_estimate_many(&spec, 1.0, &[0.0, 0.5], &mc).unwrap();
        let one = fk_estimate(&spec, 1.0, 0.5, &mc).unwrap();
        assert!((many[1].mean - one.mean).abs() < 1e-14);
    }

    #[test]
    fn thread_count_does_not_change_result() {
        let spec = ProblemSpec::forward(LevyModel::two_point(1.0, 1.0), RateFunction::quadratic(0.5), BoundaryData::One, 1.0);
        let mc = McConfig::new(1000, 0.1, 11);
        let a = fk_estimate(&spec, 1.0, 0.0, &mc).unwrap();
        let pool = rayon::ThreadPoolBuilder::new().num_threads(3).build().unwrap();
        let b = pool.install(|| fk_estimate(&spec, 1.0, 0.0, &mc).unwrap());
        assert_eq!(a.mean.to_bits(), b.mean.to_bits());
    }
}
