use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::fk::{MCEstimate, McConfig};
use crate::rng::path_rng;

/// Evaluate `f(W, h)` on `n_paths` standard Wiener paths sampled exactly on
/// a uniform grid of step `h <= dt` over `[0, horizon]`; `W[0] = 0`.
pub(crate) fn wiener_paths<T, F>(horizon: f64, mc: &McConfig, f: F) -> Vec<T>
where
    T: Send,
    F: Fn(&[f64], f64) -> T + Sync,
{
    let steps = ((horizon / mc.dt) - 1e-9).ceil().max(1.0) as usize;
    let h = horizon / steps as f64;
    let sd = h.sqrt();
    (0..mc.n_paths)
        .into_par_iter()
        .map_init(
            || vec![0.0; steps + 1],
            |w, i| {
                let mut rng = path_rng(mc.seed, i as u64);
                for k in 1..=steps {
                    let z: f64 = StandardNormal.sample(&mut rng);
                    w[k] = w[k - 1] + sd * z;
                }
                f(w, h)
            },
        )
        .collect()
}

pub(crate) fn estimate(xs: &[f64], mc: &McConfig) -> MCEstimate {
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    let var = xs.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / (n - 1.0);
    MCEstimate { mean, stderr: (var / n).sqrt(), log_mean: mean.abs().ln(), n_paths: xs.len(), dt: mc.dt, seed: mc.seed }
}

/// Deterministic answer for zero-length horizons.
pub(crate) fn exact(value: f64, mc: &McConfig) -> MCEstimate {
    MCEstimate { mean: value, stderr: 0.0, log_mean: value.abs().ln(), n_paths: mc.n_paths, dt: mc.dt, seed: mc.seed }
}

pub(crate) fn check_mc(mc: &McConfig, min_paths: usize) -> Result<()> {
    mc.validate()?;
    if mc.n_paths < min_paths {
        return Err(Error::Argument(format!("n_paths must be >= {min_paths}, got {}", mc.n_paths)));
    }
    Ok(())
}

/// Trapezoid of `weight(k) * W_k^power` on the grid.
#[inline]
pub(crate) fn weighted_power(w: &[f64], h: f64, power: i32, weight: &dyn Fn(usize) -> f64) -> f64 {
    let n = w.len();
    if n < 2 {
        return 0.0;
    }
    let mut acc = 0.5 * (weight(0) * w[0].powi(power) + weight(n - 1) * w[n - 1].powi(power));
    for (k, x) in w.iter().enumerate().take(n - 1).skip(1) {
        acc += weight(k) * x.powi(power);
    }
    acc * h
}
