use rand::Rng;
use rand_distr::{Poisson, StandardNormal};
use serde::Serialize;

use super::model::LevyModel;
use crate::error::{Error, Result};
use crate::rng::path_rng;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct MomentEstimate {
    pub t: f64,
    pub mean: f64,
    pub stderr: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MomentReport {
    pub order: u32,
    pub n_paths: usize,
    pub per_t: Vec<MomentEstimate>,
    /// Entry of `per_t` with the largest estimate.
    pub sup: MomentEstimate,
}

/// Monte Carlo estimates of `E[X_t^m]` (process started at 0) on `t_grid`.
///
/// Increments between consecutive grid times are drawn exactly: a Gaussian
/// part plus a Poisson number of jumps.
pub fn empirical_moments(
    model: &LevyModel,
    t_grid: &[f64],
    m: u32,
    n_paths: usize,
    seed: u64,
) -> Result<MomentReport> {
    model.validate()?;
    if m < 2 || m % 2 == 1 {
        return Err(Error::Argument(format!("moment order must be even and >= 2, got {m}")));
    }
    if n_paths < 2 {
        return Err(Error::Argument(format!("n_paths must be >= 2, got {n_paths}")));
    }
    if t_grid.is_empty() || t_grid.iter().any(|t| !(0.0..=1.0).contains(t)) {
        return Err(Error::Argument("t_grid must be a non-empty subset of [0, 1]".into()));
    }
    let mut times = t_grid.to_vec();
    times.sort_by(f64::total_cmp);
    times.dedup();
    let dyn_ = model.effective();
    let sd = dyn_.diffusion.sqrt();
    let mut sums = vec![0.0; times.len()];
    let mut sq = vec![0.0; times.len()];
    for path in 0..n_paths {
        let mut rng = path_rng(seed, path as u64);
        let mut x = 0.0;
        let mut prev = 0.0;
        for (k, &t) in times.iter().enumerate() {
            let h = t - prev;
            if h > 0.0 {
                x += dyn_.drift * h;
                if sd > 0.0 {
                    x += sd * h.sqrt() * rng.sample::<f64, _>(StandardNormal);
                }
                if dyn_.jump_rate > 0.0 {
                    let count = rng.sample(Poisson::new(dyn_.jump_rate * h).expect("positive rate")) as u64;
                    for _ in 0..count {
                        x += dyn_.jump_scale * dyn_.sampler.sample(&mut rng);
                    }
                }
            }
            prev = t;
            let v = x.powi(m as i32);
            sums[k] += v;
            sq[k] += v * v;
        }
    }
    let n = n_paths as f64;
    let per_t: Vec<MomentEstimate> = times
        .iter()
        .enumerate()
        .map(|(k, &t)| {
            let mean = sums[k] / n;
            let var = ((sq[k] / n - mean * mean) * n / (n - 1.0)).max(0.0);
            MomentEstimate { t, mean, stderr: (var / n).sqrt() }
        })
        .collect();
    let sup = *per_t.iter().max_by(|a, b| a.mean.total_cmp(&b.mean)).expect("non-empty");
    Ok(MomentReport { order: m, n_paths, per_t, sup })
}

/// Exact `E[X_t^m]` from the cumulants `t * int k^n nu(dk)` of the
/// (regime-scaled) process started at 0.
pub fn analytic_moment(model: &LevyModel, t: f64, m: u32) -> f64 {
    let h = model.hbar();
    let kappa = |n: u32| -> f64 {
        let jump = h.powi(n as i32 - 1) * model.jumps.moment(n);
        match n {
            1 => t * (model.drift + jump),
            2 => t * (h * model.sigma2 + jump),
            _ => t * jump,
        }
    };
    let kappas: Vec<f64> = (1..=m).map(kappa).collect();
    let mut moments = vec![1.0];
    for n in 1..=m as usize {
        let mut acc = 0.0;
        let mut binom = 1.0; // C(n-1, k-1)
        for k in 1..=n {
            acc += binom * kappas[k - 1] * moments[n - k];
            binom = binom * (n - k) as f64 / k as f64;
        }
        moments.push(acc);
    }
    moments[m as usize]
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn analytic_moments_of_known_laws() {
        let b = LevyModel::brownian(1.0);
        assert!((analytic_moment(&b, 1.0, 2) - 1.0).abs() < 1e-14);
        assert!((analytic_moment(&b, 2.0, 4) - 12.0).abs() < 1e-12);
        let tp = LevyModel::two_point(1.0, 1.0);
        // t + 3t^2 and t + 15t^2 + 15t^3 at t = 1
        assert!((analytic_moment(&tp, 1.0, 4) - 4.0).abs() < 1e-12);
        assert!((analytic_moment(&tp, 1.0, 6) - 31.0).abs() < 1e-12);
    }

    #[test]
    fn brownian_second_and_fourth_moments() {
        let b = LevyModel::brownian(1.0);
        let r2 = empirical_moments(&b, &[0.5, 1.0], 2, 40_000, 5).unwrap();
        assert!((r2.sup.mean - 1.0).abs() < 3.0 * r2.sup.stderr);
        assert_eq!(r2.sup.t, 1.0);
        let r4 = empirical_moments(&b, &[1.0], 4, 40_000, 6).unwrap();
        assert!((r4.sup.mean - 3.0).abs() < 3.0 * r4.sup.stderr, "{:?}", r4.sup);
    }

    #[test]
    fn two_point_variance() {
        let tp = LevyModel::two_point(1.0, 1.0);
        let r = empirical_moments(&tp, &[0.25, 0.5, 1.0], 2, 40_000, 8).unwrap();
        assert!((r.sup.mean - 1.0).abs() < 3.0 * r.sup.stderr);
    }

    #[test]
    fn stable_under_path_doubling() {
        let g = LevyModel::gamma_subordinator();
        let a = empirical_moments(&g, &[1.0], 4, 20_000, 1).unwrap().sup;
        let b = empirical_moments(&g, &[1.0], 4, 40_000, 2).unwrap().sup;
        assert!(a.mean.is_finite() && b.mean.is_finite());
        let se = (a.stderr.powi(2) + b.stderr.powi(2)).sqrt();
        assert!((a.mean - b.mean).abs() < 4.0 * se);
    }

    #[test]
    fn odd_orders_are_rejected() {
        let b = LevyModel::brownian(1.0);
        assert!(matches!(empirical_moments(&b, &[1.0], 3, 10, 0), Err(Error::Argument(_))));
    }
}
