//! Acceptance criteria as executable checks, grouped into the `fast` and
//! `full` suites of `lfk verify`.

use std::fmt::Write as _;
use std::str::FromStr;
use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::asymptotics::{
    drift_prediction_config, drift_prediction_momentum, gaussian_k0, hbar_sweep, prefactor_mc, PrefactorSpec, SweepSource,
    DEFAULT_LADDER,
};
use crate::error::{Error, Result};
use crate::fk::{drift_estimate, fk_estimate_many, BoundaryData, McConfig, ProblemSpec, RateFunction};
use crate::levy::{analytic_moment, empirical_moments, LevyModel};
use crate::pide::{solve_pide, GridParams};
use crate::rng::derive_seed;
use crate::variational::{legendre_l0, solve_el_config, BoundaryTerm, Lagrangian};

pub const LEGENDRE_TOL: f64 = 1e-8;
pub const BVP_TOL: f64 = 1e-6;
pub const MC_SIGMAS: f64 = 3.0;
pub const SLOPE_REL_TOL: f64 = 0.01;
pub const JUMP_ACTION_REL_TOL: f64 = 0.02;
pub const DRIFT_RATIO: (f64, f64) = (0.3, 0.8);
pub const SELF_DUAL_TOL: f64 = 1e-8;
pub const MOMENTUM_DRIFT_REL_TOL: f64 = 0.15;
pub const ACCEPTANCE_PATHS: usize = 100_000;
/// Master seed of the Monte Carlo criteria; per-case seeds derive from it.
pub const ACCEPTANCE_SEED: u64 = 20_240_601;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Suite {
    Fast,
    Full,
}

impl FromStr for Suite {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "fast" => Ok(Suite::Fast),
            "full" => Ok(Suite::Full),
            other => Err(Error::Argument(format!("unknown suite '{other}' (expected fast or full)"))),
        }
    }
}

impl Suite {
    pub fn criteria(self) -> Vec<u32> {
        match self {
            Suite::Fast => vec![1, 2, 3, 9, 10],
            Suite::Full => (1..=10).collect(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CriterionOutcome {
    pub id: u32,
    pub name: &'static str,
    pub passed: bool,
    pub detail: String,
    pub seconds: f64,
}

impl CriterionOutcome {
    pub fn line(&self) -> String {
        format!(
            "[{}] {:>2} {:<34} {:>7.2}s  {}",
            if self.passed { "PASS" } else { "FAIL" },
            self.id,
            self.name,
            self.seconds,
            self.detail
        )
    }
}

pub fn criterion_name(id: u32) -> &'static str {
    match id {
        1 => "legendre closed form",
        2 => "prefactor identity",
        3 => "harmonic bvp",
        4 => "fk vs pide matrix",
        5 => "large-deviation slope",
        6 => "jump-case action",
        7 => "drift asymptotics, configuration",
        8 => "drift asymptotics, momentum",
        9 => "quadratic-functional identity",
        10 => "moment bounds",
        _ => "unknown",
    }
}

/// Runs one criterion; solver errors count as failures.
pub fn run_criterion(id: u32) -> CriterionOutcome {
    let start = Instant::now();
    let result = match id {
        1 => legendre_closed_form(),
        2 => prefactor_identity(),
        3 => harmonic_bvp(),
        4 => fk_vs_pide(),
        5 => large_deviation_slope(),
        6 => jump_action(),
        7 => drift_configuration(),
        8 => drift_momentum(),
        9 => quadratic_functional(),
        10 => moment_bounds(),
        _ => Err(Error::Argument(format!("no criterion {id}"))),
    };
    let (passed, detail) = result.unwrap_or_else(|e| (false, format!("error: {e}")));
    CriterionOutcome { id, name: criterion_name(id), passed, detail, seconds: start.elapsed().as_secs_f64() }
}

pub fn run_suite(suite: Suite) -> Vec<CriterionOutcome> {
    suite.criteria().into_iter().map(run_criterion).collect()
}

pub fn format_table(outcomes: &[CriterionOutcome]) -> String {
    let mut out = String::new();
    for o in outcomes {
        let _ = writeln!(out, "{}", o.line());
    }
    let passed = outcomes.iter().filter(|o| o.passed).count();
    let _ = writeln!(out, "{passed}/{} criteria passed", outcomes.len());
    out
}

type Check = Result<(bool, String)>;

fn legendre_closed_form() -> Check {
    let mut worst: f64 = 0.0;
    for alpha in [0.5, 1.0, 2.0] {
        let l = Lagrangian::numeric(&LevyModel::two_point(alpha, 1.0))?;
        for k in 0..=400 {
            let u = alpha * (-10.0 + 20.0 * k as f64 / 400.0);
            let r = u / alpha;
            let exact = r * r.asinh() + 1.0 - (1.0 + r * r).sqrt();
            worst = worst.max((legendre_l0(&l, u)?.value - exact).abs());
        }
    }
    Ok((worst <= LEGENDRE_TOL, format!("max abs error {worst:.3e} (tol {LEGENDRE_TOL:.0e})")))
}

fn prefactor_identity() -> Check {
    let mut ok = true;
    let mut detail = String::new();
    for (j, t) in [0.0, 0.25, 0.5, 0.75].into_iter().enumerate() {
        let tau: f64 = 1.0 - t;
        let exact = (tau.cosh() + 2.0 * tau.sinh()).powf(-0.5);
        let e = prefactor_mc(&PrefactorSpec::forward(t), &McConfig::new(ACCEPTANCE_PATHS, 1e-3, 200 + j as u64))?;
        let z = (e.mean - exact) / e.stderr;
        ok &= z.abs() <= MC_SIGMAS;
        let _ = write!(detail, "t={t}: {:.6} vs {exact:.6} ({z:+.2}σ); ", e.mean);
    }
    Ok((ok, detail))
}

fn harmonic_bvp() -> Check {
    let v = RateFunction::quadratic(0.5);
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let mut worst: f64 = 0.0;
    for _ in 0..10 {
        let p: f64 = rng.random_range(-2.0..2.0);
        let t: f64 = rng.random_range(0.0..0.9);
        let r = solve_el_config(&v, p, t, 1.0, BoundaryTerm::FULL_SQUARE)?;
        // (qbar + p)(s) = p (cosh(s - t) + B sinh(s - t))
        let tau = 1.0 - t;
        let b = -(tau.sinh() + 2.0 * tau.cosh()) / (tau.cosh() + 2.0 * tau.sinh());
        for (s, y) in r.s.iter().zip(&r.path) {
            let x = s - t;
            worst = worst.max((y - (p * (x.cosh() + b * x.sinh()) - p)).abs());
        }
    }
    Ok((worst <= BVP_TOL, format!("sup error over 10 pairs {worst:.3e} (tol {BVP_TOL:.0e})")))
}

fn fk_vs_pide() -> Check {
    let models = [
        ("brownian", LevyModel::brownian(1.0)),
        ("two_point", LevyModel::two_point(1.0, 1.0)),
        ("gamma", LevyModel::gamma_subordinator()),
    ];
    let rates = [RateFunction::quadratic(0.5), RateFunction::polynomial(&[1.0, -1.0, 1.0])];
    let data = [BoundaryData::ScaledGaussian { c: 0.5, normalized: false }, BoundaryData::One];
    let points = [0.0, 0.5, 1.0];
    let grid = GridParams::new(10.0, 2001, 1e-3).with_store_every(usize::MAX);
    let (mut ok, mut cases, mut worst) = (true, 0, 0.0f64);
    let mut failures = String::new();
    for (name, model) in &models {
        for (ri, rate) in rates.iter().enumerate() {
            for (di, g) in data.iter().enumerate() {
                let spec = ProblemSpec::forward(model.clone(), rate.clone(), g.clone(), 1.0);
                if spec.validate().is_err() {
                    continue;
                }
                cases += 1;
                let seed = derive_seed(ACCEPTANCE_SEED, cases as u64);
                let mc = fk_estimate_many(&spec, 1.0, &points, &McConfig::new(ACCEPTANCE_PATHS, 1e-3, seed))?;
                let sol = solve_pide(&spec, &grid)?;
                for (p, e) in points.iter().zip(&mc) {
                    let z = (e.mean - sol.value_at(1.0, *p)?) / e.stderr;
                    worst = worst.max(z.abs());
                    if z.abs() > MC_SIGMAS {
                        ok = false;
                        let _ = write!(failures, " {name}/rate{ri}/data{di}/p={p}: {z:+.2}σ;");
                    }
                }
            }
        }
    }
    Ok((ok, format!("{cases} cases, worst |z| = {worst:.2}{failures}")))
}

fn harmonic_sweep_spec() -> ProblemSpec {
    ProblemSpec::backward(
        LevyModel::brownian(1.0),
        RateFunction::quadratic(0.5),
        BoundaryData::ScaledGaussian { c: 1.0, normalized: false },
        1.0,
    )
}

fn large_deviation_slope() -> Check {
    let grid = GridParams::new(4.0, 641, 1e-3);
    let r = hbar_sweep(&harmonic_sweep_spec(), 0.4, 0.5, &DEFAULT_LADDER, &SweepSource::Pide { grid })?;
    let ok = r.complete && r.local_action_rel_error <= SLOPE_REL_TOL;
    Ok((
        ok,
        format!(
            "slope at two smallest hbar {:.6} vs {:.6} (rel {:.2e}); weighted fit {:.6}",
            r.local_action, r.predicted_action, r.local_action_rel_error, r.fitted_action
        ),
    ))
}

fn jump_action() -> Check {
    let spec = ProblemSpec::backward(
        LevyModel::two_point(1.0, 1.0),
        RateFunction::QuadraticMinusLinear,
        BoundaryData::ConstantExp,
        1.0,
    );
    let grid = GridParams::new(4.0, 641, 1e-3);
    let r = hbar_sweep(&spec, 0.5, 0.0, &DEFAULT_LADDER, &SweepSource::Pide { grid })?;
    let rel = (r.fitted_action - 0.75).abs() / 0.75;
    Ok((
        r.complete && rel <= JUMP_ACTION_REL_TOL,
        format!("fitted A {:.6} vs 0.75 (rel {rel:.2e}); minimizer action {:.6}", r.fitted_action, r.predicted_action),
    ))
}

/// Configuration problem with `V = q^2/2` and normalized Gaussian data.
fn harmonic_config_spec(t: f64) -> ProblemSpec {
    ProblemSpec::forward(
        LevyModel::brownian(1.0),
        RateFunction::quadratic(0.5),
        BoundaryData::ScaledGaussian { c: 0.5, normalized: true },
        t,
    )
}

fn drift_configuration() -> Check {
    let (q, t) = (1.0, 0.5);
    let v = RateFunction::quadratic(0.5);
    let pred = drift_prediction_config(&v, q, t, BoundaryTerm::HALF_SQUARE, &McConfig::new(10_000, 1e-3, 700))?;
    // closed form of the extremal: (phi + q)(s) = q (cosh s + B sinh s), B = -1 for kappa = 1/2
    let (c, s) = (t.cosh(), t.sinh());
    let target = -q * (s + c) / (c + s);
    let mut errors = Vec::new();
    let mut detail = format!("-G = {:.9} (closed form {target:.9}), correction {}; ", pred.leading, pred.correction_coeff);
    for (j, hbar) in [0.2, 0.1, 0.05].into_iter().enumerate() {
        let d = drift_estimate(&harmonic_config_spec(t), hbar, t, q, 1e-3, &McConfig::new(ACCEPTANCE_PATHS, 1e-3, 710 + j as u64))?;
        let _ = write!(detail, "hbar={hbar}: err {:+.2e} ± {:.1e}; ", d.value - target, d.stderr);
        errors.push((d.value - target, d.stderr));
    }
    // each halving either shrinks the error by a factor in the band, or the
    // smaller-hbar error is already indistinguishable from zero at 3 sigma
    let mut ok = (pred.leading - target).abs() <= 1e-8 && pred.correction_coeff == 0.0;
    for w in errors.windows(2) {
        let ((e0, _), (e1, s1)) = (w[0], w[1]);
        let ratio = e1.abs() / e0.abs();
        let in_band = (DRIFT_RATIO.0..=DRIFT_RATIO.1).contains(&ratio);
        ok &= in_band || e1.abs() <= MC_SIGMAS * s1;
    }
    Ok((ok, detail))
}

fn drift_momentum() -> Check {
    let mc = McConfig::new(10_000, 1e-3, 800);
    let config = drift_prediction_config(&RateFunction::quadratic(0.5), 1.0, 0.5, BoundaryTerm::HALF_SQUARE, &mc)?;
    let momentum =
        drift_prediction_momentum(&LevyModel::brownian(1.0), &RateFunction::quadratic(0.5), 1.0, 0.5, BoundaryTerm::HALF_SQUARE)?;
    let dual = (config.leading - momentum.leading).abs();

    let (p, t, hbar) = (0.3, 0.5, 0.05);
    let model = LevyModel::two_point(1.0, 1.0);
    let rate = RateFunction::quadratic(0.5);
    let pred = drift_prediction_momentum(&model, &rate, p, t, BoundaryTerm::HALF_SQUARE)?;
    let spec = ProblemSpec::forward(model, rate, BoundaryData::ScaledGaussian { c: 0.5, normalized: true }, t);
    let d = drift_estimate(&spec, hbar, t, p, 1e-3, &McConfig::new(ACCEPTANCE_PATHS, 1e-3, 801))?;
    let err = (d.value - pred.leading).abs();
    let tol = (MC_SIGMAS * d.stderr).max(MOMENTUM_DRIFT_REL_TOL * pred.leading.abs());
    Ok((
        dual <= SELF_DUAL_TOL && err <= tol,
        format!(
            "self-dual gap {dual:.2e}; two-point drift {:.5} ± {:.1e} vs -G~ {:.5} (tol {tol:.2e})",
            d.value, d.stderr, pred.leading
        ),
    ))
}

fn quadratic_functional() -> Check {
    let v = RateFunction::quadratic(0.5);
    let phi = solve_el_config(&v, 1.0, 0.0, 1.0, BoundaryTerm::HALF_SQUARE)?;
    let e = gaussian_k0(&v, &phi, 1.0, BoundaryTerm::HALF_SQUARE, &McConfig::new(ACCEPTANCE_PATHS, 1e-3, 900))?;
    let exact = (-0.5f64).exp();
    let z = (e.mean - exact) / e.stderr;
    Ok((z.abs() <= MC_SIGMAS, format!("K0 {:.6} ± {:.1e} vs {exact:.6} ({z:+.2}σ)", e.mean, e.stderr)))
}

fn moment_bounds() -> Check {
    let times: Vec<f64> = (1..=10).map(|k| k as f64 / 10.0).collect();
    let mut ok = true;
    let mut detail = String::new();
    for (name, model) in [("two_point", LevyModel::two_point(1.0, 1.0)), ("gamma", LevyModel::gamma_subordinator())] {
        for m in [2, 4, 6] {
            let r = empirical_moments(&model, &times, m, ACCEPTANCE_PATHS, 1000 + m as u64)?;
            ok &= r.per_t.iter().all(|e| e.mean.is_finite() && e.stderr.is_finite());
            if m == 2 {
                for e in &r.per_t {
                    ok &= (e.mean - analytic_moment(&model, e.t, m)).abs() <= MC_SIGMAS * e.stderr;
                }
            }
            let exact = analytic_moment(&model, r.sup.t, m);
            let _ = write!(detail, "{name} m={m}: sup {:.4} (exact {exact:.4}); ", r.sup.mean);
        }
    }
    Ok((ok, detail))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn suites() {
        assert_eq!("fast".parse::<Suite>().unwrap(), Suite::Fast);
        assert!(matches!("nightly".parse::<Suite>(), Err(Error::Argument(_))));
        assert_eq!(Suite::Full.criteria().len(), 10);
    }

    #[test]
    fn closed_form_criteria_pass() {
        for id in [1, 3] {
            let o = run_criterion(id);
            assert!(o.passed, "{}", o.line());
        }
        assert!(!run_criterion(11).passed);
    }
}
