use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fk::ProblemSpec;
use crate::levy::{JumpMeasure, Shift, UniformGrid};

/// Picard tolerance for the nonlocal part, relative to the sup norm.
const PICARD_TOL: f64 = 1e-14;
const PICARD_MAX: usize = 200;

/// Spatial and temporal discretization.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GridParams {
    /// Domain `[-half_width, half_width]`.
    pub half_width: f64,
    /// Number of grid points, endpoints included.
    pub n: usize,
    pub dt: f64,
    /// Keep every `store_every`-th time level (the last level is always kept).
    pub store_every: usize,
    /// Crank-Nicolson steps replaced by two implicit-Euler half steps at start-up.
    pub smoothing_steps: usize,
}

impl GridParams {
    pub fn new(half_width: f64, n: usize, dt: f64) -> Self {
        GridParams { half_width, n, dt, store_every: 1, smoothing_steps: 2 }
    }

    pub fn spacing(&self) -> f64 {
        2.0 * self.half_width / (self.n - 1) as f64
    }

    pub fn with_store_every(mut self, k: usize) -> Self {
        self.store_every = k.max(1);
        self
    }

    fn validate(&self) -> Result<()> {
        if !(self.half_width.is_finite() && self.half_width > 0.0) {
            return Err(Error::Argument(format!("half_width must be > 0, got {}", self.half_width)));
        }
        if self.n < 5 {
            return Err(Error::Argument(format!("grid needs at least 5 points, got {}", self.n)));
        }
        if !(self.dt.is_finite() && self.dt > 0.0) {
            return Err(Error::Argument(format!("dt must be > 0, got {}", self.dt)));
        }
        Ok(())
    }
}

/// Solution slab `u(t_j, p_i)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridSolution {
    pub grid: UniformGrid,
    /// Physical times of the stored rows (decreasing for terminal-value problems).
    pub times: Vec<f64>,
    /// Elapsed integration time of each row.
    pub elapsed: Vec<f64>,
    /// Row-major: `values[j][i] = u(times[j], grid.point(i))`.
    pub values: Vec<Vec<f64>>,
    /// No negative value appeared at any time level.
    pub positive: bool,
    pub hbar: f64,
}

impl GridSolution {
    pub fn rows(&self) -> usize {
        self.values.len()
    }

    pub fn final_values(&self) -> &[f64] {
        &self.values[self.values.len() - 1]
    }

    /// `u(t, p)`, linear in both variables between stored levels and nodes.
    pub fn value_at(&self, t: f64, p: f64) -> Result<f64> {
        let horizon = self.elapsed[self.elapsed.len() - 1];
        let forward = self.times[0] <= self.times[self.times.len() - 1];
        let tau = if forward { t - self.times[0] } else { self.times[0] - t };
        if !(tau >= -1e-9 * (1.0 + horizon) && tau <= horizon * (1.0 + 1e-9) + 1e-12) {
            return Err(Error::Argument(format!("time {t} outside the solved range")));
        }
        let j = self.elapsed.partition_point(|e| *e < tau - 1e-12).min(self.rows() - 1);
        let at = |row: usize| {
            self.grid
                .interpolate(&self.values[row], p)
                .ok_or_else(|| Error::Range(format!("p = {p} outside [{}, {}]", self.grid.lower, self.grid.upper())))
        };
        if j == 0 || (self.elapsed[j] - tau).abs() <= 1e-9 * (1.0 + horizon) {
            return at(j);
        }
        let (e0, e1) = (self.elapsed[j - 1], self.elapsed[j]);
        let w = (tau - e0) / (e1 - e0);
        Ok((1.0 - w) * at(j - 1)? + w * at(j)?)
    }
}

/// Spatial operator split as `M = T + J`: tridiagonal local part `T`
/// (diffusion, upwind drift, reaction, loss rate and jumps by at most one
/// cell) and the remaining jump stencil `J`.
struct Operator {
    lower: Vec<f64>,
    diag: Vec<f64>,
    upper: Vec<f64>,
    stencil: Vec<(isize, f64)>,
}

impl Operator {
    fn build(spec: &ProblemSpec, grid: &UniformGrid) -> Operator {
        let dynamics = spec.model.effective();
        let hbar = spec.hbar();
        let h = grid.spacing;
        let n = grid.len;
        let d = 0.5 * dynamics.diffusion / (h * h);
        let b = dynamics.drift;
        // aggregate all atoms into one shift stencil
        let mut offsets: std::collections::BTreeMap<isize, f64> = Default::default();
        let mut loss = 0.0;
        for a in &dynamics.atoms {
            loss += a.rate;
            match Shift::of(a.size, h) {
                Shift::Exact(k) => *offsets.entry(k).or_default() += a.rate,
                Shift::Fractional { base, weight } => {
                    *offsets.entry(base).or_default() += a.rate * (1.0 - weight);
                    *offsets.entry(base + 1).or_default() += a.rate * weight;
                }
            }
        }
        let near = |k: isize| offsets.get(&k).copied().unwrap_or(0.0);
        let (up_b, low_b, diag_b) = if b > 0.0 { (b / h, 0.0, -b / h) } else { (0.0, -b / h, b / h) };
        let mut lower = vec![0.0; n];
        let mut diag = vec![0.0; n];
        let mut upper = vec![0.0; n];
        for i in 0..n {
            lower[i] = d + low_b + near(-1);
            upper[i] = d + up_b + near(1);
            diag[i] = -2.0 * d + diag_b - loss + near(0) - spec.rate.value(grid.point(i)) / hbar;
        }
        let stencil = offsets.into_iter().filter(|(k, c)| k.abs() > 1 && *c != 0.0).collect();
        Operator { lower, diag, upper, stencil }
    }

    /// `out = T u` on interior nodes; boundary nodes are held at zero.
    fn apply_t(&self, u: &[f64], out: &mut [f64]) {
        let n = u.len();
        out[0] = 0.0;
        out[n - 1] = 0.0;
        for i in 1..n - 1 {
            out[i] = self.lower[i] * u[i - 1] + self.diag[i] * u[i] + self.upper[i] * u[i + 1];
        }
    }

    fn apply_j(&self, u: &[f64], out: &mut [f64]) {
        let n = u.len() as isize;
        out.iter_mut().for_each(|v| *v = 0.0);
        for &(k, c) in &self.stencil {
            let lo = 1.max(-k);
            let hi = (n - 1).min(n - k);
            for i in lo..hi {
                out[i as usize] += c * u[(i + k) as usize];
            }
        }
        out[0] = 0.0;
        out[(n - 1) as usize] = 0.0;
    }
}

/// LU factors of `I - c T` on the interior (Thomas algorithm).
struct Factor {
    c: f64,
    lower: Vec<f64>,
    denom: Vec<f64>,
    upper: Vec<f64>,
}

impl Factor {
    fn new(op: &Operator, c: f64) -> Factor {
        let n = op.diag.len();
        let lower: Vec<f64> = op.lower.iter().map(|l| -c * l).collect();
        let upper: Vec<f64> = op.upper.iter().map(|u| -c * u).collect();
        let mut denom = vec![1.0; n];
        for i in 1..n - 1 {
            let a = 1.0 - c * op.diag[i];
            denom[i] = if i == 1 { a } else { a - lower[i] * upper[i - 1] / denom[i - 1] };
        }
        Factor { c, lower, denom, upper }
    }

    fn solve(&self, rhs: &[f64], x: &mut [f64]) {
        let n = rhs.len();
        let mut y = vec![0.0; n];
        for i in 1..n - 1 {
            y[i] = if i == 1 { rhs[i] } else { rhs[i] - self.lower[i] * y[i - 1] / self.denom[i - 1] };
        }
        x[0] = 0.0;
        x[n - 1] = 0.0;
        for i in (1..n - 1).rev() {
            let next = if i + 1 < n - 1 { x[i + 1] } else { 0.0 };
            x[i] = (y[i] - self.upper[i] * next) / self.denom[i];
        }
    }
}

/// One theta-step `(I - theta dt M) u1 = (I + (1 - theta) dt M) u0`, with the
/// jump stencil handled by Picard iteration.
fn theta_step(op: &Operator, factor: &Factor, dt: f64, theta: f64, u0: &[f64], u1: &mut [f64], scratch: &mut [Vec<f64>; 3]) -> Result<()> {
    let n = u0.len();
    let [tu, ju, rhs] = scratch;
    op.apply_t(u0, tu);
    op.apply_j(u0, ju);
    let explicit = (1.0 - theta) * dt;
    for i in 0..n {
        rhs[i] = u0[i] + explicit * (tu[i] + ju[i]);
    }
    if op.stencil.is_empty() {
        factor.solve(rhs, u1);
        return Ok(());
    }
    u1.copy_from_slice(u0);
    let mut work = vec![0.0; n];
    let mut next = vec![0.0; n];
    for _ in 0..PICARD_MAX {
        op.apply_j(u1, ju);
        for i in 0..n {
            work[i] = rhs[i] + factor.c * ju[i];
        }
        factor.solve(&work, &mut next);
        let scale = next.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        let change = next.iter().zip(u1.iter()).fold(0.0f64, |m, (a, b)| m.max((a - b).abs()));
        u1.copy_from_slice(&next);
        if change <= PICARD_TOL * scale || scale == 0.0 {
            return Ok(());
        }
    }
    Err(Error::Solver(format!("nonlocal Picard iteration did not converge at dt = {dt}")))
}

/// Method-of-lines solve of `u_t = A u - U u / hbar`, `u(0) = g`, on
/// `[-L, L]` with `u = 0` at both ends. Crank-Nicolson in time after
/// `smoothing_steps` implicit-Euler start-up steps; terminal-value problems
/// are integrated in elapsed time `T - t`.
pub fn solve_pide(spec: &ProblemSpec, params: &GridParams) -> Result<GridSolution> {
    spec.validate()?;
    params.validate()?;
    let grid = UniformGrid::symmetric(params.half_width, params.n)?;
    let hbar = spec.hbar();
    let op = Operator::build(spec, &grid);
    let horizon = spec.horizon;
    let steps = ((horizon / params.dt) - 1e-9).ceil().max(1.0) as usize;
    let dt = horizon / steps as f64;

    let mut u: Vec<f64> = grid.points().iter().map(|&p| spec.data.value(p, hbar)).collect();
    u[0] = 0.0;
    u[params.n - 1] = 0.0;
    let initial_sup = u.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    let guard_growth = spec.rate.lower_bound() >= 0.0;

    let mut values = vec![u.clone()];
    let mut elapsed = vec![0.0];
    let mut positive = u.iter().all(|v| *v >= 0.0);
    // theta dt is dt/2 both for Crank-Nicolson and for an implicit-Euler half step
    let factor = Factor::new(&op, 0.5 * dt);
    let mut scratch = [vec![0.0; params.n], vec![0.0; params.n], vec![0.0; params.n]];
    let mut next = vec![0.0; params.n];
    for step in 1..=steps {
        if step <= params.smoothing_steps {
            // two implicit-Euler half steps
            for _ in 0..2 {
                theta_step(&op, &factor, 0.5 * dt, 1.0, &u, &mut next, &mut scratch)?;
                std::mem::swap(&mut u, &mut next);
            }
        } else {
            theta_step(&op, &factor, dt, 0.5, &u, &mut next, &mut scratch)?;
            std::mem::swap(&mut u, &mut next);
        }
        let sup = u.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        if !sup.is_finite() || (guard_growth && sup > 10.0 * initial_sup) {
            return Err(Error::Solver(format!(
                "instability: sup norm grew from {initial_sup:.3e} to {sup:.3e} by step {step} (dt = {dt})"
            )));
        }
        positive &= u.iter().all(|v| *v >= 0.0);
        if step % params.store_every == 0 || step == steps {
            values.push(u.clone());
            elapsed.push(step as f64 * dt);
        }
    }
    let times = elapsed.iter().map(|&e| spec.physical(e)).collect();
    Ok(GridSolution { grid, times, elapsed, values, positive, hbar })
}

/// The `hbar`-scaled problem. Rejects grids that under-resolve the
/// diffusion width (fewer than 8 points per `sqrt(hbar)`) or put atomic
/// jumps `hbar * k` off the grid.
pub fn solve_pide_scaled(spec: &ProblemSpec, hbar: f64, params: &GridParams) -> Result<GridSolution> {
    if !(hbar.is_finite() && hbar > 0.0) {
        return Err(Error::Argument(format!("hbar must be > 0, got {hbar}")));
    }
    params.validate()?;
    let h = params.spacing();
    if spec.model.sigma2 > 0.0 && h > hbar.sqrt() / 8.0 {
        return Err(Error::Resolution(format!(
            "grid spacing {h} gives fewer than 8 points per sqrt(hbar) = {:.4}",
            hbar.sqrt()
        )));
    }
    if matches!(spec.model.jumps, JumpMeasure::TwoPoint { .. } | JumpMeasure::FiniteAtomic(_)) {
        for a in spec.model.jumps.atoms() {
            if let Shift::Fractional { .. } = Shift::of(hbar * a.size, h) {
                return Err(Error::Resolution(format!(
                    "grid spacing {h} does not divide the scaled jump {}",
                    hbar * a.size
                )));
            }
        }
    }
    solve_pide(&spec.with_hbar(hbar), params)
}

/// Half-width keeping `extent + 6 sqrt(hbar * horizon)` inside `[-L/2, L/2]`.
pub fn suggest_half_width(extent: f64, hbar: f64, horizon: f64) -> f64 {
    2.0 * (extent.abs() + 6.0 * (hbar * horizon).sqrt())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fk::{BoundaryData, RateFunction};
    use crate::levy::LevyModel;

    fn heat(model: LevyModel, data: BoundaryData) -> ProblemSpec {
        ProblemSpec::forward(model, RateFunction::polynomial(&[0.0]), data, 1.0)
    }

    #[test]
    fn heat_kernel() {
        // g = exp(-p^2/2) -> u(t, p) = (1 + t)^(-1/2) exp(-p^2 / (2 (1 + t)))
        let spec = heat(LevyModel::brownian(1.0), BoundaryData::ScaledGaussian { c: 0.5, normalized: false });
        let sol = solve_pide(&spec, &GridParams::new(10.0, 2001, 1e-4).with_store_every(10_000)).unwrap();
        let worst = sol
            .grid
            .points()
            .iter()
            .zip(sol.final_values())
            .map(|(p, u)| (u - (-p * p / 4.0).exp() / 2f64.sqrt()).abs())
            .fold(0.0, f64::max);
        assert!(worst <= 1e-4, "{worst}");
        assert!(sol.positive);
    }

    #[test]
    fn two_point_conserves_mass() {
        let spec = heat(LevyModel::two_point(1.0, 1.0), BoundaryData::Schwartz { center: 0.0, width: 0.5, order: 0 });
        let sol = solve_pide(&spec, &GridParams::new(20.0, 4001, 1e-2)).unwrap();
        let h = sol.grid.spacing;
        let mass = |row: &[f64]| row.iter().sum::<f64>() * h;
        let m0 = mass(&sol.values[0]);
        let m1 = mass(sol.final_values());
        assert!((m1 - m0).abs() <= 1e-6 * m0, "{m0} {m1}");
    }

    #[test]
    fn hbar_one_is_bitwise_unscaled() {
        let spec = ProblemSpec::forward(
            LevyModel::two_point(1.0, 1.0),
            RateFunction::QuadraticMinusLinear,
            BoundaryData::ScaledGaussian { c: 1.0, normalized: false },
            0.5,
        );
        let params = GridParams::new(4.0, 161, 1e-2);
        let a = solve_pide(&spec, &params).unwrap();
        let b = solve_pide_scaled(&spec, 1.0, &params).unwrap();
        assert_eq!(a.values, b.values);
    }

    #[test]
    fn resolution_errors() {
        let spec = heat(LevyModel::brownian(1.0), BoundaryData::One);
        let coarse = GridParams::new(4.0, 81, 1e-2);
        assert!(matches!(solve_pide_scaled(&spec, 0.01, &coarse), Err(Error::Resolution(_))));
        let jump = heat(LevyModel::two_point(1.0, 1.0), BoundaryData::One);
        assert!(matches!(solve_pide_scaled(&jump, 0.03, &GridParams::new(4.0, 161, 1e-2)), Err(Error::Resolution(_))));
        assert!(solve_pide_scaled(&jump, 0.05, &GridParams::new(4.0, 161, 1e-2)).is_ok());
    }

    #[test]
    fn terminal_value_rows_run_backwards() {
        let spec = ProblemSpec::backward(LevyModel::brownian(1.0), RateFunction::quadratic(0.5), BoundaryData::One, 1.0);
        let sol = solve_pide(&spec, &GridParams::new(8.0, 401, 1e-2)).unwrap();
        assert_eq!(sol.times[0], 1.0);
        assert!(sol.times.last().unwrap().abs() < 1e-12);
        // u(1, p) = g = 1, u(0, 0) = cosh(1)^(-1/2)
        assert!((sol.value_at(1.0, 0.3).unwrap() - 1.0).abs() < 1e-12);
        assert!((sol.value_at(0.0, 0.0).unwrap() - 1.0 / 1f64.cosh().sqrt()).abs() < 1e-4);
    }
}
