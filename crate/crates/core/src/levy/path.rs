use rand::Rng;
use rand_distr::{Exp1, StandardNormal};

use super::model::{EffectiveDynamics, LevyModel};
use crate::error::{Error, Result};
use crate::rng::path_rng;

/// A realized cadlag trajectory on a jump-augmented time grid.
///
/// `values[i]` is the right-continuous state at `times[i]`; `jumps[i]` is the
/// jump that occurred exactly at `times[i]` (zero for ordinary grid nodes), so
/// the left limit is `values[i] - jumps[i]`.
#[derive(Debug, Clone, PartialEq)]
pub struct SamplePath {
    pub times: Vec<f64>,
    pub values: Vec<f64>,
    pub jumps: Vec<f64>,
    pub seed: u64,
}

impl SamplePath {
    pub fn left_limit(&self, i: usize) -> f64 {
        self.values[i] - self.jumps[i]
    }

    pub fn jump_count(&self) -> usize {
        self.jumps.iter().filter(|j| **j != 0.0).count()
    }

    pub fn terminal(&self) -> f64 {
        *self.values.last().expect("path has at least one node")
    }
}

/// Reusable storage for simulated increments `X_s - X_0`.
#[derive(Debug, Default, Clone)]
pub(crate) struct PathBuffer {
    pub times: Vec<f64>,
    pub values: Vec<f64>,
    pub jumps: Vec<f64>,
}

impl PathBuffer {
    fn clear(&mut self) {
        self.times.clear();
        self.values.clear();
        self.jumps.clear();
    }

    fn push(&mut self, t: f64, x: f64, j: f64) {
        self.times.push(t);
        self.values.push(x);
        self.jumps.push(j);
    }
}

pub(crate) fn check_horizon(t: f64, dt: f64) -> Result<()> {
    if !(t.is_finite() && t > 0.0) {
        return Err(Error::Argument(format!("horizon t must be > 0, got {t}")));
    }
    if !(dt.is_finite() && dt > 0.0) {
        return Err(Error::Argument(format!("time step dt must be > 0, got {dt}")));
    }
    if dt > t * (1.0 + 1e-12) {
        return Err(Error::Argument(format!("time step dt = {dt} exceeds horizon t = {t}")));
    }
    Ok(())
}

/// Simulate `X` on `[0, t]` starting from 0.
///
/// Brownian increments are exact between nodes; jump instants come from an
/// exponential clock and are inserted into the grid. With `dense == false`
/// and a piecewise-constant process the regular grid is skipped entirely.
pub(crate) fn simulate<R: Rng + ?Sized>(
    dynamics: &EffectiveDynamics,
    t: f64,
    dt: f64,
    dense: bool,
    rng: &mut R,
    buf: &mut PathBuffer,
) {
    buf.clear();
    buf.push(0.0, 0.0, 0.0);
    let sd = dynamics.diffusion.sqrt();
    let piecewise_constant = dynamics.diffusion == 0.0 && dynamics.drift == 0.0;
    let steps = if !dense && piecewise_constant { 1 } else { ((t / dt) - 1e-9).ceil().max(1.0) as usize };
    let rate = dynamics.jump_rate;
    let mut next_jump = if rate > 0.0 { rng.sample::<f64, _>(Exp1) / rate } else { f64::INFINITY };
    let mut now = 0.0;
    let mut x = 0.0;
    for k in 1..=steps {
        let node = if k == steps { t } else { k as f64 * dt };
        while next_jump < node {
            x += advance(dynamics.drift, sd, next_jump - now, rng);
            let j = dynamics.jump_scale * dynamics.sampler.sample(rng);
            x += j;
            now = next_jump;
            buf.push(now, x, j);
            next_jump += rng.sample::<f64, _>(Exp1) / rate;
        }
        x += advance(dynamics.drift, sd, node - now, rng);
        now = node;
        buf.push(now, x, 0.0);
    }
}

#[inline]
fn advance<R: Rng + ?Sized>(drift: f64, sd: f64, h: f64, rng: &mut R) -> f64 {
    if sd > 0.0 {
        drift * h + sd * h.sqrt() * rng.sample::<f64, _>(StandardNormal)
    } else {
        drift * h
    }
}

/// Sample one path of `model` on `[0, t]` with regular step `dt`, started at `p0`.
pub fn sample_path(model: &LevyModel, t: f64, dt: f64, p0: f64, seed: u64) -> Result<SamplePath> {
    model.validate()?;
    check_horizon(t, dt)?;
    let dynamics = model.effective();
    let mut rng = path_rng(seed, 0);
    let mut buf = PathBuffer::default();
    simulate(&dynamics, t, dt, true, &mut rng, &mut buf);
    Ok(SamplePath {
        times: buf.times,
        values: buf.values.into_iter().map(|v| v + p0).collect(),
        jumps: buf.jumps,
        seed,
    })
}

/// `sqrt(hbar) * W` on `[0, t]`.
pub fn sample_scaled_brownian(hbar: f64, t: f64, dt: f64, seed: u64) -> Result<SamplePath> {
    if !(hbar.is_finite() && hbar > 0.0) {
        return Err(Error::Argument(format!("hbar must be > 0, got {hbar}")));
    }
    sample_path(&LevyModel::brownian(1.0).scaled(hbar), t, dt, 0.0, seed)
}
