use serde::{Deserialize, Serialize};

use super::solver::{solve_pide, GridParams};
use crate::error::{Error, Result};
use crate::fk::ProblemSpec;

/// Which discretization parameter a ladder refines.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Refinement {
    Space,
    Time,
}

/// Observed orders from successive differences on a geometric ladder.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RefinementReport {
    pub kind: Refinement,
    pub ratio: f64,
    /// Sup norm of `u_k - u_{k+1}` at the final time on the coarsest nodes.
    pub differences: Vec<f64>,
    pub orders: Vec<f64>,
    pub reached: bool,
    pub note: Option<String>,
}

impl RefinementReport {
    /// Order from the finest triple.
    pub fn order(&self) -> f64 {
        self.orders[self.orders.len() - 1]
    }
}

/// Richardson-style order estimate: `ln(d_k / d_{k+1}) / ln r`.
pub fn refine_order(spec: &ProblemSpec, ladder: &[GridParams]) -> Result<RefinementReport> {
    if ladder.len() < 3 {
        return Err(Error::Argument(format!("refinement needs at least 3 grids, got {}", ladder.len())));
    }
    let hr: Vec<f64> = ladder.windows(2).map(|w| w[0].spacing() / w[1].spacing()).collect();
    let tr: Vec<f64> = ladder.windows(2).map(|w| w[0].dt / w[1].dt).collect();
    let same = |v: &[f64]| v.iter().all(|r| (r - v[0]).abs() <= 1e-9 * v[0]);
    let (kind, ratio) = if same(&hr) && hr[0] > 1.0 + 1e-9 && tr.iter().all(|r| (r - 1.0).abs() < 1e-12) {
        (Refinement::Space, hr[0])
    } else if same(&tr) && tr[0] > 1.0 + 1e-9 && hr.iter().all(|r| (r - 1.0).abs() < 1e-12) {
        (Refinement::Time, tr[0])
    } else {
        return Err(Error::Argument("ladder must refine either spacing or dt geometrically, not both".into()));
    };
    let solutions: Vec<_> = ladder.iter().map(|g| solve_pide(spec, &g.with_store_every(usize::MAX))).collect::<Result<_>>()?;
    let coarse = solutions[0].grid;
    let horizon = spec.horizon;
    let t_end = spec.physical(horizon);
    let mut at_nodes = Vec::new();
    for s in &solutions {
        let row: Vec<f64> = (1..coarse.len - 1).map(|i| s.value_at(t_end, coarse.point(i))).collect::<Result<_>>()?;
        at_nodes.push(row);
    }
    let differences: Vec<f64> = at_nodes
        .windows(2)
        .map(|w| w[0].iter().zip(&w[1]).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max))
        .collect();
    let orders: Vec<f64> = differences.windows(2).map(|d| (d[0] / d[1]).ln() / ratio.ln()).collect();
    let reached = differences.windows(2).all(|d| d[1] < d[0]);
    Ok(RefinementReport {
        kind,
        ratio,
        differences,
        orders,
        reached,
        note: if reached { None } else { Some("asymptotic regime not reached".into()) },
    })
}
