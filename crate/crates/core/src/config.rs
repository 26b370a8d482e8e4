//! Run configuration (TOML), its validation and content hashing.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::asymptotics::{PrefactorDirection, DEFAULT_LADDER};
use crate::error::{Error, Result};
use crate::fk::{BoundaryData, Direction, McConfig, ProblemSpec, RateFunction};
use crate::levy::{Atom, JumpMeasure, LevyModel, Regime, GAMMA_CUTOFF, GAMMA_EPSILON};
use crate::pide::GridParams;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    #[serde(default)]
    pub seed: u64,
    pub model: ModelBlock,
    #[serde(default)]
    pub problem: Option<ProblemBlock>,
    pub method: MethodBlock,
    #[serde(default)]
    pub numerics: NumericsBlock,
    #[serde(default)]
    pub output: OutputBlock,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelBlock {
    #[serde(default)]
    pub drift: f64,
    #[serde(default)]
    pub sigma2: f64,
    #[serde(default)]
    pub jumps: JumpsBlock,
    /// Absent means the unscaled model.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub hbar: Option<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum JumpKind {
    #[default]
    None,
    TwoPoint,
    Atoms,
    Gamma,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct JumpsBlock {
    #[serde(default)]
    pub kind: JumpKind,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub alpha: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub mass: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub atoms: Option<Vec<Atom>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub epsilon: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub cutoff: Option<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DirectionKey {
    Forward,
    Backward,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProblemBlock {
    /// `U`; the potential `V` in the configuration representation.
    pub rate: RateFunction,
    pub data: BoundaryData,
    #[serde(default = "one")]
    pub horizon: f64,
    #[serde(default = "forward")]
    pub direction: DirectionKey,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MethodKind {
    Fk,
    Pide,
    Variational,
    Asymptotics,
}

impl MethodKind {
    pub fn name(self) -> &'static str {
        match self {
            MethodKind::Fk => "fk",
            MethodKind::Pide => "pide",
            MethodKind::Variational => "variational",
            MethodKind::Asymptotics => "asymptotics",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AsymptoticsMode {
    Prefactor,
    Drift,
    Sweep,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Representation {
    Configuration,
    Momentum,
    Jump,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MethodBlock {
    pub kind: MethodKind,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub mode: Option<AsymptoticsMode>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub representation: Option<Representation>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SourceKind {
    #[default]
    Pide,
    Mc,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridBlock {
    pub half_width: f64,
    pub n: usize,
    pub dt: f64,
    #[serde(default = "one_usize")]
    pub store_every: usize,
    #[serde(default = "two_usize")]
    pub smoothing_steps: usize,
}

impl GridBlock {
    pub fn params(&self) -> GridParams {
        GridParams {
            half_width: self.half_width,
            n: self.n,
            dt: self.dt,
            store_every: self.store_every,
            smoothing_steps: self.smoothing_steps,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NumericsBlock {
    #[serde(default = "default_paths")]
    pub n_paths: usize,
    #[serde(default = "default_dt")]
    pub dt: f64,
    /// Physical evaluation times; empty means the horizon.
    #[serde(default)]
    pub times: Vec<f64>,
    #[serde(default = "origin")]
    pub points: Vec<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub grid: Option<GridBlock>,
    #[serde(default = "default_ladder")]
    pub hbar_ladder: Vec<f64>,
    #[serde(default)]
    pub source: SourceKind,
    #[serde(default = "default_delta")]
    pub delta: f64,
    /// Overrides the boundary coefficient implied by the data.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub kappa: Option<f64>,
    #[serde(default = "default_prefactor_direction")]
    pub prefactor_direction: PrefactorDirection,
    /// Random bumps used to probe local minimality of extremals.
    #[serde(default = "default_probes")]
    pub probes: usize,
}

impl Default for NumericsBlock {
    fn default() -> Self {
        toml::from_str("").expect("numerics defaults")
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OutputFormat {
    #[default]
    Csv,
    Json,
    Bin,
}

impl OutputFormat {
    pub fn extension(self) -> &'static str {
        match self {
            OutputFormat::Csv => "csv",
            OutputFormat::Json => "json",
            OutputFormat::Bin => "bin",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputBlock {
    #[serde(default)]
    pub format: OutputFormat,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub path: Option<PathBuf>,
}

fn one() -> f64 {
    1.0
}
fn one_usize() -> usize {
    1
}
fn two_usize() -> usize {
    2
}
fn forward() -> DirectionKey {
    DirectionKey::Forward
}
fn default_paths() -> usize {
    10_000
}
fn default_dt() -> f64 {
    1e-3
}
fn origin() -> Vec<f64> {
    vec![0.0]
}
fn default_ladder() -> Vec<f64> {
    DEFAULT_LADDER.to_vec()
}
fn default_delta() -> f64 {
    1e-3
}
fn default_prefactor_direction() -> PrefactorDirection {
    PrefactorDirection::Forward
}
fn default_probes() -> usize {
    16
}

impl RunConfig {
    /// Parses and validates.
    pub fn from_toml(text: &str) -> Result<Self> {
        let cfg = Self::parse_toml(text)?;
        cfg.validate()?;
        Ok(cfg)
    }

    /// Parses without the semantic checks, so that overrides can still
    /// complete the configuration.
    pub fn parse_toml(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::Config(e.to_string()))
    }

    /// Reads and parses a file; validation happens in `run::resolve`.
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::Io(format!("{}: {e}", path.display())))?;
        Self::parse_toml(&text).map_err(|e| match e {
            Error::Config(m) => Error::Config(format!("{}: {m}", path.display())),
            other => other,
        })
    }

    pub fn levy_model(&self) -> Result<LevyModel> {
        let m = &self.model;
        let j = &m.jumps;
        let need = |v: Option<f64>, key: &str| v.ok_or_else(|| Error::Config(format!("model.jumps.{key} is required")));
        let jumps = match j.kind {
            JumpKind::None => JumpMeasure::None,
            JumpKind::TwoPoint => JumpMeasure::TwoPoint { alpha: need(j.alpha, "alpha")?, mass: j.mass.unwrap_or(1.0) },
            JumpKind::Atoms => JumpMeasure::FiniteAtomic(
                j.atoms.clone().ok_or_else(|| Error::Config("model.jumps.atoms is required".into()))?,
            ),
            JumpKind::Gamma => JumpMeasure::GammaDensity {
                epsilon: j.epsilon.unwrap_or(GAMMA_EPSILON),
                cutoff: j.cutoff.unwrap_or(GAMMA_CUTOFF),
            },
        };
        let regime = match m.hbar {
            None => Regime::Unscaled,
            Some(hbar) => Regime::Scaled { hbar },
        };
        LevyModel::new(m.drift, m.sigma2, jumps, regime).map_err(|e| match e {
            Error::Config(msg) if !msg.starts_with("model.") => Error::Config(format!("model.{msg}")),
            other => other,
        })
    }

    pub fn problem_block(&self) -> Result<&ProblemBlock> {
        self.problem
            .as_ref()
            .ok_or_else(|| Error::Config(format!("method '{}' needs a [problem] block", self.method.kind.name())))
    }

    pub fn problem_spec(&self) -> Result<ProblemSpec> {
        let p = self.problem_block()?;
        let direction = match p.direction {
            DirectionKey::Forward => Direction::ForwardFromInitial,
            DirectionKey::Backward => Direction::BackwardFromTerminal,
        };
        ProblemSpec::new(self.levy_model()?, p.rate.clone(), p.data.clone(), p.horizon, direction)
    }

    pub fn mc(&self) -> McConfig {
        McConfig::new(self.numerics.n_paths, self.numerics.dt, self.seed)
    }

    pub fn grid(&self) -> Result<GridParams> {
        self.numerics
            .grid
            .map(|g| g.params())
            .ok_or_else(|| Error::Config("numerics.grid is required for grid solves".into()))
    }

    /// Evaluation times, defaulting to the horizon.
    pub fn times(&self) -> Vec<f64> {
        if self.numerics.times.is_empty() {
            vec![self.problem.as_ref().map_or(1.0, |p| p.horizon)]
        } else {
            self.numerics.times.clone()
        }
    }

    /// Checks everything that can be checked without running a solver.
    pub fn validate(&self) -> Result<()> {
        self.levy_model()?;
        let n = &self.numerics;
        if n.n_paths < 2 {
            return Err(Error::Config(format!("numerics.n_paths must be >= 2, got {}", n.n_paths)));
        }
        if !(n.dt.is_finite() && n.dt > 0.0) {
            return Err(Error::Config(format!("numerics.dt must be > 0, got {}", n.dt)));
        }
        if !(n.delta.is_finite() && n.delta > 0.0) {
            return Err(Error::Config(format!("numerics.delta must be > 0, got {}", n.delta)));
        }
        if n.points.is_empty() || n.points.iter().any(|p| !p.is_finite()) {
            return Err(Error::Config("numerics.points must be a non-empty list of finite numbers".into()));
        }
        if let Some(k) = n.kappa {
            if !(k.is_finite() && k >= 0.0) {
                return Err(Error::Config(format!("numerics.kappa must be >= 0, got {k}")));
            }
        }
        if let Some(g) = n.grid {
            if g.n < 3 || !(g.half_width > 0.0 && g.dt > 0.0) || g.store_every == 0 {
                return Err(Error::Config(
                    "numerics.grid needs n >= 3, half_width > 0, dt > 0 and store_every >= 1".into(),
                ));
            }
        }
        let needs_problem = match self.method.kind {
            MethodKind::Asymptotics => self.method.mode != Some(AsymptoticsMode::Prefactor),
            _ => true,
        };
        if needs_problem {
            self.problem_spec()?;
        }
        if self.method.kind == MethodKind::Asymptotics && self.method.mode.is_none() {
            return Err(Error::Config("method.mode is required for asymptotics (prefactor, drift or sweep)".into()));
        }
        if self.method.kind != MethodKind::Asymptotics && self.method.mode.is_some() {
            return Err(Error::Config(format!("method.mode does not apply to method '{}'", self.method.kind.name())));
        }
        Ok(())
    }

    /// Canonical JSON of the resolved configuration (object keys sorted).
    pub fn canonical_json(&self) -> serde_json::Value {
        // serde_json's default map is ordered, so the value is canonical
        serde_json::to_value(self).expect("config serializes")
    }

    pub fn config_hash(&self) -> String {
        hash_value(&self.canonical_json())
    }

    /// Hash of the model and problem blocks only, shortened to 16 hex digits.
    pub fn model_hash(&self) -> String {
        let v = serde_json::json!({ "model": self.model, "problem": self.problem });
        hash_value(&v)[..16].to_string()
    }
}

pub fn hash_value(v: &serde_json::Value) -> String {
    hex::encode(Sha256::digest(v.to_string().as_bytes()))
}

#[cfg(test)]
mod tests {
    use super::*;

    const FK: &str = r#"
seed = 7
[model]
sigma2 = 1.0
[problem]
horizon = 1.0
rate = { family = "quadratic", c = 0.5 }
data = { family = "scaled_gaussian", c = 0.5, normalized = false }
[method]
kind = "fk"
[numerics]
n_paths = 1000
points = [0.0, 0.5]
"#;

    #[test]
    fn parses_and_fills_defaults() {
        let c = RunConfig::from_toml(FK).unwrap();
        assert_eq!(c.seed, 7);
        assert_eq!(c.numerics.dt, 1e-3);
        assert_eq!(c.numerics.hbar_ladder, DEFAULT_LADDER.to_vec());
        assert_eq!(c.times(), vec![1.0]);
        assert_eq!(c.output.format, OutputFormat::Csv);
        assert!(c.problem_spec().is_ok());
    }

    #[test]
    fn unknown_keys_are_rejected() {
        let bad = FK.replace("sigma2 = 1.0", "sigma2 = 1.0\nsigma = 2.0");
        assert!(matches!(RunConfig::from_toml(&bad), Err(Error::Config(m)) if m.contains("sigma")));
        let bad = FK.replace("n_paths = 1000", "n_path = 1000");
        assert!(RunConfig::from_toml(&bad).is_err());
        let bad = FK.replace("c = 0.5 }\ndata", "c = 0.5, d = 1.0 }\ndata");
        assert!(RunConfig::from_toml(&bad).is_err());
    }

    #[test]
    fn negative_sigma2_names_the_field() {
        let bad = FK.replace("sigma2 = 1.0", "sigma2 = -1.0");
        match RunConfig::from_toml(&bad) {
            Err(e @ Error::Config(_)) => {
                assert!(e.to_string().contains("model.sigma2"), "{e}");
                assert_eq!(e.exit_code(), 2);
            }
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn hash_is_stable_and_sensitive() {
        let a = RunConfig::from_toml(FK).unwrap();
        let b = RunConfig::from_toml(&FK.replace("seed = 7", "seed = 7\n")).unwrap();
        assert_eq!(a.config_hash(), b.config_hash());
        let c = RunConfig::from_toml(&FK.replace("seed = 7", "seed = 8")).unwrap();
        assert_ne!(a.config_hash(), c.config_hash());
        assert_eq!(a.model_hash(), c.model_hash());
        assert_eq!(a.model_hash().len(), 16);
        let round: RunConfig = serde_json::from_value(a.canonical_json()).unwrap();
        assert_eq!(round, a);
    }

    #[test]
    fn jump_blocks() {
        let two = FK.replace("sigma2 = 1.0", "jumps = { kind = \"two_point\", alpha = 1.0, mass = 2.0 }");
        let m = RunConfig::from_toml(&two).unwrap().levy_model().unwrap();
        assert_eq!(m.jumps, JumpMeasure::TwoPoint { alpha: 1.0, mass: 2.0 });
        let missing = FK.replace("sigma2 = 1.0", "jumps = { kind = \"two_point\" }");
        assert!(matches!(RunConfig::from_toml(&missing), Err(Error::Config(m)) if m.contains("alpha")));
        let gamma = FK.replace("sigma2 = 1.0", "jumps = { kind = \"gamma\" }\nhbar = 0.1");
        let m = RunConfig::from_toml(&gamma).unwrap().levy_model().unwrap();
        assert!(m.is_subordinator() && m.hbar() == 0.1);
    }

    #[test]
    fn asymptotics_needs_mode() {
        let bad = FK.replace("kind = \"fk\"", "kind = \"asymptotics\"");
        assert!(matches!(RunConfig::from_toml(&bad), Err(Error::Config(m)) if m.contains("mode")));
        let ok = "[model]\nsigma2 = 1.0\n[method]\nkind = \"asymptotics\"\nmode = \"prefactor\"\n";
        assert!(RunConfig::from_toml(ok).is_ok());
    }
}
