//! Dispatch of a resolved [`RunConfig`] to the numerical modules, rendering
//! of the outputs and atomic artifact writes with a `.run.json` record.

use std::fmt::Display;
use std::io::Write;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use crate::asymptotics::{
    drift_prediction_config, drift_prediction_momentum, hbar_sweep, prefactor_f, prefactor_mc, DriftPrediction, PrefactorSpec,
    SweepSource,
};
use crate::config::{hash_value, AsymptoticsMode, MethodKind, OutputFormat, Representation, RunConfig, SourceKind};
use crate::error::{Error, Result};
use crate::fk::{drift_estimate, fk_estimate_many, McConfig};
use crate::levy::JumpMeasure;
use crate::pide::{solve_pide, solve_pide_scaled, write_slab_bin, write_slab_csv, GridSolution};
use crate::rng::derive_seed;
use crate::variational::{
    probe_local_minimality, solve_el_config, solve_el_jump, solve_el_momentum, BoundaryTerm, Lagrangian, MinimizerResult,
};

pub const FK_HEADER: &str = "model_hash,t,p,hbar,mean,stderr,n_paths,dt,seed";
pub const SLAB_HEADER: &str = "t,p,u";
pub const PATH_HEADER: &str = "s,phi,dphi,conjugate";
pub const PREFACTOR_HEADER: &str = "model_hash,direction,t,f,f_ode,k,k_ode,mc_mean,mc_stderr,n_paths,dt,seed";
pub const DRIFT_HEADER: &str =
    "model_hash,representation,t,p,hbar,leading,correction_coeff,predicted,estimate,stderr,n_paths,dt,seed";
pub const SWEEP_HEADER: &str = "model_hash,p,t,hbar,log_value,residual,fitted_action,fitted_prefactor,local_action,\
predicted_action,predicted_prefactor,complete";

/// Command-line overrides applied on top of the file.
#[derive(Debug, Clone, Default)]
pub struct Overrides {
    pub seed: Option<u64>,
    pub out: Option<PathBuf>,
    pub format: Option<OutputFormat>,
    pub method: Option<MethodKind>,
    pub mode: Option<AsymptoticsMode>,
}

/// Applies overrides; a subcommand that disagrees with `method.kind` is a
/// configuration error.
pub fn resolve(mut cfg: RunConfig, o: &Overrides) -> Result<RunConfig> {
    if let Some(kind) = o.method {
        if cfg.method.kind != kind {
            return Err(Error::Config(format!(
                "subcommand '{}' does not match method.kind = '{}'",
                kind.name(),
                cfg.method.kind.name()
            )));
        }
    }
    if let Some(mode) = o.mode {
        cfg.method.mode = Some(mode);
    }
    if let Some(seed) = o.seed {
        cfg.seed = seed;
    }
    if let Some(out) = &o.out {
        cfg.output.path = Some(out.clone());
    }
    if let Some(f) = o.format {
        cfg.output.format = f;
    }
    cfg.validate()?;
    Ok(cfg)
}

/// Rendered output of one run.
#[derive(Debug, Clone)]
pub struct Artifact {
    pub method: String,
    pub header: Option<&'static str>,
    pub body: Vec<u8>,
    pub summary: Value,
}

/// Provenance record written next to every artifact.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunRecord {
    pub version: String,
    pub method: String,
    pub output: String,
    pub format: OutputFormat,
    pub config_hash: String,
    pub model_hash: String,
    pub config: Value,
    pub summary: Value,
}

impl RunRecord {
    /// Re-hashes the embedded configuration.
    pub fn hash_matches(&self) -> bool {
        hash_value(&self.config) == self.config_hash
    }
}

pub fn sidecar_path(path: &Path) -> PathBuf {
    let mut s = path.as_os_str().to_owned();
    s.push(".run.json");
    PathBuf::from(s)
}

pub fn read_record(artifact: &Path) -> Result<RunRecord> {
    let p = sidecar_path(artifact);
    let text = std::fs::read_to_string(&p).map_err(|e| Error::Io(format!("{}: {e}", p.display())))?;
    serde_json::from_str(&text).map_err(|e| Error::Config(format!("{}: {e}", p.display())))
}

/// Writes `bytes` to a temporary file in the target directory and renames it.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    let dir = match path.parent() {
        Some(d) if !d.as_os_str().is_empty() => d,
        _ => Path::new("."),
    };
    let io = |e: std::io::Error| Error::Io(format!("{}: {e}", path.display()));
    let mut tmp = tempfile::NamedTempFile::new_in(dir).map_err(io)?;
    tmp.write_all(bytes).map_err(io)?;
    tmp.as_file().sync_all().map_err(io)?;
    tmp.persist(path).map_err(|e| io(e.error))?;
    Ok(())
}

/// Runs the configured method and renders its output in the configured format.
pub fn execute(cfg: &RunConfig) -> Result<Artifact> {
    let method = cfg.method.kind.name().to_string();
    match cfg.method.kind {
        MethodKind::Fk => run_fk(cfg, method),
        MethodKind::Pide => run_pide(cfg, method),
        MethodKind::Variational => run_variational(cfg, method),
        MethodKind::Asymptotics => match cfg.method.mode {
            Some(AsymptoticsMode::Prefactor) => run_prefactor(cfg, method + ".prefactor"),
            Some(AsymptoticsMode::Drift) => run_drift(cfg, method + ".drift"),
            Some(AsymptoticsMode::Sweep) => run_sweep(cfg, method + ".sweep"),
            None => Err(Error::Config("method.mode is required for asymptotics".into())),
        },
    }
}

/// Executes and, when an output path is configured, writes the artifact and
/// its record. Returns the artifact for printing when no path is set.
pub fn run(cfg: &RunConfig) -> Result<Artifact> {
    let artifact = execute(cfg)?;
    if let Some(path) = &cfg.output.path {
        write_atomic(path, &artifact.body)?;
        let record = RunRecord {
            version: env!("CARGO_PKG_VERSION").to_string(),
            method: artifact.method.clone(),
            output: path.file_name().map(|f| f.to_string_lossy().into_owned()).unwrap_or_default(),
            format: cfg.output.format,
            config_hash: cfg.config_hash(),
            model_hash: cfg.model_hash(),
            config: cfg.canonical_json(),
            summary: artifact.summary.clone(),
        };
        let text = serde_json::to_string_pretty(&record).map_err(|e| Error::Io(e.to_string()))?;
        write_atomic(&sidecar_path(path), text.as_bytes())?;
    }
    Ok(artifact)
}

fn opt<T: Display>(v: Option<T>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

/// CSV text, or a JSON array of records keyed by the header columns.
fn table(cfg: &RunConfig, method: String, header: &'static str, rows: Vec<Vec<String>>, summary: Value) -> Result<Artifact> {
    let body = match cfg.output.format {
        OutputFormat::Csv => {
            let mut s = String::with_capacity(64 * (rows.len() + 1));
            s.push_str(header);
            s.push('\n');
            for r in &rows {
                s.push_str(&r.join(","));
                s.push('\n');
            }
            s.into_bytes()
        }
        OutputFormat::Json => {
            let keys: Vec<&str> = header.split(',').collect();
            let records: Vec<Value> = rows
                .iter()
                .map(|r| {
                    let obj = keys.iter().zip(r).map(|(k, v)| (k.to_string(), cell(v))).collect();
                    Value::Object(obj)
                })
                .collect();
            let mut s = serde_json::to_string_pretty(&json!({ "summary": summary, "rows": records }))
                .map_err(|e| Error::Io(e.to_string()))?;
            s.push('\n');
            s.into_bytes()
        }
        OutputFormat::Bin => {
            return Err(Error::Config(format!("output.format = bin applies to pide slabs only, not '{method}'")));
        }
    };
    Ok(Artifact { method, header: Some(header), body, summary })
}

fn cell(v: &str) -> Value {
    if v.is_empty() {
        return Value::Null;
    }
    if let Ok(x) = v.parse::<f64>() {
        if let Some(n) = serde_json::Number::from_f64(x) {
            return Value::Number(n);
        }
    }
    Value::String(v.to_string())
}

fn first_time(cfg: &RunConfig) -> f64 {
    cfg.times()[0]
}

fn boundary(cfg: &RunConfig) -> Result<BoundaryTerm> {
    Ok(match cfg.numerics.kappa {
        Some(kappa) => BoundaryTerm::Square { kappa },
        None => cfg.problem_block()?.data.boundary_term(),
    })
}

fn run_fk(cfg: &RunConfig, method: String) -> Result<Artifact> {
    let spec = cfg.problem_spec()?;
    let mc = cfg.mc();
    let hash = cfg.model_hash();
    let mut rows = Vec::new();
    for t in cfg.times() {
        let est = fk_estimate_many(&spec, t, &cfg.numerics.points, &mc)?;
        for (p, e) in cfg.numerics.points.iter().zip(est) {
            rows.push(vec![
                hash.clone(),
                t.to_string(),
                p.to_string(),
                spec.hbar().to_string(),
                e.mean.to_string(),
                e.stderr.to_string(),
                e.n_paths.to_string(),
                e.dt.to_string(),
                e.seed.to_string(),
            ]);
        }
    }
    let summary = json!({ "rows": rows.len() });
    table(cfg, method, FK_HEADER, rows, summary)
}

fn solve_grid(cfg: &RunConfig) -> Result<GridSolution> {
    let spec = cfg.problem_spec()?;
    let grid = cfg.grid()?;
    match cfg.model.hbar {
        Some(hbar) => solve_pide_scaled(&spec, hbar, &grid),
        None => solve_pide(&spec, &grid),
    }
}

fn run_pide(cfg: &RunConfig, method: String) -> Result<Artifact> {
    let sol = solve_grid(cfg)?;
    let mut probes = Vec::new();
    for t in cfg.times() {
        for &p in &cfg.numerics.points {
            probes.push(json!({ "t": t, "p": p, "u": sol.value_at(t, p)? }));
        }
    }
    let summary = json!({
        "rows": sol.rows(),
        "cols": sol.grid.len,
        "spacing": sol.grid.spacing,
        "hbar": sol.hbar,
        "positive": sol.positive,
        "values": probes,
    });
    let mut body = Vec::new();
    let header = match cfg.output.format {
        OutputFormat::Csv => {
            write_slab_csv(&sol, &mut body)?;
            Some(SLAB_HEADER)
        }
        OutputFormat::Bin => {
            write_slab_bin(&sol, &mut body)?;
            None
        }
        OutputFormat::Json => {
            body = serde_json::to_vec_pretty(&summary).map_err(|e| Error::Io(e.to_string()))?;
            body.push(b'\n');
            None
        }
    };
    Ok(Artifact { method, header, body, summary })
}

/// Extremal for the configured representation together with the Lagrangian,
/// rate and boundary that define its action.
fn extremal(cfg: &RunConfig) -> Result<(MinimizerResult, Lagrangian, crate::fk::RateFunction, BoundaryTerm, f64)> {
    let spec = cfg.problem_spec()?;
    let t = first_time(cfg);
    let x = cfg.numerics.points[0];
    let elapsed = spec.elapsed(t)?;
    let repr = cfg.method.representation.unwrap_or(Representation::Momentum);
    match repr {
        Representation::Configuration => {
            let b = boundary(cfg)?;
            let r = solve_el_config(&spec.rate, x, 0.0, elapsed, b)?;
            Ok((r, Lagrangian::gaussian(1.0), spec.rate, b, x))
        }
        Representation::Momentum => {
            let b = boundary(cfg)?;
            let l = Lagrangian::new(&spec.model.clone().unscaled())?;
            let r = solve_el_momentum(&l, &spec.rate, x, 0.0, elapsed, b)?;
            Ok((r, l, spec.rate, b, x))
        }
        Representation::Jump => {
            let JumpMeasure::TwoPoint { alpha, .. } = spec.model.jumps else {
                return Err(Error::Config("method.representation = jump needs model.jumps.kind = two_point".into()));
            };
            let r = solve_el_jump(alpha, x, t, spec.horizon)?;
            let l = Lagrangian::new(&crate::levy::LevyModel::two_point(alpha, 1.0))?;
            Ok((r, l, crate::fk::RateFunction::QuadraticMinusLinear, BoundaryTerm::Constant(1.0), x))
        }
    }
}

fn run_variational(cfg: &RunConfig, method: String) -> Result<Artifact> {
    let (r, l, rate, b, x) = extremal(cfg)?;
    let probe = if cfg.numerics.probes > 0 {
        Some(probe_local_minimality(&l, &rate, &r, x, b, cfg.numerics.probes, 1e-2, cfg.seed)?)
    } else {
        None
    };
    let summary = json!({
        "representation": cfg.method.representation.unwrap_or(Representation::Momentum),
        "action": r.action,
        "potential": r.potential,
        "boundary": r.boundary,
        "total": r.total,
        "g": r.g_value,
        "residual": r.residual,
        "iterations": r.iterations,
        "closed_form_error": r.closed_form_error,
        "probe": probe,
    });
    let rows = (0..r.s.len())
        .map(|i| vec![r.s[i].to_string(), r.path[i].to_string(), r.deriv[i].to_string(), r.conjugate[i].to_string()])
        .collect();
    table(cfg, method, PATH_HEADER, rows, summary)
}

fn run_prefactor(cfg: &RunConfig, method: String) -> Result<Artifact> {
    let hash = cfg.model_hash();
    let mc = cfg.mc();
    let dir = cfg.numerics.prefactor_direction;
    let mut rows = Vec::new();
    for t in cfg.times() {
        let spec = PrefactorSpec { direction: dir, t };
        let v = prefactor_f(&spec)?;
        let e = prefactor_mc(&spec, &mc)?;
        rows.push(vec![
            hash.clone(),
            serde_json::to_value(dir).ok().and_then(|d| d.as_str().map(String::from)).unwrap_or_default(),
            t.to_string(),
            v.f.to_string(),
            v.f_ode.to_string(),
            v.k.to_string(),
            v.k_ode.to_string(),
            e.mean.to_string(),
            e.stderr.to_string(),
            e.n_paths.to_string(),
            e.dt.to_string(),
            e.seed.to_string(),
        ]);
    }
    let summary = json!({ "rows": rows.len() });
    table(cfg, method, PREFACTOR_HEADER, rows, summary)
}

fn run_drift(cfg: &RunConfig, method: String) -> Result<Artifact> {
    let spec = cfg.problem_spec()?;
    let t = first_time(cfg);
    let x = cfg.numerics.points[0];
    let elapsed = spec.elapsed(t)?;
    let b = boundary(cfg)?;
    let mc = cfg.mc();
    let repr = cfg.method.representation.unwrap_or(Representation::Momentum);
    let pred: DriftPrediction = match repr {
        Representation::Configuration => drift_prediction_config(&spec.rate, x, elapsed, b, &mc)?,
        Representation::Momentum => drift_prediction_momentum(&spec.model.clone().unscaled(), &spec.rate, x, elapsed, b)?,
        Representation::Jump => return Err(Error::Config("drift mode supports configuration and momentum only".into())),
    };
    let repr_name = serde_json::to_value(repr).ok().and_then(|v| v.as_str().map(String::from)).unwrap_or_default();
    let hash = cfg.model_hash();
    let mut rows = Vec::new();
    for (k, &hbar) in cfg.numerics.hbar_ladder.iter().enumerate() {
        let run_mc = McConfig { seed: derive_seed(cfg.seed, k as u64 + 1), ..mc };
        let d = drift_estimate(&spec, hbar, t, x, cfg.numerics.delta, &run_mc)?;
        rows.push(vec![
            hash.clone(),
            repr_name.clone(),
            t.to_string(),
            x.to_string(),
            hbar.to_string(),
            pred.leading.to_string(),
            pred.correction_coeff.to_string(),
            (pred.leading + pred.correction_coeff * hbar).to_string(),
            d.value.to_string(),
            d.stderr.to_string(),
            run_mc.n_paths.to_string(),
            run_mc.dt.to_string(),
            run_mc.seed.to_string(),
        ]);
    }
    let summary = json!({
        "leading": pred.leading,
        "correction_coeff": pred.correction_coeff,
        "correction_stderr": pred.correction_stderr,
        "g": pred.g_value,
    });
    table(cfg, method, DRIFT_HEADER, rows, summary)
}

fn run_sweep(cfg: &RunConfig, method: String) -> Result<Artifact> {
    let spec = cfg.problem_spec()?;
    let t = first_time(cfg);
    let x = cfg.numerics.points[0];
    let source = match cfg.numerics.source {
        SourceKind::Pide => SweepSource::Pide { grid: cfg.grid()? },
        SourceKind::Mc => SweepSource::Mc { mc: cfg.mc() },
    };
    let r = hbar_sweep(&spec, x, t, &cfg.numerics.hbar_ladder, &source)?;
    let hash = cfg.model_hash();
    let rows = r
        .hbars
        .iter()
        .zip(&r.log_values)
        .zip(&r.residuals)
        .map(|((h, y), res)| {
            vec![
                hash.clone(),
                x.to_string(),
                t.to_string(),
                h.to_string(),
                y.to_string(),
                res.to_string(),
                r.fitted_action.to_string(),
                r.fitted_prefactor.to_string(),
                r.local_action.to_string(),
                r.predicted_action.to_string(),
                opt(r.predicted_prefactor),
                r.complete.to_string(),
            ]
        })
        .collect();
    let mut summary = serde_json::to_value(&r).map_err(|e| Error::Io(e.to_string()))?;
    summary["source"] = serde_json::to_value(source).map_err(|e| Error::Io(e.to_string()))?;
    table(cfg, method, SWEEP_HEADER, rows, summary)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn fk_config(seed: u64) -> RunConfig {
        RunConfig::from_toml(&format!(
            r#"
seed = {seed}
[model]
sigma2 = 1.0
[problem]
rate = {{ family = "quadratic", c = 0.5 }}
data = {{ family = "one" }}
[method]
kind = "fk"
[numerics]
n_paths = 500
dt = 0.01
times = [0.5, 1.0]
points = [0.0, 1.0]
"#
        ))
        .unwrap()
    }

    #[test]
    fn fk_csv_contract_and_determinism() {
        let a = execute(&fk_config(3)).unwrap();
        let text = String::from_utf8(a.body.clone()).unwrap();
        let mut lines = text.lines();
        assert_eq!(lines.next(), Some(FK_HEADER));
        assert_eq!(lines.count(), 4);
        assert_eq!(a.body, execute(&fk_config(3)).unwrap().body);
        assert_ne!(a.body, execute(&fk_config(4)).unwrap().body);
    }

    #[test]
    fn writes_artifact_and_record() {
        let dir = tempfile::tempdir().unwrap();
        let out = dir.path().join("fk.csv");
        let cfg = resolve(fk_config(1), &Overrides { out: Some(out.clone()), seed: Some(9), ..Default::default() }).unwrap();
        run(&cfg).unwrap();
        let rec = read_record(&out).unwrap();
        assert!(rec.hash_matches());
        assert_eq!(rec.config["seed"], 9);
        assert_eq!(rec.method, "fk");
        let first = std::fs::read(&out).unwrap();
        run(&cfg).unwrap();
        assert_eq!(first, std::fs::read(&out).unwrap());
    }

    #[test]
    fn subcommand_mismatch_and_bin_for_tables() {
        let o = Overrides { method: Some(MethodKind::Pide), ..Default::default() };
        assert!(matches!(resolve(fk_config(1), &o), Err(Error::Config(_))));
        let o = Overrides { format: Some(OutputFormat::Bin), ..Default::default() };
        let cfg = resolve(fk_config(1), &o).unwrap();
        assert_eq!(execute(&cfg).unwrap_err().exit_code(), 2);
    }

    #[test]
    fn under_resolved_pide_is_a_resolution_error() {
        let cfg = RunConfig::from_toml(
            r#"
[model]
sigma2 = 1.0
hbar = 0.01
[problem]
rate = { family = "quadratic", c = 0.5 }
data = { family = "scaled_gaussian", c = 0.5, normalized = false }
[method]
kind = "pide"
[numerics.grid]
half_width = 4.0
n = 81
dt = 0.01
"#,
        )
        .unwrap();
        let e = execute(&cfg).unwrap_err();
        assert!(matches!(e, Error::Resolution(_)));
        assert_eq!(e.exit_code(), 4);
    }

    #[test]
    fn variational_momentum_summary() {
        let cfg = RunConfig::from_toml(
            r#"
[model]
sigma2 = 1.0
[problem]
rate = { family = "quadratic", c = 0.5 }
data = { family = "scaled_gaussian", c = 1.0, normalized = false }
horizon = 1.0
direction = "backward"
[method]
kind = "variational"
representation = "momentum"
[numerics]
times = [0.5]
points = [0.4]
probes = 4
"#,
        )
        .unwrap();
        let a = execute(&cfg).unwrap();
        assert!((a.summary["total"].as_f64().unwrap() - 0.10236).abs() < 1e-5);
        assert_eq!(a.summary["probe"]["all_minimal"], true);
        assert!(String::from_utf8(a.body).unwrap().starts_with(PATH_HEADER));
    }
}
