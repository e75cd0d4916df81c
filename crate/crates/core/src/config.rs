//! JSON run configuration, `--set` overrides and the command pipelines
//! behind the `hydroelastic` binary.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use serde_json::{json, Value};
use thiserror::Error;

use crate::energy::{check_hypotheses, EnergyModel, GridSpec, IllustrativeEnergy, IllustrativeParams};
use crate::geometry::{area_a, area_a_prime, theta_of_ell};
use crate::optimizer::{continuation_sweep, maximize, SolveConfig, SolveError, SolveResult};
use crate::residuals::certify;

pub const SUPPORTED_FAMILIES: &[&str] = &["illustrative"];

pub const PROFILE_HEADER: &str = "tau,w,Cw,Omega,Theta,sigma,chi_prime,nu,mu,P";
pub const SUMMARY_HEADER: &str = "c2,J0,height,ell,gamma0,residual_dynamic";

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("config error at {pointer}: {message}")]
    Schema { pointer: String, message: String },
    #[error("unknown energy family {found:?}; supported families: {}", SUPPORTED_FAMILIES.join(", "))]
    UnknownFamily { found: String },
    #[error("validation error: {0}")]
    Validation(String),
    #[error("bad override {0:?}: expected key=value with a dotted key")]
    Override(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, clap::ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum Command {
    Solve,
    Sweep,
    Check,
    Geometry,
    Residuals,
}

/// What the binary was asked to do.
#[derive(Debug, Clone)]
pub struct RunConfig {
    pub command: Command,
    pub config_path: PathBuf,
    pub output_dir: PathBuf,
    pub overrides: Vec<String>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawFile {
    energy: Value,
    #[serde(default)]
    physics: RawPhysics,
    #[serde(default)]
    numerics: RawNumerics,
    #[serde(default)]
    sweep: RawSweep,
    #[serde(default)]
    seed: u64,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields, default)]
struct RawPhysics {
    c2: Option<f64>,
    g: f64,
    mu_star: f64,
}

impl Default for RawPhysics {
    fn default() -> Self {
        Self { c2: None, g: 1.0, mu_star: 0.95 }
    }
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields, default)]
struct RawNumerics {
    #[serde(rename = "N")]
    n: usize,
    #[serde(rename = "M")]
    m: usize,
    eps0: f64,
    tol_grad: f64,
    max_iter: usize,
}

impl Default for RawNumerics {
    fn default() -> Self {
        let d = SolveConfig::default();
        Self { n: d.n_modes, m: d.grid, eps0: d.eps0, tol_grad: d.tol_grad, max_iter: d.max_iter }
    }
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields, default)]
struct RawSweep {
    c2_values: Vec<f64>,
}

/// A validated configuration.
#[derive(Debug, Clone, Serialize)]
pub struct Config {
    pub family: String,
    pub energy: IllustrativeParams,
    /// `c2` as given; `solve.c2` holds a placeholder when absent.
    pub c2: Option<f64>,
    pub solve: SolveConfig,
    pub seed: u64,
}

impl Config {
    pub fn model(&self) -> IllustrativeEnergy {
        IllustrativeEnergy::new(self.energy).expect("validated at parse time")
    }

    fn require_c2(&self, command: Command) -> Result<f64, ConfigError> {
        self.c2.ok_or_else(|| {
            ConfigError::Validation(format!("physics.c2 is required for the {command:?} command"))
        })
    }
}

fn pointer(path: &serde_path_to_error::Path) -> String {
    let mut out = String::new();
    for seg in path.iter() {
        match seg {
            serde_path_to_error::Segment::Seq { index } => write!(out, "/{index}").unwrap(),
            serde_path_to_error::Segment::Map { key } => {
                write!(out, "/{}", key.replace('~', "~0").replace('/', "~1")).unwrap()
            }
            serde_path_to_error::Segment::Enum { variant } => write!(out, "/{variant}").unwrap(),
            serde_path_to_error::Segment::Unknown => out.push_str("/?"),
        }
    }
    if out.is_empty() {
        out.push('/');
    }
    out
}

fn decode<T: for<'de> Deserialize<'de>>(value: Value, prefix: &str) -> Result<T, ConfigError> {
    serde_path_to_error::deserialize(value).map_err(|e| {
        let inner = pointer(e.path());
        let pointer = if inner == "/" && !prefix.is_empty() { prefix.to_string() } else { format!("{prefix}{}", inner.trim_end_matches('/')) };
        ConfigError::Schema { pointer: if pointer.is_empty() { "/".into() } else { pointer }, message: e.into_inner().to_string() }
    })
}

/// Sets `key` (dotted path) to `value`, parsed as JSON when possible.
pub fn apply_override(doc: &mut Value, assignment: &str) -> Result<(), ConfigError> {
    let (key, raw) = assignment.split_once('=').ok_or_else(|| ConfigError::Override(assignment.into()))?;
    let key = key.trim();
    if key.is_empty() || key.split('.').any(str::is_empty) {
        return Err(ConfigError::Override(assignment.into()));
    }
    let value = serde_json::from_str(raw.trim()).unwrap_or_else(|_| Value::String(raw.trim().to_string()));
    let mut node = doc;
    let parts: Vec<&str> = key.split('.').collect();
    for part in &parts[..parts.len() - 1] {
        if !node.is_object() {
            return Err(ConfigError::Override(assignment.into()));
        }
        node = node
            .as_object_mut()
            .expect("checked")
            .entry(part.to_string())
            .or_insert_with(|| Value::Object(Default::default()));
    }
    match node.as_object_mut() {
        Some(map) => {
            map.insert(parts[parts.len() - 1].to_string(), value);
            Ok(())
        }
        None => Err(ConfigError::Override(assignment.into())),
    }
}

pub fn parse_config(text: &str) -> Result<Config, ConfigError> {
    parse_config_with(text, &[])
}

pub fn parse_config_with(text: &str, overrides: &[String]) -> Result<Config, ConfigError> {
    let mut doc: Value = serde_json::from_str(text).map_err(|e| ConfigError::Schema {
        pointer: "/".into(),
        message: format!("invalid JSON: {e}"),
    })?;
    for o in overrides {
        apply_override(&mut doc, o)?;
    }
    let raw: RawFile = decode(doc, "")?;

    let mut energy = match raw.energy {
        Value::Object(map) => map,
        _ => {
            return Err(ConfigError::Schema { pointer: "/energy".into(), message: "expected an object".into() })
        }
    };
    let family = match energy.remove("family") {
        Some(Value::String(s)) => s,
        Some(_) => {
            return Err(ConfigError::Schema {
                pointer: "/energy/family".into(),
                message: "expected a string".into(),
            })
        }
        None => {
            return Err(ConfigError::Schema {
                pointer: "/energy/family".into(),
                message: format!("missing field; supported families: {}", SUPPORTED_FAMILIES.join(", ")),
            })
        }
    };
    if !SUPPORTED_FAMILIES.contains(&family.as_str()) {
        return Err(ConfigError::UnknownFamily { found: family });
    }
    let params: IllustrativeParams = decode(Value::Object(energy), "/energy")?;
    let model = IllustrativeEnergy::new(params).map_err(|e| ConfigError::Validation(e.to_string()))?;

    let physics = raw.physics;
    let c2 = physics.c2;
    let solve = SolveConfig {
        n_modes: raw.numerics.n,
        grid: raw.numerics.m,
        c2: c2.unwrap_or(physics.g + model.e22_rest()),
        g: physics.g,
        mu_star: physics.mu_star,
        eps0: raw.numerics.eps0,
        tol_grad: raw.numerics.tol_grad,
        max_iter: raw.numerics.max_iter,
        schedule: raw.sweep.c2_values,
        check: true,
    };
    solve.validate().map_err(|e| ConfigError::Validation(e.to_string()))?;

    let cond = model.closed_form_checks(solve.c2, solve.g, solve.mu_star);
    if let Some(ex1) = cond.iter().find(|c| c.id == "ill_ex_1" && c.status.is_fail()) {
        return Err(ConfigError::Validation(format!(
            "energy violates ill_ex_1 ({}): alpha = {}, delta = {}",
            ex1.description, params.alpha, params.delta
        )));
    }
    Ok(Config { family, energy: params, c2, solve, seed: raw.seed })
}

/// Outcome of a run, mapped to the process exit status by [`RunOutcome::code`].
#[derive(Debug)]
pub enum RunOutcome {
    Success,
    NotConverged,
}

#[derive(Debug, Error)]
pub enum RunError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error(transparent)]
    Solve(#[from] SolveError),
    #[error("{path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
    #[error("{0}")]
    Other(String),
}

impl RunOutcome {
    pub fn code(&self) -> i32 {
        match self {
            RunOutcome::Success => 0,
            RunOutcome::NotConverged => 3,
        }
    }
}

impl RunError {
    pub fn code(&self) -> i32 {
        match self {
            RunError::Config(_) => 2,
            RunError::Solve(SolveError::Config(_) | SolveError::Hypothesis(_) | SolveError::Inadmissible { .. }) => 2,
            _ => 1,
        }
    }
}

fn write(path: &Path, contents: &str) -> Result<(), RunError> {
    fs::write(path, contents).map_err(|source| RunError::Io { path: path.to_path_buf(), source })
}

fn to_json(value: &Value) -> String {
    let mut s = serde_json::to_string_pretty(value).expect("serializable");
    s.push('\n');
    s
}

/// One row per base-grid node; `ν` and `μ` come from the printed `Ω`, `χ′`
/// and `σ` so that they can be recomputed from the file.
pub fn profile_csv(result: &SolveResult) -> String {
    let st = &result.state;
    let g = &st.geom;
    let p = result.residuals.pressure.samples();
    let mut out = String::from(PROFILE_HEADER);
    out.push('\n');
    for (j, tau) in g.w.nodes().iter().enumerate() {
        let omega = g.omega.samples()[j];
        let chi = st.chi_prime.samples()[j];
        let sigma = g.sigma.samples()[j];
        let nu = omega / chi;
        let row = [tau, &g.w.samples()[j], &g.cw.samples()[j], &omega, &g.theta.samples()[j], &sigma, &chi, &nu, &(nu * sigma), &p[j]];
        let cells: Vec<String> = row.iter().map(|v| format!("{:.16e}", v)).collect();
        out.push_str(&cells.join(","));
        out.push('\n');
    }
    out
}

/// `(ℓ, θ(ℓ), A(ℓ), A′(ℓ))` on a log grid of `ℓ − 1` over `[1e-8, 1e4]`.
pub fn geometry_csv(points: usize) -> Result<String, RunError> {
    let mut out = String::from("ell,theta,A,A_prime\n");
    for k in 0..points {
        let u = -8.0 + 12.0 * k as f64 / (points - 1) as f64;
        let ell = 1.0 + 10f64.powf(u);
        let err = |e: crate::geometry::GeometryError| RunError::Other(e.to_string());
        let th = theta_of_ell(ell).map_err(err)?;
        let a = area_a(ell).map_err(err)?;
        let ap = area_a_prime(ell).map_err(err)?;
        writeln!(out, "{ell:.16e},{th:.16e},{a:.16e},{ap:.16e}").unwrap();
    }
    Ok(out)
}

fn solve_json(cfg: &Config, result: &SolveResult) -> Value {
    json!({
        "command": "solve",
        "config": cfg,
        "result": result,
    })
}

/// Rejects `c²` above the certified interval; values at or below the lower
/// end are allowed and lead to the trivial solution.
fn admissibility(cfg: &Config, model: &IllustrativeEnergy, c2: f64) -> Result<Option<(f64, f64)>, RunError> {
    let report = check_hypotheses(model, c2, cfg.solve.g, cfg.solve.mu_star, &GridSpec::default())
        .map_err(|e| ConfigError::Validation(e.to_string()))?;
    if let Some((lo, hi)) = report.admissible_c2 {
        if c2 > hi {
            return Err(SolveError::Inadmissible { c2, lo, hi }.into());
        }
    }
    Ok(report.admissible_c2)
}

pub fn run(rc: &RunConfig) -> Result<RunOutcome, RunError> {
    let text = fs::read_to_string(&rc.config_path)
        .map_err(|source| RunError::Io { path: rc.config_path.clone(), source })?;
    let cfg = parse_config_with(&text, &rc.overrides)?;
    fs::create_dir_all(&rc.output_dir).map_err(|source| RunError::Io { path: rc.output_dir.clone(), source })?;
    let out = |name: &str| rc.output_dir.join(name);
    let model = cfg.model();

    match rc.command {
        Command::Geometry => {
            write(&out("geometry.csv"), &geometry_csv(200)?)?;
            Ok(RunOutcome::Success)
        }
        Command::Check => {
            let c2 = cfg.require_c2(rc.command)?;
            let report = check_hypotheses(&model, c2, cfg.solve.g, cfg.solve.mu_star, &GridSpec::default())
                .map_err(|e| ConfigError::Validation(e.to_string()))?;
            write(&out("result.json"), &to_json(&json!({ "command": "check", "report": report })))?;
            Ok(RunOutcome::Success)
        }
        Command::Solve | Command::Residuals => {
            let c2 = cfg.require_c2(rc.command)?;
            let interval = admissibility(&cfg, &model, c2)?;
            let result = maximize(&cfg.solve, &model)?;
            if rc.command == Command::Solve {
                let mut v = solve_json(&cfg, &result);
                v["admissible_c2"] = json!(interval);
                write(&out("result.json"), &to_json(&v))?;
            } else {
                let report = certify(&result.state, &model).map_err(SolveError::from)?;
                write(&out("result.json"), &to_json(&json!({ "command": "residuals", "c2": c2, "report": report })))?;
            }
            write(&out("profile.csv"), &profile_csv(&result))?;
            Ok(if result.converged { RunOutcome::Success } else { RunOutcome::NotConverged })
        }
        Command::Sweep => {
            if cfg.solve.schedule.is_empty() {
                return Err(ConfigError::Validation("sweep.c2_values is empty".into()).into());
            }
            let points = continuation_sweep(&cfg.solve, &model);
            let mut summary = String::from(SUMMARY_HEADER);
            summary.push('\n');
            let mut all_converged = true;
            for p in &points {
                match &p.result {
                    Some(r) => {
                        all_converged &= r.converged;
                        writeln!(
                            summary,
                            "{:.16e},{:.16e},{:.16e},{:.16e},{:.16e},{:.16e}",
                            p.c2, r.j0_value, r.height, r.geometry.ell, r.gamma0, r.residuals.dynamic_sup
                        )
                        .unwrap();
                    }
                    None => writeln!(summary, "{:.16e},NaN,NaN,NaN,NaN,NaN", p.c2).unwrap(),
                }
            }
            write(&out("result.json"), &to_json(&json!({ "command": "sweep", "config": cfg, "points": points })))?;
            write(&out("summary.csv"), &summary)?;
            Ok(if all_converged { RunOutcome::Success } else { RunOutcome::NotConverged })
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const MINIMAL: &str = r#"{
        "energy": {"family": "illustrative", "a": 40, "b": 30, "beta": 0.5, "d": 0.25,
                   "r": 4, "s": 3, "p": 4, "alpha": 2, "delta": 0.5},
        "physics": {"c2": 4.5}
    }"#;

    #[test]
    fn minimal_document_gets_defaults() {
        let c = parse_config(MINIMAL).unwrap();
        assert_eq!(c.solve.n_modes, 128);
        assert_eq!(c.solve.grid, 256);
        assert_eq!(c.solve.eps0, 1e-3);
        assert_eq!(c.solve.tol_grad, 1e-9);
        assert_eq!(c.solve.g, 1.0);
        assert_eq!(c.c2, Some(4.5));
        assert_eq!(c.seed, 0);
    }

    #[test]
    fn unknown_keys_report_a_pointer() {
        let text = MINIMAL.replace("\"c2\": 4.5", "\"c2\": 4.5, \"gg\": 1");
        match parse_config(&text) {
            Err(ConfigError::Schema { pointer, message }) => {
                assert!(pointer.starts_with("/physics"), "{pointer}");
                assert!(message.contains("gg"), "{message}");
            }
            other => panic!("{other:?}"),
        }
        let text = MINIMAL.replace("\"a\": 40", "\"a\": \"forty\"");
        match parse_config(&text) {
            Err(ConfigError::Schema { pointer, .. }) => assert_eq!(pointer, "/energy/a"),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn unknown_family_lists_supported() {
        let text = MINIMAL.replace("illustrative", "neo-hookean");
        let err = parse_config(&text).unwrap_err();
        assert!(matches!(err, ConfigError::UnknownFamily { .. }));
        assert!(err.to_string().contains("illustrative"));
    }

    #[test]
    fn physical_violations() {
        let err = parse_config(&MINIMAL.replace("\"alpha\": 2", "\"alpha\": 0.5")).unwrap_err();
        assert!(matches!(err, ConfigError::Validation(_)), "{err}");
        let err = parse_config(&MINIMAL.replace("\"p\": 4", "\"p\": 2")).unwrap_err();
        assert!(matches!(err, ConfigError::Validation(ref m) if m.contains('p')), "{err}");
        let err = parse_config_with(MINIMAL, &["energy.alpha=2".into(), "energy.delta=2".into()]).unwrap_err();
        assert!(err.to_string().contains("ill_ex_1"), "{err}");
    }

    #[test]
    fn overrides() {
        let c = parse_config_with(
            MINIMAL,
            &["physics.c2=5.25".into(), "numerics.N=32".into(), "sweep.c2_values=[3,4]".into()],
        )
        .unwrap();
        assert_eq!(c.c2, Some(5.25));
        assert_eq!(c.solve.n_modes, 32);
        assert_eq!(c.solve.schedule, vec![3.0, 4.0]);
        assert!(parse_config_with(MINIMAL, &["novalue".into()]).is_err());
        assert!(parse_config_with(MINIMAL, &["numerics.N=1000".into()]).is_err());
    }

    #[test]
    fn geometry_table() {
        let t = geometry_csv(5).unwrap();
        assert_eq!(t.lines().count(), 6);
        assert!(t.starts_with("ell,theta,A,A_prime\n"));
    }
}
