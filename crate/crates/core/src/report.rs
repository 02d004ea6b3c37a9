//! Experiment driver: settings, the commands behind the CLI, CSV/JSON output
//! and run manifests.
//!
//! Settings are resolved in three layers: per-command defaults, then a config
//! file (flat TOML, or the JSON manifest of an earlier run), then command-line
//! flags.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::time::Instant;

use serde_json::{json, Map, Value};
use sha2::{Digest, Sha256};

use crate::calibration::{min_coverage_curve, table1, Grids, JcCalibrator};
use crate::dgp::{EstimatorPair, ExperimentConfig};
use crate::error::{Error, Result};
use crate::mc::{
    efficiency_report, grid_sweep, run_coverage, run_sel, McEstimate, RunOptions, SweepParameter,
    VarianceMode,
};

/// Version tag written into every CSV header and manifest.
pub const FORMAT_VERSION: u32 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Command {
    Figure1,
    Figure2,
    Figure3,
    Table1,
    Efficiency,
    Coverage,
    Sel,
}

impl Command {
    pub fn name(&self) -> &'static str {
        match self {
            Command::Figure1 => "figure1",
            Command::Figure2 => "figure2",
            Command::Figure3 => "figure3",
            Command::Table1 => "table1",
            Command::Efficiency => "efficiency",
            Command::Coverage => "coverage",
            Command::Sel => "sel",
        }
    }

    fn default_out(&self) -> Option<&'static str> {
        match self {
            Command::Figure1 => Some("figure1.csv"),
            Command::Figure2 => Some("figure2.csv"),
            Command::Figure3 => Some("figure3.csv"),
            Command::Table1 => Some("table1.csv"),
            _ => None,
        }
    }
}

fn steps(lo: f64, step: f64, count: usize) -> Vec<f64> {
    // integer multiples keep grid values free of accumulated rounding
    (0..count).map(|i| lo + i as f64 * step).collect()
}

/// Fully resolved settings of one command.
#[derive(Debug, Clone, PartialEq)]
pub struct Settings {
    pub experiment: ExperimentConfig,
    pub alpha_tildes: Vec<f64>,
    pub lambda_grid: Vec<f64>,
    pub tau_grid: Vec<f64>,
    pub psi_grid: Vec<f64>,
    pub rho_grid: Vec<f64>,
    pub refine: bool,
    pub rho_values: Vec<f64>,
    pub psi_values: Vec<f64>,
    pub sel_rho: Vec<f64>,
    pub c_star: Option<f64>,
    pub c_min: Option<f64>,
    pub jc_replicates: usize,
}

impl Settings {
    pub fn defaults(command: Command) -> Self {
        let grids = Grids::default();
        let mut s = Self {
            experiment: ExperimentConfig::default(),
            alpha_tildes: vec![0.05, 0.5],
            lambda_grid: steps(-9.5, 0.5, 39),
            tau_grid: grids.tau,
            psi_grid: grids.psi,
            rho_grid: grids.rho,
            refine: grids.refine,
            rho_values: (0..=9).map(|i| i as f64 / 10.0).collect(),
            psi_values: vec![
                0.05, 0.075, 0.1, 0.125, 0.15, 0.175, 0.2, 0.225, 0.25, 0.3, 0.35, 0.4, 0.5, 0.6,
                0.75, 1.0, 1.25, 1.5, 2.0, 2.5, 3.0, 4.0, 5.0,
            ],
            sel_rho: vec![0.0, 0.2, 0.4, 0.6, 0.8],
            c_star: None,
            c_min: None,
            jc_replicates: crate::calibration::DEFAULT_JC_REPLICATES,
        };
        let e = &mut s.experiment;
        match command {
            Command::Figure1 => {
                e.rho = 0.3;
                e.replicates = 20_000;
            }
            Command::Figure2 | Command::Figure3 => {
                e.replicates = 20_000;
                if command == Command::Figure3 {
                    e.rho = 0.4;
                }
                s.tau_grid = (0..50).map(|i| i as f64 / 50.0).collect();
            }
            Command::Table1 => e.replicates = 20_000,
            Command::Efficiency | Command::Coverage | Command::Sel => {}
        }
        s
    }

    /// Apply one key of a flat config table.
    pub fn apply(&mut self, key: &str, value: &Value) -> Result<()> {
        let e = &mut self.experiment;
        match key {
            "n" => e.n = as_usize(key, value)?,
            "t" => e.t = as_usize(key, value)?,
            "alpha" => e.alpha = as_f64(key, value)?,
            "alpha_tilde" => e.alpha_tilde = as_f64(key, value)?,
            "rho" => e.rho = as_f64(key, value)?,
            "tau" => e.tau = as_f64(key, value)?,
            "sigma_eps" => e.sigma_eps = as_f64(key, value)?,
            "sigma_mu" => e.sigma_mu = as_f64(key, value)?,
            "sigma_x" => e.sigma_x = as_f64(key, value)?,
            "a" => e.a = as_f64(key, value)?,
            "beta" => e.beta = as_f64(key, value)?,
            "estimator" => e.estimator = as_estimator(key, value)?,
            "replicates" => e.replicates = as_usize(key, value)?,
            "seed" => e.seed = as_u64(key, value)?,
            "alpha_tildes" => self.alpha_tildes = as_vec(key, value)?,
            "lambda_grid" => self.lambda_grid = as_vec(key, value)?,
            "tau_grid" => self.tau_grid = as_vec(key, value)?,
            "psi_grid" => self.psi_grid = as_vec(key, value)?,
            "rho_grid" => self.rho_grid = as_vec(key, value)?,
            "refine" => {
                self.refine = value
                    .as_bool()
                    .ok_or_else(|| Error::config(key, "expected true or false"))?
            }
            "rho_values" => self.rho_values = as_vec(key, value)?,
            "psi_values" => self.psi_values = as_vec(key, value)?,
            "sel_rho" => self.sel_rho = as_vec(key, value)?,
            "c_star" => self.c_star = Some(as_f64(key, value)?),
            "c_min" => self.c_min = Some(as_f64(key, value)?),
            "jc_replicates" => self.jc_replicates = as_usize(key, value)?,
            _ => return Err(Error::config(key, "unknown key")),
        }
        Ok(())
    }

    /// Apply a flat table. `psi` and `lambda` are applied last, as σμ = ψσε
    /// and τ = λ/√N, and may not be combined with `sigma_mu` or `tau`.
    pub fn apply_table(&mut self, table: &Map<String, Value>) -> Result<()> {
        for (k, v) in table {
            if k != "psi" && k != "lambda" {
                self.apply(k, v)?;
            }
        }
        if let Some(v) = table.get("psi") {
            if table.contains_key("sigma_mu") {
                return Err(Error::config("psi", "give either psi or sigma_mu"));
            }
            let psi = as_f64("psi", v)?;
            self.experiment = self.experiment.with_psi(psi);
        }
        if let Some(v) = table.get("lambda") {
            if table.contains_key("tau") {
                return Err(Error::config("lambda", "give either lambda or tau"));
            }
            let lambda = as_f64("lambda", v)?;
            self.experiment = self.experiment.with_lambda(lambda);
        }
        Ok(())
    }

    /// The flat table that reproduces these settings exactly.
    pub fn to_table(&self) -> Map<String, Value> {
        let e = &self.experiment;
        let mut m = Map::new();
        m.insert("n".into(), json!(e.n));
        m.insert("t".into(), json!(e.t));
        m.insert("alpha".into(), json!(e.alpha));
        m.insert("alpha_tilde".into(), json!(e.alpha_tilde));
        m.insert("rho".into(), json!(e.rho));
        m.insert("tau".into(), json!(e.tau));
        m.insert("sigma_eps".into(), json!(e.sigma_eps));
        m.insert("sigma_mu".into(), json!(e.sigma_mu));
        m.insert("sigma_x".into(), json!(e.sigma_x));
        m.insert("a".into(), json!(e.a));
        m.insert("beta".into(), json!(e.beta));
        m.insert("estimator".into(), json!(e.estimator.name()));
        m.insert("replicates".into(), json!(e.replicates));
        m.insert("seed".into(), json!(e.seed));
        m.insert("alpha_tildes".into(), json!(self.alpha_tildes));
        m.insert("lambda_grid".into(), json!(self.lambda_grid));
        m.insert("tau_grid".into(), json!(self.tau_grid));
        m.insert("psi_grid".into(), json!(self.psi_grid));
        m.insert("rho_grid".into(), json!(self.rho_grid));
        m.insert("refine".into(), json!(self.refine));
        m.insert("rho_values".into(), json!(self.rho_values));
        m.insert("psi_values".into(), json!(self.psi_values));
        m.insert("sel_rho".into(), json!(self.sel_rho));
        if let Some(c) = self.c_star {
            m.insert("c_star".into(), json!(c));
        }
        if let Some(c) = self.c_min {
            m.insert("c_min".into(), json!(c));
        }
        m.insert("jc_replicates".into(), json!(self.jc_replicates));
        m
    }

    fn grids(&self) -> Grids {
        Grids {
            tau: self.tau_grid.clone(),
            psi: self.psi_grid.clone(),
            rho: self.rho_grid.clone(),
            refine: self.refine,
        }
    }

    fn calibrator(&self) -> Result<JcCalibrator> {
        let e = &self.experiment;
        JcCalibrator::new(e.n, e.t, e.estimator, self.jc_replicates, e.seed)
    }
}

fn as_f64(key: &str, v: &Value) -> Result<f64> {
    v.as_f64()
        .ok_or_else(|| Error::config(key, format!("expected a number, got {v}")))
}

fn as_u64(key: &str, v: &Value) -> Result<u64> {
    v.as_u64()
        .ok_or_else(|| Error::config(key, format!("expected a nonnegative integer, got {v}")))
}

fn as_usize(key: &str, v: &Value) -> Result<usize> {
    usize::try_from(as_u64(key, v)?).map_err(|_| Error::config(key, "integer too large"))
}

fn as_vec(key: &str, v: &Value) -> Result<Vec<f64>> {
    let arr = v
        .as_array()
        .ok_or_else(|| Error::config(key, format!("expected an array of numbers, got {v}")))?;
    arr.iter().map(|x| as_f64(key, x)).collect()
}

fn as_estimator(key: &str, v: &Value) -> Result<EstimatorPair> {
    v.as_str().and_then(EstimatorPair::parse).ok_or_else(|| {
        Error::config(
            key,
            format!("expected unbiased, ml, wooldridge0 or wooldridge2, got {v}"),
        )
    })
}

/// Read a config file: a run manifest (JSON with a `config` object) or a flat
/// TOML table.
pub fn read_config_file(path: &Path) -> Result<Map<String, Value>> {
    let text = std::fs::read_to_string(path).map_err(|e| io_error(path, e))?;
    if let Ok(Value::Object(mut obj)) = serde_json::from_str::<Value>(&text) {
        return match obj.remove("config") {
            Some(Value::Object(cfg)) => Ok(cfg),
            _ => Err(Error::config(
                "config",
                "JSON config must be a manifest with a `config` object",
            )),
        };
    }
    let table: toml::Table = toml::from_str(&text)
        .map_err(|e| Error::config(path.display().to_string(), e.to_string()))?;
    match serde_json::to_value(table) {
        Ok(Value::Object(m)) => Ok(m),
        _ => Err(Error::config(
            path.display().to_string(),
            "config must be a flat table",
        )),
    }
}

fn io_error(path: &Path, e: std::io::Error) -> Error {
    Error::Io {
        path: path.display().to_string(),
        message: e.to_string(),
    }
}

/// Command-line overrides, applied after the config file.
#[derive(Debug, Clone, Default)]
pub struct Overrides {
    pub config: Option<PathBuf>,
    pub out: Option<PathBuf>,
    pub seed: Option<u64>,
    pub replicates: Option<usize>,
    pub threads: Option<usize>,
    pub estimator: Option<EstimatorPair>,
}

pub fn resolve(command: Command, o: &Overrides) -> Result<Settings> {
    let mut s = Settings::defaults(command);
    if let Some(path) = &o.config {
        s.apply_table(&read_config_file(path)?)?;
    }
    if let Some(seed) = o.seed {
        s.experiment.seed = seed;
    }
    if let Some(m) = o.replicates {
        s.experiment.replicates = m;
    }
    if let Some(e) = o.estimator {
        s.experiment.estimator = e;
    }
    s.experiment.validate()?;
    Ok(s)
}

/// Text and files produced by one command.
#[derive(Debug, Clone, PartialEq)]
pub struct Outcome {
    /// Written to standard output.
    pub stdout: String,
    /// (path, sha256) of every file written, manifest excluded.
    pub outputs: Vec<(PathBuf, String)>,
    pub manifest: Option<PathBuf>,
}

fn fmt_f(x: f64) -> String {
    format!("{x:.16e}")
}

fn csv_text(command: Command, header: &[&str], rows: &[Vec<String>]) -> String {
    let mut out = format!(
        "# pretest-lab {} format {FORMAT_VERSION} command {}\n",
        env!("CARGO_PKG_VERSION"),
        command.name()
    );
    out.push_str(&header.join(","));
    out.push('\n');
    for r in rows {
        out.push_str(&r.join(","));
        out.push('\n');
    }
    out
}

fn sha256_hex(bytes: &[u8]) -> String {
    Sha256::digest(bytes)
        .iter()
        .fold(String::with_capacity(64), |mut s, b| {
            let _ = write!(s, "{b:02x}");
            s
        })
}

fn write_file(path: &Path, contents: &str) -> Result<(PathBuf, String)> {
    std::fs::write(path, contents).map_err(|e| io_error(path, e))?;
    Ok((path.to_path_buf(), sha256_hex(contents.as_bytes())))
}

fn estimate_json(e: &McEstimate) -> Value {
    json!({ "value": e.value, "std_error": e.std_error, "replicates": e.replicates })
}

fn with_extension(path: &Path, ext: &str) -> PathBuf {
    let mut s = path.as_os_str().to_owned();
    s.push(ext);
    PathBuf::from(s)
}

/// Run a command with the given overrides, using `threads` worker threads
/// when requested.
pub fn run(command: Command, o: &Overrides) -> Result<Outcome> {
    let settings = resolve(command, o)?;
    match o.threads {
        Some(0) => Err(Error::config("threads", "must be at least 1")),
        Some(n) => rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build()
            .map_err(|e| Error::config("threads", e.to_string()))?
            .install(|| execute(command, &settings, o.out.as_deref())),
        None => execute(command, &settings, o.out.as_deref()),
    }
}

/// Run a command on resolved settings, write its outputs and manifest.
pub fn execute(command: Command, s: &Settings, out: Option<&Path>) -> Result<Outcome> {
    let started = Instant::now();
    let out_path = out
        .map(Path::to_path_buf)
        .or_else(|| command.default_out().map(PathBuf::from));
    let e = s.experiment;
    let m = e.replicates.to_string();
    let seed = e.seed.to_string();
    let mut outputs = Vec::new();
    let stdout = match command {
        Command::Figure1 => {
            let mut rows = Vec::new();
            let mut lines = String::new();
            for &alpha_tilde in &s.alpha_tildes {
                let base = ExperimentConfig { alpha_tilde, ..e };
                let sweep = grid_sweep(
                    &base,
                    SweepParameter::Lambda,
                    &s.lambda_grid,
                    &RunOptions::default(),
                )?;
                let best = sweep.iter().min_by(|a, b| {
                    a.result
                        .coverage
                        .cp_tilde
                        .value
                        .total_cmp(&b.result.coverage.cp_tilde.value)
                });
                if let Some(b) = best {
                    let cp = b.result.coverage.cp_tilde;
                    let _ = writeln!(
                        lines,
                        "alpha_tilde {alpha_tilde}: minimum coverage {:.4} (se {:.4}) at lambda {}",
                        cp.value, cp.std_error, b.value
                    );
                }
                for r in sweep {
                    let cp = r.result.coverage.cp_tilde;
                    rows.push(vec![
                        fmt_f(r.value),
                        fmt_f(alpha_tilde),
                        fmt_f(cp.value),
                        fmt_f(cp.std_error),
                        m.clone(),
                        seed.clone(),
                    ]);
                }
            }
            let text = csv_text(
                command,
                &[
                    "lambda",
                    "alpha_tilde",
                    "cp_tilde",
                    "std_error",
                    "M",
                    "seed",
                ],
                &rows,
            );
            outputs.push(write_file(
                out_path.as_deref().expect("default path"),
                &text,
            )?);
            lines
        }
        Command::Figure2 | Command::Figure3 => {
            let (parameter, values, column) = if command == Command::Figure2 {
                (SweepParameter::Rho, &s.rho_values, "rho")
            } else {
                (SweepParameter::Psi, &s.psi_values, "psi")
            };
            let mut rows = Vec::new();
            let mut lines = String::new();
            for &alpha_tilde in &s.alpha_tildes {
                let base = ExperimentConfig { alpha_tilde, ..e };
                let curve = min_coverage_curve(
                    &base,
                    parameter,
                    values,
                    &s.tau_grid,
                    &RunOptions::default(),
                )?;
                if let Some(low) = curve.iter().min_by(|a, b| a.c_min.total_cmp(&b.c_min)) {
                    let _ = writeln!(
                        lines,
                        "alpha_tilde {alpha_tilde}: lowest minimum coverage {:.4} at {column} {}",
                        low.c_min, low.value
                    );
                }
                for r in curve {
                    rows.push(vec![
                        fmt_f(r.value),
                        fmt_f(alpha_tilde),
                        fmt_f(r.c_min),
                        fmt_f(r.std_error),
                        fmt_f(r.argmin_tau),
                        m.clone(),
                        seed.clone(),
                    ]);
                }
            }
            let text = csv_text(
                command,
                &[
                    column,
                    "alpha_tilde",
                    "min_cp_tilde",
                    "std_error",
                    "argmin_tau",
                    "M",
                    "seed",
                ],
                &rows,
            );
            outputs.push(write_file(
                out_path.as_deref().expect("default path"),
                &text,
            )?);
            lines
        }
        Command::Table1 => {
            let calibrator = s.calibrator()?;
            let table = table1(
                &e,
                &s.alpha_tildes,
                &s.sel_rho,
                &s.grids(),
                &calibrator,
                &RunOptions::default(),
            )?;
            let mut rows = Vec::new();
            let mut json_rows = Vec::new();
            let mut lines = String::new();
            for r in &table {
                let (mn, mx, cal) = (r.extremes.min, r.extremes.max, &r.calibration);
                let _ = writeln!(
                    lines,
                    "alpha_tilde {} rho {}: min SEL {:.3}, max SEL {:.3} (c_min {:.4}, c* {:.4})",
                    r.alpha_tilde, r.rho, mn.sel, mx.sel, cal.c_min, cal.c_star
                );
                rows.push(vec![
                    fmt_f(r.alpha_tilde),
                    fmt_f(r.rho),
                    fmt_f(mn.sel),
                    fmt_f(mn.std_error),
                    fmt_f(mn.tau),
                    fmt_f(mn.psi),
                    fmt_f(mx.sel),
                    fmt_f(mx.std_error),
                    fmt_f(mx.tau),
                    fmt_f(mx.psi),
                    fmt_f(cal.c_min),
                    fmt_f(cal.c_min_std_error),
                    fmt_f(cal.c_star),
                    m.clone(),
                    seed.clone(),
                ]);
                json_rows.push(json!({
                    "alpha_tilde": r.alpha_tilde,
                    "rho": r.rho,
                    "min_sel": { "value": mn.sel, "std_error": mn.std_error, "tau": mn.tau, "psi": mn.psi },
                    "max_sel": { "value": mx.sel, "std_error": mx.std_error, "tau": mx.tau, "psi": mx.psi },
                    "c_min": { "value": cal.c_min, "std_error": cal.c_min_std_error,
                               "tau": cal.argmin.0, "psi": cal.argmin.1, "rho": cal.argmin.2 },
                    "c_star": cal.c_star,
                }));
            }
            let header = [
                "alpha_tilde",
                "rho",
                "min_sel",
                "min_sel_se",
                "min_tau",
                "min_psi",
                "max_sel",
                "max_sel_se",
                "max_tau",
                "max_psi",
                "c_min",
                "c_min_se",
                "c_star",
                "M",
                "seed",
            ];
            let path = out_path.expect("default path");
            outputs.push(write_file(&path, &csv_text(command, &header, &rows))?);
            let doc = json!({ "format": FORMAT_VERSION, "rows": json_rows, "replicates": e.replicates, "seed": e.seed });
            outputs.push(write_file(&path.with_extension("json"), &pretty(&doc))?);
            lines
        }
        Command::Efficiency => {
            let r = efficiency_report(&e)?;
            let doc = json!({
                "var_hat": r.var_hat,
                "var_tilde": r.var_tilde,
                "t_hat": r.t_hat,
                "t_tilde": r.t_tilde,
                "variance_ratio": r.variance_ratio,
                "efficiency": r.efficiency,
                "cp_hat": estimate_json(&r.cp_hat),
                "cp_tilde": estimate_json(&r.cp_tilde),
                "lk_variance_ratio": r.lk_variance_ratio,
                "lj_variance_ratio": r.lj_variance_ratio,
            });
            single_json(&doc, out_path.as_deref(), &mut outputs)?
        }
        Command::Coverage => {
            let mut doc = Map::new();
            for (name, mode) in [
                ("known", VarianceMode::Known),
                ("estimated", VarianceMode::Estimated),
            ] {
                let c = run_coverage(&e, mode)?;
                doc.insert(
                    name.into(),
                    json!({
                        "cp_hat": estimate_json(&c.cp_hat),
                        "cpk_hat": estimate_json(&c.cpk_hat),
                        "cpk_tilde": estimate_json(&c.cpk_tilde),
                        "cp_tilde": estimate_json(&c.cp_tilde),
                    }),
                );
            }
            single_json(&Value::Object(doc), out_path.as_deref(), &mut outputs)?
        }
        Command::Sel => {
            let c_star = match (s.c_star, s.c_min) {
                (Some(c), _) => c,
                (None, Some(c_min)) => s.calibrator()?.solve_c_star(c_min)?,
                (None, None) => return Err(Error::config("c_star", "sel needs c_star or c_min")),
            };
            let r = run_sel(&e, c_star)?;
            let doc = json!({
                "c_star": c_star,
                "sel": { "value": r.sel, "std_error": r.sel_std_error },
                "lk_hat": estimate_json(&r.lk_hat),
                "lk_tilde": estimate_json(&r.lk_tilde),
                "lj_hat": estimate_json(&r.lj_hat),
                "lj_tilde": estimate_json(&r.lj_tilde),
            });
            single_json(&doc, out_path.as_deref(), &mut outputs)?
        }
    };
    let manifest = match outputs.first() {
        Some((first, _)) => {
            let path = with_extension(first, ".manifest.json");
            let doc = json!({
                "tool": "pretest-lab",
                "version": env!("CARGO_PKG_VERSION"),
                "format": FORMAT_VERSION,
                "command": command.name(),
                "seed": e.seed,
                "threads": rayon::current_num_threads(),
                "config": Value::Object(s.to_table()),
                "outputs": outputs.iter().map(|(p, h)| json!({ "path": p.display().to_string(), "sha256": h })).collect::<Vec<_>>(),
                "wall_time_seconds": started.elapsed().as_secs_f64(),
            });
            std::fs::write(&path, pretty(&doc)).map_err(|err| io_error(&path, err))?;
            Some(path)
        }
        None => None,
    };
    Ok(Outcome {
        stdout,
        outputs,
        manifest,
    })
}

fn pretty(v: &Value) -> String {
    let mut s = serde_json::to_string_pretty(v).expect("JSON values serialize");
    s.push('\n');
    s
}

fn single_json(
    doc: &Value,
    out: Option<&Path>,
    outputs: &mut Vec<(PathBuf, String)>,
) -> Result<String> {
    let text = pretty(doc);
    if let Some(p) = out {
        outputs.push(write_file(p, &text)?);
    }
    Ok(text)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn table_round_trip() {
        let mut s = Settings::defaults(Command::Figure1);
        s.experiment = s.experiment.with_psi(0.2);
        s.c_min = Some(0.4);
        let mut back = Settings::defaults(Command::Coverage);
        back.apply_table(&s.to_table()).unwrap();
        assert_eq!(back, s);
    }

    #[test]
    fn unknown_key_is_named() {
        let mut s = Settings::defaults(Command::Coverage);
        let err = s.apply("rhoo", &json!(0.1)).unwrap_err();
        assert!(matches!(err, Error::Config { ref key, .. } if key == "rhoo"));
        assert_eq!(err.exit_code(), 2);
        let err = s.apply("n", &json!(-1)).unwrap_err();
        assert!(matches!(err, Error::Config { ref key, .. } if key == "n"));
    }

    #[test]
    fn psi_and_lambda_keys() {
        let mut s = Settings::defaults(Command::Coverage);
        let mut t = Map::new();
        t.insert("psi".into(), json!(0.5));
        t.insert("sigma_eps".into(), json!(2.0));
        t.insert("lambda".into(), json!(5.0));
        s.apply_table(&t).unwrap();
        assert_eq!(s.experiment.sigma_mu, 1.0);
        assert_eq!(s.experiment.tau, 0.5);
        t.insert("tau".into(), json!(0.1));
        assert!(s.apply_table(&t).is_err());
    }

    #[test]
    fn default_lambda_grid_is_symmetric() {
        let g = Settings::defaults(Command::Figure1).lambda_grid;
        assert_eq!(g.len(), 39);
        assert_eq!(g[0], -9.5);
        assert_eq!(g[38], 9.5);
        assert!(g.iter().zip(g.iter().rev()).all(|(a, b)| a == &-b));
    }

    #[test]
    fn csv_numbers_keep_17_digits() {
        let x = 0.1f64 + 0.2;
        assert_eq!(fmt_f(x).parse::<f64>().unwrap(), x);
        assert_eq!(fmt_f(x), "3.0000000000000004e-1");
    }
}
