//! Run configuration, report rendering (JSON, CSV, pretty), the on-disk
//! report cache and parameter sweeps.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use serde_json::Value;
use sha2::{Digest, Sha256};

use crate::conditions::CheckOptions;
use crate::error::{Error, Result};
use crate::exec::Exec;
use crate::quadrature::QuadPlan;
use crate::sequence::{DeriveOp, SequenceSpec};
use crate::verdicts::{classify_with, AnalysisOptions, MomentMapReport, SCHEMA_VERSION};

/// Environment variable naming the report cache directory.
pub const CACHE_ENV: &str = "MOMENTGATE_CACHE_DIR";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Format {
    #[default]
    Json,
    Csv,
    Pretty,
}

impl std::str::FromStr for Format {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "json" => Ok(Format::Json),
            "csv" => Ok(Format::Csv),
            "pretty" => Ok(Format::Pretty),
            other => Err(Error::validation("format", format!("unknown format {other:?}"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunConfig {
    pub horizon: usize,
    pub tol: f64,
    pub quad_tol: f64,
    pub format: Format,
    pub seed: u64,
    /// Worker threads; `None` uses the default pool.
    pub jobs: Option<usize>,
    pub beta_max: f64,
    pub stabilization: f64,
    pub growth: f64,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            horizon: 10_000,
            tol: 0.05,
            quad_tol: 1e-8,
            format: Format::Json,
            seed: 0,
            jobs: None,
            beta_max: 64.0,
            stabilization: 0.01,
            growth: 2.0,
        }
    }
}

impl RunConfig {
    pub fn validate(&self) -> Result<()> {
        if self.horizon < 64 {
            return Err(Error::HorizonTooSmall {
                horizon: self.horizon,
                minimum: 64,
            });
        }
        for (field, v) in [
            ("tol", self.tol),
            ("quad_tol", self.quad_tol),
            ("stabilization", self.stabilization),
        ] {
            if !(v.is_finite() && v > 0.0) {
                return Err(Error::validation(field, format!("must be > 0, got {v}")));
            }
        }
        if !(self.growth.is_finite() && self.growth > 1.0) {
            return Err(Error::validation("growth", format!("must be > 1, got {}", self.growth)));
        }
        if !(self.beta_max.is_finite() && self.beta_max >= 1.0) {
            return Err(Error::validation("beta_max", format!("must be >= 1, got {}", self.beta_max)));
        }
        if self.jobs == Some(0) {
            return Err(Error::validation("jobs", "must be >= 1"));
        }
        Ok(())
    }

    pub fn analysis(&self) -> AnalysisOptions {
        AnalysisOptions {
            horizon: self.horizon,
            checks: CheckOptions {
                stabilization: self.stabilization,
                growth: self.growth,
            },
            beta_max: self.beta_max,
            tol: self.tol,
            aux: None,
            exec: Exec::Parallel,
        }
    }

    pub fn quad_plan(&self) -> QuadPlan {
        QuadPlan::with_rel_tol(self.quad_tol)
    }

    /// The fields that determine an analysis result.
    fn cache_fields(&self) -> Value {
        serde_json::json!({
            "horizon": self.horizon,
            "tol": self.tol,
            "beta_max": self.beta_max,
            "stabilization": self.stabilization,
            "growth": self.growth,
        })
    }
}

/// Process exit status for an analysis report: 2 when none of the four
/// moment-map statements could be decided, 0 otherwise.
pub fn exit_code(report: &Value) -> i32 {
    let undecided = ["injective", "surjective", "origin_injective", "origin_surjective"]
        .iter()
        .all(|k| matches!(report[k]["status"].as_str(), Some("inconclusive" | "conditional")));
    if undecided {
        2
    } else {
        0
    }
}

/// Report as a JSON value (object keys sorted).
pub fn to_value(report: &MomentMapReport) -> Value {
    serde_json::to_value(report).expect("reports always serialize")
}

pub fn cache_key(spec: &SequenceSpec, config: &RunConfig) -> String {
    let mut h = Sha256::new();
    h.update(env!("CARGO_PKG_VERSION").as_bytes());
    h.update(b"\0");
    h.update(spec.to_json().as_bytes());
    h.update(b"\0");
    h.update(config.cache_fields().to_string().as_bytes());
    hex::encode(h.finalize())
}

fn cache_path(dir: &Path, key: &str) -> PathBuf {
    dir.join(format!("{key}.json"))
}

/// Analyze `spec`, reusing a cached report from `cache_dir` when present.
pub fn analyze_cached(spec: &SequenceSpec, config: &RunConfig, cache_dir: Option<&Path>) -> Result<Value> {
    config.validate()?;
    let key = cache_key(spec, config);
    if let Some(dir) = cache_dir {
        if let Ok(text) = std::fs::read_to_string(cache_path(dir, &key)) {
            if let Ok(v) = serde_json::from_str::<Value>(&text) {
                return Ok(v);
            }
        }
    }
    let report = classify_with(spec, &config.analysis())?;
    let value = to_value(&report);
    if let Some(dir) = cache_dir {
        std::fs::create_dir_all(dir)?;
        let tmp = dir.join(format!("{key}.tmp{}", std::process::id()));
        std::fs::write(&tmp, serde_json::to_string(&value)?)?;
        std::fs::rename(&tmp, cache_path(dir, &key))?;
    }
    Ok(value)
}

/// Cache directory from [`CACHE_ENV`], if set and nonempty.
pub fn cache_dir_from_env() -> Option<PathBuf> {
    std::env::var_os(CACHE_ENV)
        .filter(|v| !v.is_empty())
        .map(PathBuf::from)
}

pub fn render_json(report: &Value) -> String {
    let mut s = serde_json::to_string_pretty(report).expect("values always serialize");
    s.push('\n');
    s
}

/// One CSV row per sequence. The column set is fixed.
#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct SummaryRow {
    pub schema: u32,
    pub label: String,
    pub param: Option<f64>,
    pub horizon: Option<usize>,
    pub lc: String,
    pub dc: String,
    pub mg: String,
    pub nq: String,
    pub injective: String,
    pub surjective: String,
    pub surjective_direction: String,
    pub origin_injective: String,
    pub origin_surjective: String,
    pub gamma_lower: String,
    pub gamma_upper: String,
    pub gamma_converged: String,
    pub omega_estimate: String,
    pub omega_converged: String,
    pub error: String,
}

fn bound_text(v: &Value) -> String {
    match v {
        Value::Null => String::new(),
        Value::String(s) => s.clone(),
        other => other.to_string(),
    }
}

impl SummaryRow {
    pub fn from_report(report: &Value, param: Option<f64>) -> Self {
        let status = |v: &Value| v["status"].as_str().unwrap_or_default().to_string();
        let hyp = |k: &str| status(&report["hypotheses"][k]);
        let gamma = &report["indices"]["gamma"];
        let omega = &report["indices"]["omega"];
        SummaryRow {
            schema: SCHEMA_VERSION,
            label: report["label"].as_str().unwrap_or_default().to_string(),
            param,
            horizon: report["horizon"].as_u64().map(|h| h as usize),
            lc: hyp("lc"),
            dc: hyp("dc"),
            mg: hyp("mg"),
            nq: hyp("nq"),
            injective: status(&report["injective"]),
            surjective: status(&report["surjective"]),
            surjective_direction: report["surjective"]["direction"]
                .as_str()
                .unwrap_or_default()
                .to_string(),
            origin_injective: status(&report["origin_injective"]),
            origin_surjective: status(&report["origin_surjective"]),
            gamma_lower: bound_text(&gamma["lower"]),
            gamma_upper: bound_text(&gamma["upper"]),
            gamma_converged: bound_text(&gamma["converged"]),
            omega_estimate: bound_text(&omega["estimate"]),
            omega_converged: bound_text(&omega["converged"]),
            error: String::new(),
        }
    }

    pub fn from_error(label: String, param: Option<f64>, err: &Error) -> Self {
        SummaryRow {
            schema: SCHEMA_VERSION,
            label,
            param,
            error: err.to_string(),
            ..SummaryRow::default()
        }
    }
}

pub fn render_csv(rows: &[SummaryRow]) -> Result<String> {
    let mut w = csv::Writer::from_writer(Vec::new());
    for r in rows {
        w.serialize(r)?;
    }
    let bytes = w.into_inner().map_err(|e| Error::Io(e.into_error()))?;
    Ok(String::from_utf8(bytes).expect("csv output is utf-8"))
}

fn fmt_num(v: &Value) -> String {
    match v.as_f64() {
        Some(x) => format!("{x:.4}"),
        None => bound_text(v),
    }
}

/// Human-readable report with citation tags next to each verdict.
pub fn render_pretty(report: &Value) -> String {
    let mut out = String::new();
    let _ = writeln!(
        out,
        "sequence {}   horizon {}   aux {}",
        report["label"].as_str().unwrap_or_default(),
        report["horizon"],
        report["aux"]
    );
    let hyps: Vec<String> = report["hypotheses"]
        .as_object()
        .map(|m| {
            m.iter()
                .map(|(k, v)| format!("{k}={}", v["status"].as_str().unwrap_or_default()))
                .collect()
        })
        .unwrap_or_default();
    let _ = writeln!(out, "hypotheses: {}", hyps.join(", "));
    for (key, name) in [
        ("injective", "injective"),
        ("surjective", "surjective"),
        ("origin_injective", "origin injective"),
        ("origin_surjective", "origin surjective"),
    ] {
        let v = &report[key];
        let direction = v["direction"]
            .as_str()
            .map(|d| format!(" ({d})"))
            .unwrap_or_default();
        let cites: Vec<&str> = v["citations"]
            .as_array()
            .map(|a| a.iter().filter_map(Value::as_str).collect())
            .unwrap_or_default();
        let _ = writeln!(
            out,
            "{name:<18} {:<17}{direction} [{}]",
            v["status"].as_str().unwrap_or_default(),
            cites.join(", ")
        );
        if let Some(notes) = v["notes"].as_array() {
            for n in notes.iter().filter_map(Value::as_str) {
                let _ = writeln!(out, "{:<18} note: {n}", "");
            }
        }
    }
    for idx in ["gamma", "omega"] {
        let e = &report["indices"][idx];
        let _ = writeln!(
            out,
            "{idx:<6} [{}, {}] estimate {} converged {}",
            fmt_num(&e["lower"]),
            fmt_num(&e["upper"]),
            fmt_num(&e["estimate"]),
            e["converged"]
        );
    }
    out
}

/// Parameterized sequence families for sweeps.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Family {
    Gevrey,
    QGevrey,
    /// power(example38, s).
    Example38Power,
}

impl Family {
    pub fn spec(self, param: f64) -> SequenceSpec {
        match self {
            Family::Gevrey => SequenceSpec::gevrey(param),
            Family::QGevrey => SequenceSpec::q_gevrey(param),
            Family::Example38Power => SequenceSpec::derived(DeriveOp::Power { s: param }, SequenceSpec::Blocks),
        }
    }
}

impl std::str::FromStr for Family {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "gevrey" => Ok(Family::Gevrey),
            "q_gevrey" => Ok(Family::QGevrey),
            "example38_power" => Ok(Family::Example38Power),
            other => Err(Error::validation("family", format!("unknown family {other:?}"))),
        }
    }
}

/// Parse a grid "a:b:step" (inclusive) or a comma-separated list.
pub fn parse_grid(text: &str) -> Result<Vec<f64>> {
    let text = text.trim();
    let num = |s: &str| {
        s.trim()
            .parse::<f64>()
            .map_err(|e| Error::validation("grid", format!("{s:?}: {e}")))
    };
    let values: Vec<f64> = if text.contains(':') {
        let parts: Vec<&str> = text.split(':').collect();
        if parts.len() != 3 {
            return Err(Error::validation("grid", "expected start:stop:step"));
        }
        let (a, b, step) = (num(parts[0])?, num(parts[1])?, num(parts[2])?);
        if !(step > 0.0) || !(b >= a) {
            return Err(Error::validation("grid", "need step > 0 and stop >= start"));
        }
        let n = ((b - a) / step + 1e-9).floor() as usize;
        (0..=n)
            .map(|k| ((a + k as f64 * step) * 1e12).round() / 1e12)
            .collect()
    } else if text.is_empty() {
        Vec::new()
    } else {
        text.split(',').map(num).collect::<Result<_>>()?
    };
    if values.is_empty() {
        return Err(Error::validation("grid", "grid is empty"));
    }
    Ok(values)
}

/// Classify `family(param)` for each grid value; failures land in the
/// `error` column.
pub fn sweep(family: Family, grid: &[f64], config: &RunConfig, cache_dir: Option<&Path>) -> Result<Vec<SummaryRow>> {
    config.validate()?;
    if grid.is_empty() {
        return Err(Error::validation("grid", "grid is empty"));
    }
    Ok(Exec::Parallel.map(grid, |&param| {
        let spec = family.spec(param);
        match analyze_cached(&spec, config, cache_dir) {
            Ok(v) => SummaryRow::from_report(&v, Some(param)),
            Err(e) => SummaryRow::from_error(spec.label(), Some(param), &e),
        }
    }))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn grid_parsing() {
        let g = parse_grid("0.2:3.0:0.2").unwrap();
        assert_eq!(g.len(), 15);
        assert_eq!(g[4], 1.0);
        assert_eq!(g[14], 3.0);
        assert_eq!(parse_grid("1.5, 2,4").unwrap(), vec![1.5, 2.0, 4.0]);
        assert!(parse_grid("").is_err());
        assert!(parse_grid("1:0:0.1").is_err());
    }

    #[test]
    fn config_validation() {
        assert!(RunConfig::default().validate().is_ok());
        let bad = RunConfig {
            horizon: 10,
            ..RunConfig::default()
        };
        assert!(bad.validate().is_err());
        let bad = RunConfig {
            tol: 0.0,
            ..RunConfig::default()
        };
        assert!(bad.validate().unwrap_err().to_string().contains("`tol`"));
    }

    #[test]
    fn csv_columns_stable() {
        let row = SummaryRow::from_error("x".into(), Some(1.0), &Error::validation("s", "bad"));
        let text = render_csv(&[row]).unwrap();
        let header = text.lines().next().unwrap();
        assert!(header.starts_with("schema,label,param,horizon,lc,dc,mg,nq,injective"));
        assert!(header.ends_with(",error"));
    }
}
