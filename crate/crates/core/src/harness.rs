//! Parameter sweeps, verdicts and convergence studies.

use crate::geometry::{make_domain, DomainSpec, GeometryError, SpaceForm};
use crate::radial::{radial_eigs, RadialError, RadialProblem};
use crate::shape::{centered_rate_at_zero, fd_rate, hadamard_rate, relative_gap, ShapeError, DEFAULT_STEP};
use crate::spectrum::{lambda_2, Branch, Discretization, Estimate, SpectrumError, SpectrumResult};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::fmt;
use std::io;
use std::path::{Path, PathBuf};
use std::time::Instant;
use thiserror::Error;

pub const ORACLE_TOL: f64 = 5e-3;
pub const ORACLE_EXTRAPOLATED_TOL: f64 = 1e-3;
pub const RATE_GAP_TOL: f64 = 0.02;
pub const RATE_SIGMA: f64 = 3.0;
pub const DEFAULT_POINTS: usize = 9;

#[derive(Debug, Error)]
pub enum HarnessError {
    #[error("invalid sweep configuration: {0}")]
    InvalidConfig(String),
    #[error("verification needs t = 0 and at least 3 positive offsets ({0})")]
    InsufficientSweep(String),
    #[error("every row of the sweep failed; first error: {0}")]
    AllRowsFailed(String),
    #[error(transparent)]
    Geometry(#[from] GeometryError),
    #[error(transparent)]
    Spectrum(#[from] SpectrumError),
    #[error(transparent)]
    Shape(#[from] ShapeError),
    #[error(transparent)]
    Radial(#[from] RadialError),
    #[error("{path}: {source}")]
    Io { path: PathBuf, source: io::Error },
    #[error(transparent)]
    Json(#[from] serde_json::Error),
    #[error(transparent)]
    Csv(#[from] csv::Error),
}

fn io_err(path: &Path) -> impl FnOnce(io::Error) -> HarnessError + '_ {
    move |source| HarnessError::Io {
        path: path.to_path_buf(),
        source,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Derivative {
    Hadamard,
    Fd,
    Both,
}

impl Derivative {
    fn hadamard(self) -> bool {
        self != Derivative::Fd
    }
    fn fd(self) -> bool {
        self != Derivative::Hadamard
    }
}

fn default_derivative() -> Derivative {
    Derivative::Both
}

fn default_count() -> usize {
    4
}

fn default_refinements() -> usize {
    1
}

fn default_tol() -> f64 {
    crate::eigen::DEFAULT_TOL
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepConfig {
    pub form: SpaceForm,
    pub dim: usize,
    pub r0: f64,
    pub r1: f64,
    /// Defaults to nine equispaced offsets in `[0, 0.9 (r1 - r0)]`.
    #[serde(default)]
    pub t_values: Option<Vec<f64>>,
    /// Defaults to the form's standard edge length.
    #[serde(default)]
    pub h: Option<f64>,
    #[serde(default = "default_refinements")]
    pub refinements: usize,
    #[serde(default = "default_tol")]
    pub eig_tol: f64,
    #[serde(default = "default_derivative")]
    pub derivative: Derivative,
    #[serde(default = "default_count")]
    pub count: usize,
    #[serde(default)]
    pub fd_step: Option<f64>,
    #[serde(default)]
    pub csv: Option<PathBuf>,
    #[serde(default)]
    pub json: Option<PathBuf>,
}

pub fn default_t_values(r0: f64, r1: f64) -> Vec<f64> {
    let top = 0.9 * (r1 - r0);
    (0..DEFAULT_POINTS)
        .map(|i| top * i as f64 / (DEFAULT_POINTS - 1) as f64)
        .collect()
}

impl SweepConfig {
    pub fn new(form: SpaceForm, dim: usize, r0: f64, r1: f64) -> Self {
        SweepConfig {
            form,
            dim,
            r0,
            r1,
            t_values: None,
            h: None,
            refinements: default_refinements(),
            eig_tol: default_tol(),
            derivative: default_derivative(),
            count: default_count(),
            fd_step: None,
            csv: None,
            json: None,
        }
    }

    pub fn load(path: &Path) -> Result<Self, HarnessError> {
        let text = std::fs::read_to_string(path).map_err(io_err(path))?;
        let cfg: SweepConfig = serde_json::from_str(&text)?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn t_values(&self) -> Vec<f64> {
        self.t_values
            .clone()
            .unwrap_or_else(|| default_t_values(self.r0, self.r1))
    }

    pub fn discretization(&self) -> Discretization {
        let mut d = Discretization::default_for(self.form);
        if let Some(h) = self.h {
            d.h = h;
        }
        d.refinements = self.refinements;
        d.eig_tol = self.eig_tol;
        d.count = self.count;
        d
    }

    pub fn fd_step(&self) -> f64 {
        self.fd_step.unwrap_or(DEFAULT_STEP)
    }

    pub fn validate(&self) -> Result<(), HarnessError> {
        make_domain(self.form, self.dim, self.r0, self.r1, 0.0)?;
        self.discretization().validate()?;
        let ts = self.t_values();
        if ts.is_empty() {
            return Err(HarnessError::InvalidConfig("t_values is empty".into()));
        }
        if ts.windows(2).any(|w| !(w[0] < w[1])) {
            return Err(HarnessError::InvalidConfig("t_values must be strictly increasing".into()));
        }
        let limit = self.r1 - self.r0;
        if let Some(t) = ts.iter().find(|t| !(**t >= 0.0 && **t < limit)) {
            return Err(HarnessError::InvalidConfig(format!("t = {t} outside [0, {limit})")));
        }
        if !(self.fd_step() > 0.0) {
            return Err(HarnessError::InvalidConfig("fd_step must be positive".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct SweepRow {
    pub t: f64,
    pub lambda1: Option<Estimate>,
    pub lambda1_minus: Option<Estimate>,
    pub lambda2_plus: Option<Estimate>,
    pub lambda2: Option<Estimate>,
    pub branch: Option<Branch>,
    pub tie: bool,
    pub gap_unresolved: bool,
    pub rate_hadamard: Option<f64>,
    pub rate_hadamard_raw: Option<f64>,
    pub rate_hadamard_error: Option<f64>,
    pub rate_fd: Option<f64>,
    /// The finite-difference rate straddles `t = 0` and is reported only
    /// as evidence of a critical point.
    pub rate_informational: bool,
    pub relative_gap: Option<f64>,
    pub ndof_minus: Option<usize>,
    pub ndof_plus: Option<usize>,
    pub vertices: Option<usize>,
    pub wall_ms: f64,
    pub error: Option<String>,
}

#[derive(Debug, Clone, Serialize)]
pub struct OracleCheck {
    pub mu: f64,
    pub mu_error: f64,
    pub lambda2: f64,
    pub relative_error: f64,
    pub extrapolated_relative_error: Option<f64>,
}

#[derive(Debug, Clone, Serialize)]
pub struct SweepReport {
    pub version: String,
    pub config: SweepConfig,
    pub discretization: Discretization,
    pub rows: Vec<SweepRow>,
    pub oracle: Option<OracleCheck>,
    pub wall_ms: f64,
}

fn row_for(cfg: &SweepConfig, disc: &Discretization, t: f64) -> SweepRow {
    let start = Instant::now();
    let mut row = SweepRow {
        t,
        lambda1: None,
        lambda1_minus: None,
        lambda2_plus: None,
        lambda2: None,
        branch: None,
        tie: false,
        gap_unresolved: false,
        rate_hadamard: None,
        rate_hadamard_raw: None,
        rate_hadamard_error: None,
        rate_fd: None,
        rate_informational: t == 0.0,
        relative_gap: None,
        ndof_minus: None,
        ndof_plus: None,
        vertices: None,
        wall_ms: 0.0,
        error: None,
    };
    if let Err(e) = fill_row(cfg, disc, t, &mut row) {
        row.error = Some(e.to_string());
    }
    row.wall_ms = start.elapsed().as_secs_f64() * 1e3;
    row
}

fn fill_row(cfg: &SweepConfig, disc: &Discretization, t: f64, row: &mut SweepRow) -> Result<(), HarnessError> {
    let spec = make_domain(cfg.form, cfg.dim, cfg.r0, cfg.r1, t)?;
    let step = cfg.fd_step();
    let (spectrum, (had, fd)) = rayon::join(
        || lambda_2(&spec, disc),
        || {
            rayon::join(
                || (cfg.derivative.hadamard() && t > 0.0).then(|| hadamard_rate(&spec, disc)),
                || {
                    cfg.derivative.fd().then(|| {
                        if t > 0.0 {
                            fd_rate(&spec, disc, step.min(0.5 * t))
                        } else {
                            centered_rate_at_zero(&spec, disc, step)
                        }
                    })
                },
            )
        },
    );
    let s: SpectrumResult = spectrum?;
    row.lambda1 = Some(s.lambda1);
    row.lambda1_minus = Some(s.lambda1_minus);
    row.lambda2_plus = Some(s.lambda2_plus);
    row.lambda2 = Some(s.lambda2);
    row.branch = Some(s.branch);
    row.tie = s.tie;
    row.gap_unresolved = s.gap_unresolved;
    row.ndof_minus = Some(s.ndof_minus);
    row.ndof_plus = Some(s.ndof_plus);
    row.vertices = Some(s.vertices);
    if let Some(h) = had.transpose()? {
        row.rate_hadamard = Some(h.value);
        row.rate_hadamard_raw = Some(h.raw);
        row.rate_hadamard_error = h.error;
    }
    row.rate_fd = fd.transpose()?;
    if let (Some(h), Some(f), false) = (row.rate_hadamard, row.rate_fd, row.rate_informational) {
        row.relative_gap = Some(relative_gap(h, f));
    }
    Ok(())
}

pub fn oracle_check(cfg: &SweepConfig, row: &SweepRow) -> Result<Option<OracleCheck>, HarnessError> {
    let Some(l2) = row.lambda2 else {
        return Ok(None);
    };
    let p = RadialProblem::new(cfg.form, cfg.dim, 1, cfg.r0, cfg.r1)?;
    let mu = radial_eigs(&p, 1)?[0];
    Ok(Some(OracleCheck {
        mu: mu.value,
        mu_error: mu.error,
        lambda2: l2.value,
        relative_error: (l2.value - mu.value).abs() / mu.value,
        extrapolated_relative_error: l2.extrapolated.map(|x| (x - mu.value).abs() / mu.value),
    }))
}

pub fn run_sweep(cfg: &SweepConfig) -> Result<SweepReport, HarnessError> {
    cfg.validate()?;
    let start = Instant::now();
    let disc = cfg.discretization();
    let ts = cfg.t_values();
    let rows: Vec<SweepRow> = ts.par_iter().map(|&t| row_for(cfg, &disc, t)).collect();
    if rows.iter().all(|r| r.error.is_some()) {
        return Err(HarnessError::AllRowsFailed(rows[0].error.clone().unwrap()));
    }
    let oracle = match rows.iter().find(|r| r.t == 0.0) {
        Some(r) => oracle_check(cfg, r)?,
        None => None,
    };
    Ok(SweepReport {
        version: env!("CARGO_PKG_VERSION").to_string(),
        config: cfg.clone(),
        discretization: disc,
        rows,
        oracle,
        wall_ms: start.elapsed().as_secs_f64() * 1e3,
    })
}

pub const CSV_HEADER: [&str; 12] = [
    "t",
    "lambda1",
    "lambda1_minus",
    "lambda2_plus",
    "lambda2",
    "branch",
    "rate_hadamard",
    "rate_fd",
    "err_lambda2",
    "ndof_minus",
    "ndof_plus",
    "wall_ms",
];

/// Seventeen significant digits.
pub fn fmt_csv(x: f64) -> String {
    format!("{x:.16e}")
}

/// Twelve significant digits, fixed notation where that stays readable.
pub fn fmt_human(x: f64) -> String {
    if x == 0.0 || !x.is_finite() {
        return format!("{x}");
    }
    let mag = x.abs().log10().floor() as i32;
    if (-4..12).contains(&mag) {
        format!("{:.*}", (11 - mag).max(0) as usize, x)
    } else {
        format!("{x:.11e}")
    }
}

/// CSV report; `wall_ms` is left empty unless `timings` is set so that
/// repeated runs are byte-identical.
pub fn write_csv<W: io::Write>(report: &SweepReport, out: W, timings: bool) -> Result<(), HarnessError> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(CSV_HEADER)?;
    let opt = |x: Option<f64>| x.map(fmt_csv).unwrap_or_default();
    for r in &report.rows {
        w.write_record([
            fmt_csv(r.t),
            opt(r.lambda1.map(|e| e.value)),
            opt(r.lambda1_minus.map(|e| e.value)),
            opt(r.lambda2_plus.map(|e| e.value)),
            opt(r.lambda2.map(|e| e.value)),
            r.branch.map(|b| b.to_string()).unwrap_or_default(),
            opt(r.rate_hadamard),
            opt(r.rate_fd),
            opt(r.lambda2.and_then(|e| e.error)),
            r.ndof_minus.map(|n| n.to_string()).unwrap_or_default(),
            r.ndof_plus.map(|n| n.to_string()).unwrap_or_default(),
            if timings { format!("{:.3}", r.wall_ms) } else { String::new() },
        ])?;
    }
    w.flush().map_err(|e| HarnessError::Csv(e.into()))?;
    Ok(())
}

pub fn write_csv_file(report: &SweepReport, path: &Path, timings: bool) -> Result<(), HarnessError> {
    let f = std::fs::File::create(path).map_err(io_err(path))?;
    write_csv(report, io::BufWriter::new(f), timings)
}

pub fn write_json_file<T: Serialize>(value: &T, path: &Path) -> Result<(), HarnessError> {
    let text = serde_json::to_string_pretty(value)?;
    std::fs::write(path, text + "\n").map_err(io_err(path))
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Check {
    pub name: String,
    pub pass: bool,
    /// Worst observed quantity for this check.
    pub margin: f64,
    /// What the margin is compared against.
    pub tolerance: f64,
    pub detail: String,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct VerificationVerdict {
    pub checks: Vec<Check>,
    pub overall: bool,
}

impl VerificationVerdict {
    pub fn check(&self, name: &str) -> Option<&Check> {
        self.checks.iter().find(|c| c.name == name)
    }
}

impl fmt::Display for VerificationVerdict {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for c in &self.checks {
            writeln!(
                f,
                "{:<6} {:<30} margin {:>20}  tolerance {:>20}  {}",
                if c.pass { "PASS" } else { "FAIL" },
                c.name,
                fmt_human(c.margin),
                fmt_human(c.tolerance),
                c.detail
            )?;
        }
        write!(f, "overall: {}", if self.overall { "PASS" } else { "FAIL" })
    }
}

/// Strictness check over pairs: every `diff` must exceed its `err`. Reports
/// the pair with the least slack.
fn strict(name: &str, pairs: &[(f64, f64, String)]) -> Check {
    let worst = pairs
        .iter()
        .min_by(|a, b| (a.0 - a.1).total_cmp(&(b.0 - b.1)))
        .cloned()
        .unwrap_or((f64::NAN, f64::NAN, "no data".into()));
    Check {
        name: name.into(),
        pass: !pairs.is_empty() && pairs.iter().all(|(d, e, _)| d > e),
        margin: worst.0,
        tolerance: worst.1,
        detail: worst.2,
    }
}

fn bounded(name: &str, value: f64, tol: f64, detail: String) -> Check {
    Check {
        name: name.into(),
        pass: value <= tol,
        margin: value,
        tolerance: tol,
        detail,
    }
}

pub fn check_sweep_shape(ts: &[f64]) -> Result<(), HarnessError> {
    let has_zero = ts.contains(&0.0);
    let positive = ts.iter().filter(|t| **t > 0.0).count();
    if !has_zero || positive < 3 {
        return Err(HarnessError::InsufficientSweep(format!(
            "t = 0 {}, {positive} positive offsets",
            if has_zero { "present" } else { "missing" }
        )));
    }
    Ok(())
}

/// Evaluates a finished sweep. Differences count only when they exceed the
/// sum of the Richardson error estimates involved.
pub fn verify_report(report: &SweepReport) -> Result<VerificationVerdict, HarnessError> {
    let ts: Vec<f64> = report.rows.iter().map(|r| r.t).collect();
    check_sweep_shape(&ts)?;
    let mut checks = Vec::new();
    let failed: Vec<String> = report
        .rows
        .iter()
        .filter_map(|r| r.error.as_ref().map(|e| format!("t={}: {e}", r.t)))
        .collect();
    checks.push(Check {
        name: "rows_solved".into(),
        pass: failed.is_empty(),
        margin: failed.len() as f64,
        tolerance: 0.0,
        detail: failed.first().cloned().unwrap_or_default(),
    });
    let rows: Vec<&SweepRow> = report.rows.iter().filter(|r| r.error.is_none()).collect();
    let zero = rows.iter().find(|r| r.t == 0.0);
    let err = |e: &Option<Estimate>| e.map_or(0.0, |e| e.error_or_zero());
    let val = |e: &Option<Estimate>| e.map_or(f64::NAN, |e| e.value);

    let pairs: Vec<(f64, f64, String)> = match zero {
        Some(z) => rows
            .iter()
            .filter(|r| r.t > 0.0)
            .map(|r| {
                (
                    val(&z.lambda2) - val(&r.lambda2),
                    err(&z.lambda2) + err(&r.lambda2),
                    format!("t={}", r.t),
                )
            })
            .collect(),
        None => Vec::new(),
    };
    checks.push(strict("lambda2_max_at_zero", &pairs));

    let pairs: Vec<(f64, f64, String)> = rows
        .windows(2)
        .map(|w| {
            (
                val(&w[0].lambda1_minus) - val(&w[1].lambda1_minus),
                err(&w[0].lambda1_minus) + err(&w[1].lambda1_minus),
                format!("t={} -> {}", w[0].t, w[1].t),
            )
        })
        .collect();
    checks.push(strict("lambda1_minus_monotone", &pairs));

    let pairs: Vec<(f64, f64, String)> = rows
        .iter()
        .map(|r| {
            (
                val(&r.lambda1_minus) - val(&r.lambda1),
                err(&r.lambda1_minus) + err(&r.lambda1),
                format!("t={}", r.t),
            )
        })
        .collect();
    checks.push(strict("lambda1_below_lambda1_minus", &pairs));

    let pairs: Vec<(f64, f64, String)> = rows
        .windows(2)
        .map(|w| {
            (
                val(&w[0].lambda1) - val(&w[1].lambda1),
                err(&w[0].lambda1) + err(&w[1].lambda1),
                format!("t={} -> {}", w[0].t, w[1].t),
            )
        })
        .collect();
    checks.push(strict("lambda1_decreasing", &pairs));

    let worst_min = rows
        .iter()
        .map(|r| {
            let (l2, m, p) = (val(&r.lambda2), val(&r.lambda1_minus), val(&r.lambda2_plus));
            // A tie is reported on the minus branch whichever value is lower.
            if r.tie && l2 == m {
                0.0
            } else {
                (l2 - m.min(p)).abs()
            }
        })
        .fold(0.0, f64::max);
    checks.push(Check {
        name: "lambda2_is_branch_min".into(),
        pass: worst_min == 0.0,
        margin: worst_min,
        tolerance: 0.0,
        detail: String::new(),
    });

    match &report.oracle {
        Some(o) => {
            checks.push(bounded(
                "oracle_agreement",
                o.relative_error,
                ORACLE_TOL,
                format!("lambda2(0) = {}, mu = {}", fmt_human(o.lambda2), fmt_human(o.mu)),
            ));
            if let Some(x) = o.extrapolated_relative_error {
                checks.push(bounded(
                    "oracle_agreement_extrapolated",
                    x,
                    ORACLE_EXTRAPOLATED_TOL,
                    String::new(),
                ));
            }
        }
        None => checks.push(Check {
            name: "oracle_agreement".into(),
            pass: false,
            margin: f64::NAN,
            tolerance: ORACLE_TOL,
            detail: "no t = 0 result".into(),
        }),
    }

    let positive: Vec<&&SweepRow> = rows.iter().filter(|r| r.t > 0.0).collect();
    if report.config.derivative.hadamard() {
        let pairs: Vec<(f64, f64, String)> = positive
            .iter()
            .map(|r| {
                (
                    -r.rate_hadamard.unwrap_or(f64::NAN),
                    RATE_SIGMA * r.rate_hadamard_error.unwrap_or(0.0),
                    format!("t={}", r.t),
                )
            })
            .collect();
        checks.push(strict("rate_negative", &pairs));
    }
    if report.config.derivative == Derivative::Both {
        let worst = positive
            .iter()
            .map(|r| (r.relative_gap.unwrap_or(f64::INFINITY), r.t))
            .fold((0.0f64, f64::NAN), |a, b| if b.0 > a.0 || b.0.is_nan() { b } else { a });
        checks.push(bounded("rate_consistency", worst.0, RATE_GAP_TOL, format!("t={}", worst.1)));
    }
    let overall = checks.iter().all(|c| c.pass);
    Ok(VerificationVerdict { checks, overall })
}

pub fn verify(cfg: &SweepConfig) -> Result<(SweepReport, VerificationVerdict), HarnessError> {
    check_sweep_shape(&cfg.t_values())?;
    let report = run_sweep(cfg)?;
    let verdict = verify_report(&report)?;
    Ok((report, verdict))
}

#[derive(Debug, Clone, Serialize)]
pub struct ConvergenceLevel {
    pub h: f64,
    pub vertices: usize,
    pub lambda1: f64,
    pub lambda1_minus: f64,
    pub lambda2_plus: f64,
    pub lambda2: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct ConvergenceTable {
    pub form: SpaceForm,
    pub dim: usize,
    pub t: f64,
    pub levels: Vec<ConvergenceLevel>,
    /// Observed order of `lambda1_minus` for each consecutive triple.
    pub order_minus: Vec<f64>,
    /// Observed order of `lambda2` for each consecutive triple.
    pub order_lambda2: Vec<f64>,
    /// Richardson value and error estimate of `lambda2` on the finest pair.
    pub extrapolated: f64,
    pub error: f64,
    /// Radial reference `mu_1(1)` when `t = 0`.
    pub oracle: Option<f64>,
}

pub fn observed_order(a: f64, b: f64, c: f64) -> f64 {
    ((a - b).abs() / (b - c).abs()).log2()
}

pub fn convergence_study(spec: &DomainSpec, base: &Discretization, levels: usize) -> Result<ConvergenceTable, HarnessError> {
    if levels < 3 {
        return Err(HarnessError::InsufficientSweep(format!(
            "{levels} levels; an observed order needs 3"
        )));
    }
    let results: Vec<Result<SpectrumResult, SpectrumError>> = (0..levels)
        .into_par_iter()
        .map(|l| {
            let mut d = *base;
            d.refinements = l;
            lambda_2(spec, &d)
        })
        .collect();
    let mut table = Vec::with_capacity(levels);
    for (l, r) in results.into_iter().enumerate() {
        let r = r?;
        table.push(ConvergenceLevel {
            h: base.h / (1u64 << l) as f64,
            vertices: r.vertices,
            lambda1: r.lambda1.value,
            lambda1_minus: r.lambda1_minus.value,
            lambda2_plus: r.lambda2_plus.value,
            lambda2: r.lambda2.value,
        });
    }
    let order = |f: fn(&ConvergenceLevel) -> f64| -> Vec<f64> {
        table
            .windows(3)
            .map(|w| observed_order(f(&w[0]), f(&w[1]), f(&w[2])))
            .collect()
    };
    let order_minus = order(|l| l.lambda1_minus);
    let order_lambda2 = order(|l| l.lambda2);
    let (c, f) = (table[levels - 2].lambda2, table[levels - 1].lambda2);
    let oracle = if spec.t() == 0.0 {
        let p = RadialProblem::new(spec.form(), spec.dim(), 1, spec.r0(), spec.r1())?;
        Some(radial_eigs(&p, 1)?[0].value)
    } else {
        None
    };
    Ok(ConvergenceTable {
        form: spec.form(),
        dim: spec.dim(),
        t: spec.t(),
        levels: table,
        order_minus,
        order_lambda2,
        extrapolated: (4.0 * f - c) / 3.0,
        error: (f - c).abs() / 3.0,
        oracle,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small_config() -> SweepConfig {
        let mut c = SweepConfig::new(SpaceForm::Euclidean, 2, 0.5, 1.0);
        c.h = Some(0.04);
        c.t_values = Some(vec![0.0, 0.02, 0.1, 0.2]);
        c
    }

    #[test]
    fn config_parsing_and_validation() {
        let cfg: SweepConfig = serde_json::from_str(
            r#"{"form": "spherical", "dim": 2, "r0": 0.4, "r1": 1.2, "t_values": [0, 0.1],
                "h": 0.05, "refinements": 0, "eig_tol": 1e-9, "derivative": "fd", "count": 3}"#,
        )
        .unwrap();
        assert_eq!(cfg.derivative, Derivative::Fd);
        assert!(cfg.validate().is_ok());
        let mut bad = cfg.clone();
        bad.t_values = Some(vec![0.1, 0.0]);
        assert!(bad.validate().is_err());
        bad.t_values = Some(vec![0.0, 0.8]);
        assert!(bad.validate().is_err());
        assert!(serde_json::from_str::<SweepConfig>(r#"{"form": "euclidean", "dim": 2, "r0": 0.5, "r1": 1.0, "bogus": 1}"#).is_err());
        let d: SweepConfig = serde_json::from_str(r#"{"form": "euclidean", "dim": 3, "r0": 0.5, "r1": 1.0}"#).unwrap();
        assert_eq!(d.t_values().len(), 9);
        assert!((d.t_values()[8] - 0.45).abs() < 1e-15);
    }

    #[test]
    fn number_formats() {
        assert_eq!(fmt_csv(0.1), "1.0000000000000001e-1");
        assert_eq!(fmt_human(40.87245337866363), "40.8724533787");
        assert_eq!(fmt_human(-0.5), "-0.500000000000");
        assert_eq!(fmt_human(1.5e-7), "1.50000000000e-7");
    }

    #[test]
    fn order_of_exact_sequence() {
        assert!((observed_order(1.0 + 1.0, 1.0 + 0.25, 1.0 + 0.0625) - 2.0).abs() < 1e-12);
    }

    #[test]
    fn sweep_and_verdict() {
        let cfg = small_config();
        let report = run_sweep(&cfg).unwrap();
        assert_eq!(report.rows.len(), 4);
        assert!(report.rows.iter().all(|r| r.error.is_none()));
        let v = verify_report(&report).unwrap();
        assert!(v.overall, "{v}");

        let mut bad = report.clone();
        let z = bad.rows[0].lambda2.as_mut().unwrap();
        z.value *= 0.9;
        let v = verify_report(&bad).unwrap();
        assert!(!v.check("lambda2_max_at_zero").unwrap().pass, "{v}\n{:?}", bad.rows.iter().map(|r| r.lambda2).collect::<Vec<_>>());
        assert!(!v.overall);
    }

    #[test]
    fn csv_has_one_line_per_row() {
        let mut cfg = small_config();
        cfg.derivative = Derivative::Hadamard;
        let report = run_sweep(&cfg).unwrap();
        let mut buf = Vec::new();
        write_csv(&report, &mut buf, false).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines.len(), 5);
        assert_eq!(lines[0], CSV_HEADER.join(","));
        assert!(lines[1].ends_with(','));
    }

    #[test]
    fn verification_needs_enough_offsets() {
        let mut cfg = small_config();
        cfg.t_values = Some(vec![0.1, 0.2, 0.3]);
        assert!(matches!(verify(&cfg), Err(HarnessError::InsufficientSweep(_))));
        cfg.t_values = Some(vec![0.0, 0.1, 0.2]);
        assert!(matches!(verify(&cfg), Err(HarnessError::InsufficientSweep(_))));
    }

    #[test]
    fn convergence_needs_three_levels() {
        let spec = make_domain(SpaceForm::Euclidean, 2, 0.5, 1.0, 0.0).unwrap();
        assert!(matches!(
            convergence_study(&spec, &Discretization::new(0.04, 0), 2),
            Err(HarnessError::InsufficientSweep(_))
        ));
    }
}
