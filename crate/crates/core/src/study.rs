//! Refinement sweeps: per-level solve, error and spectrum measurements, orders
//! of convergence and report emission.

use std::fmt;
use std::io::Write;
use std::path::Path;
use std::str::FromStr;
use std::time::Instant;

use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::assembly::{assemble, AssemblyConfig, PenaltyNormal, TaylorHoodSpace};
use crate::error::{Error, Result};
use crate::fe_space::MAX_DEGREE;
use crate::geometry::{AnalyticSurface, SurfaceKind};
use crate::mesh::{build_base_mesh, BaseMesh};
use crate::mms::{eval_errors, ManufacturedCase, MmsKind};
use crate::solver::{a_condition, schur_spectrum, solve_direct, solve_minres, MinresOptions, PreconditionerKind};

pub const CSV_HEADER: &str =
    "level,h,n_u,n_p,energy_error,pressure_l2,velocity_l2,schur_min,schur_max,a_cond_ratio,iterations,wall_time_s";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SolverKind {
    Direct,
    Minres,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ReportFormat {
    Json,
    Csv,
}

/// Inclusive range of refinement levels, written `a..b` (or a single level `a`).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct LevelRange {
    pub first: usize,
    pub last: usize,
}

impl LevelRange {
    pub fn new(first: usize, last: usize) -> Result<Self> {
        if first > last {
            return Err(Error::config(format!("empty level range {first}..{last}")));
        }
        Ok(Self { first, last })
    }

    pub fn len(&self) -> usize {
        self.last - self.first + 1
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn iter(&self) -> impl Iterator<Item = usize> {
        self.first..=self.last
    }
}

impl FromStr for LevelRange {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let parse = |t: &str| t.trim().parse::<usize>().map_err(|_| Error::config(format!("invalid level range '{s}'")));
        match s.split_once("..") {
            Some((a, b)) => Self::new(parse(a)?, parse(b.trim_start_matches('='))?),
            None => {
                let l = parse(s)?;
                Self::new(l, l)
            }
        }
    }
}

impl fmt::Display for LevelRange {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}..{}", self.first, self.last)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StudyConfig {
    pub surface: SurfaceKind,
    pub geom_degree: usize,
    pub velocity_degree: usize,
    pub levels: LevelRange,
    pub mms: MmsKind,
    pub penalty_exponent: f64,
    pub penalty_normal: PenaltyNormal,
    pub solver: SolverKind,
    pub preconditioner: PreconditionerKind,
    pub tol: f64,
    pub max_iter: usize,
    pub spectra: bool,
}

impl Default for StudyConfig {
    fn default() -> Self {
        Self {
            surface: SurfaceKind::Sphere { radius: 1.0 },
            geom_degree: 2,
            velocity_degree: 2,
            levels: LevelRange { first: 1, last: 4 },
            mms: MmsKind::Killing,
            penalty_exponent: 2.0,
            penalty_normal: PenaltyNormal::Improved,
            solver: SolverKind::Direct,
            preconditioner: PreconditionerKind::Exact,
            tol: 1e-10,
            max_iter: 5000,
            spectra: false,
        }
    }
}

impl StudyConfig {
    pub fn validate(&self) -> Result<()> {
        let (k, m) = (self.geom_degree, self.velocity_degree);
        if !(2..=MAX_DEGREE).contains(&m) {
            return Err(Error::config(format!("velocity degree must lie in 2..={MAX_DEGREE}, got {m}")));
        }
        if !(1..=MAX_DEGREE).contains(&k) {
            return Err(Error::config(format!("geometry degree must lie in 1..={MAX_DEGREE}, got {k}")));
        }
        if self.penalty_normal == PenaltyNormal::Improved && k > m {
            return Err(Error::config(format!("the improved penalty normal needs k ≤ m (k = {k}, m = {m})")));
        }
        if self.levels.len() < 2 {
            return Err(Error::config("orders of convergence need at least two levels"));
        }
        if !(self.tol > 0.0 && self.tol < 1.0) {
            return Err(Error::config(format!("solver tolerance must lie in (0, 1), got {}", self.tol)));
        }
        if !(self.penalty_exponent.is_finite() && self.penalty_exponent >= 0.0) {
            return Err(Error::config(format!("invalid penalty exponent {}", self.penalty_exponent)));
        }
        let surface = AnalyticSurface::from_kind(self.surface).map_err(|e| Error::config(e.to_string()))?;
        ManufacturedCase::new(self.mms, &surface)?;
        Ok(())
    }

    pub fn assembly_config(&self) -> AssemblyConfig {
        AssemblyConfig {
            penalty_exponent: self.penalty_exponent,
            penalty_normal: self.penalty_normal,
            quadrature_exactness: None,
        }
    }
}

/// Measurements of one refinement level. Quantities that were not computed
/// (spectra switched off, or a failed level) are NaN.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LevelRecord {
    pub level: usize,
    pub h: f64,
    pub n_u: usize,
    pub n_p: usize,
    pub energy_error: f64,
    pub pressure_l2: f64,
    pub velocity_l2: f64,
    pub tangential_h1: f64,
    pub schur_min: f64,
    pub schur_max: f64,
    pub a_min: f64,
    pub a_cond_ratio: f64,
    pub iterations: usize,
    pub residual: f64,
    pub wall_time_s: f64,
    /// Error message of a failed level.
    pub failure: Option<String>,
}

impl LevelRecord {
    fn failed(level: usize, h: f64, n_u: usize, n_p: usize, err: &Error, wall_time_s: f64) -> Self {
        Self {
            level,
            h,
            n_u,
            n_p,
            energy_error: f64::NAN,
            pressure_l2: f64::NAN,
            velocity_l2: f64::NAN,
            tangential_h1: f64::NAN,
            schur_min: f64::NAN,
            schur_max: f64::NAN,
            a_min: f64::NAN,
            a_cond_ratio: f64::NAN,
            iterations: 0,
            residual: f64::NAN,
            wall_time_s,
            failure: Some(err.to_string()),
        }
    }
}

/// Orders between consecutive levels; NaN where either level lacks the value.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EocTable {
    pub energy_error: Vec<f64>,
    pub pressure_l2: Vec<f64>,
    pub velocity_l2: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConvergenceReport {
    pub config: StudyConfig,
    pub tool_version: String,
    pub levels: Vec<LevelRecord>,
    pub eoc: EocTable,
}

impl ConvergenceReport {
    pub fn has_failures(&self) -> bool {
        self.levels.iter().any(|l| l.failure.is_some())
    }
}

/// `EOC_i = log(e_i / e_{i+1}) / log(h_i / h_{i+1})`.
pub fn compute_eoc(errors: &[f64], hs: &[f64]) -> Result<Vec<f64>> {
    if errors.len() != hs.len() {
        return Err(Error::InvalidSequence(format!("{} errors but {} mesh sizes", errors.len(), hs.len())));
    }
    if errors.len() < 2 {
        return Err(Error::InvalidSequence("at least two levels are needed".into()));
    }
    if let Some(e) = errors.iter().chain(hs).find(|v| !(v.is_finite() && **v > 0.0)) {
        return Err(Error::InvalidSequence(format!("non-positive or non-finite entry {e}")));
    }
    if hs.windows(2).any(|w| w[1] >= w[0]) {
        return Err(Error::InvalidSequence("mesh sizes must decrease strictly".into()));
    }
    Ok(pairwise_eoc(errors, hs))
}

fn pairwise_eoc(errors: &[f64], hs: &[f64]) -> Vec<f64> {
    errors.windows(2).zip(hs.windows(2)).map(|(e, h)| (e[0] / e[1]).ln() / (h[0] / h[1]).ln()).collect()
}

/// Unknowns of the Taylor-Hood pair relative to an equal-order `P_m`–`P_m`
/// pair on the same mesh, asymptotically in the number of vertices.
pub fn dof_overhead(m: usize) -> f64 {
    let m = m as f64;
    (2.0 * m + 3.0) / (1.5 * m + 2.0)
}

fn eoc_table(levels: &[LevelRecord]) -> EocTable {
    let hs: Vec<f64> = levels.iter().map(|l| l.h).collect();
    let col = |f: fn(&LevelRecord) -> f64| pairwise_eoc(&levels.iter().map(f).collect::<Vec<_>>(), &hs);
    EocTable { energy_error: col(|l| l.energy_error), pressure_l2: col(|l| l.pressure_l2), velocity_l2: col(|l| l.velocity_l2) }
}

fn run_level(config: &StudyConfig, mesh: &BaseMesh, surface: &AnalyticSurface, case: &ManufacturedCase, level: usize) -> LevelRecord {
    let start = Instant::now();
    let mut sizes = (mesh.h_max(), 0, 0);
    let result = (|| -> Result<LevelRecord> {
        let space =
            TaylorHoodSpace::new(mesh, surface, config.geom_degree, config.velocity_degree, config.assembly_config())?;
        sizes = (space.h(), space.n_u(), space.n_p());
        let system = assemble(&space, Some(case))?;
        let solution = match config.solver {
            SolverKind::Direct => solve_direct(&system)?,
            SolverKind::Minres => solve_minres(
                &system,
                MinresOptions { preconditioner: config.preconditioner, tol: config.tol, max_iter: config.max_iter },
            )?,
        };
        let errors = eval_errors(&space, case, &solution.u, &solution.p, level)?;
        let (mut schur_min, mut schur_max, mut a_min, mut a_cond_ratio) = (f64::NAN, f64::NAN, f64::NAN, f64::NAN);
        if config.spectra {
            let s = schur_spectrum(&system)?;
            let a = a_condition(&system)?;
            (schur_min, schur_max, a_min, a_cond_ratio) = (s.min, s.max, a.min, a.ratio());
        }
        Ok(LevelRecord {
            level,
            h: space.h(),
            n_u: space.n_u(),
            n_p: space.n_p(),
            energy_error: errors.energy_error,
            pressure_l2: errors.pressure_l2,
            velocity_l2: errors.velocity_l2,
            tangential_h1: errors.tangential_h1,
            schur_min,
            schur_max,
            a_min,
            a_cond_ratio,
            iterations: solution.iterations,
            residual: solution.residual,
            wall_time_s: start.elapsed().as_secs_f64(),
            failure: None,
        })
    })();
    result.unwrap_or_else(|e| LevelRecord::failed(level, sizes.0, sizes.1, sizes.2, &e, start.elapsed().as_secs_f64()))
}

/// Runs every level of the configured sweep. Configuration problems are
/// returned as errors; failures inside a level are recorded on that level and
/// the sweep continues.
pub fn run_study(config: &StudyConfig) -> Result<ConvergenceReport> {
    config.validate()?;
    let surface = AnalyticSurface::from_kind(config.surface)?;
    let case = ManufacturedCase::new(config.mms, &surface)?;
    let mut levels = Vec::with_capacity(config.levels.len());
    let mut mesh: Option<BaseMesh> = None;
    for level in config.levels.iter() {
        let next = match mesh.take() {
            None => build_base_mesh(&surface).and_then(|m| m.refine_to(&surface, level)),
            Some(m) => m.refine(&surface),
        };
        match next {
            Ok(m) => {
                levels.push(run_level(config, &m, &surface, &case, level));
                mesh = Some(m);
            }
            Err(e) => {
                // without a mesh every finer level fails as well
                for l in level..=config.levels.last {
                    levels.push(LevelRecord::failed(l, f64::NAN, 0, 0, &e, 0.0));
                }
                break;
            }
        }
    }
    let eoc = eoc_table(&levels);
    Ok(ConvergenceReport { config: config.clone(), tool_version: env!("CARGO_PKG_VERSION").to_string(), levels, eoc })
}

/// Writes floats with 17 significant digits.
struct PreciseFormatter;

impl serde_json::ser::Formatter for PreciseFormatter {
    fn write_f64<W: ?Sized + Write>(&mut self, writer: &mut W, value: f64) -> std::io::Result<()> {
        write!(writer, "{}", format_f64(value))
    }
}

/// 17 significant digits; non-finite values as `NaN`, `inf`, `-inf`.
pub fn format_f64(value: f64) -> String {
    if value.is_finite() {
        format!("{value:.16e}")
    } else {
        format!("{value}")
    }
}

/// JSON text of a report. Non-finite numbers become `null`.
pub fn report_json(report: &ConvergenceReport) -> Result<String> {
    let value: Value = serde_json::to_value(report)?;
    let mut out = Vec::new();
    let mut ser = serde_json::Serializer::with_formatter(&mut out, PreciseFormatter);
    value.serialize(&mut ser)?;
    out.push(b'\n');
    Ok(String::from_utf8(out).expect("JSON output is UTF-8"))
}

pub fn report_csv(report: &ConvergenceReport) -> String {
    let mut out = String::from(CSV_HEADER);
    out.push('\n');
    for l in &report.levels {
        let row = [
            l.level.to_string(),
            format_f64(l.h),
            l.n_u.to_string(),
            l.n_p.to_string(),
            format_f64(l.energy_error),
            format_f64(l.pressure_l2),
            format_f64(l.velocity_l2),
            format_f64(l.schur_min),
            format_f64(l.schur_max),
            format_f64(l.a_cond_ratio),
            l.iterations.to_string(),
            format_f64(l.wall_time_s),
        ];
        out.push_str(&row.join(","));
        out.push('\n');
    }
    out
}

/// Writes the report to `path`. An empty report is rejected before anything is written.
pub fn emit_report(report: &ConvergenceReport, format: ReportFormat, path: &Path) -> Result<()> {
    if report.levels.is_empty() {
        return Err(Error::InvalidSequence("report has no levels".into()));
    }
    let text = match format {
        ReportFormat::Json => report_json(report)?,
        ReportFormat::Csv => report_csv(report),
    };
    std::fs::write(path, text)?;
    Ok(())
}
