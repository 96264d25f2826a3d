//! Cartesian sweeps over a scenario config.

use rayon::prelude::*;
use serde::Serialize;

use super::config::{Cell, ConfigError, Format, Layout, ScenarioConfig};
use crate::error::{Error, Result};
use crate::fugit::FugitSummary;
use crate::optionality::{self, OptionalityReport, PipelineConfig};
use crate::rates::{calibrate, ModelKind};

pub const ENGINE: &str = "fugitlab";
pub const VERSION: &str = env!("CARGO_PKG_VERSION");

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Provenance {
    pub engine: &'static str,
    pub version: &'static str,
    pub config_sha256: String,
    pub title: Option<String>,
    pub steps: usize,
    pub quad_order: usize,
}

impl Provenance {
    pub fn of(cfg: &ScenarioConfig) -> Self {
        Self {
            engine: ENGINE,
            version: VERSION,
            config_sha256: cfg.digest(),
            title: cfg.title.clone(),
            steps: cfg.numerics.steps,
            quad_order: cfg.numerics.quad_order,
        }
    }

    /// `# key = value` lines.
    pub fn header_lines(&self) -> Vec<String> {
        let mut lines = Vec::new();
        if let Some(t) = &self.title {
            lines.push(format!("# {t}"));
        }
        lines.push(format!("# engine = {} {}", self.engine, self.version));
        lines.push(format!("# config_sha256 = {}", self.config_sha256));
        lines.push(format!("# steps = {}", self.steps));
        lines.push(format!("# quad_order = {}", self.quad_order));
        lines
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(untagged)]
pub enum CellValues {
    Report(Box<OptionalityReport>),
    Stopping(FugitSummary),
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SweepRow {
    pub cell: usize,
    pub model: ModelKind,
    pub moneyness: f64,
    pub spot: f64,
    pub sigma_r: f64,
    pub values: Option<CellValues>,
    pub error: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SweepResult {
    pub provenance: Provenance,
    #[serde(skip)]
    pub layout: Layout,
    #[serde(skip)]
    pub precision: usize,
    pub rows: Vec<SweepRow>,
}

/// Evaluates one cell.
pub fn run_cell(cfg: &ScenarioConfig, pc: &PipelineConfig, cell: &Cell) -> Result<CellValues> {
    let r = &cfg.rate;
    let model = calibrate(cell.model, r.r0, r.r_bar, cell.sigma_r, cell.spec.maturity, cfg.kappa())
        .map_err(Error::at_stage("calibration"))?;
    match cfg.output.layout {
        Layout::Stopping => {
            let stage = optionality::fugit_stage(&cell.spec, &model, r.stochastic, pc)
                .map_err(Error::at_stage("fugit"))?;
            Ok(CellValues::Stopping(stage.summary))
        }
        Layout::Full | Layout::Convexity => {
            let report = optionality::pi_a(&cell.spec, &model, r.stochastic, pc)?;
            Ok(CellValues::Report(Box::new(report)))
        }
    }
}

/// Runs every cell, `jobs` workers at a time (`None` or 0: one per core).
/// Failing cells are recorded in the `error` column and do not stop the sweep.
pub fn run_sweep(cfg: &ScenarioConfig, jobs: Option<usize>) -> std::result::Result<SweepResult, ConfigError> {
    cfg.validate()?;
    let pc = cfg.pipeline();
    let cells = cfg.cells();
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(jobs.unwrap_or(0))
        .build()
        .map_err(|e| ConfigError::Invalid(format!("cannot start worker pool: {e}")))?;
    let outcomes: Vec<Result<CellValues>> =
        pool.install(|| cells.par_iter().map(|c| run_cell(cfg, &pc, c)).collect());

    let rows = cells
        .iter()
        .zip(outcomes)
        .map(|(c, outcome)| {
            let (values, error) = match outcome {
                Ok(v) => (Some(v), None),
                Err(e) => {
                    log::warn!("cell {} failed: {e}", c.index);
                    (None, Some(e.to_string()))
                }
            };
            SweepRow {
                cell: c.index,
                model: c.model,
                moneyness: c.moneyness,
                spot: c.spec.spot,
                sigma_r: c.sigma_r,
                values,
                error,
            }
        })
        .collect();
    Ok(SweepResult {
        provenance: Provenance::of(cfg),
        layout: cfg.output.layout,
        precision: cfg.output.precision,
        rows,
    })
}

const MONTHS: f64 = 12.0;

fn columns(layout: Layout) -> &'static [&'static str] {
    match layout {
        Layout::Full => &[
            "o_a_star",
            "o_a_tilde",
            "pi_a",
            "o_e_tilde",
            "pi_a2",
            "pi_delta_a",
            "delta",
            "r_star",
            "rho_american",
            "rho_european",
            "omega_years",
            "omega_months",
            "tau_star_years",
            "tau_star_months",
            "exercise_probability",
        ],
        Layout::Convexity => &["o_a_star", "o_a_tilde", "pi_a"],
        Layout::Stopping => &[
            "rho_american",
            "rho_european",
            "omega_years",
            "omega_months",
            "tau_star_years",
            "tau_star_months",
            "exercise_probability",
        ],
    }
}

fn summary_of(v: &CellValues) -> FugitSummary {
    match v {
        CellValues::Stopping(s) => *s,
        CellValues::Report(r) => FugitSummary {
            tau_star: r.tau_star,
            omega: r.omega,
            rho_american: r.rho_american,
            rho_european: r.rho_european,
            exercise_probability: r.exercise_probability,
        },
    }
}

fn value_of(v: &CellValues, column: &str) -> f64 {
    let s = summary_of(v);
    let report = match v {
        CellValues::Report(r) => Some(r),
        CellValues::Stopping(_) => None,
    };
    let field = |f: fn(&OptionalityReport) -> f64| report.map_or(f64::NAN, |r| f(r));
    match column {
        "o_a_star" => field(|r| r.o_a_star),
        "o_a_tilde" => field(|r| r.o_a_tilde),
        "pi_a" => field(|r| r.pi_a),
        "o_e_tilde" => field(|r| r.o_e_tilde),
        "pi_a2" => field(|r| r.pi_a2),
        "pi_delta_a" => field(|r| r.pi_delta_a),
        "delta" => field(|r| r.delta),
        "r_star" => field(|r| r.r_star),
        "rho_american" => s.rho_american,
        "rho_european" => s.rho_european,
        "omega_years" => s.omega,
        "omega_months" => s.omega * MONTHS,
        "tau_star_years" => s.tau_star,
        "tau_star_months" => s.tau_star * MONTHS,
        "exercise_probability" => s.exercise_probability,
        other => unreachable!("unknown column {other}"),
    }
}

/// Rate-like columns keep extra digits so small shifts stay visible.
fn digits(column: &str, precision: usize) -> usize {
    match column {
        "delta" | "r_star" | "sigma_r" | "moneyness" => precision.max(6),
        _ => precision,
    }
}

impl SweepResult {
    pub fn to_csv(&self) -> String {
        let mut out = String::new();
        for line in self.provenance.header_lines() {
            out.push_str(&line);
            out.push('\n');
        }
        let value_cols = columns(self.layout);
        let mut w = csv::Writer::from_writer(Vec::new());
        let mut header = vec!["cell", "model", "moneyness", "spot", "sigma_r"];
        header.extend_from_slice(value_cols);
        header.push("error");
        w.write_record(&header).expect("in-memory write");
        let p = self.precision;
        for row in &self.rows {
            let mut rec = vec![
                row.cell.to_string(),
                row.model.name().to_string(),
                format!("{:.*}", digits("moneyness", p), row.moneyness),
                format!("{:.*}", p, row.spot),
                format!("{:.*}", digits("sigma_r", p), row.sigma_r),
            ];
            for col in value_cols {
                rec.push(match &row.values {
                    Some(v) => format!("{:.*}", digits(col, p), value_of(v, col)),
                    None => String::new(),
                });
            }
            rec.push(row.error.clone().unwrap_or_default());
            w.write_record(&rec).expect("in-memory write");
        }
        let body = w.into_inner().expect("in-memory flush");
        out.push_str(std::str::from_utf8(&body).expect("csv output is UTF-8"));
        out
    }

    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("sweep result serializes");
        s.push('\n');
        s
    }

    pub fn render(&self, format: Format) -> String {
        match format {
            Format::Csv => self.to_csv(),
            Format::Json => self.to_json(),
        }
    }

    pub fn failed_cells(&self) -> usize {
        self.rows.iter().filter(|r| r.error.is_some()).count()
    }
}
