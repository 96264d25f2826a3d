//! Data series behind the standard plots: `π_A` against `σ_r`, `τ*` and `Ω` against
//! moneyness, and `π_A2` against moneyness, for the three base scenarios.

use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::option::{OptionKind, OptionSpec, RateSlot};
use crate::optionality::{self, OptionalityReport, PipelineConfig};
use crate::rates::{calibrate, ModelKind, RateModel, DEFAULT_R0, DEFAULT_R_BAR, DEFAULT_SIGMA_R};

use super::sweep::{ENGINE, VERSION};

/// `σ_r` grid shared by the rate-volatility plots and the first table.
pub const SIGMA_R_GRID: [f64; 11] = [
    0.0, 0.0028, 0.0078, 0.0128, 0.0178, 0.0228, 0.0278, 0.0328, 0.0378, 0.0428, 0.0478,
];

pub const MONEYNESS_GRID: [f64; 7] = [0.8, 0.9, 1.0, 1.1, 1.2, 1.3, 1.4];

/// A contract plus the calibration of its stochastic rate.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct BaseScenario {
    pub name: &'static str,
    pub kind: OptionKind,
    pub strike: f64,
    pub maturity: f64,
    pub volatility: f64,
    /// Fixed carry rate; the funding rate is the stochastic one.
    pub carry_rate: f64,
    pub r0: f64,
    pub r_bar: f64,
    pub sigma_r: f64,
    pub kappa: Option<f64>,
}

impl BaseScenario {
    pub fn equity_put() -> Self {
        Self {
            name: "equity_put",
            kind: OptionKind::Put,
            strike: 100.0,
            maturity: 1.0,
            volatility: 0.4,
            carry_rate: 0.0,
            r0: DEFAULT_R0,
            r_bar: DEFAULT_R_BAR,
            sigma_r: DEFAULT_SIGMA_R,
            kappa: None,
        }
    }

    pub fn currency_put() -> Self {
        Self {
            name: "currency_put",
            carry_rate: 0.028,
            ..Self::equity_put()
        }
    }

    pub fn currency_call() -> Self {
        Self {
            name: "currency_call",
            kind: OptionKind::Call,
            carry_rate: 0.10,
            r0: 0.03,
            ..Self::equity_put()
        }
    }

    pub const STOCHASTIC: RateSlot = RateSlot::R1;

    pub fn spec(&self, moneyness: f64) -> OptionSpec {
        OptionSpec {
            spot: moneyness * self.strike,
            strike: self.strike,
            maturity: self.maturity,
            volatility: self.volatility,
            funding_rate: self.r0,
            carry_rate: self.carry_rate,
            kind: self.kind,
        }
    }

    pub fn model(&self, kind: ModelKind, sigma_r: f64) -> Result<RateModel> {
        calibrate(kind, self.r0, self.r_bar, sigma_r, self.maturity, self.kappa)
    }

    pub fn report(
        &self,
        kind: ModelKind,
        moneyness: f64,
        sigma_r: f64,
        pc: &PipelineConfig,
    ) -> Result<OptionalityReport> {
        let model = self.model(kind, sigma_r)?;
        optionality::pi_a(&self.spec(moneyness), &model, Self::STOCHASTIC, pc)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub enum Axis {
    SigmaR(Vec<f64>),
    Moneyness(Vec<f64>),
}

impl Axis {
    fn name(&self) -> &'static str {
        match self {
            Axis::SigmaR(_) => "sigma_r",
            Axis::Moneyness(_) => "moneyness",
        }
    }

    fn points(&self) -> &[f64] {
        match self {
            Axis::SigmaR(v) | Axis::Moneyness(v) => v,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum Quantity {
    PiA,
    PiA2,
    /// `τ*` and `Ω`, in months.
    StoppingTimes,
}

/// One curve: a rate model at a fixed moneyness (used when the x-axis is `σ_r`) or a fixed
/// `σ_r` (used when the x-axis is moneyness).
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Series {
    pub label: String,
    pub model: ModelKind,
    pub moneyness: f64,
    pub sigma_r: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FigureSpec {
    pub id: String,
    pub title: String,
    pub base: BaseScenario,
    pub axis: Axis,
    pub quantity: Quantity,
    pub series: Vec<Series>,
}

fn single(model: ModelKind, moneyness: f64, sigma_r: f64) -> Vec<Series> {
    vec![Series {
        label: String::new(),
        model,
        moneyness,
        sigma_r,
    }]
}

fn by_model(sigma_r: f64) -> Vec<Series> {
    [ModelKind::Bachelier, ModelKind::Vasicek, ModelKind::Lognormal]
        .into_iter()
        .map(|m| Series {
            label: m.name().to_string(),
            model: m,
            moneyness: 1.0,
            sigma_r,
        })
        .collect()
}

fn by_moneyness(model: ModelKind) -> Vec<Series> {
    [0.8, 1.0, 1.2]
        .into_iter()
        .map(|m| Series {
            label: format!("sk{m:.1}"),
            model,
            moneyness: m,
            sigma_r: DEFAULT_SIGMA_R,
        })
        .collect()
}

/// The fifteen standard figures, `fig1` to `fig15`.
pub fn figure_specs() -> Vec<FigureSpec> {
    use ModelKind::*;
    let eq = BaseScenario::equity_put();
    let cp = BaseScenario::currency_put();
    let cc = BaseScenario::currency_call();
    let sig = || Axis::SigmaR(SIGMA_R_GRID.to_vec());
    let mon = || Axis::Moneyness(MONEYNESS_GRID.to_vec());
    let fig = |n: usize, title: &str, base: BaseScenario, axis: Axis, quantity: Quantity, series| FigureSpec {
        id: format!("fig{n}"),
        title: title.to_string(),
        base,
        axis,
        quantity,
        series,
    };
    vec![
        fig(1, "equity put, Bachelier rate: pi_A vs sigma_r", eq, sig(), Quantity::PiA, single(Bachelier, 1.0, 0.0)),
        fig(2, "currency put, lognormal rate: pi_A vs sigma_r", cp, sig(), Quantity::PiA, single(Lognormal, 1.0, 0.0)),
        fig(3, "currency call, Vasicek rate: pi_A vs sigma_r", cc, sig(), Quantity::PiA, single(Vasicek, 1.0, 0.0)),
        fig(4, "equity put: stopping times vs moneyness", eq, mon(), Quantity::StoppingTimes, single(Bachelier, 1.0, DEFAULT_SIGMA_R)),
        fig(5, "currency put: stopping times vs moneyness", cp, mon(), Quantity::StoppingTimes, single(Bachelier, 1.0, DEFAULT_SIGMA_R)),
        fig(6, "currency call: stopping times vs moneyness", cc, mon(), Quantity::StoppingTimes, single(Bachelier, 1.0, DEFAULT_SIGMA_R)),
        fig(7, "equity put, Bachelier rate: pi_A vs sigma_r by moneyness", eq, sig(), Quantity::PiA, by_moneyness(Bachelier)),
        fig(8, "equity put: pi_A vs sigma_r by rate model", eq, sig(), Quantity::PiA, by_model(0.0)),
        fig(9, "currency put: pi_A vs sigma_r by rate model", cp, sig(), Quantity::PiA, by_model(0.0)),
        fig(10, "currency put, Bachelier rate: pi_A vs sigma_r by moneyness", cp, sig(), Quantity::PiA, by_moneyness(Bachelier)),
        fig(11, "currency call: pi_A vs sigma_r by rate model", cc, sig(), Quantity::PiA, by_model(0.0)),
        fig(12, "currency call, Bachelier rate: pi_A vs sigma_r by moneyness", cc, sig(), Quantity::PiA, by_moneyness(Bachelier)),
        fig(13, "equity put: pi_A2 vs moneyness", eq, mon(), Quantity::PiA2, single(Bachelier, 1.0, DEFAULT_SIGMA_R)),
        fig(14, "currency put: pi_A2 vs moneyness", cp, mon(), Quantity::PiA2, single(Bachelier, 1.0, DEFAULT_SIGMA_R)),
        fig(15, "currency call: pi_A2 vs moneyness", cc, mon(), Quantity::PiA2, single(Bachelier, 1.0, DEFAULT_SIGMA_R)),
    ]
}

pub fn figure_spec(id: &str) -> Option<FigureSpec> {
    figure_specs().into_iter().find(|f| f.id == id)
}

/// Values of one figure: `values[series][point]`.
#[derive(Debug, Clone, PartialEq)]
pub struct FigureData {
    pub spec: FigureSpec,
    pub x: Vec<f64>,
    pub values: Vec<Vec<Result<OptionalityReport>>>,
}

impl FigureData {
    fn column_names(&self) -> Vec<String> {
        let mut cols = vec![self.spec.axis.name().to_string()];
        let suffix = |label: &str| {
            if label.is_empty() {
                String::new()
            } else {
                format!("_{label}")
            }
        };
        for s in &self.spec.series {
            let sfx = suffix(&s.label);
            match self.spec.quantity {
                Quantity::PiA => cols.push(format!("pi_a{sfx}")),
                Quantity::PiA2 => cols.push(format!("pi_a2{sfx}")),
                Quantity::StoppingTimes => {
                    cols.push(format!("tau_star_months{sfx}"));
                    cols.push(format!("omega_months{sfx}"));
                }
            }
        }
        cols.push("error".to_string());
        cols
    }

    /// CSV with `#` header lines; an empty axis yields the header only.
    pub fn to_csv(&self, steps: usize, quad_order: usize, precision: usize) -> String {
        let mut out = format!("# {}: {}\n", self.spec.id, self.spec.title);
        out.push_str(&format!("# engine = {ENGINE} {VERSION}\n"));
        out.push_str(&format!("# steps = {steps}\n# quad_order = {quad_order}\n"));
        if let Axis::SigmaR(_) = self.spec.axis {
            // The benchmark does not depend on sigma_r; report it once per series.
            for (s, vals) in self.spec.series.iter().zip(&self.values) {
                if let Some(Ok(r)) = vals.first() {
                    let key = if s.label.is_empty() {
                        "o_a_star".to_string()
                    } else {
                        format!("o_a_star_{}", s.label)
                    };
                    out.push_str(&format!("# {key} = {:.*}\n", precision, r.o_a_star));
                }
            }
        }
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record(self.column_names()).expect("in-memory write");
        for (k, x) in self.x.iter().enumerate() {
            let mut rec = vec![format!("{:.*}", precision.max(4), x)];
            let mut errors = Vec::new();
            for vals in &self.values {
                match &vals[k] {
                    Ok(r) => match self.spec.quantity {
                        Quantity::PiA => rec.push(format!("{:.*}", precision, r.pi_a)),
                        Quantity::PiA2 => rec.push(format!("{:.*}", precision, r.pi_a2)),
                        Quantity::StoppingTimes => {
                            rec.push(format!("{:.*}", precision, 12.0 * r.tau_star));
                            rec.push(format!("{:.*}", precision, 12.0 * r.omega));
                        }
                    },
                    Err(e) => {
                        rec.push(String::new());
                        if self.spec.quantity == Quantity::StoppingTimes {
                            rec.push(String::new());
                        }
                        errors.push(e.to_string());
                    }
                }
            }
            rec.push(errors.join("; "));
            w.write_record(&rec).expect("in-memory write");
        }
        let body = w.into_inner().expect("in-memory flush");
        out.push_str(std::str::from_utf8(&body).expect("csv output is UTF-8"));
        out
    }
}

/// Computes every point of a figure on `jobs` workers (`None` or 0: one per core).
pub fn compute_figure(fig: &FigureSpec, pc: &PipelineConfig, jobs: Option<usize>) -> Result<FigureData> {
    let x = fig.axis.points().to_vec();
    let tasks: Vec<(usize, f64)> = (0..fig.series.len())
        .flat_map(|s| x.iter().map(move |&v| (s, v)))
        .collect();
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(jobs.unwrap_or(0))
        .build()
        .map_err(|e| Error::InvalidSpec(format!("cannot start worker pool: {e}")))?;
    let results: Vec<Result<OptionalityReport>> = pool.install(|| {
        tasks
            .par_iter()
            .map(|&(s, v)| {
                let series = &fig.series[s];
                let (moneyness, sigma_r) = match fig.axis {
                    Axis::SigmaR(_) => (series.moneyness, v),
                    Axis::Moneyness(_) => (v, series.sigma_r),
                };
                fig.base.report(series.model, moneyness, sigma_r, pc)
            })
            .collect()
    });
    let mut values: Vec<Vec<Result<OptionalityReport>>> = fig.series.iter().map(|_| Vec::new()).collect();
    for ((s, _), r) in tasks.iter().zip(results) {
        values[*s].push(r);
    }
    Ok(FigureData {
        spec: fig.clone(),
        x,
        values,
    })
}
