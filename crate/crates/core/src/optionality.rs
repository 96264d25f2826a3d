//! Hidden-optionality measures of an American option under a stochastic rate.
//!
//! Pipeline for one scenario:
//! 1. stopping-time pmf, `τ*` and `Ω` on a flat-rate lattice at the baseline rate;
//! 2. benchmark rate `r* = E[r(τ*)]`;
//! 3. `O_A(r*)` on the lattice;
//! 4. `Õ_A`, the American price averaged over the rate marginal (single fugit or full pmf);
//! 5. `π_A = Õ_A − O_A(r*)`.
//!
//! `π_A2 = Õ_A − Õ_E` compares against the European price averaged over the maturity
//! marginal, and `π_Δa` is the three-point convexity estimate around `r*`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::european;
use crate::fugit::{self, StoppingDistribution, DEFAULT_COMPACTION};
use crate::integrator::{self, Method, NodeDiagnostic};
use crate::lattice::{self, LatticeConfig};
use crate::option::{OptionSpec, RateSlot};
use crate::quadrature::{QuadratureRule, DEFAULT_ORDER};
use crate::rates::RateModel;

/// Flat rate used for the stopping-time lattice and the rho bumps.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum FugitRate {
    /// Calibrated target mean `r̄` of the rate at maturity.
    #[default]
    TargetMean,
    /// Initial rate `r0`.
    Initial,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PipelineConfig {
    pub lattice: LatticeConfig,
    pub quad_order: usize,
    /// `SingleFugit` or `FullDistribution`.
    pub method: Method,
    /// Rate bumped for `ρ_A`, `ρ_E` and hence `Ω`.
    pub rho_slot: RateSlot,
    pub fugit_rate: FugitRate,
    /// Recompute the pmf once at `r*` after the first pass.
    pub refine: bool,
    /// Use the unconditional expected fugit (unexercised paths at `T`).
    pub unconditional: bool,
    /// Atom merge threshold for the full-distribution method.
    pub compaction: f64,
    /// Rate shift for `π_Δa`; defaults to the mean absolute deviation of the marginal at `τ*`.
    pub delta: Option<f64>,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        Self {
            lattice: LatticeConfig::default(),
            quad_order: DEFAULT_ORDER,
            method: Method::SingleFugit,
            rho_slot: RateSlot::R2,
            fugit_rate: FugitRate::TargetMean,
            refine: false,
            unconditional: false,
            compaction: DEFAULT_COMPACTION,
            delta: None,
        }
    }
}

/// Everything the report was computed from.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ReportInputs {
    pub spec: OptionSpec,
    pub model: RateModel,
    pub stochastic_rate: RateSlot,
    pub pipeline: PipelineConfig,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct OptionalityReport {
    /// `O_A(r*)`.
    pub o_a_star: f64,
    /// `Õ_A`.
    pub o_a_tilde: f64,
    /// `Õ_E`, maturity marginal.
    pub o_e_tilde: f64,
    /// Closed-form European at `r*`.
    pub o_e_star: f64,
    pub pi_a: f64,
    pub pi_a2: f64,
    pub pi_delta_a: f64,
    pub delta: f64,
    pub r_star: f64,
    /// Years.
    pub tau_star: f64,
    /// Years.
    pub omega: f64,
    pub rho_american: f64,
    pub rho_european: f64,
    pub exercise_probability: f64,
    pub method: Method,
    pub node_evaluations: usize,
    pub inputs: ReportInputs,
    /// Per-node rates, weights and prices of the `Õ_A` integral.
    #[serde(skip)]
    pub diagnostics: Vec<NodeDiagnostic>,
}

/// Stopping-time stage at the configured baseline rate.
#[derive(Debug, Clone, PartialEq)]
pub struct FugitStage {
    pub distribution: StoppingDistribution,
    pub summary: fugit::FugitSummary,
    pub baseline_rate: f64,
}

fn baseline_rate(model: &RateModel, which: FugitRate) -> f64 {
    match which {
        FugitRate::TargetMean => model.target_mean,
        FugitRate::Initial => model.r0,
    }
}

fn summarize_at(spec: &OptionSpec, slot: RateSlot, rate: f64, pc: &PipelineConfig) -> Result<FugitStage> {
    let base = spec.with_rate(slot, rate);
    let (distribution, mut summary) = fugit::summarize(&base, &pc.lattice, pc.rho_slot)?;
    if pc.unconditional {
        summary.tau_star = distribution.expected_fugit_unconditional()?;
    }
    Ok(FugitStage {
        distribution,
        summary,
        baseline_rate: rate,
    })
}

/// Stage 1: pmf, `τ*`, `ρ_A`, `ρ_E` and `Ω`, optionally refined once at `r*`.
pub fn fugit_stage(
    spec: &OptionSpec,
    model: &RateModel,
    slot: RateSlot,
    pc: &PipelineConfig,
) -> Result<FugitStage> {
    let first = summarize_at(spec, slot, baseline_rate(model, pc.fugit_rate), pc)?;
    if !pc.refine {
        return Ok(first);
    }
    let r_star = model.mean_at(first.summary.tau_star);
    summarize_at(spec, slot, r_star, pc)
}

fn stochastic_american(
    spec: &OptionSpec,
    model: &RateModel,
    slot: RateSlot,
    stage: &FugitStage,
    rule: &QuadratureRule,
    pc: &PipelineConfig,
) -> Result<integrator::StochasticPriceResult> {
    match pc.method {
        Method::SingleFugit => {
            integrator::integrate_single_fugit(spec, model, slot, stage.summary.tau_star, rule, &pc.lattice)
        }
        Method::FullDistribution => {
            let atoms = stage.distribution.integration_atoms(pc.compaction)?;
            integrator::integrate_atoms(spec, model, slot, &atoms, rule, &pc.lattice)
        }
        Method::TwoRate => Err(Error::InvalidSpec(
            "the two-rate integral needs a second rate model".into(),
        )),
    }
}

/// Full report for one scenario; `π_A = Õ_A − O_A(r*)`.
pub fn pi_a(
    spec: &OptionSpec,
    model: &RateModel,
    slot: RateSlot,
    pc: &PipelineConfig,
) -> Result<OptionalityReport> {
    spec.validate()?;
    let rule = QuadratureRule::gauss_hermite(pc.quad_order).map_err(Error::at_stage("quadrature"))?;
    let stage = fugit_stage(spec, model, slot, pc).map_err(Error::at_stage("fugit"))?;
    let tau_star = stage.summary.tau_star;

    let r_star = model.mean_at(tau_star);
    let at_star = spec.with_rate(slot, r_star);
    let o_a_star = lattice::price_american(&at_star, &pc.lattice).map_err(Error::at_stage("benchmark"))?;
    let o_e_star = european::price_european_closed(&at_star)
        .map_err(Error::at_stage("benchmark"))?
        .value;

    let american =
        stochastic_american(spec, model, slot, &stage, &rule, pc).map_err(Error::at_stage("integration"))?;
    let o_e_tilde = european::stochastic_european(spec, model, slot, &rule)
        .map_err(Error::at_stage("european"))?
        .value;

    let delta = pc
        .delta
        .unwrap_or_else(|| model.marginal_at(tau_star).mean_abs_deviation());
    let pi_delta_a = pi_delta_a(spec, slot, r_star, delta, &pc.lattice).map_err(Error::at_stage("delta"))?;

    Ok(OptionalityReport {
        o_a_star,
        o_a_tilde: american.value,
        o_e_tilde,
        o_e_star,
        pi_a: american.value - o_a_star,
        pi_a2: american.value - o_e_tilde,
        pi_delta_a,
        delta,
        r_star,
        tau_star,
        omega: stage.summary.omega,
        rho_american: stage.summary.rho_american,
        rho_european: stage.summary.rho_european,
        exercise_probability: stage.summary.exercise_probability,
        method: american.method,
        node_evaluations: american.node_evaluations,
        diagnostics: american.diagnostics,
        inputs: ReportInputs {
            spec: *spec,
            model: *model,
            stochastic_rate: slot,
            pipeline: *pc,
        },
    })
}

/// `Õ_A − Õ_E` without the benchmark and heuristic legs.
pub fn pi_a2(spec: &OptionSpec, model: &RateModel, slot: RateSlot, pc: &PipelineConfig) -> Result<f64> {
    spec.validate()?;
    let rule = QuadratureRule::gauss_hermite(pc.quad_order).map_err(Error::at_stage("quadrature"))?;
    let stage = fugit_stage(spec, model, slot, pc).map_err(Error::at_stage("fugit"))?;
    let american =
        stochastic_american(spec, model, slot, &stage, &rule, pc).map_err(Error::at_stage("integration"))?;
    let european = european::stochastic_european(spec, model, slot, &rule).map_err(Error::at_stage("european"))?;
    Ok(american.value - european.value)
}

/// `½[O_A(r+Δ) + O_A(r−Δ)] − O_A(r)` on the lattice, with `r` in `slot`.
pub fn pi_delta_a(spec: &OptionSpec, slot: RateSlot, center: f64, delta: f64, cfg: &LatticeConfig) -> Result<f64> {
    let spec = *spec;
    pi_delta_a_with(center, delta, |r| lattice::price_american(&spec.with_rate(slot, r), cfg))
}

/// Three-point estimate for an arbitrary price function of the rate.
pub fn pi_delta_a_with(center: f64, delta: f64, price: impl Fn(f64) -> Result<f64>) -> Result<f64> {
    if !delta.is_finite() || delta < 0.0 {
        return Err(Error::InvalidSpec(format!("rate shift must be finite and >= 0, got {delta}")));
    }
    if delta == 0.0 {
        return Ok(0.0);
    }
    let mid = price(center)?;
    let up = price(center + delta)?;
    let down = price(center - delta)?;
    Ok(0.5 * (up + down) - mid)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::option::OptionKind;
    use crate::rates::{calibrate, ModelKind};

    fn equity_put() -> OptionSpec {
        OptionSpec {
            spot: 100.0,
            strike: 100.0,
            maturity: 1.0,
            volatility: 0.4,
            funding_rate: 0.01,
            carry_rate: 0.0,
            kind: OptionKind::Put,
        }
    }

    fn quick() -> PipelineConfig {
        PipelineConfig {
            lattice: LatticeConfig::with_steps(300),
            quad_order: 8,
            ..PipelineConfig::default()
        }
    }

    #[test]
    fn zero_rate_vol_gives_zero_pi_a() {
        for kind in [ModelKind::Bachelier, ModelKind::Vasicek, ModelKind::Lognormal] {
            let m = calibrate(kind, 0.01, 0.0418, 0.0, 1.0, None).unwrap();
            let rep = pi_a(&equity_put(), &m, RateSlot::R1, &quick()).unwrap();
            assert_eq!(rep.pi_a, 0.0, "{kind:?}");
            assert_eq!(rep.node_evaluations, 1);
            assert_eq!(rep.pi_a, rep.o_a_tilde - rep.o_a_star);
        }
    }

    #[test]
    fn report_fields_are_consistent() {
        let m = calibrate(ModelKind::Bachelier, 0.01, 0.0418, 0.0228, 1.0, None).unwrap();
        let rep = pi_a(&equity_put(), &m, RateSlot::R1, &quick()).unwrap();
        assert_eq!(rep.pi_a, rep.o_a_tilde - rep.o_a_star);
        assert_eq!(rep.pi_a2, rep.o_a_tilde - rep.o_e_tilde);
        assert!(rep.pi_a > 0.0);
        assert!(rep.o_a_star >= rep.o_e_star);
        assert!((rep.r_star - m.mean_at(rep.tau_star)).abs() < 1e-15);
        assert!(rep.tau_star > 0.0 && rep.tau_star <= 1.0);
        assert!(rep.omega > 0.0 && rep.omega <= 1.0);
    }

    #[test]
    fn full_distribution_is_centred_on_unconditional_fugit() {
        // Unexercised mass sits at T, so the pmf-weighted rate mean is r(E[τ]) with the
        // unconditional expectation; the single-horizon integral there differs only by
        // the spread of the atom means.
        let m = calibrate(ModelKind::Bachelier, 0.01, 0.0418, 0.0228, 1.0, None).unwrap();
        let full = pi_a(
            &equity_put(),
            &m,
            RateSlot::R1,
            &PipelineConfig {
                method: Method::FullDistribution,
                ..quick()
            },
        )
        .unwrap();
        assert_eq!(full.method, Method::FullDistribution);
        let single_unconditional = pi_a(
            &equity_put(),
            &m,
            RateSlot::R1,
            &PipelineConfig {
                unconditional: true,
                ..quick()
            },
        )
        .unwrap();
        assert!(
            (full.o_a_tilde - single_unconditional.o_a_tilde).abs() < 0.02,
            "{} vs {}",
            full.o_a_tilde,
            single_unconditional.o_a_tilde
        );
    }

    #[test]
    fn pi_a2_matches_report() {
        let m = calibrate(ModelKind::Bachelier, 0.01, 0.0418, 0.0128, 1.0, None).unwrap();
        let rep = pi_a(&equity_put(), &m, RateSlot::R1, &quick()).unwrap();
        let direct = pi_a2(&equity_put(), &m, RateSlot::R1, &quick()).unwrap();
        assert_eq!(direct, rep.pi_a2);
    }

    #[test]
    fn two_rate_method_rejected_by_single_model_pipeline() {
        let m = calibrate(ModelKind::Bachelier, 0.01, 0.0418, 0.0128, 1.0, None).unwrap();
        let pc = PipelineConfig {
            method: Method::TwoRate,
            ..quick()
        };
        let err = pi_a(&equity_put(), &m, RateSlot::R1, &pc).unwrap_err();
        assert!(matches!(err, Error::Stage { stage: "integration", .. }));
    }

    #[test]
    fn delta_heuristic_edge_cases() {
        assert_eq!(pi_delta_a_with(0.03, 0.0, |_| Ok(f64::NAN)).unwrap(), 0.0);
        assert!(pi_delta_a_with(0.03, -0.01, Ok).is_err());
        let got = pi_delta_a_with(0.03, 0.01, |r| Ok(5.0 + 2.0 * r + 300.0 * r * r)).unwrap();
        assert!((got - 300.0 * 1e-4).abs() < 1e-12);
    }

    #[test]
    fn stage_errors_are_tagged() {
        let m = calibrate(ModelKind::Bachelier, 0.01, 0.0418, 0.0128, 1.0, None).unwrap();
        let pc = PipelineConfig {
            lattice: LatticeConfig::with_steps(0),
            ..quick()
        };
        let err = pi_a(&equity_put(), &m, RateSlot::R1, &pc).unwrap_err();
        assert_eq!(err.root(), &Error::ZeroSteps);
        assert!(err.to_string().starts_with("fugit:"));
    }
}
