//! Deterministic American-versus-European comparisons after a rate shock.
//!
//! All three run at zero volatility so each value is a discounted intrinsic that can be
//! checked by hand. The reference numbers quoted alongside use simple annual
//! discounting (`40/1.1 = 36.36`); the engine discounts continuously (`40·e^{−0.1} = 36.19`).

use serde::Serialize;

use crate::error::Result;
use crate::european::price_european_closed;
use crate::lattice::{price_american, LatticeConfig};
use crate::option::{OptionKind, OptionSpec};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum Case {
    /// Spot rallies to 140 and both rates move to 10%: the forward stays at 140.
    Case1,
    /// Forward marked down to 126 by the rate move; the call is on the forward.
    Case1B,
    /// Domestic rate 0, foreign rate jumps to 20%: the forward drops well below spot.
    Case2,
}

impl Case {
    pub const ALL: [Case; 3] = [Case::Case1, Case::Case1B, Case::Case2];

    pub fn name(self) -> &'static str {
        match self {
            Case::Case1 => "case1",
            Case::Case1B => "case1b",
            Case::Case2 => "case2",
        }
    }

    pub fn spec(self) -> OptionSpec {
        let base = OptionSpec {
            spot: 140.0,
            strike: 100.0,
            maturity: 1.0,
            volatility: 0.0,
            funding_rate: 0.10,
            carry_rate: 0.10,
            kind: OptionKind::Call,
        };
        match self {
            Case::Case1 => base,
            Case::Case1B => OptionSpec { spot: 126.0, ..base },
            Case::Case2 => OptionSpec {
                funding_rate: 0.0,
                carry_rate: 0.20,
                ..base
            },
        }
    }

    /// Hand-computed (American, European) values the case is usually quoted with.
    pub fn reference(self) -> (f64, f64) {
        match self {
            Case::Case1 => (40.0, 36.36),
            Case::Case1B => (26.0, 23.64),
            Case::Case2 => (40.0, 16.0),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct CaseReport {
    pub case: Case,
    pub spec: OptionSpec,
    pub american: f64,
    pub european: f64,
    pub reference_american: f64,
    pub reference_european: f64,
}

pub fn run_case(case: Case, cfg: &LatticeConfig) -> Result<CaseReport> {
    let spec = case.spec();
    let (reference_american, reference_european) = case.reference();
    Ok(CaseReport {
        case,
        spec,
        american: price_american(&spec, cfg)?,
        european: price_european_closed(&spec)?.value,
        reference_american,
        reference_european,
    })
}

pub fn run_cases(cfg: &LatticeConfig) -> Result<Vec<CaseReport>> {
    Case::ALL.iter().map(|&c| run_case(c, cfg)).collect()
}
