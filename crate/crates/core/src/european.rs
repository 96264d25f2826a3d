//! Closed-form European prices with a continuous carry (Garman-Kohlhagen form) and
//! their expectation over a stochastic rate.

use serde::Serialize;

use crate::error::Result;
use crate::integrator::{self, StochasticPriceResult};
use crate::option::{OptionSpec, RateSlot};
use crate::quadrature::QuadratureRule;
use crate::rates::RateModel;

/// Standard normal CDF through `erfc`, accurate to a few ulps.
#[inline]
pub fn norm_cdf(x: f64) -> f64 {
    0.5 * libm::erfc(-x / std::f64::consts::SQRT_2)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct EuropeanPrice {
    pub value: f64,
    /// `None` in the zero-variance limit.
    pub d1: Option<f64>,
    pub d2: Option<f64>,
}

/// `Φ·(S e^{−r2 T} N(Φ d1) − K e^{−r1 T} N(Φ d2))` with forward `F = S e^{(r1−r2)T}`.
/// Zero volatility returns the discounted forward intrinsic.
pub fn price_european_closed(spec: &OptionSpec) -> Result<EuropeanPrice> {
    spec.validate()?;
    let t = spec.maturity;
    let phi = spec.kind.phi();
    let df_carry = (-spec.carry_rate * t).exp();
    let df_fund = (-spec.funding_rate * t).exp();
    let vol_t = spec.volatility * t.sqrt();
    if vol_t == 0.0 {
        let forward = spec.spot * df_carry / df_fund;
        return Ok(EuropeanPrice {
            value: df_fund * (phi * (forward - spec.strike)).max(0.0),
            d1: None,
            d2: None,
        });
    }
    let d1 = ((spec.spot / spec.strike).ln()
        + (spec.funding_rate - spec.carry_rate + 0.5 * spec.volatility * spec.volatility) * t)
        / vol_t;
    let d2 = d1 - vol_t;
    let value = phi
        * (spec.spot * df_carry * norm_cdf(phi * d1) - spec.strike * df_fund * norm_cdf(phi * d2));
    Ok(EuropeanPrice {
        value: value.max(0.0),
        d1: Some(d1),
        d2: Some(d2),
    })
}

/// European value averaged over the rate's marginal at contract maturity.
pub fn stochastic_european(
    spec: &OptionSpec,
    model: &RateModel,
    slot: RateSlot,
    rule: &QuadratureRule,
) -> Result<StochasticPriceResult> {
    let law = model.marginal_at(spec.maturity);
    let spec = *spec;
    integrator::integrate_law_with(&law, rule, |r| {
        price_european_closed(&spec.with_rate(slot, r)).map(|p| p.value)
    })
}
