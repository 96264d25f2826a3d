//! Contract terms shared by every pricer.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Call or put. The sign convention `Φ = ±1` is exposed through [`OptionKind::phi`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum OptionKind {
    Call,
    Put,
}

impl OptionKind {
    #[inline]
    pub fn phi(self) -> f64 {
        match self {
            OptionKind::Call => 1.0,
            OptionKind::Put => -1.0,
        }
    }

    /// Intrinsic value `max(Φ(S − K), 0)`.
    #[inline]
    pub fn payoff(self, spot: f64, strike: f64) -> f64 {
        (self.phi() * (spot - strike)).max(0.0)
    }
}

/// Exercise style.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Style {
    American,
    European,
}

/// Which rate slot of an [`OptionSpec`] a sensitivity or a stochastic model refers to.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum RateSlot {
    /// Funding (domestic, discounting) rate.
    R1,
    /// Carry rate: foreign rate or continuous dividend yield.
    R2,
}

/// Contract terms for a vanilla option on an underlying with a continuous carry.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OptionSpec {
    pub spot: f64,
    pub strike: f64,
    /// Years.
    pub maturity: f64,
    pub volatility: f64,
    pub funding_rate: f64,
    pub carry_rate: f64,
    pub kind: OptionKind,
}

impl OptionSpec {
    pub fn validate(&self) -> Result<()> {
        let fields = [
            (self.spot, "spot"),
            (self.strike, "strike"),
            (self.maturity, "maturity"),
            (self.volatility, "volatility"),
            (self.funding_rate, "funding_rate"),
            (self.carry_rate, "carry_rate"),
        ];
        for (value, name) in fields {
            if !value.is_finite() {
                return Err(Error::NonFinite(name));
            }
        }
        if self.spot <= 0.0 {
            return Err(Error::InvalidSpec(format!("spot must be > 0, got {}", self.spot)));
        }
        if self.strike <= 0.0 {
            return Err(Error::InvalidSpec(format!(
                "strike must be > 0, got {}",
                self.strike
            )));
        }
        if self.maturity <= 0.0 {
            return Err(Error::InvalidSpec(format!(
                "maturity must be > 0, got {}",
                self.maturity
            )));
        }
        if self.volatility < 0.0 {
            return Err(Error::InvalidSpec(format!(
                "volatility must be >= 0, got {}",
                self.volatility
            )));
        }
        Ok(())
    }

    pub fn intrinsic(&self) -> f64 {
        self.kind.payoff(self.spot, self.strike)
    }

    pub fn rate(&self, slot: RateSlot) -> f64 {
        match slot {
            RateSlot::R1 => self.funding_rate,
            RateSlot::R2 => self.carry_rate,
        }
    }

    /// Copy of the spec with one rate slot replaced.
    #[must_use]
    pub fn with_rate(mut self, slot: RateSlot, rate: f64) -> Self {
        match slot {
            RateSlot::R1 => self.funding_rate = rate,
            RateSlot::R2 => self.carry_rate = rate,
        }
        self
    }

    #[must_use]
    pub fn with_rates(mut self, funding_rate: f64, carry_rate: f64) -> Self {
        self.funding_rate = funding_rate;
        self.carry_rate = carry_rate;
        self
    }

    #[must_use]
    pub fn with_spot(mut self, spot: f64) -> Self {
        self.spot = spot;
        self
    }
}
