//! Short-rate dynamics calibrated by matching the mean and standard deviation of
//! the rate at a horizon, with exact marginal laws at any time.
//!
//! * Bachelier: `dr = μ dt + σ dW`, `r_t ~ N(r0 + μt, σ²t)`.
//! * Vasicek: `dr = κ(θ − r) dt + σ dW`, mean `θ + (r0 − θ)e^{−κt}`,
//!   variance `σ²(1 − e^{−2κt})/(2κ)`.
//! * Lognormal: `dr/r = μ dt + σ dW`, `r_t = r0·exp((μ − σ²/2)t + σ√t Z)`, so `E[r_t] = r0·e^{μt}`.
//!   Calibration matches that mean exactly; the `−σ²/2` lives in the exponent.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Mean-reversion speed used when none is supplied.
pub const DEFAULT_KAPPA: f64 = 0.5;

/// Initial rate, target mean and target standard deviation shipped as the base calibration.
pub const DEFAULT_R0: f64 = 0.01;
pub const DEFAULT_R_BAR: f64 = 0.0418;
pub const DEFAULT_SIGMA_R: f64 = 0.0128;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ModelKind {
    Bachelier,
    Vasicek,
    Lognormal,
}

impl ModelKind {
    pub fn name(self) -> &'static str {
        match self {
            ModelKind::Bachelier => "bachelier",
            ModelKind::Vasicek => "vasicek",
            ModelKind::Lognormal => "lognormal",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum Dynamics {
    Bachelier { drift: f64, diffusion: f64 },
    Vasicek { kappa: f64, theta: f64, diffusion: f64 },
    Lognormal { drift: f64, diffusion: f64 },
}

/// A calibrated short-rate model together with the targets it was fitted to.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RateModel {
    pub dynamics: Dynamics,
    pub r0: f64,
    /// Calibration horizon; marginals past it are extrapolations.
    pub horizon: f64,
    pub target_mean: f64,
    pub target_sd: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Family {
    Normal,
    Lognormal,
}

/// Marginal law of the rate at one horizon.
///
/// `Normal`: `r = location + scale·Z`. `Lognormal`: `ln r = location + scale·Z`.
/// `scale == 0` is a point mass.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MarginalLaw {
    pub family: Family,
    pub location: f64,
    pub scale: f64,
    pub horizon: f64,
}

impl MarginalLaw {
    pub fn point_mass(rate: f64, horizon: f64) -> Self {
        Self {
            family: Family::Normal,
            location: rate,
            scale: 0.0,
            horizon,
        }
    }

    #[inline]
    pub fn is_point_mass(&self) -> bool {
        self.scale == 0.0
    }

    /// Maps a standard normal draw to a rate.
    #[inline]
    pub fn rate_at(&self, z: f64) -> f64 {
        match self.family {
            Family::Normal => self.location + self.scale * z,
            Family::Lognormal => (self.location + self.scale * z).exp(),
        }
    }

    pub fn mean(&self) -> f64 {
        match self.family {
            Family::Normal => self.location,
            Family::Lognormal => (self.location + 0.5 * self.scale * self.scale).exp(),
        }
    }

    pub fn sd(&self) -> f64 {
        match self.family {
            Family::Normal => self.scale,
            Family::Lognormal => {
                let s2 = self.scale * self.scale;
                self.mean() * s2.exp_m1().sqrt()
            }
        }
    }

    /// `E|r − E r|`.
    pub fn mean_abs_deviation(&self) -> f64 {
        match self.family {
            Family::Normal => self.scale * (2.0 / std::f64::consts::PI).sqrt(),
            Family::Lognormal => {
                // 2m(2Φ(s/2) − 1) = 2m·erf(s/(2√2))
                2.0 * self.mean() * libm::erf(self.scale / (2.0 * std::f64::consts::SQRT_2))
            }
        }
    }
}

fn check_finite(values: &[(f64, &'static str)]) -> Result<()> {
    for &(v, name) in values {
        if !v.is_finite() {
            return Err(Error::NonFinite(name));
        }
    }
    Ok(())
}

/// Moment-matched calibration so that the marginal at `horizon` has mean `target_mean`
/// and standard deviation `target_sd`. `kappa` is used by Vasicek only.
pub fn calibrate(
    kind: ModelKind,
    r0: f64,
    target_mean: f64,
    target_sd: f64,
    horizon: f64,
    kappa: Option<f64>,
) -> Result<RateModel> {
    check_finite(&[
        (r0, "r0"),
        (target_mean, "r_bar"),
        (target_sd, "sigma_r"),
        (horizon, "horizon"),
    ])?;
    if target_sd < 0.0 {
        return Err(Error::Calibration(format!(
            "target standard deviation must be >= 0, got {target_sd}"
        )));
    }
    if horizon <= 0.0 {
        return Err(Error::Calibration(format!(
            "calibration horizon must be > 0, got {horizon}"
        )));
    }
    let dynamics = match kind {
        ModelKind::Bachelier => Dynamics::Bachelier {
            drift: (target_mean - r0) / horizon,
            diffusion: target_sd / horizon.sqrt(),
        },
        ModelKind::Vasicek => {
            let kappa = kappa.unwrap_or(DEFAULT_KAPPA);
            if !kappa.is_finite() || kappa <= 0.0 {
                return Err(Error::Calibration(format!(
                    "Vasicek mean reversion must be > 0, got {kappa}"
                )));
            }
            let decay = (-kappa * horizon).exp();
            let theta = (target_mean - r0 * decay) / (1.0 - decay);
            let var_factor = -(-2.0 * kappa * horizon).exp_m1() / (2.0 * kappa);
            Dynamics::Vasicek {
                kappa,
                theta,
                diffusion: target_sd / var_factor.sqrt(),
            }
        }
        ModelKind::Lognormal => {
            if r0 <= 0.0 {
                return Err(Error::Calibration(format!(
                    "lognormal rates need r0 > 0, got {r0}"
                )));
            }
            if target_mean <= 0.0 {
                return Err(Error::Calibration(format!(
                    "lognormal rates need a positive target mean, got {target_mean}"
                )));
            }
            let ratio = target_sd / target_mean;
            Dynamics::Lognormal {
                drift: (target_mean / r0).ln() / horizon,
                diffusion: ((ratio * ratio).ln_1p() / horizon).sqrt(),
            }
        }
    };
    Ok(RateModel {
        dynamics,
        r0,
        horizon,
        target_mean,
        target_sd,
    })
}

impl RateModel {
    pub fn kind(&self) -> ModelKind {
        match self.dynamics {
            Dynamics::Bachelier { .. } => ModelKind::Bachelier,
            Dynamics::Vasicek { .. } => ModelKind::Vasicek,
            Dynamics::Lognormal { .. } => ModelKind::Lognormal,
        }
    }

    /// Exact marginal of `r_t`. Negative `t` is treated as zero.
    pub fn marginal_at(&self, t: f64) -> MarginalLaw {
        if t > self.horizon * (1.0 + 1e-12) {
            log::warn!(
                "rate marginal requested at t = {t} beyond calibration horizon {}",
                self.horizon
            );
        }
        let t = t.max(0.0);
        match self.dynamics {
            Dynamics::Bachelier { drift, diffusion } => MarginalLaw {
                family: Family::Normal,
                location: self.r0 + drift * t,
                scale: diffusion * t.sqrt(),
                horizon: t,
            },
            Dynamics::Vasicek {
                kappa,
                theta,
                diffusion,
            } => {
                let var = diffusion * diffusion * -(-2.0 * kappa * t).exp_m1() / (2.0 * kappa);
                MarginalLaw {
                    family: Family::Normal,
                    location: theta + (self.r0 - theta) * (-kappa * t).exp(),
                    scale: var.sqrt(),
                    horizon: t,
                }
            }
            Dynamics::Lognormal { drift, diffusion } => MarginalLaw {
                family: Family::Lognormal,
                location: self.r0.ln() + (drift - 0.5 * diffusion * diffusion) * t,
                scale: diffusion * t.sqrt(),
                horizon: t,
            },
        }
    }

    /// First moment of the marginal, in closed form.
    pub fn mean_at(&self, t: f64) -> f64 {
        let t = t.max(0.0);
        match self.dynamics {
            Dynamics::Bachelier { drift, .. } => self.r0 + drift * t,
            Dynamics::Vasicek { kappa, theta, .. } => theta + (self.r0 - theta) * (-kappa * t).exp(),
            Dynamics::Lognormal { drift, .. } => self.r0 * (drift * t).exp(),
        }
    }

    /// Diffusion coefficient of the calibrated SDE.
    pub fn diffusion(&self) -> f64 {
        match self.dynamics {
            Dynamics::Bachelier { diffusion, .. }
            | Dynamics::Vasicek { diffusion, .. }
            | Dynamics::Lognormal { diffusion, .. } => diffusion,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn close(a: f64, b: f64, tol: f64) -> bool {
        (a - b).abs() <= tol
    }

    #[test]
    fn bachelier_base_calibration() {
        let m = calibrate(ModelKind::Bachelier, 0.01, 0.0418, 0.0128, 1.0, None).unwrap();
        match m.dynamics {
            Dynamics::Bachelier { drift, diffusion } => {
                assert!(close(drift, 0.0318, 1e-15));
                assert!(close(diffusion, 0.0128, 1e-15));
            }
            _ => unreachable!(),
        }
        let tau = 8.8781 / 12.0;
        let law = m.marginal_at(tau);
        assert!(close(law.mean(), 0.01 + 0.0318 * tau, 1e-15));
        assert!(close(law.sd(), 0.0128 * tau.sqrt(), 1e-15));
        assert!(close(m.mean_at(0.73984), 0.033527, 5e-7));
    }

    #[test]
    fn zero_sd_is_point_mass() {
        for kind in [ModelKind::Bachelier, ModelKind::Vasicek, ModelKind::Lognormal] {
            let m = calibrate(kind, 0.01, 0.0418, 0.0, 1.0, None).unwrap();
            let law = m.marginal_at(1.0);
            assert!(law.is_point_mass(), "{kind:?}");
            assert!(close(law.rate_at(3.0), 0.0418, 1e-15), "{kind:?}");
            let t = 0.4;
            assert!(close(m.marginal_at(t).rate_at(-2.0), m.mean_at(t), 1e-15));
        }
    }

    #[test]
    fn zero_horizon_is_r0() {
        for kind in [ModelKind::Bachelier, ModelKind::Vasicek, ModelKind::Lognormal] {
            let m = calibrate(kind, 0.01, 0.0418, 0.0128, 1.0, None).unwrap();
            let law = m.marginal_at(0.0);
            assert!(law.is_point_mass());
            assert!(close(law.mean(), 0.01, 1e-15), "{kind:?}");
        }
    }

    #[test]
    fn lognormal_round_trip() {
        let m = calibrate(ModelKind::Lognormal, 0.01, 0.0418, 0.0128, 1.0, None).unwrap();
        let law = m.marginal_at(1.0);
        assert!(close(law.mean(), 0.0418, 1e-12));
        assert!(close(law.sd(), 0.0128, 1e-12));
        assert!(close(m.mean_at(1.0), 0.0418, 1e-15));
    }

    #[test]
    fn vasicek_mean_reverts_to_theta() {
        let m = calibrate(ModelKind::Vasicek, 0.01, 0.0418, 0.0128, 1.0, Some(0.5)).unwrap();
        let Dynamics::Vasicek {
            theta, diffusion, kappa, ..
        } = m.dynamics
        else {
            unreachable!()
        };
        assert!(close(m.mean_at(200.0), theta, 1e-15));
        let cap = diffusion / (2.0 * kappa).sqrt();
        let mut last = 0.0;
        for k in 0..50 {
            let sd = m.marginal_at(k as f64 * 0.5).sd();
            assert!(sd >= last && sd <= cap);
            last = sd;
        }
    }

    #[test]
    fn infeasible_inputs_rejected() {
        assert!(matches!(
            calibrate(ModelKind::Lognormal, 0.0, 0.04, 0.01, 1.0, None),
            Err(Error::Calibration(_))
        ));
        assert!(matches!(
            calibrate(ModelKind::Lognormal, 0.01, -0.01, 0.01, 1.0, None),
            Err(Error::Calibration(_))
        ));
        assert!(calibrate(ModelKind::Bachelier, 0.01, 0.04, -0.01, 1.0, None).is_err());
        assert!(calibrate(ModelKind::Vasicek, 0.01, 0.04, 0.01, 1.0, Some(0.0)).is_err());
        assert!(calibrate(ModelKind::Bachelier, 0.01, 0.04, 0.01, 0.0, None).is_err());
        assert_eq!(
            calibrate(ModelKind::Bachelier, f64::NAN, 0.04, 0.01, 1.0, None),
            Err(Error::NonFinite("r0"))
        );
    }

    #[test]
    fn mean_abs_deviation_matches_gaussian_formula() {
        let law = MarginalLaw {
            family: Family::Normal,
            location: 0.03,
            scale: 0.01,
            horizon: 1.0,
        };
        assert!(close(law.mean_abs_deviation(), 0.01 * (2.0 / std::f64::consts::PI).sqrt(), 1e-16));
    }
}
