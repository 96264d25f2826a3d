//! Cox-Ross-Rubinstein binomial lattice under flat deterministic rates.
//!
//! Node `(i, j)` sits at time `i·δt` with spot `S₀·u^(2j−i)`, `u = e^{σ√δt}`, `d = 1/u`.
//! The risk-neutral up probability is `q = (e^{(r1−r2)δt} − d)/(u − d)` and each step
//! discounts at `e^{−r1·δt}`. With `σ = 0` the tree collapses to the single deterministic
//! forward path `S₀·e^{(r1−r2)t}`, one node per step.
//!
//! The exercise indicator follows `I(i,j) = 1 ⇔ Φ(S − K) ≥ V_c(i,j)` with ties exercising,
//! restricted to strictly positive payoffs so that nodes with zero continuation and zero
//! intrinsic never count as exercise.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::european;
use crate::option::{OptionSpec, RateSlot, Style};

pub const DEFAULT_STEPS: usize = 2000;

/// Absolute rate bump used by [`rho`].
pub const RHO_BUMP: f64 = 0.01;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct LatticeConfig {
    pub steps: usize,
}

impl Default for LatticeConfig {
    fn default() -> Self {
        Self {
            steps: DEFAULT_STEPS,
        }
    }
}

impl LatticeConfig {
    pub fn with_steps(steps: usize) -> Self {
        Self { steps }
    }
}

/// Shape and transition law of a built lattice.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TreeGeometry {
    pub steps: usize,
    pub dt: f64,
    /// Log step `σ√δt`; zero for the degenerate deterministic path.
    pub log_step: f64,
    /// Per-step drift `(r1 − r2)δt`, used only by the degenerate path.
    pub log_drift: f64,
    pub q: f64,
    pub discount: f64,
    pub spot: f64,
}

impl TreeGeometry {
    pub fn new(spec: &OptionSpec, cfg: &LatticeConfig) -> Result<Self> {
        spec.validate()?;
        if cfg.steps == 0 {
            return Err(Error::ZeroSteps);
        }
        let dt = spec.maturity / cfg.steps as f64;
        let log_drift = (spec.funding_rate - spec.carry_rate) * dt;
        let discount = (-spec.funding_rate * dt).exp();
        if spec.volatility == 0.0 {
            return Ok(Self {
                steps: cfg.steps,
                dt,
                log_step: 0.0,
                log_drift,
                q: 1.0,
                discount,
                spot: spec.spot,
            });
        }
        let log_step = spec.volatility * dt.sqrt();
        let up = log_step.exp();
        let down = 1.0 / up;
        let q = (log_drift.exp() - down) / (up - down);
        if !(0.0..=1.0).contains(&q) {
            return Err(Error::UnstableLattice {
                q,
                sigma: spec.volatility,
                funding_rate: spec.funding_rate,
                carry_rate: spec.carry_rate,
                dt,
            });
        }
        Ok(Self {
            steps: cfg.steps,
            dt,
            log_step,
            log_drift,
            q,
            discount,
            spot: spec.spot,
        })
    }

    #[inline]
    pub fn is_degenerate(&self) -> bool {
        self.log_step == 0.0
    }

    /// Number of nodes at step `i`.
    #[inline]
    pub fn width(&self, i: usize) -> usize {
        if self.is_degenerate() {
            1
        } else {
            i + 1
        }
    }

    #[inline]
    pub fn node_spot(&self, i: usize, j: usize) -> f64 {
        if self.is_degenerate() {
            self.spot * (self.log_drift * i as f64).exp()
        } else {
            self.spot * (self.log_step * (2.0 * j as f64 - i as f64)).exp()
        }
    }

    pub fn time(&self, i: usize) -> f64 {
        i as f64 * self.dt
    }

    /// Spots at every reachable log level, indexed by `steps + 2j − i`.
    fn spot_levels(&self) -> Vec<f64> {
        let n = self.steps as f64;
        (0..=2 * self.steps)
            .map(|k| self.spot * (self.log_step * (k as f64 - n)).exp())
            .collect()
    }

    #[inline]
    fn spot_from(&self, levels: &[f64], i: usize, j: usize) -> f64 {
        if self.is_degenerate() {
            self.node_spot(i, j)
        } else {
            levels[self.steps + 2 * j - i]
        }
    }
}

/// Row-major lower-triangular boolean grid of early-exercise decisions.
#[derive(Debug, Clone, PartialEq)]
pub struct ExerciseGrid {
    geometry: TreeGeometry,
    offsets: Vec<usize>,
    flags: Vec<bool>,
}

impl ExerciseGrid {
    fn new(geometry: TreeGeometry) -> Self {
        let mut offsets = Vec::with_capacity(geometry.steps + 2);
        let mut total = 0;
        for i in 0..=geometry.steps {
            offsets.push(total);
            total += geometry.width(i);
        }
        offsets.push(total);
        Self {
            geometry,
            offsets,
            flags: vec![false; total],
        }
    }

    pub fn geometry(&self) -> &TreeGeometry {
        &self.geometry
    }

    #[inline]
    pub fn is_exercise(&self, i: usize, j: usize) -> bool {
        self.flags[self.offsets[i] + j]
    }

    #[inline]
    fn set(&mut self, i: usize, j: usize, value: bool) {
        let k = self.offsets[i] + j;
        self.flags[k] = value;
    }

    /// Whether any node strictly before maturity is in the exercise region.
    pub fn exercises_before_maturity(&self) -> bool {
        self.flags[..self.offsets[self.geometry.steps]]
            .iter()
            .any(|&f| f)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LatticeResult {
    pub price: f64,
    pub geometry: TreeGeometry,
    /// Present when requested through [`solve_american`].
    pub exercise: Option<ExerciseGrid>,
    /// Continuation values `V_c(i,j)` laid out like the exercise grid, when retained.
    pub continuation: Option<Vec<f64>>,
}

/// What the backward pass keeps besides the root price.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Retention {
    PriceOnly,
    ExerciseGrid,
    Full,
}

fn backward(
    spec: &OptionSpec,
    cfg: &LatticeConfig,
    style: Style,
    retention: Retention,
) -> Result<LatticeResult> {
    let geo = TreeGeometry::new(spec, cfg)?;
    let n = geo.steps;
    let phi = spec.kind.phi();
    let strike = spec.strike;
    let american = style == Style::American;

    let mut grid = (retention != Retention::PriceOnly).then(|| ExerciseGrid::new(geo));
    let mut continuation = match (&grid, retention) {
        (Some(g), Retention::Full) => Some(vec![0.0; g.flags.len()]),
        _ => None,
    };

    let levels = if geo.is_degenerate() {
        Vec::new()
    } else {
        geo.spot_levels()
    };
    let mut values: Vec<f64> = (0..geo.width(n))
        .map(|j| spec.kind.payoff(geo.spot_from(&levels, n, j), strike))
        .collect();

    for i in (0..n).rev() {
        for j in 0..geo.width(i) {
            let cont = if geo.is_degenerate() {
                geo.discount * values[0]
            } else {
                geo.discount * (geo.q * values[j + 1] + (1.0 - geo.q) * values[j])
            };
            if let (Some(c), Some(g)) = (continuation.as_mut(), grid.as_ref()) {
                c[g.offsets[i] + j] = cont;
            }
            values[j] = if american {
                let signed = phi * (geo.spot_from(&levels, i, j) - strike);
                // A zero payoff is never an exercise, even when continuation is also zero.
                let exercise = signed > 0.0 && signed >= cont;
                if let Some(g) = grid.as_mut() {
                    g.set(i, j, exercise);
                }
                if exercise {
                    signed
                } else {
                    cont
                }
            } else {
                cont
            };
        }
    }

    Ok(LatticeResult {
        price: values[0],
        geometry: geo,
        exercise: grid,
        continuation,
    })
}

/// American price only.
pub fn price_american(spec: &OptionSpec, cfg: &LatticeConfig) -> Result<f64> {
    backward(spec, cfg, Style::American, Retention::PriceOnly).map(|r| r.price)
}

/// American price with the exercise indicator grid (and optionally continuation values).
pub fn solve_american(
    spec: &OptionSpec,
    cfg: &LatticeConfig,
    retention: Retention,
) -> Result<LatticeResult> {
    backward(spec, cfg, Style::American, retention)
}

/// Same recursion without the exercise max.
pub fn price_european_lattice(spec: &OptionSpec, cfg: &LatticeConfig) -> Result<f64> {
    backward(spec, cfg, Style::European, Retention::PriceOnly).map(|r| r.price)
}

/// Price in the given style: lattice for American, closed form for European.
pub fn price_style(spec: &OptionSpec, cfg: &LatticeConfig, style: Style) -> Result<f64> {
    match style {
        Style::American => price_american(spec, cfg),
        Style::European => european::price_european_closed(spec).map(|p| p.value),
    }
}

/// Mean absolute move for a ±[`RHO_BUMP`] shift of one rate:
/// `(|O(r+0.01) − O(r)| + |O(r−0.01) − O(r)|) / 2`.
///
/// This is a per-1% move, not a derivative. American values come from the lattice,
/// European values from the closed form.
pub fn rho(spec: &OptionSpec, cfg: &LatticeConfig, style: Style, slot: RateSlot) -> Result<f64> {
    let r = spec.rate(slot);
    let base = price_style(spec, cfg, style)?;
    let up = price_style(&spec.with_rate(slot, r + RHO_BUMP), cfg, style)?;
    let down = price_style(&spec.with_rate(slot, r - RHO_BUMP), cfg, style)?;
    Ok(((up - base).abs() + (down - base).abs()) / 2.0)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::option::OptionKind;

    fn equity_put(spot: f64) -> OptionSpec {
        OptionSpec {
            spot,
            strike: 100.0,
            maturity: 1.0,
            volatility: 0.4,
            funding_rate: 0.01,
            carry_rate: 0.0,
            kind: OptionKind::Put,
        }
    }

    #[test]
    fn zero_vol_zero_rate_put_is_intrinsic() {
        let mut s = equity_put(50.0);
        s.volatility = 0.0;
        s.funding_rate = 0.0;
        for t in [0.25, 1.0, 3.0] {
            s.maturity = t;
            let cfg = LatticeConfig::default();
            assert_eq!(price_american(&s, &cfg).unwrap(), 50.0);
        }
        s.spot = 80.0;
        assert!((price_european_lattice(&s, &LatticeConfig::default()).unwrap() - 20.0).abs() < 1e-12);
    }

    #[test]
    fn refinement_converges() {
        let s = equity_put(100.0);
        let p: Vec<f64> = [500, 1000, 2000]
            .iter()
            .map(|&n| price_american(&s, &LatticeConfig::with_steps(n)).unwrap())
            .collect();
        assert!((p[0] - p[1]).abs() < 0.01, "{p:?}");
        assert!((p[1] - p[2]).abs() < 0.01, "{p:?}");
    }

    #[test]
    fn european_lattice_parity() {
        let cfg = LatticeConfig::default();
        let put = OptionSpec {
            funding_rate: 0.03,
            carry_rate: 0.01,
            ..equity_put(95.0)
        };
        let call = OptionSpec {
            kind: OptionKind::Call,
            ..put
        };
        let c = price_european_lattice(&call, &cfg).unwrap();
        let p = price_european_lattice(&put, &cfg).unwrap();
        let parity = put.spot * (-put.carry_rate).exp() - put.strike * (-put.funding_rate).exp();
        assert!((c - p - parity).abs() < 0.005, "{}", c - p - parity);
    }

    #[test]
    fn unstable_lattice_is_reported() {
        let s = OptionSpec {
            volatility: 0.001,
            funding_rate: 0.2,
            ..equity_put(100.0)
        };
        match price_american(&s, &LatticeConfig::with_steps(10)) {
            Err(Error::UnstableLattice { q, sigma, .. }) => {
                assert!(q > 1.0);
                assert_eq!(sigma, 0.001);
            }
            other => panic!("expected instability, got {other:?}"),
        }
    }

    #[test]
    fn zero_steps_rejected() {
        assert_eq!(
            price_american(&equity_put(100.0), &LatticeConfig::with_steps(0)),
            Err(Error::ZeroSteps)
        );
    }

    #[test]
    fn exercise_nodes_hold_intrinsic() {
        let s = equity_put(100.0);
        let res = solve_american(&s, &LatticeConfig::with_steps(200), Retention::Full).unwrap();
        let grid = res.exercise.as_ref().unwrap();
        let cont = res.continuation.as_ref().unwrap();
        let geo = res.geometry;
        let mut seen = 0;
        for i in 0..geo.steps {
            for j in 0..geo.width(i) {
                let c = cont[grid.offsets[i] + j];
                let intrinsic = s.kind.payoff(geo.node_spot(i, j), s.strike);
                if grid.is_exercise(i, j) {
                    seen += 1;
                    assert!(intrinsic >= c);
                    assert!(intrinsic > 0.0);
                } else {
                    assert!(s.kind.phi() * (geo.node_spot(i, j) - s.strike) < c);
                }
            }
        }
        assert!(seen > 0);
        assert!(res.price >= s.intrinsic());
    }

    #[test]
    fn put_monotone_in_spot_call_opposite() {
        let cfg = LatticeConfig::with_steps(400);
        let mut last_put = f64::INFINITY;
        let mut last_call = f64::NEG_INFINITY;
        for k in 0..13 {
            let s = 70.0 + 5.0 * k as f64;
            let put = price_american(&equity_put(s), &cfg).unwrap();
            let call = price_american(
                &OptionSpec {
                    kind: OptionKind::Call,
                    carry_rate: 0.05,
                    ..equity_put(s)
                },
                &cfg,
            )
            .unwrap();
            assert!(put <= last_put + 1e-12);
            assert!(call >= last_call - 1e-12);
            last_put = put;
            last_call = call;
        }
    }

    #[test]
    fn deep_itm_zero_vol_rho_vanishes() {
        // Positive drift keeps immediate exercise optimal under every bump.
        let s = OptionSpec {
            volatility: 0.0,
            funding_rate: 0.05,
            ..equity_put(50.0)
        };
        let cfg = LatticeConfig::default();
        for slot in [RateSlot::R1, RateSlot::R2] {
            assert_eq!(rho(&s, &cfg, Style::American, slot).unwrap(), 0.0);
        }
    }

    #[test]
    fn degenerate_path_discounts_forward() {
        let s = OptionSpec {
            spot: 140.0,
            volatility: 0.0,
            funding_rate: 0.0,
            carry_rate: 0.2,
            kind: OptionKind::Call,
            ..equity_put(140.0)
        };
        let cfg = LatticeConfig::with_steps(100);
        let euro = price_european_lattice(&s, &cfg).unwrap();
        assert!((euro - (140.0 * (-0.2f64).exp() - 100.0)).abs() < 1e-9);
        assert_eq!(price_american(&s, &cfg).unwrap(), 40.0);
    }
}
