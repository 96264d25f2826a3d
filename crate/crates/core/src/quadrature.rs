//! Gauss-Hermite rules for the weight `e^{−x²}` on `(−∞, ∞)`.
//!
//! Nodes are the roots of the physicists' Hermite polynomial `H_m`, found by Newton
//! iteration on the orthonormal recurrence
//! `h_{k+1} = x·√(2/(k+1))·h_k − √(k/(k+1))·h_{k−1}`, `h_0 = π^{−1/4}`,
//! which stays in range for large orders. Weights are `2 / h_m'(x)²`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const DEFAULT_ORDER: usize = 20;

const PI_M4: f64 = 0.751_125_544_464_942_5; // π^{-1/4}
const MAX_NEWTON: usize = 100;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QuadratureRule {
    order: usize,
    nodes: Vec<f64>,
    weights: Vec<f64>,
}

/// Value of the orthonormal `h_m(x)` and of `h_{m−1}(x)`.
fn orthonormal_hermite(m: usize, x: f64) -> (f64, f64) {
    let mut p1 = PI_M4;
    let mut p2 = 0.0;
    for j in 0..m {
        let p3 = p2;
        p2 = p1;
        let jf = j as f64;
        p1 = x * (2.0 / (jf + 1.0)).sqrt() * p2 - (jf / (jf + 1.0)).sqrt() * p3;
    }
    (p1, p2)
}

impl QuadratureRule {
    pub fn gauss_hermite(order: usize) -> Result<Self> {
        if order == 0 {
            return Err(Error::QuadratureOrder);
        }
        let m = order;
        let mf = m as f64;
        let half = m.div_ceil(2);
        let mut nodes = vec![0.0; m];
        let mut weights = vec![0.0; m];
        let mut z = 0.0;
        for i in 0..half {
            // Initial guesses for the i-th largest root.
            z = match i {
                0 => (2.0 * mf + 1.0).sqrt() - 1.855_75 * (2.0 * mf + 1.0).powf(-0.166_67),
                1 => z - 1.14 * mf.powf(0.426) / z,
                2 => 1.86 * z - 0.86 * nodes[0],
                3 => 1.91 * z - 0.91 * nodes[1],
                _ => 2.0 * z - nodes[i - 2],
            };
            for _ in 0..MAX_NEWTON {
                let (p, prev) = orthonormal_hermite(m, z);
                let step = p / ((2.0 * mf).sqrt() * prev);
                z -= step;
                if step.abs() <= 1e-15 * z.abs().max(1.0) {
                    break;
                }
            }
            // h_m'(x) = √(2m)·h_{m−1}(x), evaluated at the converged root.
            let derivative = (2.0 * mf).sqrt() * orthonormal_hermite(m, z).1;
            nodes[i] = z;
            nodes[m - 1 - i] = -z;
            let w = 2.0 / (derivative * derivative);
            weights[i] = w;
            weights[m - 1 - i] = w;
        }
        if m % 2 == 1 {
            nodes[m / 2] = 0.0;
        }
        // Ascending node order.
        nodes.reverse();
        weights.reverse();
        Ok(Self {
            order,
            nodes,
            weights,
        })
    }

    pub fn order(&self) -> usize {
        self.order
    }

    pub fn nodes(&self) -> &[f64] {
        &self.nodes
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    /// `∫ e^{−x²} f(x) dx`.
    pub fn integrate(&self, f: impl Fn(f64) -> f64) -> f64 {
        self.nodes
            .iter()
            .zip(&self.weights)
            .map(|(&x, &w)| w * f(x))
            .sum()
    }

    /// Standard-normal draws `z_i = √2·x_i` paired with probability weights `w_i/√π`.
    pub fn standard_normal_points(&self) -> impl Iterator<Item = (f64, f64)> + '_ {
        let norm = std::f64::consts::PI.sqrt().recip();
        self.nodes
            .iter()
            .zip(&self.weights)
            .map(move |(&x, &w)| (std::f64::consts::SQRT_2 * x, w * norm))
    }

    /// `E[f(Z)]` for `Z ~ N(0, 1)`.
    pub fn expect_standard_normal(&self, f: impl Fn(f64) -> f64) -> f64 {
        self.standard_normal_points().map(|(z, p)| p * f(z)).sum()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    #[test]
    fn order_zero_rejected() {
        assert_eq!(QuadratureRule::gauss_hermite(0), Err(Error::QuadratureOrder));
    }

    #[test]
    fn weights_sum_to_sqrt_pi() {
        for m in [1, 2, 3, 4, 5, 10, 20, 40, 80] {
            let r = QuadratureRule::gauss_hermite(m).unwrap();
            let s: f64 = r.weights().iter().sum();
            assert!((s - PI.sqrt()).abs() < 1e-12, "m={m}: {s}");
            assert!(r.weights().iter().all(|&w| w > 0.0));
            assert!(r.nodes().windows(2).all(|w| w[0] < w[1]), "m={m}");
        }
    }

    #[test]
    fn reproduces_gaussian_moments() {
        // E[Z^p] for Z ~ N(0,1): 0 for odd p, (p-1)!! for even p.
        let moments = [1.0, 0.0, 1.0, 0.0, 3.0, 0.0, 15.0];
        for m in [4, 5, 20, 40] {
            let r = QuadratureRule::gauss_hermite(m).unwrap();
            for (p, &want) in moments.iter().enumerate() {
                let got = r.expect_standard_normal(|z| z.powi(p as i32));
                assert!((got - want).abs() < 1e-12, "m={m} p={p}: {got}");
            }
        }
    }

    #[test]
    fn small_orders_match_closed_forms() {
        let r2 = QuadratureRule::gauss_hermite(2).unwrap();
        assert!((r2.nodes()[1] - 0.5f64.sqrt()).abs() < 1e-15);
        assert!((r2.weights()[0] - PI.sqrt() / 2.0).abs() < 1e-15);
        let r3 = QuadratureRule::gauss_hermite(3).unwrap();
        assert!((r3.nodes()[2] - 1.5f64.sqrt()).abs() < 1e-15);
        assert!((r3.weights()[1] - 2.0 * PI.sqrt() / 3.0).abs() < 1e-15);
    }

    #[test]
    fn integrates_cosine() {
        let r = QuadratureRule::gauss_hermite(20).unwrap();
        let got = r.integrate(f64::cos);
        assert!((got - PI.sqrt() * (-0.25f64).exp()).abs() < 1e-14);
    }
}
