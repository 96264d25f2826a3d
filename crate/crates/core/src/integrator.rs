//! Expectations of deterministic-rate prices over rate marginals.
//!
//! Every integral here is a Gauss-Hermite sum in the generating standard normal of the
//! marginal: Gaussian laws map `z ↦ m + s·z`, lognormal laws map `z ↦ exp(m + s·z)`.
//! Each node prices the option with the sampled rate held flat over its whole life.
//!
//! Node prices may be computed in parallel; sums are always reduced serially in node
//! order so the result does not depend on the worker count.

use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::fugit::{StoppingDistribution, DEFAULT_COMPACTION};
use crate::lattice::{self, LatticeConfig};
use crate::option::{OptionSpec, RateSlot};
use crate::quadrature::QuadratureRule;
use crate::rates::{MarginalLaw, RateModel};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, serde::Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    SingleFugit,
    FullDistribution,
    TwoRate,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct NodeDiagnostic {
    /// Index of the stopping-time atom (0 for single-horizon integrals).
    pub atom: usize,
    pub index: usize,
    pub time: f64,
    pub rate: f64,
    /// Second rate for two-rate integrals.
    pub rate2: Option<f64>,
    /// Total probability weight of the node, atom mass included.
    pub weight: f64,
    pub price: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct StochasticPriceResult {
    pub value: f64,
    pub method: Method,
    pub node_evaluations: usize,
    pub diagnostics: Vec<NodeDiagnostic>,
}

impl StochasticPriceResult {
    /// `index,atom,time,rate,rate2,weight,price` rows with a header.
    pub fn diagnostics_csv(&self) -> String {
        let mut out = String::from("index,atom,time_years,rate,rate2,weight,price\n");
        for d in &self.diagnostics {
            let rate2 = d.rate2.map(|r| format!("{r:.10}")).unwrap_or_default();
            out.push_str(&format!(
                "{},{},{:.10},{:.10},{},{:.12e},{:.10}\n",
                d.index, d.atom, d.time, d.rate, rate2, d.weight, d.price
            ));
        }
        out
    }
}

/// Probability-weighted standard-normal points of a law: a single unit point for a point mass.
fn law_points(law: &MarginalLaw, rule: &QuadratureRule) -> Vec<(f64, f64)> {
    if law.is_point_mass() {
        vec![(0.0, 1.0)]
    } else {
        rule.standard_normal_points().collect()
    }
}

struct Node {
    atom: usize,
    index: usize,
    time: f64,
    rate: f64,
    rate2: Option<f64>,
    weight: f64,
}

fn evaluate<F>(nodes: Vec<Node>, atom_count: usize, method: Method, pricer: F) -> Result<StochasticPriceResult>
where
    F: Fn(f64, Option<f64>) -> Result<f64> + Sync,
{
    let prices: Vec<Result<f64>> = nodes
        .par_iter()
        .map(|n| {
            pricer(n.rate, n.rate2).map_err(|e| Error::Node {
                rate: n.rate,
                source: Box::new(e),
            })
        })
        .collect();

    let mut per_atom = vec![0.0; atom_count];
    let mut diagnostics = Vec::with_capacity(nodes.len());
    for (node, price) in nodes.iter().zip(prices) {
        let price = price?;
        per_atom[node.atom] += node.weight * price;
        diagnostics.push(NodeDiagnostic {
            atom: node.atom,
            index: node.index,
            time: node.time,
            rate: node.rate,
            rate2: node.rate2,
            weight: node.weight,
            price,
        });
    }
    let value = per_atom.iter().sum();
    Ok(StochasticPriceResult {
        value,
        method,
        node_evaluations: nodes.len(),
        diagnostics,
    })
}

/// `E[f(r)]` for `r` drawn from `law`.
pub fn integrate_law_with<F>(law: &MarginalLaw, rule: &QuadratureRule, f: F) -> Result<StochasticPriceResult>
where
    F: Fn(f64) -> Result<f64> + Sync,
{
    let nodes = law_points(law, rule)
        .into_iter()
        .enumerate()
        .map(|(index, (z, w))| Node {
            atom: 0,
            index,
            time: law.horizon,
            rate: law.rate_at(z),
            rate2: None,
            weight: w,
        })
        .collect();
    evaluate(nodes, 1, Method::SingleFugit, |r, _| f(r))
}

/// `Σ_k p_k E[f(r_{t_k})]` over stopping-time atoms `(t_k, p_k)`.
pub fn integrate_atoms_with<F>(
    model: &RateModel,
    atoms: &[(f64, f64)],
    rule: &QuadratureRule,
    f: F,
) -> Result<StochasticPriceResult>
where
    F: Fn(f64) -> Result<f64> + Sync,
{
    if atoms.is_empty() {
        return Err(Error::EmptyDistribution);
    }
    let mut nodes = Vec::new();
    for (atom, &(t, p)) in atoms.iter().enumerate() {
        let law = model.marginal_at(t);
        for (index, (z, w)) in law_points(&law, rule).into_iter().enumerate() {
            nodes.push(Node {
                atom,
                index,
                time: t,
                rate: law.rate_at(z),
                rate2: None,
                weight: p * w,
            });
        }
    }
    evaluate(nodes, atoms.len(), Method::FullDistribution, |r, _| f(r))
}

fn lattice_pricer(spec: OptionSpec, slot: RateSlot, cfg: LatticeConfig) -> impl Fn(f64) -> Result<f64> + Sync {
    move |r| lattice::price_american(&spec.with_rate(slot, r), &cfg)
}

fn check_order(rule: &QuadratureRule) -> Result<()> {
    if rule.order() == 0 {
        return Err(Error::QuadratureOrder);
    }
    Ok(())
}

/// American price averaged over the rate marginal at the expected fugit `tau_star`.
pub fn integrate_single_fugit(
    spec: &OptionSpec,
    model: &RateModel,
    slot: RateSlot,
    tau_star: f64,
    rule: &QuadratureRule,
    cfg: &LatticeConfig,
) -> Result<StochasticPriceResult> {
    check_order(rule)?;
    let law = model.marginal_at(tau_star);
    integrate_law_with(&law, rule, lattice_pricer(*spec, slot, *cfg))
}

/// Stopping-time-weighted sum of single-horizon integrals, using atoms already compacted.
/// The option keeps its contract maturity; only the rate horizon varies with the atom.
pub fn integrate_atoms(
    spec: &OptionSpec,
    model: &RateModel,
    slot: RateSlot,
    atoms: &[(f64, f64)],
    rule: &QuadratureRule,
    cfg: &LatticeConfig,
) -> Result<StochasticPriceResult> {
    check_order(rule)?;
    integrate_atoms_with(model, atoms, rule, lattice_pricer(*spec, slot, *cfg))
}

/// Full-distribution integral with the default atom compaction.
pub fn integrate_full_distribution(
    spec: &OptionSpec,
    model: &RateModel,
    slot: RateSlot,
    dist: &StoppingDistribution,
    rule: &QuadratureRule,
    cfg: &LatticeConfig,
) -> Result<StochasticPriceResult> {
    let atoms = dist.integration_atoms(DEFAULT_COMPACTION)?;
    integrate_atoms(spec, model, slot, &atoms, rule, cfg)
}

/// Two stochastic rates with a Gaussian copula on their generating normals.
///
/// Correlated draws are `g1 = z1`, `g2 = ρ z1 + √(1−ρ²) z2` over a tensor Gauss-Hermite grid.
/// `|ρ| = 1` and point-mass marginals drop the redundant dimension.
pub fn integrate_two_rates_with<F>(
    funding: &RateModel,
    carry: &RateModel,
    correlation: f64,
    atoms: &[(f64, f64)],
    rule: &QuadratureRule,
    f: F,
) -> Result<StochasticPriceResult>
where
    F: Fn(f64, f64) -> Result<f64> + Sync,
{
    if !(-1.0..=1.0).contains(&correlation) || correlation.is_nan() {
        return Err(Error::Correlation(correlation));
    }
    if atoms.is_empty() {
        return Err(Error::EmptyDistribution);
    }
    let comonotone = correlation.abs() == 1.0;
    let tail = (1.0 - correlation * correlation).max(0.0).sqrt();
    let mut nodes = Vec::new();
    for (atom, &(t, p)) in atoms.iter().enumerate() {
        let law1 = funding.marginal_at(t);
        let law2 = carry.marginal_at(t);
        let first = law_points(&law1, rule);
        let second = if comonotone || law2.is_point_mass() {
            vec![(0.0, 1.0)]
        } else {
            rule.standard_normal_points().collect()
        };
        let mut index = 0;
        for &(z1, w1) in &first {
            for &(z2, w2) in &second {
                let g2 = if law1.is_point_mass() {
                    z2
                } else {
                    correlation * z1 + tail * z2
                };
                nodes.push(Node {
                    atom,
                    index,
                    time: t,
                    rate: law1.rate_at(z1),
                    rate2: Some(law2.rate_at(g2)),
                    weight: p * w1 * w2,
                });
                index += 1;
            }
        }
    }
    evaluate(nodes, atoms.len(), Method::TwoRate, |r1, r2| {
        f(r1, r2.expect("two-rate node carries both rates"))
    })
}

pub fn integrate_two_rates(
    spec: &OptionSpec,
    funding: &RateModel,
    carry: &RateModel,
    correlation: f64,
    dist: &StoppingDistribution,
    rule: &QuadratureRule,
    cfg: &LatticeConfig,
) -> Result<StochasticPriceResult> {
    check_order(rule)?;
    let atoms = dist.integration_atoms(DEFAULT_COMPACTION)?;
    let spec = *spec;
    let cfg = *cfg;
    integrate_two_rates_with(funding, carry, correlation, &atoms, rule, move |r1, r2| {
        lattice::price_american(&spec.with_rates(r1, r2), &cfg)
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rates::{calibrate, ModelKind};

    fn rule() -> QuadratureRule {
        QuadratureRule::gauss_hermite(20).unwrap()
    }

    #[test]
    fn linear_price_two_atoms_matches_analytic() {
        // f(r) = a + b r: E over each atom is a + b·mean_at(t_k).
        let m = calibrate(ModelKind::Bachelier, 0.01, 0.0418, 0.0128, 1.0, None).unwrap();
        let (a, b) = (12.0, -40.0);
        let atoms = [(0.5, 0.5), (1.0, 0.5)];
        let got = integrate_atoms_with(&m, &atoms, &rule(), |r| Ok(a + b * r)).unwrap();
        let want = 0.5 * (a + b * m.mean_at(0.5)) + 0.5 * (a + b * m.mean_at(1.0));
        assert!((got.value - want).abs() < 1e-13);
        assert_eq!(got.node_evaluations, 40);
    }

    #[test]
    fn lognormal_expectation_is_exact_in_generating_variable() {
        let m = calibrate(ModelKind::Lognormal, 0.01, 0.0418, 0.0128, 1.0, None).unwrap();
        let law = m.marginal_at(1.0);
        let got = integrate_law_with(&law, &rule(), Ok).unwrap();
        assert!((got.value - 0.0418).abs() < 1e-14);
        let second = integrate_law_with(&law, &rule(), |r| Ok(r * r)).unwrap();
        assert!((second.value - (0.0418f64.powi(2) + 0.0128f64.powi(2))).abs() < 1e-14);
    }

    #[test]
    fn bad_correlation_rejected() {
        let m = calibrate(ModelKind::Bachelier, 0.01, 0.0418, 0.0128, 1.0, None).unwrap();
        for rho in [1.5, -1.01, f64::NAN] {
            let r = integrate_two_rates_with(&m, &m, rho, &[(1.0, 1.0)], &rule(), |a, b| Ok(a + b));
            assert!(matches!(r, Err(Error::Correlation(_))));
        }
    }

    #[test]
    fn correlated_product_moment() {
        // E[r1 r2] = m1 m2 + ρ s1 s2 for jointly Gaussian rates.
        let m1 = calibrate(ModelKind::Bachelier, 0.01, 0.0418, 0.0128, 1.0, None).unwrap();
        let m2 = calibrate(ModelKind::Vasicek, 0.02, 0.03, 0.01, 1.0, None).unwrap();
        for rho in [-1.0, -0.3, 0.0, 0.6, 1.0] {
            let got = integrate_two_rates_with(&m1, &m2, rho, &[(1.0, 1.0)], &rule(), |a, b| Ok(a * b))
                .unwrap();
            let want = 0.0418 * 0.03 + rho * 0.0128 * 0.01;
            assert!((got.value - want).abs() < 1e-15, "rho={rho}");
        }
    }

    #[test]
    fn node_failure_names_rate() {
        let m = calibrate(ModelKind::Bachelier, 0.01, 0.0418, 0.0128, 1.0, None).unwrap();
        let law = m.marginal_at(1.0);
        let err = integrate_law_with(&law, &rule(), |r| {
            if r > 0.05 {
                Err(Error::ZeroSteps)
            } else {
                Ok(1.0)
            }
        })
        .unwrap_err();
        match err {
            Error::Node { rate, .. } => assert!(rate > 0.05),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn diagnostics_csv_has_one_row_per_node() {
        let m = calibrate(ModelKind::Bachelier, 0.01, 0.0418, 0.0128, 1.0, None).unwrap();
        let res = integrate_law_with(&m.marginal_at(0.5), &rule(), Ok).unwrap();
        let csv = res.diagnostics_csv();
        assert_eq!(csv.lines().count(), 21);
        assert!(csv.starts_with("index,atom,time_years,rate"));
    }
}
