//! Distribution of the optimal exercise time on the binomial lattice.
//!
//! The backward pass marks every node where exercising is at least as good as
//! continuing. Reach probabilities are then pushed forward from the root under
//! `(q, 1 − q)`: mass arriving at an exercise node is booked at that step and stops,
//! mass reaching maturity is booked at the last step when the payoff is strictly
//! positive and otherwise counts as never exercised.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::lattice::{self, ExerciseGrid, LatticeConfig, Retention};
use crate::option::{OptionSpec, RateSlot, Style};

/// Atoms lighter than this are merged into a neighbour before integration.
pub const DEFAULT_COMPACTION: f64 = 1e-6;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct StoppingDistribution {
    /// `t_i = i·δt`, `i = 0..=n`.
    pub times: Vec<f64>,
    /// `P(τ = t_i)`.
    pub masses: Vec<f64>,
    pub no_exercise_mass: f64,
    pub maturity: f64,
}

impl StoppingDistribution {
    /// Builds a distribution from explicit atoms; mostly useful for tests and injected pmfs.
    pub fn from_atoms(atoms: &[(f64, f64)], no_exercise_mass: f64, maturity: f64) -> Self {
        Self {
            times: atoms.iter().map(|a| a.0).collect(),
            masses: atoms.iter().map(|a| a.1).collect(),
            no_exercise_mass,
            maturity,
        }
    }

    pub fn exercise_probability(&self) -> f64 {
        self.masses.iter().sum()
    }

    pub fn total_mass(&self) -> f64 {
        self.exercise_probability() + self.no_exercise_mass
    }

    /// `Σ t_i P_f(i) / Σ P_f(i)`: expected exercise time given exercise.
    pub fn expected_fugit(&self) -> Result<f64> {
        let mass = self.exercise_probability();
        if mass <= 0.0 {
            return Err(Error::NoExerciseSupport);
        }
        let weighted: f64 = self.times.iter().zip(&self.masses).map(|(t, p)| t * p).sum();
        Ok(weighted / mass)
    }

    /// Expectation over all paths, with unexercised paths assigned the maturity.
    pub fn expected_fugit_unconditional(&self) -> Result<f64> {
        let total = self.total_mass();
        if total <= 0.0 {
            return Err(Error::EmptyDistribution);
        }
        let weighted: f64 = self.times.iter().zip(&self.masses).map(|(t, p)| t * p).sum::<f64>()
            + self.maturity * self.no_exercise_mass;
        Ok(weighted / total)
    }

    /// Atoms `(t, p)` ready for integration: the no-exercise mass joins the maturity atom and
    /// atoms below `tolerance` are merged into the nearest retained atom in time
    /// (ties go to the earlier one). Total mass is preserved.
    pub fn integration_atoms(&self, tolerance: f64) -> Result<Vec<(f64, f64)>> {
        let mut atoms: Vec<(f64, f64)> = self
            .times
            .iter()
            .copied()
            .zip(self.masses.iter().copied())
            .filter(|&(_, p)| p > 0.0)
            .collect();
        if self.no_exercise_mass > 0.0 {
            match atoms.iter_mut().find(|a| a.0 == self.maturity) {
                Some(a) => a.1 += self.no_exercise_mass,
                None => atoms.push((self.maturity, self.no_exercise_mass)),
            }
        }
        if atoms.is_empty() {
            return Err(Error::EmptyDistribution);
        }
        atoms.sort_by(|a, b| a.0.total_cmp(&b.0));

        let mut keep: Vec<bool> = atoms.iter().map(|a| a.1 >= tolerance).collect();
        if !keep.iter().any(|&k| k) {
            let heaviest = atoms
                .iter()
                .enumerate()
                .max_by(|a, b| a.1 .1.total_cmp(&b.1 .1))
                .map(|(i, _)| i)
                .unwrap_or(0);
            keep[heaviest] = true;
        }
        let kept: Vec<usize> = (0..atoms.len()).filter(|&i| keep[i]).collect();
        let mut out: Vec<(f64, f64)> = kept.iter().map(|&i| atoms[i]).collect();
        for (i, atom) in atoms.iter().enumerate() {
            if keep[i] {
                continue;
            }
            // Nearest kept atom by time.
            let pos = kept.partition_point(|&k| atoms[k].0 < atom.0);
            let target = match (pos.checked_sub(1), kept.get(pos)) {
                (Some(l), Some(_)) => {
                    let left = atom.0 - atoms[kept[l]].0;
                    let right = atoms[kept[pos]].0 - atom.0;
                    if left <= right {
                        l
                    } else {
                        pos
                    }
                }
                (Some(l), None) => l,
                (None, _) => pos,
            };
            out[target].1 += atom.1;
        }
        Ok(out)
    }
}

/// Forward propagation of reach probabilities over a solved exercise grid.
pub fn distribution_from_grid(spec: &OptionSpec, grid: &ExerciseGrid) -> StoppingDistribution {
    let geo = *grid.geometry();
    let n = geo.steps;
    let q = geo.q;
    let mut masses = vec![0.0; n + 1];
    let mut reach = vec![0.0; geo.width(n)];
    let mut next = vec![0.0; geo.width(n)];
    reach[0] = 1.0;

    for i in 0..n {
        let width_next = geo.width(i + 1);
        next[..width_next].iter_mut().for_each(|v| *v = 0.0);
        for j in 0..geo.width(i) {
            let p = reach[j];
            if p == 0.0 {
                continue;
            }
            if grid.is_exercise(i, j) {
                masses[i] += p;
            } else if geo.is_degenerate() {
                next[0] += p;
            } else {
                next[j + 1] += q * p;
                next[j] += (1.0 - q) * p;
            }
        }
        std::mem::swap(&mut reach, &mut next);
    }

    let mut no_exercise_mass = 0.0;
    for (j, &p) in reach[..geo.width(n)].iter().enumerate() {
        if p <= 0.0 {
            continue;
        }
        if spec.kind.payoff(geo.node_spot(n, j), spec.strike) > 0.0 {
            masses[n] += p;
        } else {
            no_exercise_mass += p;
        }
    }

    StoppingDistribution {
        times: (0..=n).map(|i| geo.time(i)).collect(),
        masses,
        no_exercise_mass,
        maturity: spec.maturity,
    }
}

/// Stopping-time pmf of the American option under flat rates.
pub fn stopping_distribution(spec: &OptionSpec, cfg: &LatticeConfig) -> Result<StoppingDistribution> {
    let solved = lattice::solve_american(spec, cfg, Retention::ExerciseGrid)?;
    let grid = solved
        .exercise
        .as_ref()
        .expect("solve_american retains the exercise grid");
    Ok(distribution_from_grid(spec, grid))
}

/// Conditional expected fugit of a distribution.
pub fn expected_fugit(dist: &StoppingDistribution) -> Result<f64> {
    dist.expected_fugit()
}

/// `Ω = T·ρ_A/ρ_E` with both rhos bumping `slot`, clamped to `[0, T]`.
pub fn omega_heuristic(spec: &OptionSpec, cfg: &LatticeConfig, slot: RateSlot) -> Result<f64> {
    let rho_a = lattice::rho(spec, cfg, Style::American, slot)?;
    let rho_e = lattice::rho(spec, cfg, Style::European, slot)?;
    omega_from_rhos(spec.maturity, rho_a, rho_e)
}

pub fn omega_from_rhos(maturity: f64, rho_a: f64, rho_e: f64) -> Result<f64> {
    if rho_e == 0.0 {
        return Err(Error::ZeroEuropeanRho);
    }
    let omega = maturity * rho_a / rho_e;
    if omega > maturity {
        log::warn!("omega {omega} exceeds maturity {maturity}; clamped");
    }
    Ok(omega.clamp(0.0, maturity))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct FugitSummary {
    pub tau_star: f64,
    pub omega: f64,
    pub rho_american: f64,
    pub rho_european: f64,
    pub exercise_probability: f64,
}

/// Stopping distribution plus its summary statistics in one pass.
pub fn summarize(
    spec: &OptionSpec,
    cfg: &LatticeConfig,
    rho_slot: RateSlot,
) -> Result<(StoppingDistribution, FugitSummary)> {
    let dist = stopping_distribution(spec, cfg)?;
    let tau_star = dist.expected_fugit()?;
    let rho_american = lattice::rho(spec, cfg, Style::American, rho_slot)?;
    let rho_european = lattice::rho(spec, cfg, Style::European, rho_slot)?;
    let omega = omega_from_rhos(spec.maturity, rho_american, rho_european)?;
    let summary = FugitSummary {
        tau_star,
        omega,
        rho_american,
        rho_european,
        exercise_probability: dist.exercise_probability(),
    };
    Ok((dist, summary))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::option::OptionKind;

    fn put(spot: f64) -> OptionSpec {
        OptionSpec {
            spot,
            strike: 100.0,
            maturity: 1.0,
            volatility: 0.4,
            funding_rate: 0.0418,
            carry_rate: 0.0,
            kind: OptionKind::Put,
        }
    }

    #[test]
    fn deep_itm_zero_vol_exercises_at_root() {
        let s = OptionSpec {
            volatility: 0.0,
            funding_rate: 0.0,
            ..put(50.0)
        };
        let d = stopping_distribution(&s, &LatticeConfig::default()).unwrap();
        assert_eq!(d.masses[0], 1.0);
        assert_eq!(d.expected_fugit().unwrap(), 0.0);
        assert_eq!(d.no_exercise_mass, 0.0);
    }

    #[test]
    fn two_atom_expectation() {
        let d = StoppingDistribution::from_atoms(&[(0.5, 0.5), (1.0, 0.5)], 0.0, 1.0);
        assert_eq!(expected_fugit(&d).unwrap(), 0.75);
    }

    #[test]
    fn no_support_is_an_error() {
        let d = StoppingDistribution::from_atoms(&[(0.5, 0.0)], 1.0, 1.0);
        assert_eq!(d.expected_fugit(), Err(Error::NoExerciseSupport));
        assert_eq!(d.expected_fugit_unconditional().unwrap(), 1.0);
    }

    #[test]
    fn far_otm_call_without_carry_has_no_support() {
        let s = OptionSpec {
            spot: 10.0,
            volatility: 0.05,
            funding_rate: 0.0,
            kind: OptionKind::Call,
            ..put(10.0)
        };
        let d = stopping_distribution(&s, &LatticeConfig::with_steps(200)).unwrap();
        assert_eq!(d.exercise_probability(), 0.0);
        assert!((d.no_exercise_mass - 1.0).abs() < 1e-12);
        assert_eq!(d.expected_fugit(), Err(Error::NoExerciseSupport));
    }

    #[test]
    fn pmf_is_normalized() {
        for spot in [60.0, 100.0, 150.0] {
            let d = stopping_distribution(&put(spot), &LatticeConfig::with_steps(500)).unwrap();
            assert!((d.total_mass() - 1.0).abs() < 1e-10);
            assert!(d.masses.iter().all(|&p| p >= 0.0));
        }
    }

    #[test]
    fn no_early_exercise_means_maturity() {
        let call = OptionSpec {
            funding_rate: 0.05,
            carry_rate: 0.0,
            kind: OptionKind::Call,
            ..put(100.0)
        };
        let d = stopping_distribution(&call, &LatticeConfig::with_steps(400)).unwrap();
        assert_eq!(d.expected_fugit().unwrap(), 1.0);
        assert!(d.masses[..400].iter().all(|&p| p == 0.0));
    }

    #[test]
    fn compaction_preserves_mass_and_folds_no_exercise() {
        let d = StoppingDistribution::from_atoms(
            &[(0.0, 1e-9), (0.25, 0.3), (0.5, 2e-7), (0.6, 1e-8), (1.0, 0.2)],
            0.5 - 1e-9 - 2e-7 - 1e-8,
            1.0,
        );
        let atoms = d.integration_atoms(1e-6).unwrap();
        assert_eq!(atoms.len(), 2);
        let total: f64 = atoms.iter().map(|a| a.1).sum();
        assert!((total - 1.0).abs() < 1e-15);
        // Every light atom is closer to 0.25 than to 1.0.
        assert!((atoms[0].1 - (0.3 + 1e-9 + 2e-7 + 1e-8)).abs() < 1e-15);
        assert_eq!(atoms[1].0, 1.0);
    }

    #[test]
    fn omega_guards_zero_rho() {
        assert_eq!(omega_from_rhos(1.0, 0.1, 0.0), Err(Error::ZeroEuropeanRho));
        assert_eq!(omega_from_rhos(1.0, 0.3, 0.2).unwrap(), 1.0);
    }
}
