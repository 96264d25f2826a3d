//! Reference computations shared by the oracle and acceptance targets.
#![allow(dead_code)]

use fugitlab::OptionSpec;

/// Plain CRR backward pass written from scratch; returns the exercise flags `ex[i][j]`.
pub fn reference_exercise_region(s: &OptionSpec, n: usize) -> (Vec<Vec<bool>>, f64) {
    let dt = s.maturity / n as f64;
    let u = (s.volatility * dt.sqrt()).exp();
    let d = 1.0 / u;
    let q = (((s.funding_rate - s.carry_rate) * dt).exp() - d) / (u - d);
    let disc = (-s.funding_rate * dt).exp();
    let phi = s.kind.phi();
    let spot = |i: usize, j: usize| s.spot * u.powi(j as i32) * d.powi((i - j) as i32);
    let mut v: Vec<f64> = (0..=n).map(|j| (phi * (spot(n, j) - s.strike)).max(0.0)).collect();
    let mut ex = vec![Vec::new(); n + 1];
    ex[n] = vec![false; n + 1];
    for i in (0..n).rev() {
        let mut row = vec![false; i + 1];
        for j in 0..=i {
            let cont = disc * (q * v[j + 1] + (1.0 - q) * v[j]);
            let intrinsic = phi * (spot(i, j) - s.strike);
            if intrinsic > 0.0 && intrinsic >= cont {
                row[j] = true;
                v[j] = intrinsic;
            } else {
                v[j] = cont;
            }
        }
        ex[i] = row;
    }
    (ex, q)
}

/// Enumerates all 2^n up/down paths and applies the stopping rule to each.
pub fn enumerate_paths(s: &OptionSpec, n: usize) -> (Vec<f64>, f64) {
    let (ex, q) = reference_exercise_region(s, n);
    let dt = s.maturity / n as f64;
    let u = (s.volatility * dt.sqrt()).exp();
    let mut pmf = vec![0.0; n + 1];
    let mut none = 0.0;
    for path in 0u32..(1 << n) {
        // Full-path probability: summing over the moves after a stop recovers the truncated one.
        let prob: f64 = (0..n).map(|i| if path >> i & 1 == 1 { q } else { 1.0 - q }).product();
        let mut j = 0;
        let mut stopped = false;
        for (i, row) in ex.iter().enumerate().take(n) {
            if row[j] {
                pmf[i] += prob;
                stopped = true;
                break;
            }
            j += (path >> i & 1) as usize;
        }
        if !stopped {
            let st = s.spot * u.powi(2 * j as i32 - n as i32);
            if s.kind.payoff(st, s.strike) > 0.0 {
                pmf[n] += prob;
            } else {
                none += prob;
            }
        }
    }
    (pmf, none)
}

pub fn normal_pdf(x: f64) -> f64 {
    (-0.5 * x * x).exp() / (2.0 * std::f64::consts::PI).sqrt()
}

/// Trapezoid rule on `[m − 6s, m + 6s]` with `intervals` panels against the normal density.
pub fn trapezoid_normal(mean: f64, sd: f64, intervals: usize, f: impl Fn(f64) -> f64) -> f64 {
    let a = -6.0;
    let h = 12.0 / intervals as f64;
    (0..=intervals)
        .map(|k| {
            let z = a + k as f64 * h;
            let w = if k == 0 || k == intervals { 0.5 } else { 1.0 };
            w * h * normal_pdf(z) * f(mean + sd * z)
        })
        .sum()
}
