// Copyright 2026 The nzdd Authors
// SPDX-License-Identifier: Apache-2.0

//! Single-exponential fits of decay curves.
//!
//! The model is `y = A e^{−λx} + c` with the offset `c` fixed by the curve
//! type. For each trial rate the amplitude is solved linearly, so the fit
//! reduces to a one-dimensional search over `λ ≥ 0`.

use crate::engine::{blind_analysis, DecayCurve};
use crate::error::{invalid, NzError, Result};

/// Offset of the difference curve: full mixing gives zero contrast.
pub const DIFFERENCE_OFFSET: f64 = 0.0;
/// Offset of the sum curve: uniform mixing over all eight states leaves half
/// of the population in the doublets.
pub const SUM_OFFSET: f64 = 0.5;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct FitResult {
    /// Decay rate per unit of `x` (per N/Z pair for decay curves).
    pub rate: f64,
    pub rate_stderr: f64,
    pub amplitude: f64,
    pub offset: f64,
    pub chi2: f64,
    pub n_points: usize,
}

impl FitResult {
    /// `x` at which the exponential part has fallen to 1/e.
    pub fn r_1e(&self) -> f64 {
        if self.rate > 0.0 {
            1.0 / self.rate
        } else {
            f64::INFINITY
        }
    }

    /// Error per exchange pulse, `λ/2`.
    pub fn eps(&self) -> f64 {
        self.rate / 2.0
    }

    pub fn eps_stderr(&self) -> f64 {
        self.rate_stderr / 2.0
    }

    /// `T2 = period / ε`; infinite when no decay was resolved.
    pub fn t2(&self, period: f64) -> f64 {
        let eps = self.eps();
        if eps > 0.0 {
            period / eps
        } else {
            f64::INFINITY
        }
    }
}

struct Problem<'a> {
    xs: &'a [f64],
    ys: &'a [f64],
    w: Vec<f64>,
    offset: f64,
    constrain: bool,
}

impl Problem<'_> {
    /// Best amplitude and χ² at rate `lam`.
    fn profile(&self, lam: f64) -> (f64, f64) {
        let (mut see, mut sey) = (0.0, 0.0);
        for i in 0..self.xs.len() {
            let e = (-lam * self.xs[i]).exp();
            see += self.w[i] * e * e;
            sey += self.w[i] * e * (self.ys[i] - self.offset);
        }
        let mut a = if see > 0.0 { sey / see } else { 0.0 };
        if self.constrain {
            a = a.min(1.0 - self.offset);
        }
        let chi2 = (0..self.xs.len())
            .map(|i| {
                let r = self.ys[i] - self.offset - a * (-lam * self.xs[i]).exp();
                self.w[i] * r * r
            })
            .sum();
        (a, chi2)
    }

    fn chi2(&self, lam: f64) -> f64 {
        self.profile(lam).1
    }
}

fn golden(f: impl Fn(f64) -> f64, mut a: f64, mut b: f64) -> f64 {
    let g = 0.5 * (5f64.sqrt() - 1.0);
    let mut c = b - g * (b - a);
    let mut d = a + g * (b - a);
    let (mut fc, mut fd) = (f(c), f(d));
    for _ in 0..200 {
        if (b - a).abs() <= 1e-14 * (a.abs() + b.abs()) {
            break;
        }
        if fc < fd {
            b = d;
            d = c;
            fd = fc;
            c = b - g * (b - a);
            fc = f(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + g * (b - a);
            fd = f(d);
        }
    }
    0.5 * (a + b)
}

/// Least-squares fit of `y = A e^{−λx} + offset` with `λ ≥ 0`.
///
/// `sigmas` gives per-point standard errors (inverse-variance weights);
/// points with zero error are floored at a tenth of the mean positive error.
/// With `constrain`, the amplitude is capped so that `A + offset ≤ 1`.
/// The rate error comes from the curvature of the profiled χ², inflated by
/// the reduced χ² when that exceeds one.
pub fn fit_exponential(
    xs: &[f64],
    ys: &[f64],
    sigmas: Option<&[f64]>,
    offset: f64,
    constrain: bool,
) -> Result<FitResult> {
    let n = xs.len();
    if n < 3 {
        return Err(invalid(format!("need at least 3 points, got {n}")));
    }
    if ys.len() != n || sigmas.is_some_and(|s| s.len() != n) {
        return Err(invalid("xs, ys and sigmas must have equal length"));
    }
    if xs.iter().chain(ys).any(|v| !v.is_finite()) || xs.iter().any(|&x| x < 0.0) {
        return Err(invalid("fit data must be finite with x >= 0"));
    }
    let w = match sigmas {
        Some(s) => {
            let pos: Vec<f64> = s.iter().copied().filter(|&v| v > 0.0 && v.is_finite()).collect();
            if pos.is_empty() {
                vec![1.0; n]
            } else {
                let floor = 0.1 * pos.iter().sum::<f64>() / pos.len() as f64;
                s.iter().map(|&v| 1.0 / v.max(floor).powi(2)).collect()
            }
        }
        None => vec![1.0; n],
    };
    let p = Problem { xs, ys, w, offset, constrain };
    let x_max = xs.iter().cloned().fold(0.0, f64::max);
    if x_max <= 0.0 {
        return Err(invalid("need at least one x > 0"));
    }
    let x_min = xs.iter().cloned().filter(|&x| x > 0.0).fold(f64::INFINITY, f64::min);

    let lo = 1e-9 / x_max;
    let hi = 50.0 / x_min;
    let steps = 400;
    let mut grid = vec![0.0];
    grid.extend((0..=steps).map(|k| lo * (hi / lo).powf(k as f64 / steps as f64)));
    let vals: Vec<f64> = grid.iter().map(|&l| p.chi2(l)).collect();
    let k = (0..grid.len())
        .min_by(|&a, &b| vals[a].total_cmp(&vals[b]))
        .expect("grid is non-empty");
    let lam = if k == 0 {
        golden(|l| p.chi2(l), 0.0, grid[1])
    } else {
        let a = grid[k - 1];
        let b = grid[(k + 1).min(grid.len() - 1)];
        golden(|l| p.chi2(l), a, b)
    };
    let lam = if p.chi2(0.0) <= p.chi2(lam) { 0.0 } else { lam };
    let (amplitude, chi2) = p.profile(lam);
    if !chi2.is_finite() || !amplitude.is_finite() {
        let resid: Vec<f64> = (0..n)
            .map(|i| ys[i] - offset - amplitude * (-lam * xs[i]).exp())
            .collect();
        return Err(NzError::Numerical(format!("exponential fit did not converge; residuals {resid:?}")));
    }

    let h = (lam * 1e-3).max(1e-6 / x_max);
    let curv = if lam > h {
        (p.chi2(lam + h) - 2.0 * chi2 + p.chi2(lam - h)) / (h * h)
    } else {
        (p.chi2(lam + 2.0 * h) - 2.0 * p.chi2(lam + h) + chi2) / (h * h)
    };
    let dof = (n - 2).max(1) as f64;
    let scale = match sigmas {
        Some(_) => (chi2 / dof).max(1.0),
        None => chi2 / dof,
    };
    let rate_stderr = if curv > 0.0 { (2.0 * scale / curv).sqrt() } else { f64::INFINITY };
    Ok(FitResult { rate: lam, rate_stderr, amplitude, offset, chi2, n_points: n })
}

/// Point weighting used by [`analyze_decay`].
#[derive(Clone, Copy, Debug, PartialEq, Eq, Default)]
pub enum Weighting {
    /// Ordinary least squares; errors from the residual scatter.
    #[default]
    Uniform,
    /// Weights from the Monte Carlo standard errors.
    InverseVariance,
}

/// Fits of both blind-analysis curves of a decay experiment.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct DecayAnalysis {
    pub difference: FitResult,
    pub sum: FitResult,
    pub period: f64,
}

impl DecayAnalysis {
    pub fn eps(&self) -> f64 {
        self.difference.eps()
    }

    pub fn eps_stderr(&self) -> f64 {
        self.difference.eps_stderr()
    }

    pub fn t2(&self) -> f64 {
        self.difference.t2(self.period)
    }

    /// Leakage per exchange pulse, `λ_L·B/2`.
    pub fn leak_per_pulse(&self) -> f64 {
        self.sum.rate * self.sum.amplitude / 2.0
    }

    pub fn leak_stderr(&self) -> f64 {
        self.sum.rate_stderr * self.sum.amplitude.abs() / 2.0
    }
}

/// Fit the difference curve with zero offset and the sum curve with the
/// uniform-mixing floor, both constrained below one.
pub fn analyze_decay(curve: &DecayCurve, weighting: Weighting) -> Result<DecayAnalysis> {
    let blind = blind_analysis(curve);
    let xs: Vec<f64> = blind.r_values.iter().map(|&r| r as f64).collect();
    let sig = match weighting {
        Weighting::Uniform => None,
        Weighting::InverseVariance => Some(blind.stderr.as_slice()),
    };
    let difference = fit_exponential(&xs, &blind.difference, sig, DIFFERENCE_OFFSET, true)?;
    let sum = fit_exponential(&xs, &blind.sum, sig, SUM_OFFSET, true)?;
    Ok(DecayAnalysis { difference, sum, period: curve.period() })
}
