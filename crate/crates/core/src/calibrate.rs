// Copyright 2026 The nzdd Authors
// SPDX-License-Identifier: Apache-2.0

//! Calibration of the noise amplitudes against free-evolution (T2*) and
//! exchange Rabi targets.
//!
//! Both metrics are evaluated on unit-amplitude realizations scaled by
//! `√A`, so every trial amplitude sees the same random numbers and the
//! metric is a smooth, monotone function of `A`. The root is then found by
//! a bracketed secant search in `(ln A, ln metric)`.

use crate::engine::{Gauge, Readout, Simulator};
use crate::error::{invalid, NzError, Result};
use crate::noise::{realize_noise, NoiseModel, NoiseRealization};
use crate::schedule::{build_from_pattern, PulseShape};
use rayon::prelude::*;

/// Free-evolution dephasing time of the encoded qubit.
pub const TARGET_T2STAR: f64 = 2e-6;
/// Number of exchange Rabi oscillations at 1/e contrast.
pub const TARGET_RABI: f64 = 25.0;

/// Shared settings of both calibrations.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct CalibrationSettings {
    pub shots: usize,
    pub seed: u64,
    pub b0_tesla: f64,
    /// Relative tolerance on the calibrated metric.
    pub rel_tol: f64,
}

impl CalibrationSettings {
    pub fn new(shots: usize, seed: u64, b0_tesla: f64) -> Self {
        Self { shots, seed, b0_tesla, rel_tol: 1e-3 }
    }

    fn validate(&self) -> Result<()> {
        if self.shots == 0 {
            return Err(invalid("calibration needs at least one shot"));
        }
        if !(self.rel_tol > 0.0) {
            return Err(invalid("rel_tol must be positive"));
        }
        Ok(())
    }
}

/// First time at which `ys` falls to `level`, linearly interpolated.
pub fn first_crossing(xs: &[f64], ys: &[f64], level: f64) -> Option<f64> {
    for i in 1..ys.len().min(xs.len()) {
        if ys[i] <= level {
            let (y0, y1) = (ys[i - 1], ys[i]);
            let f = if y0 > y1 { (y0 - level) / (y0 - y1) } else { 0.0 };
            return Some(xs[i - 1] + f * (xs[i] - xs[i - 1]));
        }
    }
    None
}

/// Free-evolution experiment: all exchange off, the mixed encoded `|0⟩`
/// dephases under the magnetic field. Contrast is `2P − 1`.
#[derive(Clone, Debug)]
pub struct FreeEvolution {
    pub settings: CalibrationSettings,
    /// Observation window.
    pub window: f64,
    pub samples: usize,
}

impl FreeEvolution {
    /// Window of five target times, 100 samples per target time.
    pub fn for_target(target: f64, settings: CalibrationSettings) -> Self {
        Self { settings, window: 5.0 * target, samples: 500 }
    }

    fn sample_dt(&self) -> f64 {
        self.window / self.samples as f64
    }

    fn unit_realization(&self, i: u64) -> Result<NoiseRealization> {
        let s = &self.settings;
        let model = NoiseModel::new(1.0, 0.0, s.b0_tesla).for_experiment_time(s.shots as f64 * self.window);
        realize_noise(&model, self.window, self.sample_dt(), self.window, s.seed, i)
    }

    /// Ensemble-mean contrast at `k · window/samples`.
    pub fn contrast(&self, amplitude: f64) -> Result<Vec<f64>> {
        self.settings.validate()?;
        check_amplitude(amplitude)?;
        let sim = Simulator::new();
        let scale = amplitude.sqrt();
        let per_shot: Vec<Vec<Readout>> = (0..self.settings.shots as u64)
            .into_par_iter()
            .map(|i| {
                let noise = self.unit_realization(i)?.scaled(scale, 0.0);
                Ok(sim.free_evolution(&noise, self.sample_dt(), self.samples, Gauge::Mixed))
            })
            .collect::<Result<_>>()?;
        Ok(ensemble_mean(&per_shot, |r| 2.0 * r.p0 - 1.0))
    }

    /// T2* as the first 1/e crossing of the contrast; infinite if the
    /// contrast stays above 1/e over the window.
    pub fn t2star(&self, amplitude: f64) -> Result<f64> {
        let c = self.contrast(amplitude)?;
        let dt = self.sample_dt();
        let ts: Vec<f64> = (0..c.len()).map(|k| k as f64 * dt).collect();
        Ok(first_crossing(&ts, &c, (-1f64).exp()).unwrap_or(f64::INFINITY))
    }
}

/// Exchange Rabi experiment: back-to-back N pulses under exchange noise
/// only, read out after every second pulse (one full oscillation).
///
/// For a rotation about the N axis the return probability obeys
/// `2P − 1 = ¼ + ¾ cos φ`, so `(4(2P − 1) − 1)/3 = cos φ` is the contrast.
#[derive(Clone, Debug)]
pub struct Rabi {
    pub settings: CalibrationSettings,
    pub shape: PulseShape,
    /// Number of oscillations observed.
    pub oscillations: usize,
}

impl Rabi {
    pub fn for_target(target: f64, shape: PulseShape, settings: CalibrationSettings) -> Self {
        Self { settings, shape, oscillations: (5.0 * target).ceil().max(4.0) as usize }
    }

    fn duration(&self) -> f64 {
        2.0 * self.oscillations as f64 * self.shape.support()
    }

    fn unit_realization(&self, i: u64) -> Result<NoiseRealization> {
        let s = &self.settings;
        let d = self.duration();
        let model = NoiseModel::new(0.0, 1.0, s.b0_tesla).for_experiment_time(s.shots as f64 * d);
        realize_noise(&model, d, d, self.shape.t_pulse, s.seed, i)
    }

    /// Ensemble-mean contrast after `k` oscillations, `k = 0..=oscillations`.
    pub fn contrast(&self, amplitude: f64) -> Result<Vec<f64>> {
        self.settings.validate()?;
        check_amplitude(amplitude)?;
        let pattern = "N".repeat(2 * self.oscillations);
        let schedule = build_from_pattern(&pattern, self.shape.ramp(), self.shape)?;
        let checkpoints: Vec<usize> = (0..=self.oscillations).collect();
        let sim = Simulator::new();
        let scale = amplitude.sqrt();
        let per_shot: Vec<Vec<Readout>> = (0..self.settings.shots as u64)
            .into_par_iter()
            .map(|i| {
                let noise = self.unit_realization(i)?.scaled(0.0, scale);
                Ok(sim.run(&schedule, &noise, &checkpoints, Gauge::Mixed))
            })
            .collect::<Result<_>>()?;
        Ok(ensemble_mean(&per_shot, |r| (4.0 * (2.0 * r.p0 - 1.0) - 1.0) / 3.0))
    }

    /// Oscillation count at the first 1/e crossing of the contrast.
    pub fn oscillations_to_1e(&self, amplitude: f64) -> Result<f64> {
        let c = self.contrast(amplitude)?;
        let ks: Vec<f64> = (0..c.len()).map(|k| k as f64).collect();
        Ok(first_crossing(&ks, &c, (-1f64).exp()).unwrap_or(f64::INFINITY))
    }
}

fn check_amplitude(a: f64) -> Result<()> {
    if !(a >= 0.0 && a.is_finite()) {
        return Err(invalid(format!("amplitude must be finite and >= 0, got {a}")));
    }
    Ok(())
}

fn ensemble_mean(per_shot: &[Vec<Readout>], f: impl Fn(&Readout) -> f64) -> Vec<f64> {
    let n = per_shot.len() as f64;
    let len = per_shot.first().map_or(0, |v| v.len());
    (0..len)
        .map(|k| per_shot.iter().map(|s| f(&s[k])).sum::<f64>() / n)
        .collect()
}

/// Result of one calibration.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Calibration {
    pub amplitude: f64,
    /// Metric reached at `amplitude` (seconds or oscillations).
    pub achieved: f64,
    pub target: f64,
    pub evaluations: usize,
}

/// Find `A` in `bounds` with `metric(A) = target` for a metric that
/// decreases with `A`.
fn solve_decreasing(
    metric: impl Fn(f64) -> Result<f64>,
    target: f64,
    bounds: (f64, f64),
    rel_tol: f64,
) -> Result<Calibration> {
    let (lo, hi) = bounds;
    if !(lo > 0.0 && hi > lo) {
        return Err(invalid(format!("amplitude bounds must satisfy 0 < lo < hi, got {bounds:?}")));
    }
    let g = |m: f64| if m.is_finite() { m.ln() - target.ln() } else { f64::INFINITY };
    let mut evaluations = 0;
    let mut eval = |x: f64| -> Result<(f64, f64)> {
        evaluations += 1;
        let m = metric(x.exp())?;
        Ok((g(m), m))
    };
    let (mut xa, mut xb) = (lo.ln(), hi.ln());
    let (mut fa, ma) = eval(xa)?;
    let (mut fb, mb) = eval(xb)?;
    if fa < 0.0 || fb > 0.0 {
        return Err(NzError::Calibration(format!(
            "target {target} not bracketed: metric {ma} at A = {lo}, {mb} at A = {hi}"
        )));
    }
    let mut side = 0i8;
    for _ in 0..100 {
        let x = if fa.is_finite() {
            (xa * fb - xb * fa) / (fb - fa)
        } else {
            0.5 * (xa + xb)
        };
        let (fx, mx) = eval(x)?;
        if (mx / target - 1.0).abs() <= rel_tol || (xb - xa).abs() < 1e-12 {
            return Ok(Calibration { amplitude: x.exp(), achieved: mx, target, evaluations });
        }
        if fx > 0.0 {
            xa = x;
            fa = fx;
            if side == 1 {
                fb *= 0.5;
            }
            side = 1;
        } else {
            xb = x;
            fb = fx;
            if side == -1 && fa.is_finite() {
                fa *= 0.5;
            }
            side = -1;
        }
    }
    Err(NzError::Calibration(format!("no convergence towards target {target}")))
}

/// Magnetic PSD amplitude giving `target` T2*.
pub fn calibrate_magnetic(target: f64, settings: CalibrationSettings, bounds: (f64, f64)) -> Result<Calibration> {
    if !(target > 0.0 && target.is_finite()) {
        return Err(invalid(format!("T2* target must be positive, got {target}")));
    }
    let exp = FreeEvolution::for_target(target, settings);
    solve_decreasing(|a| exp.t2star(a), target, bounds, settings.rel_tol)
}

/// Exchange PSD amplitude giving `target` Rabi oscillations at 1/e.
pub fn calibrate_exchange(
    target: f64,
    shape: PulseShape,
    settings: CalibrationSettings,
    bounds: (f64, f64),
) -> Result<Calibration> {
    if !(target > 0.0 && target.is_finite()) {
        return Err(invalid(format!("Rabi target must be positive, got {target}")));
    }
    let exp = Rabi::for_target(target, shape, settings);
    solve_decreasing(|a| exp.oscillations_to_1e(a), target, bounds, settings.rel_tol)
}

#[cfg(test)]
mod tests {
    use super::*;

    const B0: f64 = 50e-6;

    fn settings(shots: usize, seed: u64) -> CalibrationSettings {
        CalibrationSettings::new(shots, seed, B0)
    }

    #[test]
    fn crossing_interpolates() {
        let xs = [0.0, 1.0, 2.0];
        let ys = [1.0, 0.5, 0.0];
        assert!((first_crossing(&xs, &ys, 0.25).unwrap() - 1.5).abs() < 1e-12);
        assert_eq!(first_crossing(&xs, &[1.0, 1.0, 1.0], 0.5), None);
    }

    #[test]
    fn zero_magnetic_amplitude_never_decays() {
        let exp = FreeEvolution { settings: settings(4, 1), window: 20e-6, samples: 50 };
        let c = exp.contrast(0.0).unwrap();
        assert!(c.iter().all(|&v| (v - 1.0).abs() < 1e-12));
        assert!(exp.t2star(0.0).unwrap().is_infinite());
    }

    #[test]
    fn zero_exchange_amplitude_never_decays() {
        let shape = PulseShape::rectangular(10e-9).unwrap();
        let exp = Rabi { settings: settings(4, 1), shape, oscillations: 20 };
        let c = exp.contrast(0.0).unwrap();
        assert!(c.iter().all(|&v| (v - 1.0).abs() < 1e-9), "{c:?}");
    }

    #[test]
    fn quadrupled_magnetic_power_halves_t2star() {
        let exp = FreeEvolution::for_target(2e-6, settings(200, 3));
        let a = exp.t2star(3.5e10).unwrap();
        let b = exp.t2star(4.0 * 3.5e10).unwrap();
        assert!((a / b - 2.0).abs() < 0.2, "{a} {b}");
    }

    #[test]
    fn quadrupled_exchange_power_halves_rabi_count() {
        let shape = PulseShape::rectangular(10e-9).unwrap();
        let exp = Rabi::for_target(25.0, shape, settings(200, 3));
        let a = exp.oscillations_to_1e(7e-6).unwrap();
        let b = exp.oscillations_to_1e(4.0 * 7e-6).unwrap();
        assert!((a / b - 2.0).abs() < 0.2, "{a} {b}");
    }

    #[test]
    fn solver_finds_power_law_root() {
        let cal = solve_decreasing(|a| Ok(1.0 / a.sqrt()), 0.01, (1.0, 1e8), 1e-6).unwrap();
        assert!((cal.amplitude / 1e4 - 1.0).abs() < 1e-5);
        let err = solve_decreasing(|a| Ok(1.0 / a.sqrt()), 1e-9, (1.0, 1e8), 1e-6);
        assert!(matches!(err, Err(NzError::Calibration(_))));
    }

    #[test]
    fn impossible_targets_are_rejected() {
        assert!(calibrate_magnetic(0.0, settings(4, 1), (1.0, 2.0)).is_err());
        let shape = PulseShape::rectangular(10e-9).unwrap();
        assert!(calibrate_exchange(-1.0, shape, settings(4, 1), (1.0, 2.0)).is_err());
    }
}
