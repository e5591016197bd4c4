// Copyright 2026 The nzdd Authors
// SPDX-License-Identifier: Apache-2.0

//! Power-law noise spectra and Gaussian time-trace synthesis.
//!
//! Spectra are single-sided: the variance of a trace is `∫₀^∞ S(ν) dν`.
//! Magnetic traces are effective fields in rad/s; exchange traces are the
//! relative fluctuation `δJ/J`.

use crate::error::{invalid, Result};
use crate::spin::Dot;
use rand::{RngExt, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rustfft::num_complex::Complex;
use rustfft::FftPlanner;
use std::cell::RefCell;
use std::io::Write;

/// Electron g-factor used for the Larmor conversion.
pub const G_FACTOR: f64 = 2.0;
/// Bohr magneton over Planck's constant, Hz/T.
pub const MU_B_OVER_H: f64 = 13.996e9;

/// Larmor frequency in Hz for a field in tesla.
pub fn larmor_frequency(b0_tesla: f64) -> f64 {
    G_FACTOR * MU_B_OVER_H * b0_tesla
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum HighFrequency {
    /// Continues as `1/ν²` above the rolloff.
    InverseSquare,
    /// Drops to zero above the rolloff.
    Cutoff,
}

/// `S(ν) = A·ν^(−exponent)` on `[nu_lo, nu_rolloff]`, followed by the
/// high-frequency tail, and zero outside `[nu_lo, nu_hi]`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct PowerLawPsd {
    /// Value of the low band at 1 Hz.
    pub amplitude: f64,
    pub exponent: f64,
    pub nu_lo: f64,
    pub nu_rolloff: f64,
    pub high: HighFrequency,
    pub nu_hi: f64,
}

impl PowerLawPsd {
    /// 1/f up to 10 kHz, then 1/f².
    pub fn magnetic(amplitude: f64) -> Self {
        Self {
            amplitude,
            exponent: 1.0,
            nu_lo: 1e-3,
            nu_rolloff: 1e4,
            high: HighFrequency::InverseSquare,
            nu_hi: f64::INFINITY,
        }
    }

    /// 1/f out to 1 GHz with a hard edge.
    pub fn exchange(amplitude: f64) -> Self {
        Self {
            amplitude,
            exponent: 1.0,
            nu_lo: 1e-3,
            nu_rolloff: 1e9,
            high: HighFrequency::Cutoff,
            nu_hi: f64::INFINITY,
        }
    }

    /// Flat spectrum `s0` on `[0, nu_max]`.
    pub fn white(s0: f64, nu_max: f64) -> Self {
        Self {
            amplitude: s0,
            exponent: 0.0,
            nu_lo: 0.0,
            nu_rolloff: nu_max,
            high: HighFrequency::Cutoff,
            nu_hi: nu_max,
        }
    }

    pub fn with_amplitude(mut self, amplitude: f64) -> Self {
        self.amplitude = amplitude;
        self
    }

    pub fn with_nu_lo(mut self, nu_lo: f64) -> Self {
        self.nu_lo = nu_lo;
        self
    }

    pub fn with_nu_hi(mut self, nu_hi: f64) -> Self {
        self.nu_hi = nu_hi;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.amplitude >= 0.0 && self.amplitude.is_finite()) {
            return Err(invalid(format!("PSD amplitude must be >= 0, got {}", self.amplitude)));
        }
        if !(self.nu_lo >= 0.0 && self.nu_lo.is_finite()) {
            return Err(invalid(format!("nu_lo must be finite and >= 0, got {}", self.nu_lo)));
        }
        if self.exponent >= 1.0 && self.nu_lo == 0.0 {
            return Err(invalid("a 1/f spectrum needs nu_lo > 0"));
        }
        Ok(())
    }

    pub fn value(&self, nu: f64) -> f64 {
        let nu = nu.abs();
        if nu < self.nu_lo || nu > self.nu_hi || self.amplitude == 0.0 {
            return 0.0;
        }
        if nu <= self.nu_rolloff {
            self.amplitude * nu.powf(-self.exponent)
        } else {
            match self.high {
                HighFrequency::Cutoff => 0.0,
                HighFrequency::InverseSquare => {
                    let r = self.nu_rolloff / nu;
                    self.amplitude * self.nu_rolloff.powf(-self.exponent) * r * r
                }
            }
        }
    }

    /// `∫_a^b S(ν) dν`, exact for the piecewise power law.
    pub fn band_integral(&self, a: f64, b: f64) -> f64 {
        let a = a.max(self.nu_lo);
        let b = b.min(self.nu_hi);
        if !(b > a) || self.amplitude == 0.0 {
            return 0.0;
        }
        let mut total = 0.0;
        let (la, lb) = (a, b.min(self.nu_rolloff));
        if lb > la {
            total += if (self.exponent - 1.0).abs() < 1e-15 {
                self.amplitude * (lb / la).ln()
            } else {
                let p = 1.0 - self.exponent;
                self.amplitude * (lb.powf(p) - la.powf(p)) / p
            };
        }
        if self.high == HighFrequency::InverseSquare {
            let (ha, hb) = (a.max(self.nu_rolloff), b);
            if hb > ha {
                let c = self.amplitude * self.nu_rolloff.powf(2.0 - self.exponent);
                total += c * (1.0 / ha - 1.0 / hb);
            }
        }
        total
    }

    pub fn variance(&self) -> f64 {
        self.band_integral(self.nu_lo, f64::INFINITY)
    }
}

/// Noise sources and the static field.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct NoiseModel {
    pub magnetic: PowerLawPsd,
    /// Spectrum of `δJ/J`, dimensionless²/Hz.
    pub exchange: PowerLawPsd,
    pub b0_tesla: f64,
}

impl NoiseModel {
    pub fn new(magnetic_amplitude: f64, exchange_amplitude: f64, b0_tesla: f64) -> Self {
        Self {
            magnetic: PowerLawPsd::magnetic(magnetic_amplitude),
            exchange: PowerLawPsd::exchange(exchange_amplitude),
            b0_tesla,
        }
    }

    pub fn noiseless(b0_tesla: f64) -> Self {
        Self::new(0.0, 0.0, b0_tesla)
    }

    pub fn larmor_hz(&self) -> f64 {
        larmor_frequency(self.b0_tesla)
    }

    /// Larmor angular frequency in rad/s.
    pub fn omega0(&self) -> f64 {
        2.0 * std::f64::consts::PI * self.larmor_hz()
    }

    /// Set both low cutoffs to `1/(10 · total)` for an experiment whose
    /// averaged duration is `total` seconds.
    pub fn for_experiment_time(mut self, total: f64) -> Self {
        let nu_lo = 1.0 / (10.0 * total);
        self.magnetic.nu_lo = nu_lo;
        self.exchange.nu_lo = nu_lo;
        self
    }

    pub fn validate(&self) -> Result<()> {
        self.magnetic.validate()?;
        self.exchange.validate()?;
        if !self.b0_tesla.is_finite() {
            return Err(invalid("B0 must be finite"));
        }
        Ok(())
    }
}

/// Sampled traces for one Monte Carlo realization.
#[derive(Clone, Debug, PartialEq)]
pub struct NoiseRealization {
    pub dt_magnetic: f64,
    /// `magnetic[3·dot + axis]`, rad/s.
    pub magnetic: [Vec<f64>; 9],
    pub dt_exchange: f64,
    /// `exchange[0]` for the Z axis (dots 1-2), `exchange[1]` for N (2-3).
    pub exchange: [Vec<f64>; 2],
    pub b0_tesla: f64,
    pub seed: u64,
    pub index: u64,
}

impl NoiseRealization {
    /// Trace-free realization with only the static field.
    pub fn quiet(b0_tesla: f64) -> Self {
        Self {
            dt_magnetic: f64::INFINITY,
            magnetic: Default::default(),
            dt_exchange: f64::INFINITY,
            exchange: Default::default(),
            b0_tesla,
            seed: 0,
            index: 0,
        }
    }

    /// Static fields `b[dot][axis]` in rad/s, held for all time.
    pub fn static_fields(b: [[f64; 3]; 3], b0_tesla: f64) -> Self {
        let mut r = Self::quiet(b0_tesla);
        for d in 0..3 {
            for a in 0..3 {
                r.magnetic[3 * d + a] = vec![b[d][a]];
            }
        }
        r
    }

    pub fn omega0(&self) -> f64 {
        2.0 * std::f64::consts::PI * larmor_frequency(self.b0_tesla)
    }

    fn cell(dt: f64, len: usize, t: f64) -> usize {
        if len <= 1 || !dt.is_finite() {
            return 0;
        }
        ((t / dt).floor().max(0.0) as usize).min(len - 1)
    }

    pub fn magnetic_cell(&self, t: f64) -> usize {
        Self::cell(self.dt_magnetic, self.magnetic[0].len(), t)
    }

    /// Start time of the magnetic cell after `cell`, or infinity.
    pub fn next_magnetic_boundary(&self, cell: usize) -> f64 {
        if self.magnetic[0].len() <= 1 || cell + 1 >= self.magnetic[0].len() {
            f64::INFINITY
        } else {
            (cell + 1) as f64 * self.dt_magnetic
        }
    }

    /// Field vectors `b[dot][axis]` in a magnetic cell.
    pub fn fields(&self, cell: usize) -> [[f64; 3]; 3] {
        std::array::from_fn(|d| {
            std::array::from_fn(|a| self.magnetic[3 * d + a].get(cell).copied().unwrap_or(0.0))
        })
    }

    pub fn field(&self, dot: Dot, axis: usize, t: f64) -> f64 {
        let tr = &self.magnetic[3 * dot.index() + axis];
        tr.get(self.magnetic_cell(t)).copied().unwrap_or(0.0)
    }

    /// `δJ/J` on `channel` at time `t`.
    pub fn exchange_at(&self, channel: usize, t: f64) -> f64 {
        let tr = &self.exchange[channel];
        let k = Self::cell(self.dt_exchange, tr.len(), t);
        tr.get(k).copied().unwrap_or(0.0)
    }

    /// Multiply the magnetic traces by `mag` and the exchange traces by `ex`.
    pub fn scaled(&self, mag: f64, ex: f64) -> Self {
        let mut r = self.clone();
        r.magnetic.iter_mut().flatten().for_each(|v| *v *= mag);
        r.exchange.iter_mut().flatten().for_each(|v| *v *= ex);
        r
    }
}

thread_local! {
    static PLANNER: RefCell<FftPlanner<f64>> = RefCell::new(FftPlanner::new());
}

fn synthesize_with(psd: &PowerLawPsd, dt: f64, n: usize, rng: &mut ChaCha8Rng) -> Vec<f64> {
    if psd.amplitude == 0.0 {
        return vec![0.0; n];
    }
    let dnu = 1.0 / (n as f64 * dt);
    let nyquist = 0.5 / dt;
    let mut spec = vec![Complex::new(0.0, 0.0); n];
    let half = n / 2;
    for k in 1..=half {
        let nu = k as f64 * dnu;
        let hi = (nu + 0.5 * dnu).min(nyquist);
        let var = psd.band_integral(nu - 0.5 * dnu, hi);
        let a: f64 = rng.sample(StandardNormal);
        let b: f64 = rng.sample(StandardNormal);
        let sd = var.sqrt();
        if 2 * k == n {
            spec[k] = Complex::new(a * sd, 0.0);
        } else {
            let z = Complex::new(a * sd, -b * sd) * 0.5;
            spec[k] = z;
            spec[n - k] = z.conj();
        }
    }
    PLANNER.with(|p| p.borrow_mut().plan_fft_inverse(n).process(&mut spec));
    let offset_sd = psd.band_integral(psd.nu_lo, 0.5 * dnu).sqrt();
    let offset: f64 = rng.sample::<f64, _>(StandardNormal) * offset_sd;
    spec.iter().map(|z| z.re + offset).collect()
}

fn check_grid(dt: f64, n: usize) -> Result<()> {
    if !(dt > 0.0 && dt.is_finite()) {
        return Err(invalid(format!("dt must be positive, got {dt}")));
    }
    if n < 2 {
        return Err(invalid(format!("need at least 2 samples, got {n}")));
    }
    Ok(())
}

/// Stationary Gaussian trace with one-sided spectrum `psd`, band-limited to
/// `[nu_lo, 1/(2dt)]`. Components below half the bin spacing are lumped into
/// a constant offset.
pub fn synthesize_trace(psd: &PowerLawPsd, dt: f64, n: usize, seed: u64) -> Result<Vec<f64>> {
    check_grid(dt, n)?;
    psd.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    Ok(synthesize_with(psd, dt, n, &mut rng))
}

/// RNG for one channel of one realization.
pub(crate) fn channel_rng(seed: u64, index: u64, channel: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(index.wrapping_mul(16).wrapping_add(channel));
    rng
}

/// Nine magnetic traces on a `dt_magnetic` grid and two exchange traces on a
/// `dt_exchange` grid, covering `duration`. Depends only on the model,
/// the grids, `seed` and `index`.
pub fn realize_noise(
    model: &NoiseModel,
    duration: f64,
    dt_magnetic: f64,
    dt_exchange: f64,
    seed: u64,
    index: u64,
) -> Result<NoiseRealization> {
    model.validate()?;
    if !(duration > 0.0) {
        return Err(invalid(format!("duration must be positive, got {duration}")));
    }
    let n_mag = ((duration / dt_magnetic).ceil() as usize + 1).max(2);
    let n_ex = ((duration / dt_exchange).ceil() as usize + 1).max(2);
    check_grid(dt_magnetic, n_mag)?;
    check_grid(dt_exchange, n_ex)?;
    let magnetic = std::array::from_fn(|c| {
        let mut rng = channel_rng(seed, index, c as u64);
        synthesize_with(&model.magnetic, dt_magnetic, n_mag, &mut rng)
    });
    let exchange = std::array::from_fn(|c| {
        let mut rng = channel_rng(seed, index, 9 + c as u64);
        synthesize_with(&model.exchange, dt_exchange, n_ex, &mut rng)
    });
    Ok(NoiseRealization {
        dt_magnetic,
        magnetic,
        dt_exchange,
        exchange,
        b0_tesla: model.b0_tesla,
        seed,
        index,
    })
}

/// Write `t,value` rows for one trace.
pub fn write_trace_csv<W: Write>(mut w: W, trace: &[f64], dt: f64) -> std::io::Result<()> {
    writeln!(w, "t,value")?;
    for (k, v) in trace.iter().enumerate() {
        writeln!(w, "{:e},{:e}", k as f64 * dt, v)?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn mean_var(x: &[f64]) -> (f64, f64) {
        let n = x.len() as f64;
        let m = x.iter().sum::<f64>() / n;
        (m, x.iter().map(|v| (v - m).powi(2)).sum::<f64>() / n)
    }

    /// Ensemble-averaged one-sided periodogram `(2 dt / n)|X_k|²`.
    fn periodogram(psd: &PowerLawPsd, dt: f64, n: usize, traces: u64) -> Vec<f64> {
        let mut acc = vec![0.0; n / 2 + 1];
        let mut planner = FftPlanner::new();
        let fft = planner.plan_fft_forward(n);
        for s in 0..traces {
            let x = synthesize_trace(psd, dt, n, s).unwrap();
            let mut buf: Vec<Complex<f64>> = x.iter().map(|&v| Complex::new(v, 0.0)).collect();
            fft.process(&mut buf);
            for k in 1..=n / 2 {
                acc[k] += 2.0 * dt / n as f64 * buf[k].norm_sqr() / traces as f64;
            }
        }
        acc
    }

    #[test]
    fn psd_shape() {
        let p = PowerLawPsd::magnetic(2.0).with_nu_lo(1.0);
        assert!((p.value(100.0) - 0.02).abs() < 1e-15);
        assert!((p.value(2e4) - 2.0 / 1e4 / 4.0).abs() < 1e-15);
        assert_eq!(p.value(0.5), 0.0);
        let e = PowerLawPsd::exchange(1.0).with_nu_lo(1.0);
        assert_eq!(e.value(2e9), 0.0);
        let total = p.band_integral(1.0, f64::INFINITY);
        assert!((total - 2.0 * ((1e4f64).ln() + 1.0)).abs() < 1e-12);
    }

    #[test]
    fn band_integral_matches_quadrature() {
        let p = PowerLawPsd::magnetic(3.0).with_nu_lo(5.0);
        let (a, b) = (2.0f64, 5e4f64);
        let n = 400_000;
        let (la, lb) = (a.ln(), b.ln());
        let h = (lb - la) / n as f64;
        let q: f64 = (0..n)
            .map(|k| {
                let nu = (la + (k as f64 + 0.5) * h).exp();
                p.value(nu) * nu * h
            })
            .sum();
        assert!((q - p.band_integral(a, b)).abs() < 1e-5 * q);
    }

    #[test]
    fn white_variance() {
        let psd = PowerLawPsd::white(2.0, 1e3);
        let dt = 0.5e-3;
        let mut v = 0.0;
        for s in 0..1000 {
            let x = synthesize_trace(&psd, dt, 256, s).unwrap();
            v += mean_var(&x).1 + mean_var(&x).0.powi(2);
        }
        v /= 1000.0;
        assert!((v / 2e3 - 1.0).abs() < 0.05, "variance {v}");
    }

    #[test]
    fn one_over_f_slope() {
        let psd = PowerLawPsd::exchange(1.0).with_nu_lo(0.1);
        let (dt, n) = (1e-3, 4096);
        let pg = periodogram(&psd, dt, n, 200);
        let dnu = 1.0 / (n as f64 * dt);
        let pts: Vec<(f64, f64)> = (4..n / 2)
            .step_by(7)
            .map(|k| ((k as f64 * dnu).ln(), pg[k].ln()))
            .collect();
        let m = pts.len() as f64;
        let mx = pts.iter().map(|p| p.0).sum::<f64>() / m;
        let my = pts.iter().map(|p| p.1).sum::<f64>() / m;
        let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
        let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
        let slope = sxy / sxx;
        assert!((slope + 1.0).abs() < 0.1, "slope {slope}");
    }

    #[test]
    fn periodogram_matches_one_sided_psd() {
        let psd = PowerLawPsd::magnetic(1.0).with_nu_lo(0.01);
        let (dt, n) = (2e-5, 4096);
        let pg = periodogram(&psd, dt, n, 400);
        let dnu = 1.0 / (n as f64 * dt);
        let mut k0 = 2;
        while k0 < n / 2 {
            let k1 = ((k0 as f64 * 1.5) as usize).min(n / 2);
            let est: f64 = (k0..k1).map(|k| pg[k]).sum::<f64>();
            let want: f64 = (k0..k1).map(|k| psd.band_integral((k as f64 - 0.5) * dnu, (k as f64 + 0.5) * dnu) / dnu).sum();
            assert!((est / want - 1.0).abs() < 0.1, "bin {k0}: {est} vs {want}");
            k0 = k1;
        }
    }

    #[test]
    fn zero_amplitude_is_silent() {
        let x = synthesize_trace(&PowerLawPsd::magnetic(0.0), 1e-8, 100, 3).unwrap();
        assert!(x.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn rejects_bad_grids() {
        let p = PowerLawPsd::magnetic(1.0);
        assert!(synthesize_trace(&p, 0.0, 10, 1).is_err());
        assert!(synthesize_trace(&p, 1e-8, 1, 1).is_err());
    }

    #[test]
    fn realization_is_reproducible() {
        let m = NoiseModel::new(1e10, 1e-5, 50e-6).for_experiment_time(1e-3);
        let a = realize_noise(&m, 2e-6, 1e-8, 1e-8, 7, 3).unwrap();
        let b = realize_noise(&m, 2e-6, 1e-8, 1e-8, 7, 3).unwrap();
        assert_eq!(a, b);
        let c = realize_noise(&m, 2e-6, 1e-8, 1e-8, 7, 4).unwrap();
        assert_ne!(a.magnetic[0], c.magnetic[0]);
    }

    #[test]
    fn components_uncorrelated_and_scaled() {
        let m = NoiseModel::new(1e10, 1e-5, 0.0).for_experiment_time(1.0);
        let shots = 600;
        let mut cross = Vec::with_capacity(shots);
        let mut var = 0.0;
        for i in 0..shots {
            let r = realize_noise(&m, 1e-5, 1e-8, 1e-8, 11, i as u64).unwrap();
            cross.push(r.magnetic[0][17] * r.magnetic[4][17]);
            var += r.magnetic[2][100].powi(2) / shots as f64;
        }
        let (cm, cv) = mean_var(&cross);
        assert!(cm.abs() < 3.0 * (cv / shots as f64).sqrt());
        let want = m.magnetic.band_integral(m.magnetic.nu_lo, 0.5e8);
        // Band-to-band sampling spread of a 1/f ensemble is wide; 600 draws of
        // a Gaussian give a ~6% one-sigma relative error on the variance.
        assert!((var / want - 1.0).abs() < 0.2, "{var} vs {want}");
    }

    #[test]
    fn ensemble_std_matches_parseval() {
        let psd = PowerLawPsd::exchange(1.0).with_nu_lo(1.0);
        let (dt, n) = (1e-6, 1024);
        let draws = 4000;
        let mut v = 0.0;
        for s in 0..draws {
            let x = synthesize_trace(&psd, dt, n, 1000 + s).unwrap();
            v += x[n / 3].powi(2) / draws as f64;
        }
        let want = psd.band_integral(1.0, 0.5 / dt);
        assert!((v / want - 1.0).abs() < 0.05, "{v} vs {want}");
    }

    #[test]
    fn stationarity() {
        let psd = PowerLawPsd::magnetic(1.0).with_nu_lo(0.1);
        let (dt, n) = (1e-5, 2048);
        let draws = 2000;
        let (mut m, mut v1, mut v2) = (0.0, 0.0, 0.0);
        for s in 0..draws {
            let x = synthesize_trace(&psd, dt, n, s).unwrap();
            m += x[10] / draws as f64;
            v1 += x[100].powi(2) / draws as f64;
            v2 += x[1500].powi(2) / draws as f64;
        }
        assert!(m.abs() < 3.0 * (v1 / draws as f64).sqrt());
        assert!((v1 / v2 - 1.0).abs() < 0.1);
    }

    #[test]
    fn larmor_conversion() {
        assert!((larmor_frequency(50e-6) - 1.3996e6).abs() < 1.0);
    }
}
