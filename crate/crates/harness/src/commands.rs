// Copyright 2026 The nzdd Authors
// SPDX-License-Identifier: Apache-2.0

//! Experiment drivers behind the CLI subcommands.

use crate::config::{derive_seed, geometric_grid, HarnessConfig};
use crate::output::{num, Sink};
use crate::svg::{Chart, Series};
use crate::HarnessError;
use nzdd_core::calibrate::{calibrate_exchange, calibrate_magnetic, Calibration, CalibrationSettings};
use nzdd_core::engine::{blind_analysis, run_decay_experiment, DecayConfig, DecayCurve};
use nzdd_core::filter::{
    ff_exchange_shaped, ff_magnetic_encoded_error_nz1y, ff_magnetic_infidelity_nz1y, predict_error, FilterFunctionQuery,
    Prediction,
};
use nzdd_core::fit::{analyze_decay, DecayAnalysis, Weighting};
use nzdd_core::calibrate::first_crossing;
use nzdd_core::noise::{larmor_frequency, NoiseModel, PowerLawPsd};
use nzdd_core::schedule::{build_family, Family, PulseShape};

/// Amplitude search ranges for the two calibrations.
pub const MAGNETIC_BOUNDS: (f64, f64) = (1e8, 1e13);
pub const EXCHANGE_BOUNDS: (f64, f64) = (1e-8, 1e-3);

/// A resolved configuration, its master seed and the output sink.
#[derive(Clone, Debug)]
pub struct Context {
    pub cfg: HarnessConfig,
    pub seed: u64,
    pub sink: Sink,
}

impl Context {
    pub fn new(cfg: HarnessConfig, seed: u64) -> Result<Self, HarnessError> {
        cfg.validate()?;
        let sink = Sink::new(&cfg.out_dir, cfg.hash(), seed)?;
        Ok(Self { cfg, seed, sink })
    }

    fn model(&self) -> NoiseModel {
        NoiseModel::new(self.cfg.magnetic_amplitude, self.cfg.exchange_amplitude, self.cfg.b0_tesla())
    }
}

#[derive(Clone, Copy, Debug)]
pub struct CalibrateReport {
    pub magnetic: Calibration,
    pub exchange: Calibration,
}

/// Fit both noise amplitudes to the T2* and Rabi targets and write a
/// config snapshot carrying them.
pub fn calibrate(ctx: &Context) -> Result<CalibrateReport, HarnessError> {
    let cfg = &ctx.cfg;
    let b0 = cfg.b0_tesla();
    let mag = CalibrationSettings::new(cfg.calibration_shots, derive_seed(ctx.seed, "calibrate/magnetic"), b0);
    let ex = CalibrationSettings::new(cfg.calibration_shots, derive_seed(ctx.seed, "calibrate/exchange"), b0);
    let magnetic = calibrate_magnetic(cfg.target_t2star_us * 1e-6, mag, MAGNETIC_BOUNDS)?;
    let exchange = calibrate_exchange(cfg.target_rabi, cfg.shape()?, ex, EXCHANGE_BOUNDS)?;

    let rows = [("t2star_s", &magnetic), ("rabi_oscillations", &exchange)]
        .iter()
        .map(|(name, c)| {
            vec![name.to_string(), num(c.target), num(c.achieved), num(c.amplitude), c.evaluations.to_string()]
        })
        .collect::<Vec<_>>();
    ctx.sink.table("calibration.csv", &["quantity", "target", "achieved", "amplitude", "evaluations"], &rows)?;
    let mut snap = cfg.clone();
    snap.magnetic_amplitude = magnetic.amplitude;
    snap.exchange_amplitude = exchange.amplitude;
    snap.seed = Some(ctx.seed);
    ctx.sink.text("calibrated.conf", &snap.to_text())?;
    Ok(CalibrateReport { magnetic, exchange })
}

#[derive(Clone, Debug)]
pub struct DecaySummary {
    pub family: Family,
    pub analysis: DecayAnalysis,
    /// Interpolated `r` where the difference curve first drops below 1/e.
    pub r_1e_crossing: Option<f64>,
    pub curve: DecayCurve,
}

impl DecaySummary {
    /// Largest `|sum − offset| / stderr` over the r grid.
    pub fn max_sum_deviation(&self) -> f64 {
        let b = blind_analysis(&self.curve);
        b.sum
            .iter()
            .zip(&b.stderr)
            .skip(1)
            .map(|(s, e)| if *e > 0.0 { (s - 1.0).abs() / e } else { 0.0 })
            .fold(0.0, f64::max)
    }
}

fn decay_curve_rows(curve: &DecayCurve) -> Vec<Vec<String>> {
    let b = blind_analysis(curve);
    (0..curve.r_values.len())
        .map(|i| {
            vec![
                curve.r_values[i].to_string(),
                num(curve.p0_no_x[i]),
                num(curve.p0_with_x[i]),
                num(curve.stderr_no_x[i]),
                num(curve.stderr_with_x[i]),
                num(b.difference[i]),
                num(b.sum[i]),
                num(b.stderr[i]),
            ]
        })
        .collect()
}

fn decay_chart(s: &DecaySummary) -> Chart {
    let b = blind_analysis(&s.curve);
    let xs: Vec<f64> = b.r_values.iter().map(|&r| r as f64).collect();
    let pts = |ys: &[f64]| xs.iter().copied().zip(ys.iter().copied()).collect::<Vec<_>>();
    let r_max = xs.last().copied().unwrap_or(1.0);
    let line = |f: &nzdd_core::fit::FitResult| {
        (0..=200)
            .map(|k| {
                let r = r_max * k as f64 / 200.0;
                (r, f.offset + f.amplitude * (-f.rate * r).exp())
            })
            .collect::<Vec<_>>()
    };
    Chart {
        title: format!("{} decay", s.family.name()),
        x_label: "pulse pairs r".into(),
        y_label: "P(S12 = 0) combination".into(),
        log_x: false,
        log_y: false,
        series: vec![
            Series::markers("difference", pts(&b.difference), Some(b.stderr.clone())),
            Series::markers("sum", pts(&b.sum), Some(b.stderr.clone())),
            Series::line("difference fit", line(&s.analysis.difference)),
            Series::line("sum fit", line(&s.analysis.sum)),
        ],
    }
}

/// Run one decay experiment and its analysis.
pub fn decay_one(
    model: &NoiseModel,
    family: Family,
    r_grid: Vec<usize>,
    t_idle: f64,
    shape: PulseShape,
    shots: usize,
    seed: u64,
) -> Result<DecaySummary, HarnessError> {
    let cfg = DecayConfig::new(family, r_grid, t_idle, shape, shots, seed);
    let curve = run_decay_experiment(&cfg, model)?;
    let analysis = analyze_decay(&curve, Weighting::Uniform)?;
    let b = blind_analysis(&curve);
    let xs: Vec<f64> = b.r_values.iter().map(|&r| r as f64).collect();
    let r_1e_crossing = first_crossing(&xs, &b.difference, (-1f64).exp());
    Ok(DecaySummary { family, analysis, r_1e_crossing, curve })
}

/// Decay curves for every configured family at the configured timing.
pub fn decay(ctx: &Context) -> Result<Vec<DecaySummary>, HarnessError> {
    let cfg = &ctx.cfg;
    let model = ctx.model();
    let shape = cfg.shape()?;
    let mut out = Vec::new();
    for &family in &cfg.families {
        let grid = geometric_grid(family.r_step(), cfg.r_max(family), cfg.r_points);
        let seed = derive_seed(ctx.seed, &format!("decay/{}", family.name()));
        let s = decay_one(&model, family, grid, cfg.t_idle_ns * 1e-9, shape, cfg.shots, seed)?;
        let tag = family.name().to_ascii_lowercase();
        ctx.sink.table(
            &format!("decay_{tag}.csv"),
            &["r", "p0_no_x", "p0_with_x", "stderr_no_x", "stderr_with_x", "difference", "sum", "stderr"],
            &decay_curve_rows(&s.curve),
        )?;
        ctx.sink.text(&format!("decay_{tag}.svg"), &decay_chart(&s).render())?;
        out.push(s);
    }
    let rows: Vec<Vec<String>> = out
        .iter()
        .map(|s| {
            let a = &s.analysis;
            vec![
                s.family.name().to_string(),
                num(a.eps()),
                num(a.eps_stderr()),
                num(a.t2()),
                num(a.leak_per_pulse()),
                num(a.leak_stderr()),
                num(a.difference.r_1e()),
                s.r_1e_crossing.map(num).unwrap_or_else(|| "nan".into()),
            ]
        })
        .collect();
    ctx.sink.table(
        "decay_summary.csv",
        &["family", "eps", "eps_stderr", "T2_s", "leak_per_pulse", "leak_stderr", "r_1e_fit", "r_1e_crossing"],
        &rows,
    )?;
    Ok(out)
}

/// Filter-function prediction for NZ1y at `t_idle` over `r` pulse pairs,
/// with the low-frequency cutoff of an experiment lasting `averaging_time`.
pub fn predict_nz1y(
    cfg: &HarnessConfig,
    t_idle: f64,
    r: usize,
    averaging_time: f64,
) -> Result<Prediction, HarnessError> {
    let shape = cfg.shape()?;
    let nu_lo = 1.0 / (10.0 * averaging_time);
    let q = FilterFunctionQuery {
        theta: std::f64::consts::FRAC_PI_2,
        phi: std::f64::consts::FRAC_PI_2,
        nu: 0.0,
        m: r / 3,
        t_idle,
        nu0: larmor_frequency(cfg.ff_b0_tesla()),
        shape,
    };
    let pb = PowerLawPsd::magnetic(cfg.magnetic_amplitude).with_nu_lo(nu_lo);
    let pe = PowerLawPsd::exchange(cfg.exchange_amplitude).with_nu_lo(nu_lo);
    Ok(predict_error(&pb, &pe, &q)?)
}

fn schedule_duration(family: Family, r: usize, t_idle: f64, shape: PulseShape) -> Result<f64, HarnessError> {
    Ok(build_family(family, r, t_idle, shape)?.duration())
}

#[derive(Clone, Debug)]
pub struct SweepRow {
    pub t_idle: f64,
    pub r_max: usize,
    pub eps_mc: f64,
    pub eps_mc_stderr: f64,
    pub leak_mc: f64,
    pub leak_mc_stderr: f64,
    pub eps_ff: f64,
    pub leak_ff: f64,
    pub t2: f64,
}

/// `r_max` for a sweep point: enough pairs for the difference curve to fall
/// to about `e^{-3}` at the predicted error rate, within the configured cap.
pub fn adaptive_r_max(eps: f64, cap: usize) -> usize {
    let want = if eps > 0.0 { (1.5 / eps) as usize } else { cap };
    (want.clamp(300.min(cap), cap) / 3).max(1) * 3
}

/// NZ1y idle-time sweep: Monte Carlo error and leakage per pulse next to
/// the filter-function prediction.
pub fn sweep_idle(ctx: &Context) -> Result<Vec<SweepRow>, HarnessError> {
    let cfg = &ctx.cfg;
    let model = ctx.model();
    let shape = cfg.shape()?;
    let mut rows = Vec::new();
    for &ti_ns in &cfg.t_idle_sweep_ns {
        let ti = ti_ns * 1e-9;
        let pr = cfg.predict_r;
        let rough = predict_nz1y(cfg, ti, pr, cfg.shots as f64 * schedule_duration(Family::Nz1y, pr, ti, shape)?)?;
        let r_max = adaptive_r_max(rough.eps_per_pulse(), cfg.r_max_nz1y);
        let averaging = cfg.shots as f64 * schedule_duration(Family::Nz1y, r_max, ti, shape)?;
        let p = predict_nz1y(cfg, ti, pr, averaging)?;
        let grid = geometric_grid(3, r_max, cfg.r_points);
        let seed = derive_seed(ctx.seed, &format!("sweep/{ti_ns}"));
        let s = decay_one(&model, Family::Nz1y, grid, ti, shape, cfg.shots, seed)?;
        let a = &s.analysis;
        rows.push(SweepRow {
            t_idle: ti,
            r_max,
            eps_mc: a.eps(),
            eps_mc_stderr: a.eps_stderr(),
            leak_mc: a.leak_per_pulse(),
            leak_mc_stderr: a.leak_stderr(),
            eps_ff: p.eps_per_pulse(),
            leak_ff: p.leak_per_pulse(),
            t2: a.t2(),
        });
    }
    let table: Vec<Vec<String>> = rows
        .iter()
        .map(|r| {
            vec![
                num(r.t_idle),
                num(r.eps_mc),
                num(r.leak_mc),
                num(r.eps_ff),
                num(r.leak_ff),
                num(r.t2),
                num(r.eps_mc_stderr),
                num(r.leak_mc_stderr),
                r.r_max.to_string(),
            ]
        })
        .collect();
    ctx.sink.table(
        "sweep_idle.csv",
        &["t_idle", "eps_mc", "leak_mc", "eps_ff", "leak_ff", "T2", "eps_mc_stderr", "leak_mc_stderr", "r_max"],
        &table,
    )?;
    let ns = |r: &SweepRow| r.t_idle * 1e9;
    let chart = Chart {
        title: "NZ1y error per pulse vs idle time".into(),
        x_label: "t_idle (ns)".into(),
        y_label: "per pulse".into(),
        log_x: false,
        log_y: true,
        series: vec![
            Series::markers("error (MC)", rows.iter().map(|r| (ns(r), r.eps_mc)).collect(), Some(rows.iter().map(|r| r.eps_mc_stderr).collect())),
            Series::markers("leakage (MC)", rows.iter().map(|r| (ns(r), r.leak_mc)).collect(), Some(rows.iter().map(|r| r.leak_mc_stderr).collect())),
            Series::line("error (FF)", rows.iter().map(|r| (ns(r), r.eps_ff)).collect()),
            Series::line("leakage (FF)", rows.iter().map(|r| (ns(r), r.leak_ff)).collect()),
        ],
    };
    ctx.sink.text("sweep_idle.svg", &chart.render())?;
    let t2 = Chart {
        title: "NZ1y T2 vs idle time".into(),
        x_label: "t_idle (ns)".into(),
        y_label: "T2 (us)".into(),
        series: vec![Series::markers("T2 (MC)", rows.iter().map(|r| (ns(r), r.t2 * 1e6)).collect(), None)],
        ..Default::default()
    };
    ctx.sink.text("sweep_t2.svg", &t2.render())?;
    Ok(rows)
}

/// One filter-function sample.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct FfPoint {
    pub nu: f64,
    pub exchange: f64,
    pub magnetic_infidelity: f64,
    pub magnetic_encoded: f64,
}

/// Log-spaced frequency grid.
pub fn log_grid(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    (0..n).map(|k| lo * (hi / lo).powf(k as f64 / (n - 1) as f64)).collect()
}

/// NZ1y filter functions on a frequency grid.
pub fn ff_curve(
    shape: PulseShape,
    t_idle: f64,
    r: usize,
    nu0: f64,
    grid: &[f64],
) -> Result<Vec<FfPoint>, HarnessError> {
    let rect = PulseShape::rectangular(shape.t_pulse)?;
    grid.iter()
        .map(|&nu| {
            let q = FilterFunctionQuery::nz1y(nu, r / 3, shape.t_pulse, t_idle, nu0)?;
            Ok(FfPoint {
                nu,
                exchange: ff_exchange_shaped(&q.with_shape(shape))?,
                magnetic_infidelity: ff_magnetic_infidelity_nz1y(&q.with_shape(rect))?,
                magnetic_encoded: ff_magnetic_encoded_error_nz1y(&q.with_shape(rect))?,
            })
        })
        .collect()
}

/// One filter-function curve keyed by `(t_pulse_ns, t_idle_ns, r)`.
pub type FfCurve = ((f64, f64, usize), Vec<FfPoint>);

/// Filter-function dump for every configured (timing, r) combination.
pub fn ff(ctx: &Context) -> Result<Vec<FfCurve>, HarnessError> {
    let cfg = &ctx.cfg;
    let grid = log_grid(cfg.ff_nu_min, cfg.ff_nu_max, cfg.ff_points);
    let nu0 = larmor_frequency(cfg.ff_b0_tesla());
    let mut out = Vec::new();
    let mut rows = Vec::new();
    for &(tp, ti) in &cfg.ff_timings_ns {
        let shape = if cfg.trapezoid {
            PulseShape::trapezoidal(tp * 1e-9, cfg.t_ramp_ns * 1e-9, cfg.alpha)?
        } else {
            PulseShape::rectangular(tp * 1e-9)?
        };
        for &r in &cfg.ff_r_list {
            let pts = ff_curve(shape, ti * 1e-9, r, nu0, &grid)?;
            for p in &pts {
                rows.push(vec![
                    tp.to_string(),
                    ti.to_string(),
                    r.to_string(),
                    num(p.nu),
                    num(p.exchange),
                    num(p.magnetic_infidelity),
                    num(p.magnetic_encoded),
                    num((p.magnetic_infidelity - p.magnetic_encoded).max(0.0)),
                ]);
            }
            out.push(((tp, ti, r), pts));
        }
    }
    ctx.sink.table(
        "ff.csv",
        &["t_pulse_ns", "t_idle_ns", "r", "nu_hz", "f_exchange", "f_magnetic_infidelity", "f_magnetic_encoded", "f_magnetic_leakage"],
        &rows,
    )?;
    for (title, pick) in [
        ("exchange", (|p: &FfPoint| p.exchange) as fn(&FfPoint) -> f64),
        ("magnetic", |p: &FfPoint| p.magnetic_infidelity),
    ] {
        let chart = Chart {
            title: format!("NZ1y {title} filter function"),
            x_label: "frequency (Hz)".into(),
            y_label: "F (s^2)".into(),
            log_x: true,
            log_y: true,
            series: out
                .iter()
                .map(|((tp, ti, r), pts)| {
                    Series::line(format!("r={r} {tp}/{ti} ns"), pts.iter().map(|p| (p.nu, pick(p))).collect())
                })
                .collect(),
        };
        ctx.sink.text(&format!("ff_{title}.svg"), &chart.render())?;
    }
    Ok(out)
}

/// Filter-function prediction at the configured timing.
pub fn predict(ctx: &Context) -> Result<Prediction, HarnessError> {
    let cfg = &ctx.cfg;
    let ti = cfg.t_idle_ns * 1e-9;
    let r = cfg.predict_r;
    let averaging = cfg.shots as f64 * schedule_duration(Family::Nz1y, r, ti, cfg.shape()?)?;
    let p = predict_nz1y(cfg, ti, r, averaging)?;
    ctx.sink.table(
        "predict.csv",
        &["t_idle", "eps_ff", "leak_ff", "r", "infidelity", "encoded", "leakage", "quad_error"],
        &[vec![
            num(ti),
            num(p.eps_per_pulse()),
            num(p.leak_per_pulse()),
            r.to_string(),
            num(p.infidelity),
            num(p.encoded),
            num(p.leakage),
            num(p.quad_error),
        ]],
    )?;
    Ok(p)
}
