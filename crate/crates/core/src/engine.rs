// Copyright 2026 The nzdd Authors
// SPDX-License-Identifier: Apache-2.0

//! Monte Carlo propagation under control, Zeeman and noise Hamiltonians.
//!
//! The total Hamiltonian is
//! `H(t) = −ω₀ S_z + Σ_j b⃗_j(t)·S⃗_j + J(t)(1 + δJ/J) S⃗_j·S⃗_k`, where the
//! exchange envelope follows the pulse sensitivity profile and integrates to
//! the segment's target angle.
//!
//! [`propagate`] is the plain reference: fixed steps, each exponentiated
//! through an 8×8 Hermitian eigendecomposition. [`Simulator`] is the
//! production path. It propagates the two gauge states exactly for
//! piecewise-constant noise, using 2×2 rotations during idles and a 4×4
//! exponential of the active pair during pulses, and reads out at
//! checkpoints along a single long trajectory.

use crate::error::{invalid, Result};
use crate::noise::{realize_noise, NoiseModel, NoiseRealization};
use crate::schedule::{build_family, Family, PulseSchedule, PulseShape, SegmentKind};
use crate::spin::{
    dfs_frame_gate, dfs_matrix, exchange_matrix, expm_hermitian, spin_matrix, Axis, Basis, Dot,
    FrameGate, LabeledOperator, Matrix8, Pair, C64, ZERO,
};
use rayon::prelude::*;
use std::io::Write;

type M2 = [[C64; 2]; 2];
type M4 = [[C64; 4]; 4];
pub(crate) type State = [C64; 8];

/// Bit position of a dot in the product index (dot 1 is the high bit).
fn bit(d: usize) -> usize {
    2 - d
}

/// `exp(−i dt ω⃗·σ⃗/2)`.
fn su2(w: [f64; 3], dt: f64) -> M2 {
    let norm = (w[0] * w[0] + w[1] * w[1] + w[2] * w[2]).sqrt();
    if norm == 0.0 {
        return [[C64::new(1.0, 0.0), ZERO], [ZERO, C64::new(1.0, 0.0)]];
    }
    let half = 0.5 * norm * dt;
    let (s, c) = half.sin_cos();
    let (nx, ny, nz) = (w[0] / norm, w[1] / norm, w[2] / norm);
    [
        [C64::new(c, -s * nz), C64::new(-s * ny, -s * nx)],
        [C64::new(s * ny, -s * nx), C64::new(c, s * nz)],
    ]
}

fn mul4(a: &M4, b: &M4) -> M4 {
    let mut out = [[ZERO; 4]; 4];
    for i in 0..4 {
        for k in 0..4 {
            let aik = a[i][k];
            for j in 0..4 {
                out[i][j] += aik * b[k][j];
            }
        }
    }
    out
}

/// `exp(−i h dt)` by scaling and squaring with a degree-12 Taylor kernel.
fn expm4(h: &M4, dt: f64) -> M4 {
    let norm = h
        .iter()
        .map(|r| r.iter().map(|z| z.norm()).sum::<f64>())
        .fold(0.0, f64::max)
        * dt.abs();
    let mut squarings = 0;
    let mut scale = dt;
    let mut n = norm;
    while n > 0.25 {
        n *= 0.5;
        scale *= 0.5;
        squarings += 1;
    }
    let x: M4 = std::array::from_fn(|i| std::array::from_fn(|j| h[i][j] * C64::new(0.0, -scale)));
    let mut p: M4 = std::array::from_fn(|i| {
        std::array::from_fn(|j| if i == j { C64::new(1.0, 0.0) } else { ZERO })
    });
    for k in (1..=12).rev() {
        let mut xp = mul4(&x, &p);
        for (i, row) in xp.iter_mut().enumerate() {
            for z in row.iter_mut() {
                *z /= k as f64;
            }
            row[i] += 1.0;
        }
        p = xp;
    }
    for _ in 0..squarings {
        p = mul4(&p, &p);
    }
    p
}

fn apply_1q(psi: &mut State, b: usize, u: &M2) {
    let mask = 1 << b;
    for i in 0..8 {
        if i & mask == 0 {
            let (x0, x1) = (psi[i], psi[i | mask]);
            psi[i] = u[0][0] * x0 + u[0][1] * x1;
            psi[i | mask] = u[1][0] * x0 + u[1][1] * x1;
        }
    }
}

/// Apply a two-spin gate in the local basis `2·x_a + x_b`.
fn apply_2q(psi: &mut State, ba: usize, bb: usize, u: &M4) {
    let (ma, mb) = (1 << ba, 1 << bb);
    for base in 0..8 {
        if base & (ma | mb) != 0 {
            continue;
        }
        let idx = [base, base | mb, base | ma, base | ma | mb];
        let x = idx.map(|k| psi[k]);
        for (r, &k) in idx.iter().enumerate() {
            psi[k] = u[r][0] * x[0] + u[r][1] * x[1] + u[r][2] * x[2] + u[r][3] * x[3];
        }
    }
}

fn apply8(psi: &mut State, m: &Matrix8) {
    let x = *psi;
    for (i, out) in psi.iter_mut().enumerate() {
        *out = (0..8).map(|j| m[(i, j)] * x[j]).sum();
    }
}

/// `ω⃗·σ⃗/2` as a 2×2 matrix.
fn half_pauli(w: [f64; 3]) -> M2 {
    [
        [C64::new(0.5 * w[2], 0.0), C64::new(0.5 * w[0], -0.5 * w[1])],
        [C64::new(0.5 * w[0], 0.5 * w[1]), C64::new(-0.5 * w[2], 0.0)],
    ]
}

/// `J S⃗_a·S⃗_b + ω⃗_a·S⃗_a + ω⃗_b·S⃗_b` in the local basis `2·x_a + x_b`.
fn pair_hamiltonian(j: f64, wa: [f64; 3], wb: [f64; 3]) -> M4 {
    let mut h = [[ZERO; 4]; 4];
    let q = 0.25 * j;
    h[0][0] += q;
    h[1][1] -= q;
    h[2][2] -= q;
    h[3][3] += q;
    h[1][2] += 2.0 * q;
    h[2][1] += 2.0 * q;
    let (ua, ub) = (half_pauli(wa), half_pauli(wb));
    for xa in 0..2 {
        for ya in 0..2 {
            for xb in 0..2 {
                h[2 * xa + xb][2 * ya + xb] += ua[xa][ya];
            }
        }
    }
    for xa in 0..2 {
        for xb in 0..2 {
            for yb in 0..2 {
                h[2 * xa + xb][2 * xa + yb] += ub[xb][yb];
            }
        }
    }
    h
}

fn exchange_channel(pair: Pair) -> usize {
    match pair {
        Pair::P12 => 0,
        _ => 1,
    }
}

/// Total field on each spin, including the Zeeman term, in rad/s.
fn spin_fields(b: &[[f64; 3]; 3], omega0: f64) -> [[f64; 3]; 3] {
    std::array::from_fn(|d| [b[d][0], b[d][1], b[d][2] - omega0])
}

/// Split `[start, end]` at magnetic cell boundaries into `(cell, length)`.
fn cell_steps(noise: &NoiseRealization, start: f64, end: f64) -> Vec<(usize, f64)> {
    let mut out = Vec::new();
    let mut cell = noise.magnetic_cell(start);
    let mut t = start;
    while t < end {
        let stop = noise.next_magnetic_boundary(cell).min(end);
        if stop > t {
            out.push((cell, stop - t));
            t = stop;
        }
        if stop >= end {
            break;
        }
        cell += 1;
    }
    out
}

/// Which encoded states are propagated.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Gauge {
    /// Average over `m = ±½`, i.e. the mixed initial state.
    Mixed,
    Up,
    Down,
}

/// Per-checkpoint readout of one trajectory, averaged over the gauge.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct Readout {
    /// `P(S12 = 0)` without a final X.
    pub p0: f64,
    /// `P(S12 = 0)` after a final X.
    pub p0_x: f64,
    /// Quadruplet population.
    pub leak: f64,
}

/// Fast structured propagator.
#[derive(Clone, Debug)]
pub struct Simulator {
    /// Number of equal-integral substeps per exponential ramp.
    pub ramp_substeps: usize,
    x_gate: Matrix8,
    dfs: Matrix8,
}

impl Default for Simulator {
    fn default() -> Self {
        Self::new()
    }
}

impl Simulator {
    pub fn new() -> Self {
        Self {
            ramp_substeps: 8,
            x_gate: dfs_frame_gate(FrameGate::XGate).matrix,
            dfs: dfs_matrix(),
        }
    }

    fn initial_states(&self, gauge: Gauge) -> Vec<State> {
        let col = |k: usize| -> State { std::array::from_fn(|i| self.dfs[(i, k)]) };
        match gauge {
            Gauge::Mixed => vec![col(0), col(1)],
            Gauge::Up => vec![col(0)],
            Gauge::Down => vec![col(1)],
        }
    }

    fn dfs_weights(&self, psi: &State) -> [f64; 8] {
        std::array::from_fn(|k| {
            (0..8)
                .map(|i| self.dfs[(i, k)].conj() * psi[i])
                .sum::<C64>()
                .norm_sqr()
        })
    }

    fn readout(&self, states: &[State], trailing: &[Matrix8]) -> Readout {
        let mut out = Readout::default();
        for psi in states {
            let mut a = *psi;
            for g in trailing {
                apply8(&mut a, g);
            }
            let w = self.dfs_weights(&a);
            out.p0 += w[0] + w[1];
            out.leak += w[4..].iter().sum::<f64>();
            apply8(&mut a, &self.x_gate);
            let wx = self.dfs_weights(&a);
            out.p0_x += wx[0] + wx[1];
        }
        let n = states.len() as f64;
        out.p0 /= n;
        out.p0_x /= n;
        out.leak /= n;
        out
    }

    fn idle(&self, states: &mut [State], noise: &NoiseRealization, t0: f64, dur: f64, w0: f64) {
        for (cell, step) in cell_steps(noise, t0, t0 + dur) {
            let w = spin_fields(&noise.fields(cell), w0);
            let us: [M2; 3] = std::array::from_fn(|d| su2(w[d], step));
            for psi in states.iter_mut() {
                for (d, u) in us.iter().enumerate() {
                    apply_1q(psi, bit(d), u);
                }
            }
        }
    }

    #[allow(clippy::too_many_arguments)]
    fn pulse(
        &self,
        states: &mut [State],
        noise: &NoiseRealization,
        shape: &PulseShape,
        pair: Pair,
        angle: f64,
        t0: f64,
        w0: f64,
    ) {
        let (a, b) = pair.dots();
        let c = pair.spectator();
        let (ba, bb, bc) = (bit(a.index()), bit(b.index()), bit(c.index()));
        let delta = noise.exchange_at(exchange_channel(pair), t0);
        let jmax = angle / shape.sensitivity_integral() * (1.0 + delta);
        for piece in shape.pieces() {
            let subs = if piece.rate == 0.0 { 1 } else { self.ramp_substeps.max(1) };
            let h = piece.len / subs as f64;
            for k in 0..subs {
                let (la, lb) = (k as f64 * h, (k + 1) as f64 * h);
                let jeff = jmax * piece.integral_between(la, lb) / h;
                let (start, end) = (t0 + piece.start + la, t0 + piece.start + lb);
                for (cell, step) in cell_steps(noise, start, end) {
                    let w = spin_fields(&noise.fields(cell), w0);
                    let u = expm4(&pair_hamiltonian(jeff, w[a.index()], w[b.index()]), step);
                    let us = su2(w[c.index()], step);
                    for psi in states.iter_mut() {
                        apply_2q(psi, ba, bb, &u);
                        apply_1q(psi, bc, &us);
                    }
                }
            }
        }
    }

    /// Propagate the gauge states through `schedule`, reading out after
    /// every completed pulse period whose index (in N/Z pairs) appears in
    /// `checkpoints` (ascending). Frame gates that trail the last pulse are
    /// applied to a copy at each readout rather than to the trajectory.
    pub fn run(
        &self,
        schedule: &PulseSchedule,
        noise: &NoiseRealization,
        checkpoints: &[usize],
        gauge: Gauge,
    ) -> Vec<Readout> {
        let w0 = noise.omega0();
        let segs = &schedule.segments;
        let last_pulse = segs.iter().rposition(|s| s.kind.is_pulse());
        let body_end = last_pulse.map_or(0, |p| {
            if segs.get(p + 1).map(|s| s.kind) == Some(SegmentKind::Idle) {
                p + 2
            } else {
                p + 1
            }
        });
        let first_body = segs
            .iter()
            .position(|s| !matches!(s.kind, SegmentKind::Frame(_)))
            .unwrap_or(segs.len())
            .min(body_end);
        let trailing: Vec<Matrix8> = segs[body_end..]
            .iter()
            .filter_map(|s| match s.kind {
                SegmentKind::Frame(g) => Some(dfs_frame_gate(g).matrix),
                _ => None,
            })
            .collect();

        let mut states = self.initial_states(gauge);
        let mut out = Vec::with_capacity(checkpoints.len());
        let mut next = 0;
        let mut emit = |pulses: usize, states: &[State], out: &mut Vec<Readout>| {
            while next < checkpoints.len() && 2 * checkpoints[next] == pulses {
                out.push(self.readout(states, &trailing));
                next += 1;
            }
        };

        let mut t = 0.0;
        let mut pulses = 0;
        for (i, s) in segs[..body_end].iter().enumerate() {
            if i == first_body {
                emit(0, &states, &mut out);
            }
            match s.kind {
                SegmentKind::Frame(g) => {
                    let m = dfs_frame_gate(g).matrix;
                    for psi in states.iter_mut() {
                        apply8(psi, &m);
                    }
                }
                SegmentKind::Idle => {
                    self.idle(&mut states, noise, t, s.duration, w0);
                    emit(pulses, &states, &mut out);
                }
                SegmentKind::NPulse | SegmentKind::ZPulse => {
                    let pair = s.kind.pair().expect("pulse has a pair");
                    self.pulse(&mut states, noise, &schedule.shape, pair, s.angle, t, w0);
                    pulses += 1;
                    if segs.get(i + 1).map(|n| n.kind) != Some(SegmentKind::Idle) {
                        emit(pulses, &states, &mut out);
                    }
                }
            }
            t += s.duration;
        }
        if first_body >= body_end {
            emit(0, &states, &mut out);
        }
        out
    }

    /// Free evolution (no pulses) of the gauge states, read out at
    /// `k · sample_dt` for `k = 0..=samples`.
    pub fn free_evolution(
        &self,
        noise: &NoiseRealization,
        sample_dt: f64,
        samples: usize,
        gauge: Gauge,
    ) -> Vec<Readout> {
        let w0 = noise.omega0();
        let mut states = self.initial_states(gauge);
        let mut out = Vec::with_capacity(samples + 1);
        out.push(self.readout(&states, &[]));
        for k in 0..samples {
            self.idle(&mut states, noise, k as f64 * sample_dt, sample_dt, w0);
            out.push(self.readout(&states, &[]));
        }
        out
    }

    /// Full 8×8 propagator of the fast scheme, assembled column by column.
    pub fn unitary(&self, schedule: &PulseSchedule, noise: &NoiseRealization) -> LabeledOperator {
        let w0 = noise.omega0();
        let mut cols: Vec<State> = (0..8)
            .map(|k| std::array::from_fn(|i| if i == k { C64::new(1.0, 0.0) } else { ZERO }))
            .collect();
        let mut t = 0.0;
        for s in &schedule.segments {
            match s.kind {
                SegmentKind::Frame(g) => {
                    let m = dfs_frame_gate(g).matrix;
                    cols.iter_mut().for_each(|c| apply8(c, &m));
                }
                SegmentKind::Idle => self.idle(&mut cols, noise, t, s.duration, w0),
                SegmentKind::NPulse | SegmentKind::ZPulse => {
                    let pair = s.kind.pair().expect("pulse has a pair");
                    self.pulse(&mut cols, noise, &schedule.shape, pair, s.angle, t, w0);
                }
            }
            t += s.duration;
        }
        LabeledOperator::new(Matrix8::from_fn(|i, j| cols[j][i]), Basis::Product)
    }
}

/// Reference propagator: fixed steps of at most `dt` within each segment,
/// each exponentiated exactly from the step-averaged Hamiltonian.
pub fn propagate(schedule: &PulseSchedule, noise: &NoiseRealization, dt: f64) -> Result<LabeledOperator> {
    let t_pulse = schedule.shape.t_pulse;
    let nu0 = noise.omega0().abs() / (2.0 * std::f64::consts::PI);
    if !(dt > 0.0) || dt > t_pulse / 10.0 * (1.0 + 1e-12) {
        return Err(invalid(format!("dt = {dt} must be positive and at most t_pulse/10")));
    }
    if nu0 > 0.0 && dt > 1.0 / (20.0 * nu0) {
        return Err(invalid(format!("dt = {dt} must resolve the Larmor period (<= 1/(20 nu0))")));
    }
    let spins: [[Matrix8; 3]; 3] =
        std::array::from_fn(|d| Axis::ALL.map(|a| spin_matrix(Dot::ALL[d], a)));
    let sz: Matrix8 = (0..3).fold(Matrix8::zeros(), |acc, d| acc + spins[d][2]);
    let zeeman = sz * C64::new(-noise.omega0(), 0.0);
    let shape = schedule.shape;
    let mut u = Matrix8::identity();
    let mut t = 0.0;
    for s in &schedule.segments {
        if let SegmentKind::Frame(g) = s.kind {
            u = dfs_frame_gate(g).matrix * u;
            continue;
        }
        let steps = ((s.duration / dt).ceil() as usize).max(1);
        let h = s.duration / steps as f64;
        let pulse = s.kind.pair().map(|pair| {
            let delta = noise.exchange_at(exchange_channel(pair), t);
            (exchange_matrix(pair), s.angle / shape.sensitivity_integral() * (1.0 + delta))
        });
        for k in 0..steps {
            let (a, b) = (k as f64 * h, (k + 1) as f64 * h);
            let mid = t + 0.5 * (a + b);
            let cell = noise.magnetic_cell(mid);
            let fields = noise.fields(cell);
            let mut ham = zeeman;
            for d in 0..3 {
                for ax in 0..3 {
                    ham += spins[d][ax] * C64::new(fields[d][ax], 0.0);
                }
            }
            if let Some((ex, jmax)) = &pulse {
                let avg: f64 = shape
                    .pieces()
                    .iter()
                    .map(|p| {
                        let lo = a.max(p.start) - p.start;
                        let hi = b.min(p.start + p.len) - p.start;
                        if hi > lo {
                            p.integral_between(lo, hi)
                        } else {
                            0.0
                        }
                    })
                    .sum::<f64>()
                    / h;
                ham += ex * C64::new(jmax * avg, 0.0);
            }
            u = expm_hermitian(&ham, h) * u;
        }
        t += s.duration;
    }
    Ok(LabeledOperator::new(u, Basis::Product))
}

/// How realizations are split between the two readout arms.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ArmPolicy {
    /// Even realizations without the final X, odd ones with it.
    Alternate,
    /// Every realization contributes to both arms.
    Both,
}

#[derive(Clone, Debug, PartialEq)]
pub struct DecayConfig {
    pub family: Family,
    /// Pulse-pair counts, strictly increasing.
    pub r_grid: Vec<usize>,
    pub t_idle: f64,
    pub shape: PulseShape,
    pub shots: usize,
    pub seed: u64,
    /// Magnetic trace spacing; defaults to `t_pulse`.
    pub dt_magnetic: Option<f64>,
    /// Static over-rotation of N and Z pulses.
    pub miscalibration: (f64, f64),
    pub gauge: Gauge,
    pub arms: ArmPolicy,
}

impl DecayConfig {
    pub fn new(family: Family, r_grid: Vec<usize>, t_idle: f64, shape: PulseShape, shots: usize, seed: u64) -> Self {
        Self {
            family,
            r_grid,
            t_idle,
            shape,
            shots,
            seed,
            dt_magnetic: None,
            miscalibration: (0.0, 0.0),
            gauge: Gauge::Mixed,
            arms: ArmPolicy::Alternate,
        }
    }

    pub fn dt_magnetic(&self) -> f64 {
        self.dt_magnetic.unwrap_or(self.shape.t_pulse)
    }

    fn validate(&self) -> Result<()> {
        if self.shots == 0 {
            return Err(invalid("shots must be at least 1"));
        }
        if self.r_grid.is_empty() {
            return Err(invalid("r grid is empty"));
        }
        if self.r_grid.windows(2).any(|w| w[1] <= w[0]) {
            return Err(invalid("r grid must be strictly increasing"));
        }
        let step = self.family.r_step();
        if let Some(r) = self.r_grid.iter().find(|&&r| r % step != 0) {
            return Err(invalid(format!(
                "r = {r} is not a multiple of {step} for {}",
                self.family.name()
            )));
        }
        Ok(())
    }
}

/// Return probabilities versus pulse-pair count.
#[derive(Clone, Debug, PartialEq)]
pub struct DecayCurve {
    pub family: Family,
    pub r_values: Vec<usize>,
    pub p0_no_x: Vec<f64>,
    pub p0_with_x: Vec<f64>,
    pub stderr_no_x: Vec<f64>,
    pub stderr_with_x: Vec<f64>,
    pub n_realizations: usize,
    pub t_pulse: f64,
    pub t_idle: f64,
}

impl DecayCurve {
    pub fn period(&self) -> f64 {
        self.t_pulse + self.t_idle
    }

    pub fn write_csv<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        let blind = blind_analysis(self);
        writeln!(w, "r,p0_no_x,p0_with_x,stderr_no_x,stderr_with_x,difference,sum")?;
        for i in 0..self.r_values.len() {
            writeln!(
                w,
                "{},{:.10},{:.10},{:.10},{:.10},{:.10},{:.10}",
                self.r_values[i],
                self.p0_no_x[i],
                self.p0_with_x[i],
                self.stderr_no_x[i],
                self.stderr_with_x[i],
                blind.difference[i],
                blind.sum[i]
            )?;
        }
        Ok(())
    }
}

fn mean_stderr(xs: &[f64]) -> (f64, f64) {
    let n = xs.len();
    if n == 0 {
        return (f64::NAN, f64::NAN);
    }
    let m = xs.iter().sum::<f64>() / n as f64;
    if n < 2 {
        return (m, 0.0);
    }
    let var = xs.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (n - 1) as f64;
    (m, (var / n as f64).sqrt())
}

/// Decay experiment: one long trajectory per realization, read out at each
/// `r` of the grid.
pub fn run_decay_experiment(cfg: &DecayConfig, model: &NoiseModel) -> Result<DecayCurve> {
    cfg.validate()?;
    let r_max = *cfg.r_grid.last().expect("validated non-empty");
    let schedule = build_family(cfg.family, r_max, cfg.t_idle, cfg.shape)?
        .with_miscalibration(cfg.miscalibration.0, cfg.miscalibration.1);
    let duration = schedule.duration().max(cfg.shape.t_pulse);
    let model = model.for_experiment_time(cfg.shots as f64 * duration);
    model.validate()?;
    let sim = Simulator::new();
    let per_shot: Vec<Vec<Readout>> = (0..cfg.shots as u64)
        .into_par_iter()
        .map(|i| -> Result<Vec<Readout>> {
            let noise = realize_noise(&model, duration, cfg.dt_magnetic(), cfg.shape.t_pulse, cfg.seed, i)?;
            Ok(sim.run(&schedule, &noise, &cfg.r_grid, cfg.gauge))
        })
        .collect::<Result<Vec<_>>>()?;
    let n_r = cfg.r_grid.len();
    let mut curve = DecayCurve {
        family: cfg.family,
        r_values: cfg.r_grid.clone(),
        p0_no_x: Vec::with_capacity(n_r),
        p0_with_x: Vec::with_capacity(n_r),
        stderr_no_x: Vec::with_capacity(n_r),
        stderr_with_x: Vec::with_capacity(n_r),
        n_realizations: cfg.shots,
        t_pulse: cfg.shape.t_pulse,
        t_idle: cfg.t_idle,
    };
    for k in 0..n_r {
        let (mut a, mut b) = (Vec::new(), Vec::new());
        for (i, shot) in per_shot.iter().enumerate() {
            match cfg.arms {
                ArmPolicy::Both => {
                    a.push(shot[k].p0);
                    b.push(shot[k].p0_x);
                }
                ArmPolicy::Alternate if i % 2 == 0 => a.push(shot[k].p0),
                ArmPolicy::Alternate => b.push(shot[k].p0_x),
            }
        }
        if b.is_empty() {
            b = per_shot.iter().map(|s| s[k].p0_x).collect();
        }
        let (ma, sa) = mean_stderr(&a);
        let (mb, sb) = mean_stderr(&b);
        curve.p0_no_x.push(ma);
        curve.stderr_no_x.push(sa);
        curve.p0_with_x.push(mb);
        curve.stderr_with_x.push(sb);
    }
    Ok(curve)
}

/// Difference and sum of the two readout arms.
#[derive(Clone, Debug, PartialEq)]
pub struct BlindCurves {
    pub r_values: Vec<usize>,
    pub difference: Vec<f64>,
    pub sum: Vec<f64>,
    pub stderr: Vec<f64>,
}

pub fn blind_analysis(curve: &DecayCurve) -> BlindCurves {
    let n = curve.r_values.len();
    BlindCurves {
        r_values: curve.r_values.clone(),
        difference: (0..n).map(|i| curve.p0_no_x[i] - curve.p0_with_x[i]).collect(),
        sum: (0..n).map(|i| curve.p0_no_x[i] + curve.p0_with_x[i]).collect(),
        stderr: (0..n)
            .map(|i| curve.stderr_no_x[i].hypot(curve.stderr_with_x[i]))
            .collect(),
    }
}
