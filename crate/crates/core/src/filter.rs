// Copyright 2026 The nzdd Authors
// SPDX-License-Identifier: Apache-2.0

//! Filter functions of the NZ1 / NZ1y sequences.
//!
//! Closed forms are evaluated with their removable singularities (`ν = 0`,
//! the passband centres `ν = k/(6τ)` and `2fντ = 1`) handled by series
//! expansion. [`numeric_ff_engine`] computes the same quantities from first
//! principles, as the second-order response of the propagated states to a
//! single noise tone, and serves as the oracle for every closed form.
//!
//! Units: magnetic noise `b` and exchange noise `δJ` are angular
//! frequencies, PSDs are single-sided in (rad/s)²/Hz and filter functions
//! are in s², so `∫ S(ν) F(ν) dν` is a probability.

use crate::error::{invalid, NzError, Result};
use crate::jet::{Jet, Scalar, ORDER};
use crate::noise::{HighFrequency, PowerLawPsd};
use crate::schedule::{PulseSchedule, PulseShape, SegmentKind, ShapeKind};
use crate::spin::{
    dfs_frame_gate, dfs_matrix, exchange_matrix, expm_hermitian, spin_matrix, total_spin_matrix, Axis, Dot,
    LabeledOperator, Matrix8, Pair, C64,
};
use gauss_quad::legendre::GaussLegendre;
use nalgebra::{SMatrix, SVector};
use std::f64::consts::PI;

const SQRT3: f64 = 1.732_050_807_568_877_2;

/// Parameters of a filter-function evaluation.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct FilterFunctionQuery {
    /// Bloch polar angle of the initial encoded state.
    pub theta: f64,
    /// Bloch azimuth of the initial encoded state.
    pub phi: f64,
    /// Frequency in Hz.
    pub nu: f64,
    /// Repetitions of the six-pulse block.
    pub m: usize,
    pub t_idle: f64,
    /// Larmor frequency in Hz.
    pub nu0: f64,
    pub shape: PulseShape,
}

impl FilterFunctionQuery {
    /// NZ1y query (`θ = φ = π/2`) with rectangular pulses.
    pub fn nz1y(nu: f64, m: usize, t_pulse: f64, t_idle: f64, nu0: f64) -> Result<Self> {
        let q = Self {
            theta: PI / 2.0,
            phi: PI / 2.0,
            nu,
            m,
            t_idle,
            nu0,
            shape: PulseShape::rectangular(t_pulse)?,
        };
        q.validate()?;
        Ok(q)
    }

    pub fn with_shape(mut self, shape: PulseShape) -> Self {
        self.shape = shape;
        self
    }

    pub fn t_pulse(&self) -> f64 {
        self.shape.t_pulse
    }

    /// Pulse repetition time `τ = t_pulse + t_idle`.
    pub fn tau(&self) -> f64 {
        self.t_pulse() + self.t_idle
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.nu >= 0.0 && self.nu.is_finite()) {
            return Err(invalid(format!("nu must be finite and >= 0, got {}", self.nu)));
        }
        if self.m == 0 {
            return Err(invalid("M must be at least 1"));
        }
        if !(self.t_idle >= 0.0) || !(self.nu0 >= 0.0) {
            return Err(invalid("t_idle and nu0 must be >= 0"));
        }
        Ok(())
    }
}

/// `sin²(6Mπντ)/sin²(6πντ)`, with the value `M²` at the passband centres.
pub fn sinc_train(nu: f64, m: usize, tau: f64) -> f64 {
    let z = 6.0 * nu * tau;
    let y = PI * (z - z.round());
    let mf = m as f64;
    if y == 0.0 {
        mf * mf
    } else {
        let r = (mf * y).sin() / y.sin();
        r * r
    }
}

/// `sin(πνt)/(πν)`, equal to `t` at `ν = 0`.
fn sinc_t(nu: f64, t: f64) -> f64 {
    let x = PI * nu * t;
    if x == 0.0 {
        t
    } else {
        x.sin() / (PI * nu)
    }
}

fn fim_bracket<T: Scalar>(a: T, x: T) -> T {
    let c = |k: f64| (a * k).cos();
    let s = |k: f64| (a * k).sin();
    let x2 = x * x;
    let t1 = x2 * x2 * 32.0 + 7.0;
    let t2 = (x2 * 4.0 + -1.0)
        * s(1.0).sq()
        * s(1.0)
        * c(1.0).sq()
        * (c(4.0) * 2.0 + 1.0)
        * (x * (2.0 * PI)).sin()
        * (-(x * s(1.0)) * SQRT3 + c(1.0) + c(3.0) * 2.0)
        * 16.0;
    let s2c = s(2.0).sq() * s(2.0);
    let inner = x
        * (x * 2.0 * (-(x * c(12.0)) * 16.0 - s2c * (c(4.0) * 2.0 + 1.0) * (4.0 * SQRT3)) + c(2.0) - c(4.0) * 8.0
            + c(6.0) * 6.0
            - c(8.0) * 4.0
            - c(10.0) * 7.0
            + c(12.0) * 12.0)
        + s2c * (-(c(2.0) * 16.0) + c(4.0) * 6.0 + 7.0) * (2.0 * SQRT3);
    let t3 = x * inner;
    let br = x
        * (x * 2.0
            * (-(x * s(6.0)) * (2.0 * SQRT3) + c(2.0) * 8.0 + c(4.0) * 12.0 + c(6.0) * 7.0 + c(8.0) * 4.0 + 14.0)
            + (s(2.0) * 4.0 - s(4.0) * 8.0 + s(6.0) * 3.0) * SQRT3)
        - c(2.0) * 10.0
        - c(6.0) * 2.0
        - c(8.0) * 2.0
        + 5.0;
    let t4 = s(2.0).sq() * (x * (2.0 * PI)).cos() * br * 2.0;
    let t5 = -(c(2.0) * 4.0) - c(4.0) * 4.0 + c(6.0) * 3.0 - c(8.0) * 2.0 + c(10.0) - c(12.0);
    t1 + t2 + t3 + t4 + t5
}

fn fem_bracket<T: Scalar>(a: T, x: T) -> T {
    let c = |k: f64| (a * k).cos();
    let s = |k: f64| (a * k).sin();
    let x2 = x * x;
    let x4 = x2 * x2;
    let mut t = x4 * 32.0 + 7.0 - x4 * c(12.0) * 32.0 - x2 * 12.0 + x2 * (c(2.0) - c(10.0) + c(12.0) * 2.0) * 6.0;
    let br = (x2 * 4.0 + -1.0) * (s(4.0) * 2.0 - s(6.0) + s(8.0) * 2.0) * (x * (2.0 * PI)).sin()
        + (x2 * (c(2.0) * 6.0 + c(4.0) * 4.0 + c(6.0) * 3.0 + c(8.0) * 2.0 + 3.0) * 4.0 - c(2.0) * 10.0 - c(6.0) * 2.0
            - c(8.0) * 2.0
            + 5.0)
            * (x * (2.0 * PI)).cos();
    t = t + s(2.0).sq() * br * 2.0;
    t + (-(c(2.0) * 4.0) - c(4.0) * 4.0 + c(6.0) * 3.0 - c(8.0) * 2.0 + c(10.0) - c(12.0))
}

#[derive(Clone, Copy)]
enum Bracket {
    Infidelity,
    Encoded,
}

impl Bracket {
    fn eval<T: Scalar>(self, a: T, x: T) -> T {
        match self {
            Bracket::Infidelity => fim_bracket(a, x),
            Bracket::Encoded => fem_bracket(a, x),
        }
    }

    fn k(self) -> f64 {
        match self {
            Bracket::Infidelity => 6.0,
            Bracket::Encoded => 12.0,
        }
    }
}

/// `bracket / (kπ²u²(1 − 4f²u²)²)` in the dimensionless `u = ντ`.
fn magnetic_envelope(b: Bracket, u: f64, f: f64) -> f64 {
    let k = b.k() * PI * PI;
    let n = ORDER - 2;
    let u_star = if f > 0.0 { 0.5 / f } else { f64::INFINITY };
    if (12.0 * PI * u).abs() < 1.0 {
        let a = Jet::linear(0.0, PI);
        let x = Jet::linear(0.0, f);
        let num = b.eval(a, x).shift(2);
        let w = Jet::constant(1.0) - x * x * 4.0;
        let den = (w * w).scale(k);
        num.div(den, n).eval(u, n)
    } else if (12.0 * PI * (u - u_star)).abs() < 1.0 {
        let h = u - u_star;
        let a = Jet::linear(PI * u_star, PI);
        let x = Jet::linear(0.5, f);
        let num = b.eval(a, x).shift(2);
        let uu = Jet::linear(u_star, 1.0);
        let w = Jet::constant(1.0) - x * x * 4.0;
        let den = (uu * uu * w * w).scale(k).shift(2);
        num.div(den, n).eval(h, n)
    } else {
        let x = f * u;
        let w = 1.0 - 4.0 * x * x;
        b.eval(PI * u, x) / (k * u * u * w * w)
    }
}

fn magnetic_main(b: Bracket, nu: f64, m: usize, t_pulse: f64, t_idle: f64) -> f64 {
    let tau = t_pulse + t_idle;
    let nu = nu.abs();
    let f = t_pulse / tau;
    tau * tau * magnetic_envelope(b, nu * tau, f) * sinc_train(nu, m, tau)
}

/// Main (non-sideband) term of the NZ1y magnetic state-preservation
/// infidelity filter function.
pub fn ff_magnetic_infidelity_main(nu: f64, m: usize, t_pulse: f64, t_idle: f64) -> f64 {
    magnetic_main(Bracket::Infidelity, nu, m, t_pulse, t_idle)
}

/// Main term of the NZ1y magnetic encoded-error filter function.
pub fn ff_magnetic_encoded_main(nu: f64, m: usize, t_pulse: f64, t_idle: f64) -> f64 {
    magnetic_main(Bracket::Encoded, nu, m, t_pulse, t_idle)
}

/// `F(ν) + F(|ν + ν₀|) + F(|ν − ν₀|)`.
pub fn with_sidebands(main: impl Fn(f64) -> f64, nu: f64, nu0: f64) -> f64 {
    main(nu) + main((nu + nu0).abs()) + main((nu - nu0).abs())
}

fn require_rectangular(q: &FilterFunctionQuery) -> Result<()> {
    q.validate()?;
    if !matches!(q.shape.kind, ShapeKind::Rectangular) {
        return Err(invalid("closed form requires rectangular pulses"));
    }
    Ok(())
}

/// NZ1y magnetic state-preservation infidelity filter function, with
/// Larmor sidebands.
pub fn ff_magnetic_infidelity_nz1y(q: &FilterFunctionQuery) -> Result<f64> {
    require_rectangular(q)?;
    let (m, tp, ti) = (q.m, q.t_pulse(), q.t_idle);
    Ok(with_sidebands(|v| ff_magnetic_infidelity_main(v, m, tp, ti), q.nu, q.nu0))
}

/// NZ1y magnetic encoded-error filter function, with Larmor sidebands.
pub fn ff_magnetic_encoded_error_nz1y(q: &FilterFunctionQuery) -> Result<f64> {
    require_rectangular(q)?;
    let (m, tp, ti) = (q.m, q.t_pulse(), q.t_idle);
    Ok(with_sidebands(|v| ff_magnetic_encoded_main(v, m, tp, ti), q.nu, q.nu0))
}

/// Leakage part of the magnetic filter function, `F^I − F^E`. Small
/// negative roundoff is clamped to zero; a clearly negative difference is
/// reported as an error.
pub fn ff_magnetic_leakage_nz1y(q: &FilterFunctionQuery) -> Result<f64> {
    let i = ff_magnetic_infidelity_nz1y(q)?;
    let e = ff_magnetic_encoded_error_nz1y(q)?;
    leakage_from(i, e)
}

fn leakage_from(i: f64, e: f64) -> Result<f64> {
    let d = i - e;
    let scale = i.abs().max(e.abs());
    if d < -1e-9 * scale {
        return Err(NzError::Numerical(format!("negative leakage filter function {d:e} (F^I = {i:e}, F^E = {e:e})")));
    }
    Ok(d.max(0.0))
}

/// Rectangular-pulse NZ1y exchange filter function
/// `2(2 + cos 4πντ) sin²(πν t_p) sin²(2πντ)/(π²ν²) · train`.
pub fn ff_exchange_infidelity(q: &FilterFunctionQuery) -> Result<f64> {
    require_rectangular(q)?;
    Ok(exchange_rect(q.nu, q.m, q.t_pulse(), q.t_idle))
}

fn exchange_rect(nu: f64, m: usize, t_pulse: f64, t_idle: f64) -> f64 {
    let tau = t_pulse + t_idle;
    let env = sinc_t(nu, t_pulse);
    let s = (2.0 * PI * nu * tau).sin();
    2.0 * (2.0 + (4.0 * PI * nu * tau).cos()) * env * env * s * s * sinc_train(nu, m, tau)
}

/// Exchange filter function for an arbitrary pulse shape,
/// `2|h(ν)|²(2 + cos 4πντ) sin²(2πντ) · train`.
pub fn ff_exchange_shaped(q: &FilterFunctionQuery) -> Result<f64> {
    q.validate()?;
    let tau = q.tau();
    let h = pulse_kernel(&q.shape, q.nu).norm_sqr();
    let s = (2.0 * PI * q.nu * tau).sin();
    Ok(2.0 * h * (2.0 + (4.0 * PI * q.nu * tau).cos()) * s * s * sinc_train(q.nu, q.m, tau))
}

/// DC value of the magnetic filter function for an arbitrary initial
/// state, `18M²t_p²(cos²φ + cos²θ sin²φ)/π²` (main term only).
pub fn ff_magnetic_dc_arbitrary(theta: f64, phi: f64, m: usize, t_pulse: f64) -> f64 {
    let mf = m as f64;
    let g = phi.cos().powi(2) + theta.cos().powi(2) * phi.sin().powi(2);
    18.0 * mf * mf * t_pulse * t_pulse * g / (PI * PI)
}

/// Zero-pulse-width NZ1y magnetic filter function, with sidebands.
pub fn ff_magnetic_zero_width(nu: f64, m: usize, t_idle: f64, nu0: f64) -> f64 {
    let main = |v: f64| {
        let a = PI * v * t_idle;
        let s = a.sin();
        let e = sinc_t(v, t_idle);
        64.0 * (2.0 + (4.0 * a).cos()) * a.cos().powi(2) * s * s * e * e / 3.0 * sinc_train(v, m, t_idle)
    };
    with_sidebands(main, nu, nu0)
}

/// `(e^w − 1)/w`.
fn phi1(w: C64) -> C64 {
    if w.norm() < 1e-4 {
        C64::new(1.0, 0.0) + w / 2.0 + w * w / 6.0 + w * w * w / 24.0
    } else {
        (w.exp() - 1.0) / w
    }
}

/// Fourier transform `∫ e^{−2πiνt} s(t) dt` of the pulse sensitivity.
pub fn pulse_kernel(shape: &PulseShape, nu: f64) -> C64 {
    let w = 2.0 * PI * nu;
    let tp = shape.t_pulse;
    match shape.kind {
        ShapeKind::Rectangular => C64::from_polar(1.0, -PI * nu * tp) * sinc_t(nu, tp),
        ShapeKind::Trapezoidal { t_ramp, alpha } => {
            let kappa = (1.0 - 1.0 / alpha) / t_ramp;
            let rise = phi1(C64::new(kappa, -w) * t_ramp) * (t_ramp / alpha);
            let flat = C64::from_polar(1.0, -PI * nu * (tp + t_ramp)) * sinc_t(nu, tp - t_ramp);
            let fall = C64::from_polar(1.0, -w * tp) * phi1(-C64::new(kappa, w) * t_ramp) * t_ramp;
            rise + flat + fall
        }
    }
}

/// Noise source probed by the numeric engine.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum NoiseKind {
    Magnetic,
    Exchange,
}

/// Error channel of a filter function.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Channel {
    /// Any departure from the initial encoded state.
    Infidelity,
    /// Flip to the orthogonal encoded state.
    EncodedError,
    /// Transfer into the quadruplet.
    Leakage,
}

#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct ChannelValues {
    pub infidelity: f64,
    pub encoded: f64,
    pub leakage: f64,
}

impl ChannelValues {
    pub fn get(&self, c: Channel) -> f64 {
        match c {
            Channel::Infidelity => self.infidelity,
            Channel::EncodedError => self.encoded,
            Channel::Leakage => self.leakage,
        }
    }
}

type Eig = (SVector<f64, 8>, Matrix8);

fn eigh(h: &Matrix8) -> Eig {
    let e = h.symmetric_eigen();
    (e.eigenvalues, e.eigenvectors)
}

/// `∫₀^L e^{iωt} dt`.
fn phase_integral(omega: f64, len: f64) -> C64 {
    let half = 0.5 * omega * len;
    let s = if half == 0.0 { 1.0 } else { half.sin() / half };
    C64::from_polar(len * s, half)
}

/// Evolution frames and noise operators of the numeric engine.
struct Tone {
    nu: f64,
    ops: Vec<Matrix8>,
    /// For exchange channels, the pair the channel is active on.
    pairs: Vec<Option<Pair>>,
    acc: Vec<[Matrix8; 2]>,
}

impl Tone {
    fn active(&self, c: usize, pair: Option<Pair>) -> bool {
        match self.pairs[c] {
            None => true,
            Some(p) => Some(p) == pair,
        }
    }

    /// Add `∫ e^{−2πiσν(t0+t)} U(t)† A U(t) dt` over a segment with
    /// constant Hamiltonian, `U(t) = V e^{−iEt} V† U_s`.
    fn constant_segment(&mut self, eig: &Eig, u_start: &Matrix8, t0: f64, len: f64, pair: Option<Pair>) {
        let (e, v) = eig;
        let w = v.adjoint() * u_start;
        let wa = w.adjoint();
        for c in 0..self.ops.len() {
            if !self.active(c, pair) {
                continue;
            }
            let m = v.adjoint() * self.ops[c] * v;
            for (si, sg) in [1.0, -1.0].into_iter().enumerate() {
                let om = 2.0 * PI * sg * self.nu;
                let b = Matrix8::from_fn(|a, bb| m[(a, bb)] * phase_integral(e[a] - e[bb] - om, len));
                let ph = C64::from_polar(1.0, -om * t0);
                self.acc[c][si] += wa * b * w * ph;
            }
        }
    }

    fn point(&mut self, u: &Matrix8, t: f64, weight: f64, s: f64, pair: Option<Pair>) {
        let ua = u.adjoint();
        for c in 0..self.ops.len() {
            if !self.active(c, pair) {
                continue;
            }
            let wt = if self.pairs[c].is_some() { weight * s } else { weight };
            let o = ua * self.ops[c] * u;
            for (si, sg) in [1.0, -1.0].into_iter().enumerate() {
                let ph = C64::from_polar(wt, -2.0 * PI * sg * self.nu * t);
                self.acc[c][si] += o * ph;
            }
        }
    }
}

/// Encoded basis `|1⟩…|8⟩` for initial Bloch angles `(θ, φ)`: the two
/// gauge copies of the initial state, their orthogonal partners and the
/// quadruplet.
pub(crate) fn state_basis(theta: f64, phi: f64) -> Matrix8 {
    let d = dfs_matrix();
    let col = |k: usize| d.column(k).into_owned();
    let (s, c) = (0.5 * theta).sin_cos();
    let p = C64::from_polar(1.0, phi);
    let mut out = Matrix8::zeros();
    let cols = [
        col(0) * C64::new(c, 0.0) + col(2) * (p * s),
        col(1) * C64::new(c, 0.0) + col(3) * (p * s),
        col(0) * C64::new(s, 0.0) - col(2) * (p * c),
        col(1) * C64::new(s, 0.0) - col(3) * (p * c),
    ];
    for (k, v) in cols.iter().enumerate() {
        out.set_column(k, v);
    }
    for k in 4..8 {
        out.set_column(k, &col(k));
    }
    out
}

/// First-principles second-order filter functions of `schedule` for a
/// unit noise tone at `nu`, including the Zeeman term at Larmor frequency
/// `nu0`. The schedule's noiseless propagator must be the identity up to a
/// global phase.
pub fn numeric_ff_engine(
    schedule: &PulseSchedule,
    kind: NoiseKind,
    nu: f64,
    nu0: f64,
    theta: f64,
    phi: f64,
) -> Result<ChannelValues> {
    if !(nu.is_finite() && nu0.is_finite()) {
        return Err(invalid("nu and nu0 must be finite"));
    }
    let ideal = schedule.ideal_propagator();
    if ideal.distance_up_to_phase(&LabeledOperator::identity()) > 1e-8 {
        return Err(invalid("schedule does not implement the identity"));
    }
    let (ops, pairs): (Vec<Matrix8>, Vec<Option<Pair>>) = match kind {
        NoiseKind::Magnetic => Dot::ALL
            .iter()
            .flat_map(|&d| Axis::ALL.iter().map(move |&a| (spin_matrix(d, a), None)))
            .unzip(),
        NoiseKind::Exchange => [Pair::P12, Pair::P23]
            .iter()
            .map(|&p| (exchange_matrix(p), Some(p)))
            .unzip(),
    };
    let n = ops.len();
    let mut tone = Tone { nu, ops, pairs, acc: vec![[Matrix8::zeros(); 2]; n] };

    let zeeman = total_spin_matrix(Axis::Z) * C64::new(-2.0 * PI * nu0, 0.0);
    let shape = schedule.shape;
    let idle_eig = eigh(&zeeman);
    let mut pulse_eigs: Vec<(Pair, u64, Eig)> = Vec::new();
    let rect = matches!(shape.kind, ShapeKind::Rectangular);

    let mut u = Matrix8::identity();
    let mut t = 0.0;
    for s in &schedule.segments {
        match s.kind {
            SegmentKind::Frame(g) => {
                u = dfs_frame_gate(g).matrix * u;
                continue;
            }
            SegmentKind::Idle => {
                tone.constant_segment(&idle_eig, &u, t, s.duration, None);
                u = step(&idle_eig, s.duration) * u;
            }
            SegmentKind::NPulse | SegmentKind::ZPulse => {
                let pair = s.kind.pair().expect("pulse has a pair");
                let jmax = s.angle / shape.sensitivity_integral();
                if rect {
                    let key = s.angle.to_bits();
                    let idx = match pulse_eigs.iter().position(|(p, k, _)| *p == pair && *k == key) {
                        Some(i) => i,
                        None => {
                            let h = exchange_matrix(pair) * C64::new(jmax, 0.0) + zeeman;
                            pulse_eigs.push((pair, key, eigh(&h)));
                            pulse_eigs.len() - 1
                        }
                    };
                    let eig = &pulse_eigs[idx].2;
                    tone.constant_segment(eig, &u, t, s.duration, Some(pair));
                    u = step(eig, s.duration) * u;
                } else {
                    u = shaped_pulse(&mut tone, &shape, pair, jmax, &zeeman, &u, t);
                }
            }
        }
        t += s.duration;
    }

    let sm = state_basis(theta, phi);
    let sma = sm.adjoint();
    let sum_over = |fs: std::ops::Range<usize>| -> f64 {
        let mut tot = 0.0;
        for acc in &tone.acc {
            for a in acc {
                let x = sma * a * sm;
                for i in 0..2 {
                    for f in fs.clone() {
                        tot += 0.5 * x[(f, i)].norm_sqr();
                    }
                }
            }
        }
        0.5 * tot
    };
    Ok(ChannelValues { infidelity: sum_over(2..8), encoded: sum_over(2..4), leakage: sum_over(4..8) })
}

fn step(eig: &Eig, len: f64) -> Matrix8 {
    let (e, v) = eig;
    let d = SMatrix::<C64, 8, 8>::from_diagonal(&e.map(|x| C64::from_polar(1.0, -x * len)));
    v * d * v.adjoint()
}

/// Gauss-Legendre integration over a shaped pulse; returns the propagator
/// at the end of the pulse support.
fn shaped_pulse(
    tone: &mut Tone,
    shape: &PulseShape,
    pair: Pair,
    jmax: f64,
    zeeman: &Matrix8,
    u_start: &Matrix8,
    t0: f64,
) -> Matrix8 {
    let e = exchange_matrix(pair);
    let at = |theta: f64, t: f64| expm_hermitian(&(e * C64::new(theta, 0.0) + zeeman * C64::new(t, 0.0)), 1.0) * u_start;
    let mut theta0 = 0.0;
    for piece in shape.pieces() {
        let n = 48 + (4.0 * tone.nu.abs() * piece.len).ceil() as usize;
        let gl = GaussLegendre::new(n.try_into().expect("n > 0"));
        for &(x, wgt) in gl.as_node_weight_pairs() {
            let tl = 0.5 * (x + 1.0) * piece.len;
            let th = theta0 + jmax * piece.integral_between(0.0, tl);
            let uu = at(th, piece.start + tl);
            tone.point(&uu, t0 + piece.start + tl, 0.5 * wgt * piece.len, piece.value(piece.start + tl), Some(pair));
        }
        theta0 += jmax * piece.integral();
    }
    at(theta0, shape.support())
}

/// Noise-averaged error probabilities after `2r = 6M` pulses.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Prediction {
    pub infidelity: f64,
    pub encoded: f64,
    pub leakage: f64,
    /// Relative quadrature error estimate.
    pub quad_error: f64,
    /// Number of N/Z pairs.
    pub r: usize,
}

impl Prediction {
    /// Expected difference-curve value `1 − 2E − L`.
    pub fn difference(&self) -> f64 {
        1.0 - 2.0 * self.encoded - self.leakage
    }

    pub fn eps_per_pulse(&self) -> f64 {
        (2.0 * self.encoded + self.leakage) / (2.0 * self.r as f64)
    }

    pub fn leak_per_pulse(&self) -> f64 {
        self.leakage / (2.0 * self.r as f64)
    }
}

const GL4: [(f64, f64); 4] = [
    (-0.861_136_311_594_052_6, 0.347_854_845_137_453_9),
    (-0.339_981_043_584_856_3, 0.652_145_154_862_546_1),
    (0.339_981_043_584_856_3, 0.652_145_154_862_546_1),
    (0.861_136_311_594_052_6, 0.347_854_845_137_453_9),
];

/// Panel edges: logarithmic (32 per decade) from `lo` while that is finer
/// than `width`, then uniform panels no wider than `width` up to `hi`.
fn panel_edges(lo: f64, hi: f64, width: f64) -> Vec<f64> {
    let mut edges = vec![lo];
    let g = 10f64.powf(1.0 / 32.0);
    let mut v = lo;
    if v > 0.0 {
        while v * (g - 1.0) < width && v * g < hi {
            v *= g;
            edges.push(v);
        }
    }
    let n = ((hi - v) / width).ceil().max(1.0) as usize;
    let step = (hi - v) / n as f64;
    for k in 1..=n {
        edges.push(if k == n { hi } else { v + step * k as f64 });
    }
    edges
}

/// `∫ f` over the panels, with each panel also split in two. Returns
/// (coarse, fine) sums, each a vector of components.
fn panel_quadrature<const K: usize>(edges: &[f64], f: impl Fn(f64) -> [f64; K] + Sync) -> ([f64; K], [f64; K]) {
    use rayon::prelude::*;
    let gl = |a: f64, b: f64| {
        let (c, h) = (0.5 * (a + b), 0.5 * (b - a));
        let mut out = [0.0; K];
        for (x, w) in GL4 {
            let v = f(c + h * x);
            for k in 0..K {
                out[k] += w * h * v[k];
            }
        }
        out
    };
    let parts: Vec<([f64; K], [f64; K])> = edges
        .par_windows(2)
        .map(|e| {
            let (a, b) = (e[0], e[1]);
            let m = 0.5 * (a + b);
            let (l, r) = (gl(a, m), gl(m, b));
            (gl(a, b), std::array::from_fn(|k| l[k] + r[k]))
        })
        .collect();
    let mut coarse = [0.0; K];
    let mut fine = [0.0; K];
    for (c, f) in parts {
        for k in 0..K {
            coarse[k] += c[k];
            fine[k] += f[k];
        }
    }
    (coarse, fine)
}

fn upper_limit(psd: &PowerLawPsd, fallback: f64) -> f64 {
    let edge = match psd.high {
        HighFrequency::Cutoff => psd.nu_rolloff,
        HighFrequency::InverseSquare => fallback,
    };
    edge.min(psd.nu_hi)
}

/// Integrate the NZ1y filter functions of `q` (its `nu` is ignored)
/// against the magnetic PSD `psd_b` and the relative exchange PSD `psd_e`
/// (PSD of `δJ/J`). Magnetic filter functions use the rectangular form with
/// the query's `t_pulse`; exchange uses the query's pulse shape. Fails if
/// the quadrature error estimate exceeds 1%.
pub fn predict_error(psd_b: &PowerLawPsd, psd_e: &PowerLawPsd, q: &FilterFunctionQuery) -> Result<Prediction> {
    q.validate()?;
    psd_b.validate()?;
    psd_e.validate()?;
    let (m, tp, ti, nu0) = (q.m, q.t_pulse(), q.t_idle, q.nu0);
    let tau = q.tau();
    let width = 1.0 / (12.0 * m as f64 * tau);
    let jmax = PI / q.shape.sensitivity_integral();
    let fallback = (1e9f64).max(40.0 / tau + 2.0 * nu0);

    let mut out = [0.0; 3];
    let mut err = [0.0; 3];
    if psd_b.amplitude > 0.0 {
        let lo = psd_b.nu_lo.max(1e-12);
        let edges = panel_edges(lo, upper_limit(psd_b, fallback), width);
        let (c, f) = panel_quadrature(&edges, |v| {
            let s = psd_b.value(v);
            if s == 0.0 {
                return [0.0; 2];
            }
            let i = with_sidebands(|x| ff_magnetic_infidelity_main(x, m, tp, ti), v, nu0);
            let e = with_sidebands(|x| ff_magnetic_encoded_main(x, m, tp, ti), v, nu0);
            [s * i, s * e]
        });
        out[0] += f[0];
        out[1] += f[1];
        err[0] += (f[0] - c[0]).abs();
        err[1] += (f[1] - c[1]).abs();
    }
    if psd_e.amplitude > 0.0 {
        let lo = psd_e.nu_lo.max(1e-12);
        let edges = panel_edges(lo, upper_limit(psd_e, fallback), width);
        let qe = *q;
        let (c, f) = panel_quadrature(&edges, |v| {
            let s = psd_e.value(v);
            if s == 0.0 {
                return [0.0];
            }
            let ff = ff_exchange_shaped(&FilterFunctionQuery { nu: v, ..qe }).unwrap_or(0.0);
            [jmax * jmax * s * ff]
        });
        out[0] += f[0];
        out[1] += f[0];
        err[0] += (f[0] - c[0]).abs();
        err[1] += (f[0] - c[0]).abs();
    }
    let rel_err = |k: usize| if out[k] > 0.0 { err[k] / out[k] } else { 0.0 };
    let quad_error = rel_err(0).max(rel_err(1));
    if quad_error > 0.01 {
        return Err(NzError::Numerical(format!("filter-function quadrature error {quad_error:.2e} exceeds 1%")));
    }
    out[2] = leakage_from(out[0], out[1])?;
    Ok(Prediction { infidelity: out[0], encoded: out[1], leakage: out[2], quad_error, r: 3 * m })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::schedule::{build_nz1, build_nz1y};

    const TP: f64 = 10e-9;

    fn rel(a: f64, b: f64) -> f64 {
        (a - b).abs() / a.abs().max(b.abs()).max(1e-300)
    }

    #[test]
    fn train_limits() {
        let tau = 20e-9;
        assert_eq!(sinc_train(1.0 / (6.0 * tau), 7, tau), 49.0);
        assert_eq!(sinc_train(0.0, 5, tau), 25.0);
        let v = sinc_train(1.0 / (6.0 * tau) * (1.0 + 1e-9), 7, tau);
        assert!(rel(v, 49.0) < 1e-6);
    }

    #[test]
    fn exchange_dc_is_zero() {
        let q = FilterFunctionQuery::nz1y(0.0, 10, TP, TP, 0.0).unwrap();
        assert_eq!(ff_exchange_infidelity(&q).unwrap(), 0.0);
    }

    #[test]
    fn magnetic_main_dc_is_zero() {
        for ti in [0.0, 5e-9, 10e-9, 90e-9] {
            let v = ff_magnetic_infidelity_main(0.0, 10, TP, ti);
            assert!(v.abs() < 1e-12 * (10.0 * TP).powi(2), "{ti} {v}");
            let e = ff_magnetic_encoded_main(0.0, 10, TP, ti);
            assert!(e.abs() < 1e-12 * (10.0 * TP).powi(2));
        }
    }

    #[test]
    fn series_branches_are_continuous() {
        let (tp, ti) = (TP, 7e-9);
        let tau = tp + ti;
        for b in [Bracket::Infidelity, Bracket::Encoded] {
            let f = tp / tau;
            for u0 in [1.0 / (12.0 * PI), 0.5 / f + 1.0 / (12.0 * PI), 0.5 / f - 1.0 / (12.0 * PI)] {
                let lo = magnetic_envelope(b, u0 * (1.0 - 1e-9), f);
                let hi = magnetic_envelope(b, u0 * (1.0 + 1e-9), f);
                assert!(rel(lo, hi) < 1e-6, "{u0} {lo} {hi}");
            }
        }
    }

    #[test]
    fn sidebands_with_zero_field_triple() {
        let q = FilterFunctionQuery::nz1y(3.1e6, 4, TP, TP, 0.0).unwrap();
        let main = ff_magnetic_infidelity_main(q.nu, q.m, TP, TP);
        assert!(rel(ff_magnetic_infidelity_nz1y(&q).unwrap(), 3.0 * main) < 1e-14);
    }

    #[test]
    fn kernel_limits() {
        let shape = PulseShape::rectangular(TP).unwrap();
        assert!((pulse_kernel(&shape, 0.0) - C64::new(TP, 0.0)).norm() < 1e-24);
        for nu in [1e5, 3e7, 2.2e8] {
            let h = pulse_kernel(&shape, nu);
            let want = ((PI * nu * TP).sin() / (PI * nu)).abs();
            assert!(rel(h.norm(), want) < 1e-12);
            let direct = C64::new(0.0, 1.0) / (2.0 * PI * nu) * (C64::from_polar(1.0, -2.0 * PI * nu * TP) - 1.0);
            assert!((h - direct).norm() < 1e-12 * TP);
        }
    }

    #[test]
    fn dc_arbitrary_values() {
        assert!(ff_magnetic_dc_arbitrary(PI / 2.0, PI / 2.0, 5, TP).abs() < 1e-30);
        let z = ff_magnetic_dc_arbitrary(0.0, 0.3, 5, TP);
        assert!(rel(z, 18.0 * 25.0 * TP * TP / (PI * PI)) < 1e-14);
        assert!(rel(ff_magnetic_dc_arbitrary(0.4, 0.3, 10, TP), 4.0 * ff_magnetic_dc_arbitrary(0.4, 0.3, 5, TP)) < 1e-14);
    }

    #[test]
    fn numeric_matches_exchange_closed_form() {
        let m = 3;
        let s = build_nz1(3 * m, 12e-9, PulseShape::rectangular(TP).unwrap()).unwrap();
        for nu in [1.3e6, 7.7e6, 2.9e7] {
            let q = FilterFunctionQuery::nz1y(nu, m, TP, 12e-9, 0.0).unwrap();
            let n = numeric_ff_engine(&s, NoiseKind::Exchange, nu, 0.0, PI / 2.0, PI / 2.0).unwrap();
            assert!(rel(n.infidelity, ff_exchange_infidelity(&q).unwrap()) < 1e-8, "{nu}");
            assert!(n.leakage.abs() < 1e-12 * n.infidelity);
        }
    }

    #[test]
    fn numeric_matches_magnetic_closed_forms() {
        let m = 2;
        let ti = 9e-9;
        let s = build_nz1(3 * m, ti, PulseShape::rectangular(TP).unwrap()).unwrap();
        for (nu, nu0) in [(2.3e6, 0.0), (5.1e6, 1.4e6), (1.7e7, 0.7e6)] {
            let q = FilterFunctionQuery::nz1y(nu, m, TP, ti, nu0).unwrap();
            let n = numeric_ff_engine(&s, NoiseKind::Magnetic, nu, nu0, PI / 2.0, PI / 2.0).unwrap();
            assert!(rel(n.infidelity, ff_magnetic_infidelity_nz1y(&q).unwrap()) < 1e-8);
            assert!(rel(n.encoded, ff_magnetic_encoded_error_nz1y(&q).unwrap()) < 1e-8);
            assert!((n.infidelity - n.encoded - n.leakage).abs() < 1e-10 * n.infidelity);
        }
    }

    #[test]
    fn nz1y_schedule_matches_rotated_state() {
        let shape = PulseShape::rectangular(TP).unwrap();
        let a = build_nz1(6, TP, shape).unwrap();
        let b = build_nz1y(6, TP, shape).unwrap();
        let x = numeric_ff_engine(&a, NoiseKind::Magnetic, 4e6, 1e6, PI / 2.0, PI / 2.0).unwrap();
        let y = numeric_ff_engine(&b, NoiseKind::Magnetic, 4e6, 1e6, 0.0, 0.0).unwrap();
        assert!(rel(x.infidelity, y.infidelity) < 1e-10);
        assert!(rel(x.leakage, y.leakage) < 1e-10);
    }

    #[test]
    fn numeric_shaped_exchange() {
        let shape = PulseShape::trapezoidal(TP, 2e-9, 10.0).unwrap();
        let s = build_nz1(6, 8e-9, shape).unwrap();
        for nu in [3e6, 2.1e7, 9e7] {
            let q = FilterFunctionQuery::nz1y(nu, 2, TP, 8e-9, 0.0).unwrap().with_shape(shape);
            let n = numeric_ff_engine(&s, NoiseKind::Exchange, nu, 0.0, PI / 2.0, PI / 2.0).unwrap();
            assert!(rel(n.infidelity, ff_exchange_shaped(&q).unwrap()) < 1e-8, "{nu} {} {}", n.infidelity, ff_exchange_shaped(&q).unwrap());
        }
    }

    #[test]
    fn engine_rejects_non_identity() {
        let shape = PulseShape::rectangular(TP).unwrap();
        let s = crate::schedule::build_from_pattern("NZ", TP, shape).unwrap();
        assert!(numeric_ff_engine(&s, NoiseKind::Magnetic, 1e6, 0.0, 0.0, 0.0).is_err());
    }

    #[test]
    fn leakage_flags_negative() {
        assert!(leakage_from(1.0, 1.0 + 1e-6).is_err());
        assert_eq!(leakage_from(1.0, 1.0 + 1e-13).unwrap(), 0.0);
    }
    #[test]
    fn trapezoid_kernel_matches_quadrature() {
        let shape = PulseShape::trapezoidal(TP, 2.5e-9, 8.0).unwrap();
        for nu in [0.0, 4e6, 7.3e7, 3.1e8] {
            let mut want = C64::new(0.0, 0.0);
            for p in shape.pieces() {
                let gl = GaussLegendre::new(64.try_into().unwrap());
                for &(x, w) in gl.as_node_weight_pairs() {
                    let t = p.start + 0.5 * (x + 1.0) * p.len;
                    want += C64::from_polar(0.5 * w * p.len * p.value(t), -2.0 * PI * nu * t);
                }
            }
            assert!((pulse_kernel(&shape, nu) - want).norm() < 1e-8 * TP, "{nu}");
        }
    }

    #[test]
    fn predict_zero_and_linear() {
        let q = FilterFunctionQuery::nz1y(0.0, 20, TP, TP, 1.4e6).unwrap();
        let zb = PowerLawPsd::magnetic(0.0);
        let ze = PowerLawPsd::exchange(0.0);
        let p = predict_error(&zb, &ze, &q).unwrap();
        assert_eq!((p.infidelity, p.encoded, p.leakage), (0.0, 0.0, 0.0));

        let b = PowerLawPsd::magnetic(1e9).with_nu_lo(10.0);
        let e = PowerLawPsd::exchange(1e-6).with_nu_lo(10.0).with_nu_hi(1e8);
        let one = predict_error(&b, &e, &q).unwrap();
        let two = predict_error(&b.with_amplitude(2e9), &e.with_amplitude(2e-6), &q).unwrap();
        assert!(rel(two.encoded, 2.0 * one.encoded) < 1e-9);
        assert!(one.quad_error < 1e-3);
        assert!(one.leakage >= 0.0 && one.leakage <= one.infidelity);
        assert!((one.difference() - (1.0 - 2.0 * one.encoded - one.leakage)).abs() < 1e-15);
    }

    #[test]
    fn panels_cover_band() {
        let e = panel_edges(1e-3, 1e6, 100.0);
        assert_eq!(e[0], 1e-3);
        assert_eq!(*e.last().unwrap(), 1e6);
        assert!(e.windows(2).all(|w| w[1] > w[0] && w[1] - w[0] <= 100.0 * (1.0 + 1e-12)));
    }

}
