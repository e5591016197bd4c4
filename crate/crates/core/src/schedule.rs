// Copyright 2026 The nzdd Authors
// SPDX-License-Identifier: Apache-2.0

//! Timed exchange-pulse schedules (NZ1, NZ1y, NZ2 and arbitrary N/Z strings)
//! and their ideal propagators.
//!
//! Every pulse period is `τ = t_pulse + t_idle` with the pulse first. A
//! trapezoidal pulse occupies `t_pulse + t_ramp` and the idle that follows is
//! shortened by `t_ramp`, so pulse starts stay on the `kτ` grid.

use crate::error::{invalid, NzError, Result};
use crate::spin::{dfs_frame_gate, FrameGate, LabeledOperator, Matrix8, Pair, C64};
use std::f64::consts::PI;
use std::fmt::Write as _;

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum ShapeKind {
    Rectangular,
    /// Exponential ramps from `1/alpha` to 1 over `t_ramp`, flat top, and a
    /// symmetric fall.
    Trapezoidal { t_ramp: f64, alpha: f64 },
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct PulseShape {
    pub t_pulse: f64,
    pub kind: ShapeKind,
}

/// One smooth piece of the sensitivity profile:
/// `s(t) = s0 · exp(rate · (t − start))` on `[start, start + len]`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ProfilePiece {
    pub start: f64,
    pub len: f64,
    pub s0: f64,
    pub rate: f64,
}

impl ProfilePiece {
    pub fn value(&self, t: f64) -> f64 {
        self.s0 * (self.rate * (t - self.start)).exp()
    }

    pub fn integral(&self) -> f64 {
        if self.rate == 0.0 {
            self.s0 * self.len
        } else {
            self.s0 * (self.rate * self.len).exp_m1() / self.rate
        }
    }

    /// Integral of the piece over `[start + a, start + b]`.
    pub fn integral_between(&self, a: f64, b: f64) -> f64 {
        if self.rate == 0.0 {
            self.s0 * (b - a)
        } else {
            self.s0 * ((self.rate * b).exp() - (self.rate * a).exp()) / self.rate
        }
    }
}

impl PulseShape {
    pub fn rectangular(t_pulse: f64) -> Result<Self> {
        if !(t_pulse > 0.0 && t_pulse.is_finite()) {
            return Err(invalid(format!("t_pulse must be positive, got {t_pulse}")));
        }
        Ok(Self {
            t_pulse,
            kind: ShapeKind::Rectangular,
        })
    }

    pub fn trapezoidal(t_pulse: f64, t_ramp: f64, alpha: f64) -> Result<Self> {
        Self::rectangular(t_pulse)?;
        if !(t_ramp > 0.0 && t_ramp < t_pulse) {
            return Err(invalid(format!(
                "t_ramp must lie in (0, t_pulse), got {t_ramp}"
            )));
        }
        if !(alpha > 1.0 && alpha.is_finite()) {
            return Err(invalid(format!("on-off ratio must exceed 1, got {alpha}")));
        }
        Ok(Self {
            t_pulse,
            kind: ShapeKind::Trapezoidal { t_ramp, alpha },
        })
    }

    pub fn ramp(&self) -> f64 {
        match self.kind {
            ShapeKind::Rectangular => 0.0,
            ShapeKind::Trapezoidal { t_ramp, .. } => t_ramp,
        }
    }

    /// Time the pulse occupies: `t_pulse` plus the trailing ramp.
    pub fn support(&self) -> f64 {
        self.t_pulse + self.ramp()
    }

    /// Ramp rate `2πν_R = (1 − 1/α)/t_R`, zero for rectangular pulses.
    pub fn ramp_rate(&self) -> f64 {
        match self.kind {
            ShapeKind::Rectangular => 0.0,
            ShapeKind::Trapezoidal { t_ramp, alpha } => (1.0 - 1.0 / alpha) / t_ramp,
        }
    }

    pub fn pieces(&self) -> Vec<ProfilePiece> {
        match self.kind {
            ShapeKind::Rectangular => vec![ProfilePiece {
                start: 0.0,
                len: self.t_pulse,
                s0: 1.0,
                rate: 0.0,
            }],
            ShapeKind::Trapezoidal { t_ramp, alpha } => {
                let k = self.ramp_rate();
                vec![
                    ProfilePiece {
                        start: 0.0,
                        len: t_ramp,
                        s0: 1.0 / alpha,
                        rate: k,
                    },
                    ProfilePiece {
                        start: t_ramp,
                        len: self.t_pulse - t_ramp,
                        s0: 1.0,
                        rate: 0.0,
                    },
                    ProfilePiece {
                        start: self.t_pulse,
                        len: t_ramp,
                        s0: 1.0,
                        rate: -k,
                    },
                ]
            }
        }
    }

    /// Exchange-noise sensitivity at time `t` after the pulse start; zero
    /// outside the support.
    pub fn sensitivity(&self, t: f64) -> f64 {
        if t < 0.0 || t > self.support() {
            return 0.0;
        }
        let pieces = self.pieces();
        let p = pieces
            .iter()
            .find(|p| t < p.start + p.len)
            .unwrap_or_else(|| pieces.last().expect("shape has pieces"));
        p.value(t)
    }

    pub fn sensitivity_integral(&self) -> f64 {
        self.pieces().iter().map(ProfilePiece::integral).sum()
    }
}

/// Normalized sensitivity `s(t)` of a pulse, as a closure over time since the
/// pulse start.
pub fn sensitivity_profile(shape: PulseShape) -> impl Fn(f64) -> f64 + Copy {
    move |t| shape.sensitivity(t)
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum SegmentKind {
    Idle,
    /// Exchange between dots 2 and 3.
    NPulse,
    /// Exchange between dots 1 and 2.
    ZPulse,
    Frame(FrameGate),
}

impl SegmentKind {
    pub fn pair(self) -> Option<Pair> {
        match self {
            SegmentKind::NPulse => Some(Pair::P23),
            SegmentKind::ZPulse => Some(Pair::P12),
            _ => None,
        }
    }

    pub fn is_pulse(self) -> bool {
        self.pair().is_some()
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Segment {
    pub kind: SegmentKind,
    pub duration: f64,
    /// Integrated exchange angle for pulses, zero otherwise.
    pub angle: f64,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Family {
    Nz1,
    Nz1y,
    Nz2,
    Custom,
}

impl Family {
    pub fn name(self) -> &'static str {
        match self {
            Family::Nz1 => "NZ1",
            Family::Nz1y => "NZ1y",
            Family::Nz2 => "NZ2",
            Family::Custom => "custom",
        }
    }

    pub fn parse(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "nz1" | "nz1z" => Ok(Family::Nz1),
            "nz1y" => Ok(Family::Nz1y),
            "nz2" => Ok(Family::Nz2),
            "custom" => Ok(Family::Custom),
            _ => Err(invalid(format!("unknown sequence family '{s}'"))),
        }
    }

    /// Granularity of valid `r` values (pulse pairs).
    pub fn r_step(self) -> usize {
        match self {
            Family::Nz2 => 6,
            Family::Custom => 1,
            _ => 3,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct PulseSchedule {
    pub segments: Vec<Segment>,
    /// Number of N/Z pulse pairs.
    pub repetitions: usize,
    pub t_idle: f64,
    pub shape: PulseShape,
    pub family: Family,
}

const NZ2_BLOCK: &str = "NZNZNZZNZNZN";

fn check_timing(t_idle: f64, shape: &PulseShape) -> Result<()> {
    if !(t_idle >= 0.0 && t_idle.is_finite()) {
        return Err(invalid(format!("t_idle must be non-negative, got {t_idle}")));
    }
    if t_idle < shape.ramp() {
        return Err(invalid(format!(
            "t_idle ({t_idle}) must cover the trailing ramp ({})",
            shape.ramp()
        )));
    }
    Ok(())
}

fn pulse_train(pattern: &str, t_idle: f64, shape: &PulseShape) -> Result<Vec<Segment>> {
    let idle = t_idle - shape.ramp();
    let mut segments = Vec::with_capacity(2 * pattern.len());
    for c in pattern.chars() {
        let kind = match c {
            'N' | 'n' => SegmentKind::NPulse,
            'Z' | 'z' => SegmentKind::ZPulse,
            c if c.is_whitespace() => continue,
            other => return Err(invalid(format!("unexpected pulse symbol '{other}'"))),
        };
        segments.push(Segment {
            kind,
            duration: shape.support(),
            angle: PI,
        });
        if idle > 0.0 {
            segments.push(Segment {
                kind: SegmentKind::Idle,
                duration: idle,
                angle: 0.0,
            });
        }
    }
    Ok(segments)
}

fn frame(gate: FrameGate) -> Segment {
    Segment {
        kind: SegmentKind::Frame(gate),
        duration: 0.0,
        angle: 0.0,
    }
}

/// `(NZ)^r` with `r` a multiple of 3, starting with N.
pub fn build_nz1(r: usize, t_idle: f64, shape: PulseShape) -> Result<PulseSchedule> {
    if !r.is_multiple_of(3) {
        return Err(invalid(format!(
            "r must be a multiple of 3 for whole NZNZNZ blocks, got {r}"
        )));
    }
    check_timing(t_idle, &shape)?;
    Ok(PulseSchedule {
        segments: pulse_train(&"NZ".repeat(r), t_idle, &shape)?,
        repetitions: r,
        t_idle,
        shape,
        family: Family::Nz1,
    })
}

/// `𝕊ℍ`, then `(NZ)^r`, then `ℍ𝕊†`.
pub fn build_nz1y(r: usize, t_idle: f64, shape: PulseShape) -> Result<PulseSchedule> {
    let mut s = build_nz1(r, t_idle, shape)?;
    s.segments.insert(0, frame(FrameGate::PrepareY));
    s.segments.push(frame(FrameGate::UnprepareY));
    s.family = Family::Nz1y;
    Ok(s)
}

/// `blocks` repetitions of `NZNZNZZNZNZN`.
pub fn build_nz2(blocks: usize, t_idle: f64, shape: PulseShape) -> Result<PulseSchedule> {
    check_timing(t_idle, &shape)?;
    Ok(PulseSchedule {
        segments: pulse_train(&NZ2_BLOCK.repeat(blocks), t_idle, &shape)?,
        repetitions: 6 * blocks,
        t_idle,
        shape,
        family: Family::Nz2,
    })
}

/// Arbitrary string of `N` and `Z` pulses.
pub fn build_from_pattern(pattern: &str, t_idle: f64, shape: PulseShape) -> Result<PulseSchedule> {
    check_timing(t_idle, &shape)?;
    let segments = pulse_train(pattern, t_idle, &shape)?;
    let pulses = segments.iter().filter(|s| s.kind.is_pulse()).count();
    Ok(PulseSchedule {
        segments,
        repetitions: pulses / 2,
        t_idle,
        shape,
        family: Family::Custom,
    })
}

/// Build a family schedule where `r` counts N/Z pulse pairs.
pub fn build_family(family: Family, r: usize, t_idle: f64, shape: PulseShape) -> Result<PulseSchedule> {
    match family {
        Family::Nz1 => build_nz1(r, t_idle, shape),
        Family::Nz1y => build_nz1y(r, t_idle, shape),
        Family::Nz2 => {
            if !r.is_multiple_of(6) {
                return Err(invalid(format!("NZ2 needs r divisible by 6, got {r}")));
            }
            build_nz2(r / 6, t_idle, shape)
        }
        Family::Custom => Err(invalid("custom schedules are built from a pattern")),
    }
}

/// Idle-only schedule of the given length.
pub fn build_idle(duration: f64, shape: PulseShape) -> Result<PulseSchedule> {
    if !(duration >= 0.0 && duration.is_finite()) {
        return Err(invalid(format!("duration must be non-negative, got {duration}")));
    }
    let segments = if duration > 0.0 {
        vec![Segment {
            kind: SegmentKind::Idle,
            duration,
            angle: 0.0,
        }]
    } else {
        Vec::new()
    };
    Ok(PulseSchedule {
        segments,
        repetitions: 0,
        t_idle: duration,
        shape,
        family: Family::Custom,
    })
}

/// Unitary of a pulse of integrated angle `theta` on `pair`:
/// `exp(−iθ S⃗_j·S⃗_k) = e^{iθ/4}(cos(θ/2) − i sin(θ/2) SWAP_jk)`.
pub fn exchange_rotation(pair: Pair, theta: f64) -> Matrix8 {
    let swap = swap_matrix(pair);
    let c = C64::new((theta / 2.0).cos(), 0.0);
    let s = C64::new(0.0, -(theta / 2.0).sin());
    (Matrix8::identity() * c + swap * s) * C64::from_polar(1.0, theta / 4.0)
}

pub(crate) fn swap_matrix(pair: Pair) -> Matrix8 {
    let (j, k) = pair.dots();
    let (bj, bk) = (2 - j.index(), 2 - k.index());
    let mut m = Matrix8::zeros();
    for col in 0..8usize {
        let (xj, xk) = ((col >> bj) & 1, (col >> bk) & 1);
        let row = (col & !(1 << bj) & !(1 << bk)) | (xk << bj) | (xj << bk);
        m[(row, col)] = C64::new(1.0, 0.0);
    }
    m
}

impl PulseSchedule {
    pub fn duration(&self) -> f64 {
        self.segments.iter().map(|s| s.duration).sum()
    }

    pub fn period(&self) -> f64 {
        self.shape.t_pulse + self.t_idle
    }

    pub fn pulse_count(&self) -> usize {
        self.segments.iter().filter(|s| s.kind.is_pulse()).count()
    }

    /// Replace every N pulse angle by `π + dn` and every Z angle by `π + dz`.
    pub fn with_miscalibration(mut self, dn: f64, dz: f64) -> Self {
        for s in &mut self.segments {
            match s.kind {
                SegmentKind::NPulse => s.angle = PI + dn,
                SegmentKind::ZPulse => s.angle = PI + dz,
                _ => {}
            }
        }
        self
    }

    /// Append another schedule's segments.
    pub fn concat(&self, other: &PulseSchedule) -> PulseSchedule {
        let mut out = self.clone();
        out.segments.extend_from_slice(&other.segments);
        out.repetitions += other.repetitions;
        out.family = Family::Custom;
        out
    }

    /// Noiseless propagator in the product basis. Pulses rotate by their
    /// integrated angle whatever the shape; frame gates are exact.
    pub fn ideal_propagator(&self) -> LabeledOperator {
        let mut u = Matrix8::identity();
        for s in &self.segments {
            match s.kind {
                SegmentKind::Idle => {}
                SegmentKind::NPulse | SegmentKind::ZPulse => {
                    let pair = s.kind.pair().expect("pulse has a pair");
                    u = exchange_rotation(pair, s.angle) * u;
                }
                SegmentKind::Frame(g) => u = dfs_frame_gate(g).matrix * u,
            }
        }
        LabeledOperator::new(u, crate::spin::Basis::Product)
    }

    /// `perm[d]` is the spin sitting in dot `d` after all pulses, assuming
    /// every pulse is a full swap.
    pub fn net_permutation(&self) -> [usize; 3] {
        let mut perm = [0, 1, 2];
        for s in &self.segments {
            if let Some(pair) = s.kind.pair() {
                let (j, k) = pair.dots();
                perm.swap(j.index(), k.index());
            }
        }
        perm
    }

    /// `hist[spin][dot]`: number of pulse periods each spin spends in each
    /// dot, counting the arrangement after every pulse.
    pub fn dot_occupancy(&self) -> [[usize; 3]; 3] {
        let mut perm = [0, 1, 2];
        let mut hist = [[0; 3]; 3];
        for s in &self.segments {
            if let Some(pair) = s.kind.pair() {
                let (j, k) = pair.dots();
                perm.swap(j.index(), k.index());
                for (dot, &spin) in perm.iter().enumerate() {
                    hist[spin][dot] += 1;
                }
            }
        }
        hist
    }

    /// Line-oriented text form: a header comment then `kind duration [angle]`.
    pub fn to_text(&self) -> String {
        let mut out = String::new();
        let shape = match self.shape.kind {
            ShapeKind::Rectangular => "rect".to_string(),
            ShapeKind::Trapezoidal { t_ramp, alpha } => {
                format!("trapz t_ramp={t_ramp:e} alpha={alpha}")
            }
        };
        let _ = writeln!(
            out,
            "# family={} r={} t_pulse={:e} t_idle={:e} shape={}",
            self.family.name(),
            self.repetitions,
            self.shape.t_pulse,
            self.t_idle,
            shape
        );
        for s in &self.segments {
            match s.kind {
                SegmentKind::Idle => {
                    let _ = writeln!(out, "idle {:e}", s.duration);
                }
                SegmentKind::NPulse => {
                    let _ = writeln!(out, "N {:e} {}", s.duration, s.angle);
                }
                SegmentKind::ZPulse => {
                    let _ = writeln!(out, "Z {:e} {}", s.duration, s.angle);
                }
                SegmentKind::Frame(g) => {
                    let _ = writeln!(out, "frame {}", g.name());
                }
            }
        }
        out
    }

    pub fn from_text(text: &str) -> Result<Self> {
        let perr = |line: usize, message: String| NzError::Parse { line, message };
        let mut header: Option<(Family, usize, f64, f64, PulseShape)> = None;
        let mut segments = Vec::new();
        for (i, raw) in text.lines().enumerate() {
            let line = i + 1;
            let raw = raw.trim();
            if raw.is_empty() {
                continue;
            }
            if let Some(rest) = raw.strip_prefix('#') {
                header = Some(parse_header(rest).map_err(|m| perr(line, m))?);
                continue;
            }
            let fields: Vec<&str> = raw.split_whitespace().collect();
            let num = |k: usize| -> Result<f64> {
                fields
                    .get(k)
                    .ok_or_else(|| perr(line, "missing field".into()))?
                    .parse::<f64>()
                    .map_err(|e| perr(line, e.to_string()))
            };
            let seg = match fields[0] {
                "idle" => Segment {
                    kind: SegmentKind::Idle,
                    duration: num(1)?,
                    angle: 0.0,
                },
                "N" | "Z" => Segment {
                    kind: if fields[0] == "N" {
                        SegmentKind::NPulse
                    } else {
                        SegmentKind::ZPulse
                    },
                    duration: num(1)?,
                    angle: num(2)?,
                },
                "frame" => {
                    let name = fields.get(1).ok_or_else(|| perr(line, "missing gate".into()))?;
                    let g = FrameGate::from_name(name)
                        .ok_or_else(|| perr(line, format!("unknown gate '{name}'")))?;
                    frame(g)
                }
                other => return Err(perr(line, format!("unknown segment kind '{other}'"))),
            };
            segments.push(seg);
        }
        let (family, repetitions, _t_pulse, t_idle, shape) =
            header.ok_or_else(|| perr(1, "missing header line".into()))?;
        Ok(Self {
            segments,
            repetitions,
            t_idle,
            shape,
            family,
        })
    }
}

fn parse_header(rest: &str) -> std::result::Result<(Family, usize, f64, f64, PulseShape), String> {
    let mut family = Family::Custom;
    let (mut r, mut tp, mut ti) = (0usize, None, 0.0);
    let (mut trapz, mut t_ramp, mut alpha) = (false, 0.0, 0.0);
    for tok in rest.split_whitespace() {
        let (k, v) = tok.split_once('=').ok_or(format!("bad header token '{tok}'"))?;
        let fnum = |v: &str| v.parse::<f64>().map_err(|e| format!("{k}: {e}"));
        match k {
            "family" => family = Family::parse(v).map_err(|e| e.to_string())?,
            "r" => r = v.parse().map_err(|e| format!("r: {e}"))?,
            "t_pulse" => tp = Some(fnum(v)?),
            "t_idle" => ti = fnum(v)?,
            "shape" => trapz = v == "trapz",
            "t_ramp" => t_ramp = fnum(v)?,
            "alpha" => alpha = fnum(v)?,
            _ => return Err(format!("unknown header key '{k}'")),
        }
    }
    let tp = tp.ok_or("header lacks t_pulse")?;
    let shape = if trapz {
        PulseShape::trapezoidal(tp, t_ramp, alpha)
    } else {
        PulseShape::rectangular(tp)
    }
    .map_err(|e| e.to_string())?;
    Ok((family, r, tp, ti, shape))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::spin::{
        exchange_operator, expm_hermitian, initial_state, leakage_population, measure_s12_zero,
        max_abs, Basis,
    };

    const TP: f64 = 10e-9;

    fn rect() -> PulseShape {
        PulseShape::rectangular(TP).unwrap()
    }

    #[test]
    fn nz1_block_layout() {
        let s = build_nz1(3, 10e-9, rect()).unwrap();
        let kinds: String = s
            .segments
            .iter()
            .filter_map(|g| match g.kind {
                SegmentKind::NPulse => Some('N'),
                SegmentKind::ZPulse => Some('Z'),
                _ => None,
            })
            .collect();
        assert_eq!(kinds, "NZNZNZ");
        assert_eq!(s.segments.len(), 12);
        assert!((s.duration() - 6.0 * 20e-9).abs() < 1e-20);
    }

    #[test]
    fn nz1_rejects_partial_blocks() {
        assert!(build_nz1(4, 10e-9, rect()).is_err());
        let empty = build_nz1(0, 10e-9, rect()).unwrap();
        assert!(empty.segments.is_empty());
        assert!(empty.ideal_propagator().unitarity_error() < 1e-15);
    }

    #[test]
    fn nz1_block_is_identity_up_to_phase() {
        let u = build_nz1(3, 10e-9, rect()).unwrap().ideal_propagator();
        assert!(u.distance_up_to_phase(&LabeledOperator::identity()) < 1e-10);
    }

    #[test]
    fn single_n_pulse_is_swap23() {
        let s = build_from_pattern("N", 0.0, rect()).unwrap();
        let swap = LabeledOperator::new(swap_matrix(Pair::P23), Basis::Product);
        assert!(s.ideal_propagator().distance_up_to_phase(&swap) < 1e-10);
    }

    #[test]
    fn closed_form_rotation_matches_expm() {
        for theta in [0.3, PI, 2.0 * PI + 0.1] {
            let a = exchange_rotation(Pair::P13, theta);
            let b = expm_hermitian(&exchange_operator(Pair::P13).matrix, theta);
            assert!(max_abs(&(a - b)) < 1e-12);
        }
    }

    #[test]
    fn nz1y_wraps_with_frame_gates() {
        let s = build_nz1y(3, 10e-9, rect()).unwrap();
        assert_eq!(s.segments[0].kind, SegmentKind::Frame(FrameGate::PrepareY));
        assert_eq!(
            s.segments.last().unwrap().kind,
            SegmentKind::Frame(FrameGate::UnprepareY)
        );
        let rho = initial_state().evolve(&s.ideal_propagator());
        assert!((measure_s12_zero(&rho) - 1.0).abs() < 1e-12);
        let zero = build_nz1y(0, 10e-9, rect()).unwrap().ideal_propagator();
        assert!(zero.distance_up_to_phase(&LabeledOperator::identity()) < 1e-12);
    }

    #[test]
    fn nz2_block() {
        let s = build_nz2(1, 10e-9, rect()).unwrap();
        assert_eq!(s.pulse_count(), 12);
        assert_eq!(s.net_permutation(), [0, 1, 2]);
        assert!(build_nz2(0, 10e-9, rect()).unwrap().segments.is_empty());
        let u = s.ideal_propagator().to_basis(Basis::Dfs);
        let off: f64 = (0..8)
            .flat_map(|i| (0..8).map(move |j| (i, j)))
            .filter(|(i, j)| i != j)
            .map(|(i, j)| u.matrix[(i, j)].norm())
            .fold(0.0, f64::max);
        assert!(off < 1e-12);
    }

    #[test]
    fn nz1_block_occupancy_is_uniform() {
        let hist = build_nz1(3, 10e-9, rect()).unwrap().dot_occupancy();
        for row in hist {
            assert_eq!(row, [2, 2, 2]);
        }
    }

    #[test]
    fn concatenation_multiplies_propagators() {
        let a = build_from_pattern("NZZ", 5e-9, rect()).unwrap().with_miscalibration(0.1, -0.2);
        let b = build_nz1y(3, 5e-9, rect()).unwrap();
        let ab = a.concat(&b).ideal_propagator();
        let prod = &b.ideal_propagator() * &a.ideal_propagator();
        assert!(max_abs(&(ab.matrix - prod.matrix)) < 1e-12);
    }

    #[test]
    fn exchange_only_schedule_does_not_leak() {
        let s = build_from_pattern("NZZNZNNZ", 0.0, rect()).unwrap().with_miscalibration(0.3, 0.7);
        let rho = initial_state().evolve(&s.ideal_propagator());
        assert!(leakage_population(&rho) < 1e-12);
    }

    #[test]
    fn trapezoid_timing_preserves_period() {
        let shape = PulseShape::trapezoidal(TP, 2e-9, 10.0).unwrap();
        let s = build_nz1(3, 10e-9, shape).unwrap();
        assert!((s.duration() - 6.0 * 20e-9).abs() < 1e-20);
        assert!(build_nz1(3, 1e-9, shape).is_err());
    }

    #[test]
    fn sensitivity_values() {
        let f = sensitivity_profile(rect());
        assert_eq!(f(TP / 2.0), 1.0);
        assert!((rect().sensitivity_integral() - TP).abs() < 1e-24);
        let shape = PulseShape::trapezoidal(TP, 2e-9, 10.0).unwrap();
        assert!((shape.sensitivity(0.0) - 0.1).abs() < 1e-15);
        assert!((shape.sensitivity(5e-9) - 1.0).abs() < 1e-15);
        assert_eq!(shape.sensitivity(13e-9), 0.0);
        let n = 200_000;
        let h = shape.support() / n as f64;
        let sum: f64 = (0..n).map(|k| shape.sensitivity((k as f64 + 0.5) * h) * h).sum();
        assert!((sum - shape.sensitivity_integral()).abs() < 1e-4 * sum);
    }

    #[test]
    fn shape_validation() {
        assert!(PulseShape::rectangular(0.0).is_err());
        assert!(PulseShape::trapezoidal(TP, TP, 2.0).is_err());
        assert!(PulseShape::trapezoidal(TP, 1e-9, 1.0).is_err());
    }

    #[test]
    fn text_round_trip() {
        let shape = PulseShape::trapezoidal(TP, 2e-9, 10.0).unwrap();
        let s = build_nz1y(6, 12e-9, shape).unwrap().with_miscalibration(0.01, 0.0);
        let back = PulseSchedule::from_text(&s.to_text()).unwrap();
        assert_eq!(back.segments.len(), s.segments.len());
        assert_eq!(back.family, Family::Nz1y);
        assert_eq!(back.shape, s.shape);
        for (a, b) in back.segments.iter().zip(&s.segments) {
            assert_eq!(a.kind, b.kind);
            assert!((a.duration - b.duration).abs() <= 1e-15 * b.duration.max(1e-30));
            assert!((a.angle - b.angle).abs() < 1e-15);
        }
        assert!(PulseSchedule::from_text("bogus 1").is_err());
    }

    #[test]
    fn golden_text() {
        let s = build_nz1y(3, 10e-9, rect()).unwrap();
        let text = s.to_text();
        let mut lines = text.lines();
        assert_eq!(
            lines.next().unwrap(),
            "# family=NZ1y r=3 t_pulse=1e-8 t_idle=1e-8 shape=rect"
        );
        assert_eq!(lines.next().unwrap(), "frame SH");
        assert_eq!(lines.next().unwrap(), "N 1e-8 3.141592653589793");
        assert_eq!(lines.next().unwrap(), "idle 1e-8");
    }
}
