// Copyright 2026 The nzdd Authors
// SPDX-License-Identifier: Apache-2.0

//! Plain-text run configuration.
//!
//! The format is `key = value` lines grouped under `[section]` headers.
//! `#` starts a comment. Lists are comma separated. Every key has a default,
//! so an empty file is a valid configuration (apart from the seed, which
//! must come from the file, `--seed` or `NZ_SEED`).

use crate::HarnessError;
use nzdd_core::schedule::{Family, PulseShape};
use sha2::{Digest, Sha256};
use std::fmt::Write as _;
use std::path::PathBuf;

/// Documentation of every accepted key, printed by `--help`.
pub const KEYS_HELP: &str = "\
Config keys (section.key = default):
  noise.magnetic_amplitude   2.73e10   magnetic 1/f PSD at 1 Hz, (rad/s)^2/Hz
  noise.exchange_amplitude   7.19e-6   PSD of dJ/J at 1 Hz, 1/Hz
  noise.b0_ut                50        static field for Monte Carlo, uT
  noise.ff_b0_ut             45        static field for filter-function predictions, uT
  schedule.t_pulse_ns        10
  schedule.t_idle_ns         10
  schedule.t_idle_sweep_ns   5,10,20,30,40,50,60,70,80,85,90,95,100
  schedule.families          nz1,nz1y
  schedule.shape             rectangular | trapezoidal
  schedule.t_ramp_ns         2         trapezoid ramp
  schedule.alpha             10        trapezoid ramp ratio
  run.shots                  200
  run.r_max_nz1              3000
  run.r_max_nz1y             30000
  run.r_points               24        geometric r grid size
  run.seed                   (none)    master seed
  calibration.target_t2star_us 2
  calibration.target_rabi    25
  calibration.shots          5000
  ff.r_list                  3,30,300
  ff.timings_ns              10/10,10/30,30/10   t_pulse/t_idle pairs
  ff.nu_min_hz               1e5
  ff.nu_max_hz               1e8
  ff.points                  2000
  predict.r                  300       pulse pairs used for predictions
  output.dir                 out";

#[derive(Clone, Debug, PartialEq)]
pub struct HarnessConfig {
    pub magnetic_amplitude: f64,
    pub exchange_amplitude: f64,
    pub b0_ut: f64,
    pub ff_b0_ut: f64,
    pub t_pulse_ns: f64,
    pub t_idle_ns: f64,
    pub t_idle_sweep_ns: Vec<f64>,
    pub families: Vec<Family>,
    pub trapezoid: bool,
    pub t_ramp_ns: f64,
    pub alpha: f64,
    pub shots: usize,
    pub r_max_nz1: usize,
    pub r_max_nz1y: usize,
    pub r_points: usize,
    pub seed: Option<u64>,
    pub target_t2star_us: f64,
    pub target_rabi: f64,
    pub calibration_shots: usize,
    pub ff_r_list: Vec<usize>,
    pub ff_timings_ns: Vec<(f64, f64)>,
    pub ff_nu_min: f64,
    pub ff_nu_max: f64,
    pub ff_points: usize,
    pub predict_r: usize,
    pub out_dir: PathBuf,
}

impl Default for HarnessConfig {
    fn default() -> Self {
        Self {
            magnetic_amplitude: 2.73e10,
            exchange_amplitude: 7.19e-6,
            b0_ut: 50.0,
            ff_b0_ut: 45.0,
            t_pulse_ns: 10.0,
            t_idle_ns: 10.0,
            t_idle_sweep_ns: vec![5.0, 10.0, 20.0, 30.0, 40.0, 50.0, 60.0, 70.0, 80.0, 85.0, 90.0, 95.0, 100.0],
            families: vec![Family::Nz1, Family::Nz1y],
            trapezoid: false,
            t_ramp_ns: 2.0,
            alpha: 10.0,
            shots: 200,
            r_max_nz1: 3000,
            r_max_nz1y: 30000,
            r_points: 24,
            seed: None,
            target_t2star_us: 2.0,
            target_rabi: 25.0,
            calibration_shots: 5000,
            ff_r_list: vec![3, 30, 300],
            ff_timings_ns: vec![(10.0, 10.0), (10.0, 30.0), (30.0, 10.0)],
            ff_nu_min: 1e5,
            ff_nu_max: 1e8,
            ff_points: 2000,
            predict_r: 300,
            out_dir: PathBuf::from("out"),
        }
    }
}

fn usage(line: usize, msg: impl Into<String>) -> HarnessError {
    HarnessError::Usage(format!("config line {line}: {}", msg.into()))
}

fn list<T>(s: &str, f: impl Fn(&str) -> Option<T>) -> Option<Vec<T>> {
    s.split(',').map(|t| t.trim()).filter(|t| !t.is_empty()).map(f).collect()
}

fn join<T: ToString>(v: &[T]) -> String {
    v.iter().map(T::to_string).collect::<Vec<_>>().join(",")
}

impl HarnessConfig {
    /// Parse configuration text, starting from the defaults.
    pub fn parse(text: &str) -> Result<Self, HarnessError> {
        let mut cfg = Self::default();
        let mut section = String::new();
        for (i, raw) in text.lines().enumerate() {
            let line_no = i + 1;
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            if let Some(name) = line.strip_prefix('[').and_then(|l| l.strip_suffix(']')) {
                section = name.trim().to_ascii_lowercase();
                continue;
            }
            let (key, value) = line
                .split_once('=')
                .ok_or_else(|| usage(line_no, format!("expected key = value, got '{line}'")))?;
            let key = format!("{section}.{}", key.trim().to_ascii_lowercase());
            cfg.set(&key, value.trim()).map_err(|m| usage(line_no, m))?;
        }
        cfg.validate()?;
        Ok(cfg)
    }

    fn set(&mut self, key: &str, v: &str) -> Result<(), String> {
        let bad = || format!("invalid value '{v}' for {key}");
        let f = || v.parse::<f64>().map_err(|_| bad());
        let u = || v.parse::<usize>().map_err(|_| bad());
        match key {
            "noise.magnetic_amplitude" => self.magnetic_amplitude = f()?,
            "noise.exchange_amplitude" => self.exchange_amplitude = f()?,
            "noise.b0_ut" => self.b0_ut = f()?,
            "noise.ff_b0_ut" => self.ff_b0_ut = f()?,
            "schedule.t_pulse_ns" => self.t_pulse_ns = f()?,
            "schedule.t_idle_ns" => self.t_idle_ns = f()?,
            "schedule.t_idle_sweep_ns" => self.t_idle_sweep_ns = list(v, |t| t.parse().ok()).ok_or_else(bad)?,
            "schedule.families" => self.families = list(v, |t| Family::parse(t).ok()).ok_or_else(bad)?,
            "schedule.shape" => {
                self.trapezoid = match v.to_ascii_lowercase().as_str() {
                    "rectangular" => false,
                    "trapezoidal" => true,
                    _ => return Err(bad()),
                }
            }
            "schedule.t_ramp_ns" => self.t_ramp_ns = f()?,
            "schedule.alpha" => self.alpha = f()?,
            "run.shots" => self.shots = u()?,
            "run.r_max_nz1" => self.r_max_nz1 = u()?,
            "run.r_max_nz1y" => self.r_max_nz1y = u()?,
            "run.r_points" => self.r_points = u()?,
            "run.seed" => self.seed = Some(v.parse().map_err(|_| bad())?),
            "calibration.target_t2star_us" => self.target_t2star_us = f()?,
            "calibration.target_rabi" => self.target_rabi = f()?,
            "calibration.shots" => self.calibration_shots = u()?,
            "ff.r_list" => self.ff_r_list = list(v, |t| t.parse().ok()).ok_or_else(bad)?,
            "ff.timings_ns" => {
                self.ff_timings_ns = list(v, |t| {
                    let (a, b) = t.split_once('/')?;
                    Some((a.trim().parse().ok()?, b.trim().parse().ok()?))
                })
                .ok_or_else(bad)?
            }
            "ff.nu_min_hz" => self.ff_nu_min = f()?,
            "ff.nu_max_hz" => self.ff_nu_max = f()?,
            "ff.points" => self.ff_points = u()?,
            "predict.r" => self.predict_r = u()?,
            "output.dir" => self.out_dir = PathBuf::from(v),
            _ => return Err(format!("unknown key {key}")),
        }
        Ok(())
    }

    pub fn validate(&self) -> Result<(), HarnessError> {
        let bad = |m: &str| Err(HarnessError::Usage(m.to_string()));
        let durations = [self.t_pulse_ns, self.t_ramp_ns];
        if durations.iter().any(|d| !(*d > 0.0)) || !(self.t_idle_ns >= 0.0) {
            return bad("durations must be > 0 (t_idle >= 0)");
        }
        if self.t_idle_sweep_ns.is_empty() || self.t_idle_sweep_ns.iter().any(|t| !(*t >= 0.0)) {
            return bad("t_idle_sweep_ns must be a nonempty list of values >= 0");
        }
        if self.families.is_empty() || self.ff_r_list.is_empty() || self.ff_timings_ns.is_empty() {
            return bad("families, ff.r_list and ff.timings_ns must be nonempty");
        }
        if self.ff_r_list.iter().any(|r| !r.is_multiple_of(3) || *r == 0) || !self.predict_r.is_multiple_of(3) || self.predict_r == 0 {
            return bad("ff.r_list and predict.r must be positive multiples of 3");
        }
        if !(self.ff_nu_min > 0.0 && self.ff_nu_max > self.ff_nu_min) || self.ff_points < 2 {
            return bad("ff grid needs 0 < nu_min < nu_max and at least 2 points");
        }
        if self.r_points < 2 {
            return bad("run.r_points must be at least 2");
        }
        Ok(())
    }

    /// Scale shots and grids down tenfold.
    pub fn fast(mut self) -> Self {
        self.shots = (self.shots / 10).max(20);
        self.calibration_shots = (self.calibration_shots / 10).max(20);
        self.r_max_nz1 = (self.r_max_nz1 / 10).max(30);
        self.r_max_nz1y = (self.r_max_nz1y / 10).max(30);
        self.r_points = (self.r_points / 2).max(6);
        self.ff_points = (self.ff_points / 10).max(50);
        self
    }

    pub fn shape(&self) -> Result<PulseShape, HarnessError> {
        let tp = self.t_pulse_ns * 1e-9;
        Ok(if self.trapezoid {
            PulseShape::trapezoidal(tp, self.t_ramp_ns * 1e-9, self.alpha)?
        } else {
            PulseShape::rectangular(tp)?
        })
    }

    pub fn b0_tesla(&self) -> f64 {
        self.b0_ut * 1e-6
    }

    pub fn ff_b0_tesla(&self) -> f64 {
        self.ff_b0_ut * 1e-6
    }

    pub fn r_max(&self, family: Family) -> usize {
        match family {
            Family::Nz1 => self.r_max_nz1,
            _ => self.r_max_nz1y,
        }
    }

    /// Canonical text form; parsing it back gives the same configuration.
    pub fn to_text(&self) -> String {
        let mut s = String::new();
        let fams: Vec<&str> = self.families.iter().map(|f| f.name()).collect();
        let timings: Vec<String> = self.ff_timings_ns.iter().map(|(a, b)| format!("{a}/{b}")).collect();
        let mut w = |sec: &str, kv: &[(&str, String)]| {
            let _ = writeln!(s, "[{sec}]");
            for (k, v) in kv {
                let _ = writeln!(s, "{k} = {v}");
            }
            let _ = writeln!(s);
        };
        w("noise", &[
            ("magnetic_amplitude", format!("{:e}", self.magnetic_amplitude)),
            ("exchange_amplitude", format!("{:e}", self.exchange_amplitude)),
            ("b0_ut", self.b0_ut.to_string()),
            ("ff_b0_ut", self.ff_b0_ut.to_string()),
        ]);
        w("schedule", &[
            ("t_pulse_ns", self.t_pulse_ns.to_string()),
            ("t_idle_ns", self.t_idle_ns.to_string()),
            ("t_idle_sweep_ns", join(&self.t_idle_sweep_ns)),
            ("families", fams.join(",")),
            ("shape", if self.trapezoid { "trapezoidal" } else { "rectangular" }.to_string()),
            ("t_ramp_ns", self.t_ramp_ns.to_string()),
            ("alpha", self.alpha.to_string()),
        ]);
        let mut run = vec![
            ("shots", self.shots.to_string()),
            ("r_max_nz1", self.r_max_nz1.to_string()),
            ("r_max_nz1y", self.r_max_nz1y.to_string()),
            ("r_points", self.r_points.to_string()),
        ];
        if let Some(seed) = self.seed {
            run.push(("seed", seed.to_string()));
        }
        w("run", &run);
        w("calibration", &[
            ("target_t2star_us", self.target_t2star_us.to_string()),
            ("target_rabi", self.target_rabi.to_string()),
            ("shots", self.calibration_shots.to_string()),
        ]);
        w("ff", &[
            ("r_list", join(&self.ff_r_list)),
            ("timings_ns", timings.join(",")),
            ("nu_min_hz", format!("{:e}", self.ff_nu_min)),
            ("nu_max_hz", format!("{:e}", self.ff_nu_max)),
            ("points", self.ff_points.to_string()),
        ]);
        w("predict", &[("r", self.predict_r.to_string())]);
        w("output", &[("dir", self.out_dir.display().to_string())]);
        s
    }

    /// First 16 hex digits of the SHA-256 of the canonical text, ignoring
    /// the output directory.
    pub fn hash(&self) -> String {
        let canonical = HarnessConfig { out_dir: PathBuf::new(), ..self.clone() }.to_text();
        let digest = Sha256::digest(canonical.as_bytes());
        digest.iter().take(8).map(|b| format!("{b:02x}")).collect()
    }
}

/// Seed precedence: command line, then config file, then `NZ_SEED`.
pub fn resolve_seed(cli: Option<u64>, cfg: Option<u64>, env: Option<&str>) -> Result<u64, HarnessError> {
    if let Some(s) = cli.or(cfg) {
        return Ok(s);
    }
    match env {
        Some(v) => v
            .trim()
            .parse()
            .map_err(|_| HarnessError::Usage(format!("NZ_SEED must be an unsigned integer, got '{v}'"))),
        None => Err(HarnessError::Usage(
            "no seed given: set run.seed, pass --seed or export NZ_SEED".into(),
        )),
    }
}

/// Independent seed for a named sub-experiment.
pub fn derive_seed(master: u64, tag: &str) -> u64 {
    let mut h = Sha256::new();
    h.update(master.to_le_bytes());
    h.update(tag.as_bytes());
    let d = h.finalize();
    u64::from_le_bytes(d[..8].try_into().expect("8 bytes"))
}

/// `{0} ∪` roughly geometric multiples of `step` up to `max`.
pub fn geometric_grid(step: usize, max: usize, points: usize) -> Vec<usize> {
    let mut v = vec![0];
    let max = max.max(step);
    for k in 1..=points {
        let x = (max as f64).powf(k as f64 / points as f64);
        let r = ((x / step as f64).round() as usize).max(1) * step;
        if r > *v.last().expect("nonempty") {
            v.push(r);
        }
    }
    v
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn roundtrip() {
        let c = HarnessConfig { seed: Some(9), ff_timings_ns: vec![(10.0, 5.5)], ..Default::default() };
        let back = HarnessConfig::parse(&c.to_text()).unwrap();
        assert_eq!(back, c);
        assert_eq!(back.hash(), c.hash());
    }

    #[test]
    fn sections_and_comments() {
        let c = HarnessConfig::parse("# run\n[run]\nshots = 12 # few\nseed=4\n[schedule]\nfamilies = nz1y\n").unwrap();
        assert_eq!(c.shots, 12);
        assert_eq!(c.seed, Some(4));
        assert_eq!(c.families, vec![Family::Nz1y]);
    }

    #[test]
    fn rejects_bad_input() {
        for text in ["[run]\nshots = -1", "[run]\nbogus = 1", "just text", "[schedule]\nt_idle_sweep_ns =", "[schedule]\nt_pulse_ns = 0"] {
            assert!(matches!(HarnessConfig::parse(text), Err(HarnessError::Usage(_))), "{text}");
        }
    }

    #[test]
    fn seed_precedence() {
        assert_eq!(resolve_seed(Some(1), Some(2), Some("3")).unwrap(), 1);
        assert_eq!(resolve_seed(None, Some(2), Some("3")).unwrap(), 2);
        assert_eq!(resolve_seed(None, None, Some("3")).unwrap(), 3);
        assert!(resolve_seed(None, None, None).is_err());
        assert!(resolve_seed(None, None, Some("x")).is_err());
    }

    #[test]
    fn derived_seeds_differ() {
        assert_ne!(derive_seed(1, "a"), derive_seed(1, "b"));
        assert_eq!(derive_seed(1, "a"), derive_seed(1, "a"));
    }

    #[test]
    fn grid_shape() {
        let g = geometric_grid(3, 3000, 24);
        assert_eq!(g[0], 0);
        assert_eq!(*g.last().unwrap(), 3000);
        assert!(g.windows(2).all(|w| w[1] > w[0] && w[1] % 3 == 0));
    }
}
