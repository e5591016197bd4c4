// Copyright 2026 The nzdd Authors
// SPDX-License-Identifier: Apache-2.0

//! Truncated Taylor series in one variable.
//!
//! Used to evaluate closed-form expressions next to removable
//! singularities: numerator and denominator are expanded about the singular
//! point, the common zero is divided out, and the quotient series is summed
//! at the requested offset.

use std::ops::{Add, Mul, Neg, Sub};

/// Number of retained coefficients (orders `0..ORDER`).
pub(crate) const ORDER: usize = 26;

#[derive(Clone, Copy, Debug, PartialEq)]
pub(crate) struct Jet {
    pub c: [f64; ORDER],
}

impl Jet {
    pub fn constant(v: f64) -> Self {
        let mut c = [0.0; ORDER];
        c[0] = v;
        Self { c }
    }

    /// `a + b·h`.
    pub fn linear(a: f64, b: f64) -> Self {
        let mut j = Self::constant(a);
        j.c[1] = b;
        j
    }

    pub fn scale(mut self, s: f64) -> Self {
        self.c.iter_mut().for_each(|v| *v *= s);
        self
    }

    /// `(sin g, cos g)`.
    pub fn sin_cos(self) -> (Self, Self) {
        let (s0, c0) = self.c[0].sin_cos();
        let mut s = Self::constant(s0);
        let mut c = Self::constant(c0);
        for k in 1..ORDER {
            let (mut ds, mut dc) = (0.0, 0.0);
            for j in 1..=k {
                let jg = j as f64 * self.c[j];
                ds += jg * c.c[k - j];
                dc -= jg * s.c[k - j];
            }
            s.c[k] = ds / k as f64;
            c.c[k] = dc / k as f64;
        }
        (s, c)
    }

    pub fn sin(self) -> Self {
        self.sin_cos().0
    }

    pub fn cos(self) -> Self {
        self.sin_cos().1
    }

    /// Drop the first `v` coefficients (divide by `h^v`).
    pub fn shift(self, v: usize) -> Self {
        let mut c = [0.0; ORDER];
        c[..ORDER - v].copy_from_slice(&self.c[v..]);
        Self { c }
    }

    /// Series quotient; the divisor must have a nonzero constant term.
    /// Only the first `n` coefficients are meaningful.
    pub fn div(self, b: Self, n: usize) -> Self {
        let mut q = [0.0; ORDER];
        for k in 0..n {
            let mut acc = self.c[k];
            for j in 1..=k {
                acc -= b.c[j] * q[k - j];
            }
            q[k] = acc / b.c[0];
        }
        Self { c: q }
    }

    /// Sum of the first `n` terms at `h`.
    pub fn eval(&self, h: f64, n: usize) -> f64 {
        self.c[..n].iter().rev().fold(0.0, |acc, &v| acc * h + v)
    }
}

impl Add for Jet {
    type Output = Jet;
    fn add(mut self, o: Jet) -> Jet {
        for k in 0..ORDER {
            self.c[k] += o.c[k];
        }
        self
    }
}

impl Sub for Jet {
    type Output = Jet;
    fn sub(mut self, o: Jet) -> Jet {
        for k in 0..ORDER {
            self.c[k] -= o.c[k];
        }
        self
    }
}

impl Neg for Jet {
    type Output = Jet;
    fn neg(self) -> Jet {
        self.scale(-1.0)
    }
}

impl Mul for Jet {
    type Output = Jet;
    fn mul(self, o: Jet) -> Jet {
        let mut c = [0.0; ORDER];
        for i in 0..ORDER {
            if self.c[i] == 0.0 {
                continue;
            }
            for j in 0..ORDER - i {
                c[i + j] += self.c[i] * o.c[j];
            }
        }
        Jet { c }
    }
}

impl Add<f64> for Jet {
    type Output = Jet;
    fn add(mut self, o: f64) -> Jet {
        self.c[0] += o;
        self
    }
}

impl Mul<f64> for Jet {
    type Output = Jet;
    fn mul(self, o: f64) -> Jet {
        self.scale(o)
    }
}

/// Arithmetic shared by plain floats and jets, so a formula can be written
/// once and evaluated either way.
pub(crate) trait Scalar:
    Copy + Add<Output = Self> + Sub<Output = Self> + Mul<Output = Self> + Neg<Output = Self> + Add<f64, Output = Self> + Mul<f64, Output = Self>
{
    fn sin(self) -> Self;
    fn cos(self) -> Self;
    fn sq(self) -> Self {
        self * self
    }
}

impl Scalar for f64 {
    fn sin(self) -> Self {
        f64::sin(self)
    }
    fn cos(self) -> Self {
        f64::cos(self)
    }
}

impl Scalar for Jet {
    fn sin(self) -> Self {
        Jet::sin(self)
    }
    fn cos(self) -> Self {
        Jet::cos(self)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sin_series_matches_taylor() {
        let x = Jet::linear(0.3, 1.0);
        let s = x.sin();
        for h in [-0.2, 0.05, 0.4] {
            assert!((s.eval(h, ORDER) - (0.3f64 + h).sin()).abs() < 1e-15);
        }
    }

    #[test]
    fn removable_quotient() {
        // sin(h)/h at small h.
        let h = Jet::linear(0.0, 1.0);
        let q = h.sin().shift(1).div(h.shift(1), ORDER - 1);
        for x in [1e-9, 1e-3, 0.5] {
            let want = if x == 0.0 { 1.0 } else { f64::sin(x) / x };
            assert!((q.eval(x, ORDER - 1) - want).abs() < 1e-15);
        }
    }

    #[test]
    fn product_and_powers() {
        let x = Jet::linear(2.0, 1.0);
        let p = x * x * x;
        assert!((p.eval(0.1, ORDER) - 2.1f64.powi(3)).abs() < 1e-12);
        let y = (x * x - x * 2.0) + 1.0;
        assert!((y.eval(0.5, ORDER) - (2.5 * 2.5 - 5.0 + 1.0)).abs() < 1e-12);
    }
}
