// Copyright 2026 The nzdd Authors
// SPDX-License-Identifier: Apache-2.0

//! Three spin-1/2 particles: single-spin and exchange operators, the
//! decoherence-free-subsystem (DFS) basis, the gauge-mixed initial state and
//! the S12 readout model.
//!
//! The product basis is ordered by binary counting with dot 1 as the most
//! significant bit and `0 = ↑`, so index 0 is `|↑↑↑⟩` and index 7 is `|↓↓↓⟩`.
//! Operators use ħ = 1, so Hamiltonians are angular frequencies in rad/s.

use nalgebra::{SMatrix, SVector};
use num_complex::Complex64;
use std::f64::consts::FRAC_1_SQRT_2;
use std::ops::Mul;

pub type C64 = Complex64;
pub type Matrix8 = SMatrix<C64, 8, 8>;
pub type Vector8 = SVector<C64, 8>;
pub type Matrix2 = SMatrix<C64, 2, 2>;

pub(crate) const ZERO: C64 = C64::new(0.0, 0.0);
pub(crate) const ONE: C64 = C64::new(1.0, 0.0);
pub(crate) const I: C64 = C64::new(0.0, 1.0);

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Dot {
    One,
    Two,
    Three,
}

impl Dot {
    pub const ALL: [Dot; 3] = [Dot::One, Dot::Two, Dot::Three];

    pub fn index(self) -> usize {
        match self {
            Dot::One => 0,
            Dot::Two => 1,
            Dot::Three => 2,
        }
    }

    pub fn from_index(i: usize) -> Option<Dot> {
        Dot::ALL.get(i).copied()
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Axis {
    X,
    Y,
    Z,
}

impl Axis {
    pub const ALL: [Axis; 3] = [Axis::X, Axis::Y, Axis::Z];

    pub fn index(self) -> usize {
        match self {
            Axis::X => 0,
            Axis::Y => 1,
            Axis::Z => 2,
        }
    }
}

/// Unordered pair of dots coupled by exchange.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Pair {
    P12,
    P23,
    P13,
}

impl Pair {
    pub fn dots(self) -> (Dot, Dot) {
        match self {
            Pair::P12 => (Dot::One, Dot::Two),
            Pair::P23 => (Dot::Two, Dot::Three),
            Pair::P13 => (Dot::One, Dot::Three),
        }
    }

    /// The dot not touched by this pair.
    pub fn spectator(self) -> Dot {
        match self {
            Pair::P12 => Dot::Three,
            Pair::P23 => Dot::One,
            Pair::P13 => Dot::Two,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Basis {
    Product,
    Dfs,
}

/// An 8×8 operator tagged with the basis its elements refer to.
#[derive(Clone, Debug, PartialEq)]
pub struct LabeledOperator {
    pub matrix: Matrix8,
    pub basis: Basis,
}

impl LabeledOperator {
    pub fn new(matrix: Matrix8, basis: Basis) -> Self {
        Self { matrix, basis }
    }

    pub fn identity() -> Self {
        Self::new(Matrix8::identity(), Basis::Product)
    }

    /// Re-express the operator in `basis`.
    pub fn to_basis(&self, basis: Basis) -> Self {
        if basis == self.basis {
            return self.clone();
        }
        let v = dfs_matrix();
        let matrix = match basis {
            Basis::Dfs => v.adjoint() * self.matrix * v,
            Basis::Product => v * self.matrix * v.adjoint(),
        };
        Self { matrix, basis }
    }

    pub fn adjoint(&self) -> Self {
        Self::new(self.matrix.adjoint(), self.basis)
    }

    pub fn scale(&self, s: f64) -> Self {
        Self::new(self.matrix * C64::new(s, 0.0), self.basis)
    }

    pub fn hermiticity_error(&self) -> f64 {
        max_abs(&(self.matrix - self.matrix.adjoint()))
    }

    pub fn unitarity_error(&self) -> f64 {
        max_abs(&(self.matrix.adjoint() * self.matrix - Matrix8::identity()))
    }

    pub fn commutator(&self, other: &Self) -> Self {
        let b = other.to_basis(self.basis);
        Self::new(self.matrix * b.matrix - b.matrix * self.matrix, self.basis)
    }

    /// `min_φ ‖e^{iφ} self − other‖_max`, using the phase that aligns the
    /// overlap `Tr(other† self)`.
    pub fn distance_up_to_phase(&self, other: &Self) -> f64 {
        let b = other.to_basis(self.basis);
        phase_aligned_distance(&self.matrix, &b.matrix)
    }

    pub fn eigenvalues(&self) -> Vec<f64> {
        let mut ev: Vec<f64> = self.matrix.symmetric_eigen().eigenvalues.iter().copied().collect();
        ev.sort_by(|a, b| a.total_cmp(b));
        ev
    }
}

impl Mul for &LabeledOperator {
    type Output = LabeledOperator;

    fn mul(self, rhs: &LabeledOperator) -> LabeledOperator {
        let r = rhs.to_basis(self.basis);
        LabeledOperator::new(self.matrix * r.matrix, self.basis)
    }
}

pub fn max_abs<const R: usize, const C: usize>(m: &SMatrix<C64, R, C>) -> f64 {
    m.iter().fold(0.0, |acc, z| acc.max(z.norm()))
}

pub(crate) fn phase_aligned_distance(a: &Matrix8, b: &Matrix8) -> f64 {
    let overlap = (b.adjoint() * a).trace();
    let phase = if overlap.norm() > 0.0 {
        (overlap / overlap.norm()).conj()
    } else {
        ONE
    };
    max_abs(&(a * phase - b))
}

/// `exp(−i·h·t)` for Hermitian `h` via eigendecomposition.
pub fn expm_hermitian(h: &Matrix8, t: f64) -> Matrix8 {
    let eig = h.symmetric_eigen();
    let phases = eig.eigenvalues.map(|e| C64::from_polar(1.0, -e * t));
    let v = eig.eigenvectors;
    v * Matrix8::from_diagonal(&phases) * v.adjoint()
}

fn pauli_half(axis: Axis) -> Matrix2 {
    match axis {
        Axis::X => Matrix2::new(ZERO, ONE, ONE, ZERO) * C64::new(0.5, 0.0),
        Axis::Y => Matrix2::new(ZERO, -I, I, ZERO) * C64::new(0.5, 0.0),
        Axis::Z => Matrix2::new(ONE, ZERO, ZERO, -ONE) * C64::new(0.5, 0.0),
    }
}

fn kron3(a: &Matrix2, b: &Matrix2, c: &Matrix2) -> Matrix8 {
    Matrix8::from_fn(|r, col| {
        let (r1, r2, r3) = ((r >> 2) & 1, (r >> 1) & 1, r & 1);
        let (c1, c2, c3) = ((col >> 2) & 1, (col >> 1) & 1, col & 1);
        a[(r1, c1)] * b[(r2, c2)] * c[(r3, c3)]
    })
}

pub(crate) fn spin_matrix(dot: Dot, axis: Axis) -> Matrix8 {
    let id = Matrix2::identity();
    let s = pauli_half(axis);
    match dot {
        Dot::One => kron3(&s, &id, &id),
        Dot::Two => kron3(&id, &s, &id),
        Dot::Three => kron3(&id, &id, &s),
    }
}

pub(crate) fn exchange_matrix(pair: Pair) -> Matrix8 {
    let (j, k) = pair.dots();
    Axis::ALL
        .iter()
        .map(|&a| spin_matrix(j, a) * spin_matrix(k, a))
        .fold(Matrix8::zeros(), |acc, m| acc + m)
}

pub(crate) fn total_spin_matrix(axis: Axis) -> Matrix8 {
    Dot::ALL
        .iter()
        .fold(Matrix8::zeros(), |acc, &d| acc + spin_matrix(d, axis))
}

/// Single-spin operator `S_axis` on `dot`, identity elsewhere.
pub fn spin_operator(dot: Dot, axis: Axis) -> LabeledOperator {
    LabeledOperator::new(spin_matrix(dot, axis), Basis::Product)
}

/// Heisenberg coupling `S⃗_j·S⃗_k`.
pub fn exchange_operator(pair: Pair) -> LabeledOperator {
    LabeledOperator::new(exchange_matrix(pair), Basis::Product)
}

pub fn total_spin(axis: Axis) -> LabeledOperator {
    LabeledOperator::new(total_spin_matrix(axis), Basis::Product)
}

/// `S⃗² = S⃗·S⃗` for the total spin of all three dots.
pub fn total_spin_squared() -> LabeledOperator {
    let m = Axis::ALL
        .iter()
        .map(|&a| total_spin_matrix(a) * total_spin_matrix(a))
        .fold(Matrix8::zeros(), |acc, m| acc + m);
    LabeledOperator::new(m, Basis::Product)
}

/// `S⃗₁₂²` for the combined spin of dots 1 and 2.
pub fn pair12_spin_squared() -> LabeledOperator {
    let m = Axis::ALL
        .iter()
        .map(|&a| {
            let s = spin_matrix(Dot::One, a) + spin_matrix(Dot::Two, a);
            s * s
        })
        .fold(Matrix8::zeros(), |acc, m| acc + m);
    LabeledOperator::new(m, Basis::Product)
}

/// Quantum numbers of one DFS basis vector `|S12, S; m⟩`. Spins are stored
/// doubled so they stay integral.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct DfsLabel {
    pub s12: u8,
    pub two_s: u8,
    pub two_m: i8,
}

impl DfsLabel {
    pub fn s(&self) -> f64 {
        f64::from(self.two_s) / 2.0
    }

    pub fn m(&self) -> f64 {
        f64::from(self.two_m) / 2.0
    }

    pub fn is_leaked(&self) -> bool {
        self.two_s == 3
    }
}

pub const DFS_LABELS: [DfsLabel; 8] = [
    DfsLabel { s12: 0, two_s: 1, two_m: 1 },
    DfsLabel { s12: 0, two_s: 1, two_m: -1 },
    DfsLabel { s12: 1, two_s: 1, two_m: 1 },
    DfsLabel { s12: 1, two_s: 1, two_m: -1 },
    DfsLabel { s12: 1, two_s: 3, two_m: 3 },
    DfsLabel { s12: 1, two_s: 3, two_m: 1 },
    DfsLabel { s12: 1, two_s: 3, two_m: -1 },
    DfsLabel { s12: 1, two_s: 3, two_m: -3 },
];

#[derive(Clone, Debug)]
pub struct DfsBasis {
    pub labels: [DfsLabel; 8],
    /// Columns are the DFS vectors written in the product basis.
    pub change_of_basis: Matrix8,
}

impl DfsBasis {
    pub fn vector(&self, k: usize) -> Vector8 {
        self.change_of_basis.column(k).into_owned()
    }
}

fn product_index(spins: &str) -> usize {
    spins
        .bytes()
        .fold(0, |acc, c| (acc << 1) | usize::from(c == b'd'))
}

/// Columns: DFS vectors in product-basis coordinates (Condon-Shortley phases).
pub(crate) fn dfs_matrix() -> Matrix8 {
    let r2 = FRAC_1_SQRT_2;
    let r3 = 1.0 / 3f64.sqrt();
    let r6 = 1.0 / 6f64.sqrt();
    let r23 = (2.0f64 / 3.0).sqrt();
    let columns: [&[(&str, f64)]; 8] = [
        &[("udu", r2), ("duu", -r2)],
        &[("udd", r2), ("dud", -r2)],
        &[("uud", r23), ("udu", -r6), ("duu", -r6)],
        &[("udd", r6), ("dud", r6), ("ddu", -r23)],
        &[("uuu", 1.0)],
        &[("uud", r3), ("udu", r3), ("duu", r3)],
        &[("ddu", r3), ("dud", r3), ("udd", r3)],
        &[("ddd", 1.0)],
    ];
    let mut v = Matrix8::zeros();
    for (col, entries) in columns.iter().enumerate() {
        for &(spins, amp) in entries.iter() {
            v[(product_index(spins), col)] = C64::new(amp, 0.0);
        }
    }
    v
}

pub fn dfs_basis() -> DfsBasis {
    DfsBasis {
        labels: DFS_LABELS,
        change_of_basis: dfs_matrix(),
    }
}

/// Unitary whose columns are the DFS vectors in product coordinates; maps
/// DFS coordinates to product coordinates.
pub fn dfs_change_of_basis() -> LabeledOperator {
    LabeledOperator::new(dfs_matrix(), Basis::Product)
}

#[derive(Clone, Debug, PartialEq)]
pub struct DensityMatrix {
    pub matrix: Matrix8,
    pub basis: Basis,
}

impl DensityMatrix {
    pub fn from_pure(psi: &Vector8, basis: Basis) -> Self {
        Self {
            matrix: psi * psi.adjoint(),
            basis,
        }
    }

    /// Equal-weight mixture of the given DFS basis states.
    pub fn dfs_mixture(indices: &[usize]) -> Self {
        let w = 1.0 / indices.len() as f64;
        let mut m = Matrix8::zeros();
        for &k in indices {
            m[(k, k)] = C64::new(w, 0.0);
        }
        Self {
            matrix: m,
            basis: Basis::Dfs,
        }
    }

    pub fn to_basis(&self, basis: Basis) -> Self {
        let op = LabeledOperator::new(self.matrix, self.basis).to_basis(basis);
        Self {
            matrix: op.matrix,
            basis,
        }
    }

    /// `U ρ U†`.
    pub fn evolve(&self, u: &LabeledOperator) -> Self {
        let u = u.to_basis(self.basis);
        Self {
            matrix: u.matrix * self.matrix * u.matrix.adjoint(),
            basis: self.basis,
        }
    }

    pub fn trace(&self) -> f64 {
        self.matrix.trace().re
    }

    pub fn purity(&self) -> f64 {
        (self.matrix * self.matrix).trace().re
    }

    pub fn min_eigenvalue(&self) -> f64 {
        self.matrix
            .symmetric_eigen()
            .eigenvalues
            .iter()
            .copied()
            .fold(f64::INFINITY, f64::min)
    }

    fn dfs_populations(&self) -> [f64; 8] {
        let d = self.to_basis(Basis::Dfs);
        std::array::from_fn(|k| d.matrix[(k, k)].re)
    }
}

/// Gauge-mixed encoded `|0⟩`: `Σ_m |0,½;m⟩⟨0,½;m| / 2`, in the product basis.
pub fn initial_state() -> DensityMatrix {
    DensityMatrix::dfs_mixture(&[0, 1]).to_basis(Basis::Product)
}

/// Probability of the `S12 = 0` readout outcome. Leaked states carry
/// `S12 = 1` and read as encoded `|1⟩`.
pub fn measure_s12_zero(rho: &DensityMatrix) -> f64 {
    let p = rho.dfs_populations();
    p[0] + p[1]
}

/// Population of the `S = 3/2` quadruplet.
pub fn leakage_population(rho: &DensityMatrix) -> f64 {
    rho.dfs_populations()[4..].iter().sum()
}

/// Ideal single-qubit gates on the encoded qubit.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum FrameGate {
    Hadamard,
    SGate,
    SDagger,
    XGate,
    /// `𝕊ℍ` (Hadamard first): prepares `+ŷ` from `|0⟩`.
    PrepareY,
    /// `ℍ𝕊†` (𝕊† first): maps `+ŷ` back to `|0⟩`.
    UnprepareY,
}

impl FrameGate {
    pub fn name(self) -> &'static str {
        match self {
            FrameGate::Hadamard => "H",
            FrameGate::SGate => "S",
            FrameGate::SDagger => "Sdg",
            FrameGate::XGate => "X",
            FrameGate::PrepareY => "SH",
            FrameGate::UnprepareY => "HSdg",
        }
    }

    pub fn from_name(name: &str) -> Option<Self> {
        [
            FrameGate::Hadamard,
            FrameGate::SGate,
            FrameGate::SDagger,
            FrameGate::XGate,
            FrameGate::PrepareY,
            FrameGate::UnprepareY,
        ]
        .into_iter()
        .find(|g| g.name() == name)
    }

    fn qubit_matrix(self) -> Matrix2 {
        let h = C64::new(FRAC_1_SQRT_2, 0.0);
        let had = Matrix2::new(h, h, h, -h);
        let s = Matrix2::new(ONE, ZERO, ZERO, I);
        match self {
            FrameGate::Hadamard => had,
            FrameGate::SGate => s,
            FrameGate::SDagger => s.adjoint(),
            FrameGate::XGate => Matrix2::new(ZERO, ONE, ONE, ZERO),
            FrameGate::PrepareY => s * had,
            FrameGate::UnprepareY => had * s.adjoint(),
        }
    }
}

/// Exact unitary applying `gate` to the encoded qubit of each gauge `m`,
/// identity on the quadruplet. Returned in the product basis.
pub fn dfs_frame_gate(gate: FrameGate) -> LabeledOperator {
    let g = gate.qubit_matrix();
    let mut d = Matrix8::identity();
    // DFS indices: (S12=0, m=±½) = 0,1 and (S12=1, m=±½) = 2,3.
    for m in 0..2 {
        for a in 0..2 {
            for b in 0..2 {
                d[(2 * a + m, 2 * b + m)] = g[(a, b)];
            }
        }
    }
    LabeledOperator::new(d, Basis::Dfs).to_basis(Basis::Product)
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    fn ket(spins: &str) -> Vector8 {
        let mut v = Vector8::zeros();
        v[product_index(spins)] = ONE;
        v
    }

    #[test]
    fn sz_on_dot_one_is_diagonal() {
        let s = spin_operator(Dot::One, Axis::Z);
        for k in 0..8 {
            let want = if k < 4 { 0.5 } else { -0.5 };
            assert!((s.matrix[(k, k)].re - want).abs() < 1e-15);
        }
        assert!(max_abs(&(s.matrix - Matrix8::from_diagonal(&s.matrix.diagonal()))) < 1e-15);
    }

    #[test]
    fn sx_spectrum_is_four_fold() {
        let ev = spin_operator(Dot::Two, Axis::X).eigenvalues();
        for (k, e) in ev.iter().enumerate() {
            let want = if k < 4 { -0.5 } else { 0.5 };
            assert!((e - want).abs() < 1e-12);
        }
    }

    #[test]
    fn angular_momentum_algebra() {
        for d in Dot::ALL {
            let c = spin_operator(d, Axis::X).commutator(&spin_operator(d, Axis::Y));
            let want = spin_operator(d, Axis::Z).matrix * I;
            assert!(max_abs(&(c.matrix - want)) < 1e-14);
        }
    }

    #[test]
    fn exchange_spectrum() {
        for p in [Pair::P12, Pair::P23, Pair::P13] {
            let ev = exchange_operator(p).eigenvalues();
            assert!(ev[..2].iter().all(|e| (e + 0.75).abs() < 1e-12));
            assert!(ev[2..].iter().all(|e| (e - 0.25).abs() < 1e-12));
        }
    }

    #[test]
    fn pi_exchange_swaps_with_triplet_phase() {
        let u = expm_hermitian(&exchange_matrix(Pair::P12), PI);
        let out = u * ket("udu");
        let want = ket("duu") * C64::from_polar(1.0, -PI / 4.0);
        assert!(max_abs(&(out - want)) < 1e-12);
    }

    #[test]
    fn exchange_commutes_with_total_spin() {
        let s2 = total_spin_squared();
        let sz = total_spin(Axis::Z);
        for p in [Pair::P12, Pair::P23, Pair::P13] {
            let e = exchange_operator(p);
            assert!(max_abs(&e.commutator(&s2).matrix) < 1e-13);
            assert!(max_abs(&e.commutator(&sz).matrix) < 1e-13);
        }
    }

    #[test]
    fn dfs_vectors_have_labeled_quantum_numbers() {
        let basis = dfs_basis();
        let v = &basis.change_of_basis;
        assert!(max_abs(&(v.adjoint() * v - Matrix8::identity())) < 1e-12);
        let s2 = total_spin_squared().matrix;
        let sz = total_spin(Axis::Z).matrix;
        let s12 = pair12_spin_squared().matrix;
        for (k, label) in basis.labels.iter().enumerate() {
            let x = basis.vector(k);
            let s = label.s();
            let l12 = f64::from(label.s12);
            assert!(max_abs(&(s2 * x - x * C64::from(s * (s + 1.0)))) < 1e-12);
            assert!(max_abs(&(sz * x - x * C64::from(label.m()))) < 1e-12);
            assert!(max_abs(&(s12 * x - x * C64::from(l12 * (l12 + 1.0)))) < 1e-12);
        }
        let singlet = (ket("udu") - ket("duu")) * C64::from(FRAC_1_SQRT_2);
        assert!(max_abs(&(basis.vector(0) - singlet)) < 1e-15);
        assert!(max_abs(&(basis.vector(4) - ket("uuu"))) < 1e-15);
    }

    #[test]
    fn exchange_12_is_diagonal_in_dfs() {
        let e = exchange_operator(Pair::P12).to_basis(Basis::Dfs);
        for (k, l) in DFS_LABELS.iter().enumerate() {
            let want = if l.s12 == 0 { -0.75 } else { 0.25 };
            assert!((e.matrix[(k, k)].re - want).abs() < 1e-12);
        }
    }

    #[test]
    fn initial_state_properties() {
        let rho = initial_state();
        assert!((rho.trace() - 1.0).abs() < 1e-12);
        assert!((measure_s12_zero(&rho) - 1.0).abs() < 1e-12);
        assert!(leakage_population(&rho).abs() < 1e-12);
        assert!((rho.purity() - 0.5).abs() < 1e-12);
        assert!(rho.min_eigenvalue() > -1e-10);
    }

    #[test]
    fn readout_of_leaked_and_mixed_states() {
        let q = DensityMatrix::dfs_mixture(&[4]);
        assert!(measure_s12_zero(&q).abs() < 1e-15);
        let mix = DensityMatrix::dfs_mixture(&[0, 2]);
        assert!((measure_s12_zero(&mix) - 0.5).abs() < 1e-15);
        let uniform = DensityMatrix::dfs_mixture(&[0, 1, 2, 3, 4, 5, 6, 7]);
        assert!((leakage_population(&uniform) - 0.5).abs() < 1e-15);
    }

    #[test]
    fn frame_gate_identities() {
        let s = dfs_frame_gate(FrameGate::SGate);
        let sdg = dfs_frame_gate(FrameGate::SDagger);
        assert!(max_abs(&((&s * &sdg).matrix - Matrix8::identity())) < 1e-14);
        let h = dfs_frame_gate(FrameGate::Hadamard);
        assert!(max_abs(&((&h * &h).matrix - Matrix8::identity())) < 1e-14);
        let x = dfs_frame_gate(FrameGate::XGate);
        let flipped = initial_state().evolve(&x);
        assert!(measure_s12_zero(&flipped).abs() < 1e-14);
        let round = &dfs_frame_gate(FrameGate::UnprepareY) * &dfs_frame_gate(FrameGate::PrepareY);
        assert!(max_abs(&(round.matrix - Matrix8::identity())) < 1e-14);
    }

    #[test]
    fn frame_gates_act_trivially_on_quadruplet() {
        let h = dfs_frame_gate(FrameGate::PrepareY).to_basis(Basis::Dfs);
        for k in 4..8 {
            assert!((h.matrix[(k, k)] - ONE).norm() < 1e-14);
        }
        assert!(h.unitarity_error() < 1e-14);
    }
}
