// Copyright 2026 The nzdd Authors
// SPDX-License-Identifier: Apache-2.0

//! Simulation and analytic toolkit for full-permutation (NZ) dynamical
//! decoupling of an exchange-only three-spin qubit.

pub mod avg_hamiltonian;
pub mod calibrate;
pub mod engine;
pub mod error;
pub mod filter;
pub mod fit;
mod jet;
pub mod noise;
pub mod schedule;
pub mod spin;

pub use error::{NzError, Result};
