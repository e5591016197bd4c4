// Copyright 2026 The nzdd Authors
// SPDX-License-Identifier: Apache-2.0

//! Experiment harness: configuration, drivers and artifact output for the
//! `nzdd` command-line tool.

pub mod commands;
pub mod config;
pub mod output;
pub mod svg;

use nzdd_core::NzError;
use std::path::Path;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum HarnessError {
    #[error("usage: {0}")]
    Usage(String),
    #[error(transparent)]
    Core(#[from] NzError),
    #[error("i/o: {0}")]
    Io(String),
}

impl HarnessError {
    pub fn io(path: &Path, e: std::io::Error) -> Self {
        HarnessError::Io(format!("{}: {e}", path.display()))
    }

    /// 1 for bad input, 2 for failures while running.
    pub fn exit_code(&self) -> i32 {
        match self {
            HarnessError::Usage(_) => 1,
            HarnessError::Core(NzError::InvalidArgument(_) | NzError::Parse { .. }) => 1,
            HarnessError::Core(_) | HarnessError::Io(_) => 2,
        }
    }
}
