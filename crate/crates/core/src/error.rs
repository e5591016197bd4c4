// Copyright 2026 The nzdd Authors
// SPDX-License-Identifier: Apache-2.0

use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum NzError {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error("numerical failure: {0}")]
    Numerical(String),
    #[error("calibration failed: {0}")]
    Calibration(String),
    #[error("parse error on line {line}: {message}")]
    Parse { line: usize, message: String },
}

pub type Result<T> = std::result::Result<T, NzError>;

pub(crate) fn invalid(msg: impl Into<String>) -> NzError {
    NzError::InvalidArgument(msg.into())
}
