// Copyright 2026 The rydgate Authors
// SPDX-License-Identifier: Apache-2.0

//! Optimal-control toolkit for native multi-qubit phase gates on globally
//! driven Rydberg-atom registers.

pub mod error;
pub mod linalg;
pub mod model;
pub mod objective;
pub mod ansatz;
pub mod propagator;
pub mod trainer;
pub mod evaluation;

pub use error::{Error, Result};
