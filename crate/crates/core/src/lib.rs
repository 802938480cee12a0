// SPDX-License-Identifier: Apache-2.0
//! Test-suite purification.
//!
//! A test is *pure* with respect to a set of program elements when every
//! element it executes always takes the same outcome (the same branch of an
//! `if`, the same exception behaviour of a `try`). This crate traces a test
//! suite written in a small test language, classifies tests by purity, splits
//! impure tests into minimal runs of pure constituents, checks that the split
//! suite kills the same mutants, and runs two analyses that benefit from pure
//! tests: repair readiness of `if` conditions and exception-contract
//! classification of `try` blocks.

pub mod applications;
pub mod corpus;
pub mod metrics;
pub mod splitter;
pub mod testlang;
pub mod trace;
pub mod validator;
