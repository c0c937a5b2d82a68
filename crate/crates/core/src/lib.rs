//! Finite-domain constraint models written in spreadsheet cells.
//!
//! A workbook marks its decision-variable cells with `ssVarRanges(...)` and
//! its constraint cells with `ssConstraintRanges(...)`. [`compiler`] lowers
//! those cells into a [`compiler::Csp`] and can render the equivalent CLP(FD)
//! program; [`fdsolver`] enumerates or optimizes solutions; [`session`] drives
//! the build / next / previous / original-state loop over a live workbook.

pub mod batch;
pub mod compiler;
pub mod error;
pub mod fdsolver;
pub mod grid;
pub mod rangekit;
pub mod session;
pub mod sslang;

pub use error::{CompileError, CompileErrorKind, Diagnostic};
pub use grid::{CellAddr, RangeSpec, Workbook};
