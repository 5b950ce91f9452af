//! DC optimal power flow as an operator from load space to optimal
//! generation space.
//!
//! The crate solves the DC-OPF linear program with exact dual recovery,
//! validates binding constraint sets, differentiates the operator three
//! independent ways (closed form from binding sets, finite differences, and
//! self-dual-embedding differentiation), enumerates binding-set combinations
//! for worst-case sensitivity, and maps binding-set regions over load and
//! capacity slices.

pub mod conic;
pub mod dcopf;
pub mod error;
pub mod jacobian;
pub mod linalg;
pub mod netmodel;
pub mod operator;
pub mod simplex;
pub mod sweep;

pub use error::{Error, Result};
