//! Spectral toolkit for the cascade heat–wave system
//!
//! ```text
//! z_t = z_xx,  z_x(0) = 0,  z_x(1) = u
//! w_tt = w_xx, w_x(0) = z(0), w(1) = 0
//! ```
//!
//! The heat part is the controller, the wave part is the plant. Modules follow
//! the computation pipeline: exact eigendata of both subsystems, the coupled
//! eigenfamily and its biorthogonal, the Sylvester (forwarding) operator and
//! feedback, truncated closed-loop simulation, and moment-method steering.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod closed_loop;
pub mod coupled_spectral;
pub mod error;
pub mod heat_spectral;
pub mod linalg;
pub mod moments;
pub mod quadrature;
pub mod series;
pub mod sylvester;
pub mod wave_spectral;

pub use error::{Error, Result};
pub use num_complex::Complex64 as C64;

pub const VERSION: &str = env!("CARGO_PKG_VERSION");
