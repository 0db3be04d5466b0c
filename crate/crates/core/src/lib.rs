//! Numerical laboratory for solitary waves of the derivative nonlinear
//! Schrödinger equation with a quintic term,
//!
//! `i u_t = -u_xx - i |u|^2 u_x - b |u|^4 u`,
//!
//! on a periodic spectral grid: wave profiles and their stability threshold,
//! variational functionals, time integration, and the modulation machinery that
//! certifies orbital instability.

pub mod dynamics;
pub mod error;
pub mod functionals;
pub mod grid;
pub mod modulation;
pub mod random;
pub mod roots;
pub mod waves;

pub use error::{Error, Result};
pub use grid::{inner_h1, inner_l2, Field, Grid};
pub use waves::{classify, ClassificationReport, Omega, Params, Verdict};
