//! Linearized Euler solver on a periodic channel with admittance walls,
//! Lagrangian displacement transport and Galbrun-equation monitors.

pub mod background;
pub mod config;
pub mod convergence;
pub mod diagnostics;
pub mod displacement;
pub mod error;
pub mod euler;
pub mod mesh;
pub mod opcheck;
pub mod operators;
pub mod oracle;
pub mod particles;
pub mod run;

pub use error::{Error, Result};
