//! Pseudo-spectral laboratory for the full compressible Navier-Stokes-Fourier
//! system on a periodic box: dyadic frequency analysis, a sharply truncated
//! approximate system integrated as an ODE on `L^2`, energy-functional
//! monitoring, and reproducible experiment drivers.

pub mod config;
pub mod energy;
pub mod error;
pub mod experiments;
pub mod fft;
pub mod integrator;
pub mod lemmas;
pub mod lp;
pub mod oracle;
pub mod physics;
pub mod random;
pub mod snapshot;
pub mod spectral;

pub use error::{Error, Result};
