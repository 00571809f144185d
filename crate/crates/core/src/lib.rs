//! Simulation and analysis toolkit for Josephson-junction fabrication
//! variability.
//!
//! The crate is organised along the fabrication chain:
//!
//! * [`geometry`]: Dolan-bridge shadow-evaporation geometry
//! * [`litho`]: analytic double-Gaussian proximity dose and linewidth bias
//! * [`mcpsf`]: Monte Carlo electron trajectories and PSF fitting
//! * [`writer`]: e-beam writer linewidth noise and quantisation
//! * [`ler`]: line-edge-roughness synthesis and measurement
//! * [`wafer`]: stochastic wafer model producing junction datasets
//! * [`electrical`]: area → Rₙ → I_c → E_J → f₀₁ chain
//! * [`stats`]: variation hierarchy, heat maps, log-log fits
//! * [`experiments`]: canned reproductions with pass/fail bands
//! * [`config`]: run configuration files

#[cfg(test)]
macro_rules! assert_close {
    ($a:expr, $b:expr, $tol:expr) => {{
        let (a, b, tol): (f64, f64, f64) = ($a, $b, $tol);
        assert!((a - b).abs() <= tol, "{a} != {b} (tolerance {tol})");
    }};
}

pub mod config;
pub mod constants;
pub mod dataset;
pub mod electrical;
pub mod error;
pub mod experiments;
pub mod geometry;
pub mod ler;
pub mod litho;
pub mod mcpsf;
pub mod report;
pub mod rng;
pub mod stats;
pub mod wafer;
pub mod writer;

pub use error::{Error, Result};
