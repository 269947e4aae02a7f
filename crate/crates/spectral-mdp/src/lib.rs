//! Random spectral measures of the classical matrix ensembles.
//!
//! The library samples the tridiagonal models of the Gaussian, Laguerre and
//! Jacobi β-ensembles, exposes the transformations between raw moments,
//! three-term recursion coefficients and canonical moments, and evaluates the
//! rate functions that govern moderate deviations of the sampled moment
//! vectors around their limit laws (semicircle, Marchenko–Pastur, arcsine).
//!
//! Module map:
//! - [`combinatorics`]: exact lattice-path counts and the lower-triangular
//!   covariance factors `D_k`, all in integer/rational arithmetic
//! - [`orthopoly`]: moment ↔ recursion ↔ canonical-moment transforms,
//!   orthonormal polynomial evaluation, Gauss quadrature
//! - [`measures`]: reference measures, sampled spectral measures, signed
//!   measure representations, the weighted moment metric
//! - [`ensembles`]: tridiagonal samplers, spectral decomposition, Monte Carlo
//!   covariance estimation
//! - [`mdp`]: scalar / moment-level / measure-level rate functions and the
//!   exact-tail tables that verify them numerically
//! - [`special`]: log-space tail probabilities used by the tables

pub mod combinatorics;
pub mod ensembles;
pub mod measures;
pub mod mdp;
pub mod orthopoly;
pub mod special;

mod error;

pub use error::{Error, Result};

use serde::{Deserialize, Serialize};

/// The three classical ensembles with a tridiagonal model.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Ensemble {
    Gaussian,
    Laguerre,
    Jacobi,
}

impl Ensemble {
    pub const ALL: [Ensemble; 3] = [Ensemble::Gaussian, Ensemble::Laguerre, Ensemble::Jacobi];

    pub fn name(self) -> &'static str {
        match self {
            Ensemble::Gaussian => "gaussian",
            Ensemble::Laguerre => "laguerre",
            Ensemble::Jacobi => "jacobi",
        }
    }
}

impl std::fmt::Display for Ensemble {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

impl std::str::FromStr for Ensemble {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "gaussian" | "hermite" => Ok(Ensemble::Gaussian),
            "laguerre" | "wishart" => Ok(Ensemble::Laguerre),
            "jacobi" | "manova" => Ok(Ensemble::Jacobi),
            other => Err(Error::Domain(format!("unknown ensemble `{other}`"))),
        }
    }
}
