//! Constraint providers: maps from `(dataset, parameter)` to the matrix of
//! estimating-equation values fed to the EL solver.

mod data;
mod gk;
mod normal;
pub mod popgen;
mod timeseries;

pub use data::{Dataset, Locus, Microsat, Scenario};
pub use gk::{gk_percentile_constraints, gk_quantile, GkParams, GkPercentiles, GK_DEFAULT_C};
pub use normal::{normal_moments, NormalMoments};
pub use popgen::{
    composite_score_matrix, pair_loglik_diverged, pair_loglik_same_deme, rho, CompositeScore, PopGenParams,
};
pub use timeseries::{
    arch_innovations, arch_residuals, garch_loglik, garch_score, garch_variance_path, ArchResiduals, ArchVariant, GarchScore,
};

use crate::el::ConstraintMatrix;
use crate::error::Result;

/// A family of estimating equations `E[h(Y, theta)] = 0`.
pub trait ConstraintProvider: Send + Sync {
    /// Dimension of `theta`.
    fn n_params(&self) -> usize;

    /// Evaluate `h(y_i, theta)` for every observation. Parameters outside the
    /// model's support are a [`crate::Error::Domain`].
    fn constraints(&self, data: &Dataset, theta: &[f64]) -> Result<ConstraintMatrix>;
}

pub(crate) fn check_len(theta: &[f64], n: usize) -> Result<()> {
    if theta.len() != n {
        return crate::error::input(format!("expected {n} parameters, got {}", theta.len()));
    }
    if theta.iter().any(|t| !t.is_finite()) {
        return crate::error::domain("non-finite parameter");
    }
    Ok(())
}
