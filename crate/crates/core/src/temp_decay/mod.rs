//! Slowest temperature decay: the quotient
//! `[∫|∇u|² + (1/m)(∫_∂Ω |u| dσ)²] / ∫_Ω u² dx`,
//! its minimal value `λ_m` and the breaking threshold `m0` where `λ_m = κ1`.

mod minimize;
mod threshold;

pub use minimize::{
    decay_quotient, regularized_decay_quotient, DecayMinimizerResult, DECAY_SCHEDULE, DecayOptions, DecayProblem, DecayStageLog,
    StartLog,
};
pub use threshold::{
    breaking_scan, repair_monotone, threshold_m0, threshold_m0_with_refinement, BracketStep, M0Report, ScanRow,
    SCAN_CSV_HEADER,
};

use crate::error::Result;
use crate::fem::{eig_smallest, FemSpace, SpectralResult};

/// First Dirichlet eigenpair.
pub fn eig_dirichlet(space: &FemSpace) -> Result<SpectralResult> {
    eig_smallest(&space.stiffness, &space.mass, &[], Some(&space.on_boundary), 0)
}

/// First nonzero Neumann eigenpair.
pub fn eig_neumann2(space: &FemSpace) -> Result<SpectralResult> {
    eig_smallest(&space.stiffness, &space.mass, &[], None, 1)
}

/// Smallest Rayleigh quotient over fields with zero boundary mean.
pub fn eig_kappa1(space: &FemSpace) -> Result<SpectralResult> {
    eig_smallest(&space.stiffness, &space.mass, std::slice::from_ref(&space.b), None, 0)
}

/// Minimizes the decay quotient with default options.
pub fn minimize_lambda_m(space: &FemSpace, m: f64) -> Result<DecayMinimizerResult> {
    DecayProblem::new(space)?.minimize(m, &DecayOptions::default(), &[])
}
