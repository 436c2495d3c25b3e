//! Power-optimal multi-tone pulse shaping with drift stabilization.

mod analysis;
mod io;
mod matrices;
mod optimize;
mod projection;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::ion_chain::ChainError;
use crate::phases::PhaseError;

pub use analysis::{existence_theta, max_rabi, sensitivity_scan, ScanNormalization, ScanPoint};
pub use io::{read_pulse_csv, write_pulse_csv, write_scan_csv};
pub use matrices::{build_coupling_matrices, decoupling_matrix, phase_matrix, CouplingMatrices, PhaseIndex};
pub use optimize::{optimize_pulse, optimize_with_matrices, OptimizationResult, OptimizerOptions, Residuals};
pub use projection::projection_basis;

#[derive(Debug, Error)]
pub enum PulseError {
    #[error(transparent)]
    Phase(#[from] PhaseError),
    #[error(transparent)]
    Chain(#[from] ChainError),
    #[error(
        "infeasible stabilization: {phases} phases x {modes} modes x {per_mode} vectors + {modes} x {moments} moment rows \
         = {projected} projected columns, but at most {tones} tones - {modes} decoupling rows - 3 phase constraints - 1 = {limit} are allowed"
    )]
    Infeasible {
        phases: usize,
        modes: usize,
        per_mode: usize,
        moments: usize,
        projected: usize,
        tones: usize,
        limit: i64,
    },
    #[error("null space of the linear constraints is empty")]
    EmptyNullSpace,
    #[error("the reduced problem has no pulse with the requested sign of chi_12")]
    NoSolution,
    #[error(
        "optimizer did not converge: best phase residual {:.3e}, linear residual {:.3e}",
        .0.residuals.phase,
        .0.residuals.linear
    )]
    NoConvergence(Box<OptimizationResult>),
    #[error("existence system for Theta is inconsistent (residual {0:e})")]
    NoExistence(f64),
    #[error("pulse file: {0}")]
    Io(String),
}

/// Which phase sensitivities and displacement moments to null.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct StabilizationConfig {
    /// Eigenvectors removed per (phase, mode).
    pub projected_per_mode: usize,
    pub phases: Vec<PhaseIndex>,
    /// Number of displacement frequency-derivatives nulled.
    pub moment_order: usize,
}

impl Default for StabilizationConfig {
    fn default() -> Self {
        Self::none()
    }
}

impl StabilizationConfig {
    pub fn none() -> Self {
        Self { projected_per_mode: 0, phases: Vec::new(), moment_order: 0 }
    }

    pub fn new(projected_per_mode: usize, phases: &[PhaseIndex], moment_order: usize) -> Self {
        let mut phases = phases.to_vec();
        phases.sort();
        phases.dedup();
        Self { projected_per_mode, phases, moment_order }
    }

    /// Number of columns of the projection matrix for `num_modes` modes.
    pub fn projected_columns(&self, num_modes: usize) -> usize {
        self.phase_columns(num_modes) + num_modes * self.moment_order
    }

    pub(crate) fn phase_columns(&self, num_modes: usize) -> usize {
        self.phases.len() * num_modes * self.projected_per_mode
    }

    pub fn check_feasible(&self, num_tones: usize, num_modes: usize) -> Result<(), PulseError> {
        let projected = self.projected_columns(num_modes);
        let limit = num_tones as i64 - num_modes as i64 - 3 - 1;
        if projected as i64 > limit {
            return Err(PulseError::Infeasible {
                phases: self.phases.len(),
                modes: num_modes,
                per_mode: self.projected_per_mode,
                moments: self.moment_order,
                projected,
                tones: num_tones,
                limit,
            });
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn feasibility_arithmetic() {
        let cfg = StabilizationConfig::new(5, &PhaseIndex::ALL, 1);
        assert_eq!(cfg.projected_columns(10), 160);
        assert!(cfg.check_feasible(512, 10).is_ok());
        let err = cfg.check_feasible(170, 10).unwrap_err();
        assert!(err.to_string().contains("= 160 projected columns"), "{err}");
        assert!(cfg.check_feasible(174, 10).is_ok());
        assert!(cfg.check_feasible(173, 10).is_err());
    }

    #[test]
    fn phases_are_canonicalized() {
        let cfg = StabilizationConfig::new(1, &[PhaseIndex::Chi22, PhaseIndex::Chi12, PhaseIndex::Chi22], 0);
        assert_eq!(cfg.phases, vec![PhaseIndex::Chi12, PhaseIndex::Chi22]);
    }
}
