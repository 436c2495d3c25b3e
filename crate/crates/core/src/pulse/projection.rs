use nalgebra::DMatrix;

use super::matrices::CouplingMatrices;
use super::{PulseError, StabilizationConfig};
use crate::linalg::{symmetric_eigen, EigenOrder};

/// Stabilization matrix `R` (P x columns).
///
/// Phase columns come first, grouped by mode and then by phase in canonical
/// order; each group holds the `projected_per_mode` eigenvectors of
/// `Q_{jk,l}` with the largest `|eigenvalue|`, taken from the complement of
/// the vectors already chosen for that mode. The `K` moment blocks follow,
/// one column per mode per order.
pub fn projection_basis(cm: &CouplingMatrices, cfg: &StabilizationConfig) -> Result<DMatrix<f64>, PulseError> {
    let p = cm.num_tones();
    let n = cm.num_modes();
    cfg.check_feasible(p, n)?;
    if cm.moments.len() < cfg.moment_order {
        return Err(PulseError::Io(format!(
            "matrices carry {} moment blocks, {} requested",
            cm.moments.len(),
            cfg.moment_order
        )));
    }
    let m = cfg.projected_per_mode;
    let mut cols: Vec<nalgebra::DVector<f64>> = Vec::with_capacity(cfg.projected_columns(n));
    if m > 0 {
        for l in 0..n {
            let mut chosen: Vec<nalgebra::DVector<f64>> = Vec::new();
            for &phase in &cfg.phases {
                let mut q = cm.q(phase, l);
                if !chosen.is_empty() {
                    let v = DMatrix::from_columns(&chosen);
                    let proj = DMatrix::identity(p, p) - &v * v.transpose();
                    q = &proj * q * &proj;
                    q = (&q + q.transpose()) * 0.5;
                }
                let eig = symmetric_eigen(&q, EigenOrder::DescendingMagnitude);
                for c in 0..m {
                    chosen.push(eig.vectors.column(c).into_owned());
                }
            }
            cols.extend(chosen);
        }
    }
    for moment in cm.moments.iter().take(cfg.moment_order) {
        for row in moment.row_iter() {
            let r = row.transpose();
            let nrm = r.norm();
            cols.push(if nrm > 0.0 { r / nrm } else { r });
        }
    }
    if cols.is_empty() {
        return Ok(DMatrix::zeros(p, 0));
    }
    Ok(DMatrix::from_columns(&cols))
}
