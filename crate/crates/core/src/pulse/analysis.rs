use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::PulseError;
use crate::ion_chain::{normal_modes, ModeSet, TrapConfig};
use crate::linalg::min_norm_solve;
use crate::phases::{max_displacement, ms_phases, PulseShape};

const GOLDEN_ITERATIONS: usize = 80;
const REFINED_PEAKS: usize = 8;

/// Largest `|g(t)|` over the gate: a uniform grid of `samples` points, then a
/// golden-section polish around the highest grid peaks.
pub fn max_rabi(pulse: &PulseShape, samples: usize) -> f64 {
    let tau = pulse.duration();
    let samples = samples.max(3);
    let dt = tau / (samples - 1) as f64;
    let grid: Vec<f64> = (0..samples).into_par_iter().map(|i| pulse.value(i as f64 * dt).abs()).collect();
    let mut peaks: Vec<usize> = (0..samples)
        .filter(|&i| {
            let left = if i > 0 { grid[i - 1] } else { f64::NEG_INFINITY };
            let right = if i + 1 < samples { grid[i + 1] } else { f64::NEG_INFINITY };
            grid[i] >= left && grid[i] >= right
        })
        .collect();
    peaks.sort_by(|&a, &b| grid[b].total_cmp(&grid[a]).then(a.cmp(&b)));
    peaks.truncate(REFINED_PEAKS);
    let mut best = grid.iter().copied().fold(0.0, f64::max);
    for i in peaks {
        let lo = (i as f64 - 1.0).max(0.0) * dt;
        let hi = ((i + 1) as f64 * dt).min(tau);
        best = best.max(golden_max(|t| pulse.value(t).abs(), lo, hi));
    }
    best
}

fn golden_max(f: impl Fn(f64) -> f64, mut lo: f64, mut hi: f64) -> f64 {
    let r = 0.5 * (5f64.sqrt() - 1.0);
    let mut x1 = hi - r * (hi - lo);
    let mut x2 = lo + r * (hi - lo);
    let (mut f1, mut f2) = (f(x1), f(x2));
    for _ in 0..GOLDEN_ITERATIONS {
        if f1 < f2 {
            lo = x1;
            x1 = x2;
            f1 = f2;
            x2 = lo + r * (hi - lo);
            f2 = f(x2);
        } else {
            hi = x2;
            x2 = x1;
            f2 = f1;
            x1 = hi - r * (hi - lo);
            f1 = f(x1);
        }
    }
    f1.max(f2)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ScanNormalization {
    /// Radians.
    #[default]
    Absolute,
    /// Divided by the nominal `|chi_12|`.
    Fractional,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ScanPoint {
    /// Shift of the radial COM frequency, Hz.
    pub offset_hz: f64,
    /// `|chi_11|`, `|chi_12|`, `|chi_22|` deviations from the unshifted trap.
    pub delta_chi: [f64; 3],
    pub max_alpha: f64,
}

/// Hold the pulse fixed, rebuild all modes at `nu_r + offset` and report the
/// phase deviations and residual displacement.
pub fn sensitivity_scan(
    pulse: &PulseShape,
    trap: &TrapConfig,
    ions: (usize, usize),
    offsets_hz: &[f64],
    normalization: ScanNormalization,
) -> Result<Vec<ScanPoint>, PulseError> {
    if offsets_hz.iter().any(|x| !x.is_finite()) {
        return Err(PulseError::Io("scan offsets must be finite".into()));
    }
    let nominal = ms_phases(pulse, &normal_modes(trap)?, ions)?;
    let norm = match normalization {
        ScanNormalization::Absolute => 1.0,
        ScanNormalization::Fractional => nominal.chi_12.abs().max(f64::MIN_POSITIVE),
    };
    offsets_hz
        .iter()
        .map(|&offset| {
            let modes = normal_modes(&trap.with_radial_offset(offset))?;
            let ph = ms_phases(pulse, &modes, ions)?;
            Ok(ScanPoint {
                offset_hz: offset,
                delta_chi: [
                    (ph.chi_11 - nominal.chi_11).abs() / norm,
                    (ph.chi_12 - nominal.chi_12).abs() / norm,
                    (ph.chi_22 - nominal.chi_22).abs() / norm,
                ],
                max_alpha: max_displacement(pulse, &modes, &[ions.0, ions.1]),
            })
        })
        .collect()
}

/// Minimum-norm `Theta_l` with `sum_l eta_lj eta_lk Theta_l = chi` and
/// `sum_l eta_lj^2 Theta_l = sum_l eta_lk^2 Theta_l = 0`.
pub fn existence_theta(modes: &ModeSet, ions: (usize, usize), target_chi: f64) -> Result<Vec<f64>, PulseError> {
    let (j, k) = ions;
    if j >= modes.num_ions() || k >= modes.num_ions() || j == k {
        return Err(crate::phases::PhaseError::Index(format!("ion pair ({j}, {k})")).into());
    }
    let n = modes.num_modes();
    let a = DMatrix::from_fn(3, n, |row, l| {
        let (ej, ek) = (modes.eta(l, j), modes.eta(l, k));
        match row {
            0 => ej * ek,
            1 => ej * ej,
            _ => ek * ek,
        }
    });
    let b = DVector::from_column_slice(&[target_chi, 0.0, 0.0]);
    let (theta, _) = min_norm_solve(&a, &b, 1e-12);
    let residual = (&a * &theta - &b).amax();
    if residual > 1e-10 * target_chi.abs().max(1.0) {
        return Err(PulseError::NoExistence(residual));
    }
    Ok(theta.iter().copied().collect())
}
