//! Quadratic and linear forms of the multi-tone MS gate in the amplitude
//! vector `Omega`.

use std::fmt;

use nalgebra::DMatrix;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::integrals::{decoupling_entry, phase_kernel, phase_kernel_with_derivative};
use crate::ion_chain::ModeSet;
use crate::phases::{PhaseError, PulseBasis};

/// One of the three MS phases of an ion pair.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum PhaseIndex {
    #[serde(rename = "11")]
    Chi11,
    #[serde(rename = "12")]
    Chi12,
    #[serde(rename = "22")]
    Chi22,
}

impl PhaseIndex {
    pub const ALL: [PhaseIndex; 3] = [PhaseIndex::Chi11, PhaseIndex::Chi12, PhaseIndex::Chi22];

    /// The two ions of the pair `(j, k)` that this phase couples.
    pub fn ion_pair(self, ions: (usize, usize)) -> (usize, usize) {
        match self {
            PhaseIndex::Chi11 => (ions.0, ions.0),
            PhaseIndex::Chi12 => (ions.0, ions.1),
            PhaseIndex::Chi22 => (ions.1, ions.1),
        }
    }
}

impl fmt::Display for PhaseIndex {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            PhaseIndex::Chi11 => "11",
            PhaseIndex::Chi12 => "12",
            PhaseIndex::Chi22 => "22",
        })
    }
}

impl std::str::FromStr for PhaseIndex {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "11" => Ok(PhaseIndex::Chi11),
            "12" => Ok(PhaseIndex::Chi12),
            "22" => Ok(PhaseIndex::Chi22),
            other => Err(format!("unknown phase '{other}', expected 11, 12 or 22")),
        }
    }
}

/// Everything the optimizer needs about one basis, mode set and ion pair.
#[derive(Clone, Debug)]
pub struct CouplingMatrices {
    pub basis: PulseBasis,
    pub ions: (usize, usize),
    /// `eta_{l,j}` and `eta_{l,k}` for every mode.
    pub etas: Vec<(f64, f64)>,
    /// `M`, one row per mode (N x P).
    pub decoupling: DMatrix<f64>,
    /// `d^k M / d omega^k` for `k = 1..=K`.
    pub moments: Vec<DMatrix<f64>>,
    pub s11: DMatrix<f64>,
    pub s12: DMatrix<f64>,
    pub s22: DMatrix<f64>,
    /// Symmetrized `d J_l / d omega_l` per mode, with `eta` held fixed.
    pub mode_sensitivity: Vec<DMatrix<f64>>,
}

impl CouplingMatrices {
    pub fn num_modes(&self) -> usize {
        self.etas.len()
    }

    pub fn num_tones(&self) -> usize {
        self.basis.num_tones
    }

    pub fn s(&self, phase: PhaseIndex) -> &DMatrix<f64> {
        match phase {
            PhaseIndex::Chi11 => &self.s11,
            PhaseIndex::Chi12 => &self.s12,
            PhaseIndex::Chi22 => &self.s22,
        }
    }

    /// `eta_{l,a} eta_{l,b}` for the ions coupled by `phase`.
    pub fn eta_product(&self, phase: PhaseIndex, mode: usize) -> f64 {
        let (ej, ek) = self.etas[mode];
        match phase {
            PhaseIndex::Chi11 => ej * ej,
            PhaseIndex::Chi12 => ej * ek,
            PhaseIndex::Chi22 => ek * ek,
        }
    }

    /// `Q_{jk,l} = d S_jk / d omega_l`.
    pub fn q(&self, phase: PhaseIndex, mode: usize) -> DMatrix<f64> {
        &self.mode_sensitivity[mode] * self.eta_product(phase, mode)
    }

    /// `Omega^T S Omega`.
    pub fn quadratic(&self, phase: PhaseIndex, amplitudes: &[f64]) -> f64 {
        let v = nalgebra::DVectorView::from_slice(amplitudes, amplitudes.len());
        (self.s(phase) * v).dot(&v)
    }
}

fn symmetrize(m: &DMatrix<f64>) -> DMatrix<f64> {
    (m + m.transpose()) * 0.5
}

/// `J_l[n][m]` (and optionally its frequency derivative) for one mode.
fn mode_kernels(mus: &[f64], omega: f64, tau: f64, with_derivative: bool) -> (DMatrix<f64>, Option<DMatrix<f64>>) {
    let p = mus.len();
    let rows: Vec<Vec<(f64, f64)>> = (0..p)
        .into_par_iter()
        .map(|n| {
            (0..p)
                .map(|m| {
                    if with_derivative {
                        phase_kernel_with_derivative(mus[n], mus[m], omega, tau)
                    } else {
                        (phase_kernel(mus[n], mus[m], omega, tau), 0.0)
                    }
                })
                .collect()
        })
        .collect();
    let j = DMatrix::from_fn(p, p, |n, m| rows[n][m].0);
    let dj = with_derivative.then(|| DMatrix::from_fn(p, p, |n, m| rows[n][m].1));
    (j, dj)
}

/// Decoupling matrix (or its `order`-th frequency derivative), one row per mode.
pub fn decoupling_matrix(basis: &PulseBasis, modes: &ModeSet, order: usize) -> DMatrix<f64> {
    let tau = basis.duration;
    DMatrix::from_fn(modes.num_modes(), basis.num_tones, |l, p| {
        decoupling_entry(basis.harmonic(p), modes.frequencies[l], tau, order)
    })
}

/// Build `M`, `M^(k)`, `S_jk` and the per-mode sensitivity matrices.
pub fn build_coupling_matrices(
    basis: &PulseBasis,
    modes: &ModeSet,
    ions: (usize, usize),
    moment_order: usize,
) -> Result<CouplingMatrices, PhaseError> {
    let (j, k) = ions;
    if j >= modes.num_ions() || k >= modes.num_ions() || j == k {
        return Err(PhaseError::Index(format!("ion pair ({j}, {k})")));
    }
    let tau = basis.duration;
    let mus = basis.detunings();
    let p = basis.num_tones;
    let etas: Vec<(f64, f64)> = (0..modes.num_modes()).map(|l| (modes.eta(l, j), modes.eta(l, k))).collect();

    let mut s11 = DMatrix::zeros(p, p);
    let mut s12 = DMatrix::zeros(p, p);
    let mut s22 = DMatrix::zeros(p, p);
    let mut mode_sensitivity = Vec::with_capacity(modes.num_modes());
    for (l, &omega) in modes.frequencies.iter().enumerate() {
        let (jl, djl) = mode_kernels(&mus, omega, tau, true);
        let jl = symmetrize(&jl);
        let (ej, ek) = etas[l];
        s11.zip_apply(&jl, |x, y| *x += (ej * ej) * y);
        s12.zip_apply(&jl, |x, y| *x += (ej * ek) * y);
        s22.zip_apply(&jl, |x, y| *x += (ek * ek) * y);
        mode_sensitivity.push(symmetrize(&djl.expect("derivative requested")));
    }
    let decoupling = decoupling_matrix(basis, modes, 0);
    let moments = (1..=moment_order).map(|order| decoupling_matrix(basis, modes, order)).collect();
    Ok(CouplingMatrices { basis: *basis, ions, etas, decoupling, moments, s11, s12, s22, mode_sensitivity })
}

/// `S_jk` alone, for a mode set that may differ from the one the pulse was
/// designed for.
pub fn phase_matrix(basis: &PulseBasis, modes: &ModeSet, pair: (usize, usize)) -> DMatrix<f64> {
    let mus = basis.detunings();
    let mut s = DMatrix::zeros(basis.num_tones, basis.num_tones);
    for (l, &omega) in modes.frequencies.iter().enumerate() {
        let (jl, _) = mode_kernels(&mus, omega, basis.duration, false);
        s.zip_apply(&symmetrize(&jl), |x, y| *x += (modes.eta(l, pair.0) * modes.eta(l, pair.1)) * y);
    }
    s
}
