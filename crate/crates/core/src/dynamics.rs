//! Fock-space time integration of the MS and LS Hamiltonians.
//!
//! Independent of the closed forms: the interaction-picture Schrödinger
//! equation is stepped with classical RK4 for every electronic basis state
//! with all included modes in their ground state, then projected back onto
//! the motional vacuum.

use std::f64::consts::TAU;

use nalgebra::DMatrix;
use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::ion_chain::ModeSet;
use crate::phases::{LSAmplitudeProfile, PhaseError, PulseShape, QuditUnitary};

#[derive(Debug, Error)]
pub enum DynamicsError {
    #[error("Fock cutoff must be at least 4, got {0}")]
    Cutoff(usize),
    #[error(
        "population {population:.3e} reached the top two Fock levels (threshold {threshold:.0e}); raise the cutoff"
    )]
    Truncation { population: f64, threshold: f64 },
    #[error("need at least one step per period")]
    Steps,
    #[error("ion pair ({0}, {1}) out of range")]
    Ions(usize, usize),
    #[error(transparent)]
    Phase(#[from] PhaseError),
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct OracleConfig {
    /// Highest Fock number kept per mode.
    pub fock_cutoff: usize,
    /// RK4 steps per period of the fastest `mu + omega` beat.
    pub steps_per_period: usize,
    /// Allowed population in the top two Fock levels.
    pub leakage_threshold: f64,
}

impl Default for OracleConfig {
    fn default() -> Self {
        Self { fock_cutoff: 8, steps_per_period: 16, leakage_threshold: 1e-6 }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct OracleResult {
    /// `<0_motion| U |0_motion>` on the two qudits.
    pub operator: QuditUnitary,
    /// Largest probability of leaving the motional vacuum.
    pub motional_leakage: f64,
    /// Largest population seen in the top two Fock levels of any mode.
    pub truncation_population: f64,
    /// `max |Psi^dagger Psi - I|` over the propagated columns.
    pub isometry_error: f64,
    pub steps: usize,
}

/// Largest entrywise `|a - b|`.
pub fn max_entry_deviation(a: &QuditUnitary, b: &QuditUnitary) -> f64 {
    a.matrix.iter().zip(b.matrix.iter()).map(|(x, y)| (x - y).norm()).fold(0.0, f64::max)
}

struct Ladder {
    /// `(upper, lower, sqrt(n_upper))` motional index pairs.
    pairs: Vec<(usize, usize, f64)>,
}

struct System<'a> {
    pulse: &'a PulseShape,
    omegas: Vec<f64>,
    /// Per mode, sparse electronic coupling `(out, in, value)`.
    couplings: Vec<Vec<(usize, usize, f64)>>,
    ladders: Vec<Ladder>,
    /// Per mode, motional indices with `n_l >= cutoff - 1`.
    top: Vec<Vec<usize>>,
    motional_dim: usize,
    electronic_dim: usize,
}

impl System<'_> {
    fn dim(&self) -> usize {
        self.motional_dim * self.electronic_dim
    }

    /// `out = -i H(t) psi`.
    fn derivative(&self, t: f64, psi: &[Complex64], out: &mut [Complex64]) {
        out.iter_mut().for_each(|z| *z = Complex64::new(0.0, 0.0));
        let g = self.pulse.value(t);
        let nm = self.motional_dim;
        for (l, &w) in self.omegas.iter().enumerate() {
            // a† carries g e^{iwt}, a carries its conjugate; -i folded in.
            let up = Complex64::from_polar(g, w * t) * Complex64::new(0.0, -1.0);
            let down = Complex64::from_polar(g, -w * t) * Complex64::new(0.0, -1.0);
            for &(eo, ei, s) in &self.couplings[l] {
                let (src, dst) = (ei * nm, eo * nm);
                for &(hi, lo, sq) in &self.ladders[l].pairs {
                    out[dst + lo] += down * (s * sq) * psi[src + hi];
                    out[dst + hi] += up * (s * sq) * psi[src + lo];
                }
            }
        }
    }

    fn top_population(&self, psi: &[Complex64]) -> f64 {
        let nm = self.motional_dim;
        self.top
            .iter()
            .map(|idx| {
                (0..self.electronic_dim)
                    .map(|e| idx.iter().map(|&m| psi[e * nm + m].norm_sqr()).sum::<f64>())
                    .sum::<f64>()
            })
            .fold(0.0, f64::max)
    }
}

fn build_system<'a>(
    pulse: &'a PulseShape,
    modes: &ModeSet,
    ions: (usize, usize),
    local: &DMatrix<f64>,
    cfg: &OracleConfig,
) -> Result<System<'a>, DynamicsError> {
    if cfg.fock_cutoff < 4 {
        return Err(DynamicsError::Cutoff(cfg.fock_cutoff));
    }
    if cfg.steps_per_period == 0 {
        return Err(DynamicsError::Steps);
    }
    let (j, k) = ions;
    if j == k || j >= modes.num_ions() || k >= modes.num_ions() {
        return Err(DynamicsError::Ions(j, k));
    }
    let d = local.nrows();
    let levels = cfg.fock_cutoff + 1;
    let nmodes = modes.num_modes();
    let motional_dim = levels.pow(nmodes as u32);
    let stride = |l: usize| levels.pow((nmodes - 1 - l) as u32);
    let occupation = |m: usize, l: usize| (m / stride(l)) % levels;

    let id = DMatrix::<f64>::identity(d, d);
    let on1 = local.kronecker(&id);
    let on2 = id.kronecker(local);
    let couplings = (0..nmodes)
        .map(|l| {
            let s = &on1 * modes.eta(l, j) + &on2 * modes.eta(l, k);
            let mut entries = Vec::new();
            for r in 0..d * d {
                for c in 0..d * d {
                    if s[(r, c)] != 0.0 {
                        entries.push((r, c, s[(r, c)]));
                    }
                }
            }
            entries
        })
        .collect();
    let ladders = (0..nmodes)
        .map(|l| Ladder {
            pairs: (0..motional_dim)
                .filter(|&m| occupation(m, l) > 0)
                .map(|m| (m, m - stride(l), (occupation(m, l) as f64).sqrt()))
                .collect(),
        })
        .collect();
    let top =
        (0..nmodes).map(|l| (0..motional_dim).filter(|&m| occupation(m, l) + 1 >= cfg.fock_cutoff).collect()).collect();
    Ok(System {
        pulse,
        omegas: modes.frequencies.clone(),
        couplings,
        ladders,
        top,
        motional_dim,
        electronic_dim: d * d,
    })
}

fn axpy(out: &mut [Complex64], base: &[Complex64], h: f64, k: &[Complex64]) {
    for ((o, b), k) in out.iter_mut().zip(base).zip(k) {
        *o = b + k * h;
    }
}

fn integrate(sys: &System<'_>, cfg: &OracleConfig) -> Result<OracleResult, DynamicsError> {
    let tau = sys.pulse.duration();
    let fastest = sys.pulse.basis.detunings().iter().map(|m| m.abs()).fold(0.0, f64::max)
        + sys.omegas.iter().copied().fold(0.0, f64::max);
    let steps = ((tau * fastest / TAU) * cfg.steps_per_period as f64).ceil().max(1.0) as usize;
    let h = tau / steps as f64;
    let n = sys.dim();
    let nm = sys.motional_dim;
    let ne = sys.electronic_dim;

    let columns: Vec<(Vec<Complex64>, f64)> = (0..ne)
        .into_par_iter()
        .map(|e| {
            let mut psi = vec![Complex64::new(0.0, 0.0); n];
            psi[e * nm] = Complex64::new(1.0, 0.0);
            let mut k1 = vec![Complex64::new(0.0, 0.0); n];
            let mut k2 = k1.clone();
            let mut k3 = k1.clone();
            let mut k4 = k1.clone();
            let mut tmp = k1.clone();
            let mut top = 0.0_f64;
            for step in 0..steps {
                let t = step as f64 * h;
                sys.derivative(t, &psi, &mut k1);
                axpy(&mut tmp, &psi, 0.5 * h, &k1);
                sys.derivative(t + 0.5 * h, &tmp, &mut k2);
                axpy(&mut tmp, &psi, 0.5 * h, &k2);
                sys.derivative(t + 0.5 * h, &tmp, &mut k3);
                axpy(&mut tmp, &psi, h, &k3);
                sys.derivative(t + h, &tmp, &mut k4);
                for i in 0..n {
                    psi[i] += (k1[i] + (k2[i] + k3[i]) * 2.0 + k4[i]) * (h / 6.0);
                }
                if step % 16 == 15 || step + 1 == steps {
                    top = top.max(sys.top_population(&psi));
                }
            }
            (psi, top)
        })
        .collect();

    let truncation_population = columns.iter().map(|c| c.1).fold(0.0, f64::max);
    if truncation_population > cfg.leakage_threshold {
        return Err(DynamicsError::Truncation { population: truncation_population, threshold: cfg.leakage_threshold });
    }
    let operator = DMatrix::from_fn(ne, ne, |r, c| columns[c].0[r * nm]);
    let motional_leakage =
        (0..ne).map(|c| 1.0 - operator.column(c).iter().map(|z| z.norm_sqr()).sum::<f64>()).fold(0.0, f64::max);
    let isometry_error = (0..ne)
        .flat_map(|a| (0..ne).map(move |b| (a, b)))
        .map(|(a, b)| {
            let dot: Complex64 = columns[a].0.iter().zip(&columns[b].0).map(|(x, y)| x.conj() * y).sum();
            let want = if a == b { 1.0 } else { 0.0 };
            (dot - want).norm()
        })
        .fold(0.0, f64::max);
    let d = (ne as f64).sqrt().round() as usize;
    Ok(OracleResult {
        operator: QuditUnitary { dim: d, matrix: operator },
        motional_leakage,
        truncation_population,
        isometry_error,
        steps,
    })
}

/// MS coupling `sigma_X` on levels 0 and 1 of each qudit.
pub fn integrate_ms(
    pulse: &PulseShape,
    modes: &ModeSet,
    ions: (usize, usize),
    d: usize,
    cfg: &OracleConfig,
) -> Result<OracleResult, DynamicsError> {
    if d < 2 {
        return Err(PhaseError::Dimension(d).into());
    }
    let mut x = DMatrix::zeros(d, d);
    x[(0, 1)] = 1.0;
    x[(1, 0)] = 1.0;
    integrate(&build_system(pulse, modes, ions, &x, cfg)?, cfg)
}

/// LS coupling `diag(theta)` on each qudit; AC-Stark phases are not included.
pub fn integrate_ls(
    pulse: &PulseShape,
    profile: &LSAmplitudeProfile,
    modes: &ModeSet,
    ions: (usize, usize),
    cfg: &OracleConfig,
) -> Result<OracleResult, DynamicsError> {
    profile.validate()?;
    let theta = DMatrix::from_diagonal(&nalgebra::DVector::from_column_slice(&profile.theta));
    integrate(&build_system(pulse, modes, ions, &theta, cfg)?, cfg)
}
