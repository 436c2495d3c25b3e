//! Closed-form Magnus quantities for MS and LS gates: phase-space
//! displacements, entangling / non-entangling phases, and the resulting
//! two-qudit evolution operators.

use std::f64::consts::TAU;

use nalgebra::DMatrix;
use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::integrals::{phase_kernel, sine_exp_integral};
use crate::ion_chain::ModeSet;

/// Default threshold on `max_{s>=1} |theta_s|` for flagging a zero-order LS gate.
pub const ZERO_ORDER_TOL: f64 = 1e-3;

#[derive(Debug, Error, PartialEq)]
pub enum PhaseError {
    #[error("invalid pulse basis: {0}")]
    InvalidBasis(String),
    #[error("qudit dimension must be at least 2, got {0}")]
    Dimension(usize),
    #[error("invalid LS amplitude profile: {0}")]
    InvalidProfile(String),
    #[error("index out of range: {0}")]
    Index(String),
}

/// Uniform tone grid `mu_p = 2 pi (n_min + p) / tau`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct PulseBasis {
    /// seconds
    pub duration: f64,
    pub num_tones: usize,
    pub n_min: i64,
}

impl PulseBasis {
    pub fn new(duration: f64, num_tones: usize, n_min: i64) -> Result<Self, PhaseError> {
        if !(duration > 0.0 && duration.is_finite()) {
            return Err(PhaseError::InvalidBasis("duration must be positive".into()));
        }
        if num_tones == 0 {
            return Err(PhaseError::InvalidBasis("at least one tone is required".into()));
        }
        if n_min < 1 {
            return Err(PhaseError::InvalidBasis("n_min must be positive".into()));
        }
        Ok(Self { duration, num_tones, n_min })
    }

    /// Window centered on the mode band. Warns (via [`Self::covers`]) if the
    /// band plus a 20% margin on each side does not fit.
    pub fn centered(duration: f64, num_tones: usize, modes: &ModeSet) -> Result<Self, PhaseError> {
        let lo = modes.frequencies.iter().copied().fold(f64::INFINITY, f64::min);
        let hi = modes.frequencies.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let center = 0.5 * (lo + hi) * duration / TAU;
        let n_min = (center - 0.5 * (num_tones as f64 - 1.0)).round() as i64;
        Self::new(duration, num_tones, n_min.max(1))
    }

    pub fn harmonic(&self, p: usize) -> i64 {
        self.n_min + p as i64
    }

    /// rad/s
    pub fn detuning(&self, p: usize) -> f64 {
        TAU * self.harmonic(p) as f64 / self.duration
    }

    pub fn detunings(&self) -> Vec<f64> {
        (0..self.num_tones).map(|p| self.detuning(p)).collect()
    }

    /// True when every mode lies strictly inside the window with at least
    /// `margin` (fraction of the band width, or of one tone spacing for a
    /// single mode) to spare on each side.
    pub fn covers(&self, modes: &ModeSet, margin: f64) -> bool {
        let lo = modes.frequencies.iter().copied().fold(f64::INFINITY, f64::min);
        let hi = modes.frequencies.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let width = (hi - lo).max(TAU / self.duration);
        let first = self.detuning(0);
        let last = self.detuning(self.num_tones - 1);
        first < lo - margin * width && last > hi + margin * width
    }
}

/// `g(t) = sum_p Omega_p sin(mu_p t)`.
#[derive(Clone, Debug, PartialEq)]
pub struct PulseShape {
    pub basis: PulseBasis,
    /// rad/s
    pub amplitudes: Vec<f64>,
}

impl PulseShape {
    pub fn new(basis: PulseBasis, amplitudes: Vec<f64>) -> Result<Self, PhaseError> {
        if amplitudes.len() != basis.num_tones {
            return Err(PhaseError::InvalidBasis(format!(
                "expected {} amplitudes, got {}",
                basis.num_tones,
                amplitudes.len()
            )));
        }
        Ok(Self { basis, amplitudes })
    }

    pub fn zero(basis: PulseBasis) -> Self {
        Self { basis, amplitudes: vec![0.0; basis.num_tones] }
    }

    pub fn duration(&self) -> f64 {
        self.basis.duration
    }

    pub fn value(&self, t: f64) -> f64 {
        self.amplitudes.iter().enumerate().map(|(p, a)| a * (self.basis.detuning(p) * t).sin()).sum()
    }

    pub fn power_norm(&self) -> f64 {
        self.amplitudes.iter().map(|a| a * a).sum::<f64>().sqrt()
    }
}

/// Displacement `alpha_{l,j} = -i eta_{l,j} ∫ g(t) e^{i omega_l t} dt`.
pub fn displacement_alpha(
    pulse: &PulseShape,
    modes: &ModeSet,
    mode: usize,
    ion: usize,
) -> Result<Complex64, PhaseError> {
    if mode >= modes.num_modes() || ion >= modes.num_ions() {
        return Err(PhaseError::Index(format!("mode {mode}, ion {ion}")));
    }
    Ok(Complex64::new(0.0, -modes.eta(mode, ion)) * pulse_mode_overlap(pulse, modes.frequencies[mode]))
}

/// `∫_0^tau g(t) e^{i omega t} dt`.
pub fn pulse_mode_overlap(pulse: &PulseShape, omega: f64) -> Complex64 {
    let tau = pulse.duration();
    pulse
        .amplitudes
        .iter()
        .enumerate()
        .filter(|(_, a)| **a != 0.0)
        .map(|(p, a)| sine_exp_integral(pulse.basis.detuning(p), omega, tau) * *a)
        .sum()
}

/// Largest `|alpha_{l,j}|` over all modes and the listed ions.
pub fn max_displacement(pulse: &PulseShape, modes: &ModeSet, ions: &[usize]) -> f64 {
    (0..modes.num_modes())
        .map(|l| {
            let overlap = pulse_mode_overlap(pulse, modes.frequencies[l]).norm();
            ions.iter().map(|&j| modes.eta(l, j).abs() * overlap).fold(0.0, f64::max)
        })
        .fold(0.0, f64::max)
}

/// Per-mode two-time integral
/// `Theta_l = ∫∫_{t2<t1} g(t1) g(t2) sin(omega_l (t1 - t2))`.
pub fn mode_theta(pulse: &PulseShape, omega: f64) -> f64 {
    let tau = pulse.duration();
    let mus = pulse.basis.detunings();
    let amps = &pulse.amplitudes;
    let active: Vec<usize> = (0..amps.len()).filter(|&p| amps[p] != 0.0).collect();
    // Collected before summing so the result does not depend on the thread count.
    let rows: Vec<f64> = active
        .par_iter()
        .map(|&n| active.iter().map(|&m| amps[n] * amps[m] * phase_kernel(mus[n], mus[m], omega, tau)).sum::<f64>())
        .collect();
    rows.iter().sum()
}

/// MS phases for a symmetric (uniformly calibrated) ion pair.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct MSPhaseSet {
    pub chi_11: f64,
    pub chi_12: f64,
    pub chi_22: f64,
}

impl MSPhaseSet {
    pub fn from_thetas(thetas: &[f64], modes: &ModeSet, ions: (usize, usize)) -> Self {
        let (j, k) = ions;
        let mut out = MSPhaseSet { chi_11: 0.0, chi_12: 0.0, chi_22: 0.0 };
        for (l, th) in thetas.iter().enumerate() {
            let (ej, ek) = (modes.eta(l, j), modes.eta(l, k));
            out.chi_11 += ej * ej * th;
            out.chi_12 += ej * ek * th;
            out.chi_22 += ek * ek * th;
        }
        out
    }
}

/// `chi_jk = sum_l eta_{l,j} eta_{l,k} Theta_l` for the pair `ions`.
pub fn ms_phases(pulse: &PulseShape, modes: &ModeSet, ions: (usize, usize)) -> Result<MSPhaseSet, PhaseError> {
    let (j, k) = ions;
    if j >= modes.num_ions() || k >= modes.num_ions() || j == k {
        return Err(PhaseError::Index(format!("ion pair ({j}, {k})")));
    }
    let thetas: Vec<f64> = modes.frequencies.iter().map(|&w| mode_theta(pulse, w)).collect();
    Ok(MSPhaseSet::from_thetas(&thetas, modes, ions))
}

/// Relative LS amplitudes and AC-Stark phases of a qudit.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LSAmplitudeProfile {
    pub theta: Vec<f64>,
    pub ac_phases: Vec<f64>,
}

impl LSAmplitudeProfile {
    pub fn new(theta: Vec<f64>, ac_phases: Vec<f64>) -> Result<Self, PhaseError> {
        let p = Self { theta, ac_phases };
        p.validate()?;
        Ok(p)
    }

    pub fn without_stark(theta: Vec<f64>) -> Result<Self, PhaseError> {
        let d = theta.len();
        Self::new(theta, vec![0.0; d])
    }

    /// Zero-order profile `(1, 0, ..., 0)`.
    pub fn zero_order(d: usize) -> Self {
        let mut theta = vec![0.0; d];
        theta[0] = 1.0;
        Self { theta, ac_phases: vec![0.0; d] }
    }

    pub fn dim(&self) -> usize {
        self.theta.len()
    }

    pub fn validate(&self) -> Result<(), PhaseError> {
        let d = self.theta.len();
        if d < 2 {
            return Err(PhaseError::Dimension(d));
        }
        if self.ac_phases.len() != d {
            return Err(PhaseError::InvalidProfile("ac_phases length differs from theta".into()));
        }
        if (self.theta[0].abs() - 1.0).abs() > 1e-12 {
            return Err(PhaseError::InvalidProfile("|theta_0| must equal 1".into()));
        }
        if self.theta.windows(2).any(|w| w[1].abs() > w[0].abs()) {
            return Err(PhaseError::InvalidProfile("theta magnitudes must be non-increasing".into()));
        }
        Ok(())
    }
}

/// LS phases: entangling `phi[s][s']` and per-ion non-entangling `Phi_j(s)`.
/// The general (non rank-1) form is allowed so tables can be summed.
#[derive(Clone, Debug, PartialEq)]
pub struct LSPhaseTable {
    pub dim: usize,
    pub entangling: DMatrix<f64>,
    pub nonentangling: [Vec<f64>; 2],
    pub zero_order: bool,
}

impl LSPhaseTable {
    pub fn from_raw(entangling: DMatrix<f64>, nonentangling: [Vec<f64>; 2]) -> Self {
        let dim = entangling.nrows();
        Self { dim, entangling, nonentangling, zero_order: false }
    }

    /// Entrywise sum (phases add).
    pub fn add(&self, other: &Self) -> Self {
        let add = |a: &[f64], b: &[f64]| a.iter().zip(b).map(|(x, y)| x + y).collect::<Vec<_>>();
        Self {
            dim: self.dim,
            entangling: &self.entangling + &other.entangling,
            nonentangling: [
                add(&self.nonentangling[0], &other.nonentangling[0]),
                add(&self.nonentangling[1], &other.nonentangling[1]),
            ],
            zero_order: false,
        }
    }
}

/// Build the LS phase table from the `|00>` phases and the amplitude profile.
pub fn ls_phase_table(
    chi_12: f64,
    chi_11: f64,
    chi_22: f64,
    profile: &LSAmplitudeProfile,
    zero_order_tol: f64,
) -> Result<LSPhaseTable, PhaseError> {
    profile.validate()?;
    let d = profile.dim();
    let th = &profile.theta;
    let entangling = DMatrix::from_fn(d, d, |s, t| 2.0 * chi_12 * (th[s] * th[t]));
    let per_ion = |chi: f64| (0..d).map(|s| chi * th[s] * th[s] + profile.ac_phases[s]).collect();
    let zero_order = th[1..].iter().all(|t| t.abs() < zero_order_tol);
    Ok(LSPhaseTable { dim: d, entangling, nonentangling: [per_ion(chi_11), per_ion(chi_22)], zero_order })
}

/// Dense operator on two qudits, basis index `s * d + s'`.
#[derive(Clone, Debug, PartialEq)]
pub struct QuditUnitary {
    pub dim: usize,
    pub matrix: DMatrix<Complex64>,
}

impl QuditUnitary {
    pub fn element(&self, row: (usize, usize), col: (usize, usize)) -> Complex64 {
        self.matrix[(row.0 * self.dim + row.1, col.0 * self.dim + col.1)]
    }

    /// `max |U^dagger U - I|`.
    pub fn unitarity_error(&self) -> f64 {
        let n = self.matrix.nrows();
        let g = self.matrix.adjoint() * &self.matrix;
        (g - DMatrix::<Complex64>::identity(n, n)).iter().map(|z| z.norm()).fold(0.0, f64::max)
    }
}

/// `exp(i H)` for Hermitian `h`.
pub(crate) fn expi_hermitian(h: &DMatrix<Complex64>) -> DMatrix<Complex64> {
    let eig = h.clone().symmetric_eigen();
    let phases = eig.eigenvalues.map(|l| Complex64::from_polar(1.0, l));
    let v = &eig.eigenvectors;
    v * DMatrix::from_diagonal(&phases) * v.adjoint()
}

/// `U = exp(2i chi_12 X⊗X + i (Phi_1 ⊗ 1 + 1 ⊗ Phi_2))` with `X` acting on
/// levels 0,1 and `Phi_j = chi_jj P_{01} + sum_s phi_AC_s |s><s|`.
pub fn ms_evolution(phases: &MSPhaseSet, ac_phases: &[f64], d: usize) -> Result<QuditUnitary, PhaseError> {
    if d < 2 {
        return Err(PhaseError::Dimension(d));
    }
    if ac_phases.len() != d {
        return Err(PhaseError::InvalidProfile(format!("expected {d} AC phases, got {}", ac_phases.len())));
    }
    let mut x = DMatrix::<f64>::zeros(d, d);
    x[(0, 1)] = 1.0;
    x[(1, 0)] = 1.0;
    let local = |chi: f64| {
        DMatrix::from_fn(d, d, |a, b| if a != b { 0.0 } else { ac_phases[a] + if a < 2 { chi } else { 0.0 } })
    };
    let id = DMatrix::<f64>::identity(d, d);
    let gen = x.kronecker(&x) * (2.0 * phases.chi_12)
        + local(phases.chi_11).kronecker(&id)
        + id.kronecker(&local(phases.chi_22));
    let h = gen.map(|v| Complex64::new(v, 0.0));
    Ok(QuditUnitary { dim: d, matrix: expi_hermitian(&h) })
}

/// Diagonal LS unitary `<ss'|U|ss'> = exp(i (phi_{ss'} + Phi_1(s) + Phi_2(s')))`.
pub fn ls_evolution(table: &LSPhaseTable) -> QuditUnitary {
    let d = table.dim;
    let diag = nalgebra::DVector::from_fn(d * d, |i, _| {
        let (s, t) = (i / d, i % d);
        let ph = table.entangling[(s, t)] + table.nonentangling[0][s] + table.nonentangling[1][t];
        Complex64::from_polar(1.0, ph)
    });
    QuditUnitary { dim: d, matrix: DMatrix::from_diagonal(&diag) }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::{FRAC_1_SQRT_2, PI};

    fn basis() -> PulseBasis {
        PulseBasis::new(1e-4, 8, 30).unwrap()
    }

    #[test]
    fn pulse_is_antisymmetric_about_midpoint() {
        let p = PulseShape::new(basis(), vec![1.0, -0.3, 0.2, 0.9, 0.0, 0.5, -1.1, 0.4]).unwrap();
        let tau = p.duration();
        for k in 0..50 {
            let t = tau * k as f64 / 49.0;
            assert!((p.value(tau - t) + p.value(t)).abs() < 1e-10);
        }
    }

    #[test]
    fn zero_pulse_has_no_displacement_or_phase() {
        let modes = ModeSet::from_parts(vec![TAU * 3.0e5], DMatrix::from_row_slice(1, 2, &[0.1, 0.1]));
        let p = PulseShape::zero(basis());
        assert_eq!(displacement_alpha(&p, &modes, 0, 1).unwrap(), Complex64::new(0.0, 0.0));
        let ph = ms_phases(&p, &modes, (0, 1)).unwrap();
        assert_eq!((ph.chi_11, ph.chi_12, ph.chi_22), (0.0, 0.0, 0.0));
    }

    #[test]
    fn resonant_tone_displacement_magnitude() {
        let b = basis();
        let omega = b.detuning(3);
        let modes = ModeSet::from_parts(vec![omega], DMatrix::from_row_slice(1, 1, &[0.07]));
        let mut amps = vec![0.0; 8];
        amps[3] = 2.0e5;
        let p = PulseShape::new(b, amps).unwrap();
        let a = displacement_alpha(&p, &modes, 0, 0).unwrap();
        let want = 0.07 * 2.0e5 * b.duration / 2.0;
        assert!((a.norm() - want).abs() < 1e-9 * want);
    }

    #[test]
    fn qubit_ms_gate_is_maximally_entangling() {
        let ph = MSPhaseSet { chi_11: 0.0, chi_12: PI / 8.0, chi_22: 0.0 };
        let u = ms_evolution(&ph, &[0.0, 0.0], 2).unwrap();
        assert!((u.element((0, 0), (0, 0)).norm() - FRAC_1_SQRT_2).abs() < 1e-12);
        assert!((u.element((1, 1), (0, 0)).norm() - FRAC_1_SQRT_2).abs() < 1e-12);
        assert!(u.unitarity_error() < 1e-12);
    }

    #[test]
    fn ms_identity_and_dimension_check() {
        let ph = MSPhaseSet { chi_11: 0.0, chi_12: 0.0, chi_22: 0.0 };
        let u = ms_evolution(&ph, &[0.0; 3], 3).unwrap();
        assert!((u.matrix - DMatrix::identity(9, 9)).iter().all(|z| z.norm() < 1e-14));
        assert_eq!(ms_evolution(&ph, &[0.0], 1).unwrap_err(), PhaseError::Dimension(1));
    }

    #[test]
    fn ls_table_values() {
        let prof = LSAmplitudeProfile::without_stark(vec![1.0, 0.7, -0.4, 0.1]).unwrap();
        let t = ls_phase_table(PI / 8.0, 0.0, 0.0, &prof, ZERO_ORDER_TOL).unwrap();
        assert!((t.entangling[(1, 2)] + 0.07 * PI).abs() < 1e-14);
        assert_eq!(t.entangling[(1, 2)], t.entangling[(2, 1)]);
        assert!(!t.zero_order);
        let z = ls_phase_table(0.3, 0.1, 0.2, &LSAmplitudeProfile::zero_order(4), ZERO_ORDER_TOL).unwrap();
        assert!(z.zero_order);
        let nonzero = z.entangling.iter().filter(|v| **v != 0.0).count();
        assert_eq!(nonzero, 1);
    }

    #[test]
    fn ls_profile_rejects_unsorted_theta() {
        let err = LSAmplitudeProfile::without_stark(vec![1.0, 0.2, 0.5]).unwrap_err();
        assert!(matches!(err, PhaseError::InvalidProfile(_)));
    }

    #[test]
    fn constant_theta_gives_global_phase() {
        let prof = LSAmplitudeProfile::without_stark(vec![1.0; 3]).unwrap();
        let t = ls_phase_table(0.4, 0.0, 0.0, &prof, ZERO_ORDER_TOL).unwrap();
        let first = t.entangling[(0, 0)];
        assert!(t.entangling.iter().all(|v| *v == first));
    }

    #[test]
    fn zero_order_controlled_phase() {
        let t = ls_phase_table(PI / 2.0, 0.0, 0.0, &LSAmplitudeProfile::zero_order(3), ZERO_ORDER_TOL).unwrap();
        let u = ls_evolution(&t);
        assert!((u.element((0, 0), (0, 0)) + 1.0).norm() < 1e-12);
        for i in 1..9 {
            assert!((u.matrix[(i, i)] - 1.0).norm() < 1e-12);
        }
    }
}
