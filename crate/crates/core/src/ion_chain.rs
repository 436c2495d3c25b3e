//! Linear ion chain in a harmonic trap: equilibrium positions, normal modes
//! and Lamb-Dicke parameters.

use std::f64::consts::TAU;
use std::io::{self, Write};

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::linalg::{fix_sign, symmetric_eigen, EigenOrder};

/// Reduced Planck constant in J s.
pub const HBAR: f64 = 1.054_571_817e-34;

const NEWTON_MAX_ITER: usize = 200;
const NEWTON_TOL: f64 = 1e-12;

#[derive(Debug, Error)]
pub enum ChainError {
    #[error("invalid trap configuration: {0}")]
    InvalidConfig(String),
    #[error("equilibrium solver did not converge after {iterations} iterations (residual {residual:e})")]
    NoConvergence { iterations: usize, residual: f64 },
    #[error("zig-zag instability: radial Hessian eigenvalue {eigenvalue:e} is not positive")]
    Unstable { eigenvalue: f64 },
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Branch {
    Axial,
    Radial,
}

/// Trap and coupling parameters. Frequencies are ordinary (Hz).
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrapConfig {
    pub num_ions: usize,
    pub axial_com_freq: f64,
    pub radial_com_freq: f64,
    /// kg
    pub ion_mass: f64,
    /// Effective wavevector projected onto the mode direction, rad/m.
    pub eff_wavevector: f64,
    pub branch: Branch,
}

impl TrapConfig {
    pub fn validate(&self) -> Result<(), ChainError> {
        let bad = |msg: &str| Err(ChainError::InvalidConfig(msg.to_string()));
        if self.num_ions == 0 {
            return bad("num_ions must be at least 1");
        }
        if !(self.axial_com_freq > 0.0 && self.axial_com_freq.is_finite()) {
            return bad("axial_com_freq must be positive");
        }
        if !(self.radial_com_freq > 0.0 && self.radial_com_freq.is_finite()) {
            return bad("radial_com_freq must be positive");
        }
        if self.ion_mass.is_nan() || self.ion_mass <= 0.0 {
            return bad("ion_mass must be positive");
        }
        if self.eff_wavevector.is_nan() || self.eff_wavevector <= 0.0 {
            return bad("eff_wavevector must be positive");
        }
        Ok(())
    }

    /// Copy with the radial COM frequency shifted by `delta_hz`.
    pub fn with_radial_offset(&self, delta_hz: f64) -> Self {
        Self { radial_com_freq: self.radial_com_freq + delta_hz, ..self.clone() }
    }
}

/// Normal modes of one branch. Mode `l` is row `l` of `mode_matrix` and
/// `lamb_dicke`; modes are ordered by descending frequency.
#[derive(Clone, Debug, PartialEq)]
pub struct ModeSet {
    /// rad/s
    pub frequencies: Vec<f64>,
    pub mode_matrix: DMatrix<f64>,
    pub lamb_dicke: DMatrix<f64>,
}

impl ModeSet {
    /// Build a mode set from raw parts (e.g. a subset of a chain's modes).
    /// `lamb_dicke` is `modes x ions`.
    pub fn from_parts(frequencies: Vec<f64>, lamb_dicke: DMatrix<f64>) -> Self {
        let mode_matrix = lamb_dicke.clone();
        Self { frequencies, mode_matrix, lamb_dicke }
    }

    pub fn num_modes(&self) -> usize {
        self.frequencies.len()
    }

    pub fn num_ions(&self) -> usize {
        self.lamb_dicke.ncols()
    }

    pub fn eta(&self, mode: usize, ion: usize) -> f64 {
        self.lamb_dicke[(mode, ion)]
    }

    /// Keep only the listed modes, in the given order.
    pub fn select(&self, modes: &[usize]) -> Self {
        let pick = |m: &DMatrix<f64>| DMatrix::from_fn(modes.len(), m.ncols(), |r, c| m[(modes[r], c)]);
        Self {
            frequencies: modes.iter().map(|&l| self.frequencies[l]).collect(),
            mode_matrix: pick(&self.mode_matrix),
            lamb_dicke: pick(&self.lamb_dicke),
        }
    }

    /// Copy with mode `l` moved to `omega` while keeping every Lamb-Dicke entry.
    pub fn with_frequency(&self, mode: usize, omega: f64) -> Self {
        let mut out = self.clone();
        out.frequencies[mode] = omega;
        out
    }

    /// Rows `omega_l / 2 pi` (Hz) followed by the Lamb-Dicke entries of that mode.
    pub fn write_csv<W: Write>(&self, mut w: W) -> io::Result<()> {
        write!(w, "freq_hz")?;
        for j in 0..self.num_ions() {
            write!(w, ",eta_{j}")?;
        }
        writeln!(w)?;
        for (l, &omega) in self.frequencies.iter().enumerate() {
            write!(w, "{}", omega / TAU)?;
            for j in 0..self.num_ions() {
                write!(w, ",{}", self.lamb_dicke[(l, j)])?;
            }
            writeln!(w)?;
        }
        Ok(())
    }
}

/// Force residual of the dimensionless equilibrium equations.
fn force_residual(u: &DVector<f64>) -> DVector<f64> {
    let n = u.len();
    DVector::from_fn(n, |j, _| {
        let mut f = u[j];
        for k in 0..n {
            if k == j {
                continue;
            }
            let d = u[j] - u[k];
            f -= d.signum() / (d * d);
        }
        f
    })
}

/// `1/|u_j - u_k|^3` for `j != k`, zero on the diagonal.
fn inverse_cubes(u: &[f64]) -> DMatrix<f64> {
    let n = u.len();
    DMatrix::from_fn(n, n, |j, k| if j == k { 0.0 } else { (u[j] - u[k]).abs().powi(-3) })
}

/// Dimensionless equilibrium positions (units of the Coulomb length scale),
/// sorted ascending.
pub fn equilibrium_positions(num_ions: usize) -> Result<Vec<f64>, ChainError> {
    if num_ions == 0 {
        return Err(ChainError::InvalidConfig("num_ions must be at least 1".into()));
    }
    if num_ions == 1 {
        return Ok(vec![0.0]);
    }
    let n = num_ions;
    // Quasi-uniform guess with the empirical central spacing 2.018 / N^0.559.
    let spacing = 2.018 / (n as f64).powf(0.559);
    let mut u = DVector::from_fn(n, |j, _| spacing * (j as f64 - (n as f64 - 1.0) / 2.0));
    let mut res = force_residual(&u);
    let mut res_norm = res.amax();
    let mut iterations = 0;
    while res_norm > NEWTON_TOL {
        if iterations == NEWTON_MAX_ITER {
            return Err(ChainError::NoConvergence { iterations, residual: res_norm });
        }
        iterations += 1;
        let cubes = inverse_cubes(u.as_slice());
        let jac =
            DMatrix::from_fn(n, n, |j, k| if j == k { 1.0 + 2.0 * cubes.row(j).sum() } else { -2.0 * cubes[(j, k)] });
        let step = jac.lu().solve(&(-&res)).ok_or(ChainError::NoConvergence { iterations, residual: res_norm })?;
        // Damping: halve until the residual decreases and ordering is kept.
        let mut lambda = 1.0;
        loop {
            let trial = &u + &step * lambda;
            let ordered = trial.as_slice().windows(2).all(|w| w[0] < w[1]);
            if ordered {
                let tr = force_residual(&trial);
                let tn = tr.amax();
                if tn < res_norm || lambda < 1e-6 {
                    u = trial;
                    res = tr;
                    res_norm = tn;
                    break;
                }
            }
            lambda *= 0.5;
            if lambda < 1e-12 {
                return Err(ChainError::NoConvergence { iterations, residual: res_norm });
            }
        }
    }
    // Symmetrize to remove round-off asymmetry.
    let sym: Vec<f64> = (0..n).map(|j| 0.5 * (u[j] - u[n - 1 - j])).collect();
    Ok(sym)
}

/// Normal modes of the configured branch.
pub fn normal_modes(cfg: &TrapConfig) -> Result<ModeSet, ChainError> {
    cfg.validate()?;
    let n = cfg.num_ions;
    let u = equilibrium_positions(n)?;
    let cubes = inverse_cubes(&u);
    let ratio2 = (cfg.radial_com_freq / cfg.axial_com_freq).powi(2);
    let hessian = match cfg.branch {
        Branch::Axial => {
            DMatrix::from_fn(n, n, |j, k| if j == k { 1.0 + 2.0 * cubes.row(j).sum() } else { -2.0 * cubes[(j, k)] })
        }
        Branch::Radial => {
            DMatrix::from_fn(n, n, |j, k| if j == k { ratio2 - cubes.row(j).sum() } else { cubes[(j, k)] })
        }
    };
    let eig = symmetric_eigen(&hessian, EigenOrder::Descending);
    if let Some(&bad) = eig.values.iter().find(|&&v| v <= 0.0) {
        return Err(ChainError::Unstable { eigenvalue: bad });
    }
    let omega_z = TAU * cfg.axial_com_freq;
    // Modes as rows; stable tie-break by dominant component index.
    let mut modes: Vec<(f64, DVector<f64>)> = (0..n)
        .map(|l| {
            let mut v = eig.vectors.column(l).into_owned();
            fix_sign(v.column_mut(0));
            (omega_z * eig.values[l].sqrt(), v)
        })
        .collect();
    let dominant = |v: &DVector<f64>| v.iamax();
    modes.sort_by(|a, b| b.0.total_cmp(&a.0).then(dominant(&a.1).cmp(&dominant(&b.1))));

    let frequencies: Vec<f64> = modes.iter().map(|m| m.0).collect();
    let mode_matrix = DMatrix::from_fn(n, n, |l, j| modes[l].1[j]);
    let lamb_dicke = DMatrix::from_fn(n, n, |l, j| {
        mode_matrix[(l, j)] * cfg.eff_wavevector * (HBAR / (2.0 * cfg.ion_mass * frequencies[l])).sqrt()
    });
    Ok(ModeSet { frequencies, mode_matrix, lamb_dicke })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cfg(n: usize, branch: Branch) -> TrapConfig {
        TrapConfig {
            num_ions: n,
            axial_com_freq: 400e3,
            radial_com_freq: 3.7e6,
            ion_mass: 2.84e-25,
            eff_wavevector: 2.0e7,
            branch,
        }
    }

    #[test]
    fn two_and_three_ion_positions_are_analytic() {
        let u2 = equilibrium_positions(2).unwrap();
        let a = 0.25_f64.cbrt();
        assert!((u2[0] + a).abs() < 1e-12 && (u2[1] - a).abs() < 1e-12);
        let u3 = equilibrium_positions(3).unwrap();
        let b = 1.25_f64.cbrt();
        assert!(u3[1].abs() < 1e-12);
        assert!((u3[2] - b).abs() < 1e-12 && (u3[0] + b).abs() < 1e-12);
        assert_eq!(equilibrium_positions(1).unwrap(), vec![0.0]);
    }

    #[test]
    fn positions_balance_forces_up_to_forty_ions() {
        for n in [4, 10, 20, 40] {
            let u = equilibrium_positions(n).unwrap();
            let r = force_residual(&DVector::from_vec(u.clone()));
            assert!(r.amax() < 1e-12, "n={n} residual {}", r.amax());
            for j in 0..n {
                assert!((u[j] + u[n - 1 - j]).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn two_ion_axial_modes() {
        let m = normal_modes(&cfg(2, Branch::Axial)).unwrap();
        let nu: Vec<f64> = m.frequencies.iter().map(|w| w / TAU).collect();
        assert!((nu[0] / 400e3 - 3f64.sqrt()).abs() < 1e-10);
        assert!((nu[1] / 400e3 - 1.0).abs() < 1e-10);
    }

    #[test]
    fn single_ion_mode() {
        let c = cfg(1, Branch::Radial);
        let m = normal_modes(&c).unwrap();
        assert_eq!(m.mode_matrix[(0, 0)], 1.0);
        let eta = c.eff_wavevector * (HBAR / (2.0 * c.ion_mass * TAU * 3.7e6)).sqrt();
        assert!((m.lamb_dicke[(0, 0)] - eta).abs() < 1e-15);
    }

    #[test]
    fn ten_ion_radial_chain() {
        let m = normal_modes(&cfg(10, Branch::Radial)).unwrap();
        assert!((m.frequencies[0] / TAU / 3.7e6 - 1.0).abs() < 1e-10);
        assert!(m.frequencies.windows(2).all(|w| w[0] > w[1]));
        assert!(m.frequencies.iter().all(|&w| w / TAU < 3.7e6 + 1e-3 && w / TAU > 3.0e6));
        let com = m.mode_matrix.row(0);
        for j in 0..10 {
            assert!((com[j] - 1.0 / 10f64.sqrt()).abs() < 1e-10);
        }
    }

    #[test]
    fn radial_instability_is_reported() {
        let mut c = cfg(20, Branch::Radial);
        c.radial_com_freq = 1.0e6;
        assert!(matches!(normal_modes(&c), Err(ChainError::Unstable { .. })));
    }

    #[test]
    fn mode_matrix_is_orthonormal() {
        for n in 1..=20 {
            for branch in [Branch::Axial, Branch::Radial] {
                let m = normal_modes(&cfg(n, branch)).unwrap();
                let g = &m.mode_matrix * m.mode_matrix.transpose();
                assert!((g - DMatrix::identity(n, n)).amax() < 1e-10, "n={n}");
            }
        }
    }

    #[test]
    fn eta_scales_as_inverse_root_frequency() {
        let c = cfg(6, Branch::Radial);
        let mut c2 = c.clone();
        c2.axial_com_freq *= 2.0;
        c2.radial_com_freq *= 2.0;
        let (m1, m2) = (normal_modes(&c).unwrap(), normal_modes(&c2).unwrap());
        for l in 0..6 {
            for j in 0..6 {
                let (a, b) = (m1.lamb_dicke[(l, j)], m2.lamb_dicke[(l, j)]);
                if a.abs() > 1e-12 {
                    assert!((b / a - 0.5f64.sqrt()).abs() < 1e-10);
                }
            }
        }
    }

    #[test]
    fn csv_has_one_row_per_mode() {
        let m = normal_modes(&cfg(3, Branch::Radial)).unwrap();
        let mut buf = Vec::new();
        m.write_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let lines: Vec<_> = text.lines().collect();
        assert_eq!(lines.len(), 4);
        assert_eq!(lines[0], "freq_hz,eta_0,eta_1,eta_2");
        assert_eq!(lines[1].split(',').count(), 4);
    }
}
