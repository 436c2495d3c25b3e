use nalgebra::{DMatrix, DVector};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::analysis::max_rabi;
use super::matrices::{build_coupling_matrices, CouplingMatrices, PhaseIndex};
use super::projection::projection_basis;
use super::{PulseError, StabilizationConfig};
use crate::ion_chain::ModeSet;
use crate::linalg::{null_space, symmetric_eigen, EigenOrder};
use crate::phases::{max_displacement, MSPhaseSet, PulseBasis, PulseShape};

const DUAL_GAP_TOL: f64 = 1e-6;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct OptimizerOptions {
    /// Random SQP starts on top of the dual-eigenvector start.
    pub starts: usize,
    pub seed: u64,
    pub max_iterations: usize,
    /// Relative tolerance on the three phase constraints.
    pub phase_tol: f64,
    /// Tolerance on the normalized linear constraints.
    pub linear_tol: f64,
    /// Time samples per tone used for `Omega_max`.
    pub rabi_oversampling: usize,
}

impl Default for OptimizerOptions {
    fn default() -> Self {
        Self { starts: 16, seed: 0, max_iterations: 200, phase_tol: 1e-9, linear_tol: 1e-8, rabi_oversampling: 16 }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Residuals {
    /// `max(|chi_12 - chi|, |chi_11|, |chi_22|) / |chi|`
    pub phase: f64,
    /// `max |c . Omega| / |Omega|` over the unit-normalized linear constraints.
    pub linear: f64,
}

#[derive(Clone, Debug)]
pub struct OptimizationResult {
    pub pulse: PulseShape,
    pub target_chi: f64,
    pub phases: MSPhaseSet,
    /// Largest `|alpha_{l,j}|` over all modes and both target ions.
    pub max_alpha: f64,
    /// `||Omega||_2`, rad/s
    pub power_norm: f64,
    /// rad/s
    pub max_rabi: f64,
    pub converged: bool,
    pub iterations: usize,
    pub residuals: Residuals,
    pub projected_columns: usize,
    /// Dimension of the space left after the linear constraints.
    pub free_dimension: usize,
}

/// Minimize `||Omega||^2` subject to `chi_12 = target_chi`, `chi_11 = chi_22 = 0`,
/// decoupling and the stabilization constraints.
pub fn optimize_pulse(
    basis: &PulseBasis,
    modes: &ModeSet,
    ions: (usize, usize),
    target_chi: f64,
    cfg: &StabilizationConfig,
    opts: &OptimizerOptions,
) -> Result<OptimizationResult, PulseError> {
    cfg.check_feasible(basis.num_tones, modes.num_modes())?;
    let cm = build_coupling_matrices(basis, modes, ions, cfg.moment_order)?;
    optimize_with_matrices(&cm, modes, target_chi, cfg, opts)
}

/// As [`optimize_pulse`], reusing prebuilt matrices (which must include at
/// least `cfg.moment_order` moment blocks).
pub fn optimize_with_matrices(
    cm: &CouplingMatrices,
    modes: &ModeSet,
    target_chi: f64,
    cfg: &StabilizationConfig,
    opts: &OptimizerOptions,
) -> Result<OptimizationResult, PulseError> {
    let r = projection_basis(cm, cfg)?;
    let constraints = linear_constraints(&cm.decoupling, &r);
    let z = null_space(&constraints, 1e-12);
    let free = z.ncols();

    if target_chi == 0.0 {
        let pulse = PulseShape::zero(cm.basis);
        return Ok(evaluate(cm, modes, &constraints, pulse, target_chi, true, 0, r.ncols(), free, opts));
    }
    if free == 0 {
        return Err(PulseError::EmptyNullSpace);
    }

    let sign = target_chi.signum();
    let scale = target_chi.abs();
    let reduce = |s: &DMatrix<f64>| {
        let m = z.transpose() * s * &z;
        (&m + m.transpose()) * 0.5
    };
    let a = reduce(&cm.s12) * (sign / scale);
    let sigma = a.norm();
    if sigma == 0.0 {
        return Err(PulseError::NoSolution);
    }
    let a = a / sigma;
    let mut bs = vec![reduce(&cm.s11) / (scale * sigma)];
    let b2 = reduce(&cm.s22) / (scale * sigma);
    if (&b2 - &bs[0]).norm() > 1e-10 * b2.norm().max(bs[0].norm()) {
        bs.push(b2);
    }
    bs.retain(|b| b.amax() > 0.0);
    let qp = Qcqp { a, bs };

    let mut candidates: Vec<Candidate> = Vec::new();
    if let Some(start) = qp.dual_start() {
        candidates.push(qp.sqp(start, opts.max_iterations, 1e-13));
    }
    let random: Vec<Candidate> = (0..opts.starts)
        .into_par_iter()
        .filter_map(|i| {
            let mut rng =
                ChaCha8Rng::seed_from_u64(opts.seed.wrapping_mul(0x9E37_79B9_7F4A_7C15).wrapping_add(i as u64));
            let start = qp.random_start(&mut rng)?;
            Some(qp.sqp(start, opts.max_iterations, 1e-13))
        })
        .collect();
    candidates.extend(random);
    let iterations: usize = candidates.iter().map(|c| c.iterations).sum();

    let feas_tol = 0.1 * opts.phase_tol;
    let best = candidates
        .iter()
        .filter(|c| c.violation <= feas_tol)
        .min_by(|x, y| x.z.norm_squared().total_cmp(&y.z.norm_squared()))
        .or_else(|| candidates.iter().min_by(|x, y| x.violation.total_cmp(&y.violation)))
        .ok_or(PulseError::NoSolution)?;
    let polished = qp.sqp(best.clone(), 20, 1e-15);
    let best = if polished.violation <= best.violation.max(feas_tol)
        && polished.z.norm_squared() <= best.z.norm_squared() * (1.0 + 1e-12)
    {
        polished
    } else {
        best.clone()
    };

    let omega = &z * &best.z / sigma.sqrt();
    let pulse = PulseShape::new(cm.basis, omega.iter().copied().collect())?;
    let result = evaluate(cm, modes, &constraints, pulse, target_chi, false, iterations, r.ncols(), free, opts);
    if result.converged {
        Ok(result)
    } else {
        Err(PulseError::NoConvergence(Box::new(result)))
    }
}

/// Rows: unit-normalized decoupling rows, then the columns of `r`.
fn linear_constraints(decoupling: &DMatrix<f64>, r: &DMatrix<f64>) -> DMatrix<f64> {
    let p = decoupling.ncols();
    let mut c = DMatrix::zeros(decoupling.nrows() + r.ncols(), p);
    for (i, row) in decoupling.row_iter().enumerate() {
        let n = row.norm();
        c.set_row(i, &if n > 0.0 { row / n } else { row.into_owned() });
    }
    for (i, col) in r.column_iter().enumerate() {
        let n = col.norm();
        c.set_row(decoupling.nrows() + i, &if n > 0.0 { col.transpose() / n } else { col.transpose() });
    }
    c
}

#[allow(clippy::too_many_arguments)]
fn evaluate(
    cm: &CouplingMatrices,
    modes: &ModeSet,
    constraints: &DMatrix<f64>,
    pulse: PulseShape,
    target_chi: f64,
    trivially_converged: bool,
    iterations: usize,
    projected_columns: usize,
    free_dimension: usize,
    opts: &OptimizerOptions,
) -> OptimizationResult {
    let amps = &pulse.amplitudes;
    let phases = MSPhaseSet {
        chi_11: cm.quadratic(PhaseIndex::Chi11, amps),
        chi_12: cm.quadratic(PhaseIndex::Chi12, amps),
        chi_22: cm.quadratic(PhaseIndex::Chi22, amps),
    };
    let power_norm = pulse.power_norm();
    let omega = DVector::from_column_slice(amps);
    let linear = if power_norm > 0.0 { (constraints * &omega).amax() / power_norm } else { 0.0 };
    let phase = if target_chi == 0.0 {
        phases.chi_11.abs().max(phases.chi_12.abs()).max(phases.chi_22.abs())
    } else {
        (phases.chi_12 - target_chi).abs().max(phases.chi_11.abs()).max(phases.chi_22.abs()) / target_chi.abs()
    };
    let residuals = Residuals { phase, linear };
    let converged = trivially_converged || (phase < opts.phase_tol && linear < opts.linear_tol);
    let max_alpha = max_displacement(&pulse, modes, &[cm.ions.0, cm.ions.1]);
    let max_rabi = max_rabi(&pulse, opts.rabi_oversampling.max(10) * pulse.basis.num_tones);
    OptimizationResult {
        pulse,
        target_chi,
        phases,
        max_alpha,
        power_norm,
        max_rabi,
        converged,
        iterations,
        residuals,
        projected_columns,
        free_dimension,
    }
}

/// `min z^T z` s.t. `z^T a z = 1`, `z^T b_i z = 0`.
struct Qcqp {
    a: DMatrix<f64>,
    bs: Vec<DMatrix<f64>>,
}

#[derive(Clone, Debug)]
struct Candidate {
    z: DVector<f64>,
    /// Multipliers for `a`, then each `b_i`.
    lambda: DVector<f64>,
    violation: f64,
    iterations: usize,
}

impl Qcqp {
    fn num_constraints(&self) -> usize {
        1 + self.bs.len()
    }

    fn mat(&self, i: usize) -> &DMatrix<f64> {
        if i == 0 {
            &self.a
        } else {
            &self.bs[i - 1]
        }
    }

    fn values(&self, z: &DVector<f64>) -> DVector<f64> {
        DVector::from_fn(self.num_constraints(), |i, _| (self.mat(i) * z).dot(z) - if i == 0 { 1.0 } else { 0.0 })
    }

    /// Rows `2 (C_i z)^T`.
    fn jacobian(&self, z: &DVector<f64>) -> DMatrix<f64> {
        let mut j = DMatrix::zeros(self.num_constraints(), z.len());
        for i in 0..self.num_constraints() {
            j.set_row(i, &(self.mat(i) * z * 2.0).transpose());
        }
        j
    }

    fn candidate(&self, z: DVector<f64>, lambda: DVector<f64>, iterations: usize) -> Candidate {
        let violation = self.values(&z).amax();
        Candidate { z, lambda, violation, iterations }
    }

    /// Least-squares multipliers for `2 z = J^T lambda`.
    fn multipliers(&self, z: &DVector<f64>) -> DVector<f64> {
        let j = self.jacobian(z);
        let jjt = &j * j.transpose();
        let rhs = &j * z * 2.0;
        jjt.clone()
            .cholesky()
            .map(|c| c.solve(&rhs))
            .unwrap_or_else(|| crate::linalg::min_norm_solve(&jjt, &rhs, 1e-14).0)
    }

    /// Top eigenvector of `a + sum mu_i b_i` at the minimizer of its largest
    /// eigenvalue over `mu`.
    fn dual_start(&self) -> Option<Candidate> {
        let nb = self.bs.len();
        let combo = |mu: &DVector<f64>| {
            let mut h = self.a.clone();
            for (b, m) in self.bs.iter().zip(mu.iter()) {
                h.zip_apply(b, |x, y| *x += (*m) * y);
            }
            h
        };
        let lmax = |mu: &DVector<f64>| combo(mu).symmetric_eigenvalues().max();
        let gtol = 1e-10 * self.bs.iter().map(|b| b.norm()).fold(0.0, f64::max);
        let mut mu = DVector::zeros(nb);
        let mut iterations = 0;
        for _ in 0..100 {
            iterations += 1;
            let eig = symmetric_eigen(&combo(&mu), EigenOrder::Descending);
            let f = eig.values[0];
            if f <= 0.0 {
                return None;
            }
            let v = eig.vectors.column(0).into_owned();
            let bv: Vec<DVector<f64>> = self.bs.iter().map(|b| b * &v).collect();
            let g = DVector::from_fn(nb, |i, _| bv[i].dot(&v));
            // A collapsing gap means the optimum sits on a multiple top
            // eigenvalue; SQP resolves the mixing from here.
            let gap = eig.values.get(1).map_or(f64::INFINITY, |l| f - l);
            if g.amax() <= gtol || gap <= DUAL_GAP_TOL * f {
                break;
            }
            let w: Vec<DVector<f64>> = bv.iter().map(|x| eig.vectors.transpose() * x).collect();
            let mut hess = DMatrix::<f64>::zeros(nb, nb);
            for (j, &lambda) in eig.values.iter().enumerate().skip(1) {
                let gap = f - lambda;
                if gap <= 1e-14 * f.abs() {
                    continue;
                }
                for a in 0..nb {
                    for b in 0..nb {
                        hess[(a, b)] += 2.0 * w[a][j] * w[b][j] / gap;
                    }
                }
            }
            let ridge = 1e-12 * hess.amax().max(1e-300);
            let step =
                (hess + DMatrix::identity(nb, nb) * ridge).cholesky().map(|c| -c.solve(&g)).unwrap_or_else(|| -&g);
            let slope = g.dot(&step);
            let mut t = 1.0;
            let mut accepted = false;
            while t > 1e-6 {
                let trial = &mu + &step * t;
                if lmax(&trial) <= f + 1e-4 * t * slope {
                    mu = trial;
                    accepted = true;
                    break;
                }
                t *= 0.5;
            }
            if !accepted || t * step.amax() <= 1e-14 * (1.0 + mu.amax()) {
                break;
            }
        }
        let h = combo(&mu);
        let eig = symmetric_eigen(&h, EigenOrder::Descending);
        let v = eig.vectors.column(0).into_owned();
        let av = (&self.a * &v).dot(&v);
        if av <= 0.0 {
            return None;
        }
        let f = eig.values[0];
        let z = v / av.sqrt();
        let mut lambda = DVector::zeros(1 + nb);
        lambda[0] = 1.0 / f;
        for i in 0..nb {
            lambda[1 + i] = mu[i] / f;
        }
        Some(self.candidate(z, lambda, iterations))
    }

    fn random_start(&self, rng: &mut ChaCha8Rng) -> Option<Candidate> {
        let n = self.a.nrows();
        for _ in 0..100 {
            let z = DVector::from_fn(n, |_, _| StandardNormal.sample(rng));
            let az = (&self.a * &z).dot(&z);
            if az > 0.0 {
                let z = z / az.sqrt();
                let lambda = self.multipliers(&z);
                return Some(self.candidate(z, lambda, 0));
            }
        }
        None
    }

    /// Newton-KKT SQP with an l1 merit function, second-order correction and
    /// backtracking.
    fn sqp(&self, start: Candidate, max_iter: usize, tol: f64) -> Candidate {
        let n = self.a.nrows();
        let m = self.num_constraints();
        let mut z = start.z;
        let mut lambda = start.lambda;
        let mut rho = 1.0_f64;
        let mut delta = 0.0_f64;
        let mut iterations = start.iterations;
        let merit = |z: &DVector<f64>, rho: f64| z.norm_squared() + rho * self.values(z).lp_norm(1);
        for _ in 0..max_iter {
            let c = self.values(&z);
            let jac = self.jacobian(&z);
            let grad_l = &z * 2.0 - jac.transpose() * &lambda;
            let znorm = z.norm();
            if c.amax() <= tol && grad_l.amax() <= tol * znorm.max(1.0) {
                break;
            }
            iterations += 1;
            let mut w = DMatrix::identity(n, n) * (2.0 + delta);
            for i in 0..m {
                w.zip_apply(self.mat(i), |x, y| *x += (-2.0 * lambda[i]) * y);
            }
            let mut kkt = DMatrix::zeros(n + m, n + m);
            kkt.view_mut((0, 0), (n, n)).copy_from(&w);
            kkt.view_mut((0, n), (n, m)).copy_from(&(-jac.transpose()));
            kkt.view_mut((n, 0), (m, n)).copy_from(&jac);
            let mut rhs = DVector::zeros(n + m);
            rhs.rows_mut(0, n).copy_from(&(&z * -2.0));
            rhs.rows_mut(n, m).copy_from(&(-&c));
            let Some(sol) = kkt.lu().solve(&rhs) else {
                delta = (delta * 4.0).max(1e-3);
                continue;
            };
            let p = sol.rows(0, n).into_owned();
            let lambda_new = sol.rows(n, m).into_owned();
            rho = rho.max(2.0 * lambda_new.amax());
            let c1 = c.lp_norm(1);
            let slope = 2.0 * z.dot(&p) - rho * c1;
            if slope >= 0.0 && c1 <= tol {
                // Tangential step goes uphill: the reduced Hessian is not
                // positive definite here.
                delta = (delta * 4.0).max(1e-3);
                continue;
            }
            let m0 = merit(&z, rho);
            let mut next = None;
            let full = &z + &p;
            if merit(&full, rho) <= m0 + 1e-4 * slope {
                next = Some(full);
            } else {
                // Second-order correction for the curvature of the constraints.
                let cf = self.values(&full);
                let jjt = &jac * jac.transpose();
                if let Some(ch) = jjt.cholesky() {
                    let corr = &full - jac.transpose() * ch.solve(&cf);
                    if merit(&corr, rho) <= m0 + 1e-4 * slope {
                        next = Some(corr);
                    }
                }
                if next.is_none() {
                    let mut t = 0.5;
                    while t > 1e-10 {
                        let trial = &z + &p * t;
                        if merit(&trial, rho) <= m0 + 1e-4 * t * slope {
                            next = Some(trial);
                            break;
                        }
                        t *= 0.5;
                    }
                }
            }
            match next {
                Some(zn) => {
                    z = zn;
                    lambda = lambda_new;
                    delta *= 0.1;
                    if delta < 1e-8 {
                        delta = 0.0;
                    }
                }
                None => {
                    delta = (delta * 4.0).max(1e-3);
                    if delta > 1e6 {
                        break;
                    }
                }
            }
        }
        self.candidate(z, lambda, iterations)
    }
}
