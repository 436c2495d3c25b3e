//! Spin-echo sequences for the qudit LS gate and their phase bookkeeping.
//!
//! A sequence interleaves LS applications with local level permutations so
//! each basis state accumulates the LS phases of every state it visits.

use std::f64::consts::TAU;
use std::fmt;
use std::io::Write;
use std::str::FromStr;

use nalgebra::DMatrix;
use num_complex::Complex64;
use rand::Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::permutation::{cyclic_shift_swaps, normalize_shift, Axis, NativeRotation};
use crate::phases::{LSAmplitudeProfile, LSPhaseTable, QuditUnitary};

pub const DEFAULT_PHASE_TOL: f64 = 1e-9;

#[derive(Debug, Error)]
pub enum EchoError {
    #[error("qudit dimension must be at least 2, got {0}")]
    Dimension(usize),
    #[error("type (c) needs an even dimension, got d = {0}; use the partial sequence for odd d")]
    OddDimension(usize),
    #[error("the partial sequence is for odd d >= 3, got d = {0}; use type (c)")]
    EvenDimension(usize),
    #[error("embedded qubits need d a power of two, got {0}")]
    NotPowerOfTwo(usize),
    #[error("end-of-cycle shift ({0}, {1}) does not close the sequence")]
    InvalidShift(i64, i64),
    #[error("sequence is for d = {sequence}, table for d = {table}")]
    DimensionMismatch { sequence: usize, table: usize },
    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Csv(#[from] csv::Error),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum SequenceKind {
    #[serde(rename = "a")]
    A,
    #[serde(rename = "b")]
    B,
    #[serde(rename = "c")]
    C,
    #[serde(rename = "c_partial")]
    CPartial,
}

impl fmt::Display for SequenceKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            SequenceKind::A => "a",
            SequenceKind::B => "b",
            SequenceKind::C => "c",
            SequenceKind::CPartial => "c_partial",
        })
    }
}

impl FromStr for SequenceKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "a" => Ok(SequenceKind::A),
            "b" => Ok(SequenceKind::B),
            "c" => Ok(SequenceKind::C),
            "c_partial" | "partial" => Ok(SequenceKind::CPartial),
            other => Err(format!("unknown sequence type '{other}' (expected a, b, c or c_partial)")),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum EchoStep {
    ApplyLs,
    /// `X_{m1} ⊗ X_{m2}`.
    Shift {
        m1: i64,
        m2: i64,
    },
    /// `R^{0s}_{axis}(pi)` on both ions.
    TranspositionPair {
        level: usize,
        axis: Axis,
    },
}

impl fmt::Display for EchoStep {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            EchoStep::ApplyLs => f.write_str("LS"),
            EchoStep::Shift { m1, m2 } => write!(f, "SHIFT {m1} {m2}"),
            EchoStep::TranspositionPair { level, axis } => write!(f, "ROT 0 {level} {axis} pi"),
        }
    }
}

fn transpose0(s: usize, j: usize) -> usize {
    if j == 0 {
        s
    } else if j == s {
        0
    } else {
        j
    }
}

fn shift(d: usize, j: usize, m: i64) -> usize {
    (j as i64 + m).rem_euclid(d as i64) as usize
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EchoSequence {
    pub d: usize,
    pub kind: SequenceKind,
    pub steps: Vec<EchoStep>,
}

impl EchoSequence {
    fn new(d: usize, kind: SequenceKind, steps: Vec<EchoStep>) -> Self {
        let steps = steps
            .into_iter()
            .map(|s| match s {
                EchoStep::Shift { m1, m2 } => {
                    EchoStep::Shift { m1: normalize_shift(d, m1), m2: normalize_shift(d, m2) }
                }
                other => other,
            })
            .collect();
        Self { d, kind, steps }
    }

    pub fn ls_count(&self) -> usize {
        self.steps.iter().filter(|s| matches!(s, EchoStep::ApplyLs)).count()
    }

    /// Level of each ion after one step.
    pub fn step_state(&self, step: &EchoStep, (a, b): (usize, usize)) -> (usize, usize) {
        match *step {
            EchoStep::ApplyLs => (a, b),
            EchoStep::Shift { m1, m2 } => (shift(self.d, a, m1), shift(self.d, b, m2)),
            EchoStep::TranspositionPair { level, .. } => (transpose0(level, a), transpose0(level, b)),
        }
    }

    /// Two-qudit state at each LS application, starting from `start`.
    pub fn ls_visits(&self, start: (usize, usize)) -> Vec<(usize, usize)> {
        let mut state = start;
        let mut visits = Vec::with_capacity(self.ls_count());
        for step in &self.steps {
            if matches!(step, EchoStep::ApplyLs) {
                visits.push(state);
            }
            state = self.step_state(step, state);
        }
        visits
    }

    /// True when every basis state returns to itself.
    pub fn is_closed(&self) -> bool {
        (0..self.d).all(|a| {
            (0..self.d).all(|b| self.steps.iter().fold((a, b), |st, step| self.step_state(step, st)) == (a, b))
        })
    }

    /// One step per line, preceded by a `# type <kind> d <d>` header.
    pub fn to_program(&self) -> String {
        let mut out = format!("# type {} d {}\n", self.kind, self.d);
        for step in &self.steps {
            out.push_str(&step.to_string());
            out.push('\n');
        }
        out
    }

    pub fn from_program(text: &str) -> Result<Self, EchoError> {
        let mut header: Option<(SequenceKind, usize)> = None;
        let mut steps = Vec::new();
        for (i, raw) in text.lines().enumerate() {
            let line = i + 1;
            let err = |message: String| EchoError::Parse { line, message };
            let tokens: Vec<&str> = raw.split_whitespace().collect();
            match tokens.as_slice() {
                [] => {}
                ["#", "type", kind, "d", d] => {
                    let kind = kind.parse().map_err(err)?;
                    let d = d.parse().map_err(|e| err(format!("bad dimension: {e}")))?;
                    header = Some((kind, d));
                }
                [first, ..] if first.starts_with('#') => {}
                ["LS"] => steps.push(EchoStep::ApplyLs),
                ["SHIFT", m1, m2] => {
                    let parse = |t: &str| t.parse::<i64>().map_err(|e| err(format!("bad shift '{t}': {e}")));
                    steps.push(EchoStep::Shift { m1: parse(m1)?, m2: parse(m2)? });
                }
                ["ROT", "0", level, axis, "pi"] => {
                    let level = level.parse().map_err(|e| err(format!("bad level '{level}': {e}")))?;
                    let axis = match *axis {
                        "+x" => Axis::PlusX,
                        "-x" => Axis::MinusX,
                        other => return Err(err(format!("unknown axis '{other}'"))),
                    };
                    steps.push(EchoStep::TranspositionPair { level, axis });
                }
                _ => return Err(err(format!("unrecognized step '{}'", raw.trim()))),
            }
        }
        let (kind, d) =
            header.ok_or(EchoError::Parse { line: 1, message: "missing '# type <kind> d <d>' header".into() })?;
        if d < 2 {
            return Err(EchoError::Dimension(d));
        }
        if let Some(bad) = steps
            .iter()
            .position(|s| matches!(s, EchoStep::TranspositionPair { level, .. } if *level == 0 || *level >= d))
        {
            return Err(EchoError::Parse {
                line: bad + 2,
                message: format!("rotation level out of range for d = {d}"),
            });
        }
        Ok(Self::new(d, kind, steps))
    }
}

fn loops(d: usize, end: EchoStep) -> impl Iterator<Item = EchoStep> {
    let unit = EchoStep::Shift { m1: 1, m2: 1 };
    (0..d - 1).flat_map(move |_| [EchoStep::ApplyLs, unit]).chain([EchoStep::ApplyLs, end])
}

/// Types (a), (b) and (c) with the default `(1, -1)` closing shift.
pub fn build_sequence(kind: SequenceKind, d: usize) -> Result<EchoSequence, EchoError> {
    if d < 2 {
        return Err(EchoError::Dimension(d));
    }
    match kind {
        SequenceKind::A => Ok(EchoSequence::new(d, kind, loops(d, EchoStep::Shift { m1: 1, m2: 1 }).collect())),
        SequenceKind::B => {
            let mut steps = vec![EchoStep::ApplyLs];
            for level in 1..d {
                steps.push(EchoStep::TranspositionPair { level, axis: Axis::PlusX });
                steps.push(EchoStep::ApplyLs);
                steps.push(EchoStep::TranspositionPair { level, axis: Axis::MinusX });
            }
            Ok(EchoSequence::new(d, kind, steps))
        }
        SequenceKind::C => build_type_c(d, (1, -1)),
        SequenceKind::CPartial => build_partial(d),
    }
}

/// Type (c) with closing shift `X_{n+2} ⊗ X_n` given as `(n + 2, n)`.
pub fn build_type_c(d: usize, end_shift: (i64, i64)) -> Result<EchoSequence, EchoError> {
    if d < 2 {
        return Err(EchoError::Dimension(d));
    }
    if d % 2 == 1 {
        return Err(EchoError::OddDimension(d));
    }
    let (m1, m2) = end_shift;
    if (m1 - m2).rem_euclid(d as i64) != 2 % d as i64 {
        return Err(EchoError::InvalidShift(m1, m2));
    }
    let steps = (0..d / 2).flat_map(|_| loops(d, EchoStep::Shift { m1, m2 })).collect();
    let seq = EchoSequence::new(d, SequenceKind::C, steps);
    if !seq.is_closed() {
        return Err(EchoError::InvalidShift(m1, m2));
    }
    Ok(seq)
}

pub fn smallest_prime_divisor(d: usize) -> usize {
    (2..).take_while(|p| p * p <= d).find(|p| d.is_multiple_of(*p)).unwrap_or(d)
}

/// Odd-d reduction: cycles closed by `X_{1+p} ⊗ X_1`, `p` the smallest prime divisor.
pub fn build_partial(d: usize) -> Result<EchoSequence, EchoError> {
    if d < 3 || d.is_multiple_of(2) {
        return Err(EchoError::EvenDimension(d));
    }
    let p = smallest_prime_divisor(d);
    let end = EchoStep::Shift { m1: 1 + p as i64, m2: 1 };
    let steps = (0..d / p).flat_map(|_| loops(d, end)).collect();
    Ok(EchoSequence::new(d, SequenceKind::CPartial, steps))
}

/// Accumulated phases per initial basis state (unwrapped sums).
#[derive(Clone, Debug, PartialEq)]
pub struct PhaseLedger {
    pub d: usize,
    pub entangling: DMatrix<f64>,
    /// Indexed by the initial level of each ion.
    pub nonentangling: [Vec<f64>; 2],
}

impl PhaseLedger {
    pub fn total(&self, s: usize, t: usize) -> f64 {
        self.entangling[(s, t)] + self.nonentangling[0][s] + self.nonentangling[1][t]
    }

    /// CSV with header `s,s_prime,phase` (entangling part).
    pub fn write_csv<W: Write>(&self, w: W) -> Result<(), EchoError> {
        let mut wtr = csv::Writer::from_writer(w);
        wtr.write_record(["s", "s_prime", "phase"])?;
        for s in 0..self.d {
            for t in 0..self.d {
                wtr.write_record([s.to_string(), t.to_string(), self.entangling[(s, t)].to_string()])?;
            }
        }
        wtr.flush()?;
        Ok(())
    }
}

fn check_dims(seq: &EchoSequence, table: &LSPhaseTable) -> Result<(), EchoError> {
    if seq.d != table.dim {
        return Err(EchoError::DimensionMismatch { sequence: seq.d, table: table.dim });
    }
    Ok(())
}

pub fn simulate_ledger(seq: &EchoSequence, table: &LSPhaseTable) -> Result<PhaseLedger, EchoError> {
    check_dims(seq, table)?;
    let d = seq.d;
    let mut entangling = DMatrix::zeros(d, d);
    for s in 0..d {
        for t in 0..d {
            entangling[(s, t)] = seq.ls_visits((s, t)).iter().map(|&(a, b)| table.entangling[(a, b)]).sum();
        }
    }
    // Each ion's trajectory depends only on its own start.
    let per_ion = |ion: usize| -> Vec<f64> {
        (0..d)
            .map(|s| {
                seq.ls_visits((s, s)).iter().map(|&(a, b)| table.nonentangling[ion][if ion == 0 { a } else { b }]).sum()
            })
            .collect()
    };
    let nonentangling = [per_ion(0), per_ion(1)];
    Ok(PhaseLedger { d, entangling, nonentangling })
}

/// `|x - y|` on the circle.
pub fn circular_distance(x: f64, y: f64) -> f64 {
    let r = (x - y).rem_euclid(TAU);
    r.min(TAU - r)
}

#[derive(Clone, Debug, PartialEq)]
pub struct PhaseBlock {
    /// In `[0, 2pi)`.
    pub phase: f64,
    pub states: Vec<(usize, usize)>,
}

/// Group basis states whose entangling phases agree mod 2pi within `tol`.
pub fn distinct_phases(ledger: &PhaseLedger, tol: f64) -> Vec<PhaseBlock> {
    let d = ledger.d;
    let mut entries: Vec<(f64, (usize, usize))> = (0..d)
        .flat_map(|s| (0..d).map(move |t| (s, t)))
        .map(|st| (ledger.entangling[st].rem_euclid(TAU), st))
        .collect();
    entries.sort_by(|a, b| a.0.total_cmp(&b.0));
    let mut blocks: Vec<PhaseBlock> = Vec::new();
    for (phase, st) in entries {
        match blocks.last_mut() {
            Some(b) if circular_distance(b.phase, phase) <= tol => b.states.push(st),
            _ => blocks.push(PhaseBlock { phase, states: vec![st] }),
        }
    }
    if blocks.len() > 1 && circular_distance(blocks[0].phase, blocks[blocks.len() - 1].phase) <= tol {
        let last = blocks.pop().unwrap_or_else(|| unreachable!());
        blocks[0].states.extend(last.states);
    }
    for b in &mut blocks {
        b.states.sort_unstable();
    }
    blocks
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct UniformityReport {
    pub is_global: bool,
    /// Largest per-ion spread of the accumulated non-entangling phase.
    pub spread: f64,
}

pub fn nonentangling_uniformity(seq: &EchoSequence, table: &LSPhaseTable) -> Result<UniformityReport, EchoError> {
    let ledger = simulate_ledger(seq, table)?;
    let spread = ledger
        .nonentangling
        .iter()
        .map(|v| {
            let hi = v.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            let lo = v.iter().copied().fold(f64::INFINITY, f64::min);
            hi - lo
        })
        .fold(0.0, f64::max);
    Ok(UniformityReport { is_global: spread < DEFAULT_PHASE_TOL, spread })
}

/// `phi^echo_l = sum_s phi_{s, s+l}`.
pub fn subspace_phases(table: &LSPhaseTable) -> Vec<f64> {
    let d = table.dim;
    (0..d).map(|l| (0..d).map(|s| table.entangling[(s, (s + l) % d)]).sum()).collect()
}

/// Random profile with `theta_0 = 1` and the other amplitudes uniform in
/// `[-1, 1]` sorted by magnitude, redrawn until the subspace phases of
/// `ls_phase_table(chi_12, ..)` are pairwise separated by `1e-6` mod 2pi,
/// as are the even and odd subspace sums.
pub fn generic_profile<R: Rng + ?Sized>(d: usize, chi_12: f64, rng: &mut R) -> LSAmplitudeProfile {
    loop {
        let mut rest: Vec<f64> = (1..d).map(|_| rng.random_range(-1.0..=1.0)).collect();
        rest.sort_by(|a: &f64, b: &f64| b.abs().total_cmp(&a.abs()));
        let mut theta = vec![1.0];
        theta.extend(rest);
        let phi: Vec<f64> =
            (0..d).map(|l| (0..d).map(|s| 2.0 * chi_12 * theta[s] * theta[(s + l) % d]).sum()).collect();
        let half = &phi[..=d / 2];
        let separated =
            half.iter().enumerate().all(|(i, x)| half[i + 1..].iter().all(|y| circular_distance(*x, *y) > 1e-6));
        let even: f64 = phi.iter().step_by(2).sum();
        let odd: f64 = phi.iter().skip(1).step_by(2).sum();
        if separated && (d % 2 == 1 || circular_distance(even, odd) > 1e-6) {
            return LSAmplitudeProfile { ac_phases: vec![0.0; d], theta };
        }
    }
}

/// Native operation in an expanded sequence.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum NativeOp {
    ApplyLs,
    /// Rotation on ion 0 or 1.
    Rotation {
        ion: usize,
        rotation: NativeRotation,
    },
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct NativeProgram {
    pub ops: Vec<NativeOp>,
    pub ls_count: usize,
    pub rotations_per_ion: [usize; 2],
}

/// Replace every shift by its juggling swap sequence.
pub fn expand_to_native(seq: &EchoSequence) -> NativeProgram {
    let mut ops = Vec::new();
    for step in &seq.steps {
        match *step {
            EchoStep::ApplyLs => ops.push(NativeOp::ApplyLs),
            EchoStep::Shift { m1, m2 } => {
                for (ion, m) in [(0, m1), (1, m2)] {
                    let swaps = cyclic_shift_swaps(seq.d, m).unwrap_or_else(|_| unreachable!("d >= 2"));
                    ops.extend(
                        swaps
                            .to_native_rotations(Axis::PlusX)
                            .into_iter()
                            .map(|rotation| NativeOp::Rotation { ion, rotation }),
                    );
                }
            }
            EchoStep::TranspositionPair { level, axis } => {
                for ion in 0..2 {
                    ops.push(NativeOp::Rotation { ion, rotation: NativeRotation { level, axis } });
                }
            }
        }
    }
    let mut rotations_per_ion = [0; 2];
    for op in &ops {
        if let NativeOp::Rotation { ion, .. } = op {
            rotations_per_ion[*ion] += 1;
        }
    }
    NativeProgram { ls_count: seq.ls_count(), ops, rotations_per_ion }
}

/// How native pi-rotations enter the dense product.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum RotationPhases {
    /// Pure permutation matrices.
    Ideal,
    /// `exp(-i pi/2 sigma)` with `sigma = ±sigma_x` on levels `(0, s)`.
    Exact,
}

fn rotation_factor(axis: Axis, phases: RotationPhases) -> Complex64 {
    match (phases, axis) {
        (RotationPhases::Ideal, _) => Complex64::new(1.0, 0.0),
        (RotationPhases::Exact, Axis::PlusX) => Complex64::new(0.0, -1.0),
        (RotationPhases::Exact, Axis::MinusX) => Complex64::new(0.0, 1.0),
    }
}

/// Dense product of the native expansion, LS steps from `table`. Each gate
/// is a level transposition or diagonal, so it is applied to the running
/// product as row operations.
pub fn sequence_unitary(
    seq: &EchoSequence,
    table: &LSPhaseTable,
    phases: RotationPhases,
) -> Result<QuditUnitary, EchoError> {
    check_dims(seq, table)?;
    let d = seq.d;
    let ls = crate::phases::ls_evolution(table).matrix;
    let mut u = DMatrix::<Complex64>::identity(d * d, d * d);
    for op in expand_to_native(seq).ops {
        match op {
            NativeOp::ApplyLs => {
                for i in 0..d * d {
                    let f = ls[(i, i)];
                    u.row_mut(i).iter_mut().for_each(|z| *z *= f);
                }
            }
            NativeOp::Rotation { ion, rotation } => {
                let c = rotation_factor(rotation.axis, phases);
                let s = rotation.level;
                for other in 0..d {
                    let (r0, rs) = if ion == 0 { (other, s * d + other) } else { (other * d, other * d + s) };
                    u.swap_rows(r0, rs);
                    u.row_mut(r0).iter_mut().for_each(|z| *z *= c);
                    u.row_mut(rs).iter_mut().for_each(|z| *z *= c);
                }
            }
        }
    }
    Ok(QuditUnitary { dim: d, matrix: u })
}

/// Type (c) sequence whose subspace phases are `(+chi, -chi)`, compared
/// with `ZZ(chi)` on the last embedded qubits. Returns the largest entry
/// deviation after removing one global phase.
pub fn embedded_zz_check(d: usize, chi: f64) -> Result<f64, EchoError> {
    if !d.is_power_of_two() || d < 2 {
        return Err(EchoError::NotPowerOfTwo(d));
    }
    let psi = 2.0 * chi / (d * d) as f64;
    let entangling = DMatrix::from_fn(d, d, |s, t| if (s + d - t).is_multiple_of(2) { psi } else { -psi });
    let table = LSPhaseTable::from_raw(entangling, [vec![0.0; d], vec![0.0; d]]);
    let seq = build_sequence(SequenceKind::C, d)?;
    let u = sequence_unitary(&seq, &table, RotationPhases::Ideal)?.matrix;
    let z = |s: usize| if s.is_multiple_of(2) { 1.0 } else { -1.0 };
    let target = DMatrix::from_fn(d * d, d * d, |i, j| {
        if i == j {
            Complex64::from_polar(1.0, chi * z(i / d) * z(i % d))
        } else {
            Complex64::new(0.0, 0.0)
        }
    });
    let global = u[(0, 0)] / target[(0, 0)];
    Ok((u - target * global).iter().map(|c| c.norm()).fold(0.0, f64::max))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::phases::ls_phase_table;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;
    use std::f64::consts::PI;

    fn generic_table(d: usize, seed: u64) -> LSPhaseTable {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let prof = generic_profile(d, PI / 8.0, &mut rng);
        ls_phase_table(PI / 8.0, 0.3, -0.2, &prof, 1e-3).unwrap()
    }

    #[test]
    fn step_counts() {
        for d in 2..9 {
            let a = build_sequence(SequenceKind::A, d).unwrap();
            let b = build_sequence(SequenceKind::B, d).unwrap();
            assert_eq!(a.ls_count(), d);
            assert_eq!(b.ls_count(), d);
            assert!(a.is_closed() && b.is_closed());
            if d % 2 == 0 {
                let c = build_sequence(SequenceKind::C, d).unwrap();
                assert_eq!(c.ls_count(), d * d / 2);
                assert!(c.is_closed());
            } else {
                assert!(build_partial(d).unwrap().is_closed());
            }
        }
    }

    #[test]
    fn qubit_spin_echo() {
        let seq = build_sequence(SequenceKind::A, 2).unwrap();
        assert_eq!(
            seq.steps,
            vec![
                EchoStep::ApplyLs,
                EchoStep::Shift { m1: 1, m2: 1 },
                EchoStep::ApplyLs,
                EchoStep::Shift { m1: 1, m2: 1 }
            ]
        );
        let t = LSPhaseTable::from_raw(
            DMatrix::from_row_slice(2, 2, &[0.4, 0.1, 0.1, -0.3]),
            [vec![0.2, 0.0], vec![0.0, 0.5]],
        );
        let l = simulate_ledger(&seq, &t).unwrap();
        assert!((l.entangling[(0, 0)] - 0.1).abs() < 1e-15);
        assert!((l.entangling[(0, 1)] - 0.2).abs() < 1e-15);
        assert_eq!(l.nonentangling[0], vec![0.2, 0.2]);
    }

    #[test]
    fn type_c_rejects_odd() {
        assert!(matches!(build_sequence(SequenceKind::C, 3), Err(EchoError::OddDimension(3))));
        assert!(matches!(build_partial(4), Err(EchoError::EvenDimension(4))));
        assert!(matches!(build_type_c(4, (1, 1)), Err(EchoError::InvalidShift(1, 1))));
        assert!(build_type_c(6, (3, 1)).unwrap().is_closed());
    }

    #[test]
    fn type_b_native_rotations() {
        let seq = build_sequence(SequenceKind::B, 5).unwrap();
        let nat = expand_to_native(&seq);
        assert_eq!(nat.ls_count, 5);
        assert_eq!(nat.rotations_per_ion, [8, 8]);
        let nat4 = expand_to_native(&build_sequence(SequenceKind::B, 4).unwrap());
        assert_eq!(nat4.rotations_per_ion, [6, 6]);
    }

    #[test]
    fn type_a_native_rotations() {
        let nat = expand_to_native(&build_sequence(SequenceKind::A, 4).unwrap());
        assert_eq!(nat.rotations_per_ion, [12, 12]);
    }

    #[test]
    fn type_c_native_bound() {
        for d in [2, 4, 6, 8] {
            let nat = expand_to_native(&build_sequence(SequenceKind::C, d).unwrap());
            let sw = |m| cyclic_shift_swaps(d, m).unwrap().len();
            let bound = d / 2 * ((d - 1) * (d - 1) + sw(1) + sw(d as i64 - 1));
            assert!(
                nat.rotations_per_ion.iter().all(|&n| n <= bound),
                "d = {d}: {:?} > {bound}",
                nat.rotations_per_ion
            );
        }
    }

    #[test]
    fn type_a_ledger_depends_on_difference() {
        for d in 2..9 {
            let t = generic_table(d, d as u64);
            let l = simulate_ledger(&build_sequence(SequenceKind::A, d).unwrap(), &t).unwrap();
            let phi = subspace_phases(&t);
            for s in 0..d {
                for u in 0..d {
                    assert!((l.entangling[(s, u)] - phi[(u + d - s) % d]).abs() < 1e-12);
                }
            }
            assert_eq!(distinct_phases(&l, DEFAULT_PHASE_TOL).len(), d / 2 + 1);
        }
    }

    #[test]
    fn type_c_two_blocks() {
        let t = generic_table(4, 11);
        let l = simulate_ledger(&build_sequence(SequenceKind::C, 4).unwrap(), &t).unwrap();
        let blocks = distinct_phases(&l, DEFAULT_PHASE_TOL);
        assert_eq!(blocks.len(), 2);
        let phi = subspace_phases(&t);
        let even = (phi[0] + phi[2]).rem_euclid(TAU);
        let odd = (phi[1] + phi[3]).rem_euclid(TAU);
        for b in &blocks {
            let parity = (b.states[0].0 + 4 - b.states[0].1) % 2;
            assert!(b.states.iter().all(|&(s, u)| (s + 4 - u) % 2 == parity));
            let want = if parity == 0 { even } else { odd };
            assert!(circular_distance(b.phase, want) < 1e-12);
        }
    }

    #[test]
    fn type_b_zero_order_pattern() {
        let d = 5;
        let t = ls_phase_table(0.7, 0.1, 0.2, &LSAmplitudeProfile::zero_order(d), 1e-3).unwrap();
        let l = simulate_ledger(&build_sequence(SequenceKind::B, d).unwrap(), &t).unwrap();
        for s in 0..d {
            for u in 0..d {
                let want = if s == u { 1.4 } else { 0.0 };
                assert!((l.entangling[(s, u)] - want).abs() < 1e-15);
            }
        }
        assert!(nonentangling_uniformity(&build_sequence(SequenceKind::B, d).unwrap(), &t).unwrap().is_global);
    }

    #[test]
    fn type_b_full_rank_not_global() {
        let t = generic_table(4, 3);
        let r = nonentangling_uniformity(&build_sequence(SequenceKind::B, 4).unwrap(), &t).unwrap();
        assert!(!r.is_global);
        assert!(r.spread > 1e-3);
    }

    #[test]
    fn distinct_phases_wraps() {
        let e = DMatrix::from_row_slice(2, 2, &[1e-12, TAU - 1e-12, 1.0, 1.0 + TAU]);
        let l = PhaseLedger { d: 2, entangling: e, nonentangling: [vec![0.0; 2], vec![0.0; 2]] };
        let blocks = distinct_phases(&l, 1e-9);
        assert_eq!(blocks.len(), 2);
        assert_eq!(blocks[0].states, vec![(0, 0), (0, 1)]);
        assert_eq!(blocks[1].states, vec![(1, 0), (1, 1)]);
        let uniform = PhaseLedger {
            d: 3,
            entangling: DMatrix::from_element(3, 3, 0.5),
            nonentangling: [vec![0.0; 3], vec![0.0; 3]],
        };
        assert_eq!(distinct_phases(&uniform, 1e-9).len(), 1);
    }

    #[test]
    fn dense_ideal_matches_ledger() {
        for (kind, d) in [(SequenceKind::A, 3), (SequenceKind::B, 4), (SequenceKind::C, 4), (SequenceKind::CPartial, 3)]
        {
            let t = generic_table(d, 5);
            let seq = build_sequence(kind, d).unwrap();
            let u = sequence_unitary(&seq, &t, RotationPhases::Ideal).unwrap();
            let l = simulate_ledger(&seq, &t).unwrap();
            for i in 0..d * d {
                for j in 0..d * d {
                    let want = if i == j {
                        Complex64::from_polar(1.0, l.total(i / d, i % d))
                    } else {
                        Complex64::new(0.0, 0.0)
                    };
                    assert!((u.matrix[(i, j)] - want).norm() < 1e-10);
                }
            }
        }
    }

    #[test]
    fn dense_exact_differs_by_local_phases() {
        for (kind, d) in [(SequenceKind::A, 4), (SequenceKind::B, 3), (SequenceKind::C, 4), (SequenceKind::CPartial, 5)]
        {
            let t = generic_table(d, 9);
            let seq = build_sequence(kind, d).unwrap();
            let u = sequence_unitary(&seq, &t, RotationPhases::Exact).unwrap();
            assert!(u.unitarity_error() < 1e-12);
            let l = simulate_ledger(&seq, &t).unwrap();
            let r = |s: usize, v: usize| u.element((s, v), (s, v)) * Complex64::from_polar(1.0, -l.total(s, v));
            for i in 0..d * d {
                for j in 0..d * d {
                    if i != j {
                        assert!(u.matrix[(i, j)].norm() < 1e-12);
                    }
                }
            }
            for s in 0..d {
                for v in 0..d {
                    assert!((r(s, v) * r(0, 0) - r(s, 0) * r(0, v)).norm() < 1e-10, "{kind} d = {d}");
                }
            }
        }
    }

    #[test]
    fn program_round_trip() {
        for kind in [SequenceKind::A, SequenceKind::B, SequenceKind::C] {
            let seq = build_sequence(kind, 4).unwrap();
            let text = seq.to_program();
            assert_eq!(EchoSequence::from_program(&text).unwrap(), seq);
        }
        let text = build_sequence(SequenceKind::B, 3).unwrap().to_program();
        assert!(text.lines().any(|l| l == "ROT 0 2 -x pi"));
        let err = EchoSequence::from_program("# type a d 3\nLS\nJUMP 1\n").unwrap_err();
        assert!(matches!(err, EchoError::Parse { line: 3, .. }));
    }

    #[test]
    fn ledger_csv() {
        let t = generic_table(2, 1);
        let l = simulate_ledger(&build_sequence(SequenceKind::A, 2).unwrap(), &t).unwrap();
        let mut buf = Vec::new();
        l.write_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert!(text.starts_with("s,s_prime,phase\n0,0,"));
        assert_eq!(text.lines().count(), 5);
    }

    #[test]
    fn zz_small() {
        assert!(embedded_zz_check(2, PI / 4.0).unwrap() < 1e-12);
        assert!(embedded_zz_check(4, PI / 4.0).unwrap() < 1e-9);
        assert!(matches!(embedded_zz_check(6, 0.1), Err(EchoError::NotPowerOfTwo(6))));
    }

    #[test]
    fn prime_divisors() {
        assert_eq!(smallest_prime_divisor(9), 3);
        assert_eq!(smallest_prime_divisor(15), 3);
        assert_eq!(smallest_prime_divisor(7), 7);
        assert_eq!(smallest_prime_divisor(25), 5);
    }
}
