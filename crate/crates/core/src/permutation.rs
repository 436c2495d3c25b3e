//! Cyclic shifts `X_m^d` as sequences of transpositions with level 0
//! (juggling algorithm), and their native pi-rotation expansion.

use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error, PartialEq, Eq)]
pub enum PermutationError {
    #[error("qudit dimension must be at least 2, got {0}")]
    Dimension(usize),
}

/// Rotation axis in the equatorial plane.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Axis {
    #[serde(rename = "+x")]
    PlusX,
    #[serde(rename = "-x")]
    MinusX,
}

impl fmt::Display for Axis {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Axis::PlusX => "+x",
            Axis::MinusX => "-x",
        })
    }
}

/// `R^{0s}_{axis}(pi)`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct NativeRotation {
    pub level: usize,
    pub axis: Axis,
}

impl fmt::Display for NativeRotation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "ROT 0 {} {} pi", self.level, self.axis)
    }
}

/// Ordered transpositions `(0 s)` realizing a shift by `m`.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct SwapSequence {
    pub d: usize,
    /// Normalized shift, `-d/2 < m <= d/2`.
    pub m: i64,
    pub swaps: Vec<usize>,
}

/// Reduce `m` modulo `d` into `(-d/2, d/2]`.
pub fn normalize_shift(d: usize, m: i64) -> i64 {
    let d = d as i64;
    let r = m.rem_euclid(d);
    if 2 * r > d {
        r - d
    } else {
        r
    }
}

fn gcd(a: usize, b: usize) -> usize {
    if b == 0 {
        a
    } else {
        gcd(b, a % b)
    }
}

/// Juggling construction: the cycle through 0 first, then each remaining
/// cycle routed through level 0 as a buffer. Negative shifts reverse the
/// sequence of the positive one.
pub fn cyclic_shift_swaps(d: usize, m: i64) -> Result<SwapSequence, PermutationError> {
    if d < 2 {
        return Err(PermutationError::Dimension(d));
    }
    let m = normalize_shift(d, m);
    if m == 0 {
        return Ok(SwapSequence { d, m, swaps: Vec::new() });
    }
    let step = m.unsigned_abs() as usize;
    let g = gcd(step, d);
    let cycle = d / g;
    let mut swaps: Vec<usize> = (1..cycle).map(|k| k * step % d).collect();
    for c in 1..g {
        swaps.extend((0..cycle).map(|k| (c + k * step) % d));
        swaps.push(c);
    }
    if m < 0 {
        swaps.reverse();
    }
    Ok(SwapSequence { d, m, swaps })
}

impl SwapSequence {
    pub fn len(&self) -> usize {
        self.swaps.len()
    }

    pub fn is_empty(&self) -> bool {
        self.swaps.is_empty()
    }

    /// The same transpositions in reverse order: the inverse shift.
    pub fn reversed(&self) -> Self {
        let mut swaps = self.swaps.clone();
        swaps.reverse();
        Self { d: self.d, m: normalize_shift(self.d, -self.m), swaps }
    }

    /// One `R^{0s}(pi)` per swap, in order.
    pub fn to_native_rotations(&self, axis: Axis) -> Vec<NativeRotation> {
        self.swaps.iter().map(|&level| NativeRotation { level, axis }).collect()
    }
}

/// Image form of the composed permutation: entry `j` is where level `j` ends up.
pub fn apply_swaps(seq: &SwapSequence) -> Vec<usize> {
    (0..seq.d)
        .map(|start| {
            seq.swaps.iter().fold(start, |j, &s| {
                if j == 0 {
                    s
                } else if j == s {
                    0
                } else {
                    j
                }
            })
        })
        .collect()
}
