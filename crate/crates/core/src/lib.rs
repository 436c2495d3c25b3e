//! Design and verification toolkit for trapped-ion qudit entangling gates.
//!
//! * [`ion_chain`]: normal modes and Lamb-Dicke parameters of a linear chain.
//! * [`phases`]: closed-form displacements, MS/LS phases and evolution operators.
//! * [`pulse`]: multi-tone pulse shaping with drift stabilization.
//! * [`echo`]: spin-echo sequences that reduce the qudit LS gate.
//! * [`permutation`]: cyclic shifts as transpositions with level 0.
//! * [`dynamics`]: Fock-space time integration used to validate the closed forms.

pub mod dynamics;
pub mod echo;
pub mod integrals;
pub mod ion_chain;
pub mod linalg;
pub mod permutation;
pub mod phases;
pub mod pulse;
