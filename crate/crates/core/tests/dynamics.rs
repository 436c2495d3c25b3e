use std::f64::consts::TAU;

use iongate::dynamics::{integrate_ls, integrate_ms, max_entry_deviation, OracleConfig};
use iongate::ion_chain::ModeSet;
use iongate::phases::{
    ls_evolution, ls_phase_table, ms_evolution, ms_phases, LSAmplitudeProfile, PulseBasis, PulseShape, QuditUnitary,
};
use nalgebra::DMatrix;

fn two_modes() -> ModeSet {
    ModeSet::from_parts(vec![TAU * 1.0e6, TAU * 0.96e6], DMatrix::from_row_slice(2, 2, &[0.05, 0.05, 0.04, -0.04]))
}

fn pulse() -> PulseShape {
    // Tones between the two modes; not decoupled, so the projection is non-unitary.
    let basis = PulseBasis::new(20e-6, 4, 19).unwrap();
    PulseShape::new(basis, vec![TAU * 30e3, -TAU * 10e3, TAU * 20e3, TAU * 5e3]).unwrap()
}

#[test]
fn ms_two_modes_converges_at_fourth_order() {
    let modes = two_modes();
    let p = pulse();
    let ph = ms_phases(&p, &modes, (0, 1)).unwrap();
    let ideal = ms_evolution(&ph, &[0.0; 3], 3).unwrap();
    let mut runs = Vec::new();
    for spp in [8, 16, 32] {
        let cfg = OracleConfig { fock_cutoff: 10, steps_per_period: spp, leakage_threshold: 1e-6 };
        let r = integrate_ms(&p, &modes, (0, 1), 3, &cfg).unwrap();
        runs.push(r);
    }
    let fine = &runs[2];
    let coarse_gap = max_entry_deviation(&runs[0].operator, &runs[1].operator);
    let step_gap = max_entry_deviation(&runs[1].operator, &fine.operator);
    assert!(fine.isometry_error < 1e-8);
    assert!(coarse_gap > 8.0 * step_gap, "{coarse_gap} vs {step_gap}");
    // Not decoupled: leakage is finite and the closed form alone does not apply.
    assert!(fine.motional_leakage > 1e-6);
    assert!(max_entry_deviation(&fine.operator, &ideal) > 1e-4);
    assert!(step_gap < 1e-6);
}

#[test]
fn ls_generic_qutrit_matches_table() {
    // Single mode with an integer number of beat periods: decoupled exactly.
    let modes = ModeSet::from_parts(vec![TAU * 200e3], DMatrix::from_row_slice(1, 2, &[0.07, -0.05]));
    let basis = PulseBasis::new(1e-4, 1, 21).unwrap();
    let p = PulseShape::new(basis, vec![TAU * 8e3]).unwrap();
    let prof = LSAmplitudeProfile::without_stark(vec![1.0, -0.62, 0.31]).unwrap();
    let cfg = OracleConfig { fock_cutoff: 10, steps_per_period: 16, leakage_threshold: 1e-6 };
    let r = integrate_ls(&p, &prof, &modes, (0, 1), &cfg).unwrap();
    let ph = ms_phases(&p, &modes, (0, 1)).unwrap();
    let table = ls_phase_table(ph.chi_12, ph.chi_11, ph.chi_22, &prof, 1e-3).unwrap();
    let want = ls_evolution(&table);
    assert!(max_entry_deviation(&r.operator, &want) < 1e-6);
    assert!(r.motional_leakage < 1e-8);
    let id = QuditUnitary { dim: 3, matrix: DMatrix::identity(9, 9) };
    assert!(max_entry_deviation(&want, &id) > 1e-3);
}

#[test]
fn ls_zero_order_only_touches_ground_level() {
    let modes = ModeSet::from_parts(vec![TAU * 200e3], DMatrix::from_row_slice(1, 2, &[0.07, 0.07]));
    let basis = PulseBasis::new(1e-4, 1, 21).unwrap();
    let p = PulseShape::new(basis, vec![TAU * 8e3]).unwrap();
    let prof = LSAmplitudeProfile::zero_order(3);
    let cfg = OracleConfig { fock_cutoff: 10, steps_per_period: 16, leakage_threshold: 1e-6 };
    let r = integrate_ls(&p, &prof, &modes, (0, 1), &cfg).unwrap();
    for i in 0..9 {
        let (s, t) = (i / 3, i % 3);
        let z = r.operator.matrix[(i, i)];
        if s != 0 && t != 0 {
            assert!((z - 1.0).norm() < 1e-9);
        } else {
            assert!((z - 1.0).norm() > 1e-4);
        }
    }
}
