use std::f64::consts::TAU;
use std::io::{Read, Write};

use super::analysis::ScanPoint;
use super::PulseError;
use crate::phases::{PulseBasis, PulseShape};

fn io_err(e: impl std::fmt::Display) -> PulseError {
    PulseError::Io(e.to_string())
}

/// Columns `index,mu_hz,omega_hz`; values use shortest round-trip formatting.
pub fn write_pulse_csv<W: Write>(pulse: &PulseShape, w: W) -> Result<(), PulseError> {
    let mut out = csv::Writer::from_writer(w);
    out.write_record(["index", "mu_hz", "omega_hz"]).map_err(io_err)?;
    for (p, a) in pulse.amplitudes.iter().enumerate() {
        let mu = pulse.basis.detuning(p) / TAU;
        out.write_record([p.to_string(), mu.to_string(), (a / TAU).to_string()]).map_err(io_err)?;
    }
    out.flush().map_err(io_err)
}

/// Read a pulse written by [`write_pulse_csv`], checking its tones against `basis`.
pub fn read_pulse_csv<R: Read>(r: R, basis: &PulseBasis) -> Result<PulseShape, PulseError> {
    let mut rdr = csv::Reader::from_reader(r);
    let mut amps = vec![None; basis.num_tones];
    for (line, rec) in rdr.records().enumerate() {
        let rec = rec.map_err(io_err)?;
        let field = |i: usize| -> Result<&str, PulseError> {
            rec.get(i).ok_or_else(|| PulseError::Io(format!("row {}: missing column {i}", line + 1)))
        };
        let index: usize = field(0)?.trim().parse().map_err(|e| PulseError::Io(format!("row {}: {e}", line + 1)))?;
        let mu: f64 = field(1)?.trim().parse().map_err(|e| PulseError::Io(format!("row {}: {e}", line + 1)))?;
        let omega: f64 = field(2)?.trim().parse().map_err(|e| PulseError::Io(format!("row {}: {e}", line + 1)))?;
        if index >= basis.num_tones {
            return Err(PulseError::Io(format!("row {}: tone {index} outside the basis", line + 1)));
        }
        let want = basis.detuning(index) / TAU;
        if (mu - want).abs() > 1e-9 * want.abs() {
            return Err(PulseError::Io(format!(
                "row {}: tone {index} is at {mu} Hz, basis expects {want} Hz",
                line + 1
            )));
        }
        amps[index] = Some(omega * TAU);
    }
    let amps = amps
        .into_iter()
        .enumerate()
        .map(|(p, a)| a.ok_or_else(|| PulseError::Io(format!("tone {p} missing"))))
        .collect::<Result<Vec<_>, _>>()?;
    Ok(PulseShape::new(*basis, amps)?)
}

/// Columns `offset_khz,dchi_11,dchi_12,dchi_22,max_alpha`.
pub fn write_scan_csv<W: Write>(points: &[ScanPoint], w: W) -> Result<(), PulseError> {
    let mut out = csv::Writer::from_writer(w);
    out.write_record(["offset_khz", "dchi_11", "dchi_12", "dchi_22", "max_alpha"]).map_err(io_err)?;
    for pt in points {
        out.write_record([
            (pt.offset_hz / 1e3).to_string(),
            pt.delta_chi[0].to_string(),
            pt.delta_chi[1].to_string(),
            pt.delta_chi[2].to_string(),
            pt.max_alpha.to_string(),
        ])
        .map_err(io_err)?;
    }
    out.flush().map_err(io_err)
}
