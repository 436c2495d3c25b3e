//! TOML job configuration. Frequencies in Hz, times in seconds, phases in radians.

use std::f64::consts::PI;
use std::path::Path;

use serde::{Deserialize, Serialize};

use iongate::echo::SequenceKind;
use iongate::ion_chain::{normal_modes, Branch, ModeSet, TrapConfig};
use iongate::phases::{LSAmplitudeProfile, PulseBasis};
use iongate::pulse::{OptimizerOptions, PhaseIndex, ScanNormalization, StabilizationConfig};

use crate::CliError;

fn default_mass() -> f64 {
    2.84e-25
}

fn default_wavevector() -> f64 {
    1.6e7
}

fn default_branch() -> Branch {
    Branch::Radial
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TrapSection {
    pub num_ions: usize,
    pub axial_com_freq: f64,
    pub radial_com_freq: f64,
    #[serde(default = "default_mass")]
    pub ion_mass: f64,
    #[serde(default = "default_wavevector")]
    pub eff_wavevector: f64,
    #[serde(default = "default_branch")]
    pub branch: Branch,
}

impl TrapSection {
    pub fn trap(&self) -> TrapConfig {
        TrapConfig {
            num_ions: self.num_ions,
            axial_com_freq: self.axial_com_freq,
            radial_com_freq: self.radial_com_freq,
            ion_mass: self.ion_mass,
            eff_wavevector: self.eff_wavevector,
            branch: self.branch,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BasisSection {
    pub duration: f64,
    pub num_tones: usize,
    /// Centered on the mode band when absent.
    pub n_min: Option<i64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TargetSection {
    pub ions: (usize, usize),
    #[serde(default = "default_chi")]
    pub chi: f64,
}

fn default_chi() -> f64 {
    PI / 8.0
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StabilizationSection {
    #[serde(default)]
    pub projected_per_mode: usize,
    #[serde(default)]
    pub phases: Vec<PhaseIndex>,
    #[serde(default)]
    pub moment_order: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OptimizerSection {
    #[serde(default = "default_starts")]
    pub starts: usize,
    #[serde(default = "default_max_iterations")]
    pub max_iterations: usize,
}

fn default_starts() -> usize {
    OptimizerOptions::default().starts
}

fn default_max_iterations() -> usize {
    OptimizerOptions::default().max_iterations
}

impl Default for OptimizerSection {
    fn default() -> Self {
        Self { starts: default_starts(), max_iterations: default_max_iterations() }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScanSection {
    /// Explicit offsets; overrides the grid when present.
    pub offsets_hz: Option<Vec<f64>>,
    #[serde(default = "default_scan_start")]
    pub start_hz: f64,
    #[serde(default = "default_scan_stop")]
    pub stop_hz: f64,
    #[serde(default = "default_scan_points")]
    pub points: usize,
    /// Logarithmic grid from `start_hz` to `stop_hz`, mirrored to negative offsets.
    #[serde(default)]
    pub log: bool,
    #[serde(default)]
    pub normalization: ScanNormalization,
}

fn default_scan_start() -> f64 {
    -200.0
}

fn default_scan_stop() -> f64 {
    200.0
}

fn default_scan_points() -> usize {
    41
}

impl Default for ScanSection {
    fn default() -> Self {
        Self {
            offsets_hz: None,
            start_hz: default_scan_start(),
            stop_hz: default_scan_stop(),
            points: default_scan_points(),
            log: false,
            normalization: ScanNormalization::default(),
        }
    }
}

impl ScanSection {
    pub fn offsets(&self) -> Vec<f64> {
        if let Some(o) = &self.offsets_hz {
            return o.clone();
        }
        let n = self.points.max(2);
        if self.log {
            let (a, b) = (self.start_hz.abs().ln(), self.stop_hz.abs().ln());
            let pos: Vec<f64> = (0..n).map(|i| (a + (b - a) * i as f64 / (n - 1) as f64).exp()).collect();
            pos.iter().rev().map(|x| -x).chain([0.0]).chain(pos.iter().copied()).collect()
        } else {
            (0..n).map(|i| self.start_hz + (self.stop_hz - self.start_hz) * i as f64 / (n - 1) as f64).collect()
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EchoSection {
    #[serde(rename = "type")]
    pub kind: SequenceKind,
    pub d: usize,
    /// Zero-order profile when absent.
    pub theta: Option<Vec<f64>>,
    pub ac_phases: Option<Vec<f64>>,
    #[serde(default = "default_chi")]
    pub chi_12: f64,
    #[serde(default)]
    pub chi_11: f64,
    #[serde(default)]
    pub chi_22: f64,
    /// Type (c) closing shift `(n + 2, n)`.
    pub end_shift: Option<(i64, i64)>,
    #[serde(default = "default_phase_tol")]
    pub tolerance: f64,
}

fn default_phase_tol() -> f64 {
    iongate::echo::DEFAULT_PHASE_TOL
}

impl EchoSection {
    pub fn profile(&self) -> Result<LSAmplitudeProfile, CliError> {
        let d = self.d;
        let theta = match &self.theta {
            Some(t) => t.clone(),
            None => LSAmplitudeProfile::zero_order(d).theta,
        };
        let ac = self.ac_phases.clone().unwrap_or_else(|| vec![0.0; theta.len()]);
        if theta.len() != d {
            return Err(CliError::Config(format!("echo.theta has {} entries, expected d = {d}", theta.len())));
        }
        LSAmplitudeProfile::new(theta, ac).map_err(|e| CliError::Config(format!("echo: {e}")))
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ValidateSection {
    /// Mode indices kept in the Fock space.
    pub modes: Vec<usize>,
    #[serde(default = "default_cutoff")]
    pub fock_cutoff: usize,
    #[serde(default = "default_spp")]
    pub steps_per_period: usize,
    #[serde(default = "default_validate_d")]
    pub d: usize,
    #[serde(default = "default_entry_tol")]
    pub entry_tolerance: f64,
    #[serde(default = "default_leak_tol")]
    pub leakage_tolerance: f64,
}

fn default_cutoff() -> usize {
    8
}

fn default_spp() -> usize {
    16
}

fn default_validate_d() -> usize {
    2
}

fn default_entry_tol() -> f64 {
    1e-3
}

fn default_leak_tol() -> f64 {
    1e-4
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct JobConfig {
    #[serde(default)]
    pub seed: u64,
    pub trap: Option<TrapSection>,
    pub basis: Option<BasisSection>,
    pub target: Option<TargetSection>,
    #[serde(default)]
    pub stabilization: StabilizationSection,
    #[serde(default)]
    pub optimizer: OptimizerSection,
    #[serde(default)]
    pub scan: ScanSection,
    pub echo: Option<EchoSection>,
    pub validate: Option<ValidateSection>,
}

fn missing(section: &str) -> CliError {
    CliError::Config(format!("missing [{section}] section"))
}

impl JobConfig {
    pub fn parse(text: &str) -> Result<Self, CliError> {
        toml::from_str(text).map_err(|e| CliError::Config(e.to_string()))
    }

    pub fn load(path: &Path) -> Result<(Self, String), CliError> {
        let text = std::fs::read_to_string(path).map_err(|e| CliError::Io(format!("{}: {e}", path.display())))?;
        Ok((Self::parse(&text)?, text))
    }

    pub fn trap(&self) -> Result<TrapConfig, CliError> {
        let t = self.trap.as_ref().ok_or_else(|| missing("trap"))?.trap();
        t.validate().map_err(|e| CliError::Config(format!("trap: {e}")))?;
        Ok(t)
    }

    pub fn modes(&self) -> Result<ModeSet, CliError> {
        normal_modes(&self.trap()?).map_err(|e| CliError::Config(format!("trap: {e}")))
    }

    pub fn basis(&self, modes: &ModeSet) -> Result<PulseBasis, CliError> {
        let b = self.basis.as_ref().ok_or_else(|| missing("basis"))?;
        let basis = match b.n_min {
            Some(n) => PulseBasis::new(b.duration, b.num_tones, n),
            None => PulseBasis::centered(b.duration, b.num_tones, modes),
        };
        basis.map_err(|e| CliError::Config(format!("basis: {e}")))
    }

    pub fn target(&self, modes: &ModeSet) -> Result<&TargetSection, CliError> {
        let t = self.target.as_ref().ok_or_else(|| missing("target"))?;
        let (j, k) = t.ions;
        if j == k || j >= modes.num_ions() || k >= modes.num_ions() {
            return Err(CliError::Config(format!(
                "target.ions = ({j}, {k}) must be two distinct indices below {}",
                modes.num_ions()
            )));
        }
        Ok(t)
    }

    pub fn stabilization(&self) -> StabilizationConfig {
        let s = &self.stabilization;
        StabilizationConfig::new(s.projected_per_mode, &s.phases, s.moment_order)
    }

    pub fn optimizer(&self, seed_override: Option<u64>) -> OptimizerOptions {
        OptimizerOptions {
            starts: self.optimizer.starts,
            max_iterations: self.optimizer.max_iterations,
            seed: seed_override.unwrap_or(self.seed),
            ..OptimizerOptions::default()
        }
    }

    pub fn echo(&self) -> Result<&EchoSection, CliError> {
        self.echo.as_ref().ok_or_else(|| missing("echo"))
    }

    pub fn validate_section(&self, modes: &ModeSet) -> Result<&ValidateSection, CliError> {
        let v = self.validate.as_ref().ok_or_else(|| missing("validate"))?;
        if let Some(bad) = v.modes.iter().find(|&&l| l >= modes.num_modes()) {
            return Err(CliError::Config(format!("validate.modes: index {bad} out of range")));
        }
        if v.modes.is_empty() {
            return Err(CliError::Config("validate.modes must list at least one mode".into()));
        }
        Ok(v)
    }
}
