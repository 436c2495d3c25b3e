use std::f64::consts::TAU;
use std::fs::File;
use std::io::BufReader;
use std::path::Path;

use serde::Serialize;

use iongate::dynamics::{integrate_ms, max_entry_deviation, OracleConfig};
use iongate::echo::{
    build_partial, build_sequence, build_type_c, distinct_phases, expand_to_native, nonentangling_uniformity,
    simulate_ledger, EchoSequence, SequenceKind,
};
use iongate::permutation::cyclic_shift_swaps;
use iongate::phases::{ls_phase_table, ms_evolution, ms_phases, PulseShape, ZERO_ORDER_TOL};
use iongate::pulse::{
    optimize_pulse, read_pulse_csv, sensitivity_scan, write_pulse_csv, write_scan_csv, OptimizationResult, PulseError,
};

use crate::config::JobConfig;
use crate::manifest::OutDir;
use crate::{Cli, CliError, Command};

pub fn dispatch(cli: &Cli) -> Result<(), CliError> {
    if let Command::Shift { d, m } = cli.command {
        print!("{}", shift_text(d, m)?);
        return Ok(());
    }
    let path = cli.config.as_deref().ok_or_else(|| CliError::Config("--config is required".into()))?;
    let (cfg, text) = JobConfig::load(path)?;
    let mut out = OutDir::create(&cli.out)?;
    let name = match &cli.command {
        Command::Modes => {
            modes(&cfg, &mut out)?;
            "modes"
        }
        Command::Shape => {
            let res = shape(&cfg, cli.seed, &mut out);
            let seed = Some(cli.seed.unwrap_or(cfg.seed));
            out.finish("shape", Some(&text), seed)?;
            return res;
        }
        Command::Scan { pulse } => {
            scan(&cfg, pulse, &mut out)?;
            "scan"
        }
        Command::Echo => {
            echo(&cfg, &mut out)?;
            "echo"
        }
        Command::Validate { pulse } => {
            let res = validate(&cfg, pulse, &mut out);
            out.finish("validate", Some(&text), None)?;
            return res;
        }
        Command::Shift { .. } => unreachable!("handled above"),
    };
    out.finish(name, Some(&text), None)
}

pub fn shift_text(d: usize, m: i64) -> Result<String, CliError> {
    let seq = cyclic_shift_swaps(d, m).map_err(|e| CliError::Validation(e.to_string()))?;
    let list: Vec<String> = seq.swaps.iter().map(|s| s.to_string()).collect();
    Ok(format!("d={d} m={} swaps={}\n{}\n", seq.m, seq.len(), list.join(" ")))
}

fn pulse_error(e: PulseError) -> CliError {
    match e {
        PulseError::NoConvergence(_) => CliError::NoConvergence(e.to_string()),
        PulseError::Io(msg) => CliError::Io(msg),
        other => CliError::Validation(other.to_string()),
    }
}

fn modes(cfg: &JobConfig, out: &mut OutDir) -> Result<(), CliError> {
    let modes = cfg.modes()?;
    let mut buf = Vec::new();
    modes.write_csv(&mut buf)?;
    out.write("modes.csv", &buf)
}

#[derive(Debug, Serialize)]
pub struct ShapeReport {
    pub converged: bool,
    pub ions: (usize, usize),
    pub target_chi: f64,
    pub chi_11: f64,
    pub chi_12: f64,
    pub chi_22: f64,
    pub max_alpha: f64,
    /// `||Omega||_2 / 2pi`, Hz
    pub power_norm_hz: f64,
    /// `Omega_max / 2pi`, Hz
    pub max_rabi_hz: f64,
    pub phase_residual: f64,
    pub linear_residual: f64,
    pub iterations: usize,
    pub projected_columns: usize,
    pub free_dimension: usize,
    pub duration: f64,
    pub num_tones: usize,
    pub n_min: i64,
}

impl ShapeReport {
    fn new(r: &OptimizationResult, ions: (usize, usize)) -> Self {
        Self {
            converged: r.converged,
            ions,
            target_chi: r.target_chi,
            chi_11: r.phases.chi_11,
            chi_12: r.phases.chi_12,
            chi_22: r.phases.chi_22,
            max_alpha: r.max_alpha,
            power_norm_hz: r.power_norm / TAU,
            max_rabi_hz: r.max_rabi / TAU,
            phase_residual: r.residuals.phase,
            linear_residual: r.residuals.linear,
            iterations: r.iterations,
            projected_columns: r.projected_columns,
            free_dimension: r.free_dimension,
            duration: r.pulse.basis.duration,
            num_tones: r.pulse.basis.num_tones,
            n_min: r.pulse.basis.n_min,
        }
    }
}

fn shape(cfg: &JobConfig, seed: Option<u64>, out: &mut OutDir) -> Result<(), CliError> {
    let modes = cfg.modes()?;
    let basis = cfg.basis(&modes)?;
    let target = cfg.target(&modes)?;
    let stab = cfg.stabilization();
    let opts = cfg.optimizer(seed);
    let (result, failure) = match optimize_pulse(&basis, &modes, target.ions, target.chi, &stab, &opts) {
        Ok(r) => (r, None),
        Err(PulseError::NoConvergence(r)) => {
            let msg = format!(
                "optimizer did not converge (phase residual {:.3e}, linear residual {:.3e})",
                r.residuals.phase, r.residuals.linear
            );
            (*r, Some(CliError::NoConvergence(msg)))
        }
        Err(e) => return Err(pulse_error(e)),
    };
    let mut buf = Vec::new();
    write_pulse_csv(&result.pulse, &mut buf).map_err(pulse_error)?;
    out.write("pulse.csv", &buf)?;
    out.write_json("shape.json", &ShapeReport::new(&result, target.ions))?;
    failure.map_or(Ok(()), Err)
}

fn load_pulse(cfg: &JobConfig, path: &Path) -> Result<PulseShape, CliError> {
    let modes = cfg.modes()?;
    let basis = cfg.basis(&modes)?;
    let f = File::open(path).map_err(|e| CliError::Io(format!("{}: {e}", path.display())))?;
    read_pulse_csv(BufReader::new(f), &basis).map_err(pulse_error)
}

fn scan(cfg: &JobConfig, pulse_path: &Path, out: &mut OutDir) -> Result<(), CliError> {
    let pulse = load_pulse(cfg, pulse_path)?;
    let trap = cfg.trap()?;
    let modes = cfg.modes()?;
    let target = cfg.target(&modes)?;
    let points = sensitivity_scan(&pulse, &trap, target.ions, &cfg.scan.offsets(), cfg.scan.normalization)
        .map_err(pulse_error)?;
    let mut buf = Vec::new();
    write_scan_csv(&points, &mut buf).map_err(pulse_error)?;
    out.write("scan.csv", &buf)
}

#[derive(Debug, Serialize)]
pub struct EchoBlock {
    pub phase: f64,
    pub states: Vec<(usize, usize)>,
}

#[derive(Debug, Serialize)]
pub struct EchoReport {
    pub kind: SequenceKind,
    pub d: usize,
    pub ls_applications: usize,
    pub native_rotations_per_ion: [usize; 2],
    pub distinct_phases: usize,
    pub blocks: Vec<EchoBlock>,
    pub nonentangling_global: bool,
    pub nonentangling_spread: f64,
}

pub fn echo_sequence(cfg: &JobConfig) -> Result<EchoSequence, CliError> {
    let e = cfg.echo()?;
    let seq = match (e.kind, e.end_shift) {
        (SequenceKind::C, Some(end)) => build_type_c(e.d, end),
        (SequenceKind::CPartial, _) => build_partial(e.d),
        (kind, _) => build_sequence(kind, e.d),
    };
    seq.map_err(|err| CliError::Validation(err.to_string()))
}

fn echo(cfg: &JobConfig, out: &mut OutDir) -> Result<(), CliError> {
    let e = cfg.echo()?;
    let seq = echo_sequence(cfg)?;
    let profile = e.profile()?;
    let table = ls_phase_table(e.chi_12, e.chi_11, e.chi_22, &profile, ZERO_ORDER_TOL)
        .map_err(|err| CliError::Config(format!("echo: {err}")))?;
    let fail = |err: iongate::echo::EchoError| CliError::Validation(err.to_string());
    let ledger = simulate_ledger(&seq, &table).map_err(fail)?;
    let blocks = distinct_phases(&ledger, e.tolerance);
    let uniformity = nonentangling_uniformity(&seq, &table).map_err(fail)?;
    let native = expand_to_native(&seq);

    out.write("sequence.txt", seq.to_program().as_bytes())?;
    let mut buf = Vec::new();
    ledger.write_csv(&mut buf).map_err(fail)?;
    out.write("ledger.csv", &buf)?;
    let report = EchoReport {
        kind: seq.kind,
        d: seq.d,
        ls_applications: native.ls_count,
        native_rotations_per_ion: native.rotations_per_ion,
        distinct_phases: blocks.len(),
        blocks: blocks.into_iter().map(|b| EchoBlock { phase: b.phase, states: b.states }).collect(),
        nonentangling_global: uniformity.is_global,
        nonentangling_spread: uniformity.spread,
    };
    out.write_json("echo.json", &report)
}

#[derive(Debug, Serialize)]
pub struct ValidateReport {
    pub modes: Vec<usize>,
    pub d: usize,
    pub fock_cutoff: usize,
    pub steps: usize,
    pub max_entry_deviation: f64,
    pub half_step_deviation: f64,
    pub motional_leakage: f64,
    pub truncation_population: f64,
    pub isometry_error: f64,
    pub passed: bool,
}

fn validate(cfg: &JobConfig, pulse_path: &Path, out: &mut OutDir) -> Result<(), CliError> {
    let pulse = load_pulse(cfg, pulse_path)?;
    let full = cfg.modes()?;
    let target = cfg.target(&full)?;
    let v = cfg.validate_section(&full)?;
    let modes = full.select(&v.modes);
    let oracle =
        OracleConfig { fock_cutoff: v.fock_cutoff, steps_per_period: v.steps_per_period, ..OracleConfig::default() };
    let coarse = OracleConfig { steps_per_period: (v.steps_per_period / 2).max(1), ..oracle };
    let phases = ms_phases(&pulse, &modes, target.ions).map_err(|e| CliError::Validation(e.to_string()))?;
    let want = ms_evolution(&phases, &vec![0.0; v.d], v.d).map_err(|e| CliError::Config(format!("validate: {e}")))?;
    let run = |c: &OracleConfig| {
        integrate_ms(&pulse, &modes, target.ions, v.d, c).map_err(|e| CliError::Validation(format!("oracle: {e}")))
    };
    let fine = run(&oracle)?;
    let half = run(&coarse)?;
    let deviation = max_entry_deviation(&fine.operator, &want);
    let passed = deviation < v.entry_tolerance && fine.motional_leakage < v.leakage_tolerance;
    out.write_json(
        "validate.json",
        &ValidateReport {
            modes: v.modes.clone(),
            d: v.d,
            fock_cutoff: v.fock_cutoff,
            steps: fine.steps,
            max_entry_deviation: deviation,
            half_step_deviation: max_entry_deviation(&half.operator, &want),
            motional_leakage: fine.motional_leakage,
            truncation_population: fine.truncation_population,
            isometry_error: fine.isometry_error,
            passed,
        },
    )?;
    if passed {
        Ok(())
    } else {
        Err(CliError::Validation(format!(
            "oracle deviation {deviation:.3e} or leakage {:.3e} above tolerance",
            fine.motional_leakage
        )))
    }
}
