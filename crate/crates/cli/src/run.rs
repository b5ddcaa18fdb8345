//! Experiment runners. Each produces its CSV datasets in memory plus a set
//! of derived quantities; [`run`] writes them next to a JSON sidecar.

use std::fs;
use std::path::{Path, PathBuf};
use std::time::{SystemTime, UNIX_EPOCH};

use log::{info, warn};
use serde_json::{json, Map, Value};
use stirap_core::analysis::{fft_spectrum, rabi_spectrum, robustness_map};
use stirap_core::csvout::number;
use stirap_core::ensemble::evolve_averaged;
use stirap_core::propagator::InitialState;
use stirap_core::pulses::{pulse_area, write_waveform_csv};
use stirap_core::qstate::{DensityMatrix, Level, StateVector};
use stirap_core::ramsey::{fringe_scan, tau_grid, RamseySequence};

use crate::config::{Experiment, RunConfig};
use crate::error::CliError;

pub const METADATA_FILE: &str = "metadata.json";

pub struct Output {
    /// `(file name, contents)` in write order.
    pub datasets: Vec<(String, Vec<u8>)>,
    pub derived: Map<String, Value>,
}

fn csv_bytes(f: impl FnOnce(&mut Vec<u8>) -> stirap_core::Result<()>) -> stirap_core::Result<Vec<u8>> {
    let mut buf = Vec::new();
    f(&mut buf)?;
    Ok(buf)
}

fn initial_state(p: [f64; 3]) -> stirap_core::Result<InitialState> {
    for level in Level::ALL {
        if p[level.index()] == 1.0 {
            return Ok(StateVector::basis(level).into());
        }
    }
    Ok(DensityMatrix::diagonal(p)?.into())
}

fn dynamics(c: &RunConfig) -> stirap_core::Result<Output> {
    let pulse = c.pulse()?;
    let grid = c.time_grid(&pulse)?;
    let model = c.model();
    let integ = c.integrator();
    let init = initial_state(c.dynamics.initial_populations)?;
    let peak = pulse.peak_effective();
    let ensemble = c.ensemble(peak)?;
    let traj = if ensemble.sigma == 0.0 {
        integ.evolve(&model, &pulse, init, &grid)?
    } else {
        evolve_averaged(&integ, &model, &pulse, init, &grid, &ensemble)?
    };
    let params = c.pulse_params()?;
    let mut derived = Map::new();
    derived.insert("omega0_rad_per_s".into(), json!(params.omega0));
    derived.insert("peak_effective_rad_per_s".into(), json!(peak));
    derived.insert("duration_s".into(), json!(pulse.duration()));
    derived.insert("pulse_area_rad".into(), json!(pulse_area(&pulse)));
    derived.insert("ensemble_sigma_rad_per_s".into(), json!(ensemble.sigma));
    derived.insert("final_populations".into(), json!(traj.final_populations()));
    derived.insert("max_p0".into(), json!(traj.max_population(Level::Zero.index())));
    derived.insert("samples".into(), json!(traj.times.len()));
    Ok(Output {
        datasets: vec![("trajectory.csv".into(), csv_bytes(|b| traj.write_csv(b))?)],
        derived,
    })
}

fn demeaned(x: &[f64]) -> Vec<f64> {
    let mean = x.iter().sum::<f64>() / x.len() as f64;
    x.iter().map(|v| v - mean).collect()
}

fn fringes(c: &RunConfig) -> stirap_core::Result<Output> {
    let params = c.ramsey_params()?;
    let seq = RamseySequence::new(params, 0.0)?;
    let ensemble = seq.ensemble(c.ensemble.fwhm_fraction, c.ensemble.nodes)?;
    let f = &c.fringes;
    let dtau = f.dtau_ns * 1e-9;
    let taus = tau_grid(f.tau0_us * 1e-6, dtau, f.count)?;
    let scan = fringe_scan(&seq, &taus, &c.model(), &c.readout(), &ensemble, &c.integrator())?;
    let spectrum = fft_spectrum(&demeaned(&scan.in_phase()), dtau, c.fringe_window())?;
    let mut derived = Map::new();
    if let Some((_, f_peak, a)) = spectrum.peak_above(spectrum.bin_width()) {
        derived.insert("in_phase_peak_hz".into(), json!(f_peak));
        derived.insert("in_phase_peak_amplitude".into(), json!(a));
    }
    derived.insert("bin_width_hz".into(), json!(spectrum.bin_width()));
    derived.insert("beat_hz".into(), json!(params.transitions.f1 - params.transitions.f2));
    derived.insert("preparation_time_s".into(), json!(seq.preparation_time()));
    derived.insert("ensemble_sigma_rad_per_s".into(), json!(ensemble.sigma));
    Ok(Output {
        datasets: vec![
            ("fringes.csv".into(), csv_bytes(|b| scan.write_csv(b))?),
            ("fringe_spectrum.csv".into(), csv_bytes(|b| spectrum.write_csv(b))?),
        ],
        derived,
    })
}

fn map(c: &RunConfig) -> stirap_core::Result<Output> {
    let setup = c.map_setup()?;
    let (delta, omega) = c.map_axes()?;
    let map = robustness_map(&setup, &delta, &omega)?;
    let missing = map.missing();
    if missing > 0 {
        warn!(
            "{missing} of {} map cells failed and are written as NaN",
            map.cells.len()
        );
    }
    let mut derived = Map::new();
    derived.insert("tau_s".into(), json!(setup.tau));
    derived.insert("cells".into(), json!(map.cells.len()));
    derived.insert("missing_cells".into(), json!(missing));
    Ok(Output {
        datasets: vec![("map.csv".into(), csv_bytes(|b| map.write_csv(b))?)],
        derived,
    })
}

fn rabi(c: &RunConfig) -> stirap_core::Result<Output> {
    let setup = c.rabi_setup()?;
    let res = rabi_spectrum(&setup, &c.integrator())?;
    let signal = csv_bytes(|b| {
        let mut w = csv::WriterBuilder::new()
            .terminator(csv::Terminator::Any(b'\n'))
            .from_writer(b);
        w.write_record(["t_us", "p_0"])?;
        for (t, p) in res.times.iter().zip(&res.signal) {
            w.write_record([number(t * 1e6), number(*p)])?;
        }
        w.flush()?;
        Ok(())
    })?;
    let mut derived = Map::new();
    derived.insert("peak_hz".into(), json!(res.peak_hz));
    derived.insert("fwhm_hz".into(), json!(res.fwhm_hz));
    derived.insert("fwhm_over_peak".into(), json!(res.fwhm_hz / res.peak_hz));
    derived.insert("bin_width_hz".into(), json!(res.spectrum.bin_width()));
    Ok(Output {
        datasets: vec![
            ("rabi_signal.csv".into(), signal),
            ("rabi_spectrum.csv".into(), csv_bytes(|b| res.spectrum.write_csv(b))?),
        ],
        derived,
    })
}

fn waveform(c: &RunConfig) -> stirap_core::Result<Output> {
    let pulse = c.pulse()?;
    let mut derived = Map::new();
    derived.insert("duration_s".into(), json!(pulse.duration()));
    derived.insert("sample_step_s".into(), json!(pulse.sample_step()));
    derived.insert("peak_effective_rad_per_s".into(), json!(pulse.peak_effective()));
    Ok(Output {
        datasets: vec![("waveform.csv".into(), csv_bytes(|b| write_waveform_csv(&pulse, b))?)],
        derived,
    })
}

/// Runs the experiment on a pool of `threads` workers. No files are written.
pub fn simulate(c: &RunConfig, threads: usize) -> Result<Output, CliError> {
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build()
        .map_err(|e| CliError::Numeric(format!("cannot start worker pool: {e}")))?;
    let f = match c.experiment {
        Experiment::StirapDynamics => dynamics,
        Experiment::RamseyFringes => fringes,
        Experiment::RobustnessMap => map,
        Experiment::RabiSpectrum => rabi,
        Experiment::Waveform => waveform,
    };
    pool.install(|| f(c))
        .map_err(|e| CliError::from_core(c.experiment.name(), e))
}

fn write(path: &Path, bytes: &[u8]) -> Result<(), CliError> {
    fs::write(path, bytes).map_err(|e| CliError::Io(format!("cannot write {}: {e}", path.display())))
}

/// Sidecar contents: software versions, the resolved config and derived
/// quantities. The timestamp lives only here.
pub fn metadata(c: &RunConfig, out: &Output, threads: usize, created: u64) -> Value {
    json!({
        "software": {
            "name": "stirap",
            "version": env!("CARGO_PKG_VERSION"),
            "stirap_core": stirap_core::VERSION,
        },
        "created_unix_s": created,
        "threads": threads,
        "experiment": c.experiment,
        "datasets": out.datasets.iter().map(|(n, _)| n.clone()).collect::<Vec<_>>(),
        "config": c,
        "derived": out.derived,
    })
}

/// Simulates and writes every dataset plus [`METADATA_FILE`] to
/// `c.output`. Returns the written paths.
pub fn run(c: &RunConfig, threads: usize) -> Result<Vec<PathBuf>, CliError> {
    info!("running {} on {threads} thread(s)", c.experiment);
    let out = simulate(c, threads)?;
    let dir = PathBuf::from(&c.output);
    fs::create_dir_all(&dir).map_err(|e| CliError::Io(format!("cannot create {}: {e}", dir.display())))?;
    let mut written = Vec::new();
    for (name, bytes) in &out.datasets {
        let path = dir.join(name);
        write(&path, bytes)?;
        written.push(path);
    }
    let created = SystemTime::now()
        .duration_since(UNIX_EPOCH)
        .map(|d| d.as_secs())
        .unwrap_or(0);
    let meta = serde_json::to_string_pretty(&metadata(c, &out, threads, created)).expect("metadata serializes");
    let path = dir.join(METADATA_FILE);
    write(&path, (meta + "\n").as_bytes())?;
    written.push(path);
    Ok(written)
}
