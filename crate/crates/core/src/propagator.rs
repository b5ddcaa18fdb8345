//! Piecewise-exponential propagation of states and density matrices.

use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::csvout::number;
use crate::error::{invalid, Error, Result};
use crate::hamiltonian::{Drive, HamiltonianModel};
use crate::pulses::TwoTonePulse;
use crate::qstate::{
    apply, conjugate_evolve, expm_i, frobenius, mat_add, mat_adjoint, mat_identity, mat_mul, mat_scale, mat_sub,
    DensityMatrix, Mat3, Operator, StateVector, C64,
};

pub const DEFAULT_TOL: f64 = 1e-10;
const NORM_DRIFT_LIMIT: f64 = 1e-9;
const MAX_HALVINGS: u32 = 24;

/// Sampling grid `t0, t0 + dt, …, t1` in local pulse time; the last
/// interval may be shorter than `dt`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct TimeGrid {
    pub t0: f64,
    pub t1: f64,
    pub dt: f64,
}

impl TimeGrid {
    pub fn new(t0: f64, t1: f64, dt: f64) -> Result<Self> {
        if !(t0.is_finite() && t1.is_finite() && dt.is_finite()) {
            return Err(Error::NonFinite("time grid".into()));
        }
        if !(t1 > t0) {
            return Err(invalid(format!("time grid needs t1 > t0 (t0 = {t0}, t1 = {t1})")));
        }
        if !(dt > 0.0) {
            return Err(invalid("time grid step must be positive"));
        }
        if (t1 - t0) / dt < 2.0 * (1.0 - 1e-12) {
            return Err(invalid("time grid must contain at least two steps"));
        }
        Ok(TimeGrid { t0, t1, dt })
    }

    /// The pulse's own sample grid over `[0, t_p]`.
    pub fn for_pulse(pulse: &TwoTonePulse) -> Result<Self> {
        TimeGrid::new(0.0, pulse.duration(), pulse.sample_step())
    }

    pub fn intervals(&self) -> usize {
        ((self.t1 - self.t0) / self.dt - 1e-9).ceil() as usize
    }

    pub fn times(&self) -> Vec<f64> {
        let n = self.intervals();
        (0..=n)
            .map(|k| if k == n { self.t1 } else { self.t0 + k as f64 * self.dt })
            .collect()
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Scheme {
    /// Exponential of `H` at the substep midpoint; second order.
    Midpoint,
    /// Two-point Gauss–Legendre Magnus expansion; fourth order.
    #[default]
    Magnus4,
}

impl Scheme {
    fn order(self) -> i32 {
        match self {
            Scheme::Midpoint => 2,
            Scheme::Magnus4 => 4,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum InitialState {
    Pure(StateVector),
    Mixed(DensityMatrix),
}

impl From<StateVector> for InitialState {
    fn from(s: StateVector) -> Self {
        InitialState::Pure(s)
    }
}

impl From<DensityMatrix> for InitialState {
    fn from(r: DensityMatrix) -> Self {
        InitialState::Mixed(r)
    }
}

#[derive(Clone, Debug, PartialEq)]
pub enum TrajectoryStates {
    Pure(Vec<StateVector>),
    Mixed(Vec<DensityMatrix>),
}

#[derive(Clone, Debug, PartialEq)]
pub struct Trajectory {
    pub times: Vec<f64>,
    pub populations: Vec<[f64; 3]>,
    pub states: Option<TrajectoryStates>,
}

impl Trajectory {
    pub fn final_populations(&self) -> [f64; 3] {
        *self.populations.last().expect("trajectory is never empty")
    }

    pub fn max_norm_deviation(&self) -> f64 {
        self.populations
            .iter()
            .map(|p| (p[0] + p[1] + p[2] - 1.0).abs())
            .fold(0.0, f64::max)
    }

    /// Maximum of one population column.
    pub fn max_population(&self, level: usize) -> f64 {
        self.populations.iter().map(|p| p[level]).fold(f64::MIN, f64::max)
    }

    /// Peak-to-peak swing of one population over times `t ≥ from`.
    pub fn swing_after(&self, level: usize, from: f64) -> f64 {
        let vals: Vec<f64> = self
            .times
            .iter()
            .zip(&self.populations)
            .filter(|(t, _)| **t >= from)
            .map(|(_, p)| p[level])
            .collect();
        let hi = vals.iter().copied().fold(f64::MIN, f64::max);
        let lo = vals.iter().copied().fold(f64::MAX, f64::min);
        hi - lo
    }

    /// CSV with columns `t_us, p_plus1, p_0, p_minus1`.
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = crate::csvout::writer(out);
        w.write_record(["t_us", "p_plus1", "p_0", "p_minus1"])?;
        for (t, p) in self.times.iter().zip(&self.populations) {
            w.write_record([number(t * 1e6), number(p[0]), number(p[1]), number(p[2])])?;
        }
        w.flush()?;
        Ok(())
    }
}

/// Adaptive piecewise-exponential integrator.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Integrator {
    pub scheme: Scheme,
    pub tol: f64,
}

impl Default for Integrator {
    fn default() -> Self {
        Integrator {
            scheme: Scheme::default(),
            tol: DEFAULT_TOL,
        }
    }
}

impl Integrator {
    pub fn new(tol: f64) -> Result<Self> {
        let i = Integrator {
            scheme: Scheme::default(),
            tol,
        };
        i.validate()?;
        Ok(i)
    }

    pub fn with_scheme(mut self, scheme: Scheme) -> Self {
        self.scheme = scheme;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if !(1e-12..=1e-6).contains(&self.tol) {
            return Err(invalid(format!("tol must lie in [1e-12, 1e-6], got {}", self.tol)));
        }
        Ok(())
    }

    #[inline]
    fn single(&self, drive: &Drive, pulse: &TwoTonePulse, t: f64, h: f64) -> Mat3 {
        match self.scheme {
            Scheme::Midpoint => expm_i(&drive.matrix_at(pulse, t + 0.5 * h), h),
            Scheme::Magnus4 => {
                const C: f64 = 0.288_675_134_594_812_9; // √3/6
                let h1 = drive.matrix_at(pulse, t + (0.5 - C) * h);
                let h2 = drive.matrix_at(pulse, t + (0.5 + C) * h);
                let avg = mat_scale(&mat_add(&h1, &h2), C64::new(0.5, 0.0));
                // H₁H₂ = (H₂H₁)† for Hermitian factors
                let p = mat_mul(&h2, &h1);
                let comm = mat_sub(&p, &mat_adjoint(&p));
                // −i·(√3/12)·h·[H2, H1]
                let corr = mat_scale(&comm, C64::new(0.0, -0.5 * C * h));
                expm_i(&mat_add(&avg, &corr), h)
            }
        }
    }

    /// Step doubling: `coarse` is the single step over `[t, t + h]`.
    fn adaptive(&self, drive: &Drive, pulse: &TwoTonePulse, t: f64, h: f64, coarse: Mat3, depth: u32) -> Result<Mat3> {
        let left = self.single(drive, pulse, t, 0.5 * h);
        let right = self.single(drive, pulse, t + 0.5 * h, 0.5 * h);
        let fine = mat_mul(&right, &left);
        let est = frobenius(&mat_sub(&fine, &coarse)) / (2f64.powi(self.scheme.order()) - 1.0);
        if !est.is_finite() {
            return Err(Error::NonFinite(format!("propagator at t = {t:e}")));
        }
        if est <= self.tol {
            return Ok(fine);
        }
        if depth >= MAX_HALVINGS {
            return Err(Error::ConvergenceFailure {
                time: pulse.start + t,
                step: h,
                estimate: est,
                tol: self.tol,
            });
        }
        let a = self.adaptive(drive, pulse, t, 0.5 * h, left, depth + 1)?;
        let b = self.adaptive(drive, pulse, t + 0.5 * h, 0.5 * h, right, depth + 1)?;
        Ok(mat_mul(&b, &a))
    }

    /// Propagator over `[a, b]` of local time.
    fn interval(&self, model: &HamiltonianModel, drive: &Drive, pulse: &TwoTonePulse, a: f64, b: f64) -> Result<Mat3> {
        let span = b - a;
        let n = match model.max_substep(pulse) {
            Some(cap) => (span / cap - 1e-9).ceil().max(1.0) as usize,
            None => 1,
        };
        let h = span / n as f64;
        let mut u = mat_identity();
        for k in 0..n {
            let t = a + k as f64 * h;
            let coarse = self.single(drive, pulse, t, h);
            let step = self.adaptive(drive, pulse, t, h, coarse, 0)?;
            u = mat_mul(&step, &u);
        }
        Ok(u)
    }

    /// Total unitary over the grid.
    pub fn propagator(&self, model: &HamiltonianModel, pulse: &TwoTonePulse, grid: &TimeGrid) -> Result<Operator> {
        self.validate()?;
        model.check_pulse(pulse)?;
        let drive = model.drive(pulse);
        let times = grid.times();
        let mut u = mat_identity();
        for w in times.windows(2) {
            let step = self.interval(model, &drive, pulse, w[0], w[1])?;
            u = mat_mul(&step, &u);
        }
        Operator::propagator(u)
    }

    /// Total unitary over the pulse's own sample grid.
    pub fn pulse_propagator(&self, model: &HamiltonianModel, pulse: &TwoTonePulse) -> Result<Operator> {
        self.propagator(model, pulse, &TimeGrid::for_pulse(pulse)?)
    }

    pub fn evolve(
        &self,
        model: &HamiltonianModel,
        pulse: &TwoTonePulse,
        init: impl Into<InitialState>,
        grid: &TimeGrid,
    ) -> Result<Trajectory> {
        self.validate()?;
        model.check_pulse(pulse)?;
        let drive = model.drive(pulse);
        let times = grid.times();
        let mut populations = Vec::with_capacity(times.len());
        let states = match init.into() {
            InitialState::Pure(mut s) => {
                let mut out = Vec::with_capacity(times.len());
                out.push(s);
                populations.push(s.populations());
                for w in times.windows(2) {
                    let u = Operator::from_raw_propagator(self.interval(model, &drive, pulse, w[0], w[1])?);
                    s = apply(&u, &s)?;
                    out.push(s);
                    populations.push(s.populations());
                }
                TrajectoryStates::Pure(out)
            }
            InitialState::Mixed(mut r) => {
                let mut out = Vec::with_capacity(times.len());
                out.push(r);
                populations.push(r.populations());
                for w in times.windows(2) {
                    let u = Operator::from_raw_propagator(self.interval(model, &drive, pulse, w[0], w[1])?);
                    r = conjugate_evolve(&u, &r)?;
                    out.push(r);
                    populations.push(r.populations());
                }
                TrajectoryStates::Mixed(out)
            }
        };
        let traj = Trajectory {
            times,
            populations,
            states: Some(states),
        };
        let drift = traj.max_norm_deviation();
        if drift > NORM_DRIFT_LIMIT {
            return Err(Error::ContractViolation(format!(
                "trajectory norm drifted by {drift:.3e}"
            )));
        }
        Ok(traj)
    }
}

/// Trajectory of `init` under `model` and `pulse`, sampled on `grid`.
pub fn evolve(
    model: &HamiltonianModel,
    pulse: &TwoTonePulse,
    init: impl Into<InitialState>,
    grid: &TimeGrid,
    tol: f64,
) -> Result<Trajectory> {
    Integrator::new(tol)?.evolve(model, pulse, init, grid)
}

/// Total unitary of `pulse` over `grid`.
pub fn propagator_of(model: &HamiltonianModel, pulse: &TwoTonePulse, grid: &TimeGrid, tol: f64) -> Result<Operator> {
    Integrator::new(tol)?.propagator(model, pulse, grid)
}

/// Field-free rotating-frame evolution `diag(1, e^{iΔτ}, 1)`.
pub fn free_evolution(tau: f64, delta: f64) -> Result<Operator> {
    free_evolution_detuned(tau, delta, 0.0)
}

/// Field-free evolution including a two-photon detuning, `diag(1, e^{iΔτ}, e^{iδτ})`.
pub fn free_evolution_detuned(tau: f64, delta: f64, two_photon: f64) -> Result<Operator> {
    if !(tau >= 0.0) {
        return Err(invalid(format!("tau must be >= 0, got {tau}")));
    }
    Ok(Operator::phases([0.0, delta * tau, two_photon * tau]))
}
