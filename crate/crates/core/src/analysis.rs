//! Amplitude spectra, robustness maps over `(Δ, Ω)` and phase sensitivity.

use std::f64::consts::PI;
use std::io::Write;

use log::warn;
use num_complex::Complex64;
use rayon::prelude::*;
use rustfft::FftPlanner;
use serde::{Deserialize, Serialize};

use crate::csvout::number;
use crate::ensemble::{evolve_averaged, EnsembleSpec};
use crate::error::{invalid, Error, Result};
use crate::hamiltonian::{HamiltonianModel, HamiltonianVariant};
use crate::propagator::{InitialState, Integrator, TimeGrid};
use crate::pulses::{rectangular_pulse_sampled, Tones};
use crate::qstate::{Level, StateVector};
use crate::ramsey::{
    accumulated_phase, combine_iq, signals_at, wrap_pi, RamseyParams, RamseySequence, ReadoutModel, SequenceKind,
};

const TWO_PI: f64 = 2.0 * PI;

/// Radians per (rad/s) to degrees per kHz.
pub const RAD_PER_RADS_TO_DEG_PER_KHZ: f64 = 360e3;

/// Largest neighbour phase step accepted without asking for a finer grid.
pub const MAX_PHASE_STEP: f64 = PI / 2.0;

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Window {
    #[default]
    Rectangular,
    /// Periodic Hann, `½(1 − cos 2πn/N)`.
    Hann,
}

impl Window {
    pub fn coefficients(self, n: usize) -> Vec<f64> {
        match self {
            Window::Rectangular => vec![1.0; n],
            Window::Hann => (0..n)
                .map(|k| 0.5 * (1.0 - (TWO_PI * k as f64 / n as f64).cos()))
                .collect(),
        }
    }
}

/// One-sided amplitude spectrum. A sinusoid of amplitude `a` shows up with
/// height `a` at its bin, whatever the window.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Spectrum {
    pub freqs: Vec<f64>,
    pub amplitudes: Vec<f64>,
    pub window: Window,
}

impl Spectrum {
    pub fn bin_width(&self) -> f64 {
        self.freqs[1] - self.freqs[0]
    }

    /// Largest bin with frequency `≥ f_min`, as `(index, freq, amplitude)`.
    pub fn peak_above(&self, f_min: f64) -> Option<(usize, f64, f64)> {
        self.freqs
            .iter()
            .zip(&self.amplitudes)
            .enumerate()
            .filter(|(_, (f, _))| **f >= f_min)
            .fold(None, |best: Option<(usize, f64, f64)>, (k, (&f, &a))| match best {
                Some((_, _, b)) if b >= a => best,
                _ => Some((k, f, a)),
            })
    }

    /// Bin closest to `f`.
    pub fn nearest_bin(&self, f: f64) -> usize {
        let k = (f - self.freqs[0]) / self.bin_width();
        (k.round().max(0.0) as usize).min(self.freqs.len() - 1)
    }

    /// Largest amplitude within `±bins` of the bin closest to `f`.
    pub fn amplitude_near(&self, f: f64, bins: usize) -> f64 {
        let c = self.nearest_bin(f);
        let lo = c.saturating_sub(bins);
        let hi = (c + bins).min(self.freqs.len() - 1);
        self.amplitudes[lo..=hi].iter().copied().fold(0.0, f64::max)
    }

    /// Full width at half maximum of the line around bin `peak`, with
    /// linear interpolation of both half-height crossings.
    pub fn fwhm_around(&self, peak: usize) -> Result<f64> {
        let half = 0.5 * self.amplitudes[peak];
        let a = &self.amplitudes;
        let f = &self.freqs;
        let mut lo = peak;
        while lo > 0 && a[lo] > half {
            lo -= 1;
        }
        let mut hi = peak;
        while hi + 1 < a.len() && a[hi] > half {
            hi += 1;
        }
        if a[lo] > half || a[hi] > half {
            return Err(invalid("spectral line does not fall to half height inside the band"));
        }
        let cross = |i: usize, j: usize| f[i] + (half - a[i]) / (a[j] - a[i]) * (f[j] - f[i]);
        Ok(cross(hi - 1, hi) - cross(lo + 1, lo))
    }

    /// CSV with columns `freq_Hz, amplitude`.
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = crate::csvout::writer(out);
        w.write_record(["freq_Hz", "amplitude"])?;
        for (f, a) in self.freqs.iter().zip(&self.amplitudes) {
            w.write_record([number(*f), number(*a)])?;
        }
        w.flush()?;
        Ok(())
    }
}

/// Spectrum of `signal` sampled every `dt` seconds; bin spacing `1/(N·dt)`.
pub fn fft_spectrum(signal: &[f64], dt: f64, window: Window) -> Result<Spectrum> {
    fft_spectrum_padded(signal, dt, window, signal.len())
}

/// As [`fft_spectrum`], with the windowed record zero-padded to `len`
/// samples before the transform.
pub fn fft_spectrum_padded(signal: &[f64], dt: f64, window: Window, len: usize) -> Result<Spectrum> {
    let n = signal.len();
    if n < 8 {
        return Err(invalid(format!("a spectrum needs at least 8 samples, got {n}")));
    }
    if !(dt > 0.0 && dt.is_finite()) {
        return Err(invalid(format!("sample spacing must be positive, got {dt}")));
    }
    if len < n {
        return Err(invalid("padded length is shorter than the record"));
    }
    if signal.iter().any(|x| !x.is_finite()) {
        return Err(Error::NonFinite("spectrum input".into()));
    }
    let w = window.coefficients(n);
    let gain: f64 = w.iter().sum();
    let mut buf: Vec<Complex64> = signal.iter().zip(&w).map(|(x, c)| Complex64::new(x * c, 0.0)).collect();
    buf.resize(len, Complex64::new(0.0, 0.0));
    FftPlanner::new().plan_fft_forward(len).process(&mut buf);
    let half = len / 2;
    let amplitudes = (0..=half)
        .map(|k| {
            let edge = k == 0 || (len.is_multiple_of(2) && k == half);
            let s = if edge { 1.0 } else { 2.0 };
            s * buf[k].norm() / gain
        })
        .collect();
    let df = 1.0 / (len as f64 * dt);
    Ok(Spectrum {
        freqs: (0..=half).map(|k| k as f64 * df).collect(),
        amplitudes,
        window,
    })
}

/// Spectrum from explicit sample times, which must be uniformly spaced.
pub fn fft_spectrum_sampled(times: &[f64], signal: &[f64], window: Window) -> Result<Spectrum> {
    if times.len() != signal.len() {
        return Err(invalid("times and signal differ in length"));
    }
    if times.len() < 8 {
        return Err(invalid(format!(
            "a spectrum needs at least 8 samples, got {}",
            times.len()
        )));
    }
    let dt = (times[times.len() - 1] - times[0]) / (times.len() - 1) as f64;
    for (k, w) in times.windows(2).enumerate() {
        if ((w[1] - w[0]) - dt).abs() > 1e-6 * dt.abs() {
            return Err(Error::NonUniformSampling(format!(
                "step {k} is {:e} s against a mean of {dt:e} s",
                w[1] - w[0]
            )));
        }
    }
    fft_spectrum(signal, dt, window)
}

/// Everything held fixed across a robustness map.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct MapSetup {
    /// Sequence parameters; `omega` is replaced per cell.
    pub params: RamseyParams,
    pub tau: f64,
    pub variant: HamiltonianVariant,
    pub readout: ReadoutModel,
    /// Ensemble FWHM relative to the cell's Rabi frequency; 0 for a sharp one.
    pub fwhm_fraction: f64,
    pub nodes: usize,
    pub integrator: Integrator,
}

/// Tolerance used for map cells.
pub const MAP_TOL: f64 = 1e-8;

impl MapSetup {
    pub fn for_kind(kind: SequenceKind) -> Self {
        let tau = match kind {
            SequenceKind::Dq => 1.2e-3,
            SequenceKind::Stirap => 0.8e-3,
        };
        MapSetup {
            params: RamseyParams::for_kind(kind),
            tau,
            variant: HamiltonianVariant::AcZeeman,
            readout: ReadoutModel::default(),
            fwhm_fraction: crate::ensemble::DEFAULT_FWHM_FRACTION,
            nodes: crate::ensemble::DEFAULT_NODES,
            integrator: Integrator {
                tol: MAP_TOL,
                ..Integrator::default()
            },
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.params.validate()?;
        self.readout.validate()?;
        self.integrator.validate()?;
        if !(self.tau >= 0.0 && self.tau.is_finite()) {
            return Err(invalid(format!("tau must be >= 0, got {}", self.tau)));
        }
        if !(self.fwhm_fraction >= 0.0 && self.fwhm_fraction.is_finite()) {
            return Err(invalid("ensemble FWHM fraction must be >= 0"));
        }
        EnsembleSpec::from_fwhm_fraction(self.params.omega, self.fwhm_fraction, self.nodes)?;
        Ok(())
    }

    /// `(Φ, r)` at detuning `delta` and Rabi frequency `omega`.
    pub fn cell(&self, delta: f64, omega: f64) -> Result<(f64, f64)> {
        let params = RamseyParams { omega, ..self.params };
        let seq = RamseySequence::new(params, self.tau)?;
        let ensemble = seq.ensemble(self.fwhm_fraction, self.nodes)?;
        let model = HamiltonianModel {
            variant: self.variant,
            ..HamiltonianModel::plain(delta)
        };
        let r = signals_at(&seq, self.tau, &model, &self.readout, &ensemble, &self.integrator)?;
        let (i, q) = combine_iq(&r);
        accumulated_phase(i, q)
    }
}

/// Evenly spaced axis with `n` points from `lo` to `hi` inclusive.
pub fn linear_axis(lo: f64, hi: f64, n: usize) -> Result<Vec<f64>> {
    if n == 0 || !(lo.is_finite() && hi.is_finite()) {
        return Err(invalid("an axis needs finite bounds and at least one point"));
    }
    if n == 1 {
        return Ok(vec![lo]);
    }
    if hi <= lo {
        return Err(invalid("axis upper bound must exceed the lower bound"));
    }
    let step = (hi - lo) / (n - 1) as f64;
    Ok((0..n)
        .map(|k| if k + 1 == n { hi } else { lo + k as f64 * step })
        .collect())
}

/// `Δ/2π ∈ [−20, 20]` kHz, 41 points.
pub fn default_delta_axis() -> Vec<f64> {
    linear_axis(-TWO_PI * 20e3, TWO_PI * 20e3, 41).expect("valid axis")
}

/// `Ω/2π ∈ [10, 60]` kHz, 41 points.
pub fn default_omega_axis() -> Vec<f64> {
    linear_axis(TWO_PI * 10e3, TWO_PI * 60e3, 41).expect("valid axis")
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct MapCell {
    pub phi: f64,
    pub r: f64,
}

/// `(Φ, r)` over a grid; rows run along `Δ` at fixed `Ω`. Cells whose
/// propagation failed are `None`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RobustnessMap {
    pub kind: SequenceKind,
    pub delta_axis: Vec<f64>,
    pub omega_axis: Vec<f64>,
    pub cells: Vec<Option<MapCell>>,
}

impl RobustnessMap {
    pub fn cell(&self, i_delta: usize, i_omega: usize) -> Option<MapCell> {
        self.cells[i_omega * self.delta_axis.len() + i_delta]
    }

    pub fn missing(&self) -> usize {
        self.cells.iter().filter(|c| c.is_none()).count()
    }

    fn find(axis: &[f64], x: f64, name: &str) -> Result<usize> {
        let scale = axis.iter().fold(0.0f64, |m, v| m.max(v.abs())).max(1.0);
        axis.iter()
            .position(|v| (v - x).abs() <= 1e-9 * scale)
            .ok_or_else(|| invalid(format!("{name} = {x} is not a grid value")))
    }

    pub fn delta_index(&self, delta: f64) -> Result<usize> {
        Self::find(&self.delta_axis, delta, "delta")
    }

    pub fn omega_index(&self, omega: f64) -> Result<usize> {
        Self::find(&self.omega_axis, omega, "omega")
    }

    fn phi_at(&self, i_delta: usize, i_omega: usize) -> Result<f64> {
        self.cell(i_delta, i_omega).map(|c| c.phi).ok_or_else(|| {
            invalid(format!(
                "map cell (delta = {}, omega = {}) is missing",
                self.delta_axis[i_delta], self.omega_axis[i_omega]
            ))
        })
    }

    /// Φ along the `Δ` row at `i_omega`, unwrapped from the first cell.
    pub fn unwrapped_row(&self, i_omega: usize) -> Result<Vec<f64>> {
        let mut out = Vec::with_capacity(self.delta_axis.len());
        for i in 0..self.delta_axis.len() {
            let phi = self.phi_at(i, i_omega)?;
            match out.last() {
                None => out.push(phi),
                Some(&prev) => {
                    let step = wrap_pi(phi - prev);
                    if step.abs() > MAX_PHASE_STEP {
                        return Err(Error::RefineGrid { index: i, step });
                    }
                    out.push(prev + step);
                }
            }
        }
        Ok(out)
    }

    /// CSV in long format with columns `delta_Hz, omega_Hz, phi_rad, r`;
    /// missing cells are written as NaN.
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = crate::csvout::writer(out);
        w.write_record(["delta_Hz", "omega_Hz", "phi_rad", "r"])?;
        for (j, omega) in self.omega_axis.iter().enumerate() {
            for (i, delta) in self.delta_axis.iter().enumerate() {
                let (phi, r) = self.cell(i, j).map_or((f64::NAN, f64::NAN), |c| (c.phi, c.r));
                w.write_record([number(delta / TWO_PI), number(omega / TWO_PI), number(phi), number(r)])?;
            }
        }
        w.flush()?;
        Ok(())
    }
}

/// Evaluates every cell in parallel. The grid is assembled in axis order, so
/// the result does not depend on the thread count.
pub fn robustness_map(setup: &MapSetup, delta_axis: &[f64], omega_axis: &[f64]) -> Result<RobustnessMap> {
    setup.validate()?;
    if delta_axis.is_empty() || omega_axis.is_empty() {
        return Err(invalid("map axes must be nonempty"));
    }
    if delta_axis.iter().chain(omega_axis).any(|x| !x.is_finite()) {
        return Err(Error::NonFinite("map axis".into()));
    }
    let nd = delta_axis.len();
    let cells = (0..nd * omega_axis.len())
        .into_par_iter()
        .map(|k| {
            let (delta, omega) = (delta_axis[k % nd], omega_axis[k / nd]);
            match setup.cell(delta, omega) {
                Ok((phi, r)) => Some(MapCell { phi, r }),
                Err(e) => {
                    warn!(
                        "map cell delta/2pi = {} Hz, omega/2pi = {} Hz failed: {e}",
                        delta / TWO_PI,
                        omega / TWO_PI
                    );
                    None
                }
            }
        })
        .collect();
    Ok(RobustnessMap {
        kind: setup.params.kind,
        delta_axis: delta_axis.to_vec(),
        omega_axis: omega_axis.to_vec(),
        cells,
    })
}

/// `dΦ/dΔ` in degrees per kHz at an interior grid point, by central
/// difference of the unwrapped row.
pub fn phase_sensitivity(map: &RobustnessMap, delta: f64, omega: f64) -> Result<f64> {
    let i = map.delta_index(delta)?;
    let j = map.omega_index(omega)?;
    if i == 0 || i + 1 >= map.delta_axis.len() {
        return Err(invalid("phase sensitivity needs a point interior to the delta axis"));
    }
    let (a, b, c) = (map.phi_at(i - 1, j)?, map.phi_at(i, j)?, map.phi_at(i + 1, j)?);
    let (s1, s2) = (wrap_pi(b - a), wrap_pi(c - b));
    for (index, step) in [(i, s1), (i + 1, s2)] {
        if step.abs() > MAX_PHASE_STEP {
            return Err(Error::RefineGrid { index, step });
        }
    }
    let span = map.delta_axis[i + 1] - map.delta_axis[i - 1];
    Ok((s1 + s2) / span * RAD_PER_RADS_TO_DEG_PER_KHZ)
}

/// `Σ |wrap(Φ_{j+1} − Φ_j)|` along the `Ω` axis at a fixed `Δ`.
pub fn total_variation_along_omega(map: &RobustnessMap, delta: f64) -> Result<f64> {
    let i = map.delta_index(delta)?;
    let mut tv = 0.0;
    for j in 1..map.omega_axis.len() {
        tv += wrap_pi(map.phi_at(i, j)? - map.phi_at(i, j - 1)?).abs();
    }
    Ok(tv)
}

/// Rabi oscillation on the `|+1⟩ ↔ |0⟩` transition under an inhomogeneous
/// drive and its spectrum.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct RabiSetup {
    /// Mean Rabi frequency (rad/s).
    pub omega: f64,
    pub fwhm_fraction: f64,
    pub nodes: usize,
    /// Record length (s).
    pub duration: f64,
    /// Sample spacing (s).
    pub dt: f64,
    /// Zero-padding factor for the transform.
    pub padding: usize,
    pub window: Window,
    pub delta: f64,
}

impl Default for RabiSetup {
    fn default() -> Self {
        RabiSetup {
            omega: TWO_PI * 36.5e3,
            fwhm_fraction: crate::ensemble::DEFAULT_FWHM_FRACTION,
            nodes: 101,
            duration: 0.75e-3,
            dt: 0.5e-6,
            padding: 8,
            window: Window::Rectangular,
            delta: 0.0,
        }
    }
}

impl RabiSetup {
    pub fn validate(&self) -> Result<()> {
        EnsembleSpec::from_fwhm_fraction(self.omega, self.fwhm_fraction, self.nodes)?;
        if !(self.duration > 0.0 && self.dt > 0.0 && self.dt.is_finite()) {
            return Err(invalid("Rabi record needs positive duration and dt"));
        }
        if self.duration / self.dt < 8.0 {
            return Err(invalid("Rabi record needs at least 8 samples"));
        }
        if self.padding == 0 {
            return Err(invalid("padding factor must be >= 1"));
        }
        if !self.delta.is_finite() {
            return Err(Error::NonFinite("delta".into()));
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct RabiSpectrum {
    pub times: Vec<f64>,
    /// Ensemble-averaged `p₀(t)`.
    pub signal: Vec<f64>,
    pub spectrum: Spectrum,
    pub peak_hz: f64,
    pub fwhm_hz: f64,
}

/// Simulates the oscillation, removes its mean and extracts the dominant
/// line and its width from the spectrum of the record mirrored about t = 0.
pub fn rabi_spectrum(setup: &RabiSetup, integrator: &Integrator) -> Result<RabiSpectrum> {
    setup.validate()?;
    let samples = (setup.duration / setup.dt).round() as usize;
    let pulse = rectangular_pulse_sampled(setup.omega, samples as f64 * setup.dt, Tones::SinglePump, samples)?;
    let grid = TimeGrid::for_pulse(&pulse)?;
    let ensemble = EnsembleSpec::from_fwhm_fraction(setup.omega, setup.fwhm_fraction, setup.nodes)?;
    let init = InitialState::Pure(StateVector::basis(Level::Plus1));
    let traj = evolve_averaged(
        integrator,
        &HamiltonianModel::plain(setup.delta),
        &pulse,
        init,
        &grid,
        &ensemble,
    )?;
    let signal: Vec<f64> = traj.populations.iter().map(|p| p[1]).collect();
    let mean = signal.iter().sum::<f64>() / signal.len() as f64;
    // Every member starts its oscillation at phase zero, so the record is
    // mirrored about t = 0; the magnitude of its transform is then the cosine
    // transform, which carries the frequency distribution without the
    // Hilbert-transform skirt of a one-sided record.
    let centred: Vec<f64> = signal[1..].iter().rev().chain(&signal).map(|x| x - mean).collect();
    let spectrum = fft_spectrum_padded(&centred, setup.dt, setup.window, centred.len() * setup.padding)?;
    let (peak, peak_hz, _) = spectrum
        .peak_above(spectrum.bin_width())
        .ok_or_else(|| invalid("empty spectrum"))?;
    let fwhm_hz = spectrum.fwhm_around(peak)?;
    Ok(RabiSpectrum {
        times: traj.times,
        signal,
        spectrum,
        peak_hz,
        fwhm_hz,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn cosine(f: f64, dt: f64, n: usize) -> Vec<f64> {
        (0..n).map(|k| (TWO_PI * f * k as f64 * dt).cos()).collect()
    }

    #[test]
    fn cosine_peak_bin() {
        for w in [Window::Rectangular, Window::Hann] {
            let s = fft_spectrum(&cosine(292e3, 100e-9, 4096), 100e-9, w).unwrap();
            let (_, f, a) = s.peak_above(1.0).unwrap();
            assert!((f - 292e3).abs() <= s.bin_width(), "{f}");
            assert!(a > 0.4 && a <= 1.0 + 1e-12, "{a}");
            assert_abs_diff_eq!(s.bin_width(), 1.0 / (4096.0 * 100e-9), epsilon = 1e-6);
        }
    }

    #[test]
    fn on_bin_amplitude_is_exact() {
        let n = 1024;
        let dt = 1e-6;
        let f = 37.0 / (n as f64 * dt);
        let x: Vec<f64> = cosine(f, dt, n).iter().map(|c| 0.3 * c + 0.2).collect();
        let s = fft_spectrum(&x, dt, Window::Rectangular).unwrap();
        assert_abs_diff_eq!(s.amplitudes[37], 0.3, epsilon = 1e-12);
        assert_abs_diff_eq!(s.amplitudes[0], 0.2, epsilon = 1e-12);
        let h = fft_spectrum(&x, dt, Window::Hann).unwrap();
        assert_abs_diff_eq!(h.amplitudes[37], 0.3, epsilon = 1e-12);
    }

    #[test]
    fn constant_has_no_ac_content() {
        let s = fft_spectrum(&[2.5; 64], 1e-3, Window::Rectangular).unwrap();
        assert!(s.amplitudes[1..].iter().all(|a| *a <= 1e-10 * s.amplitudes[0]));
    }

    #[test]
    fn parseval() {
        let x: Vec<f64> = (0..500).map(|k| ((k * 7919) % 263) as f64 / 263.0 - 0.4).collect();
        for n in [x.len(), x.len() - 1] {
            let x = &x[..n];
            let s = fft_spectrum(x, 1.0, Window::Rectangular).unwrap();
            let last = s.amplitudes.len() - 1;
            let mut power = s.amplitudes[0].powi(2);
            for (k, a) in s.amplitudes.iter().enumerate().skip(1) {
                power += if n % 2 == 0 && k == last { a * a } else { 0.5 * a * a };
            }
            let direct: f64 = x.iter().map(|v| v * v).sum::<f64>() / n as f64;
            assert!(((power - direct) / direct).abs() < 1e-9, "{power} {direct}");
        }
    }

    #[test]
    fn spectrum_errors() {
        assert!(fft_spectrum(&[1.0; 7], 1.0, Window::Hann).is_err());
        let t: Vec<f64> = (0..16).map(|k| k as f64 * if k == 9 { 1.05 } else { 1.0 }).collect();
        assert!(matches!(
            fft_spectrum_sampled(&t, &[0.0; 16], Window::Rectangular),
            Err(Error::NonUniformSampling(_))
        ));
        let t: Vec<f64> = (0..16).map(|k| k as f64 * 0.1).collect();
        assert!(fft_spectrum_sampled(&t, &[0.0; 16], Window::Rectangular).is_ok());
    }

    #[test]
    fn fwhm_of_gaussian_line() {
        let freqs: Vec<f64> = (0..2001).map(|k| k as f64).collect();
        let sigma = 40.0;
        let amplitudes = freqs
            .iter()
            .map(|f| (-(f - 1000.0f64).powi(2) / (2.0 * sigma * sigma)).exp())
            .collect();
        let s = Spectrum {
            freqs,
            amplitudes,
            window: Window::Rectangular,
        };
        assert_abs_diff_eq!(s.fwhm_around(1000).unwrap(), sigma * 2.354_820_045, epsilon = 0.05);
    }

    fn toy_map(phi: impl Fn(f64, f64) -> f64) -> RobustnessMap {
        let delta_axis = linear_axis(-2.0, 2.0, 5).unwrap();
        let omega_axis = linear_axis(1.0, 3.0, 3).unwrap();
        let mut cells = Vec::new();
        for o in &omega_axis {
            for d in &delta_axis {
                cells.push(Some(MapCell {
                    phi: wrap_pi(phi(*d, *o)),
                    r: 1.0,
                }));
            }
        }
        RobustnessMap {
            kind: SequenceKind::Dq,
            delta_axis,
            omega_axis,
            cells,
        }
    }

    #[test]
    fn constant_map_is_insensitive() {
        let m = toy_map(|_, _| 0.7);
        assert_eq!(phase_sensitivity(&m, 0.0, 2.0).unwrap(), 0.0);
        assert_eq!(total_variation_along_omega(&m, 1.0).unwrap(), 0.0);
    }

    #[test]
    fn linear_map_slope_through_wrap() {
        // slope chosen so that the row crosses ±π
        let m = toy_map(|d, _| 3.0 + 0.5 * d);
        let s = phase_sensitivity(&m, 0.0, 1.0).unwrap();
        assert_abs_diff_eq!(s, 0.5 * RAD_PER_RADS_TO_DEG_PER_KHZ, epsilon = 1e-9);
        let row = m.unwrapped_row(0).unwrap();
        assert_abs_diff_eq!(row[4] - row[0], 2.0, epsilon = 1e-12);
    }

    #[test]
    fn coarse_map_asks_for_refinement() {
        let m = toy_map(|d, _| 2.0 * d);
        assert!(matches!(phase_sensitivity(&m, 0.0, 1.0), Err(Error::RefineGrid { .. })));
        assert!(phase_sensitivity(&m, 2.0, 1.0).is_err());
        assert!(phase_sensitivity(&m, 0.3, 1.0).is_err());
    }

    #[test]
    fn single_cell_map_matches_direct_phase() {
        let mut setup = MapSetup::for_kind(SequenceKind::Dq);
        setup.params.samples = 64;
        setup.fwhm_fraction = 0.0;
        setup.tau = 10e-6;
        let d = TWO_PI * 1e3;
        let m = robustness_map(&setup, &[d], &[setup.params.omega]).unwrap();
        let c = m.cell(0, 0).unwrap();
        let (phi, r) = setup.cell(d, setup.params.omega).unwrap();
        assert_eq!((c.phi, c.r), (phi, r));
    }

    #[test]
    fn failing_cells_are_missing() {
        let mut setup = MapSetup::for_kind(SequenceKind::Dq);
        setup.params.samples = 64;
        setup.fwhm_fraction = 0.0;
        // a negative Rabi frequency cannot build a pulse
        let m = robustness_map(&setup, &[0.0], &[-1.0, setup.params.omega]).unwrap();
        assert_eq!(m.missing(), 1);
        assert!(m.cell(0, 0).is_none() && m.cell(0, 1).is_some());
        let mut buf = Vec::new();
        m.write_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert!(text.starts_with("delta_Hz,omega_Hz,phi_rad,r\n"));
        assert!(text.lines().nth(1).unwrap().ends_with("NaN,NaN"));
    }

    #[test]
    fn rabi_line_tracks_the_distribution() {
        let setup = RabiSetup::default();
        let r = rabi_spectrum(&setup, &Integrator::default()).unwrap();
        let expected = setup.fwhm_fraction * setup.omega / TWO_PI;
        assert!((r.fwhm_hz / expected - 1.0).abs() < 0.15, "{} vs {expected}", r.fwhm_hz);
        assert!((r.peak_hz - setup.omega / TWO_PI).abs() < 2.0 * r.spectrum.bin_width());
        assert_eq!(r.signal.len(), r.times.len());
    }

    #[test]
    fn axes() {
        let a = default_delta_axis();
        assert_eq!(a.len(), 41);
        assert_abs_diff_eq!(a[20], 0.0, epsilon = 1e-9);
        assert_abs_diff_eq!(a[21] - a[20], TWO_PI * 1e3, epsilon = 1e-6);
        assert_eq!(default_omega_axis()[40], TWO_PI * 60e3);
        assert!(linear_axis(1.0, 0.0, 3).is_err());
    }
}
