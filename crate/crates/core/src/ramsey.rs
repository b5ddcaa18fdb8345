//! DQ and STIRAP 4-Ramsey sequences, phase cycling and readout.
//!
//! The τ scan runs in the lab frame: the final pulse starts at `t₁ + τ` on
//! the global clock and its tone phases are retarded by `ω_p·τ` and `ω_s·τ`.
//! The beat phase `η` of the cross-coupled model is then independent of τ,
//! so the final propagator at delay τ is the τ = 0 propagator conjugated by
//! `diag(e^{−iω_pτ}, 1, e^{−iω_sτ})`. [`SequenceKernel`] uses this to avoid
//! re-propagating the final pulse for every delay; [`run_sequence`] does
//! not, and serves as the reference path.

use std::f64::consts::{FRAC_1_SQRT_2, FRAC_PI_4, PI, SQRT_2};
use std::fmt;
use std::io::Write;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::csvout::number;
use crate::ensemble::{gaussian_average, EnsembleSpec};
use crate::error::{invalid, Error, Result};
use crate::hamiltonian::{HamiltonianModel, HamiltonianVariant};
use crate::propagator::{free_evolution_detuned, Integrator};
use crate::pulses::{
    half_stirap, rectangular_pulse_sampled, Ordering, PulseShapeParams, Tones, TwoTonePulse, DEFAULT_SAMPLES,
};
use crate::qstate::{apply, mat_vec, Level, Mat3, Operator, StateVector, C64};

const TWO_PI: f64 = 2.0 * PI;

fn wrap_2pi(x: f64) -> f64 {
    let r = x.rem_euclid(TWO_PI);
    if r >= TWO_PI {
        0.0
    } else {
        r
    }
}

/// Wraps to `(−π, π]`.
pub fn wrap_pi(x: f64) -> f64 {
    let r = wrap_2pi(x + PI) - PI;
    if r <= -PI {
        r + TWO_PI
    } else {
        r
    }
}

/// Tone phases of the first (`1`) and final (`2`) pulse, stored mod 2π.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct PhaseSetting {
    pub pump1: f64,
    pub stokes1: f64,
    pub pump2: f64,
    pub stokes2: f64,
}

impl PhaseSetting {
    pub fn new(pump1: f64, stokes1: f64, pump2: f64, stokes2: f64) -> Self {
        PhaseSetting {
            pump1: wrap_2pi(pump1),
            stokes1: wrap_2pi(stokes1),
            pump2: wrap_2pi(pump2),
            stokes2: wrap_2pi(stokes2),
        }
    }

    /// `φ_p2 − φ_s2` wrapped to `(−π, π]`.
    pub fn final_dq_phase(&self) -> f64 {
        wrap_pi(self.pump2 - self.stokes2)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum SequenceKind {
    #[serde(rename = "DQ")]
    Dq,
    #[serde(rename = "STIRAP")]
    Stirap,
}

impl FromStr for SequenceKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "DQ" => Ok(SequenceKind::Dq),
            "STIRAP" => Ok(SequenceKind::Stirap),
            other => Err(invalid(format!(
                "sequence kind must be \"DQ\" or \"STIRAP\", got {other:?}"
            ))),
        }
    }
}

impl fmt::Display for SequenceKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            SequenceKind::Dq => "DQ",
            SequenceKind::Stirap => "STIRAP",
        })
    }
}

/// The eight-entry phase cycle. Entries 1–4 invert the final tones through
/// `(0,0), (π,0), (π,π), (0,π)`; entries 5–8 add `+π/4` to the final pump
/// and `−π/4` to the final Stokes phase. Both kinds share the table.
pub fn phase_table(_kind: SequenceKind) -> [PhaseSetting; 8] {
    let base = [(0.0, 0.0), (PI, 0.0), (PI, PI), (0.0, PI)];
    let mut out = [PhaseSetting::new(0.0, 0.0, 0.0, 0.0); 8];
    for (k, &(p, s)) in base.iter().enumerate() {
        out[k] = PhaseSetting::new(0.0, 0.0, p, s);
        out[k + 4] = PhaseSetting::new(0.0, 0.0, p + FRAC_PI_4, s - FRAC_PI_4);
    }
    out
}

/// `r1 − r2 + r3 − r4`
pub fn four_phase_combine(r1: f64, r2: f64, r3: f64, r4: f64) -> f64 {
    r1 - r2 + r3 - r4
}

/// `(I, Q)` from the eight phase-cycled signals.
pub fn combine_iq(r: &[f64; 8]) -> (f64, f64) {
    (
        four_phase_combine(r[0], r[1], r[2], r[3]),
        four_phase_combine(r[4], r[5], r[6], r[7]),
    )
}

/// `Φ = atan2(Q, I) ∈ (−π, π]` and `r = |I + iQ|`.
pub fn accumulated_phase(i: f64, q: f64) -> Result<(f64, f64)> {
    if !(i.is_finite() && q.is_finite()) {
        return Err(Error::NonFinite("I/Q signal".into()));
    }
    if i == 0.0 && q == 0.0 {
        return Err(Error::UndefinedPhase);
    }
    let mut phi = q.atan2(i);
    if phi <= -PI {
        phi = PI;
    }
    Ok((phi, i.hypot(q)))
}

/// Transition frequencies `f₁` (`|+1⟩↔|0⟩`) and `f₂` (`|0⟩↔|−1⟩`) in Hz.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Transitions {
    pub f1: f64,
    pub f2: f64,
}

impl Default for Transitions {
    fn default() -> Self {
        Transitions {
            f1: 5.089e6,
            f2: 4.797e6,
        }
    }
}

impl Transitions {
    /// Tone frequencies `(ω₁ + Δ, ω₂ + Δ)` in rad/s.
    pub fn carriers(&self, delta: f64) -> (f64, f64) {
        (TWO_PI * self.f1 + delta, TWO_PI * self.f2 + delta)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.f1 > 0.0 && self.f2 > 0.0 && self.f1.is_finite() && self.f2.is_finite()) {
            return Err(invalid("transition frequencies must be positive"));
        }
        if self.f1 == self.f2 {
            return Err(invalid("transition frequencies must differ"));
        }
        Ok(())
    }
}

/// Relative optical brightness of `(|+1⟩, |0⟩, |−1⟩)`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ReadoutModel {
    pub brightness: [f64; 3],
}

impl Default for ReadoutModel {
    fn default() -> Self {
        ReadoutModel {
            brightness: [1.0, 0.9785, 0.9861],
        }
    }
}

impl ReadoutModel {
    pub fn new(brightness: [f64; 3]) -> Result<Self> {
        let r = ReadoutModel { brightness };
        r.validate()?;
        Ok(r)
    }

    pub fn validate(&self) -> Result<()> {
        if self.brightness.iter().any(|b| !(*b > 0.0 && *b <= 1.0)) {
            return Err(invalid("brightness coefficients must lie in (0, 1]"));
        }
        Ok(())
    }

    pub fn signal(&self, populations: &[f64; 3]) -> f64 {
        self.brightness.iter().zip(populations).map(|(b, p)| b * p).sum()
    }

    pub fn signal_of(&self, state: &StateVector) -> f64 {
        self.signal(&state.populations())
    }

    fn signal_raw(&self, v: &[C64; 3]) -> f64 {
        self.brightness[0] * v[0].norm_sqr()
            + self.brightness[1] * v[1].norm_sqr()
            + self.brightness[2] * v[2].norm_sqr()
    }
}

/// Sequence geometry. `omega` is the effective Rabi frequency `Ω_e` of the
/// two-tone pulses for the DQ kind and the peak `Ω_peak` of the half-STIRAP
/// pulses for the STIRAP kind.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct RamseyParams {
    pub kind: SequenceKind,
    pub omega: f64,
    pub t_p: f64,
    pub pi_phase: f64,
    pub transitions: Transitions,
    pub samples: usize,
}

impl RamseyParams {
    pub fn dq() -> Self {
        RamseyParams {
            kind: SequenceKind::Dq,
            omega: TWO_PI * 36.1e3,
            t_p: 13.9e-6,
            pi_phase: 0.0,
            transitions: Transitions::default(),
            samples: 512,
        }
    }

    pub fn stirap() -> Self {
        RamseyParams {
            kind: SequenceKind::Stirap,
            omega: TWO_PI * 36.1e3,
            t_p: 500e-6,
            pi_phase: 0.0,
            transitions: Transitions::default(),
            samples: DEFAULT_SAMPLES,
        }
    }

    pub fn for_kind(kind: SequenceKind) -> Self {
        match kind {
            SequenceKind::Dq => RamseyParams::dq(),
            SequenceKind::Stirap => RamseyParams::stirap(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.omega > 0.0 && self.omega.is_finite()) {
            return Err(invalid(format!(
                "sequence Rabi frequency must be positive, got {}",
                self.omega
            )));
        }
        if !(self.t_p > 0.0 && self.t_p.is_finite()) {
            return Err(invalid(format!("t_p must be positive, got {}", self.t_p)));
        }
        if self.samples < 2 {
            return Err(invalid("a pulse needs at least 2 sample intervals"));
        }
        if !self.pi_phase.is_finite() {
            return Err(Error::NonFinite("pi_phase".into()));
        }
        self.transitions.validate()
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum PulseRole {
    /// Single-tone π pulse of the DQ kind; phase fixed by `pi_phase`.
    Preparation,
    /// Takes `φ_p1, φ_s1`.
    First,
    /// Takes `φ_p2, φ_s2` plus the lab-frame advance.
    Final,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum SequenceElement {
    Pulse { pulse: TwoTonePulse, role: PulseRole },
    FreeEvolution { tau: f64 },
    Readout,
}

#[derive(Clone, Debug, PartialEq)]
pub struct RamseySequence {
    pub kind: SequenceKind,
    pub params: RamseyParams,
    pub elements: Vec<SequenceElement>,
    pub phase_table: [PhaseSetting; 8],
    pub tau: f64,
}

impl RamseySequence {
    /// DQ: π pulse on the pump tone at amplitude `Ω_e/√2` for `√2·t_p`,
    /// two-tone pulse, free evolution, two-tone pulse. STIRAP: half-STIRAP,
    /// free evolution, reversed half-STIRAP.
    pub fn new(params: RamseyParams, tau: f64) -> Result<Self> {
        params.validate()?;
        if !(tau >= 0.0 && tau.is_finite()) {
            return Err(invalid(format!("tau must be >= 0, got {tau}")));
        }
        let n = params.samples;
        let mut elements = Vec::with_capacity(5);
        match params.kind {
            SequenceKind::Dq => {
                let per_tone = params.omega * FRAC_1_SQRT_2;
                let pi = rectangular_pulse_sampled(per_tone, SQRT_2 * params.t_p, Tones::SinglePump, n)?;
                let split = rectangular_pulse_sampled(params.omega, params.t_p, Tones::TwoTone, n)?;
                elements.push(SequenceElement::Pulse {
                    pulse: pi,
                    role: PulseRole::Preparation,
                });
                elements.push(SequenceElement::Pulse {
                    pulse: split,
                    role: PulseRole::First,
                });
                elements.push(SequenceElement::FreeEvolution { tau });
                elements.push(SequenceElement::Pulse {
                    pulse: split,
                    role: PulseRole::Final,
                });
            }
            SequenceKind::Stirap => {
                let shape = PulseShapeParams::for_peak(params.omega, params.t_p, Ordering::SP)?.samples(n)?;
                elements.push(SequenceElement::Pulse {
                    pulse: half_stirap(&shape, false)?,
                    role: PulseRole::First,
                });
                elements.push(SequenceElement::FreeEvolution { tau });
                elements.push(SequenceElement::Pulse {
                    pulse: half_stirap(&shape, true)?,
                    role: PulseRole::Final,
                });
            }
        }
        elements.push(SequenceElement::Readout);
        Ok(RamseySequence {
            kind: params.kind,
            params,
            elements,
            phase_table: phase_table(params.kind),
            tau,
        })
    }

    pub fn with_tau(&self, tau: f64) -> Result<Self> {
        RamseySequence::new(self.params, tau)
    }

    /// Ensemble centred on the sequence amplitude.
    pub fn ensemble(&self, fwhm_fraction: f64, nodes: usize) -> Result<EnsembleSpec> {
        EnsembleSpec::from_fwhm_fraction(self.params.omega, fwhm_fraction, nodes)
    }

    fn check_ensemble(&self, ensemble: &EnsembleSpec) -> Result<()> {
        ensemble.validate()?;
        if ((ensemble.mean - self.params.omega) / self.params.omega).abs() > 1e-9 {
            return Err(invalid(format!(
                "ensemble mean {} differs from the sequence Rabi frequency {}",
                ensemble.mean, self.params.omega
            )));
        }
        Ok(())
    }

    fn phased(&self, role: PulseRole, setting: &PhaseSetting) -> (f64, f64) {
        match role {
            PulseRole::Preparation => (self.params.pi_phase, 0.0),
            PulseRole::First => (setting.pump1, setting.stokes1),
            PulseRole::Final => (setting.pump2, setting.stokes2),
        }
    }

    /// Duration of everything before the free evolution.
    pub fn preparation_time(&self) -> f64 {
        self.elements
            .iter()
            .take_while(|e| !matches!(e, SequenceElement::FreeEvolution { .. }))
            .map(|e| match e {
                SequenceElement::Pulse { pulse, .. } => pulse.duration(),
                _ => 0.0,
            })
            .sum()
    }
}

/// Ensemble-averaged brightness signal for one phase setting, obtained by
/// propagating every element in order on the global clock.
pub fn run_sequence(
    seq: &RamseySequence,
    setting: &PhaseSetting,
    model: &HamiltonianModel,
    readout: &ReadoutModel,
    ensemble: &EnsembleSpec,
    integrator: &Integrator,
) -> Result<f64> {
    seq.check_ensemble(ensemble)?;
    readout.validate()?;
    let (wp, ws) = seq.params.transitions.carriers(model.detuning.delta);
    let nominal = seq.params.omega;
    gaussian_average(ensemble, |omega| {
        let scale = omega / nominal;
        let mut psi = StateVector::basis(Level::Plus1);
        let mut clock = 0.0;
        for element in &seq.elements {
            match element {
                SequenceElement::Pulse { pulse, role } => {
                    let (mut pp, mut ps) = seq.phased(*role, setting);
                    if *role == PulseRole::Final {
                        pp -= wp * seq.tau;
                        ps -= ws * seq.tau;
                    }
                    let p = pulse
                        .scaled(scale)
                        .with_carriers(wp, ws)?
                        .with_phases(pp, ps)
                        .starting_at(clock);
                    let u = integrator.pulse_propagator(model, &p)?;
                    psi = apply(&u, &psi)?;
                    clock += p.duration();
                }
                SequenceElement::FreeEvolution { tau } => {
                    let u = free_evolution_detuned(*tau, model.detuning.delta, model.detuning.two_photon)?;
                    psi = apply(&u, &psi)?;
                    clock += tau;
                }
                SequenceElement::Readout => return Ok(readout.signal_of(&psi)),
            }
        }
        Ok(readout.signal_of(&psi))
    })
}

/// One ensemble member's sequence reduced to the state before free
/// evolution and the eight τ = 0 final-pulse propagators.
#[derive(Clone, Debug)]
pub struct SequenceKernel {
    prepared: [[C64; 3]; 8],
    finals: [Mat3; 8],
    delta: f64,
    two_photon: f64,
    carriers: (f64, f64),
}

fn diag_conj(phases: (f64, f64), u: &Mat3) -> Mat3 {
    let d = Operator::phases([phases.0, 0.0, phases.1]);
    *(d * Operator::general(*u) * d.adjoint()).entries()
}

impl SequenceKernel {
    /// Builds the kernel with all pulse amplitudes multiplied by `scale`.
    pub fn build(seq: &RamseySequence, model: &HamiltonianModel, integrator: &Integrator, scale: f64) -> Result<Self> {
        let (wp, ws) = seq.params.transitions.carriers(model.detuning.delta);
        let free_at = seq
            .elements
            .iter()
            .position(|e| matches!(e, SequenceElement::FreeEvolution { .. }))
            .ok_or_else(|| invalid("sequence has no free evolution"))?;
        let t1 = seq.preparation_time();

        // preparation: cache by first-pulse phases
        let mut prep_cache: Vec<((u64, u64), [C64; 3])> = Vec::new();
        let mut prepared = [[C64::new(0.0, 0.0); 3]; 8];
        for (k, setting) in seq.phase_table.iter().enumerate() {
            let key = (setting.pump1.to_bits(), setting.stokes1.to_bits());
            if let Some((_, v)) = prep_cache.iter().find(|(k2, _)| *k2 == key) {
                prepared[k] = *v;
                continue;
            }
            let mut psi = StateVector::basis(Level::Plus1);
            let mut clock = 0.0;
            for element in &seq.elements[..free_at] {
                if let SequenceElement::Pulse { pulse, role } = element {
                    let (pp, ps) = seq.phased(*role, setting);
                    let p = pulse
                        .scaled(scale)
                        .with_carriers(wp, ws)?
                        .with_phases(pp, ps)
                        .starting_at(clock);
                    let u = integrator.pulse_propagator(model, &p)?;
                    psi = apply(&u, &psi)?;
                    clock += p.duration();
                }
            }
            prepared[k] = psi.amplitudes();
            prep_cache.push((key, psi.amplitudes()));
        }

        let final_pulse = seq.elements[free_at + 1..]
            .iter()
            .find_map(|e| match e {
                SequenceElement::Pulse {
                    pulse,
                    role: PulseRole::Final,
                } => Some(*pulse),
                _ => None,
            })
            .ok_or_else(|| invalid("sequence has no final pulse"))?
            .scaled(scale)
            .with_carriers(wp, ws)?
            .starting_at(t1);

        // With η fixed the tone phases act as a diagonal frame change, so only
        // distinct values of φ_p − φ_s need their own propagation.
        let mut final_cache: Vec<(u64, Mat3)> = Vec::new();
        let mut finals = [[[C64::new(0.0, 0.0); 3]; 3]; 8];
        for (k, s) in seq.phase_table.iter().enumerate() {
            let (base_phase, frame) = match model.variant {
                HamiltonianVariant::PlainRwa => (0.0, (s.pump2, s.stokes2)),
                HamiltonianVariant::AcZeeman => (wrap_2pi(s.pump2 - s.stokes2), (s.stokes2, s.stokes2)),
            };
            let key = ((base_phase * 1e12).round() as i64) as u64;
            let base = match final_cache.iter().find(|(k2, _)| *k2 == key) {
                Some((_, u)) => *u,
                None => {
                    let p = final_pulse.with_phases(base_phase, 0.0);
                    let u = *integrator.pulse_propagator(model, &p)?.entries();
                    final_cache.push((key, u));
                    u
                }
            };
            finals[k] = diag_conj(frame, &base);
        }
        Ok(SequenceKernel {
            prepared,
            finals,
            delta: model.detuning.delta,
            two_photon: model.detuning.two_photon,
            carriers: (wp, ws),
        })
    }

    /// Replaces the prepared states, e.g. to inject a chosen coherence.
    pub fn with_prepared_state(mut self, state: &StateVector) -> Self {
        self.prepared = [state.amplitudes(); 8];
        self
    }

    /// The eight signals at delay `tau`.
    pub fn signals(&self, tau: f64, readout: &ReadoutModel) -> [f64; 8] {
        let (wp, ws) = self.carriers;
        let free = [
            C64::new(1.0, 0.0),
            C64::from_polar(1.0, self.delta * tau),
            C64::from_polar(1.0, self.two_photon * tau),
        ];
        let frame = [
            C64::from_polar(1.0, wp * tau),
            C64::new(1.0, 0.0),
            C64::from_polar(1.0, ws * tau),
        ];
        let mut out = [0.0; 8];
        for k in 0..8 {
            let p = self.prepared[k];
            let v = [
                p[0] * free[0] * frame[0],
                p[1] * free[1] * frame[1],
                p[2] * free[2] * frame[2],
            ];
            out[k] = readout.signal_raw(&mat_vec(&self.finals[k], &v));
        }
        out
    }

    /// Final propagator for setting `k` at delay `tau`.
    pub fn final_propagator(&self, k: usize, tau: f64) -> Operator {
        let (wp, ws) = self.carriers;
        Operator::from_raw_propagator(diag_conj((-wp * tau, -ws * tau), &self.finals[k]))
    }
}

fn check_inputs(
    seq: &RamseySequence,
    model: &HamiltonianModel,
    readout: &ReadoutModel,
    ensemble: &EnsembleSpec,
    integrator: &Integrator,
) -> Result<()> {
    seq.check_ensemble(ensemble)?;
    readout.validate()?;
    integrator.validate()?;
    if !(model.detuning.delta.is_finite() && model.detuning.two_photon.is_finite()) {
        return Err(Error::NonFinite("detuning".into()));
    }
    Ok(())
}

/// Ensemble-averaged `R₁…R₈` at delay `tau`.
pub fn signals_at(
    seq: &RamseySequence,
    tau: f64,
    model: &HamiltonianModel,
    readout: &ReadoutModel,
    ensemble: &EnsembleSpec,
    integrator: &Integrator,
) -> Result<[f64; 8]> {
    check_inputs(seq, model, readout, ensemble, integrator)?;
    if !(tau >= 0.0) {
        return Err(invalid(format!("tau must be >= 0, got {tau}")));
    }
    let nominal = seq.params.omega;
    gaussian_average(ensemble, |omega| {
        Ok(SequenceKernel::build(seq, model, integrator, omega / nominal)?.signals(tau, readout))
    })
}

/// Phase-cycled Ramsey data over a τ scan.
#[derive(Clone, Debug, PartialEq)]
pub struct FringeScan {
    pub taus: Vec<f64>,
    pub signals: Vec<[f64; 8]>,
}

impl FringeScan {
    pub fn in_phase(&self) -> Vec<f64> {
        self.signals.iter().map(|r| combine_iq(r).0).collect()
    }

    pub fn quadrature(&self) -> Vec<f64> {
        self.signals.iter().map(|r| combine_iq(r).1).collect()
    }

    /// One column `R_{k+1}`.
    pub fn channel(&self, k: usize) -> Vec<f64> {
        self.signals.iter().map(|r| r[k]).collect()
    }

    /// CSV with columns `tau_us, R1..R8, I, Q, Phi_rad, r`.
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = crate::csvout::writer(out);
        let mut header = vec!["tau_us".to_string()];
        header.extend((1..=8).map(|k| format!("R{k}")));
        header.extend(["I", "Q", "Phi_rad", "r"].map(String::from));
        w.write_record(&header)?;
        for (tau, r) in self.taus.iter().zip(&self.signals) {
            let (i, q) = combine_iq(r);
            let (phi, amp) = accumulated_phase(i, q).unwrap_or((f64::NAN, 0.0));
            let mut row = vec![number(tau * 1e6)];
            row.extend(r.iter().map(|x| number(*x)));
            row.extend([i, q, phi, amp].map(number));
            w.write_record(&row)?;
        }
        w.flush()?;
        Ok(())
    }
}

/// Uniform τ grid `tau0 + k·dtau`, `k = 0..count`.
pub fn tau_grid(tau0: f64, dtau: f64, count: usize) -> Result<Vec<f64>> {
    if !(tau0 >= 0.0) {
        return Err(invalid("tau must be >= 0"));
    }
    if !(dtau > 0.0) || count == 0 {
        return Err(invalid("tau grid needs a positive step and at least one point"));
    }
    Ok((0..count).map(|k| tau0 + k as f64 * dtau).collect())
}

/// Ensemble-averaged signals over a τ scan.
pub fn fringe_scan(
    seq: &RamseySequence,
    taus: &[f64],
    model: &HamiltonianModel,
    readout: &ReadoutModel,
    ensemble: &EnsembleSpec,
    integrator: &Integrator,
) -> Result<FringeScan> {
    check_inputs(seq, model, readout, ensemble, integrator)?;
    if taus.iter().any(|t| !(*t >= 0.0)) {
        return Err(invalid("tau must be >= 0"));
    }
    let nominal = seq.params.omega;
    let signals = gaussian_average(ensemble, |omega| {
        let kernel = SequenceKernel::build(seq, model, integrator, omega / nominal)?;
        Ok(taus
            .iter()
            .map(|&t| kernel.signals(t, readout))
            .collect::<Vec<[f64; 8]>>())
    })?;
    Ok(FringeScan {
        taus: taus.to_vec(),
        signals,
    })
}
