//! Rotating-frame Hamiltonians and the adiabatic basis.
//!
//! Tone phases enter the couplings as `e^{iφ_p}` on the `|+1⟩–|0⟩` element
//! and `e^{−iφ_s}` on the `|0⟩–|−1⟩` element, which is what a lab-frame drive
//! `cos(ω t + φ)` produces after the rotating-wave transformation. With all
//! phases at zero both variants reduce to the real forms.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::pulses::TwoTonePulse;
use crate::qstate::{Mat3, Operator, StateVector, C64, ZERO};

/// One-photon detuning `Δ` and two-photon detuning `δ`, both in rad/s.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct DetuningSpec {
    pub delta: f64,
    #[serde(default)]
    pub two_photon: f64,
}

impl DetuningSpec {
    pub fn new(delta: f64) -> Self {
        DetuningSpec { delta, two_photon: 0.0 }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum HamiltonianVariant {
    PlainRwa,
    AcZeeman,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct HamiltonianModel {
    pub variant: HamiltonianVariant,
    pub detuning: DetuningSpec,
}

/// Fraction of the beat period allowed per substep in the cross-coupled model.
const BEAT_SUBSTEPS: f64 = 16.0;

impl HamiltonianModel {
    pub fn plain(delta: f64) -> Self {
        HamiltonianModel {
            variant: HamiltonianVariant::PlainRwa,
            detuning: DetuningSpec::new(delta),
        }
    }

    pub fn ac_zeeman(delta: f64) -> Self {
        HamiltonianModel {
            variant: HamiltonianVariant::AcZeeman,
            detuning: DetuningSpec::new(delta),
        }
    }

    pub fn check_pulse(&self, pulse: &TwoTonePulse) -> Result<()> {
        if self.variant == HamiltonianVariant::AcZeeman && pulse.carriers.is_none() {
            return Err(invalid(
                "the ac-Zeeman Hamiltonian needs carrier frequencies on the pulse",
            ));
        }
        if !(self.detuning.delta.is_finite() && self.detuning.two_photon.is_finite()) {
            return Err(Error::NonFinite("detuning".into()));
        }
        Ok(())
    }

    /// Longest substep that resolves the pump–Stokes beat, if any.
    pub fn max_substep(&self, pulse: &TwoTonePulse) -> Option<f64> {
        match (self.variant, pulse.carriers) {
            (HamiltonianVariant::AcZeeman, Some(c)) => {
                let beat = (c.pump - c.stokes).abs();
                (beat > 0.0).then(|| 2.0 * std::f64::consts::PI / beat / BEAT_SUBSTEPS)
            }
            _ => None,
        }
    }

    /// Per-pulse constants for repeated evaluation.
    #[inline]
    pub(crate) fn drive(&self, pulse: &TwoTonePulse) -> Drive {
        let beat = match (self.variant, pulse.carriers) {
            (HamiltonianVariant::AcZeeman, Some(c)) => Some((
                c.pump - c.stokes,
                (c.pump - c.stokes) * pulse.start + pulse.pump_phase - pulse.stokes_phase,
            )),
            _ => None,
        };
        Drive {
            pump_factor: Complex64::from_polar(0.5, pulse.pump_phase),
            stokes_factor: Complex64::from_polar(0.5, -pulse.stokes_phase),
            beat,
            detuning: self.detuning,
        }
    }

    /// Matrix at local pulse time `t`. The caller has run `check_pulse`.
    #[inline]
    pub(crate) fn matrix_at(&self, pulse: &TwoTonePulse, t: f64) -> Mat3 {
        self.drive(pulse).matrix_at(pulse, t)
    }

    /// `H(t)` at local pulse time `t`.
    pub fn at(&self, pulse: &TwoTonePulse, t: f64) -> Result<Operator> {
        self.check_pulse(pulse)?;
        Ok(Operator::from_raw_hamiltonian(self.matrix_at(pulse, t)))
    }
}

/// Phase factors and beat of one pulse under one model.
#[derive(Clone, Copy, Debug)]
pub(crate) struct Drive {
    pump_factor: C64,
    stokes_factor: C64,
    /// `(ω_p − ω_s, η at local t = 0)`
    beat: Option<(f64, f64)>,
    detuning: DetuningSpec,
}

impl Drive {
    #[inline]
    pub(crate) fn matrix_at(&self, pulse: &TwoTonePulse, t: f64) -> Mat3 {
        let (op, os) = pulse.amplitudes_at(t);
        let (bp, bs) = match self.beat {
            Some((w, eta0)) => {
                let rot = Complex64::from_polar(1.0, -(w * t + eta0));
                (C64::new(op, 0.0) + rot * os, C64::new(os, 0.0) + rot * op)
            }
            None => (C64::new(op, 0.0), C64::new(os, 0.0)),
        };
        assemble(bp * self.pump_factor, bs * self.stokes_factor, &self.detuning)
    }
}

#[inline]
fn assemble(h12: C64, h23: C64, d: &DetuningSpec) -> Mat3 {
    [
        [ZERO, h12, ZERO],
        [h12.conj(), C64::new(-d.delta, 0.0), h23],
        [ZERO, h23.conj(), C64::new(-d.two_photon, 0.0)],
    ]
}

/// `½·[[0, Ω_p, 0], [Ω_p, −2Δ, Ω_s], [0, Ω_s, 0]]`.
pub fn rwa_hamiltonian(omega_p: f64, omega_s: f64, delta: f64) -> Operator {
    Operator::from_raw_hamiltonian(assemble(
        C64::new(0.5 * omega_p, 0.0),
        C64::new(0.5 * omega_s, 0.0),
        &DetuningSpec::new(delta),
    ))
}

/// Cross-coupled Hamiltonian at global time `t`, envelopes evaluated at
/// `t − pulse.start`.
pub fn ac_zeeman_hamiltonian(t: f64, pulse: &TwoTonePulse, delta: f64) -> Result<Operator> {
    HamiltonianModel::ac_zeeman(delta).at(pulse, t - pulse.start)
}

/// Cross-coupled matrix with explicit cross-term weights; weights of zero
/// reproduce the uncoupled form.
pub fn cross_coupled_hamiltonian(omega_p: f64, omega_s: f64, eta: f64, cross_weight: f64, delta: f64) -> Operator {
    let rot = Complex64::from_polar(cross_weight, -eta);
    let bp = C64::new(omega_p, 0.0) + rot * omega_s;
    let bs = C64::new(omega_s, 0.0) + rot * omega_p;
    Operator::from_raw_hamiltonian(assemble(0.5 * bp, 0.5 * bs, &DetuningSpec::new(delta)))
}

/// Dark and bright states with mixing angles `θ` and `ξ`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct AdiabaticBasis {
    pub dark: StateVector,
    pub bright_minus: StateVector,
    pub bright_plus: StateVector,
    pub theta: f64,
    pub xi: f64,
}

impl AdiabaticBasis {
    /// Eigenvalues of `rwa_hamiltonian` for `(dark, bright_minus, bright_plus)`.
    pub fn eigenvalues(omega_p: f64, omega_s: f64, delta: f64) -> [f64; 3] {
        let oe = omega_p.hypot(omega_s);
        let r = 0.5 * (oe * oe + delta * delta).sqrt();
        [0.0, -0.5 * delta + r, -0.5 * delta - r]
    }
}

/// `θ = atan2(Ω_p, Ω_s)`; `ξ = ½·atan2(Ω_e, −Δ) ∈ (0, π/2)`.
///
/// `|D⟩ = (cos θ, 0, −sin θ)`,
/// `|B₋⟩ = (sin θ sin ξ, cos ξ, cos θ sin ξ)`,
/// `|B₊⟩ = (sin θ cos ξ, −sin ξ, cos θ cos ξ)`.
pub fn adiabatic_basis(omega_p: f64, omega_s: f64, delta: f64) -> Result<AdiabaticBasis> {
    if !(omega_p.is_finite() && omega_s.is_finite() && delta.is_finite()) {
        return Err(Error::NonFinite("adiabatic basis input".into()));
    }
    if omega_p == 0.0 && omega_s == 0.0 {
        return Err(Error::DegenerateBasis);
    }
    let theta = omega_p.atan2(omega_s);
    let oe = omega_p.hypot(omega_s);
    let xi = 0.5 * oe.atan2(-delta);
    let (st, ct) = theta.sin_cos();
    let (sx, cx) = xi.sin_cos();
    let r = |a: f64, b: f64, c: f64| StateVector::normalized([C64::new(a, 0.0), C64::new(b, 0.0), C64::new(c, 0.0)]);
    Ok(AdiabaticBasis {
        dark: r(ct, 0.0, -st)?,
        bright_minus: r(st * sx, cx, ct * sx)?,
        bright_plus: r(st * cx, -sx, ct * cx)?,
        theta,
        xi,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::pulses::{rectangular_pulse, Tones};
    use crate::qstate::{apply, hermitian_eigen, Level};
    use approx::assert_abs_diff_eq;
    use std::f64::consts::{FRAC_1_SQRT_2, FRAC_PI_2, FRAC_PI_4, PI};

    const TAU: f64 = 2.0 * PI;

    fn mat_vec(h: &Operator, v: &StateVector) -> [C64; 3] {
        h.act(&v.amplitudes())
    }

    #[test]
    fn zero_fields() {
        let h = rwa_hamiltonian(0.0, 0.0, 3.0);
        let e = h.entries();
        for i in 0..3 {
            for j in 0..3 {
                let expect = if (i, j) == (1, 1) { -3.0 } else { 0.0 };
                assert_eq!(e[i][j], C64::new(expect, 0.0));
            }
        }
    }

    #[test]
    fn symmetric_lambda_eigenvalues() {
        let omega = 2.5;
        let vals = rwa_hamiltonian(omega, omega, 0.0).eigenvalues().unwrap();
        let expected = [-omega / 2f64.sqrt(), 0.0, omega / 2f64.sqrt()];
        for (a, b) in vals.iter().zip(expected) {
            assert_abs_diff_eq!(*a, b, epsilon = 1e-14);
        }
    }

    #[test]
    fn dark_state_limits() {
        let b = adiabatic_basis(0.0, 1.0, 0.3).unwrap();
        assert_eq!(b.dark.amplitudes()[0], C64::new(1.0, 0.0));
        let b = adiabatic_basis(1.0, 0.0, 0.3).unwrap();
        assert_abs_diff_eq!(b.dark.amplitudes()[0].re, 0.0, epsilon = 1e-16);
        assert_abs_diff_eq!(b.dark.amplitudes()[2].re, -1.0, epsilon = 1e-16);
        assert!(matches!(adiabatic_basis(0.0, 0.0, 1.0), Err(Error::DegenerateBasis)));
    }

    #[test]
    fn bright_states_on_resonance() {
        let b = adiabatic_basis(1.0, 2.0, 0.0).unwrap();
        assert_abs_diff_eq!(b.xi, FRAC_PI_4, epsilon = 1e-15);
        assert_abs_diff_eq!(b.bright_minus[Level::Zero].re, FRAC_1_SQRT_2, epsilon = 1e-15);
        assert_abs_diff_eq!(b.bright_plus[Level::Zero].re, -FRAC_1_SQRT_2, epsilon = 1e-15);
    }

    #[test]
    fn xi_branch_limits() {
        let b = adiabatic_basis(1.0, 1.0, 1e9).unwrap();
        assert!(b.xi > 0.0 && b.xi < FRAC_PI_2);
        assert!(FRAC_PI_2 - b.xi < 1e-8);
        let b = adiabatic_basis(1.0, 1.0, -1e9).unwrap();
        assert!(b.xi > 0.0 && b.xi < 1e-8);
    }

    #[test]
    fn adiabatic_states_are_eigenvectors() {
        for (p, s, d) in [(1.0, 2.0, 0.0), (3.0, 0.5, 1.7), (0.2, 0.9, -2.5)] {
            let h = rwa_hamiltonian(p, s, d);
            let b = adiabatic_basis(p, s, d).unwrap();
            let vals = AdiabaticBasis::eigenvalues(p, s, d);
            for (state, val) in [(b.dark, vals[0]), (b.bright_minus, vals[1]), (b.bright_plus, vals[2])] {
                let hv = mat_vec(&h, &state);
                for (x, y) in hv.iter().zip(state.amplitudes()) {
                    assert_abs_diff_eq!((*x - y * val).norm(), 0.0, epsilon = 1e-13);
                }
            }
            let (direct, _) = hermitian_eigen(h.entries());
            let mut ours = vals;
            ours.sort_by(f64::total_cmp);
            for (a, b) in direct.iter().zip(ours) {
                assert_abs_diff_eq!(*a, b, epsilon = 1e-13);
            }
        }
    }

    #[test]
    fn ac_zeeman_substitution() {
        let wp = TAU * 5.089e6;
        let ws = TAU * 4.797e6;
        let pump_only = rectangular_pulse(2.0, 1e-5, Tones::SinglePump)
            .unwrap()
            .with_carriers(wp, ws)
            .unwrap();
        let t = 3.3e-6;
        let h = ac_zeeman_hamiltonian(t, &pump_only, 0.0).unwrap();
        let eta = (wp - ws) * t;
        assert_abs_diff_eq!((h.entries()[0][1] - C64::new(1.0, 0.0)).norm(), 0.0, epsilon = 1e-15);
        let expect = Complex64::from_polar(1.0, -eta);
        assert_abs_diff_eq!((h.entries()[1][2] - expect).norm(), 0.0, epsilon = 1e-12);

        let two = rectangular_pulse(2.0, 1e-5, Tones::TwoTone)
            .unwrap()
            .with_carriers(wp, ws)
            .unwrap();
        let h = ac_zeeman_hamiltonian(0.0, &two, 0.0).unwrap();
        let (op, os) = two.amplitudes_at(0.0);
        assert_abs_diff_eq!(h.entries()[0][1].re, 0.5 * (op + os), epsilon = 1e-15);
        assert_eq!(h.entries()[0][1].im, 0.0);
        assert!(h.hermitian_defect() == 0.0);
    }

    #[test]
    fn ac_zeeman_needs_carriers() {
        let pulse = rectangular_pulse(1.0, 1e-5, Tones::TwoTone).unwrap();
        assert!(matches!(
            ac_zeeman_hamiltonian(0.0, &pulse, 0.0),
            Err(Error::InvalidParameter(_))
        ));
        assert!(HamiltonianModel::plain(0.0).at(&pulse, 0.0).is_ok());
    }

    #[test]
    fn cross_terms_disabled_is_plain() {
        let a = cross_coupled_hamiltonian(1.3, 0.7, 0.4, 0.0, 0.25);
        let b = rwa_hamiltonian(1.3, 0.7, 0.25);
        assert_eq!(a.entries(), b.entries());
    }

    #[test]
    fn tone_phases_are_a_diagonal_frame_change() {
        let wp = TAU * 5.089e6;
        let ws = TAU * 4.797e6;
        let base = rectangular_pulse(1.0, 1e-5, Tones::TwoTone)
            .unwrap()
            .with_carriers(wp, ws)
            .unwrap();
        let (a, c) = (0.7, -1.9);
        let phased = base.with_phases(a, c);
        let model = HamiltonianModel::plain(0.3);
        let h0 = model.at(&base, 2e-6).unwrap();
        let h1 = model.at(&phased, 2e-6).unwrap();
        let d = Operator::phases([a, 0.0, c]);
        let rotated = d * Operator::general(*h0.entries()) * d.adjoint();
        for i in 0..3 {
            for j in 0..3 {
                assert_abs_diff_eq!(
                    (rotated.entries()[i][j] - h1.entries()[i][j]).norm(),
                    0.0,
                    epsilon = 1e-15
                );
            }
        }
        let s = apply(&d, &StateVector::basis(Level::Zero)).unwrap();
        assert_eq!(s.populations(), [0.0, 1.0, 0.0]);
    }
}
