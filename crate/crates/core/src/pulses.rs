//! Pulse envelopes: Blackman STIRAP pairs, truncated and half-STIRAP pairs,
//! rectangular single- and two-tone pulses, and pulse areas.
//!
//! Envelopes are closed-form in local pulse time `t ∈ [0, duration]` and
//! carry a nominal sample step used for quadrature and as the default
//! propagation grid.

use std::f64::consts::{FRAC_1_SQRT_2, PI};
use std::fmt;
use std::io::Write;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::csvout::number;
use crate::error::{invalid, Error, Result};

/// Nuclear gyromagnetic ratio of ¹⁴N in Hz/G.
pub const GAMMA_N_HZ_PER_GAUSS: f64 = 307.59;

/// Default number of sample intervals per pulse.
pub const DEFAULT_SAMPLES: usize = 4096;

/// Default STIRAP delay as a fraction of the individual pulse width.
pub const DEFAULT_DELAY_FRACTION: f64 = 0.25;

/// Rabi frequency (rad/s) driven by an RF field amplitude in gauss.
pub fn rabi_from_field(b_gauss: f64) -> f64 {
    2.0 * PI * GAMMA_N_HZ_PER_GAUSS * b_gauss
}

#[inline]
fn blackman_unchecked(t: f64, width: f64) -> f64 {
    if !(t > 0.0 && t < width) {
        return 0.0;
    }
    let (a, c) = (PI * t / width).sin_cos();
    // sin(2x) = 2·sin x·cos x
    let b = 2.0 * a * c;
    a * a - 0.16 * b * b
}

/// `sin²(πt/T) − 0.16·sin²(2πt/T)` on `[0, T]`, zero elsewhere.
pub fn blackman_window(t: f64, width: f64) -> Result<f64> {
    if !(width > 0.0 && width.is_finite()) {
        return Err(invalid(format!("Blackman width must be positive, got {width}")));
    }
    Ok(blackman_unchecked(t, width))
}

/// Peak of `√(w(t)² + w(t − t_d)²)` for a unit-amplitude Blackman pair,
/// expressed through `t_d / T`.
pub fn blackman_peak_ratio(delay_fraction: f64) -> Result<f64> {
    if !(0.0..1.0).contains(&delay_fraction) {
        return Err(invalid("delay fraction must lie in [0, 1)"));
    }
    let width = 1.0;
    let td = delay_fraction;
    let f = |t: f64| blackman_unchecked(t, width).hypot(blackman_unchecked(t - td, width));
    Ok(maximize(f, 0.0, width + td, 2048))
}

/// Grid search followed by golden-section refinement.
fn maximize(f: impl Fn(f64) -> f64, a: f64, b: f64, n: usize) -> f64 {
    let h = (b - a) / n as f64;
    let (mut best_k, mut best) = (0, f(a));
    for k in 1..=n {
        let v = f(a + k as f64 * h);
        if v > best {
            best = v;
            best_k = k;
        }
    }
    let mut lo = (a + (best_k as f64 - 1.0) * h).max(a);
    let mut hi = (a + (best_k as f64 + 1.0) * h).min(b);
    let g = (5f64.sqrt() - 1.0) / 2.0;
    for _ in 0..80 {
        let x1 = hi - g * (hi - lo);
        let x2 = lo + g * (hi - lo);
        if f(x1) < f(x2) {
            lo = x1;
        } else {
            hi = x2;
        }
    }
    best.max(f(0.5 * (lo + hi)))
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Ordering {
    /// Stokes before pump.
    SP,
    /// Pump before Stokes.
    PS,
}

impl FromStr for Ordering {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "SP" => Ok(Ordering::SP),
            "PS" => Ok(Ordering::PS),
            other => Err(invalid(format!("ordering must be \"SP\" or \"PS\", got {other:?}"))),
        }
    }
}

impl fmt::Display for Ordering {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Ordering::SP => "SP",
            Ordering::PS => "PS",
        })
    }
}

/// Blackman pair parameters: amplitude `Ω_0` (rad/s), width `T` (s) and
/// delay `t_d` (s).
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct PulseShapeParams {
    pub omega0: f64,
    pub width: f64,
    pub delay: f64,
    pub ordering: Ordering,
    pub samples: usize,
}

impl PulseShapeParams {
    /// `t_d = 0.25·T`.
    pub fn new(omega0: f64, width: f64, ordering: Ordering) -> Result<Self> {
        Self::with_delay(omega0, width, DEFAULT_DELAY_FRACTION * width, ordering)
    }

    pub fn with_delay(omega0: f64, width: f64, delay: f64, ordering: Ordering) -> Result<Self> {
        let p = PulseShapeParams {
            omega0,
            width,
            delay,
            ordering,
            samples: DEFAULT_SAMPLES,
        };
        p.validate()?;
        Ok(p)
    }

    /// Parameters whose pair has effective peak `omega_peak` and total
    /// duration `t_p`, with the default delay.
    pub fn for_peak(omega_peak: f64, t_p: f64, ordering: Ordering) -> Result<Self> {
        let width = t_p / (1.0 + DEFAULT_DELAY_FRACTION);
        let ratio = blackman_peak_ratio(DEFAULT_DELAY_FRACTION)?;
        Self::new(omega_peak / ratio, width, ordering)
    }

    pub fn samples(mut self, n: usize) -> Result<Self> {
        self.samples = n;
        self.validate()?;
        Ok(self)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.omega0 > 0.0 && self.omega0.is_finite()) {
            return Err(invalid(format!("omega0 must be positive, got {}", self.omega0)));
        }
        if !(self.width > 0.0 && self.width.is_finite()) {
            return Err(invalid(format!("pulse width T must be positive, got {}", self.width)));
        }
        if !(self.delay >= 0.0 && self.delay < self.width) {
            return Err(invalid(format!(
                "delay t_d must satisfy 0 <= t_d < T (t_d = {}, T = {})",
                self.delay, self.width
            )));
        }
        if self.samples < 2 {
            return Err(invalid("a pulse needs at least 2 sample intervals"));
        }
        Ok(())
    }

    /// Composite duration `t_p = T + t_d`.
    pub fn duration(&self) -> f64 {
        self.width + self.delay
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
enum Shape {
    Zero,
    Constant,
    Blackman { width: f64, offset: f64 },
    HalfPump { width: f64, delay: f64 },
    HalfStokes { width: f64, delay: f64 },
}

impl Shape {
    #[inline]
    fn eval(&self, t: f64) -> f64 {
        match *self {
            Shape::Zero => 0.0,
            Shape::Constant => 1.0,
            Shape::Blackman { width, offset } => blackman_unchecked(t - offset, width),
            Shape::HalfPump { width, delay } => {
                let (s, p) = (blackman_unchecked(t, width), blackman_unchecked(t - delay, width));
                let e = s.hypot(p);
                if e == 0.0 {
                    0.0
                } else {
                    // e·sin(θ/2) with cos θ = s/e
                    e * ((1.0 - s / e) * 0.5).max(0.0).sqrt()
                }
            }
            Shape::HalfStokes { width, delay } => {
                let (s, p) = (blackman_unchecked(t, width), blackman_unchecked(t - delay, width));
                let e = s.hypot(p);
                if e == 0.0 {
                    0.0
                } else {
                    e * ((1.0 + s / e) * 0.5).sqrt()
                }
            }
        }
    }
}

/// Nonnegative Rabi envelope `Ω(t)` in rad/s on `[0, duration]`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Envelope {
    shape: Shape,
    amplitude: f64,
    duration: f64,
    dt: f64,
    cutoff: Option<f64>,
    reversed: bool,
}

impl Envelope {
    fn new(shape: Shape, amplitude: f64, duration: f64, samples: usize) -> Self {
        Envelope {
            shape,
            amplitude,
            duration,
            dt: duration / samples as f64,
            cutoff: None,
            reversed: false,
        }
    }

    pub fn zero(duration: f64, samples: usize) -> Self {
        Envelope::new(Shape::Zero, 0.0, duration, samples)
    }

    #[inline]
    fn masked(&self, t: f64) -> bool {
        if t < 0.0 || t > self.duration {
            return true;
        }
        matches!(self.cutoff, Some(c) if t > c || c == 0.0)
    }

    #[inline]
    pub fn at(&self, t: f64) -> f64 {
        if self.masked(t) {
            return 0.0;
        }
        let u = if self.reversed { self.duration - t } else { t };
        self.amplitude * self.shape.eval(u)
    }

    pub fn duration(&self) -> f64 {
        self.duration
    }

    pub fn sample_step(&self) -> f64 {
        self.dt
    }

    pub fn sample_count(&self) -> usize {
        (self.duration / self.dt).round() as usize
    }

    /// Values on the sample grid, `sample_count() + 1` points.
    pub fn samples(&self) -> Vec<f64> {
        (0..=self.sample_count()).map(|k| self.at(k as f64 * self.dt)).collect()
    }

    pub fn is_zero(&self) -> bool {
        self.amplitude == 0.0 || self.shape == Shape::Zero || self.cutoff == Some(0.0)
    }

    fn scaled(mut self, s: f64) -> Self {
        self.amplitude *= s;
        self
    }
}

/// Carrier angular frequencies `(ω_p, ω_s)` in rad/s.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Carriers {
    pub pump: f64,
    pub stokes: f64,
}

/// Pump and Stokes envelopes sharing one sample grid, with their carriers,
/// tone phases and the pulse start on the global sequence clock.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct TwoTonePulse {
    pub pump: Envelope,
    pub stokes: Envelope,
    pub carriers: Option<Carriers>,
    pub pump_phase: f64,
    pub stokes_phase: f64,
    pub start: f64,
}

impl TwoTonePulse {
    fn from_envelopes(pump: Envelope, stokes: Envelope) -> Self {
        TwoTonePulse {
            pump,
            stokes,
            carriers: None,
            pump_phase: 0.0,
            stokes_phase: 0.0,
            start: 0.0,
        }
    }

    pub fn duration(&self) -> f64 {
        self.pump.duration
    }

    pub fn sample_step(&self) -> f64 {
        self.pump.dt
    }

    pub fn sample_count(&self) -> usize {
        self.pump.sample_count()
    }

    /// `(Ω_p(t), Ω_s(t))` at local time `t`.
    #[inline]
    pub fn amplitudes_at(&self, t: f64) -> (f64, f64) {
        if let Some(v) = self.half_pair_at(t) {
            return v;
        }
        (self.pump.at(t), self.stokes.at(t))
    }

    /// Shares the generator evaluation between the two half-STIRAP tones.
    #[inline]
    fn half_pair_at(&self, t: f64) -> Option<(f64, f64)> {
        let (p, s) = (&self.pump, &self.stokes);
        let (Shape::HalfPump { width, delay }, Shape::HalfStokes { width: w2, delay: d2 }) = (p.shape, s.shape) else {
            return None;
        };
        if width != w2
            || delay != d2
            || p.amplitude != s.amplitude
            || p.reversed != s.reversed
            || p.cutoff != s.cutoff
            || p.duration != s.duration
        {
            return None;
        }
        if p.masked(t) {
            return Some((0.0, 0.0));
        }
        let u = if p.reversed { p.duration - t } else { t };
        let (gs, gp) = (blackman_unchecked(u, width), blackman_unchecked(u - delay, width));
        let e = (gs * gs + gp * gp).sqrt();
        if e == 0.0 {
            return Some((0.0, 0.0));
        }
        let c = gs / e;
        let a = p.amplitude * e;
        Some((a * ((1.0 - c) * 0.5).max(0.0).sqrt(), a * ((1.0 + c) * 0.5).sqrt()))
    }

    /// `Ω_e(t) = √(Ω_p² + Ω_s²)`.
    pub fn effective_at(&self, t: f64) -> f64 {
        let (p, s) = self.amplitudes_at(t);
        p.hypot(s)
    }

    pub fn is_zero(&self) -> bool {
        self.pump.is_zero() && self.stokes.is_zero()
    }

    pub fn with_carriers(mut self, pump: f64, stokes: f64) -> Result<Self> {
        if !(pump > 0.0 && stokes > 0.0 && pump.is_finite() && stokes.is_finite()) {
            return Err(invalid("carrier frequencies must be positive"));
        }
        self.carriers = Some(Carriers { pump, stokes });
        Ok(self)
    }

    pub fn with_phases(mut self, pump_phase: f64, stokes_phase: f64) -> Self {
        self.pump_phase = pump_phase;
        self.stokes_phase = stokes_phase;
        self
    }

    pub fn starting_at(mut self, start: f64) -> Self {
        self.start = start;
        self
    }

    /// Both envelopes multiplied by `s`.
    pub fn scaled(mut self, s: f64) -> Self {
        self.pump = self.pump.scaled(s);
        self.stokes = self.stokes.scaled(s);
        self
    }

    /// Time-mirrored copy, `t → t_p − t`.
    pub fn reversed(mut self) -> Self {
        self.pump.reversed = !self.pump.reversed;
        self.stokes.reversed = !self.stokes.reversed;
        self
    }

    /// Pulse with pump and Stokes envelopes exchanged.
    pub fn swapped(mut self) -> Self {
        std::mem::swap(&mut self.pump, &mut self.stokes);
        self
    }

    /// Maximum of `Ω_e(t)` over the pulse.
    pub fn peak_effective(&self) -> f64 {
        let n = self.sample_count().max(64);
        maximize(|t| self.effective_at(t), 0.0, self.duration(), n)
    }

    /// Lab-frame field `Ω_p cos(ω_p t + φ_p) + Ω_s cos(ω_s t + φ_s)` on the
    /// sample grid, with `t` on the global clock. Requires carriers.
    pub fn lab_waveform(&self) -> Result<Vec<(f64, f64)>> {
        let c = self
            .carriers
            .ok_or_else(|| invalid("waveform export needs carrier frequencies"))?;
        let dt = self.sample_step();
        Ok((0..=self.sample_count())
            .map(|k| {
                let t = k as f64 * dt;
                let tg = self.start + t;
                let (p, s) = self.amplitudes_at(t);
                let v = p * (c.pump * tg + self.pump_phase).cos() + s * (c.stokes * tg + self.stokes_phase).cos();
                (tg, v)
            })
            .collect())
    }
}

/// Blackman STIRAP pair. SP ordering puts the Stokes window on `[0, T]` and
/// the pump window on `[t_d, T + t_d]`; PS swaps them.
pub fn stirap_pair(p: &PulseShapeParams) -> Result<TwoTonePulse> {
    p.validate()?;
    let tp = p.duration();
    let early = Envelope::new(
        Shape::Blackman {
            width: p.width,
            offset: 0.0,
        },
        p.omega0,
        tp,
        p.samples,
    );
    let late = Envelope::new(
        Shape::Blackman {
            width: p.width,
            offset: p.delay,
        },
        p.omega0,
        tp,
        p.samples,
    );
    Ok(match p.ordering {
        Ordering::SP => TwoTonePulse::from_envelopes(late, early),
        Ordering::PS => TwoTonePulse::from_envelopes(early, late),
    })
}

/// Zeroes both envelopes for `t > fraction·t_p`; duration is unchanged.
pub fn truncate(pulse: &TwoTonePulse, fraction: f64) -> Result<TwoTonePulse> {
    if !(0.0..=1.0).contains(&fraction) {
        return Err(invalid(format!(
            "truncation fraction must lie in [0, 1], got {fraction}"
        )));
    }
    let mut out = *pulse;
    if fraction < 1.0 {
        let c = fraction * pulse.duration();
        for env in [&mut out.pump, &mut out.stokes] {
            env.cutoff = Some(env.cutoff.map_or(c, |old| old.min(c)));
        }
    }
    Ok(out)
}

/// Half-STIRAP pair derived from the SP Blackman pair of `p`: the mixing
/// angle sweeps `θ/2` from 0 to π/4 under the generator's `Ω_e(t)`. The
/// ordering field of `p` is ignored.
pub fn half_stirap(p: &PulseShapeParams, reversed: bool) -> Result<TwoTonePulse> {
    p.validate()?;
    let tp = p.duration();
    let pump = Envelope::new(
        Shape::HalfPump {
            width: p.width,
            delay: p.delay,
        },
        p.omega0,
        tp,
        p.samples,
    );
    let stokes = Envelope::new(
        Shape::HalfStokes {
            width: p.width,
            delay: p.delay,
        },
        p.omega0,
        tp,
        p.samples,
    );
    let pulse = TwoTonePulse::from_envelopes(pump, stokes);
    Ok(if reversed { pulse.reversed() } else { pulse })
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Tones {
    /// Pump tone only, `Ω_p = Ω`.
    SinglePump,
    /// Both tones with `Ω_p = Ω_s = Ω/√2`.
    TwoTone,
}

pub fn rectangular_pulse(omega: f64, duration: f64, tones: Tones) -> Result<TwoTonePulse> {
    rectangular_pulse_sampled(omega, duration, tones, DEFAULT_SAMPLES)
}

pub fn rectangular_pulse_sampled(omega: f64, duration: f64, tones: Tones, samples: usize) -> Result<TwoTonePulse> {
    if !(omega > 0.0 && omega.is_finite()) {
        return Err(invalid(format!(
            "rectangular pulse amplitude must be positive, got {omega}"
        )));
    }
    if !(duration > 0.0 && duration.is_finite()) {
        return Err(invalid(format!(
            "rectangular pulse duration must be positive, got {duration}"
        )));
    }
    if samples < 2 {
        return Err(invalid("a pulse needs at least 2 sample intervals"));
    }
    let (p, s) = match tones {
        Tones::SinglePump => (omega, 0.0),
        Tones::TwoTone => (omega * FRAC_1_SQRT_2, omega * FRAC_1_SQRT_2),
    };
    let env = |a: f64| {
        if a == 0.0 {
            Envelope::zero(duration, samples)
        } else {
            Envelope::new(Shape::Constant, a, duration, samples)
        }
    };
    Ok(TwoTonePulse::from_envelopes(env(p), env(s)))
}

/// `∫ Ω_e(t) dt` by the trapezoidal rule on the sample grid.
pub fn pulse_area(pulse: &TwoTonePulse) -> f64 {
    if pulse.is_zero() {
        return 0.0;
    }
    let n = pulse.sample_count();
    let dt = pulse.sample_step();
    let inner: f64 = (1..n).map(|k| pulse.effective_at(k as f64 * dt)).sum();
    let ends = 0.5 * (pulse.effective_at(0.0) + pulse.effective_at(n as f64 * dt));
    (inner + ends) * dt
}

/// Duration of a resonant single-tone π pulse at amplitude `omega`.
pub fn pi_duration(omega: f64) -> f64 {
    PI / omega
}

/// Writes `(t_s, amplitude)` rows of the lab-frame waveform.
pub fn write_waveform_csv<W: Write>(pulse: &TwoTonePulse, out: W) -> Result<()> {
    let mut w = crate::csvout::writer(out);
    w.write_record(["t_s", "amplitude"])?;
    for (t, v) in pulse.lab_waveform()? {
        w.write_record([number(t), number(v)])?;
    }
    w.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use std::f64::consts::SQRT_2;

    const TAU: f64 = 2.0 * PI;

    fn fig2_params(ordering: Ordering) -> PulseShapeParams {
        PulseShapeParams::for_peak(TAU * 36.5e3, 300e-6, ordering).unwrap()
    }

    #[test]
    fn blackman_values() {
        let t = 240e-6;
        assert_eq!(blackman_window(0.0, t).unwrap(), 0.0);
        assert_abs_diff_eq!(blackman_window(t / 2.0, t).unwrap(), 1.0, epsilon = 1e-15);
        assert_abs_diff_eq!(blackman_window(t / 4.0, t).unwrap(), 0.34, epsilon = 1e-15);
        assert_eq!(blackman_window(-1e-9, t).unwrap(), 0.0);
        assert_eq!(blackman_window(t * 1.01, t).unwrap(), 0.0);
        assert!(blackman_window(0.1, 0.0).is_err());
        assert!(blackman_window(0.1, -1.0).is_err());
    }

    #[test]
    fn blackman_endpoints_exact() {
        for width in [1e-6, 240e-6, 1.0, 3.7] {
            assert_eq!(blackman_window(0.0, width).unwrap(), 0.0);
            assert!(blackman_window(width, width).unwrap().abs() < 1e-30);
        }
    }

    #[test]
    fn fig2_duration() {
        let p = PulseShapeParams::new(1.0, 240e-6, Ordering::SP).unwrap();
        assert_abs_diff_eq!(p.delay, 60e-6, epsilon = 1e-18);
        assert_abs_diff_eq!(p.duration(), 300e-6, epsilon = 1e-18);
        assert_abs_diff_eq!(p.delay / p.duration(), 0.2, epsilon = 1e-12);
    }

    #[test]
    fn peak_ratio_and_area_constants() {
        let ratio = blackman_peak_ratio(0.25).unwrap();
        assert!((ratio - 1.094).abs() <= 1e-3, "{ratio}");
        let pulse = stirap_pair(&fig2_params(Ordering::SP)).unwrap();
        let peak = pulse.peak_effective();
        assert_abs_diff_eq!(peak, TAU * 36.5e3, epsilon = 1e-6 * peak);
        let a = pulse_area(&pulse) / (peak * pulse.duration());
        assert!((a - 0.5093).abs() <= 1e-3, "{a}");
    }

    #[test]
    fn fig2_half_area_is_about_5_6_pi() {
        let pulse = stirap_pair(&fig2_params(Ordering::SP)).unwrap();
        let half = pulse_area(&pulse) / 2.0 / PI;
        assert!((half - 5.6).abs() < 0.05, "{half}");
    }

    #[test]
    fn stokes_precedes_pump_in_sp() {
        let pulse = stirap_pair(&fig2_params(Ordering::SP)).unwrap();
        let t = 0.1 * pulse.duration();
        let (p, s) = pulse.amplitudes_at(t);
        assert!(s > p);
        let (p, s) = pulse.amplitudes_at(0.9 * pulse.duration());
        assert!(p > s);
    }

    #[test]
    fn ps_is_swapped_sp() {
        let sp = stirap_pair(&fig2_params(Ordering::SP)).unwrap();
        let ps = stirap_pair(&fig2_params(Ordering::PS)).unwrap();
        for k in 0..=100 {
            let t = k as f64 * sp.duration() / 100.0;
            let (a, b) = sp.amplitudes_at(t);
            let (c, d) = ps.amplitudes_at(t);
            assert_eq!((a, b), (d, c));
        }
    }

    #[test]
    fn coincident_pulses() {
        let p = PulseShapeParams::with_delay(2.0, 1e-4, 0.0, Ordering::SP).unwrap();
        let pulse = stirap_pair(&p).unwrap();
        for k in 0..=50 {
            let t = k as f64 * 2e-6;
            let (a, b) = pulse.amplitudes_at(t);
            assert_eq!(a, b);
            let expect = SQRT_2 * 2.0 * blackman_window(t, 1e-4).unwrap();
            assert_abs_diff_eq!(pulse.effective_at(t), expect, epsilon = 1e-14);
        }
    }

    #[test]
    fn invalid_shape_params() {
        assert!(PulseShapeParams::new(0.0, 1.0, Ordering::SP).is_err());
        assert!(PulseShapeParams::new(1.0, 0.0, Ordering::SP).is_err());
        assert!(PulseShapeParams::with_delay(1.0, 1.0, 1.0, Ordering::SP).is_err());
        assert!(PulseShapeParams::with_delay(1.0, 1.0, -0.1, Ordering::SP).is_err());
        assert!("XY".parse::<Ordering>().is_err());
        assert_eq!("PS".parse::<Ordering>().unwrap(), Ordering::PS);
    }

    #[test]
    fn truncation() {
        let pulse = stirap_pair(&fig2_params(Ordering::SP)).unwrap();
        assert_eq!(truncate(&pulse, 1.0).unwrap(), pulse);
        let zero = truncate(&pulse, 0.0).unwrap();
        assert!(zero.samples_all_zero());
        assert_eq!(pulse_area(&zero), 0.0);
        let cut = truncate(&pulse, 0.6).unwrap();
        assert_eq!(cut.duration(), pulse.duration());
        let tp = pulse.duration();
        // the cut falls on the pump maximum, t_d + T/2 = 0.6·t_p
        assert_abs_diff_eq!(
            cut.pump.at(0.6 * tp),
            pulse.pump.samples().iter().copied().fold(0.0, f64::max),
            epsilon = 1e-5 * TAU * 36.5e3
        );
        assert_eq!(cut.pump.at(0.6 * tp + 1e-9), 0.0);
        assert_eq!(cut.pump.at(0.5 * tp), pulse.pump.at(0.5 * tp));
        assert!(truncate(&pulse, 1.1).is_err());
        assert!(truncate(&pulse, -0.1).is_err());
    }

    impl TwoTonePulse {
        fn samples_all_zero(&self) -> bool {
            self.pump
                .samples()
                .iter()
                .chain(self.stokes.samples().iter())
                .all(|&x| x == 0.0)
        }
    }

    #[test]
    fn half_stirap_properties() {
        let params = fig2_params(Ordering::SP);
        let gen = stirap_pair(&params).unwrap();
        let half = half_stirap(&params, false).unwrap();
        let tp = gen.duration();
        for k in 0..=400 {
            let t = k as f64 * tp / 400.0;
            assert_abs_diff_eq!(half.effective_at(t), gen.effective_at(t), epsilon = 1e-12 * TAU * 4e4);
        }
        let (p, s) = half.amplitudes_at(1e-3 * tp);
        assert!(p < 1e-3 * s);
        // after the Stokes window closes θ = π/2 and the tones are equal
        let (p, s) = half.amplitudes_at(0.9 * tp);
        assert_abs_diff_eq!(p / s, 1.0, epsilon = 1e-12);
        let rev = half_stirap(&params, true).unwrap();
        for k in 0..=100 {
            let t = k as f64 * tp / 100.0;
            assert_eq!(rev.amplitudes_at(t), half.amplitudes_at(tp - t));
        }
    }

    #[test]
    fn rectangular() {
        let omega = TAU * 36.1e3;
        let two = rectangular_pulse(omega, 13.9e-6, Tones::TwoTone).unwrap();
        let (p, s) = two.amplitudes_at(5e-6);
        assert_abs_diff_eq!(p, omega / SQRT_2, epsilon = 1e-9);
        assert_abs_diff_eq!(s, omega / SQRT_2, epsilon = 1e-9);
        let a = pulse_area(&two) / PI;
        assert!((a - 1.0035).abs() < 0.01 * 1.0035, "{a}");
        let one = rectangular_pulse(omega, 1e-5, Tones::SinglePump).unwrap();
        assert_eq!(one.amplitudes_at(3e-6), (omega, 0.0));
        assert!(rectangular_pulse(0.0, 1e-5, Tones::TwoTone).is_err());
        assert!(rectangular_pulse(1.0, 0.0, Tones::TwoTone).is_err());
    }

    #[test]
    fn pi_pulse_durations() {
        let omega_e = TAU * 36.1e3;
        assert!((pi_duration(omega_e) - 13.9e-6).abs() < 0.1e-6);
        // same per-tone amplitude on a single tone
        assert_abs_diff_eq!(
            pi_duration(omega_e / SQRT_2),
            SQRT_2 * pi_duration(omega_e),
            epsilon = 1e-18
        );
    }

    #[test]
    fn waveform_export() {
        let pulse = rectangular_pulse(1.0, 1e-5, Tones::TwoTone)
            .unwrap()
            .with_carriers(TAU * 5.089e6, TAU * 4.797e6)
            .unwrap();
        let mut buf = Vec::new();
        write_waveform_csv(&pulse, &mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let mut lines = text.lines();
        assert_eq!(lines.next(), Some("t_s,amplitude"));
        assert_eq!(text.lines().count(), DEFAULT_SAMPLES + 2);
        assert!(write_waveform_csv(&rectangular_pulse(1.0, 1e-5, Tones::TwoTone).unwrap(), Vec::new()).is_err());
    }

    #[test]
    fn field_conversion() {
        assert_abs_diff_eq!(rabi_from_field(1.0), TAU * 307.59, epsilon = 1e-9);
    }
}
