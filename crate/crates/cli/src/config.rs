//! Run configuration. Every experiment starts from its own defaults; a TOML
//! file (or the `config` object of a metadata sidecar) and then `--set`
//! overrides are merged on top. The origin of every key is kept so that
//! diagnostics can point at the offending line.

use std::collections::BTreeMap;
use std::fmt;
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use stirap_core::analysis::{linear_axis, MapSetup, RabiSetup, Window};
use stirap_core::ensemble::EnsembleSpec;
use stirap_core::hamiltonian::{DetuningSpec, HamiltonianModel, HamiltonianVariant};
use stirap_core::propagator::{Integrator, Scheme, TimeGrid};
use stirap_core::pulses::{
    blackman_peak_ratio, half_stirap, stirap_pair, truncate, Ordering, PulseShapeParams, TwoTonePulse,
};
use stirap_core::ramsey::{RamseyParams, ReadoutModel, SequenceKind, Transitions};

use crate::error::CliError;

const TWO_PI: f64 = 2.0 * std::f64::consts::PI;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "kebab-case")]
pub enum Experiment {
    StirapDynamics,
    RamseyFringes,
    RobustnessMap,
    RabiSpectrum,
    Waveform,
}

impl Experiment {
    pub fn name(self) -> &'static str {
        match self {
            Experiment::StirapDynamics => "stirap-dynamics",
            Experiment::RamseyFringes => "ramsey-fringes",
            Experiment::RobustnessMap => "robustness-map",
            Experiment::RabiSpectrum => "rabi-spectrum",
            Experiment::Waveform => "waveform",
        }
    }

    /// Sections read by this experiment, besides `experiment` and `output`.
    pub fn sections(self) -> &'static [&'static str] {
        match self {
            Experiment::StirapDynamics => &[
                "transitions",
                "hamiltonian",
                "pulse",
                "ensemble",
                "numerics",
                "dynamics",
            ],
            Experiment::RamseyFringes => &[
                "transitions",
                "hamiltonian",
                "sequence",
                "ensemble",
                "readout",
                "numerics",
                "fringes",
            ],
            Experiment::RobustnessMap => &[
                "transitions",
                "hamiltonian",
                "sequence",
                "ensemble",
                "readout",
                "numerics",
                "map",
            ],
            Experiment::RabiSpectrum => &["hamiltonian", "ensemble", "numerics", "rabi"],
            Experiment::Waveform => &["transitions", "hamiltonian", "pulse"],
        }
    }
}

impl fmt::Display for Experiment {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TransitionsSection {
    pub f1_hz: f64,
    pub f2_hz: f64,
}

/// `variant` is `"ac-zeeman"` or `"plain-rwa"`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct HamiltonianSection {
    pub variant: String,
    pub delta_hz: f64,
    pub two_photon_hz: f64,
}

/// `shape` is `"stirap"`, `"half-stirap"` or `"half-stirap-reversed"`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PulseSection {
    pub shape: String,
    pub ordering: String,
    /// Peak effective Rabi frequency `Ω_peak/2π`.
    pub peak_rabi_hz: f64,
    /// Blackman window width `T`.
    pub width_us: f64,
    /// Pump/Stokes delay `t_d`.
    pub delay_us: f64,
    pub samples: usize,
    pub truncate_fraction: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EnsembleSection {
    /// FWHM of the Rabi-frequency distribution over its mean; 0 disables it.
    pub fwhm_fraction: f64,
    pub nodes: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ReadoutSection {
    pub brightness: [f64; 3],
}

/// `scheme` is `"magnus4"` or `"midpoint"`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NumericsSection {
    pub scheme: String,
    pub tol: f64,
    /// Output step of the trajectory; the pulse sample step when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub dt_us: Option<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DynamicsSection {
    /// Diagonal initial state; a basis vector gives a pure state.
    pub initial_populations: [f64; 3],
}

/// Fields left out take the values of the chosen `kind`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SequenceSection {
    pub kind: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub rabi_hz: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub t_p_us: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub samples: Option<usize>,
    pub pi_phase: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FringesSection {
    pub tau0_us: f64,
    pub dtau_ns: f64,
    pub count: usize,
    /// `"hann"` or `"rectangular"`.
    pub window: String,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MapSection {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub tau_us: Option<f64>,
    pub delta_min_hz: f64,
    pub delta_max_hz: f64,
    pub delta_points: usize,
    pub omega_min_hz: f64,
    pub omega_max_hz: f64,
    pub omega_points: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RabiSection {
    pub rabi_hz: f64,
    pub duration_us: f64,
    pub dt_us: f64,
    pub padding: usize,
    pub window: String,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub experiment: Experiment,
    /// Output directory.
    pub output: String,
    pub transitions: TransitionsSection,
    pub hamiltonian: HamiltonianSection,
    pub pulse: PulseSection,
    pub ensemble: EnsembleSection,
    pub readout: ReadoutSection,
    pub numerics: NumericsSection,
    pub dynamics: DynamicsSection,
    pub sequence: SequenceSection,
    pub fringes: FringesSection,
    pub map: MapSection,
    pub rabi: RabiSection,
}

/// One validation failure, keyed by the dotted config path.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Diagnostic {
    pub key: String,
    pub message: String,
}

impl Diagnostic {
    fn new(key: &str, message: impl Into<String>) -> Self {
        Diagnostic {
            key: key.to_string(),
            message: message.into(),
        }
    }
}

impl fmt::Display for Diagnostic {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}: {}", self.key, self.message)
    }
}

fn parse_variant(s: &str) -> Option<HamiltonianVariant> {
    match s {
        "ac-zeeman" => Some(HamiltonianVariant::AcZeeman),
        "plain-rwa" => Some(HamiltonianVariant::PlainRwa),
        _ => None,
    }
}

fn parse_scheme(s: &str) -> Option<Scheme> {
    match s {
        "magnus4" => Some(Scheme::Magnus4),
        "midpoint" => Some(Scheme::Midpoint),
        _ => None,
    }
}

fn parse_window(s: &str) -> Option<Window> {
    match s {
        "hann" => Some(Window::Hann),
        "rectangular" => Some(Window::Rectangular),
        _ => None,
    }
}

fn parse_shape(s: &str) -> Option<(bool, bool)> {
    match s {
        "stirap" => Some((false, false)),
        "half-stirap" => Some((true, false)),
        "half-stirap-reversed" => Some((true, true)),
        _ => None,
    }
}

struct Checker(Vec<Diagnostic>);

impl Checker {
    fn require(&mut self, ok: bool, key: &str, message: impl FnOnce() -> String) {
        if !ok {
            self.0.push(Diagnostic::new(key, message()));
        }
    }

    fn positive(&mut self, key: &str, v: f64) {
        self.require(v > 0.0 && v.is_finite(), key, || {
            format!("must be a positive number, got {v}")
        });
    }

    fn finite(&mut self, key: &str, v: f64) {
        self.require(v.is_finite(), key, || format!("must be finite, got {v}"));
    }

    fn choice<T>(&mut self, key: &str, v: &str, parse: fn(&str) -> Option<T>, allowed: &[&str]) {
        if parse(v).is_none() {
            let list = allowed.iter().map(|a| format!("{a:?}")).collect::<Vec<_>>().join(", ");
            self.0
                .push(Diagnostic::new(key, format!("must be one of {list}, got {v:?}")));
        }
    }
}

impl RunConfig {
    pub fn defaults(experiment: Experiment) -> Self {
        let tr = Transitions::default();
        let readout = ReadoutModel::default();
        let rabi = RabiSetup::default();
        let mut c = RunConfig {
            experiment,
            output: "output".into(),
            transitions: TransitionsSection {
                f1_hz: tr.f1,
                f2_hz: tr.f2,
            },
            hamiltonian: HamiltonianSection {
                variant: "ac-zeeman".into(),
                delta_hz: 0.0,
                two_photon_hz: 0.0,
            },
            pulse: PulseSection {
                shape: "stirap".into(),
                ordering: "SP".into(),
                peak_rabi_hz: 36.5e3,
                width_us: 240.0,
                delay_us: 60.0,
                samples: 4096,
                truncate_fraction: 1.0,
            },
            ensemble: EnsembleSection {
                fwhm_fraction: stirap_core::ensemble::DEFAULT_FWHM_FRACTION,
                nodes: stirap_core::ensemble::DEFAULT_NODES,
            },
            readout: ReadoutSection {
                brightness: readout.brightness,
            },
            numerics: NumericsSection {
                scheme: "magnus4".into(),
                tol: stirap_core::propagator::DEFAULT_TOL,
                dt_us: None,
            },
            dynamics: DynamicsSection {
                initial_populations: [1.0, 0.0, 0.0],
            },
            sequence: SequenceSection {
                kind: "STIRAP".into(),
                rabi_hz: None,
                t_p_us: None,
                samples: None,
                pi_phase: 0.0,
            },
            fringes: FringesSection {
                tau0_us: 0.0,
                dtau_ns: 50.0,
                count: 1024,
                window: "hann".into(),
            },
            map: MapSection {
                tau_us: None,
                delta_min_hz: -20e3,
                delta_max_hz: 20e3,
                delta_points: 41,
                omega_min_hz: 10e3,
                omega_max_hz: 60e3,
                omega_points: 41,
            },
            rabi: RabiSection {
                rabi_hz: rabi.omega / TWO_PI,
                duration_us: rabi.duration * 1e6,
                dt_us: rabi.dt * 1e6,
                padding: rabi.padding,
                window: "rectangular".into(),
            },
        };
        match experiment {
            Experiment::RobustnessMap => c.numerics.tol = stirap_core::analysis::MAP_TOL,
            Experiment::RabiSpectrum => c.ensemble.nodes = rabi.nodes,
            Experiment::Waveform => c.pulse.samples = 65536,
            _ => {}
        }
        c
    }

    /// Fills the kind-dependent sequence fields and the map delay.
    pub fn resolve(&mut self) {
        let Ok(kind) = SequenceKind::from_str(&self.sequence.kind) else {
            return;
        };
        let p = RamseyParams::for_kind(kind);
        let s = &mut self.sequence;
        s.rabi_hz.get_or_insert(p.omega / TWO_PI);
        s.t_p_us.get_or_insert(p.t_p * 1e6);
        s.samples.get_or_insert(p.samples);
        let tau = MapSetup::for_kind(kind).tau;
        self.map.tau_us.get_or_insert(tau * 1e6);
    }

    /// Every violation in the sections this experiment reads. Never mutates.
    pub fn validate(&self) -> Vec<Diagnostic> {
        let mut c = Checker(Vec::new());
        c.require(!self.output.is_empty(), "output", || "must name a directory".into());
        for &section in self.experiment.sections() {
            match section {
                "transitions" => self.check_transitions(&mut c),
                "hamiltonian" => self.check_hamiltonian(&mut c),
                "pulse" => self.check_pulse(&mut c),
                "ensemble" => self.check_ensemble(&mut c),
                "readout" => {
                    let b = self.readout.brightness;
                    c.require(b.iter().all(|x| *x > 0.0 && *x <= 1.0), "readout.brightness", || {
                        format!("coefficients must lie in (0, 1], got {b:?}")
                    });
                }
                "numerics" => self.check_numerics(&mut c),
                "dynamics" => {
                    let p = self.dynamics.initial_populations;
                    let total: f64 = p.iter().sum();
                    c.require(
                        p.iter().all(|x| *x >= 0.0) && (total - 1.0).abs() <= 1e-9,
                        "dynamics.initial_populations",
                        || format!("must be non-negative and sum to 1, got {p:?}"),
                    );
                }
                "sequence" => self.check_sequence(&mut c),
                "fringes" => self.check_fringes(&mut c),
                "map" => self.check_map(&mut c),
                "rabi" => self.check_rabi(&mut c),
                _ => unreachable!("unknown section {section}"),
            }
        }
        c.0
    }

    fn check_transitions(&self, c: &mut Checker) {
        let t = &self.transitions;
        c.positive("transitions.f1_hz", t.f1_hz);
        c.positive("transitions.f2_hz", t.f2_hz);
        c.require(t.f1_hz != t.f2_hz, "transitions.f2_hz", || {
            "must differ from f1_hz".into()
        });
    }

    fn check_hamiltonian(&self, c: &mut Checker) {
        let h = &self.hamiltonian;
        c.choice(
            "hamiltonian.variant",
            &h.variant,
            parse_variant,
            &["ac-zeeman", "plain-rwa"],
        );
        c.finite("hamiltonian.delta_hz", h.delta_hz);
        c.finite("hamiltonian.two_photon_hz", h.two_photon_hz);
    }

    fn check_pulse(&self, c: &mut Checker) {
        let p = &self.pulse;
        c.choice(
            "pulse.shape",
            &p.shape,
            parse_shape,
            &["stirap", "half-stirap", "half-stirap-reversed"],
        );
        c.choice(
            "pulse.ordering",
            &p.ordering,
            |s| Ordering::from_str(s).ok(),
            &["SP", "PS"],
        );
        c.positive("pulse.peak_rabi_hz", p.peak_rabi_hz);
        c.positive("pulse.width_us", p.width_us);
        c.require(p.delay_us >= 0.0, "pulse.delay_us", || {
            format!("t_d must be >= 0, got {}", p.delay_us)
        });
        c.require(p.delay_us < p.width_us, "pulse.delay_us", || {
            format!(
                "t_d must be smaller than T (t_d = {} us, T = {} us)",
                p.delay_us, p.width_us
            )
        });
        c.require(p.samples >= 2, "pulse.samples", || {
            format!("must be >= 2, got {}", p.samples)
        });
        c.require(
            (0.0..=1.0).contains(&p.truncate_fraction),
            "pulse.truncate_fraction",
            || format!("must lie in [0, 1], got {}", p.truncate_fraction),
        );
    }

    fn check_ensemble(&self, c: &mut Checker) {
        let e = &self.ensemble;
        c.require(
            e.fwhm_fraction >= 0.0 && e.fwhm_fraction.is_finite(),
            "ensemble.fwhm_fraction",
            || format!("must be >= 0, got {}", e.fwhm_fraction),
        );
        c.require(e.nodes % 2 == 1, "ensemble.nodes", || {
            format!("must be odd and >= 1, got {}", e.nodes)
        });
    }

    fn check_numerics(&self, c: &mut Checker) {
        let n = &self.numerics;
        c.choice("numerics.scheme", &n.scheme, parse_scheme, &["magnus4", "midpoint"]);
        c.require((1e-12..=1e-6).contains(&n.tol), "numerics.tol", || {
            format!("must lie in [1e-12, 1e-6], got {}", n.tol)
        });
        if let Some(dt) = n.dt_us {
            c.positive("numerics.dt_us", dt);
        }
    }

    fn check_sequence(&self, c: &mut Checker) {
        let s = &self.sequence;
        c.choice(
            "sequence.kind",
            &s.kind,
            |k| SequenceKind::from_str(k).ok(),
            &["DQ", "STIRAP"],
        );
        if let Some(v) = s.rabi_hz {
            c.positive("sequence.rabi_hz", v);
        }
        if let Some(v) = s.t_p_us {
            c.positive("sequence.t_p_us", v);
        }
        if let Some(n) = s.samples {
            c.require(n >= 2, "sequence.samples", || format!("must be >= 2, got {n}"));
        }
        c.finite("sequence.pi_phase", s.pi_phase);
    }

    fn check_fringes(&self, c: &mut Checker) {
        let f = &self.fringes;
        c.require(f.tau0_us >= 0.0 && f.tau0_us.is_finite(), "fringes.tau0_us", || {
            format!("tau must be >= 0, got {}", f.tau0_us)
        });
        c.positive("fringes.dtau_ns", f.dtau_ns);
        c.require(f.count >= 8, "fringes.count", || {
            format!("needs at least 8 delays, got {}", f.count)
        });
        c.choice("fringes.window", &f.window, parse_window, &["hann", "rectangular"]);
    }

    fn check_map(&self, c: &mut Checker) {
        let m = &self.map;
        if let Some(tau) = m.tau_us {
            c.require(tau >= 0.0 && tau.is_finite(), "map.tau_us", || {
                format!("tau must be >= 0, got {tau}")
            });
        }
        c.finite("map.delta_min_hz", m.delta_min_hz);
        c.finite("map.delta_max_hz", m.delta_max_hz);
        c.require(m.delta_points >= 1, "map.delta_points", || "must be >= 1".into());
        c.require(
            m.delta_points == 1 || m.delta_max_hz > m.delta_min_hz,
            "map.delta_max_hz",
            || "must exceed delta_min_hz".into(),
        );
        c.positive("map.omega_min_hz", m.omega_min_hz);
        c.finite("map.omega_max_hz", m.omega_max_hz);
        c.require(m.omega_points >= 1, "map.omega_points", || "must be >= 1".into());
        c.require(
            m.omega_points == 1 || m.omega_max_hz > m.omega_min_hz,
            "map.omega_max_hz",
            || "must exceed omega_min_hz".into(),
        );
    }

    fn check_rabi(&self, c: &mut Checker) {
        let r = &self.rabi;
        c.positive("rabi.rabi_hz", r.rabi_hz);
        c.positive("rabi.duration_us", r.duration_us);
        c.positive("rabi.dt_us", r.dt_us);
        c.require(r.duration_us >= 8.0 * r.dt_us, "rabi.dt_us", || {
            "the record needs at least 8 samples".into()
        });
        c.require(r.padding >= 1, "rabi.padding", || "must be >= 1".into());
        c.choice("rabi.window", &r.window, parse_window, &["hann", "rectangular"]);
    }

    // Conversions below assume `validate` returned no diagnostics.

    pub fn model(&self) -> HamiltonianModel {
        HamiltonianModel {
            variant: parse_variant(&self.hamiltonian.variant).expect("validated"),
            detuning: DetuningSpec {
                delta: TWO_PI * self.hamiltonian.delta_hz,
                two_photon: TWO_PI * self.hamiltonian.two_photon_hz,
            },
        }
    }

    pub fn transitions(&self) -> Transitions {
        Transitions {
            f1: self.transitions.f1_hz,
            f2: self.transitions.f2_hz,
        }
    }

    pub fn integrator(&self) -> Integrator {
        Integrator {
            scheme: parse_scheme(&self.numerics.scheme).expect("validated"),
            tol: self.numerics.tol,
        }
    }

    pub fn readout(&self) -> ReadoutModel {
        ReadoutModel {
            brightness: self.readout.brightness,
        }
    }

    pub fn pulse_params(&self) -> stirap_core::Result<PulseShapeParams> {
        let p = &self.pulse;
        let (width, delay) = (p.width_us * 1e-6, p.delay_us * 1e-6);
        let ratio = blackman_peak_ratio(delay / width)?;
        let ordering = Ordering::from_str(&p.ordering)?;
        PulseShapeParams::with_delay(TWO_PI * p.peak_rabi_hz / ratio, width, delay, ordering)?.samples(p.samples)
    }

    /// Pulse with carriers at the detuned tone frequencies.
    pub fn pulse(&self) -> stirap_core::Result<TwoTonePulse> {
        let params = self.pulse_params()?;
        let (half, reversed) = parse_shape(&self.pulse.shape).expect("validated");
        let pulse = if half {
            half_stirap(&params, reversed)?
        } else {
            stirap_pair(&params)?
        };
        let (wp, ws) = self.transitions().carriers(TWO_PI * self.hamiltonian.delta_hz);
        truncate(&pulse, self.pulse.truncate_fraction)?.with_carriers(wp, ws)
    }

    pub fn time_grid(&self, pulse: &TwoTonePulse) -> stirap_core::Result<TimeGrid> {
        match self.numerics.dt_us {
            Some(dt) => TimeGrid::new(0.0, pulse.duration(), dt * 1e-6),
            None => TimeGrid::for_pulse(pulse),
        }
    }

    pub fn ensemble(&self, mean: f64) -> stirap_core::Result<EnsembleSpec> {
        EnsembleSpec::from_fwhm_fraction(mean, self.ensemble.fwhm_fraction, self.ensemble.nodes)
    }

    /// Sequence parameters; call after [`RunConfig::resolve`].
    pub fn ramsey_params(&self) -> stirap_core::Result<RamseyParams> {
        let s = &self.sequence;
        let kind = SequenceKind::from_str(&s.kind)?;
        let d = RamseyParams::for_kind(kind);
        let p = RamseyParams {
            kind,
            omega: s.rabi_hz.map_or(d.omega, |v| TWO_PI * v),
            t_p: s.t_p_us.map_or(d.t_p, |v| v * 1e-6),
            pi_phase: s.pi_phase,
            transitions: self.transitions(),
            samples: s.samples.unwrap_or(d.samples),
        };
        p.validate()?;
        Ok(p)
    }

    pub fn fringe_window(&self) -> Window {
        parse_window(&self.fringes.window).expect("validated")
    }

    pub fn map_setup(&self) -> stirap_core::Result<MapSetup> {
        let params = self.ramsey_params()?;
        let d = MapSetup::for_kind(params.kind);
        let setup = MapSetup {
            params,
            tau: self.map.tau_us.map_or(d.tau, |v| v * 1e-6),
            variant: self.model().variant,
            readout: self.readout(),
            fwhm_fraction: self.ensemble.fwhm_fraction,
            nodes: self.ensemble.nodes,
            integrator: self.integrator(),
        };
        setup.validate()?;
        Ok(setup)
    }

    /// `(Δ, Ω)` axes in rad/s.
    pub fn map_axes(&self) -> stirap_core::Result<(Vec<f64>, Vec<f64>)> {
        let m = &self.map;
        let delta = linear_axis(TWO_PI * m.delta_min_hz, TWO_PI * m.delta_max_hz, m.delta_points)?;
        let omega = linear_axis(TWO_PI * m.omega_min_hz, TWO_PI * m.omega_max_hz, m.omega_points)?;
        Ok((delta, omega))
    }

    pub fn rabi_setup(&self) -> stirap_core::Result<RabiSetup> {
        let r = &self.rabi;
        let setup = RabiSetup {
            omega: TWO_PI * r.rabi_hz,
            fwhm_fraction: self.ensemble.fwhm_fraction,
            nodes: self.ensemble.nodes,
            duration: r.duration_us * 1e-6,
            dt: r.dt_us * 1e-6,
            padding: r.padding,
            window: parse_window(&r.window).expect("validated"),
            delta: TWO_PI * self.hamiltonian.delta_hz,
        };
        setup.validate()?;
        Ok(setup)
    }

    /// TOML text with only the keys this experiment reads.
    pub fn to_toml_for_experiment(&self) -> String {
        let full = toml::Table::try_from(self).expect("config serializes");
        let mut out = toml::Table::new();
        for key in ["experiment", "output"].iter().chain(self.experiment.sections()) {
            if let Some(v) = full.get(*key) {
                out.insert(key.to_string(), v.clone());
            }
        }
        toml::to_string(&out).expect("config serializes")
    }
}

/// Where a key's value came from.
#[derive(Clone, Debug, PartialEq)]
pub enum Origin {
    File { path: String, line: Option<usize> },
    Set(String),
}

impl fmt::Display for Origin {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Origin::File { path, line: Some(l) } => write!(f, "{path}:{l}"),
            Origin::File { path, line: None } => write!(f, "{path}"),
            Origin::Set(arg) => write!(f, "--set {arg}"),
        }
    }
}

#[derive(Clone, Debug, Default)]
pub struct Provenance(BTreeMap<String, Origin>);

impl Provenance {
    /// Origin of `key` or of its closest enclosing table; `None` for defaults.
    pub fn locate(&self, key: &str) -> Option<&Origin> {
        let mut k = key;
        loop {
            if let Some(o) = self.0.get(k) {
                return Some(o);
            }
            k = &k[..k.rfind('.')?];
        }
    }

    pub fn render(&self, d: &Diagnostic) -> String {
        match self.locate(&d.key) {
            Some(o) => format!("{o}: {d}"),
            None => format!("defaults: {d}"),
        }
    }
}

/// 1-based line of byte offset `pos`.
fn line_of(text: &str, pos: usize) -> usize {
    text[..pos.min(text.len())].matches('\n').count() + 1
}

/// Line of every `key = value` and `[table]` in a TOML document, as dotted
/// paths.
fn key_lines(text: &str) -> Vec<(String, usize)> {
    let mut out = Vec::new();
    let mut table = String::new();
    for (i, raw) in text.lines().enumerate() {
        let line = raw.trim();
        if line.starts_with('[') {
            table = line.trim_matches(|c| c == '[' || c == ']').trim().to_string();
            out.push((table.clone(), i + 1));
        } else if let Some((k, _)) = line.split_once('=') {
            let k = k.trim().trim_matches('"');
            if !k.is_empty() && !k.starts_with('#') {
                let path = if table.is_empty() {
                    k.to_string()
                } else {
                    format!("{table}.{k}")
                };
                out.push((path, i + 1));
            }
        }
    }
    out
}

fn leaf_paths(prefix: &str, table: &toml::Table, out: &mut Vec<String>) {
    for (k, v) in table {
        let path = if prefix.is_empty() {
            k.clone()
        } else {
            format!("{prefix}.{k}")
        };
        if let toml::Value::Table(t) = v {
            leaf_paths(&path, t, out);
        }
        out.push(path);
    }
}

fn merge(base: &mut toml::Table, overlay: toml::Table) {
    for (k, v) in overlay {
        match (base.get_mut(&k), v) {
            (Some(toml::Value::Table(b)), toml::Value::Table(o)) => merge(b, o),
            (_, v) => {
                base.insert(k, v);
            }
        }
    }
}

/// Reads a TOML config, or the `config` object of a JSON metadata sidecar.
fn read_file(path: &Path, prov: &mut Provenance) -> Result<toml::Table, CliError> {
    let name = path.display().to_string();
    let text = std::fs::read_to_string(path).map_err(|e| CliError::Io(format!("cannot read {name}: {e}")))?;
    if path.extension().is_some_and(|e| e == "json") {
        let mut json: serde_json::Value =
            serde_json::from_str(&text).map_err(|e| CliError::Config(vec![format!("{name}:{}: {e}", e.line())]))?;
        if let Some(inner) = json.get_mut("config") {
            json = inner.take();
        }
        let table = toml::Table::try_from(json)
            .map_err(|e| CliError::Config(vec![format!("{name}: not a config object: {e}")]))?;
        let mut paths = Vec::new();
        leaf_paths("", &table, &mut paths);
        for p in paths {
            prov.0.insert(
                p,
                Origin::File {
                    path: name.clone(),
                    line: None,
                },
            );
        }
        return Ok(table);
    }
    let table: toml::Table = text.parse().map_err(|e: toml::de::Error| {
        let at = e
            .span()
            .map(|s| format!(":{}", line_of(&text, s.start)))
            .unwrap_or_default();
        CliError::Config(vec![format!("{name}{at}: {}", e.message().trim_end())])
    })?;
    for (k, line) in key_lines(&text) {
        prov.0.insert(
            k,
            Origin::File {
                path: name.clone(),
                line: Some(line),
            },
        );
    }
    Ok(table)
}

/// Applies one `key=value` override. The value is read as a TOML literal
/// and falls back to a bare string.
fn apply_set(table: &mut toml::Table, arg: &str, prov: &mut Provenance) -> Result<(), CliError> {
    let fail = |m: &str| CliError::Config(vec![format!("--set {arg}: {m}")]);
    let (key, raw) = arg.split_once('=').ok_or_else(|| fail("expected key=value"))?;
    let key = key.trim();
    if key.is_empty() || key.split('.').any(str::is_empty) {
        return Err(fail("empty key"));
    }
    let raw = raw.trim();
    let value = format!("v = {raw}")
        .parse::<toml::Table>()
        .ok()
        .and_then(|mut t| t.remove("v"))
        .unwrap_or_else(|| toml::Value::String(raw.to_string()));
    let parts: Vec<&str> = key.split('.').collect();
    let mut cur = table;
    for part in &parts[..parts.len() - 1] {
        let entry = cur
            .entry(part.to_string())
            .or_insert_with(|| toml::Value::Table(toml::Table::new()));
        cur = entry
            .as_table_mut()
            .ok_or_else(|| fail(&format!("{part} is not a table")))?;
    }
    cur.insert(parts[parts.len() - 1].to_string(), value);
    prov.0.insert(key.to_string(), Origin::Set(arg.to_string()));
    Ok(())
}

pub struct Loaded {
    pub config: RunConfig,
    pub provenance: Provenance,
}

/// Defaults for `experiment`, then `file`, then `sets`; resolved and
/// validated.
pub fn load(experiment: Experiment, file: Option<&Path>, sets: &[String]) -> Result<Loaded, CliError> {
    let mut prov = Provenance::default();
    let mut table = toml::Table::try_from(RunConfig::defaults(experiment)).expect("defaults serialize");
    if let Some(path) = file {
        let overlay = read_file(path, &mut prov)?;
        merge(&mut table, overlay);
    }
    for arg in sets {
        apply_set(&mut table, arg, &mut prov)?;
    }
    let mut config: RunConfig = serde_path_to_error::deserialize(toml::Value::Table(table)).map_err(|e| {
        let key = e.path().to_string();
        let d = Diagnostic::new(&key, e.into_inner().message().trim_end().to_string());
        CliError::Config(vec![prov.render(&d)])
    })?;
    if config.experiment != experiment {
        let d = Diagnostic::new(
            "experiment",
            format!(
                "the config is for {} but the subcommand is {experiment}",
                config.experiment
            ),
        );
        return Err(CliError::Config(vec![prov.render(&d)]));
    }
    config.resolve();
    let diagnostics = config.validate();
    if !diagnostics.is_empty() {
        return Err(CliError::Config(diagnostics.iter().map(|d| prov.render(d)).collect()));
    }
    Ok(Loaded {
        config,
        provenance: prov,
    })
}
