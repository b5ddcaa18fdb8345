//! Gaussian averaging over the effective Rabi frequency.

use std::num::NonZeroUsize;

use gauss_quad::GaussHermite;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::hamiltonian::HamiltonianModel;
use crate::propagator::{InitialState, Integrator, TimeGrid, Trajectory};
use crate::pulses::TwoTonePulse;

/// `2√(2 ln 2)`
pub const FWHM_PER_SIGMA: f64 = 2.354_820_045_030_949_4;

pub const DEFAULT_NODES: usize = 21;
pub const DEFAULT_FWHM_FRACTION: f64 = 0.164;

pub fn sigma_from_fwhm(fwhm: f64) -> Result<f64> {
    if !(fwhm > 0.0 && fwhm.is_finite()) {
        return Err(invalid(format!("fwhm must be positive, got {fwhm}")));
    }
    Ok(fwhm / FWHM_PER_SIGMA)
}

/// Mean `⟨Ω_e⟩` and width `σ` (rad/s) with an odd Gauss–Hermite order.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct EnsembleSpec {
    pub mean: f64,
    pub sigma: f64,
    pub nodes: usize,
}

impl EnsembleSpec {
    pub fn new(mean: f64, sigma: f64, nodes: usize) -> Result<Self> {
        let s = EnsembleSpec { mean, sigma, nodes };
        s.validate()?;
        Ok(s)
    }

    /// A single member at `mean`.
    pub fn sharp(mean: f64) -> Self {
        EnsembleSpec {
            mean,
            sigma: 0.0,
            nodes: 1,
        }
    }

    /// Width given as a FWHM fraction of the mean.
    pub fn from_fwhm_fraction(mean: f64, fraction: f64, nodes: usize) -> Result<Self> {
        let sigma = if fraction == 0.0 {
            0.0
        } else {
            sigma_from_fwhm(fraction * mean)?
        };
        EnsembleSpec::new(mean, sigma, nodes)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.mean > 0.0 && self.mean.is_finite()) {
            return Err(invalid(format!("ensemble mean must be positive, got {}", self.mean)));
        }
        if !(self.sigma >= 0.0 && self.sigma.is_finite()) {
            return Err(invalid(format!("ensemble sigma must be >= 0, got {}", self.sigma)));
        }
        if self.nodes == 0 || self.nodes.is_multiple_of(2) {
            return Err(invalid(format!(
                "quadrature nodes must be odd and >= 1, got {}",
                self.nodes
            )));
        }
        Ok(())
    }

    /// Same relative width around a new mean.
    pub fn with_mean(&self, mean: f64) -> Result<Self> {
        EnsembleSpec::new(mean, self.sigma * mean / self.mean, self.nodes)
    }

    /// `σ / ⟨Ω_e⟩`
    pub fn relative_sigma(&self) -> f64 {
        self.sigma / self.mean
    }

    /// Quadrature nodes `(Ω', weight)` in ascending `Ω'`, weights summing
    /// to one. Nodes below zero are clamped to zero.
    pub fn points(&self) -> Result<Vec<(f64, f64)>> {
        self.validate()?;
        if self.sigma == 0.0 {
            return Ok(vec![(self.mean, 1.0)]);
        }
        let n = NonZeroUsize::new(self.nodes).expect("validated");
        let rule = GaussHermite::new(n);
        let norm = std::f64::consts::PI.sqrt();
        let mut clamped = 0usize;
        let pts = rule
            .as_node_weight_pairs()
            .iter()
            .map(|&(x, w)| {
                let mut omega = self.mean + std::f64::consts::SQRT_2 * self.sigma * x;
                if omega < 0.0 {
                    clamped += 1;
                    omega = 0.0;
                }
                (omega, w / norm)
            })
            .collect();
        if clamped > 0 {
            log::warn!("{clamped} quadrature node(s) fell below zero Rabi frequency and were clamped");
        }
        Ok(pts)
    }

    /// Nodes expressed as multiplicative scale factors `Ω'/⟨Ω_e⟩`.
    pub fn scales(&self) -> Result<Vec<(f64, f64)>> {
        Ok(self.points()?.into_iter().map(|(o, w)| (o / self.mean, w)).collect())
    }
}

/// Values that can be combined as weighted sums.
pub trait Averageable: Sized + Send {
    fn scaled(&self, w: f64) -> Self;
    fn accumulate(&mut self, other: &Self, w: f64) -> Result<()>;
    fn all_finite(&self) -> bool;
}

impl Averageable for f64 {
    fn scaled(&self, w: f64) -> Self {
        self * w
    }

    fn accumulate(&mut self, other: &Self, w: f64) -> Result<()> {
        *self += w * other;
        Ok(())
    }

    fn all_finite(&self) -> bool {
        self.is_finite()
    }
}

impl<const N: usize> Averageable for [f64; N] {
    fn scaled(&self, w: f64) -> Self {
        self.map(|x| x * w)
    }

    fn accumulate(&mut self, other: &Self, w: f64) -> Result<()> {
        for (a, b) in self.iter_mut().zip(other) {
            *a += w * b;
        }
        Ok(())
    }

    fn all_finite(&self) -> bool {
        self.iter().all(|x| x.is_finite())
    }
}

impl<T: Averageable + Sync> Averageable for Vec<T> {
    fn scaled(&self, w: f64) -> Self {
        self.iter().map(|x| x.scaled(w)).collect()
    }

    fn accumulate(&mut self, other: &Self, w: f64) -> Result<()> {
        if self.len() != other.len() {
            return Err(invalid("cannot average values of different lengths"));
        }
        for (a, b) in self.iter_mut().zip(other) {
            a.accumulate(b, w)?;
        }
        Ok(())
    }

    fn all_finite(&self) -> bool {
        self.iter().all(|x| x.all_finite())
    }
}

/// Gauss–Hermite average of `f(Ω')`. Node evaluations run in parallel; the
/// weighted sum is taken in ascending node order.
pub fn gaussian_average<T, F>(spec: &EnsembleSpec, f: F) -> Result<T>
where
    T: Averageable,
    F: Fn(f64) -> Result<T> + Sync,
{
    let pts = spec.points()?;
    let values: Vec<T> = pts.par_iter().map(|&(omega, _)| f(omega)).collect::<Result<Vec<T>>>()?;
    let mut iter = values.iter().zip(&pts);
    let (first, &(_, w0)) = iter.next().expect("at least one node");
    let mut acc = first.scaled(w0);
    for (v, &(_, w)) in iter {
        acc.accumulate(v, w)?;
    }
    if !acc.all_finite() {
        return Err(Error::NonFinite("ensemble average".into()));
    }
    Ok(acc)
}

/// Population trajectory averaged over the ensemble; the pulse amplitude is
/// scaled by `Ω'/⟨Ω_e⟩` at each node.
pub fn evolve_averaged(
    integrator: &Integrator,
    model: &HamiltonianModel,
    pulse: &TwoTonePulse,
    init: InitialState,
    grid: &TimeGrid,
    spec: &EnsembleSpec,
) -> Result<Trajectory> {
    let mean = spec.mean;
    let populations = gaussian_average(spec, |omega| {
        let scaled = pulse.scaled(omega / mean);
        Ok(integrator.evolve(model, &scaled, init, grid)?.populations)
    })?;
    Ok(Trajectory {
        times: grid.times(),
        populations,
        states: None,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    const TAU: f64 = 2.0 * std::f64::consts::PI;

    #[test]
    fn sigma_conversion() {
        assert_abs_diff_eq!(sigma_from_fwhm(2.35482).unwrap(), 1.0, epsilon = 1e-5);
        let s = sigma_from_fwhm(0.166 * TAU * 36.5e3).unwrap() / TAU;
        assert!((s - 2573.0).abs() < 1.0, "{s}");
        assert_abs_diff_eq!(sigma_from_fwhm(0.164).unwrap(), 0.06964, epsilon = 1e-5);
        assert!(sigma_from_fwhm(0.0).is_err());
    }

    #[test]
    fn spec_validation() {
        assert!(EnsembleSpec::new(1.0, 0.1, 20).is_err());
        assert!(EnsembleSpec::new(1.0, -0.1, 21).is_err());
        assert!(EnsembleSpec::new(0.0, 0.1, 21).is_err());
        assert!(EnsembleSpec::new(1.0, 0.1, 21).is_ok());
    }

    #[test]
    fn sharp_ensemble_is_exact() {
        let spec = EnsembleSpec::new(3.7, 0.0, 21).unwrap();
        let v = gaussian_average(&spec, |o| Ok(o.sin())).unwrap();
        assert_eq!(v, 3.7f64.sin());
    }

    #[test]
    fn moments() {
        let spec = EnsembleSpec::new(TAU * 36.5e3, 0.07 * TAU * 36.5e3, 21).unwrap();
        let m = gaussian_average(&spec, Ok).unwrap();
        assert_abs_diff_eq!(m / spec.mean, 1.0, epsilon = 1e-12);
        let var = gaussian_average(&spec, |o| Ok((o - spec.mean).powi(2))).unwrap();
        assert_abs_diff_eq!(var / spec.sigma.powi(2), 1.0, epsilon = 1e-12);
        let w: f64 = spec.points().unwrap().iter().map(|p| p.1).sum();
        assert_abs_diff_eq!(w, 1.0, epsilon = 1e-13);
    }

    #[test]
    fn negative_nodes_clamped() {
        let spec = EnsembleSpec::new(1.0, 0.6, 21).unwrap();
        let pts = spec.points().unwrap();
        assert!(pts.iter().all(|p| p.0 >= 0.0));
        assert_eq!(pts[0].0, 0.0);
    }

    #[test]
    fn non_finite_values_rejected() {
        let spec = EnsembleSpec::new(1.0, 0.1, 5).unwrap();
        assert!(gaussian_average(&spec, |_| Ok(f64::NAN)).is_err());
    }

    #[test]
    fn rescaled_mean() {
        let spec = EnsembleSpec::from_fwhm_fraction(2.0, 0.164, 21).unwrap();
        let moved = spec.with_mean(5.0).unwrap();
        assert_abs_diff_eq!(moved.relative_sigma(), spec.relative_sigma(), epsilon = 1e-15);
    }
}
