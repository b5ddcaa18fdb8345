//! Reference computations for checking `stirap-core` that share none of its
//! numerical kernels: direct Hamiltonian assembly, fixed-step RK4 and a dense
//! Riemann-sum ensemble average.

use nalgebra::{Complex, Matrix3, Vector3};
use stirap_core::pulses::TwoTonePulse;

pub type C = Complex<f64>;
pub const TAU: f64 = 2.0 * std::f64::consts::PI;

/// Hamiltonian assembled directly from the envelope values at local time `t`.
pub fn oracle_h(pulse: &TwoTonePulse, t: f64, delta: f64, cross: bool) -> Matrix3<C> {
    let (op, os) = pulse.amplitudes_at(t);
    let (mut bp, mut bs) = (C::new(op, 0.0), C::new(os, 0.0));
    if cross {
        let c = pulse.carriers.expect("carriers");
        let eta = (c.pump - c.stokes) * (pulse.start + t) + pulse.pump_phase - pulse.stokes_phase;
        let rot = C::from_polar(1.0, -eta);
        bp += rot * os;
        bs += rot * op;
    }
    let h12 = C::from_polar(0.5, pulse.pump_phase) * bp;
    let h23 = C::from_polar(0.5, -pulse.stokes_phase) * bs;
    let z = C::new(0.0, 0.0);
    Matrix3::new(z, h12, z, h12.conj(), C::new(-delta, 0.0), h23, z, h23.conj(), z)
}

/// Classical RK4 on `ψ' = −iHψ` with `substeps` steps per pulse sample
/// interval. Returns the state at every sample point.
pub fn rk4_trajectory(pulse: &TwoTonePulse, delta: f64, cross: bool, psi0: [C; 3], substeps: usize) -> Vec<[C; 3]> {
    let n = pulse.sample_count();
    let dt = pulse.sample_step();
    let h = dt / substeps as f64;
    let mi = C::new(0.0, -1.0);
    let f = |t: f64, y: &Vector3<C>| (oracle_h(pulse, t, delta, cross) * y) * mi;
    let mut y = Vector3::new(psi0[0], psi0[1], psi0[2]);
    let mut out = vec![psi0];
    for k in 0..n {
        for j in 0..substeps {
            let t = k as f64 * dt + j as f64 * h;
            let k1 = f(t, &y);
            let k2 = f(t + 0.5 * h, &(y + k1 * C::new(0.5 * h, 0.0)));
            let k3 = f(t + 0.5 * h, &(y + k2 * C::new(0.5 * h, 0.0)));
            let k4 = f(t + h, &(y + k3 * C::new(h, 0.0)));
            y += (k1 + k2 * C::new(2.0, 0.0) + k3 * C::new(2.0, 0.0) + k4) * C::new(h / 6.0, 0.0);
        }
        out.push([y[0], y[1], y[2]]);
    }
    out
}

pub fn populations(v: &[C; 3]) -> [f64; 3] {
    [v[0].norm_sqr(), v[1].norm_sqr(), v[2].norm_sqr()]
}

/// Gaussian average of `f` by a midpoint Riemann sum on `n` points over
/// `mean ± 6σ`, normalised by the discrete weight total.
pub fn riemann_average<const N: usize>(mean: f64, sigma: f64, n: usize, f: impl Fn(f64) -> [f64; N]) -> [f64; N] {
    let lo = mean - 6.0 * sigma;
    let w = 12.0 * sigma / n as f64;
    let mut acc = [0.0; N];
    let mut total = 0.0;
    for k in 0..n {
        let x = lo + (k as f64 + 0.5) * w;
        let g = (-0.5 * ((x - mean) / sigma).powi(2)).exp();
        let v = f(x.max(0.0));
        for (a, b) in acc.iter_mut().zip(v) {
            *a += g * b;
        }
        total += g;
    }
    acc.map(|a| a / total)
}

#[cfg(test)]
mod properties;
