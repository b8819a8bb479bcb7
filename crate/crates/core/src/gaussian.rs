//! Sampling of the Gaussian base measure, the cylindrical Wiener process and
//! the white-noise functional.
//!
//! The pair measure is the push-forward of independent standard Gaussians
//! `(g_n, h_n)` under `u0 = sum g_n/<lambda_n> phi_n`, `u1 = sum h_n phi_n`.
//! A Wiener path carries per-mode Brownian increments `N(0, dt)` on a uniform
//! mesh over `[0, T]`; the implemented dynamics all start at `t = 0`, so the
//! one-sided process suffices.
//!
//! Stream addressing: `(Position|Velocity, sample, mode)` for pair draws and
//! `(Wiener, sample, mode)` for the per-mode increment sequence, so ensembles
//! parallelize over samples with no shared state and identical output on any
//! thread count.

use std::sync::Arc;

use ndarray::{Array1, Array2};

use crate::basis::{SpectralBasis, SpectralField};
use crate::error::{Error, Result};
use crate::rng::{normals_into, Purpose, RngStream};

/// A position/velocity draw from the pair measure.
#[derive(Debug, Clone)]
pub struct GaussianPair {
    pub u0: SpectralField,
    pub u1: SpectralField,
}

/// Draw `(u0, u1)` from the pair measure on `basis`. Deterministic in
/// `(rng master, sample)`.
pub fn sample_mu(basis: &Arc<SpectralBasis>, rng: &RngStream, sample: u64) -> GaussianPair {
    let n = basis.n_modes();
    let mut u0 = Array1::zeros(n);
    let mut u1 = Array1::zeros(n);
    for (i, mode) in basis.modes.iter().enumerate() {
        let g = rng.normal(Purpose::Position, &[sample, i as u64]);
        let h = rng.normal(Purpose::Velocity, &[sample, i as u64]);
        u0[i] = g / mode.bracket_sq.sqrt();
        u1[i] = h;
    }
    GaussianPair {
        u0: SpectralField {
            basis: Arc::clone(basis),
            coeffs: u0,
        },
        u1: SpectralField {
            basis: Arc::clone(basis),
            coeffs: u1,
        },
    }
}

/// Per-mode Brownian increments on a uniform mesh.
#[derive(Debug, Clone)]
pub struct WienerPath {
    pub dt: f64,
    /// Shape (steps, modes); row j holds the increments over
    /// `[j dt, (j+1) dt)`.
    pub increments: Array2<f64>,
}

impl WienerPath {
    pub fn n_steps(&self) -> usize {
        self.increments.nrows()
    }

    pub fn horizon(&self) -> f64 {
        self.dt * self.n_steps() as f64
    }

    /// Endpoint values `beta_n(T)` per mode.
    pub fn endpoint(&self) -> Array1<f64> {
        let mut out = Array1::zeros(self.increments.ncols());
        for j in 0..self.n_steps() {
            out += &self.increments.row(j);
        }
        out
    }
}

/// Number of uniform steps covering `[0, T]`; errors unless `dt` divides `T`
/// to relative 1e-9.
pub fn steps_for(t: f64, dt: f64) -> Result<usize> {
    if !dt.is_finite() || dt <= 0.0 {
        return Err(Error::InvalidTimeMesh(format!("dt = {dt} must be positive")));
    }
    if t < 0.0 {
        return Err(Error::InvalidTimeMesh(format!("T = {t} must be nonnegative")));
    }
    let n = (t / dt).round();
    if (n * dt - t).abs() > 1e-9 * t.max(1.0) {
        return Err(Error::InvalidTimeMesh(format!("dt = {dt} does not divide T = {t}")));
    }
    Ok(n as usize)
}

/// Sample a Wiener path for all modes of `basis`.
pub fn sample_wiener(
    basis: &SpectralBasis,
    t: f64,
    dt: f64,
    rng: &RngStream,
    sample: u64,
) -> Result<WienerPath> {
    let steps = steps_for(t, dt)?;
    let n = basis.n_modes();
    let sqrt_dt = dt.sqrt();
    let mut increments = Array2::zeros((steps, n));
    let mut buf = vec![0.0; steps];
    for mode in 0..n {
        let mut stream = rng.stream(Purpose::Wiener, &[sample, mode as u64]);
        normals_into(&mut stream, &mut buf);
        for (j, &z) in buf.iter().enumerate() {
            increments[(j, mode)] = sqrt_dt * z;
        }
    }
    Ok(WienerPath { dt, increments })
}

/// A draw of the spatial white noise `xi0 = sum g_n phi_n` (all retained
/// modes).
pub fn sample_white_noise(basis: &Arc<SpectralBasis>, rng: &RngStream, sample: u64) -> SpectralField {
    let coeffs = Array1::from_iter(
        (0..basis.n_modes()).map(|i| rng.normal(Purpose::WhiteNoise, &[sample, i as u64])),
    );
    SpectralField {
        basis: Arc::clone(basis),
        coeffs,
    }
}

/// The white-noise functional `W_f = <f, xi0> = sum f_n g_n`.
pub fn white_noise_functional(f: &SpectralField, xi0: &SpectralField) -> f64 {
    debug_assert!(f.same_basis(xi0));
    f.coeffs.dot(&xi0.coeffs)
}
