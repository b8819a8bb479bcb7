//! The Hermite/Wick algebra, the renormalization constants `sigma_N(x)` and
//! `sigma_N(t,x)`, truncated covariance kernels, Wick powers of sampled
//! fields, and the Gibbs potential.
//!
//! `H_k(x; sigma)` are the variance-parametrized Hermite polynomials from the
//! generating function `exp(t x - sigma t^2/2)`, computed by the recurrence
//! `H_{k+1} = x H_k - k sigma H_{k-1}`. Replacing `u^k` by
//! `H_k(u_N(x); sigma_N(x))` subtracts the divergent self-interaction of the
//! truncated free field, whose pointwise variance is
//!
//! `sigma_N(x) = sum_n psi0(lambda_n^2/N^2)^2 phi_n(x)^2 / <lambda_n>^2`.
//!
//! For the undamped stochastic convolution the constant is time-dependent
//! and two cutoff-power conventions are in circulation: the first power,
//!
//! `sigma_N(t,x) = sum_n psi0(lambda_n^2/N^2) phi_n(x)^2
//!                 (t/(2<l>^2) - sin(2t<l>)/(4<l>^3))`,
//!
//! and the squared cutoff that the Ito-isometry covariance actually
//! produces. Both are implemented; `SigmaConvention` selects, defaulting to
//! the first power, and the solvers pass the variance-consistent square.

use ndarray::{Array1, Array2};

use crate::basis::{SpectralBasis, SpectralField};
use crate::error::{Error, Result};
use crate::projector::Projector;

/// Binomial coefficient as a float (the expansion weights of the Hermite
/// sum identity).
pub fn binom_f64(k: usize, l: usize) -> f64 {
    let mut b = 1.0;
    for i in 0..l {
        b = b * (k - i) as f64 / (i + 1) as f64;
    }
    b
}

/// `H_k(x; sigma)` by the three-term recurrence. `H_0 = 1`, `H_1 = x`.
pub fn hermite(k: usize, x: f64, sigma: f64) -> f64 {
    match k {
        0 => 1.0,
        1 => x,
        _ => {
            let mut prev = 1.0;
            let mut cur = x;
            for j in 1..k {
                let next = x * cur - j as f64 * sigma * prev;
                prev = cur;
                cur = next;
            }
            cur
        }
    }
}

/// Which cutoff power the time-dependent constant carries.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SigmaConvention {
    /// First power of the cutoff.
    FirstPower,
    /// Squared cutoff, matching the Ito-isometry covariance.
    Squared,
}

/// The static renormalization constant on the grid, with its cutoff
/// identity.
#[derive(Debug, Clone)]
pub struct SigmaField {
    pub n_cutoff: f64,
    pub values: Vec<f64>,
    pub manifest: String,
}

impl SigmaField {
    /// Max deviation from spatial constancy (both supported manifolds are
    /// homogeneous, so this is a structural diagnostic).
    pub fn constancy_defect(&self) -> f64 {
        let m = crate::stats::mean(&self.values);
        self.values
            .iter()
            .fold(0.0f64, |a, &v| a.max((v - m).abs()))
    }

    pub fn mean(&self) -> f64 {
        crate::stats::mean(&self.values)
    }
}

fn require_cap(basis: &SpectralBasis, n_cutoff: f64) -> Result<()> {
    if n_cutoff > basis.lambda_max * (1.0 + 1e-12) {
        return Err(Error::CapBelowCutoff {
            cap: basis.lambda_max,
            n: n_cutoff,
        });
    }
    Ok(())
}

/// `sigma_N(x)` on the grid.
pub fn compute_sigma_n(basis: &SpectralBasis, n_cutoff: f64) -> Result<SigmaField> {
    require_cap(basis, n_cutoff)?;
    let proj = Projector::new_unchecked(basis, n_cutoff);
    let mut values = vec![0.0; basis.grid.len()];
    for (i, mode) in basis.modes.iter().enumerate() {
        let w = proj.multiplier(i).powi(2) / mode.bracket_sq;
        if w == 0.0 {
            continue;
        }
        for (j, v) in values.iter_mut().enumerate() {
            *v += w * basis.table[(i, j)].powi(2);
        }
    }
    debug_assert!(values.iter().all(|&v| v >= 0.0));
    Ok(SigmaField {
        n_cutoff,
        values,
        manifest: format!("sigma_N N={n_cutoff} cutoff=psi0^2 {}", basis.manifest()),
    })
}

/// The per-mode time bracket `t/(2 b) - sin(2 t sqrt(b)) / (4 b^{3/2})` with
/// `b = <lambda>^2`; this is the Ito integral of the squared wave kernel.
fn time_bracket(bracket_sq: f64, t: f64) -> f64 {
    let b = bracket_sq;
    let sb = b.sqrt();
    t / (2.0 * b) - (2.0 * t * sb).sin() / (4.0 * b * sb)
}

/// `sigma_N(t, x)` for each requested time, shape (times, grid).
#[derive(Debug, Clone)]
pub struct SigmaTimeTable {
    pub n_cutoff: f64,
    pub times: Vec<f64>,
    pub table: Array2<f64>,
    pub convention: SigmaConvention,
}

impl SigmaTimeTable {
    pub fn row(&self, time_index: usize) -> Vec<f64> {
        self.table.row(time_index).to_vec()
    }
}

/// Time-dependent renormalization constant on the grid at the given times.
pub fn compute_sigma_nt(
    basis: &SpectralBasis,
    n_cutoff: f64,
    times: &[f64],
    convention: SigmaConvention,
) -> Result<SigmaTimeTable> {
    require_cap(basis, n_cutoff)?;
    let proj = Projector::new_unchecked(basis, n_cutoff);
    let mut table = Array2::zeros((times.len(), basis.grid.len()));
    for (i, mode) in basis.modes.iter().enumerate() {
        let m = proj.multiplier(i);
        let w = match convention {
            SigmaConvention::FirstPower => m,
            SigmaConvention::Squared => m * m,
        };
        if w == 0.0 {
            continue;
        }
        for (ti, &t) in times.iter().enumerate() {
            let tb = w * time_bracket(mode.bracket_sq, t);
            for j in 0..basis.grid.len() {
                table[(ti, j)] += tb * basis.table[(i, j)].powi(2);
            }
        }
    }
    Ok(SigmaTimeTable {
        n_cutoff,
        times: times.to_vec(),
        table,
        convention,
    })
}

/// First-power static constant `sum_n psi0 phi_n^2 / <lambda_n>^2`, the
/// `(t/2)`-slope of the first-power time-dependent constant.
pub fn compute_sigma_n_first_power(basis: &SpectralBasis, n_cutoff: f64) -> Result<SigmaField> {
    require_cap(basis, n_cutoff)?;
    let proj = Projector::new_unchecked(basis, n_cutoff);
    let mut values = vec![0.0; basis.grid.len()];
    for (i, mode) in basis.modes.iter().enumerate() {
        let w = proj.multiplier(i) / mode.bracket_sq;
        if w == 0.0 {
            continue;
        }
        for (j, v) in values.iter_mut().enumerate() {
            *v += w * basis.table[(i, j)].powi(2);
        }
    }
    Ok(SigmaField {
        n_cutoff,
        values,
        manifest: format!("sigma_N N={n_cutoff} cutoff=psi0 {}", basis.manifest()),
    })
}

/// Pointwise Wick power `H_k(values(x); sigma(x))` on the grid.
pub fn wick_power(values: &[f64], k: usize, sigma: &[f64]) -> Result<Vec<f64>> {
    if values.len() != sigma.len() {
        return Err(Error::DimensionMismatch {
            expected: sigma.len(),
            got: values.len(),
            context: "wick power grid values",
        });
    }
    Ok(values
        .iter()
        .zip(sigma)
        .map(|(&v, &s)| hermite(k, v, s))
        .collect())
}

/// Truncated covariance kernel `gamma_N(x, y)` on grid x grid.
#[derive(Debug)]
pub struct CovarianceKernel {
    pub n_cutoff: f64,
    pub values: Array2<f64>,
}

/// Default cap on grid-pair entries (64 M doubles, 512 MB).
pub const KERNEL_ENTRY_CAP: usize = 1 << 26;

/// Assemble `gamma_N(x,y) = sum_n psi0^2 phi_n(x) phi_n(y) / <lambda_n>^2`.
pub fn covariance_kernel(
    basis: &SpectralBasis,
    n_cutoff: f64,
    entry_cap: usize,
) -> Result<CovarianceKernel> {
    require_cap(basis, n_cutoff)?;
    let g = basis.grid.len();
    if g * g > entry_cap {
        return Err(Error::KernelTooLarge {
            requested: g * g,
            cap: entry_cap,
        });
    }
    let proj = Projector::new_unchecked(basis, n_cutoff);
    // gamma = W^T W with W[n, j] = m_n phi_n(x_j) / <lambda_n>
    let mut weighted = basis.table.clone();
    for (i, mode) in basis.modes.iter().enumerate() {
        let w = proj.multiplier(i) / mode.bracket_sq.sqrt();
        weighted.row_mut(i).mapv_inplace(|v| v * w);
    }
    Ok(CovarianceKernel {
        n_cutoff,
        values: weighted.t().dot(&weighted),
    })
}

/// Smoothed sup of the k-th kernel power:
/// `max over x of | (1-Delta)_y^{-eps/2} gamma_N(x, .)^k |`, the smoothing
/// acting as the spectral multiplier `<lambda>^{-eps}` on the second
/// variable only (analyze, weigh, resynthesize).
pub fn green_power_bound(
    basis: &SpectralBasis,
    n_cutoff: f64,
    k: usize,
    eps: f64,
    entry_cap: usize,
) -> Result<f64> {
    let kernel = covariance_kernel(basis, n_cutoff, entry_cap)?;
    let weights: Vec<f64> = basis
        .modes
        .iter()
        .map(|m| m.bracket_sq.powf(-eps / 2.0))
        .collect();
    let mut bound = 0.0f64;
    let mut row_pow = vec![0.0; basis.grid.len()];
    for i in 0..basis.grid.len() {
        for (j, rp) in row_pow.iter_mut().enumerate() {
            *rp = kernel.values[(i, j)].powi(k as i32);
        }
        let mut coeffs = basis.analyze(&row_pow)?;
        for (c, w) in coeffs.iter_mut().zip(&weights) {
            *c *= w;
        }
        let smoothed = basis.synthesize(&coeffs);
        let row_max = smoothed.iter().fold(0.0f64, |a, &v| a.max(v.abs()));
        bound = bound.max(row_max);
    }
    Ok(bound)
}

/// Oversampling factor needed for a degree-`m` integrand.
pub fn oversample_needed(degree: usize) -> usize {
    degree.div_ceil(2)
}

fn require_oversample(basis: &SpectralBasis, degree: usize) -> Result<()> {
    let need = oversample_needed(degree);
    if basis.oversample < need {
        return Err(Error::AliasingGuard {
            have: basis.oversample,
            need,
            degree,
        });
    }
    Ok(())
}

/// Gibbs potential `G_{N,k+1}(u0) = 1/(k+1) int H_{k+1}(P_N u0; sigma_N) dx`
/// by oversampled quadrature.
pub fn gibbs_potential(
    u0: &SpectralField,
    proj: &Projector,
    sigma: &SigmaField,
    k: usize,
) -> Result<f64> {
    let basis = &u0.basis;
    require_oversample(basis, k + 1)?;
    let truncated = proj.apply(u0)?;
    let values = truncated.values();
    let wick = wick_power(values.as_slice().unwrap(), k + 1, &sigma.values)?;
    Ok(basis.grid.integrate(&wick) / (k + 1) as f64)
}

/// Spectral fractional smoothing `(1-Delta)^{-eps/2}` of grid values:
/// analyze, weigh by `<lambda>^{-eps}`, resynthesize.
pub fn smooth_fractional(basis: &SpectralBasis, values: &[f64], eps: f64) -> Result<Array1<f64>> {
    let mut coeffs = basis.analyze(values)?;
    for (c, m) in coeffs.iter_mut().zip(&basis.modes) {
        *c *= m.bracket_sq.powf(-eps / 2.0);
    }
    Ok(basis.synthesize(&coeffs))
}
