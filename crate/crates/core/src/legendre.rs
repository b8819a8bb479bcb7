//! Gauss-Legendre quadrature and fully normalized associated Legendre
//! functions, the sphere-side machinery behind the spectral basis.
//!
//! Normalization: `nalf(l, m, x)` returns
//! `sqrt((2l+1)/(4 pi) * (l-m)!/(l+m)!) * P_l^m(x)` (no Condon-Shortley
//! phase), so that the real spherical harmonics built from it are
//! L2-orthonormal on the unit sphere and the addition theorem reads
//! `sum_m Y_lm(x)^2 = (2l+1)/(4 pi)`.

/// Legendre polynomial P_n and its derivative at x, by the three-term
/// recurrence.
fn legendre_pair(n: usize, x: f64) -> (f64, f64) {
    if n == 0 {
        return (1.0, 0.0);
    }
    let mut p0 = 1.0;
    let mut p1 = x;
    for k in 2..=n {
        let kf = k as f64;
        let p2 = ((2.0 * kf - 1.0) * x * p1 - (kf - 1.0) * p0) / kf;
        p0 = p1;
        p1 = p2;
    }
    // P'_n(x) = n (x P_n - P_{n-1}) / (x^2 - 1)
    let dp = n as f64 * (x * p1 - p0) / (x * x - 1.0);
    (p1, dp)
}

/// Nodes and weights of the n-point Gauss-Legendre rule on [-1, 1],
/// exact for polynomials of degree <= 2n - 1. Nodes ascending.
pub fn gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    assert!(n >= 1);
    let mut nodes = vec![0.0; n];
    let mut weights = vec![0.0; n];
    for i in 0..n.div_ceil(2) {
        // Tricomi-style initial guess, then Newton.
        let mut x = (std::f64::consts::PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        for _ in 0..100 {
            let (p, dp) = legendre_pair(n, x);
            let dx = p / dp;
            x -= dx;
            if dx.abs() < 1e-15 {
                break;
            }
        }
        let (_, dp) = legendre_pair(n, x);
        let w = 2.0 / ((1.0 - x * x) * dp * dp);
        // guesses produce the upper half; mirror for the lower half
        nodes[n - 1 - i] = x;
        weights[n - 1 - i] = w;
        nodes[i] = -x;
        weights[i] = w;
    }
    if n % 2 == 1 {
        let (_, dp) = legendre_pair(n, 0.0);
        nodes[n / 2] = 0.0;
        weights[n / 2] = 2.0 / (dp * dp);
    }
    (nodes, weights)
}

/// Table of normalized associated Legendre values `nalf(l, m, x)` for all
/// `0 <= m <= l <= lmax` at one point, indexed `[l][m]`.
///
/// Stable recurrences: diagonal seed, one off-diagonal step, then the
/// normalized three-term recurrence upward in l at fixed m.
pub fn nalf_table(lmax: usize, x: f64) -> Vec<Vec<f64>> {
    let s = (1.0 - x * x).max(0.0).sqrt(); // sin(theta)
    let mut p = vec![Vec::new(); lmax + 1];
    for (l, row) in p.iter_mut().enumerate() {
        row.resize(l + 1, 0.0);
    }
    p[0][0] = (1.0 / (4.0 * std::f64::consts::PI)).sqrt();
    for m in 1..=lmax {
        let mf = m as f64;
        p[m][m] = ((2.0 * mf + 1.0) / (2.0 * mf)).sqrt() * s * p[m - 1][m - 1];
    }
    for m in 0..lmax {
        let mf = m as f64;
        p[m + 1][m] = (2.0 * mf + 3.0).sqrt() * x * p[m][m];
    }
    #[allow(clippy::needless_range_loop)]
    for m in 0..=lmax {
        for l in (m + 2)..=lmax {
            let lf = l as f64;
            let mf = m as f64;
            let a = ((4.0 * lf * lf - 1.0) / (lf * lf - mf * mf)).sqrt();
            let b = (((lf - 1.0) * (lf - 1.0) - mf * mf)
                / (4.0 * (lf - 1.0) * (lf - 1.0) - 1.0))
                .sqrt();
            p[l][m] = a * (x * p[l - 1][m] - b * p[l - 2][m]);
        }
    }
    p
}
