//! Exact Laplace-Beltrami eigendata and quadrature for the flat torus
//! `(R/Z)^2` and the unit round sphere, behind one manifold-agnostic
//! interface.
//!
//! Eigenbases are real everywhere (cos/sin pairs on the torus, real
//! spherical harmonics on the sphere) so field coefficients are real and
//! Gaussian sampling needs no conjugate-pair bookkeeping. Modes are ordered
//! by eigenvalue, ties broken lexicographically on the label, so RNG streams
//! map to modes reproducibly.
//!
//! Grids are sized for exact (to rounding) quadrature of products of two
//! eigenfunctions; an `oversample` factor of `ceil(m/2)` extends exactness to
//! degree-m products, which is what dealiases the Wick-power integrands:
//!
//! * torus: `oversample * (2 kmax + 1)` uniform nodes per axis,
//! * sphere: Gauss-Legendre in cos(theta) with `oversample * (lmax + 1)`
//!   nodes and a uniform phi grid with `oversample * (2 lmax + 1)` nodes.

use std::f64::consts::PI;
use std::sync::Arc;

use ndarray::{Array1, Array2};

use crate::error::{Error, Result};
use crate::legendre::{gauss_legendre, nalf_table};

pub const TWO_PI: f64 = 2.0 * PI;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Manifold {
    Torus,
    Sphere,
}

impl Manifold {
    pub fn area(self) -> f64 {
        match self {
            Manifold::Torus => 1.0,
            Manifold::Sphere => 4.0 * PI,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Manifold::Torus => "torus",
            Manifold::Sphere => "sphere",
        }
    }
}

impl std::str::FromStr for Manifold {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "torus" => Ok(Manifold::Torus),
            "sphere" => Ok(Manifold::Sphere),
            other => Err(Error::UnsupportedManifold(other.to_string())),
        }
    }
}

/// Which trigonometric branch a torus mode carries.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub enum Branch {
    Cos,
    Sin,
}

/// Manifold-specific mode tag. The derived order (wavevector then branch,
/// or degree then order) is the documented tie-break within an eigenvalue.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub enum ModeLabel {
    /// Half-lattice wavevector plus branch; the constant mode is
    /// `k = (0,0), Cos`.
    Torus { k: [i64; 2], branch: Branch },
    /// Degree and order of a real spherical harmonic, `-l <= m <= l`.
    Sphere { l: u32, m: i32 },
}

#[derive(Debug, Clone, Copy)]
pub struct Mode {
    pub index: usize,
    /// Eigenvalue lambda_n^2 of -Delta.
    pub lambda_sq: f64,
    /// Japanese bracket squared, exactly `1 + lambda_sq`.
    pub bracket_sq: f64,
    pub label: ModeLabel,
}

impl Mode {
    /// Recompute the eigenvalue from the label through the manifold's exact
    /// symbol (`4 pi^2 |k|^2` or `l(l+1)`).
    pub fn exact_symbol(&self) -> f64 {
        match self.label {
            ModeLabel::Torus { k, .. } => {
                TWO_PI * TWO_PI * (k[0] * k[0] + k[1] * k[1]) as f64
            }
            ModeLabel::Sphere { l, .. } => (l as f64) * (l as f64 + 1.0),
        }
    }
}

/// Grid shape, kept for manifests and resolution checks.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum GridShape {
    Torus { n_axis: usize },
    Sphere { n_theta: usize, n_phi: usize },
}

#[derive(Debug, Clone)]
pub struct QuadratureGrid {
    /// Torus: `(x1, x2)` in `[0,1)^2`; sphere: `(theta, phi)`.
    pub points: Vec<[f64; 2]>,
    /// Positive weights summing to the surface area.
    pub weights: Vec<f64>,
    pub shape: GridShape,
}

impl QuadratureGrid {
    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    /// Quadrature of a grid-sampled function.
    pub fn integrate(&self, values: &[f64]) -> f64 {
        let terms: Vec<f64> = values
            .iter()
            .zip(&self.weights)
            .map(|(&v, &w)| v * w)
            .collect();
        crate::stats::csum(&terms)
    }
}

/// Immutable spectral basis: modes, grid and the eigenfunction table.
/// Safe to share across threads; construction is single-threaded.
#[derive(Debug)]
pub struct SpectralBasis {
    pub manifold: Manifold,
    /// Eigenvalue cap Lambda of the build; retained modes have
    /// `lambda_n <= Lambda`.
    pub lambda_max: f64,
    /// Grid refinement relative to the bilinear-exact minimum.
    pub oversample: usize,
    pub modes: Vec<Mode>,
    pub grid: QuadratureGrid,
    /// `phi_n(x_j)`, shape (modes, grid points).
    pub table: Array2<f64>,
    fingerprint: u64,
}

/// Integer sort key: exact eigenvalue ordinal and the label tie-break.
fn torus_key(k: [i64; 2], branch: Branch) -> (i64, i64, i64, u8) {
    (
        k[0] * k[0] + k[1] * k[1],
        k[0],
        k[1],
        if branch == Branch::Cos { 0 } else { 1 },
    )
}

impl SpectralBasis {
    /// Build with the minimal exact grid scaled by `oversample`.
    pub fn build(manifold: Manifold, lambda_max: f64, oversample: usize) -> Result<Self> {
        assert!(lambda_max >= 0.0, "eigenvalue cap must be nonnegative");
        assert!(oversample >= 1, "oversample factor must be >= 1");
        match manifold {
            Manifold::Torus => Self::build_torus(lambda_max, oversample, None),
            Manifold::Sphere => Self::build_sphere(lambda_max, oversample, None),
        }
    }

    /// Build with an explicit per-axis resolution; errors if it is below the
    /// bilinear-exact minimum.
    pub fn build_explicit(manifold: Manifold, lambda_max: f64, shape: GridShape) -> Result<Self> {
        match (manifold, shape) {
            (Manifold::Torus, GridShape::Torus { n_axis }) => {
                Self::build_torus(lambda_max, 1, Some(n_axis))
            }
            (Manifold::Sphere, GridShape::Sphere { n_theta, n_phi }) => {
                Self::build_sphere(lambda_max, 1, Some((n_theta, n_phi)))
            }
            _ => Err(Error::Config("grid shape does not match manifold".into())),
        }
    }

    fn build_torus(lambda_max: f64, oversample: usize, explicit: Option<usize>) -> Result<Self> {
        // |k| <= Lambda / 2 pi, with a relative guard so exact boundary
        // eigenvalues (a cap of exactly 2 pi keeps |k| = 1) are retained.
        let kcap_sq = (lambda_max / TWO_PI).powi(2) * (1.0 + 1e-12);
        let kmax = kcap_sq.sqrt().floor() as i64;

        let mut keyed: Vec<([i64; 2], Branch)> = vec![([0, 0], Branch::Cos)];
        for k1 in 0..=kmax {
            for k2 in -kmax..=kmax {
                let half_lattice = k1 > 0 || (k1 == 0 && k2 > 0);
                if !half_lattice || (k1 * k1 + k2 * k2) as f64 > kcap_sq {
                    continue;
                }
                keyed.push(([k1, k2], Branch::Cos));
                keyed.push(([k1, k2], Branch::Sin));
            }
        }
        keyed.sort_by_key(|&(k, b)| torus_key(k, b));

        let modes: Vec<Mode> = keyed
            .iter()
            .enumerate()
            .map(|(index, &(k, branch))| {
                let lambda_sq = TWO_PI * TWO_PI * (k[0] * k[0] + k[1] * k[1]) as f64;
                Mode {
                    index,
                    lambda_sq,
                    bracket_sq: 1.0 + lambda_sq,
                    label: ModeLabel::Torus { k, branch },
                }
            })
            .collect();

        let n_min = 2 * kmax as usize + 1;
        let n_axis = match explicit {
            Some(n) if n < n_min => {
                return Err(Error::ResolutionTooSmall {
                    given: n,
                    needed: n_min,
                    context: "torus axis nodes for bilinear-exact quadrature",
                })
            }
            Some(n) => n,
            None => oversample * n_min,
        };

        let mut points = Vec::with_capacity(n_axis * n_axis);
        let w = 1.0 / (n_axis * n_axis) as f64;
        for i in 0..n_axis {
            for j in 0..n_axis {
                points.push([i as f64 / n_axis as f64, j as f64 / n_axis as f64]);
            }
        }
        let grid = QuadratureGrid {
            weights: vec![w; points.len()],
            points,
            shape: GridShape::Torus { n_axis },
        };

        let mut table = Array2::zeros((modes.len(), grid.len()));
        for (mi, mode) in modes.iter().enumerate() {
            let ModeLabel::Torus { k, branch } = mode.label else {
                unreachable!()
            };
            for (pj, p) in grid.points.iter().enumerate() {
                let phase = TWO_PI * (k[0] as f64 * p[0] + k[1] as f64 * p[1]);
                table[(mi, pj)] = if k == [0, 0] {
                    1.0
                } else {
                    match branch {
                        Branch::Cos => std::f64::consts::SQRT_2 * phase.cos(),
                        Branch::Sin => std::f64::consts::SQRT_2 * phase.sin(),
                    }
                };
            }
        }

        Ok(Self::finish(Manifold::Torus, lambda_max, oversample, modes, grid, table))
    }

    fn build_sphere(
        lambda_max: f64,
        oversample: usize,
        explicit: Option<(usize, usize)>,
    ) -> Result<Self> {
        // l(l+1) <= Lambda^2, guard as above.
        let cap = lambda_max * lambda_max * (1.0 + 1e-12);
        let mut lmax = 0u32;
        while ((lmax + 1) as f64) * ((lmax + 2) as f64) <= cap {
            lmax += 1;
        }

        let mut modes = Vec::new();
        for l in 0..=lmax {
            for m in -(l as i32)..=(l as i32) {
                let lambda_sq = (l as f64) * (l as f64 + 1.0);
                modes.push(Mode {
                    index: modes.len(),
                    lambda_sq,
                    bracket_sq: 1.0 + lambda_sq,
                    label: ModeLabel::Sphere { l, m },
                });
            }
        }

        let nt_min = lmax as usize + 1;
        let np_min = 2 * lmax as usize + 1;
        let (n_theta, n_phi) = match explicit {
            Some((nt, np)) => {
                if nt < nt_min {
                    return Err(Error::ResolutionTooSmall {
                        given: nt,
                        needed: nt_min,
                        context: "sphere Gauss-Legendre theta nodes",
                    });
                }
                if np < np_min {
                    return Err(Error::ResolutionTooSmall {
                        given: np,
                        needed: np_min,
                        context: "sphere uniform phi nodes",
                    });
                }
                (nt, np)
            }
            None => (oversample * nt_min, oversample * np_min),
        };

        let (gl_nodes, gl_weights) = gauss_legendre(n_theta);
        let mut points = Vec::with_capacity(n_theta * n_phi);
        let mut weights = Vec::with_capacity(n_theta * n_phi);
        let wphi = TWO_PI / n_phi as f64;
        for (ti, &x) in gl_nodes.iter().enumerate() {
            let theta = x.acos();
            for pj in 0..n_phi {
                let phi = TWO_PI * pj as f64 / n_phi as f64;
                points.push([theta, phi]);
                weights.push(gl_weights[ti] * wphi);
            }
        }
        let grid = QuadratureGrid {
            points,
            weights,
            shape: GridShape::Sphere { n_theta, n_phi },
        };

        let mut table = Array2::zeros((modes.len(), grid.len()));
        for (ti, &x) in gl_nodes.iter().enumerate() {
            let nalf = nalf_table(lmax as usize, x);
            for pj in 0..n_phi {
                let col = ti * n_phi + pj;
                let phi = TWO_PI * pj as f64 / n_phi as f64;
                for (mi, mode) in modes.iter().enumerate() {
                    let ModeLabel::Sphere { l, m } = mode.label else {
                        unreachable!()
                    };
                    let p = nalf[l as usize][m.unsigned_abs() as usize];
                    table[(mi, col)] = if m == 0 {
                        p
                    } else if m > 0 {
                        std::f64::consts::SQRT_2 * p * (m as f64 * phi).cos()
                    } else {
                        std::f64::consts::SQRT_2 * p * (-m as f64 * phi).sin()
                    };
                }
            }
        }

        Ok(Self::finish(Manifold::Sphere, lambda_max, oversample, modes, grid, table))
    }

    fn finish(
        manifold: Manifold,
        lambda_max: f64,
        oversample: usize,
        modes: Vec<Mode>,
        grid: QuadratureGrid,
        table: Array2<f64>,
    ) -> Self {
        let mut fp = crate::report::fnv1a(manifold.name().as_bytes());
        fp ^= crate::report::fnv1a(&lambda_max.to_le_bits_pair());
        fp = fp
            .wrapping_mul(0x100000001b3)
            .wrapping_add(modes.len() as u64)
            .wrapping_add((grid.len() as u64) << 24)
            .wrapping_add((oversample as u64) << 48);
        Self {
            manifold,
            lambda_max,
            oversample,
            modes,
            grid,
            table,
            fingerprint: fp,
        }
    }

    pub fn n_modes(&self) -> usize {
        self.modes.len()
    }

    pub fn fingerprint(&self) -> u64 {
        self.fingerprint
    }

    /// Japanese brackets squared of all modes, as an owned vector.
    pub fn bracket_sq(&self) -> Vec<f64> {
        self.modes.iter().map(|m| m.bracket_sq).collect()
    }

    /// Number of modes with `lambda_n <= lambda`.
    pub fn weyl_count(&self, lambda: f64) -> usize {
        let cap = lambda * lambda * (1.0 + 1e-12);
        self.modes.iter().filter(|m| m.lambda_sq <= cap).count()
    }

    /// Weyl ratio `count(lambda) / lambda^2`.
    pub fn weyl_ratio(&self, lambda: f64) -> f64 {
        self.weyl_count(lambda) as f64 / (lambda * lambda)
    }

    /// Empirical bracket of the Weyl ratio over the upper half of the
    /// spectrum, `(min, max)`.
    pub fn weyl_bracket(&self) -> (f64, f64) {
        let lam_top = self.modes.last().map(|m| m.lambda_sq.sqrt()).unwrap_or(0.0);
        let mut lo = f64::INFINITY;
        let mut hi = 0.0f64;
        for m in &self.modes {
            let lam = m.lambda_sq.sqrt();
            if lam >= 0.5 * lam_top && lam > 0.0 {
                let r = self.weyl_ratio(lam);
                lo = lo.min(r);
                hi = hi.max(r);
            }
        }
        (lo, hi)
    }

    /// A fresh all-zero field on this basis.
    pub fn zero_field(self: &Arc<Self>) -> SpectralField {
        SpectralField {
            basis: Arc::clone(self),
            coeffs: Array1::zeros(self.n_modes()),
        }
    }

    pub fn field_from(self: &Arc<Self>, coeffs: Array1<f64>) -> Result<SpectralField> {
        if coeffs.len() != self.n_modes() {
            return Err(Error::DimensionMismatch {
                expected: self.n_modes(),
                got: coeffs.len(),
                context: "field coefficients",
            });
        }
        Ok(SpectralField {
            basis: Arc::clone(self),
            coeffs,
        })
    }

    /// Evaluate `sum_n a_n phi_n` on the grid.
    pub fn synthesize(&self, coeffs: &Array1<f64>) -> Array1<f64> {
        self.table.t().dot(coeffs)
    }

    /// Quadrature inner products against every eigenfunction:
    /// `a_n = <values, phi_n>`. Exact inverse of `synthesize` on retained
    /// modes thanks to grid exactness.
    pub fn analyze(&self, values: &[f64]) -> Result<Array1<f64>> {
        if values.len() != self.grid.len() {
            return Err(Error::DimensionMismatch {
                expected: self.grid.len(),
                got: values.len(),
                context: "grid values",
            });
        }
        let weighted = Array1::from_iter(
            values
                .iter()
                .zip(&self.grid.weights)
                .map(|(&v, &w)| v * w),
        );
        Ok(self.table.dot(&weighted))
    }

    /// Structured text manifest for reproducibility stamping.
    pub fn manifest(&self) -> String {
        let shape = match self.grid.shape {
            GridShape::Torus { n_axis } => format!("torus-grid {n_axis}x{n_axis}"),
            GridShape::Sphere { n_theta, n_phi } => {
                format!("sphere-grid {n_theta}x{n_phi} (gauss-legendre x uniform)")
            }
        };
        format!(
            "manifold={} lambda_max={} oversample={} modes={} {} fingerprint={:016x}",
            self.manifold.name(),
            self.lambda_max,
            self.oversample,
            self.n_modes(),
            shape,
            self.fingerprint,
        )
    }

    /// Long-format mode table (index, lambda_sq, label) for the manifest CSV.
    pub fn mode_table_rows(&self) -> Vec<String> {
        self.modes
            .iter()
            .map(|m| match m.label {
                ModeLabel::Torus { k, branch } => format!(
                    "{},{},torus k=({};{}) {}",
                    m.index,
                    m.lambda_sq,
                    k[0],
                    k[1],
                    match branch {
                        Branch::Cos => "cos",
                        Branch::Sin => "sin",
                    }
                ),
                ModeLabel::Sphere { l, m: om } => {
                    format!("{},{},sphere l={l} m={om}", m.index, m.lambda_sq)
                }
            })
            .collect()
    }
}

trait BitsPair {
    fn to_le_bits_pair(&self) -> [u8; 8];
}

impl BitsPair for f64 {
    fn to_le_bits_pair(&self) -> [u8; 8] {
        self.to_bits().to_le_bytes()
    }
}

/// A real field stored as eigencoefficients aligned with one basis.
#[derive(Debug, Clone)]
pub struct SpectralField {
    pub basis: Arc<SpectralBasis>,
    pub coeffs: Array1<f64>,
}

impl SpectralField {
    pub fn n_modes(&self) -> usize {
        self.coeffs.len()
    }

    pub fn same_basis(&self, other: &SpectralField) -> bool {
        self.basis.fingerprint() == other.basis.fingerprint()
    }

    pub fn values(&self) -> Array1<f64> {
        self.basis.synthesize(&self.coeffs)
    }

    /// L2 norm via Parseval.
    pub fn l2_norm(&self) -> f64 {
        self.coeffs.dot(&self.coeffs).sqrt()
    }

    pub fn scaled(&self, s: f64) -> SpectralField {
        SpectralField {
            basis: Arc::clone(&self.basis),
            coeffs: &self.coeffs * s,
        }
    }

    pub fn add(&self, other: &SpectralField) -> Result<SpectralField> {
        if !self.same_basis(other) {
            return Err(Error::BasisMismatch);
        }
        Ok(SpectralField {
            basis: Arc::clone(&self.basis),
            coeffs: &self.coeffs + &other.coeffs,
        })
    }

    pub fn sub(&self, other: &SpectralField) -> Result<SpectralField> {
        if !self.same_basis(other) {
            return Err(Error::BasisMismatch);
        }
        Ok(SpectralField {
            basis: Arc::clone(&self.basis),
            coeffs: &self.coeffs - &other.coeffs,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn torus(lam: f64) -> Arc<SpectralBasis> {
        Arc::new(SpectralBasis::build(Manifold::Torus, lam, 1).unwrap())
    }

    fn sphere(lam: f64) -> Arc<SpectralBasis> {
        Arc::new(SpectralBasis::build(Manifold::Sphere, lam, 1).unwrap())
    }

    #[test]
    fn torus_lambda_2pi_has_five_modes() {
        // constant + {cos,sin}(2 pi x1) + {cos,sin}(2 pi x2)
        let b = torus(TWO_PI);
        assert_eq!(b.n_modes(), 5);
        assert_eq!(b.modes[0].lambda_sq, 0.0);
        for m in &b.modes[1..] {
            assert_eq!(m.lambda_sq, TWO_PI * TWO_PI);
        }
    }

    #[test]
    fn sphere_lambda_sq_12_has_sixteen_modes() {
        let b = sphere(12.0f64.sqrt());
        assert_eq!(b.n_modes(), 16);
        assert_eq!(b.weyl_count(12.0f64.sqrt()), 16);
    }

    #[test]
    fn lambda_zero_keeps_only_the_constant() {
        for m in [Manifold::Torus, Manifold::Sphere] {
            let b = SpectralBasis::build(m, 0.0, 1).unwrap();
            assert_eq!(b.n_modes(), 1);
            assert_eq!(b.modes[0].lambda_sq, 0.0);
        }
    }

    #[test]
    fn weights_sum_to_area() {
        for (b, area) in [(torus(20.0), 1.0), (sphere(5.0), 4.0 * PI)] {
            let total = crate::stats::csum(&b.grid.weights);
            assert!((total - area).abs() <= 1e-12 * area, "total = {total}");
        }
    }

    #[test]
    fn eigenfunction_rows_orthonormal() {
        for b in [torus(4.0 * PI), sphere(12.0f64.sqrt())] {
            let n = b.n_modes();
            for i in 0..n {
                for j in i..n {
                    let prod: Vec<f64> = (0..b.grid.len())
                        .map(|p| b.table[(i, p)] * b.table[(j, p)] * b.grid.weights[p])
                        .collect();
                    let ip = crate::stats::csum(&prod);
                    let expect = if i == j { 1.0 } else { 0.0 };
                    assert!(
                        (ip - expect).abs() < 1e-10,
                        "{} <{i},{j}> = {ip}",
                        b.manifold.name()
                    );
                }
            }
        }
    }

    #[test]
    fn sphere_addition_theorem() {
        let b = sphere(20.0f64.sqrt()); // l <= 4
        for l in 0..=4u32 {
            let expect = (2 * l + 1) as f64 / (4.0 * PI);
            for p in 0..b.grid.len() {
                let s: f64 = b
                    .modes
                    .iter()
                    .filter(|m| matches!(m.label, ModeLabel::Sphere { l: ml, .. } if ml == l))
                    .map(|m| b.table[(m.index, p)].powi(2))
                    .sum();
                assert!((s - expect).abs() < 1e-10, "l={l} p={p}: {s} vs {expect}");
            }
        }
    }

    #[test]
    fn torus_eigenfunctions_bounded_by_sqrt2() {
        let b = torus(6.0 * TWO_PI);
        let bound = std::f64::consts::SQRT_2 + 1e-12;
        for v in b.table.iter() {
            assert!(v.abs() <= bound);
        }
    }

    #[test]
    fn exact_symbol_matches_stored_eigenvalue() {
        for b in [torus(5.0 * TWO_PI), sphere(30.0f64.sqrt())] {
            for m in &b.modes {
                assert_eq!(m.exact_symbol(), m.lambda_sq);
                assert_eq!(m.bracket_sq, 1.0 + m.lambda_sq);
            }
        }
    }

    #[test]
    fn modes_sorted_by_eigenvalue_then_label() {
        for b in [torus(8.0 * TWO_PI), sphere(40.0f64.sqrt())] {
            for w in b.modes.windows(2) {
                assert!(
                    w[0].lambda_sq < w[1].lambda_sq
                        || (w[0].lambda_sq == w[1].lambda_sq && w[0].label < w[1].label)
                );
            }
        }
    }

    #[test]
    fn synthesize_constant_mode() {
        let bt = torus(TWO_PI);
        let mut c = Array1::zeros(bt.n_modes());
        c[0] = 1.0;
        for v in bt.synthesize(&c).iter() {
            assert!((v - 1.0).abs() < 1e-14);
        }
        let bs = sphere(2.0);
        let mut c = Array1::zeros(bs.n_modes());
        c[0] = 1.0;
        let expect = 1.0 / (4.0 * PI).sqrt();
        for v in bs.synthesize(&c).iter() {
            assert!((v - expect).abs() < 1e-14);
        }
    }

    #[test]
    fn analyze_recovers_constant() {
        let b = torus(TWO_PI);
        let values = vec![2.0; b.grid.len()];
        let c = b.analyze(&values).unwrap();
        assert!((c[0] - 2.0).abs() < 1e-12);
        for &v in c.iter().skip(1) {
            assert!(v.abs() < 1e-12);
        }
    }

    #[test]
    fn analyze_rejects_wrong_length() {
        let b = torus(TWO_PI);
        assert!(matches!(
            b.analyze(&[0.0; 3]),
            Err(Error::DimensionMismatch { .. })
        ));
    }

    #[test]
    fn round_trip_on_every_unit_vector() {
        for b in [torus(2.0 * TWO_PI), sphere(6.0f64.sqrt())] {
            for n in 0..b.n_modes() {
                let mut c = Array1::zeros(b.n_modes());
                c[n] = 1.0;
                let back = b.analyze(b.synthesize(&c).as_slice().unwrap()).unwrap();
                for i in 0..b.n_modes() {
                    let expect = if i == n { 1.0 } else { 0.0 };
                    assert!((back[i] - expect).abs() < 1e-10);
                }
            }
        }
    }

    #[test]
    fn weyl_counts() {
        let bt = torus(TWO_PI);
        assert_eq!(bt.weyl_count(TWO_PI), 5);
        let bs = sphere(30.0f64.sqrt());
        assert_eq!(bs.weyl_count(12.0f64.sqrt()), 16);
        // ratio at l = 10 vs l = 20 differs by < 15%
        let big = sphere((20.0 * 21.0f64).sqrt());
        let r10 = big.weyl_ratio((10.0 * 11.0f64).sqrt());
        let r20 = big.weyl_ratio((20.0 * 21.0f64).sqrt());
        assert!((r10 - r20).abs() / r20 < 0.15, "{r10} vs {r20}");
    }

    #[test]
    fn explicit_resolution_below_minimum_is_rejected() {
        let err = SpectralBasis::build_explicit(
            Manifold::Torus,
            2.0 * TWO_PI,
            GridShape::Torus { n_axis: 3 },
        );
        assert!(matches!(err, Err(Error::ResolutionTooSmall { .. })));
        let err = SpectralBasis::build_explicit(
            Manifold::Sphere,
            12.0f64.sqrt(),
            GridShape::Sphere { n_theta: 2, n_phi: 3 },
        );
        assert!(matches!(err, Err(Error::ResolutionTooSmall { .. })));
    }
}
