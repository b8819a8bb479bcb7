//! Cross-module oracle tests: Monte-Carlo estimates against closed-form or
//! independently computed expected values (spectral sums, quadrature
//! oracles, coupled-flow comparisons). Tolerances are 4 standard errors
//! unless the quantity is deterministic.

use std::sync::Arc;

use ndarray::Array1;
use renwave_core::basis::{Manifold, ModeLabel, SpectralBasis, TWO_PI};
use renwave_core::dynamics::{
    evolve_direct, solve_remainder, wick_forcing_from_rough, EquationKind, EquationSpec,
    PairState, SolverConfig,
};
use renwave_core::gaussian::{sample_mu, sample_white_noise, sample_wiener, white_noise_functional};
use renwave_core::gibbs::{gibbs_convergence_scan, sample_gibbs};
use renwave_core::projector::Projector;
use renwave_core::rng::RngStream;
use renwave_core::stats;
use renwave_core::wick::{
    binom_f64, compute_sigma_n, covariance_kernel, gibbs_potential, hermite, wick_power,
    KERNEL_ENTRY_CAP,
};

fn torus(lam: f64, over: usize) -> Arc<SpectralBasis> {
    Arc::new(SpectralBasis::build(Manifold::Torus, lam, over).unwrap())
}

fn sphere(lam: f64, over: usize) -> Arc<SpectralBasis> {
    Arc::new(SpectralBasis::build(Manifold::Sphere, lam, over).unwrap())
}

#[test]
fn product_formula_for_wick_pairs() {
    // E[H_k(f; s_f) H_l(g; s_g)] = delta_{kl} k! E[fg]^k for jointly Gaussian
    // f, g built from shared modes, k, l <= 4
    let basis = torus(TWO_PI, 1);
    let rng = RngStream::new(314);
    let n = basis.n_modes();
    let mut fa = Array1::zeros(n);
    let mut fb = Array1::zeros(n);
    fa[1] = 1.0; // f = W of e1
    fb[1] = 0.8; // g = W of 0.8 e1 + 0.6 e2
    fb[2] = 0.6;
    let f = basis.field_from(fa).unwrap();
    let g = basis.field_from(fb).unwrap();
    let (sf, sg, cov): (f64, f64, f64) = (1.0, 1.0, 0.8);

    let m = 200_000usize;
    let mut prods: Vec<Vec<f64>> = (0..25).map(|_| Vec::with_capacity(m)).collect();
    for s in 0..m {
        let xi = sample_white_noise(&basis, &rng, s as u64);
        let wf = white_noise_functional(&f, &xi);
        let wg = white_noise_functional(&g, &xi);
        for k in 0..=4 {
            for l in 0..=4 {
                prods[5 * k + l].push(hermite(k, wf, sf) * hermite(l, wg, sg));
            }
        }
    }
    for k in 1..=4usize {
        for l in 1..=4usize {
            let col = &prods[5 * k + l];
            let est = stats::mean(col);
            let se = stats::se_mean(col);
            let expect = if k == l {
                (1..=k).map(|i| i as f64).product::<f64>() * cov.powi(k as i32)
            } else {
                0.0
            };
            assert!(
                (est - expect).abs() < 4.0 * se,
                "k={k} l={l}: {est} vs {expect} (se {se})"
            );
        }
    }
}

#[test]
fn wiener_chaos_moment_ratio_diagnostic() {
    // L4/L2 ratios of degree-d Hermite observables stay below (4-1)^d
    let basis = torus(TWO_PI, 1);
    let rng = RngStream::new(2718);
    let n = basis.n_modes();
    let mut fa = Array1::zeros(n);
    fa[3] = 1.0;
    let f = basis.field_from(fa).unwrap();
    let m = 100_000usize;
    for d in 1..=4usize {
        let mut l2 = 0.0;
        let mut l4 = 0.0;
        for s in 0..m {
            let xi = sample_white_noise(&basis, &rng, s as u64);
            let q = hermite(d, white_noise_functional(&f, &xi), 1.0);
            l2 += q * q;
            l4 += q * q * q * q;
        }
        let ratio = (l4 / m as f64).powf(0.25) / (l2 / m as f64).sqrt();
        assert!(ratio < 3f64.powi(d as i32), "d={d}: ratio {ratio}");
    }
}

#[test]
fn wick_orthogonality_on_the_truncated_field() {
    // E[:u_N^k:(x) :u_N^l:(y)] = delta_{kl} k! gamma_N(x,y)^k at probe pairs
    let basis = torus(2.0 * TWO_PI, 1);
    let n_cutoff = 1.8 * TWO_PI;
    let rng = RngStream::new(99);
    let proj = Projector::new(&basis, n_cutoff).unwrap();
    let sigma = compute_sigma_n(&basis, n_cutoff).unwrap();
    let kernel = covariance_kernel(&basis, n_cutoff, KERNEL_ENTRY_CAP).unwrap();
    let g = basis.grid.len();
    let pairs: Vec<(usize, usize)> = vec![
        (0, 0),
        (0, 1),
        (0, g / 2),
        (1, g / 3),
        (2, 2),
        (g / 4, g / 4 + 1),
        (g / 2, g / 2),
        (g / 3, 2 * g / 3),
        (5, g - 1),
        (g - 1, g - 1),
    ];

    let m = 60_000usize;
    let mut prods = vec![Vec::with_capacity(m); pairs.len() * 16];
    for s in 0..m {
        let pair = sample_mu(&basis, &rng, s as u64);
        let un = proj.apply(&pair.u0).unwrap();
        let values = un.values();
        for (pi, &(x, y)) in pairs.iter().enumerate() {
            for k in 1..=3usize {
                for l in 1..=3usize {
                    let hk = hermite(k, values[x], sigma.values[x]);
                    let hl = hermite(l, values[y], sigma.values[y]);
                    prods[pi * 16 + 4 * k + l].push(hk * hl);
                }
            }
        }
    }
    for (pi, &(x, y)) in pairs.iter().enumerate() {
        for k in 1..=3usize {
            for l in 1..=3usize {
                let col = &prods[pi * 16 + 4 * k + l];
                let est = stats::mean(col);
                let se = stats::se_mean(col);
                let expect = if k == l {
                    (1..=k).map(|i| i as f64).product::<f64>()
                        * kernel.values[(x, y)].powi(k as i32)
                } else {
                    0.0
                };
                assert!(
                    (est - expect).abs() < 4.0 * se,
                    "pair {pi} k={k} l={l}: {est} vs {expect} (se {se})"
                );
            }
        }
    }
}

#[test]
fn wick_powers_are_centered() {
    // MC mean of :u_N^k: vanishes pointwise for k in {2,3,4}
    let basis = torus(2.0 * TWO_PI, 1);
    let n_cutoff = 1.5 * TWO_PI;
    let rng = RngStream::new(7);
    let proj = Projector::new(&basis, n_cutoff).unwrap();
    let sigma = compute_sigma_n(&basis, n_cutoff).unwrap();
    let probes = [0usize, 3, 11, 24];
    let m = 40_000usize;
    let mut sums = vec![Vec::with_capacity(m); probes.len() * 3];
    for s in 0..m {
        let pair = sample_mu(&basis, &rng, s as u64);
        let values = proj.apply(&pair.u0).unwrap().values();
        for (ki, k) in [2usize, 3, 4].into_iter().enumerate() {
            let w = wick_power(values.as_slice().unwrap(), k, &sigma.values).unwrap();
            for (pi, &p) in probes.iter().enumerate() {
                sums[ki * probes.len() + pi].push(w[p]);
            }
        }
    }
    for (i, col) in sums.iter().enumerate() {
        let est = stats::mean(col);
        let se = stats::se_mean(col);
        assert!(est.abs() < 4.0 * se, "slot {i}: {est} (se {se})");
    }
}

#[test]
fn gibbs_potential_is_centered_and_cauchy() {
    // E G_{N,4} = 0 and |G_N - G_{2N}|_{L2} decreases along the ladder
    let basis = torus(32.0, 2);
    let rng = RngStream::new(5150);
    let n_cutoff = 12.0;
    let proj = Projector::new(&basis, n_cutoff).unwrap();
    let sigma = compute_sigma_n(&basis, n_cutoff).unwrap();
    let m = 3000usize;
    let gs: Vec<f64> = (0..m)
        .map(|i| {
            let pair = sample_mu(&basis, &rng, i as u64);
            gibbs_potential(&pair.u0, &proj, &sigma, 3).unwrap()
        })
        .collect();
    let est = stats::mean(&gs);
    let se = stats::se_mean(&gs);
    assert!(est.abs() < 4.0 * se, "{est} (se {se})");

    let scan = gibbs_convergence_scan(&basis, 3, &[4.0, 8.0, 16.0], m, &rng).unwrap();
    assert!(
        scan[0].1 > scan[1].1 && scan[1].1 > scan[2].1,
        "not decreasing: {scan:?}"
    );
}

#[test]
fn eigenfunction_window_bound() {
    // unit spectral windows: max_x sum phi^2/<l>^2 <= C sum 1/<l>^2, C <= 3
    for basis in [torus(40.0, 1), sphere(42.0f64.sqrt(), 1)] {
        let cap = basis.lambda_max;
        let mut worst = 0.0f64;
        let mut lo = 0.0;
        while lo < cap {
            let in_window: Vec<_> = basis
                .modes
                .iter()
                .filter(|m| {
                    let l = m.lambda_sq.sqrt();
                    l > lo && l <= lo + 1.0
                })
                .collect();
            if !in_window.is_empty() {
                let rhs: f64 = in_window.iter().map(|m| 1.0 / m.bracket_sq).sum();
                let mut lhs_max = 0.0f64;
                for p in 0..basis.grid.len() {
                    let lhs: f64 = in_window
                        .iter()
                        .map(|m| basis.table[(m.index, p)].powi(2) / m.bracket_sq)
                        .sum();
                    lhs_max = lhs_max.max(lhs);
                }
                worst = worst.max(lhs_max / rhs);
            }
            lo += 1.0;
        }
        assert!(worst <= 3.0, "{}: C = {worst}", basis.manifold.name());
    }
}

#[test]
fn weyl_ratio_brackets() {
    for basis in [torus(60.0, 1), sphere(600.0f64.sqrt(), 1)] {
        let (lo, hi) = basis.weyl_bracket();
        assert!(lo > 0.0 && hi.is_finite());
        assert!(hi / lo < 1.5, "{}: [{lo}, {hi}]", basis.manifold.name());
    }
}

#[test]
fn energy_identity_along_the_remainder_flow() {
    // d/dt E_N(w) = -|dw/dt|^2 + <dw/dt, P_N[(P_N w)^k - H_k(P_N w + P_N r; sigma)]>
    // checked at midpoints by finite differences, converging at order >= 2
    let basis = torus(2.0 * TWO_PI, 2);
    let k = 3usize;
    let n_cutoff = 1.8 * TWO_PI;
    let spec = EquationSpec::new(EquationKind::SdnlwTruncNonlin, k, n_cutoff);
    let rng = RngStream::new(808);
    let pair = sample_mu(&basis, &rng, 0);
    let data = PairState::new(pair.u0, pair.u1, 0.0).unwrap();
    let horizon = 0.1;
    let proj = Projector::new(&basis, n_cutoff).unwrap();
    let sigma = compute_sigma_n(&basis, n_cutoff).unwrap();

    let discrepancy = |dt: f64| -> f64 {
        let cfg = SolverConfig::new(horizon, dt);
        let path = sample_wiener(&basis, horizon, dt, &rng, 1).unwrap();
        let (forcing, rough) = wick_forcing_from_rough(&spec, &data, Some(&path), &cfg).unwrap();
        let w0 = PairState::zero(&basis);
        let w = solve_remainder(&spec, &forcing, &w0, &cfg).unwrap();
        let energy = |s: &PairState| -> f64 {
            let pw = proj.apply(&s.u).unwrap().values();
            let pot: Vec<f64> = pw.iter().map(|&v| v.powi(k as i32 + 1)).collect();
            s.quadratic_energy() + basis.grid.integrate(&pot) / (k + 1) as f64
        };
        let mut worst = 0.0f64;
        for j in 0..w.states.len() - 1 {
            let de = (energy(&w.states[j + 1]) - energy(&w.states[j])) / dt;
            // midpoint states by averaging
            let vbar = w.states[j].v.add(&w.states[j + 1].v).unwrap().scaled(0.5);
            let wbar = w.states[j].u.add(&w.states[j + 1].u).unwrap().scaled(0.5);
            let rbar = rough[j].u.add(&rough[j + 1].u).unwrap().scaled(0.5);
            let pw = proj.apply(&wbar).unwrap().values();
            let pr = proj.apply(&rbar).unwrap().values();
            let integrand: Vec<f64> = pw
                .iter()
                .zip(pr.iter())
                .map(|(&wv, &rv)| wv.powi(k as i32) - hermite(k, wv + rv, sigma.values[0]))
                .collect();
            let mut f_coeffs = basis.analyze(&integrand).unwrap();
            f_coeffs = &f_coeffs * proj.multipliers();
            let rhs = -vbar.coeffs.dot(&vbar.coeffs) + vbar.coeffs.dot(&f_coeffs);
            worst = worst.max((de - rhs).abs());
        }
        worst
    };
    let e1 = discrepancy(1e-3);
    let e2 = discrepancy(5e-4);
    assert!(e1 < 1e-3, "discrepancy at dt=1e-3: {e1}");
    assert!(e1 / e2 > 2.5, "not second order: {e1} vs {e2}");
}

#[test]
fn wick_vs_naive_divergence_grows_with_n() {
    let rows =
        renwave_core::experiments::wick_vs_naive_distances(&[8.0, 16.0, 32.0], 3, 0.25, 2e-3, 33)
            .unwrap();
    assert!(
        rows[0].1 <= rows[1].1 && rows[1].1 <= rows[2].1,
        "not non-decreasing: {rows:?}"
    );
}

#[test]
fn time_shift_composition_matches_single_run() {
    // one t = 1 run vs two t = 1/2 legs with independent noise: same law
    let basis = torus(2.0 * TWO_PI, 2);
    let n_cutoff = 1.6 * TWO_PI;
    let k = 3;
    let spec = EquationSpec::new(EquationKind::SdnlwTruncNonlin, k, n_cutoff);
    let rng = RngStream::new(404);
    let m = 1500usize;
    let ens = sample_gibbs(&basis, n_cutoff, k, m, &rng, m as f64 / 20.0).unwrap();
    let dt = 5e-3;
    let cfg_half = SolverConfig::new(0.5, dt).store_every(usize::MAX);
    let cfg_full = SolverConfig::new(1.0, dt).store_every(usize::MAX);
    let noise_a = rng.child(1);
    let noise_b = rng.child(2);
    let noise_c = rng.child(3);

    let mut single = Vec::with_capacity(m);
    let mut composed = Vec::with_capacity(m);
    for i in 0..m {
        let p = &ens.samples[i];
        let s0 = PairState::new(p.u0.clone(), p.u1.clone(), 0.0).unwrap();
        let path_c = sample_wiener(&basis, 1.0, dt, &noise_c, i as u64).unwrap();
        let one = evolve_direct(&spec, &s0, Some(&path_c), &cfg_full).unwrap();
        single.push(one.last().u.coeffs[0].tanh());

        let path_a = sample_wiener(&basis, 0.5, dt, &noise_a, i as u64).unwrap();
        let path_b = sample_wiener(&basis, 0.5, dt, &noise_b, i as u64).unwrap();
        let leg1 = evolve_direct(&spec, &s0, Some(&path_a), &cfg_half).unwrap();
        let leg2 = evolve_direct(&spec, leg1.last(), Some(&path_b), &cfg_half).unwrap();
        composed.push(leg2.last().u.coeffs[0].tanh());
    }
    let (m1, se1) = stats::weighted_mean_se(&single, &ens.weights);
    let (m2, se2) = stats::weighted_mean_se(&composed, &ens.weights);
    let z = (m1 - m2) / (se1 * se1 + se2 * se2).sqrt();
    assert!(z.abs() < 4.0, "z = {z} ({m1} vs {m2})");
}

#[test]
fn binomial_coefficients() {
    assert_eq!(binom_f64(3, 0), 1.0);
    assert_eq!(binom_f64(3, 2), 3.0);
    assert_eq!(binom_f64(6, 3), 20.0);
}

#[test]
fn basis_manifest_stamps() {
    let b = torus(TWO_PI, 1);
    let m = b.manifest();
    assert!(m.contains("manifold=torus"));
    assert!(m.contains("modes=5"));
    let rows = b.mode_table_rows();
    assert_eq!(rows.len(), 5);
    assert!(rows[0].starts_with("0,0,"));
    // labels resolve the wavevector and branch
    let any_sin = b
        .modes
        .iter()
        .any(|mo| matches!(mo.label, ModeLabel::Torus { branch, .. } if branch == renwave_core::basis::Branch::Sin));
    assert!(any_sin);
}

#[test]
fn ou_stationarity_holds_at_every_mesh_time() {
    // coarse mesh, every per-mode marginal variance at its mu_N value
    let report = renwave_core::experiments::ou_invariance(
        &renwave_core::config::ConfigMap::parse("m = 4000\ntimes = [0.25, 0.5, 0.75, 1.0]\n")
            .unwrap(),
        99,
    )
    .unwrap();
    // 4 times x all modes x 2 components: allow the family-size inflation
    let worst = report
        .checks
        .iter()
        .find(|c| c.name == "ou_stationarity_worst_z")
        .unwrap()
        .value;
    assert!(worst < 5.0, "worst z {worst}");
}

#[test]
fn equation_kinds_fix_damping_and_noise() {
    use renwave_core::dynamics::{EquationKind, EquationSpec};
    let cases = [
        (EquationKind::SdnlwTruncData, true, 2.0f64.sqrt()),
        (EquationKind::SdnlwTruncNonlin, true, 2.0f64.sqrt()),
        (EquationKind::NlwTruncData, false, 0.0),
        (EquationKind::NlwTruncNonlin, false, 0.0),
        (EquationKind::Snlw, false, 1.0),
    ];
    for (kind, damped, amp) in cases {
        let spec = EquationSpec::new(kind, 3, 10.0);
        assert_eq!(spec.damped(), damped, "{kind:?}");
        assert_eq!(spec.noise_amplitude(), amp, "{kind:?}");
        // damping and noise come and go together for the measure experiments
        assert_eq!(spec.damped(), spec.noise_amplitude() == 2.0f64.sqrt());
    }
}

#[test]
fn sphere_wick_energy_is_conserved_too() {
    // the Hamiltonian truncation conserves E_N on the sphere as well
    let basis = sphere(20.0f64.sqrt(), 2);
    let spec = EquationSpec::new(EquationKind::NlwTruncNonlin, 3, 3.5);
    let rng = RngStream::new(12);
    let pair = sample_mu(&basis, &rng, 0);
    let data = PairState::new(pair.u0, pair.u1, 0.0).unwrap();
    let cfg = SolverConfig::new(0.5, 1e-3).store_every(50).with_wick_energy();
    let traj = evolve_direct(&spec, &data, None, &cfg).unwrap();
    let ew = traj.energy_wick.as_ref().unwrap();
    let drift = ew
        .iter()
        .fold(0.0f64, |m, &e| m.max((e - ew[0]).abs() / ew[0].abs()));
    assert!(drift < 1e-4, "drift {drift}");
}
