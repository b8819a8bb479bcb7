//! Acceptance suite: one test per criterion, each printing a PASS/FAIL line
//! (run with `--nocapture` to see them as they complete). Tolerances and
//! thresholds are pinned here and in `renwave_core::experiments`.
//!
//! Criterion 11 (Wick-power Cauchy for the stochastic convolution) is
//! asserted exactly as stated; its k = 3 branch is non-monotone at the
//! pinned ladder — verified independently through exact lattice-convolution
//! sums — and is expected to print FAIL. See the repository notes for the
//! analysis; the other branches and both static-covariance families pass.

use std::sync::Arc;
use std::time::Instant;

use renwave_core::basis::{Manifold, SpectralBasis, TWO_PI};
use renwave_core::config::ConfigMap;
use renwave_core::experiments;
use renwave_core::gaussian::sample_mu;
use renwave_core::projector::Projector;
use renwave_core::rng::RngStream;
use renwave_core::stats;
use renwave_core::wick::{
    binom_f64, compute_sigma_n, covariance_kernel, hermite, KERNEL_ENTRY_CAP,
};

fn line(criterion: &str, pass: bool, detail: &str) {
    println!("{} {criterion}: {detail}", if pass { "PASS" } else { "FAIL" });
}

fn cfg(text: &str) -> ConfigMap {
    ConfigMap::parse(text).unwrap()
}

#[test]
fn criterion_01_hermite_algebra() {
    let t0 = Instant::now();
    // sum identity to 1e-10 on randomized inputs, k <= 6
    let rng = RngStream::new(1);
    let mut stream = rng.stream(renwave_core::rng::Purpose::Scratch, &[0]);
    use rand::Rng;
    let mut worst_sum = 0.0f64;
    for _ in 0..200 {
        let x: f64 = stream.random_range(-3.0..3.0);
        let y: f64 = stream.random_range(-3.0..3.0);
        let s: f64 = stream.random_range(0.1..3.0);
        for k in 0..=6usize {
            let lhs = hermite(k, x + y, s);
            let rhs: f64 = (0..=k)
                .map(|l| binom_f64(k, l) * hermite(l, x, s) * y.powi((k - l) as i32))
                .sum();
            worst_sum = worst_sum.max((lhs - rhs).abs() / lhs.abs().max(1.0));
        }
    }
    // derivative identity to O(h^2), h = 1e-5
    let h = 1e-5;
    let mut worst_diff = 0.0f64;
    for k in 1..=6usize {
        for &s in &[0.5, 1.0, 2.0] {
            let mut x = -3.0;
            while x <= 3.0 {
                let fd = (hermite(k, x + h, s) - hermite(k, x - h, s)) / (2.0 * h);
                let exact = k as f64 * hermite(k - 1, x, s);
                worst_diff = worst_diff.max((fd - exact).abs() / exact.abs().max(1.0));
                x += 0.25;
            }
        }
    }
    let elapsed = t0.elapsed().as_secs_f64();
    let pass = worst_sum < 1e-10 && worst_diff < 1e-6 && elapsed < 1.0;
    line(
        "criterion 01 hermite-algebra",
        pass,
        &format!("sum defect {worst_sum:.2e}, derivative defect {worst_diff:.2e}, {elapsed:.2}s"),
    );
    assert!(pass);
}

#[test]
fn criterion_02_sigma_oracle_and_slope() {
    let t0 = Instant::now();
    let report = experiments::sigma_scan(&cfg(""), 2).unwrap();
    let elapsed = t0.elapsed().as_secs_f64();
    let pass = report.passed() && elapsed < 10.0;
    let detail: Vec<String> = report
        .checks
        .iter()
        .map(|c| format!("{}={:.3e}", c.name, c.value))
        .collect();
    line(
        "criterion 02 sigma-oracle",
        pass,
        &format!("{} ({elapsed:.1}s)", detail.join(", ")),
    );
    assert!(pass);
}

#[test]
fn criterion_03_ito_isometry() {
    let t0 = Instant::now();
    let report = experiments::ito_check(&cfg("m = 10000\ndt = 0.001\n"), 3).unwrap();
    let elapsed = t0.elapsed().as_secs_f64();
    let worst = report
        .checks
        .iter()
        .find(|c| c.name == "ito_isometry_worst_z")
        .unwrap()
        .value;
    let pass = report.passed() && elapsed < 120.0;
    line(
        "criterion 03 ito-isometry",
        pass,
        &format!("worst |z| = {worst:.2} over probes at t in {{0.5, 1}} ({elapsed:.1}s)"),
    );
    assert!(pass);
}

#[test]
fn criterion_04_ou_invariance() {
    let t0 = Instant::now();
    let report = experiments::ou_invariance(&cfg("m = 10000\n"), 4).unwrap();
    let elapsed = t0.elapsed().as_secs_f64();
    let worst = report
        .checks
        .iter()
        .find(|c| c.name == "ou_stationarity_worst_z")
        .unwrap()
        .value;
    let pass = report.passed() && elapsed < 120.0;
    line(
        "criterion 04 ou-invariance",
        pass,
        &format!("worst per-mode |z| = {worst:.2} ({elapsed:.1}s)"),
    );
    assert!(pass);
}

#[test]
fn criterion_05_wick_orthogonality() {
    let t0 = Instant::now();
    let basis = Arc::new(SpectralBasis::build(Manifold::Torus, 2.0 * TWO_PI, 1).unwrap());
    let n_cutoff = 1.8 * TWO_PI;
    let rng = RngStream::new(5);
    let proj = Projector::new(&basis, n_cutoff).unwrap();
    let sigma = compute_sigma_n(&basis, n_cutoff).unwrap();
    let kernel = covariance_kernel(&basis, n_cutoff, KERNEL_ENTRY_CAP).unwrap();
    let g = basis.grid.len();
    let pairs: Vec<(usize, usize)> = vec![
        (0, 0),
        (0, 2),
        (0, g / 2),
        (1, g / 3),
        (3, 3),
        (g / 4, g / 4 + 2),
        (g / 2, g / 2),
        (g / 3, 2 * g / 3),
        (5, g - 1),
        (g - 1, g - 1),
    ];
    let m = 60_000usize;
    let mut prods = vec![Vec::with_capacity(m); pairs.len() * 16];
    for s in 0..m {
        let pair = sample_mu(&basis, &rng, s as u64);
        let values = proj.apply(&pair.u0).unwrap().values();
        for (pi, &(x, y)) in pairs.iter().enumerate() {
            for k in 1..=3usize {
                for l in 1..=3usize {
                    prods[pi * 16 + 4 * k + l].push(
                        hermite(k, values[x], sigma.values[x])
                            * hermite(l, values[y], sigma.values[y]),
                    );
                }
            }
        }
    }
    let mut worst_z = 0.0f64;
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
                worst_z = worst_z.max((est - expect).abs() / se);
            }
        }
    }
    let elapsed = t0.elapsed().as_secs_f64();
    let pass = worst_z < 4.0 && elapsed < 120.0;
    line(
        "criterion 05 wick-orthogonality",
        pass,
        &format!("worst |z| = {worst_z:.2} over 10 probe pairs, k,l <= 3 ({elapsed:.1}s)"),
    );
    assert!(pass);
}

#[test]
fn criterion_06_green_power_bound() {
    let t0 = Instant::now();
    let report = experiments::green_bound(&cfg("n_ladder = [16, 32, 64]\n"), 6).unwrap();
    let elapsed = t0.elapsed().as_secs_f64();
    let variation = report
        .checks
        .iter()
        .find(|c| c.name == "green_bound_variation_top3")
        .unwrap()
        .value;
    let pass = report.passed() && elapsed < 60.0;
    line(
        "criterion 06 green-bound",
        pass,
        &format!("variation over N in {{16,32,64}} = {:.1}% ({elapsed:.1}s)", 100.0 * variation),
    );
    assert!(pass);
}

#[test]
fn criterion_07_energy_conservation() {
    let t0 = Instant::now();
    let report = experiments::nlw_energy(&cfg(""), 7).unwrap();
    let elapsed = t0.elapsed().as_secs_f64();
    let drift = report
        .checks
        .iter()
        .find(|c| c.name == "energy_relative_drift")
        .unwrap()
        .value;
    let pass = report.passed() && elapsed < 30.0;
    line(
        "criterion 07 nlw-energy",
        pass,
        &format!("relative drift {drift:.2e} over T = 1 at dt = 1e-3 ({elapsed:.1}s)"),
    );
    assert!(pass);
}

#[test]
fn criterion_08_strang_order() {
    let t0 = Instant::now();
    let (slope, errs) = experiments::strang_self_convergence(8).unwrap();
    let elapsed = t0.elapsed().as_secs_f64();
    let pass = (1.8..=2.2).contains(&slope) && elapsed < 30.0;
    line(
        "criterion 08 strang-order",
        pass,
        &format!("slope {slope:.3} from errors {errs:?} ({elapsed:.1}s)"),
    );
    assert!(pass);
}

#[test]
fn criterion_09_trajectory_cauchy() {
    let t0 = Instant::now();
    let rows = experiments::n_cauchy_distances(&[8.0, 16.0, 32.0], 3, 1.0, 2e-3, 8, 9).unwrap();
    let elapsed = t0.elapsed().as_secs_f64();
    let decreasing = rows.windows(2).all(|w| w[1].1 < w[0].1);
    let pass = decreasing && elapsed < 300.0;
    line(
        "criterion 09 trajectory-cauchy",
        pass,
        &format!("coupled distances {rows:?} ({elapsed:.1}s)"),
    );
    assert!(pass);
}

#[test]
fn criterion_10_gibbs_invariance_with_negative_control() {
    let t0 = Instant::now();
    let positive = experiments::gibbs_invariance(&cfg("m = 10000\n"), 21).unwrap();
    let pos_pass = positive.passed();
    let worst = positive
        .checks
        .iter()
        .find(|c| c.name == "invariance_worst_z")
        .unwrap()
        .value;
    line(
        "criterion 10a gibbs-invariance",
        pos_pass,
        &format!("worst |z| = {worst:.2}, KS at alpha = 0.01 all pass, M = 10^4"),
    );

    let control = experiments::gibbs_invariance(
        &cfg("m = 2000\nwick = false\nlambda_max = 35.543\nn = 35.543\n"),
        21,
    )
    .unwrap();
    let control_failed = !control.passed();
    let cz = control
        .checks
        .iter()
        .find(|c| c.name == "invariance_worst_z")
        .unwrap()
        .value;
    line(
        "criterion 10b negative-control",
        control_failed,
        &format!("naive power at ~100 modes rejected with worst |z| = {cz:.1}"),
    );
    let elapsed = t0.elapsed().as_secs_f64();
    let pass = pos_pass && control_failed && elapsed < 600.0;
    line(
        "criterion 10 gibbs-invariance",
        pass,
        &format!("({elapsed:.1}s)"),
    );
    assert!(pass);
}

#[test]
fn criterion_11_wick_power_cauchy() {
    // Asserted exactly as stated for the stochastic convolution, k <= 3,
    // N in {8,16,32}, through the pointwise second moment of the smoothed
    // difference (the quantity the covariance computation controls). The
    // k = 3 branch is genuinely non-monotone at this ladder (the dip at
    // N = 16 and the chaos-prefactor growth; decrease resumes beyond
    // N = 32) and is expected to FAIL; see the README note.
    let t0 = Instant::now();
    let basis = Arc::new(SpectralBasis::build(Manifold::Torus, 64.0, 2).unwrap());
    let ladder = [8.0, 16.0, 32.0];
    let conv =
        experiments::wick_cauchy_second_moment(&basis, true, &ladder, 3, 0.25, 1.0).unwrap();
    let stat =
        experiments::wick_cauchy_second_moment(&basis, false, &ladder, 3, 0.25, 1.0).unwrap();
    let elapsed = t0.elapsed().as_secs_f64();

    let mut all_pass = elapsed < 300.0;
    for k in 1..=3usize {
        let pts: Vec<f64> = conv
            .iter()
            .filter(|(rk, _, _)| *rk == k)
            .map(|&(_, _, d)| d)
            .collect();
        let dec = pts.windows(2).all(|w| w[1] < w[0]);
        line(
            &format!("criterion 11 wick-power-cauchy (convolution k={k})"),
            dec,
            &format!("differences {pts:?}"),
        );
        all_pass &= dec;
    }
    for k in 1..=3usize {
        let pts: Vec<f64> = stat
            .iter()
            .filter(|(rk, _, _)| *rk == k)
            .map(|&(_, _, d)| d)
            .collect();
        let dec = pts.windows(2).all(|w| w[1] < w[0]);
        line(
            &format!("criterion 11 context (static covariance k={k})"),
            dec,
            &format!("differences {pts:?}"),
        );
    }
    line(
        "criterion 11 wick-power-cauchy",
        all_pass,
        &format!("({elapsed:.1}s; the convolution k=3 branch is a documented desk-scale failure)"),
    );
    assert!(
        all_pass,
        "the convolution k = 3 branch is non-monotone at N in {{8,16,32}}; see the README note"
    );
}

#[test]
fn criterion_12_reproducibility_across_thread_counts() {
    let t0 = Instant::now();
    let run = |threads: usize| -> Vec<String> {
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build()
            .unwrap();
        pool.install(|| {
            let ito = experiments::ito_check(&cfg("m = 400\n"), 12).unwrap();
            let gibbs = experiments::gibbs_invariance(&cfg("m = 300\nt = 0.25\n"), 12).unwrap();
            let mut out = Vec::new();
            for r in [&ito, &gibbs] {
                for t in r.tables.iter().chain(std::iter::once(&r.summary_table())) {
                    out.push(t.render(&r.manifest));
                }
            }
            out
        })
    };
    let a = run(1);
    let b = run(4);
    let c = run(1);
    let identical = a == b && a == c;
    let elapsed = t0.elapsed().as_secs_f64();
    line(
        "criterion 12 reproducibility",
        identical,
        &format!(
            "{} rendered CSV artifacts byte-identical across 1/4/1 threads ({elapsed:.1}s)",
            a.len()
        ),
    );
    assert!(identical);
}
