//! Order-independent reductions and the statistical harness: compensated
//! sums, moment estimates with standard errors, effective sample size, and a
//! (weighted) two-sample Kolmogorov-Smirnov test.
//!
//! Ensemble code computes one record per sample into an indexed buffer and
//! reduces here sequentially, so results do not depend on the worker count.

/// Neumaier compensated sum over a slice, in slice order.
pub fn csum(xs: &[f64]) -> f64 {
    let mut s = 0.0;
    let mut c = 0.0;
    for &x in xs {
        let t = s + x;
        if s.abs() >= x.abs() {
            c += (s - t) + x;
        } else {
            c += (x - t) + s;
        }
        s = t;
    }
    s + c
}

pub fn mean(xs: &[f64]) -> f64 {
    csum(xs) / xs.len() as f64
}

/// Unbiased sample variance.
pub fn variance(xs: &[f64]) -> f64 {
    let m = mean(xs);
    let sq: Vec<f64> = xs.iter().map(|&x| (x - m) * (x - m)).collect();
    csum(&sq) / (xs.len() as f64 - 1.0)
}

/// Standard error of the sample mean.
pub fn se_mean(xs: &[f64]) -> f64 {
    (variance(xs) / xs.len() as f64).sqrt()
}

/// Standard error of the sample variance of a Gaussian sample:
/// `Var(s^2) = 2 sigma^4 / (M - 1)`.
pub fn se_variance_gaussian(sample_var: f64, m: usize) -> f64 {
    sample_var * (2.0 / (m as f64 - 1.0)).sqrt()
}

/// Self-normalized weighted mean and its standard error (ratio estimator).
pub fn weighted_mean_se(values: &[f64], weights: &[f64]) -> (f64, f64) {
    assert_eq!(values.len(), weights.len());
    let w_sum = csum(weights);
    let wx: Vec<f64> = values.iter().zip(weights).map(|(&x, &w)| w * x).collect();
    let est = csum(&wx) / w_sum;
    let dev: Vec<f64> = values
        .iter()
        .zip(weights)
        .map(|(&x, &w)| {
            let d = w * (x - est);
            d * d
        })
        .collect();
    let se = csum(&dev).sqrt() / w_sum;
    (est, se)
}

/// Effective sample size of an importance-weighted ensemble,
/// `(sum w)^2 / sum w^2`.
pub fn effective_sample_size(weights: &[f64]) -> f64 {
    let s = csum(weights);
    let sq: Vec<f64> = weights.iter().map(|&w| w * w).collect();
    s * s / csum(&sq)
}

/// Outcome of a two-sample KS comparison.
#[derive(Debug, Clone, Copy)]
pub struct KsOutcome {
    pub statistic: f64,
    pub critical_value: f64,
    pub alpha: f64,
    /// Effective sizes used in the critical value.
    pub n_eff: (f64, f64),
}

impl KsOutcome {
    pub fn rejected(&self) -> bool {
        self.statistic > self.critical_value
    }
}

/// Weighted two-sample KS test at level `alpha`.
///
/// The statistic is the sup distance between the self-normalized weighted
/// ECDFs; the critical value is the asymptotic smirnov threshold
/// `c(alpha) * sqrt(1/n1_eff + 1/n2_eff)` with `c(alpha) = sqrt(-ln(alpha/2)/2)`
/// and effective sizes given by the ESS of each weight vector. With unit
/// weights this is the usual large-sample two-sample test. For paired samples
/// (shared draws at two times) the test is conservative.
pub fn weighted_ks(
    xs: &[f64],
    wx: &[f64],
    ys: &[f64],
    wy: &[f64],
    alpha: f64,
) -> KsOutcome {
    assert!(!xs.is_empty() && !ys.is_empty());
    let mut a: Vec<(f64, f64)> = xs.iter().copied().zip(wx.iter().copied()).collect();
    let mut b: Vec<(f64, f64)> = ys.iter().copied().zip(wy.iter().copied()).collect();
    a.sort_by(|p, q| p.0.total_cmp(&q.0));
    b.sort_by(|p, q| p.0.total_cmp(&q.0));
    let wa: f64 = csum(wx);
    let wb: f64 = csum(wy);

    let mut i = 0;
    let mut j = 0;
    let mut ca = 0.0;
    let mut cb = 0.0;
    let mut d = 0.0f64;
    while i < a.len() || j < b.len() {
        let t = match (a.get(i), b.get(j)) {
            (Some(p), Some(q)) => p.0.min(q.0),
            (Some(p), None) => p.0,
            (None, Some(q)) => q.0,
            (None, None) => break,
        };
        while i < a.len() && a[i].0 <= t {
            ca += a[i].1;
            i += 1;
        }
        while j < b.len() && b[j].0 <= t {
            cb += b[j].1;
            j += 1;
        }
        d = d.max((ca / wa - cb / wb).abs());
    }

    let n1 = effective_sample_size(wx);
    let n2 = effective_sample_size(wy);
    let c_alpha = (-(alpha / 2.0).ln() / 2.0).sqrt();
    KsOutcome {
        statistic: d,
        critical_value: c_alpha * (1.0 / n1 + 1.0 / n2).sqrt(),
        alpha,
        n_eff: (n1, n2),
    }
}

/// Fixed-width histogram over `[lo, hi)`; values outside land in the edge bins.
pub fn histogram(xs: &[f64], lo: f64, hi: f64, bins: usize) -> Vec<(f64, usize)> {
    assert!(bins > 0 && hi > lo);
    let mut counts = vec![0usize; bins];
    let w = (hi - lo) / bins as f64;
    for &x in xs {
        let k = (((x - lo) / w).floor() as i64).clamp(0, bins as i64 - 1) as usize;
        counts[k] += 1;
    }
    counts
        .into_iter()
        .enumerate()
        .map(|(k, c)| (lo + (k as f64 + 0.5) * w, c))
        .collect()
}
