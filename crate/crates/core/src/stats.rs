//! Test statistics used when comparing simulations with exact laws.

/// `(count - n p) / sqrt(n p (1 - p))`.
pub fn binomial_z(count: u64, n: u64, p: f64) -> f64 {
    let n = n as f64;
    let mean = n * p;
    let sd = (n * p * (1.0 - p)).max(0.0).sqrt();
    let diff = count as f64 - mean;
    if sd == 0.0 {
        return if diff.abs() < 0.5 { 0.0 } else { f64::INFINITY };
    }
    diff / sd
}

/// Standard error of a frequency estimated from `n` trials.
pub fn frequency_sigma(n: u64, p: f64) -> f64 {
    (p * (1.0 - p) / n as f64).max(0.0).sqrt()
}

/// Kolmogorov survival function `P(K > x) = 2 sum_k (-1)^(k-1) exp(-2 k^2 x^2)`.
pub fn kolmogorov_survival(x: f64) -> f64 {
    if x <= 0.0 {
        return 1.0;
    }
    if x < 0.2 {
        return 1.0;
    }
    let mut s = 0.0;
    for k in 1..=100 {
        let kf = k as f64;
        let term = (-2.0 * kf * kf * x * x).exp();
        s += if k % 2 == 1 { term } else { -term };
        if term < 1e-17 {
            break;
        }
    }
    (2.0 * s).clamp(0.0, 1.0)
}

/// `c` with `P(K > c) = alpha`.
pub fn kolmogorov_critical(alpha: f64) -> f64 {
    let (mut lo, mut hi) = (0.2, 10.0);
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if kolmogorov_survival(mid) > alpha {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    0.5 * (lo + hi)
}

#[derive(Clone, Copy, Debug, PartialEq, serde::Serialize)]
pub struct KsResult {
    pub statistic: f64,
    /// Effective sample size `n` or `n m / (n + m)`.
    pub effective_n: f64,
    pub p_value: f64,
}

impl KsResult {
    /// Rejects at level `alpha` using the asymptotic critical value.
    pub fn rejects(&self, alpha: f64) -> bool {
        self.statistic > kolmogorov_critical(alpha) / self.effective_n.sqrt()
    }
}

fn sorted(x: &[f64]) -> Vec<f64> {
    let mut v = x.to_vec();
    v.sort_by(|a, b| a.total_cmp(b));
    v
}

/// One-sample Kolmogorov-Smirnov test against a continuous cdf.
pub fn ks_one_sample<F: Fn(f64) -> f64>(samples: &[f64], cdf: F) -> KsResult {
    let x = sorted(samples);
    let n = x.len() as f64;
    let mut d: f64 = 0.0;
    for (i, &xi) in x.iter().enumerate() {
        let f = cdf(xi);
        d = d.max((i as f64 + 1.0) / n - f).max(f - i as f64 / n);
    }
    KsResult { statistic: d, effective_n: n, p_value: kolmogorov_survival(n.sqrt() * d) }
}

/// Two-sample Kolmogorov-Smirnov test.
pub fn ks_two_sample(a: &[f64], b: &[f64]) -> KsResult {
    let (x, y) = (sorted(a), sorted(b));
    let (n, m) = (x.len() as f64, y.len() as f64);
    let (mut i, mut j) = (0, 0);
    let mut d: f64 = 0.0;
    while i < x.len() && j < y.len() {
        let v = x[i].min(y[j]);
        while i < x.len() && x[i] <= v {
            i += 1;
        }
        while j < y.len() && y[j] <= v {
            j += 1;
        }
        d = d.max((i as f64 / n - j as f64 / m).abs());
    }
    let ne = n * m / (n + m);
    KsResult { statistic: d, effective_n: ne, p_value: kolmogorov_survival(ne.sqrt() * d) }
}

/// Bin-by-bin comparison of observed counts with exact probabilities.
#[derive(Clone, Debug, PartialEq, serde::Serialize)]
pub struct HistogramComparison {
    pub bins: usize,
    pub within: usize,
    pub fraction: f64,
    pub max_abs_z: f64,
}

/// Counts the bins whose binomial z-score is at most `band` in absolute value.
pub fn compare_counts(observed: &[u64], probabilities: &[f64], n: u64, band: f64) -> HistogramComparison {
    let mut within = 0;
    let mut max_abs_z: f64 = 0.0;
    for (&c, &p) in observed.iter().zip(probabilities) {
        let z = binomial_z(c, n, p).abs();
        max_abs_z = max_abs_z.max(z);
        if z <= band {
            within += 1;
        }
    }
    let bins = observed.len().min(probabilities.len());
    HistogramComparison { bins, within, fraction: if bins == 0 { 1.0 } else { within as f64 / bins as f64 }, max_abs_z }
}
