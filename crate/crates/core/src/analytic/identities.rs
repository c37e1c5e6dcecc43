use itertools::Itertools;

use crate::special::multinomial;

fn alternating_subset_sum(c: &[f64], f: impl Fn(f64) -> f64) -> f64 {
    let h = c.len();
    let mut s = 0.0;
    for size in 1..=h {
        let sign = if (h - size).is_multiple_of(2) { 1.0 } else { -1.0 };
        for sub in c.iter().combinations(size) {
            s += sign * f(sub.into_iter().sum());
        }
    }
    s
}

/// `sum_{h=1}^H (-1)^{H-h} sum_{|S| = h} (sum_S c)^m`.
/// The identity with the closed side needs `m >= 1`: at `m = 0` this is `(-1)^(H+1)`.
pub fn identity_subset_power_sum(c: &[f64], m: u32) -> f64 {
    alternating_subset_sum(c, |x| x.powi(m as i32))
}

/// Closed side of the power-sum identity: 0 for `m < H`, otherwise the sum over
/// compositions `n_1 + ... + n_H = m`, `n_i >= 1`, of `binom(m; n) prod c_i^{n_i}`.
pub fn subset_power_sum_rhs(c: &[f64], m: u32) -> f64 {
    let h = c.len();
    if (m as usize) < h {
        return 0.0;
    }
    let mut total = 0.0;
    let mut parts = vec![1u64; h];
    compositions(&mut parts, 0, m as u64 - h as u64, &mut |n| {
        let w = multinomial(n);
        total += w * n.iter().zip(c).map(|(&k, &ci)| ci.powi(k as i32)).product::<f64>();
    });
    total
}

fn compositions(parts: &mut Vec<u64>, i: usize, left: u64, f: &mut impl FnMut(&[u64])) {
    if i + 1 == parts.len() {
        parts[i] += left;
        f(parts);
        parts[i] -= left;
        return;
    }
    for extra in 0..=left {
        parts[i] += extra;
        compositions(parts, i + 1, left - extra, f);
        parts[i] -= extra;
    }
}

/// `sum_h c_h e^{beta c_h} prod_{j != h} (e^{beta c_j} - 1)`.
pub fn exp_product_lhs(c: &[f64], beta: f64) -> f64 {
    (0..c.len())
        .map(|h| {
            c[h] * (beta * c[h]).exp()
                * (0..c.len()).filter(|&j| j != h).map(|j| (beta * c[j]).exp_m1()).product::<f64>()
        })
        .sum()
}

/// `sum_{h=1}^H (-1)^{H-h} sum_{|S| = h} (sum_S c) e^{beta sum_S c}`.
pub fn exp_product_rhs(c: &[f64], beta: f64) -> f64 {
    alternating_subset_sum(c, |x| x * (beta * x).exp())
}

/// Both sides of the exponential-product identity.
pub fn identity_exp_product(c: &[f64], beta: f64) -> (f64, f64) {
    (exp_product_lhs(c, beta), exp_product_rhs(c, beta))
}
