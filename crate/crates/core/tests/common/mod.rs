#![allow(dead_code)]

use finvel::quadrature::gauss_legendre;

/// Nested Gauss–Legendre rule on the scaled simplex `{y >= 0, sum y <= s}` of dimension `dim`.
pub fn simplex_integral(dim: usize, s: f64, nodes: usize, f: &dyn Fn(&[f64]) -> f64) -> f64 {
    let (x, w) = gauss_legendre(nodes);
    let mut y = vec![0.0; dim];
    fn rec(level: usize, left: f64, y: &mut Vec<f64>, x: &[f64], w: &[f64], f: &dyn Fn(&[f64]) -> f64) -> f64 {
        if level == y.len() {
            return f(y);
        }
        let mut acc = 0.0;
        for (xi, wi) in x.iter().zip(w) {
            let u = 0.5 * left * (xi + 1.0);
            y[level] = u;
            acc += 0.5 * left * wi * rec(level + 1, left - u, y, x, w, f);
        }
        acc
    }
    if dim == 0 {
        return f(&y);
    }
    rec(0, s, &mut y, &x, &w, f)
}

/// Density of a sum of `n` independent draws of `pdf` at `s`, by repeated
/// numerical convolution.
pub fn convolution_density(pdf: &dyn Fn(f64) -> f64, n: usize, s: f64, nodes: usize) -> f64 {
    assert!(n >= 1);
    if s <= 0.0 {
        return 0.0;
    }
    if n == 1 {
        return pdf(s);
    }
    // Integrate over the first n-1 draws; the last one closes the sum.
    simplex_integral(n - 1, s, nodes, &|u| {
        let used: f64 = u.iter().sum();
        u.iter().map(|&v| pdf(v)).product::<f64>() * pdf(s - used)
    })
}

/// `P{S_m <= s < S_m + W}` for `S_m` a sum of `m` draws of `pdf` and `W` an independent draw.
pub fn open_displacement(pdf: &dyn Fn(f64) -> f64, sf: &dyn Fn(f64) -> f64, m: usize, s: f64, nodes: usize) -> f64 {
    if m == 0 {
        return sf(s);
    }
    simplex_integral(m, s, nodes, &|u| {
        let used: f64 = u.iter().sum();
        u.iter().map(|&v| pdf(v)).product::<f64>() * sf(s - used)
    })
}

/// All sequences over `0..n` of a given length.
pub fn sequences(n: usize, len: usize) -> Vec<Vec<usize>> {
    let mut out = vec![Vec::new()];
    for _ in 0..len {
        out = out
            .into_iter()
            .flat_map(|s| {
                (0..n).map(move |h| {
                    let mut t = s.clone();
                    t.push(h);
                    t
                })
            })
            .collect();
    }
    out
}

/// Probability of the velocity sequences with the given counts ending in `k`.
pub fn enumerated_allocation(initial: &[f64], transition: &[Vec<f64>], counts: &[u32], k: usize) -> f64 {
    let len: u32 = counts.iter().sum();
    let n = initial.len();
    sequences(n, len as usize)
        .into_iter()
        .filter(|s| s.last() == Some(&k))
        .filter(|s| (0..n).all(|h| s.iter().filter(|&&v| v == h).count() as u32 == counts[h]))
        .map(|s| {
            let mut p = initial[s[0]];
            for w in s.windows(2) {
                p *= transition[w[0]][w[1]];
            }
            p
        })
        .sum()
}

/// Count vectors of length `n` with entries at least 1 and total at most `max_total`.
pub fn positive_counts(n: usize, max_total: u32) -> Vec<Vec<u32>> {
    let mut out = Vec::new();
    let mut cur = vec![1u32; n];
    fn rec(i: usize, left: u32, cur: &mut Vec<u32>, out: &mut Vec<Vec<u32>>) {
        if i == cur.len() {
            out.push(cur.clone());
            return;
        }
        for extra in 0..=left {
            cur[i] = 1 + extra;
            rec(i + 1, left - extra, cur, out);
        }
    }
    let left = max_total.saturating_sub(n as u32);
    rec(0, left, &mut cur, &mut out);
    out
}

pub fn rel_diff(a: f64, b: f64) -> f64 {
    (a - b).abs() / a.abs().max(b.abs()).max(f64::MIN_POSITIVE)
}
