//! Special functions: factorials, multinomials, the Bessel-type series
//! `I~_{alpha,nu}` and the modified Bessel function `I_1`.

use statrs::function::factorial;

/// `ln n!`, exact integer arithmetic up to 20.
pub fn ln_factorial(n: u64) -> f64 {
    if n <= 20 {
        (factorial_u64(n) as f64).ln()
    } else {
        factorial::ln_factorial(n)
    }
}

/// `n!` for `n <= 20`.
pub fn factorial_u64(n: u64) -> u64 {
    assert!(n <= 20, "{n}! overflows u64");
    (1..=n).product()
}

/// `n!` as a float (exact up to 20, then through the log-gamma).
pub fn factorial_f64(n: u64) -> f64 {
    if n <= 20 {
        factorial_u64(n) as f64
    } else {
        factorial::factorial(n)
    }
}

/// Multinomial coefficient `(sum k)! / prod k_i!`.
pub fn multinomial(k: &[u64]) -> f64 {
    let n: u64 = k.iter().sum();
    if n <= 20 {
        let mut num = factorial_u64(n);
        for &ki in k {
            num /= factorial_u64(ki);
        }
        num as f64
    } else {
        (ln_factorial(n) - k.iter().map(|&ki| ln_factorial(ki)).sum::<f64>()).exp()
    }
}

/// Binomial coefficient as an exact integer.
pub fn binomial_u64(n: u64, k: u64) -> u64 {
    if k > n {
        return 0;
    }
    let k = k.min(n - k);
    let mut r: u64 = 1;
    for i in 0..k {
        r = r * (n - i) / (i + 1);
    }
    r
}

/// Poisson probability `e^{-mu} mu^n / n!`.
pub fn poisson_pmf(mu: f64, n: u64) -> f64 {
    if mu == 0.0 {
        return if n == 0 { 1.0 } else { 0.0 };
    }
    (-mu + n as f64 * mu.ln() - ln_factorial(n)).exp()
}

/// A truncated series value with its bookkeeping.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SeriesValue {
    pub value: f64,
    pub terms: usize,
    /// Upper bound on the omitted tail.
    pub remainder: f64,
}

/// `I~_{alpha,nu}(z) = sum_n (z/nu)^{n nu} / (n!^{nu-alpha} (n+1)!^alpha)`.
pub fn bessel_tilde(alpha: u32, nu: u32, z: f64, tol: f64) -> SeriesValue {
    assert!(nu >= 1 && alpha <= nu, "need 0 <= alpha <= nu, nu >= 1");
    bessel_tilde_power(alpha, nu, (z / nu as f64).powi(nu as i32), tol)
}

/// Same series written in the variable `q = (z/nu)^nu`.
pub fn bessel_tilde_power(alpha: u32, nu: u32, q: f64, tol: f64) -> SeriesValue {
    let (a, b) = ((nu - alpha) as f64, alpha as f64);
    let ratio = |n: f64| q / ((n + 1.0).powf(a) * (n + 2.0).powf(b));
    let mut term = 1.0;
    let mut sum = 1.0;
    let mut n = 0usize;
    loop {
        let r = ratio(n as f64);
        let next = term * r;
        // Ratios decrease in n, so once r(n+1) < 1 the tail is geometric.
        let r_next = ratio(n as f64 + 1.0);
        if r_next < 1.0 {
            let bound = next / (1.0 - r_next);
            if bound <= tol * sum || next == 0.0 {
                return SeriesValue { value: sum, terms: n + 1, remainder: bound };
            }
        }
        sum += next;
        term = next;
        n += 1;
        if n > 100_000 {
            return SeriesValue { value: sum, terms: n, remainder: f64::INFINITY };
        }
    }
}

/// Modified Bessel function `I_1(z)` for `z >= 0`.
pub fn bessel_i1(z: f64) -> f64 {
    ln_bessel_i1(z).exp()
}

/// `ln I_1(z)` for `z > 0`, summed in log space so large arguments do not overflow.
pub fn ln_bessel_i1(z: f64) -> f64 {
    if z <= 0.0 {
        return f64::NEG_INFINITY;
    }
    let lh = (0.5 * z).ln();
    let q = 0.25 * z * z;
    // Start from the largest term, n* ~ z/2, then walk both ways.
    let nstar = (0.5 * z).floor() as u64;
    let ln_term = |n: u64| (2 * n + 1) as f64 * lh - ln_factorial(n) - ln_factorial(n + 1);
    let top = ln_term(nstar);
    let mut sum = 1.0;
    let mut t = 1.0;
    let mut n = nstar;
    loop {
        t *= q / ((n + 1) as f64 * (n + 2) as f64);
        n += 1;
        sum += t;
        if t < 1e-17 * sum {
            break;
        }
    }
    t = 1.0;
    n = nstar;
    while n > 0 {
        t *= (n as f64 * (n + 1) as f64) / q;
        n -= 1;
        sum += t;
        if t < 1e-17 * sum {
            break;
        }
    }
    top + sum.ln()
}

/// `ln(e^a + e^b)`.
pub fn log_add_exp(a: f64, b: f64) -> f64 {
    if a == f64::NEG_INFINITY {
        return b;
    }
    if b == f64::NEG_INFINITY {
        return a;
    }
    let m = a.max(b);
    m + ((a - m).exp() + (b - m).exp()).ln()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn factorials_and_multinomials() {
        assert_eq!(factorial_u64(5), 120);
        assert!((ln_factorial(25) - factorial::ln_factorial(25)).abs() < 1e-12);
        assert_eq!(multinomial(&[1, 2, 1]), 12.0);
        assert_eq!(binomial_u64(6, 2), 15);
        let big = multinomial(&[15, 15]);
        assert!((big - 155117520.0).abs() / 155117520.0 < 1e-12);
    }

    #[test]
    fn tilde_reduces_to_exponential() {
        let v = bessel_tilde(0, 1, 1.0, 1e-16);
        assert!((v.value - std::f64::consts::E).abs() < 1e-14);
        assert_eq!(bessel_tilde(2, 3, 0.0, 1e-16).value, 1.0);
    }

    #[test]
    fn tilde_matches_i0() {
        // I_0(2) from its own power series
        let mut s = 0.0;
        let mut t = 1.0;
        for k in 0..40 {
            s += t;
            t /= ((k + 1) * (k + 1)) as f64;
        }
        let v = bessel_tilde(0, 2, 2.0, 1e-16);
        assert!((v.value - s).abs() < 1e-14);
        assert!((v.value - 2.279585302336067).abs() < 1e-13);
    }

    #[test]
    fn i1_values() {
        assert!((bessel_i1(1.0) - 0.565159103992485).abs() < 1e-14);
        assert!((bessel_i1(10.0) - 2670.988303701255).abs() / 2670.99 < 1e-13);
        let big = ln_bessel_i1(800.0);
        // I_1(z) ~ e^z / sqrt(2 pi z) (1 - 3/(8z))
        let asym = 800.0 - 0.5 * (2.0 * std::f64::consts::PI * 800.0).ln() + (1.0 - 3.0 / 6400.0f64).ln();
        assert!((big - asym).abs() < 1e-6);
    }

    #[test]
    fn poisson_values() {
        assert!((poisson_pmf(1.0, 0) - (-1f64).exp()).abs() < 1e-16);
        assert!((poisson_pmf(1.0, 1) - (-1f64).exp()).abs() < 1e-16);
        assert_eq!(poisson_pmf(0.0, 0), 1.0);
    }
}
