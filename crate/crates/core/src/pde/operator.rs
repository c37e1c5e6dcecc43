use std::collections::BTreeMap;
use std::fmt::Debug;
use std::ops::Neg;

use itertools::Itertools;
use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{Num, ToPrimitive};

/// Coefficient ring for operator polynomials: exact rationals or floats.
pub trait Coefficient: Num + Neg<Output = Self> + Clone + PartialEq + Debug {
    fn from_i64(v: i64) -> Self;
    fn to_f64(&self) -> f64;
}

impl Coefficient for f64 {
    fn from_i64(v: i64) -> Self {
        v as f64
    }
    fn to_f64(&self) -> f64 {
        *self
    }
}

impl Coefficient for BigRational {
    fn from_i64(v: i64) -> Self {
        BigRational::from_integer(BigInt::from(v))
    }
    fn to_f64(&self) -> f64 {
        ToPrimitive::to_f64(self).unwrap_or(f64::NAN)
    }
}

/// Constant-coefficient differential operator in `d_t, d_{x_1}, ..., d_{x_D}`,
/// stored as multi-index `(a_t, a_1, ..., a_D)` to coefficient.
#[derive(Clone, Debug, PartialEq)]
pub struct OperatorPolynomial<C: Coefficient> {
    dim: usize,
    terms: BTreeMap<Vec<u32>, C>,
}

impl<C: Coefficient> OperatorPolynomial<C> {
    pub fn zero(dim: usize) -> Self {
        OperatorPolynomial { dim, terms: BTreeMap::new() }
    }

    pub fn constant(dim: usize, c: C) -> Self {
        Self::monomial(dim, vec![0; dim + 1], c)
    }

    pub fn monomial(dim: usize, index: Vec<u32>, c: C) -> Self {
        assert_eq!(index.len(), dim + 1, "multi-index length must be D+1");
        let mut p = Self::zero(dim);
        p.add_term(index, c);
        p
    }

    /// `d_t^n`.
    pub fn dt(dim: usize, n: u32) -> Self {
        let mut idx = vec![0; dim + 1];
        idx[0] = n;
        Self::monomial(dim, idx, C::one())
    }

    /// `d_{x_i}`, `i` from 1.
    pub fn dx(dim: usize, i: usize) -> Self {
        let mut idx = vec![0; dim + 1];
        idx[i] = 1;
        Self::monomial(dim, idx, C::one())
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    fn add_term(&mut self, index: Vec<u32>, c: C) {
        let entry = self.terms.entry(index).or_insert_with(C::zero);
        *entry = entry.clone() + c;
        if entry.is_zero() {
            self.terms.retain(|_, v| !v.is_zero());
        }
    }

    pub fn coeff(&self, index: &[u32]) -> C {
        self.terms.get(index).cloned().unwrap_or_else(C::zero)
    }

    pub fn terms(&self) -> &BTreeMap<Vec<u32>, C> {
        &self.terms
    }

    /// Highest total derivative order.
    pub fn order(&self) -> u32 {
        self.terms.keys().map(|k| k.iter().sum()).max().unwrap_or(0)
    }

    pub fn add(&self, other: &Self) -> Self {
        let mut out = self.clone();
        for (k, v) in &other.terms {
            out.add_term(k.clone(), v.clone());
        }
        out
    }

    pub fn sub(&self, other: &Self) -> Self {
        self.add(&other.scale(&-C::one()))
    }

    pub fn scale(&self, c: &C) -> Self {
        let mut out = Self::zero(self.dim);
        for (k, v) in &self.terms {
            out.add_term(k.clone(), v.clone() * c.clone());
        }
        out
    }

    pub fn mul(&self, other: &Self) -> Self {
        let mut out = Self::zero(self.dim);
        for (a, u) in &self.terms {
            for (b, v) in &other.terms {
                let idx = a.iter().zip(b).map(|(x, y)| x + y).collect();
                out.add_term(idx, u.clone() * v.clone());
            }
        }
        out
    }

    pub fn to_f64(&self) -> OperatorPolynomial<f64> {
        let mut out = OperatorPolynomial::zero(self.dim);
        for (k, v) in &self.terms {
            out.add_term(k.clone(), v.to_f64());
        }
        out
    }

    /// Same operator with the coefficient of `index` multiplied by `factor`.
    pub fn perturbed(&self, index: &[u32], factor: C) -> Self {
        let mut out = self.clone();
        if let Some(v) = out.terms.get_mut(index) {
            *v = v.clone() * factor;
        }
        out
    }
}

impl OperatorPolynomial<f64> {
    /// Largest coefficient difference, over the union of supports.
    pub fn max_abs_diff(&self, other: &Self) -> f64 {
        self.terms
            .keys()
            .chain(other.terms.keys())
            .map(|k| (self.coeff(k) - other.coeff(k)).abs())
            .fold(0.0, f64::max)
    }
}

fn binom(n: i64, k: i64) -> i64 {
    if k < 0 || k > n {
        return 0;
    }
    (0..k).fold(1, |acc, i| acc * (n - i) / (i + 1))
}

fn pow<C: Coefficient>(c: &C, n: u32) -> C {
    (0..n).fold(C::one(), |acc, _| acc * c.clone())
}

/// Multi-index for `d_t^h d_{x_{i_1}} ... d_{x_{i_k}}`.
fn index(dim: usize, h: u32, xs: &[usize]) -> Vec<u32> {
    let mut idx = vec![0; dim + 1];
    idx[0] = h;
    for &i in xs {
        idx[i] += 1;
    }
    idx
}

/// Scalar operator annihilating the inner density of the complete canonical
/// motion with rate `lambda` and switching law `p` (summing to 1):
/// `sum_k sum_{|i|=k} sum_h lambda^{D+1-h-k} [binom(D+1-k, h) - (p_0 + sum_{j not in i} p_j) binom(D-k, h)] d_t^h d_{x_i}`.
/// Its top-order part is of order `D+1` although the equation is usually called `D`-th order.
pub fn build_dth_order_operator<C: Coefficient>(d: usize, lambda: &C, p: &[C]) -> OperatorPolynomial<C> {
    assert_eq!(p.len(), d + 1, "need D+1 probabilities");
    let mut out = OperatorPolynomial::zero(d);
    for k in 0..=d {
        for i in (1..=d).combinations(k) {
            let outside = (1..=d).filter(|j| !i.contains(j)).fold(p[0].clone(), |acc, j| acc + p[j].clone());
            for h in 0..=(d + 1 - k) {
                let c = C::from_i64(binom((d + 1 - k) as i64, h as i64))
                    - outside.clone() * C::from_i64(binom((d - k) as i64, h as i64));
                let c = c * pow(lambda, (d + 1 - h - k) as u32);
                out.add_term(index(d, h as u32, &i), c);
            }
        }
    }
    out
}

/// Which form of the operator recursion to run.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum RecursionVariant {
    /// `p_n` in the `Lambda_n` update, seeded at `n = 0`.
    Corrected,
    /// `p_0` in the `Lambda_n` update for `n >= 2`, seeded with the explicit `n = 1` operators.
    AsPrinted,
}

/// `(Lambda_n, Gamma_n)` for `n = 0..=d`, where `d_t^{n+1} w_n = Lambda_n w_n + Gamma_n sum_{j>n} f_j`
/// and `w_n = f_0 + ... + f_n`.
pub fn recursion_sequence<C: Coefficient>(
    d: usize,
    lambda: &C,
    p: &[C],
    variant: RecursionVariant,
) -> Vec<(OperatorPolynomial<C>, OperatorPolynomial<C>)> {
    assert_eq!(p.len(), d + 1, "need D+1 probabilities");
    let one = C::one();
    let lam = |c: C| OperatorPolynomial::constant(d, lambda.clone() * c);
    let mut out = vec![(lam(p[0].clone() - one.clone()), lam(p[0].clone()))];
    for n in 1..=d {
        let (l_prev, g_prev) = out[n - 1].clone();
        let shift = OperatorPolynomial::dt(d, 1).add(&OperatorPolynomial::dx(d, n)).add(&lam(one.clone()));
        let dtn = OperatorPolynomial::dt(d, n as u32);
        let diff = g_prev.sub(&l_prev);
        let pl = if variant == RecursionVariant::AsPrinted && n >= 2 { p[0].clone() } else { p[n].clone() };
        let l_n = shift
            .mul(&l_prev)
            .add(&dtn.scale(&(lambda.clone() * (pl.clone() - one.clone()))))
            .add(&diff.scale(&(lambda.clone() * pl)))
            .sub(&dtn.mul(&OperatorPolynomial::dx(d, n)));
        let g_n = shift.mul(&g_prev).add(&dtn.add(&diff).scale(&(lambda.clone() * p[n].clone())));
        out.push((l_n, g_n));
    }
    out
}

/// `d_t^{D+1} - Lambda_D`: the scalar operator produced by the recursion.
pub fn recursion_operator<C: Coefficient>(d: usize, lambda: &C, p: &[C], variant: RecursionVariant) -> OperatorPolynomial<C> {
    let seq = recursion_sequence(d, lambda, p, variant);
    OperatorPolynomial::dt(d, d as u32 + 1).sub(&seq[d].0)
}

/// Closed form of `Lambda_n` in a `D`-dimensional operator space.
pub fn closed_lambda_n<C: Coefficient>(d: usize, n: usize, lambda: &C, p: &[C]) -> OperatorPolynomial<C> {
    let mut out = OperatorPolynomial::zero(d);
    for k in 0..=n {
        for i in (1..=n).combinations(k) {
            let outside = (1..=n).filter(|j| !i.contains(j)).fold(p[0].clone(), |acc, j| acc + p[j].clone());
            for h in 0..=(n - k) {
                let c = outside.clone() * C::from_i64(binom((n - k) as i64, h as i64))
                    - C::from_i64(binom((n + 1 - k) as i64, h as i64));
                out.add_term(index(d, h as u32, &i), c * pow(lambda, (n + 1 - h - k) as u32));
            }
            if k >= 1 {
                out.add_term(index(d, (n + 1 - k) as u32, &i), -C::one());
            }
        }
    }
    out
}

/// Closed form of `Gamma_n`.
pub fn closed_gamma_n<C: Coefficient>(d: usize, n: usize, lambda: &C, p: &[C]) -> OperatorPolynomial<C> {
    let mut out = OperatorPolynomial::zero(d);
    for k in 0..=n {
        for i in (1..=n).combinations(k) {
            let outside = (1..=n).filter(|j| !i.contains(j)).fold(p[0].clone(), |acc, j| acc + p[j].clone());
            for h in 0..=(n - k) {
                let c = outside.clone() * C::from_i64(binom((n - k) as i64, h as i64));
                out.add_term(index(d, h as u32, &i), c * pow(lambda, (n + 1 - h - k) as u32));
            }
        }
    }
    out
}
