//! Convex polytopes `{u : a_i + b_i . u >= 0}` handled by Fourier–Motzkin
//! elimination: nested variable bounds, strict feasibility and iterated
//! adaptive integration.

use nalgebra::DMatrix;

use crate::quadrature::{adaptive_gk, QuadResult};

const COEF_EPS: f64 = 1e-13;

#[derive(Clone, Debug)]
struct Constraint {
    a: f64,
    b: Vec<f64>,
}

impl Constraint {
    fn normalized(mut self) -> Self {
        let s = self.b.iter().fold(self.a.abs(), |m, v| m.max(v.abs()));
        if s > 0.0 {
            self.a /= s;
            for v in &mut self.b {
                *v /= s;
            }
        }
        self
    }

    fn same_as(&self, other: &Constraint) -> bool {
        (self.a - other.a).abs() < 1e-12
            && self.b.iter().zip(&other.b).all(|(x, y)| (x - y).abs() < 1e-12)
    }
}

/// Polytope in `dim` variables; `levels[j]` holds the constraints that involve
/// only `u_0..=u_j`, obtained by eliminating the later variables.
#[derive(Clone, Debug)]
pub struct Polytope {
    dim: usize,
    levels: Vec<Vec<Constraint>>,
    empty: bool,
}

fn push_unique(list: &mut Vec<Constraint>, c: Constraint) {
    if !list.iter().any(|e| e.same_as(&c)) {
        list.push(c);
    }
}

impl Polytope {
    /// Builds `{u : a_i + b.row(i) . u >= 0}`; `tol` is the slack allowed on
    /// constraints that become variable-free.
    pub fn new(a: &[f64], b: &DMatrix<f64>, tol: f64) -> Self {
        let dim = b.ncols();
        let mut current: Vec<Constraint> = Vec::new();
        for (i, &ai) in a.iter().enumerate() {
            let c = Constraint { a: ai, b: b.row(i).iter().copied().collect() }.normalized();
            push_unique(&mut current, c);
        }
        let mut levels: Vec<Vec<Constraint>> = vec![Vec::new(); dim];
        let mut empty = false;
        for j in (0..dim).rev() {
            let mut next = Vec::new();
            let mut pos = Vec::new();
            let mut neg = Vec::new();
            for c in &current {
                let bj = c.b[j];
                if bj > COEF_EPS {
                    pos.push(c.clone());
                } else if bj < -COEF_EPS {
                    neg.push(c.clone());
                } else {
                    let mut d = c.clone();
                    d.b.truncate(j);
                    push_unique(&mut next, d);
                }
            }
            for p in &pos {
                for n in &neg {
                    let wp = 1.0 / p.b[j];
                    let wn = -1.0 / n.b[j];
                    let d = Constraint {
                        a: p.a * wp + n.a * wn,
                        b: (0..j).map(|i| p.b[i] * wp + n.b[i] * wn).collect(),
                    }
                    .normalized();
                    push_unique(&mut next, d);
                }
            }
            levels[j] = current;
            current = next;
        }
        for c in &current {
            if c.a < -tol {
                empty = true;
            }
        }
        Polytope { dim, levels, empty }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    /// True when the variable-free constraints already fail.
    pub fn is_empty(&self) -> bool {
        self.empty
    }

    /// Range of variable `prefix.len()` given the values of the earlier ones.
    pub fn bounds(&self, prefix: &[f64]) -> Option<(f64, f64)> {
        if self.empty {
            return None;
        }
        let j = prefix.len();
        let mut lo = f64::NEG_INFINITY;
        let mut hi = f64::INFINITY;
        for c in &self.levels[j] {
            let rest = c.a + prefix.iter().zip(&c.b).map(|(u, b)| u * b).sum::<f64>();
            let bj = c.b[j];
            if bj > COEF_EPS {
                lo = lo.max(-rest / bj);
            } else if bj < -COEF_EPS {
                hi = hi.min(-rest / bj);
            } else if rest < -1e-12 {
                return None;
            }
        }
        if lo > hi {
            None
        } else {
            Some((lo, hi))
        }
    }

    /// Iterated integral of `f` over the polytope. Unbounded directions are an error
    /// of the caller and integrate to NaN.
    pub fn integrate<F: Fn(&[f64]) -> f64>(&self, f: &F, abs_tol: f64, rel_tol: f64) -> QuadResult {
        if self.empty {
            return QuadResult::zero();
        }
        if self.dim == 0 {
            return QuadResult { value: f(&[]), error: 0.0, evaluations: 1 };
        }
        self.integrate_level(&[], f, abs_tol, rel_tol)
    }

    fn integrate_level<F: Fn(&[f64]) -> f64>(
        &self,
        prefix: &[f64],
        f: &F,
        abs_tol: f64,
        rel_tol: f64,
    ) -> QuadResult {
        let Some((lo, hi)) = self.bounds(prefix) else {
            return QuadResult::zero();
        };
        if !(hi > lo) {
            return QuadResult::zero();
        }
        if !lo.is_finite() || !hi.is_finite() {
            return QuadResult { value: f64::NAN, error: f64::INFINITY, evaluations: 0 };
        }
        let last = prefix.len() + 1 == self.dim;
        let inner_evals = std::cell::Cell::new(0usize);
        let g = |u: f64| {
            let mut p = prefix.to_vec();
            p.push(u);
            if last {
                f(&p)
            } else {
                let r = self.integrate_level(&p, f, abs_tol / (hi - lo).max(1e-300), rel_tol);
                inner_evals.set(inner_evals.get() + r.evaluations);
                r.value
            }
        };
        let mut r = adaptive_gk(&g, lo, hi, abs_tol, rel_tol);
        r.evaluations += inner_evals.get();
        r
    }
}

/// Largest `s` such that `a + B u >= s` componentwise for some `u`, capped at `cap`.
/// Returns `None` when even `s = -cap` is infeasible.
pub fn max_uniform_slack(a: &[f64], b: &DMatrix<f64>, cap: f64) -> Option<f64> {
    let q = b.ncols();
    let m = a.len();
    // Variables (s, u_1..u_q); constraints a_i + B_i u - s >= 0, cap - s >= 0, s + cap >= 0.
    let mut bb = DMatrix::zeros(m + 2, q + 1);
    let mut aa = Vec::with_capacity(m + 2);
    for i in 0..m {
        aa.push(a[i]);
        bb[(i, 0)] = -1.0;
        for j in 0..q {
            bb[(i, j + 1)] = b[(i, j)];
        }
    }
    aa.push(cap);
    bb[(m, 0)] = -1.0;
    aa.push(cap);
    bb[(m + 1, 0)] = 1.0;
    let p = Polytope::new(&aa, &bb, 0.0);
    p.bounds(&[]).map(|(_, hi)| hi)
}
