use finvel::pde::*;
use finvel::{Error, MotionModel};
use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, Zero};

fn q(n: i64, d: i64) -> BigRational {
    BigRational::new(BigInt::from(n), BigInt::from(d))
}

/// Polynomial in (s, xi_1..xi_D) as a map from exponents to coefficients.
type Poly = std::collections::BTreeMap<Vec<u32>, BigRational>;

fn poly_mul(a: &Poly, b: &Poly) -> Poly {
    let mut out = Poly::new();
    for (ea, ca) in a {
        for (eb, cb) in b {
            let e: Vec<u32> = ea.iter().zip(eb).map(|(x, y)| x + y).collect();
            let c = out.entry(e).or_insert_with(BigRational::zero);
            *c = c.clone() + ca.clone() * cb.clone();
        }
    }
    out.retain(|_, c| !c.is_zero());
    out
}

fn poly_add(a: &Poly, b: &Poly, sb: &BigRational) -> Poly {
    let mut out = a.clone();
    for (e, c) in b {
        let v = out.entry(e.clone()).or_insert_with(BigRational::zero);
        *v = v.clone() + c.clone() * sb.clone();
    }
    out.retain(|_, c| !c.is_zero());
    out
}

/// Symbol of the first-order system for the complete canonical motion:
/// with `a_i = s + lambda + <v_i, xi>`, plane waves exist iff
/// `prod a_i - lambda sum_i p_i prod_{j != i} a_j = 0`.
fn dispersion(d: usize, lambda: &BigRational, p: &[BigRational]) -> Poly {
    let a = |i: usize| -> Poly {
        let mut m = Poly::new();
        let mut e = vec![0u32; d + 1];
        e[0] = 1;
        m.insert(e, BigRational::one());
        m.insert(vec![0; d + 1], lambda.clone());
        if i > 0 {
            let mut e = vec![0u32; d + 1];
            e[i] = 1;
            m.insert(e, BigRational::one());
        }
        m
    };
    let one = || {
        let mut m = Poly::new();
        m.insert(vec![0; d + 1], BigRational::one());
        m
    };
    let prod = |skip: Option<usize>| (0..=d).filter(|&j| Some(j) != skip).fold(one(), |acc, j| poly_mul(&acc, &a(j)));
    let mut out = prod(None);
    for i in 0..=d {
        out = poly_add(&out, &prod(Some(i)), &(-(lambda.clone() * p[i].clone())));
    }
    out
}

fn as_poly(op: &OperatorPolynomial<BigRational>) -> Poly {
    op.terms().iter().filter(|(_, c)| !c.is_zero()).map(|(e, c)| (e.clone(), c.clone())).collect()
}

fn probabilities(d: usize) -> Vec<BigRational> {
    // Distinct entries: p_h proportional to h + 1.
    let total: i64 = (1..=d as i64 + 1).sum();
    (0..=d).map(|h| q(h as i64 + 1, total)).collect()
}

#[test]
fn operator_matches_dispersion_relation() {
    let lambda = q(3, 2);
    for d in 1..=4 {
        for p in [probabilities(d), vec![q(1, d as i64 + 1); d + 1]] {
            let op = build_dth_order_operator(d, &lambda, &p);
            assert_eq!(as_poly(&op), dispersion(d, &lambda, &p), "d={d}");
            assert_eq!(op.order(), d as u32 + 1);
            assert_eq!(op.coeff(&{
                let mut e = vec![0; d + 1];
                e[0] = d as u32 + 1;
                e
            }), BigRational::one());
        }
    }
}

#[test]
fn recursion_reproduces_operator_exactly() {
    let lambda = q(7, 3);
    for d in 1..=4 {
        for p in [probabilities(d), vec![q(1, d as i64 + 1); d + 1]] {
            let direct = build_dth_order_operator(d, &lambda, &p);
            let rec = recursion_operator(d, &lambda, &p, RecursionVariant::Corrected);
            assert_eq!(as_poly(&rec), as_poly(&direct), "d={d}");
            let seq = recursion_sequence(d, &lambda, &p, RecursionVariant::Corrected);
            for (n, (l, g)) in seq.iter().enumerate() {
                assert_eq!(as_poly(l), as_poly(&closed_lambda_n(d, n, &lambda, &p)), "Lambda_{n}, d={d}");
                assert_eq!(as_poly(g), as_poly(&closed_gamma_n(d, n, &lambda, &p)), "Gamma_{n}, d={d}");
            }
        }
    }
}

#[test]
fn printed_recursion_differs_from_two_dimensions_on() {
    let lambda = q(1, 1);
    let p = probabilities(1);
    let same = recursion_operator(1, &lambda, &p, RecursionVariant::AsPrinted);
    assert_eq!(as_poly(&same), as_poly(&build_dth_order_operator(1, &lambda, &p)));
    for d in 2..=4 {
        let p = probabilities(d);
        let printed = recursion_operator(d, &lambda, &p, RecursionVariant::AsPrinted);
        assert_ne!(as_poly(&printed), as_poly(&build_dth_order_operator(d, &lambda, &p)), "d={d}");
    }
}

#[test]
fn one_dimensional_operator_coefficients() {
    // d_t^2 + d_t d_x + lambda d_t + lambda (1 - p_0) d_x.
    let op = build_dth_order_operator(1, &0.8, &[0.3, 0.7]);
    let want = [(vec![2, 0], 1.0), (vec![1, 1], 1.0), (vec![1, 0], 0.8), (vec![0, 1], 0.8 * 0.7)];
    for (e, c) in want {
        assert!((op.coeff(&e) - c).abs() < 1e-15, "{e:?}");
    }
    let nonzero = op.terms().values().filter(|c| c.abs() > 1e-15).count();
    assert_eq!(nonzero, 4);
}

fn order_band(table: &ConvergenceTable) {
    let orders = table.orders();
    assert_eq!(orders.len(), 3);
    for o in orders {
        assert!((1.8..=2.2).contains(&o), "{table:?}");
    }
}

#[test]
fn first_order_system_converges_at_second_order() {
    for (d, p, eval) in [
        (1, vec![0.5, 0.5], EvalBox { t: (0.8, 1.2), x: vec![(0.2, 0.6)], points: 5 }),
        (1, vec![0.3, 0.7], EvalBox { t: (0.8, 1.2), x: vec![(0.2, 0.6)], points: 5 }),
        (2, vec![0.2, 0.3, 0.5], EvalBox { t: (1.4, 1.6), x: vec![(0.35, 0.5), (0.35, 0.5)], points: 3 }),
    ] {
        let m = MotionModel::complete_canonical(d, p, 1.0).unwrap();
        let f = complete_terminal_evaluator(&m, 1e-16);
        let table = residual_system(&m, &f, &eval, &[0.04, 0.02, 0.01, 0.005]).unwrap();
        order_band(&table);
    }
}

#[test]
fn small_spacing_residual_is_small() {
    let m = MotionModel::complete_canonical(1, vec![0.5, 0.5], 1.0).unwrap();
    let f = complete_terminal_evaluator(&m, 1e-16);
    let eval = EvalBox { t: (0.8, 1.2), x: vec![(0.2, 0.6)], points: 5 };
    let table = residual_system(&m, &f, &eval, &[1e-3]).unwrap();
    assert!(table.rows[0].max_residual < 1e-5, "{table:?}");
}

#[test]
fn pure_transport_has_no_residual() {
    let m = MotionModel::complete_canonical(2, vec![0.2, 0.3, 0.5], 0.0).unwrap();
    let v = [[0.0, 0.0], [1.0, 0.0], [0.0, 1.0]];
    let f = |t: f64, x: &[f64]| -> finvel::Result<Vec<f64>> {
        Ok((0..3).map(|i| {
            let (a, b) = (x[0] - v[i][0] * t, x[1] - v[i][1] * t);
            1.0 + a * a + 0.5 * a * b - b
        }).collect())
    };
    let r = system_residual_at(&m, &f, 1.0, &[0.3, 0.3], 0.01).unwrap();
    assert!(r.iter().all(|v| v.abs() < 1e-12), "{r:?}");
}

#[test]
fn scalar_equation_converges_at_second_order() {
    for (d, p, eval, spacings) in [
        (1, vec![0.5, 0.5], EvalBox { t: (0.8, 1.2), x: vec![(0.2, 0.6)], points: 5 }, vec![0.04, 0.02, 0.01, 0.005]),
        (1, vec![0.3, 0.7], EvalBox { t: (0.8, 1.2), x: vec![(0.2, 0.6)], points: 5 }, vec![0.04, 0.02, 0.01, 0.005]),
        (
            2,
            vec![0.2, 0.3, 0.5],
            EvalBox { t: (1.9, 2.1), x: vec![(0.55, 0.7), (0.55, 0.7)], points: 3 },
            vec![0.04, 0.02, 0.01, 0.005],
        ),
    ] {
        let m = MotionModel::complete_canonical(d, p, 1.0).unwrap();
        let table = residual_dth_order(&m, &eval, &spacings, None).unwrap();
        order_band(&table);
    }
}

#[test]
fn perturbed_coefficient_does_not_converge() {
    let eval = EvalBox { t: (0.8, 1.2), x: vec![(0.2, 0.6)], points: 5 };
    let spacings = [0.04, 0.02, 0.01, 0.005];
    for (d, p, eval, idx) in [
        (1, vec![0.5, 0.5], eval.clone(), vec![1u32, 0]),
        (1, vec![0.3, 0.7], eval, vec![0, 1]),
        (2, vec![0.2, 0.3, 0.5], EvalBox { t: (1.9, 2.1), x: vec![(0.55, 0.7), (0.55, 0.7)], points: 3 }, vec![1, 1, 0]),
    ] {
        let m = MotionModel::complete_canonical(d, p, 1.0).unwrap();
        let exact = residual_dth_order(&m, &eval, &spacings, None).unwrap();
        let bad = residual_dth_order(&m, &eval, &spacings, Some((&idx, 1.01))).unwrap();
        let (e, b) = (exact.rows.last().unwrap().max_residual, bad.rows.last().unwrap().max_residual);
        assert!(b > 50.0 * e, "{bad:?}");
        let last = *bad.orders().last().unwrap();
        assert!(last.abs() < 0.5, "{bad:?}");
    }
}

#[test]
fn generic_function_is_not_a_solution() {
    let op = build_dth_order_operator(1, &1.0, &[0.5, 0.5]);
    let bump = |t: f64, x: &[f64]| -> finvel::Result<f64> { Ok((-(t - 1.0).powi(2) - (x[0] - 0.4).powi(2)).exp()) };
    let eval = EvalBox { t: (0.8, 1.2), x: vec![(0.2, 0.6)], points: 5 };
    let table = residual_operator(&op, &bump, &eval, &[0.04, 0.02, 0.01, 0.005]).unwrap();
    assert!(table.rows.last().unwrap().max_residual > 0.1, "{table:?}");
}

#[test]
fn boxes_too_close_to_the_boundary_are_refused() {
    let m = MotionModel::complete_canonical(1, vec![0.5, 0.5], 1.0).unwrap();
    let eval = EvalBox { t: (0.8, 1.2), x: vec![(0.01, 0.6)], points: 3 };
    let f = complete_terminal_evaluator(&m, 1e-16);
    assert!(matches!(
        residual_system(&m, &f, &eval, &[0.04]),
        Err(Error::BoundaryTooClose { .. })
    ));
}
