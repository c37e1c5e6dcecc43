mod common;

use approx::assert_relative_eq;
use common::rel_diff;
use finvel::analytic::{cyclic_density_total, minimal_density};
use finvel::general_motion::*;
use finvel::quadrature::gauss_legendre;
use finvel::simulator::collect_endpoints;
use finvel::stats::{kolmogorov_critical, ks_two_sample};
use finvel::{Error, MotionModel, VelocitySet};

const LAMBDA: [f64; 3] = [1.0, 2.0, 3.0];
const P: [f64; 3] = [0.5, 0.3, 0.2];

fn example_model() -> MotionModel {
    let vs = VelocitySet::new(&[vec![0.0], vec![1.0], vec![-1.0]]).unwrap();
    MotionModel::cyclic(vs, P.to_vec(), &LAMBDA).unwrap()
}

fn contribution(d: &NonMinimalDensity, subset: &[usize]) -> Option<f64> {
    d.breakdown.iter().find(|c| c.subset == subset).map(|c| c.value)
}

#[test]
fn reduction_examples() {
    let collinear = VelocitySet::new(&[vec![0.0, 0.0], vec![1.0, 1.0], vec![2.0, 2.0]]).unwrap();
    let m = MotionModel::complete(collinear, vec![0.2, 0.3, 0.5], 1.0).unwrap();
    let (pm, reduced) = reduce_model(&m).unwrap();
    assert_eq!(pm.target_dim(), 1);
    let v: Vec<f64> = reduced.velocities().matrix().iter().copied().collect();
    assert_eq!(v, vec![0.0, 1.0, 2.0]);

    let planar = VelocitySet::new(&[vec![0.0, 0.0, 0.0], vec![1.0, 0.0, 0.0], vec![0.0, 1.0, 0.0]]).unwrap();
    let m = MotionModel::complete(planar, vec![0.2, 0.3, 0.5], 1.0).unwrap();
    let (pm, reduced) = reduce_model(&m).unwrap();
    assert_eq!(pm.rows(), &[0, 1]);
    assert!(reduced.velocities().is_canonical());

    let full = MotionModel::complete_canonical(2, vec![0.2, 0.3, 0.5], 1.0).unwrap();
    assert!(matches!(reduce_model(&full), Err(Error::AlreadyFullDim)));
}

#[test]
fn lift_of_the_three_velocity_line() {
    let lifted = lift_model(&example_model()).unwrap();
    let m = lifted.lifted().velocities().matrix().clone();
    assert_eq!(m.nrows(), 2);
    let cols: Vec<(f64, f64)> = (0..3).map(|h| (m[(0, h)], m[(1, h)])).collect();
    assert_eq!(cols, vec![(0.0, 1.0), (1.0, 0.0), (-1.0, 0.0)]);
    assert!(lifted.lifted().velocities().is_minimal());
    assert_eq!(lifted.truncate(&[0.3, 0.2]), vec![0.3]);

    let minimal = MotionModel::complete_canonical(2, vec![0.2, 0.3, 0.5], 1.0).unwrap();
    assert!(lift_model(&minimal).unwrap().is_identity());
}

#[test]
fn lift_is_affinely_independent_for_random_sets() {
    // A few sets with more velocities than dimensions.
    let sets = [
        vec![vec![0.0, 0.0], vec![1.0, 0.0], vec![0.0, 1.0], vec![1.0, 1.0]],
        vec![vec![0.3, -0.2], vec![-1.0, 0.5], vec![0.7, 0.9], vec![0.0, -1.0], vec![-0.4, -0.4]],
        vec![vec![1.0], vec![-2.0], vec![0.5], vec![3.0]],
    ];
    for v in sets {
        let n = v.len();
        let m = MotionModel::complete(VelocitySet::new(&v).unwrap(), vec![1.0 / n as f64; n], 1.0).unwrap();
        let lifted = lift_model(&m).unwrap();
        let lv = lifted.lifted().velocities();
        assert_eq!(lv.dim(), n - 1);
        assert_eq!(finvel::linalg::rank(&lv.augmented()), n);
        for h in 0..n {
            for i in 0..v[0].len() {
                assert_eq!(lv.matrix()[(i, h)], v[h][i]);
            }
        }
    }
}

#[test]
fn closed_edge_terms() {
    let m = example_model();
    let t = 1.0;
    for x in [0.1, 0.35, 0.6, 0.92] {
        let d = nonminimal_density(&m, t, &[x], 1e-12).unwrap();
        // Start with v_0, one switch to v_1, no further switch.
        let e01 = P[0] * LAMBDA[0] * (-LAMBDA[0] * (t - x)).exp() * (-LAMBDA[1] * x).exp();
        // Start with v_1, one switch to v_2; T_1 = (t+x)/2, T_2 = (t-x)/2, Jacobian 1/2.
        let e12 = 0.5 * P[1] * LAMBDA[1] * (-LAMBDA[1] * (t + x) / 2.0).exp() * (-LAMBDA[2] * (t - x) / 2.0).exp();
        assert_relative_eq!(contribution(&d, &[0, 1]).unwrap(), e01, max_relative = 1e-13);
        assert_relative_eq!(contribution(&d, &[1, 2]).unwrap(), e12, max_relative = 1e-13);
        assert!(contribution(&d, &[0, 2]).is_none());
        let all = d.breakdown.iter().find(|c| c.subset == [0, 1, 2]).unwrap();
        assert_eq!(all.method, ContributionMethod::Fiber);
    }
}

#[test]
fn fiber_term_matches_integrated_cyclic_closed_form() {
    let m = example_model();
    let lifted = lift_model(&m).unwrap();
    let (nodes, weights) = gauss_legendre(40);
    let t = 1.0;
    for x in [0.2f64, 0.5, -0.3] {
        let d = nonminimal_density(&m, t, &[x], 1e-12).unwrap();
        let fiber = contribution(&d, &[0, 1, 2]).unwrap();
        // y is the time spent with v_0; it ranges over [0, t - |x|].
        let top = t - x.abs();
        let mut oracle = 0.0;
        for (z, w) in nodes.iter().zip(&weights) {
            let y = 0.5 * top * (z + 1.0);
            oracle += 0.5 * top * w * cyclic_density_total(lifted.lifted(), t, &[x, y], 1e-15).unwrap().value;
        }
        assert!(rel_diff(fiber, oracle) < 1e-8, "x={x}: {fiber} vs {oracle}");
    }
}

#[test]
fn minimal_models_pass_through() {
    let m = MotionModel::complete_canonical(2, vec![0.2, 0.3, 0.5], 1.3).unwrap();
    let x = [0.3, 0.25];
    let d = nonminimal_density(&m, 1.0, &x, 1e-14).unwrap();
    let direct = minimal_density(&m, 1.0, &x, 1e-14).unwrap();
    assert_relative_eq!(d.total.value, direct.value, max_relative = 1e-12);
    assert_eq!(d.breakdown.len(), 1);
    assert_eq!(d.breakdown[0].method, ContributionMethod::Direct);
}

#[test]
fn example_density_is_normalized() {
    let m = example_model();
    let t = 1.0;
    let (nodes, weights) = gauss_legendre(24);
    let mut integral = 0.0;
    for (lo, hi) in [(-t, 0.0), (0.0, t)] {
        for (z, w) in nodes.iter().zip(&weights) {
            let x = lo + 0.5 * (hi - lo) * (z + 1.0);
            integral += 0.5 * (hi - lo) * w * nonminimal_density(&m, t, &[x], 1e-10).unwrap().total.value;
        }
    }
    let atoms: f64 = (0..3).map(|h| P[h] * (-LAMBDA[h] * t).exp()).sum();
    assert!((integral + atoms - 1.0).abs() < 1e-6, "{}", integral + atoms);
}

#[test]
fn lifted_motion_marginal_matches_original() {
    let m = example_model();
    let lifted = lift_model(&m).unwrap();
    let n = 100_000;
    let a: Vec<f64> = collect_endpoints(&m, 1.0, n, 11).unwrap().iter().map(|e| e.position[0]).collect();
    let b: Vec<f64> = collect_endpoints(lifted.lifted(), 1.0, n, 12)
        .unwrap()
        .iter()
        .map(|e| lifted.truncate(&e.position)[0])
        .collect();
    let r = ks_two_sample(&a, &b);
    assert!(r.statistic * r.effective_n.sqrt() < kolmogorov_critical(0.001), "{r:?}");
}

#[test]
fn too_many_velocities() {
    let v: Vec<Vec<f64>> = (0..10).map(|h| vec![h as f64]).collect();
    let m = MotionModel::complete(VelocitySet::new(&v).unwrap(), vec![0.1; 10], 1.0).unwrap();
    assert!(matches!(nonminimal_density(&m, 1.0, &[3.0], 1e-8), Err(Error::TooManyVelocities(10))));
}
