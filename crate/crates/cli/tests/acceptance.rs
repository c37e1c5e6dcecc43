//! Acceptance run: one line per criterion, nonzero exit if any fails.

#[path = "../../core/tests/common/mod.rs"]
mod common;

use std::path::{Path, PathBuf};
use std::process::Command;
use std::time::Instant;

use num_rational::BigRational;
use rand::Rng;

use common::{convolution_density, enumerated_allocation, open_displacement, positive_counts, rel_diff};
use finvel::analytic::{
    complete_density, exp_product_lhs, exp_product_rhs, face_masses_complete, identity_subset_power_sum,
    mass_partition, minimal_joint_density, subset_power_sum_rhs, CompleteForm,
};
use finvel::compare::{compare_face_masses, compare_histogram};
use finvel::general_motion::{nonminimal_density, ContributionMethod};
use finvel::pde::{
    build_dth_order_operator, complete_terminal_evaluator, conditional_equivalence, recursion_operator,
    residual_dth_order, residual_system, ConditionalConfig, ConvergenceTable, EvalBox, RecursionVariant,
};
use finvel::simulator::{mc_summary, GridSpec, McConfig};
use finvel::stochastic::{replica_rng, SwitchKernel, WaitingLaw, WaitingTimeModel};
use finvel::{EventClock, MotionModel, RateFunction, VelocitySet};

struct Verdict {
    pass: bool,
    detail: String,
}

fn verdict(pass: bool, detail: String) -> Verdict {
    Verdict { pass, detail }
}

fn mass_partition_check() -> Verdict {
    let start = Instant::now();
    let m = MotionModel::complete_canonical(2, vec![1.0 / 3.0; 3], 1.0).unwrap();
    let t = 1.0;
    let vertex = face_masses_complete(&m, t, &[0]).unwrap();
    let edge = face_masses_complete(&m, t, &[0, 1]).unwrap();
    let inner = face_masses_complete(&m, t, &[0, 1, 2]).unwrap();
    // A vertex is reached by never switching away: p_0 e^{-lambda t (1 - p_0)}.
    let exact_ok = (vertex - (-2.0f64 / 3.0).exp() / 3.0).abs() < 1e-15;
    // Printed six-digit values; the inner one is 5.0e-7 from the exact value.
    let printed_ok =
        (vertex - 0.171139).abs() < 5e-7 && (edge - 0.135409).abs() < 5e-7 && (inner - 0.080355).abs() < 1e-6;
    let total: f64 = mass_partition(m.kernel().initial(), t).iter().map(|(_, p)| p).sum();
    let sum_ok = (total - 1.0).abs() < 1e-9;
    let summary = mc_summary(&m, t, &McConfig::new(1_000_000, 101)).unwrap();
    let rows = compare_face_masses(&m, &summary, 3.0).unwrap();
    let worst = rows.iter().map(|r| r.z.abs()).fold(0.0, f64::max);
    let mc_ok = rows.iter().all(|r| r.within);
    let secs = start.elapsed().as_secs_f64();
    verdict(
        exact_ok && printed_ok && sum_ok && mc_ok && secs < 30.0,
        format!(
            "vertex {vertex:.7}, edge {edge:.7}, inner {inner:.7}, sum-1 {:.1e}, 1e6 MC max |z| {worst:.2} over {} pieces, {secs:.1}s",
            total - 1.0,
            rows.len()
        ),
    )
}

fn series_integral_check() -> Verdict {
    let start = Instant::now();
    let mut worst: f64 = 0.0;
    let mut n = 0;
    for d in 1..=3usize {
        for (j, lt) in [0.5, 1.0, 3.0].into_iter().enumerate() {
            let mut rng = replica_rng(202, (d * 10 + j) as u64);
            let raw: Vec<f64> = (0..=d).map(|_| rng.random_range(0.2..1.0)).collect();
            let s: f64 = raw.iter().sum();
            let p: Vec<f64> = raw.iter().map(|v| v / s).collect();
            let m = MotionModel::complete_canonical(d, p, lt).unwrap();
            for _ in 0..100 {
                let w: Vec<f64> = (0..=d).map(|_| rng.random_range(0.02..1.0)).collect();
                let sw: f64 = w.iter().sum();
                let x: Vec<f64> = w[1..].iter().map(|v| v / sw).collect();
                let a = complete_density(&m, 1.0, &x, CompleteForm::Series, 1e-15).unwrap().value;
                let b = complete_density(&m, 1.0, &x, CompleteForm::Integral, 1e-13).unwrap().value;
                worst = worst.max(rel_diff(a, b));
                n += 1;
            }
        }
    }
    let secs = start.elapsed().as_secs_f64();
    verdict(worst < 1e-9 && secs < 10.0, format!("{n} points, worst relative difference {worst:.2e}, {secs:.1}s"))
}

fn law_fns(law: &WaitingLaw) -> (Box<dyn Fn(f64) -> f64>, Box<dyn Fn(f64) -> f64>) {
    match *law {
        WaitingLaw::Exponential { rate } => {
            (Box::new(move |u: f64| rate * (-rate * u).exp()), Box::new(move |u: f64| (-rate * u).exp()))
        }
        WaitingLaw::Gamma { shape, rate } if shape == 2.0 => (
            Box::new(move |u: f64| rate * rate * u * (-rate * u).exp()),
            Box::new(move |u: f64| (1.0 + rate * u) * (-rate * u).exp()),
        ),
        _ => unreachable!(),
    }
}

/// `|det(v_1 - v_0, ..., v_D - v_0)|` for `D <= 2`.
fn volume(v: &[Vec<f64>]) -> f64 {
    match v[0].len() {
        1 => (v[1][0] - v[0][0]).abs(),
        _ => ((v[1][0] - v[0][0]) * (v[2][1] - v[0][1]) - (v[1][1] - v[0][1]) * (v[2][0] - v[0][0])).abs(),
    }
}

fn master_formula_check() -> Verdict {
    let start = Instant::now();
    let exp = |r: f64| WaitingLaw::Exponential { rate: r };
    let gam = |r: f64| WaitingLaw::Gamma { shape: 2.0, rate: r };
    let cases: Vec<(Vec<Vec<f64>>, Vec<f64>, Vec<Vec<f64>>, Vec<WaitingLaw>, Vec<f64>)> = vec![
        (vec![vec![0.0], vec![1.0]], vec![0.6, 0.4], vec![vec![0.3, 0.7], vec![0.8, 0.2]], vec![exp(1.5), exp(0.7)], vec![0.35, 0.65]),
        (vec![vec![-1.0], vec![2.0]], vec![0.5, 0.5], vec![vec![0.0, 1.0], vec![1.0, 0.0]], vec![gam(2.0), exp(1.0)], vec![0.8, 0.6]),
        (
            vec![vec![0.0, 0.0], vec![1.0, 0.0], vec![0.0, 1.0]],
            vec![0.2, 0.5, 0.3],
            vec![vec![0.1, 0.6, 0.3], vec![0.4, 0.2, 0.4], vec![0.5, 0.25, 0.25]],
            vec![exp(1.0), exp(2.0), exp(3.0)],
            vec![0.5, 0.3, 0.2],
        ),
        (
            vec![vec![0.0, 1.0], vec![1.0, 0.0], vec![-1.0, 0.0]],
            vec![1.0 / 3.0; 3],
            vec![vec![0.0, 0.5, 0.5], vec![0.7, 0.0, 0.3], vec![0.2, 0.8, 0.0]],
            vec![gam(3.0), exp(1.2), gam(1.5)],
            vec![0.4, 0.45, 0.35],
        ),
    ];
    let mut worst: f64 = 0.0;
    let mut checked = 0;
    for (v, initial, transition, laws, occ) in cases {
        let n = v.len();
        let t: f64 = occ.iter().sum();
        let x: Vec<f64> = (0..v[0].len()).map(|i| (0..n).map(|h| v[h][i] * occ[h]).sum()).collect();
        let model = MotionModel::new(
            VelocitySet::new(&v).unwrap(),
            SwitchKernel::general(initial.clone(), transition.clone()).unwrap(),
            EventClock::Renewal(WaitingTimeModel::new(laws.clone()).unwrap()),
        )
        .unwrap();
        for counts in positive_counts(n, 6) {
            for k in 0..n {
                let got = minimal_joint_density(&model, t, &x, &counts, k).unwrap().value;
                let mut want = enumerated_allocation(&initial, &transition, &counts, k) / volume(&v);
                for h in 0..n {
                    let (pdf, sf) = law_fns(&laws[h]);
                    want *= if h == k {
                        open_displacement(&*pdf, &*sf, counts[h] as usize - 1, occ[h], 24)
                    } else {
                        convolution_density(&*pdf, counts[h] as usize, occ[h], 24)
                    };
                }
                let e = if want == 0.0 { got.abs() } else { rel_diff(got, want) };
                worst = worst.max(e);
                checked += 1;
            }
        }
    }
    let secs = start.elapsed().as_secs_f64();
    verdict(
        worst < 1e-6 && secs < 300.0,
        format!("{checked} (counts, terminal) cases with total <= 6, worst relative error {worst:.2e}, {secs:.1}s"),
    )
}

fn identities_check() -> Verdict {
    let mut worst_power: f64 = 0.0;
    let mut worst_zero: f64 = 0.0;
    let mut worst_exp: f64 = 0.0;
    let mut zero_cases = 0;
    for i in 0..1000u64 {
        let mut rng = replica_rng(404, i);
        let h = rng.random_range(1..=6usize);
        let c: Vec<f64> = (0..h).map(|_| rng.random_range(0.05..2.0)).collect();
        let m = rng.random_range(1..=(h as u32 + 4));
        let lhs = identity_subset_power_sum(&c, m);
        let rhs = subset_power_sum_rhs(&c, m);
        if (m as usize) < h {
            zero_cases += 1;
            // Terms are at most (sum c)^m, and there are fewer than 2^H of them.
            let scale = (1u64 << h) as f64 * c.iter().sum::<f64>().powi(m as i32);
            worst_zero = worst_zero.max(lhs.abs() / scale);
        } else {
            worst_power = worst_power.max(rel_diff(lhs, rhs));
        }
        let beta = rng.random_range(-1.5..1.5);
        let (l, r) = (exp_product_lhs(&c, beta), exp_product_rhs(&c, beta));
        // Both sides vanish like beta^(H-1); the alternating side sums terms of size up to this.
        let scale = c.iter().product::<f64>() * (beta.abs() * c.iter().sum::<f64>()).exp();
        worst_exp = worst_exp.max((l - r).abs() / l.abs().max(scale));
    }
    verdict(
        worst_power < 1e-9 && worst_zero < 1e-9 && worst_exp < 1e-9 && zero_cases > 0,
        format!(
            "1000 instances: power sum {worst_power:.1e}, exact-zero cases ({zero_cases}) {worst_zero:.1e}, exponential product {worst_exp:.1e}"
        ),
    )
}

fn interior_fraction_check(model: &MotionModel, grid: GridSpec, seed: u64) -> (f64, usize, f64) {
    let summary = mc_summary(model, 1.0, &McConfig::new(1_000_000, seed).with_grid(grid)).unwrap();
    let report = compare_histogram(model, &summary, 4, 1e-13, 3.0).unwrap();
    let worst = report.bins.iter().filter(|b| b.interior).map(|b| b.z.abs()).fold(0.0, f64::max);
    (report.interior_fraction, report.interior_bins, worst)
}

fn cyclic_check() -> Verdict {
    let start = Instant::now();
    let line = MotionModel::cyclic(VelocitySet::new(&[vec![-1.0], vec![1.0]]).unwrap(), vec![0.4, 0.6], &[1.5, 2.5]).unwrap();
    let plane = MotionModel::cyclic(
        VelocitySet::new(&[vec![1.0, 0.0], vec![-0.5, 0.8], vec![-0.5, -0.8]]).unwrap(),
        vec![0.5, 0.3, 0.2],
        &[1.0, 2.0, 3.0],
    )
    .unwrap();
    let (f1, b1, z1) = interior_fraction_check(&line, GridSpec::new(vec![-1.0], vec![1.0], vec![100]).unwrap(), 505);
    let (f2, b2, z2) =
        interior_fraction_check(&plane, GridSpec::new(vec![-0.5, -0.8], vec![1.0, 0.8], vec![30, 30]).unwrap(), 506);
    let secs = start.elapsed().as_secs_f64();
    verdict(
        f1 >= 0.99 && f2 >= 0.99 && b1 > 0 && b2 > 0 && secs < 120.0,
        format!(
            "D=1: {:.1}% of {b1} interior bins within 3 sigma (max |z| {z1:.2}); D=2: {:.1}% of {b2} (max |z| {z2:.2}); {secs:.1}s",
            100.0 * f1,
            100.0 * f2
        ),
    )
}

fn orders(table: &ConvergenceTable) -> Vec<f64> {
    table.orders()
}

fn pde_check() -> Verdict {
    let spacings = [0.04, 0.02, 0.01, 0.005];
    let band = |t: &ConvergenceTable| orders(t).len() == 3 && orders(t).iter().all(|o| (1.8..=2.2).contains(o));
    let box1 = EvalBox { t: (0.8, 1.2), x: vec![(0.2, 0.6)], points: 5 };
    let m1 = MotionModel::complete_canonical(1, vec![0.3, 0.7], 1.0).unwrap();
    let m2 = MotionModel::complete_canonical(2, vec![0.2, 0.3, 0.5], 1.0).unwrap();
    let sys_box2 = EvalBox { t: (1.4, 1.6), x: vec![(0.35, 0.5), (0.35, 0.5)], points: 3 };
    let scalar_box2 = EvalBox { t: (1.9, 2.1), x: vec![(0.55, 0.7), (0.55, 0.7)], points: 3 };
    let s1 = residual_system(&m1, &complete_terminal_evaluator(&m1, 1e-16), &box1, &spacings).unwrap();
    let s2 = residual_system(&m2, &complete_terminal_evaluator(&m2, 1e-16), &sys_box2, &spacings).unwrap();
    let d1 = residual_dth_order(&m1, &box1, &spacings, None).unwrap();
    let d2 = residual_dth_order(&m2, &scalar_box2, &spacings, None).unwrap();
    let converges = [&s1, &s2, &d1, &d2].iter().all(|t| band(t));
    let n1 = residual_dth_order(&m1, &box1, &spacings, Some((&[1, 0], 1.01))).unwrap();
    let n2 = residual_dth_order(&m2, &scalar_box2, &spacings, Some((&[1, 1, 0], 1.01))).unwrap();
    let last = |t: &ConvergenceTable| *orders(t).last().unwrap();
    let stalls = |bad: &ConvergenceTable, good: &ConvergenceTable| {
        last(bad).abs() < 0.5 && bad.rows[3].max_residual > 50.0 * good.rows[3].max_residual
    };
    let control = stalls(&n1, &d1) && stalls(&n2, &d2);
    let mut exact = true;
    for d in 1..=4usize {
        for i in 0..3u64 {
            let mut rng = replica_rng(606, d as u64 * 10 + i);
            let raw: Vec<i64> = (0..=d).map(|_| rng.random_range(1..20)).collect();
            let s: i64 = raw.iter().sum();
            let p: Vec<BigRational> = raw.iter().map(|&r| BigRational::new(r.into(), s.into())).collect();
            let lambda = BigRational::new(rng.random_range(1..30i64).into(), rng.random_range(1..10i64).into());
            exact &= recursion_operator(d, &lambda, &p, RecursionVariant::Corrected) == build_dth_order_operator(d, &lambda, &p);
        }
    }
    let fmt = |t: &ConvergenceTable| orders(t).iter().map(|o| format!("{o:.3}")).collect::<Vec<_>>().join("/");
    verdict(
        converges && control && exact,
        format!(
            "system D=1 {} D=2 {}; scalar D=1 {} D=2 {}; perturbed last orders {:.2}, {:.2}; recursion exact for D<=4: {exact}",
            fmt(&s1),
            fmt(&s2),
            fmt(&d1),
            fmt(&d2),
            last(&n1),
            last(&n2)
        ),
    )
}

fn conditional_check() -> Verdict {
    let cfg = |seed| ConditionalConfig {
        replicas: 1_000_000,
        conditioned_samples: 100_000,
        scaled_samples: 100_000,
        seed,
        level: 0.001,
    };
    let mut pass = true;
    let mut parts = Vec::new();
    for (name, rate, seed) in [
        ("lambda=2", RateFunction::Constant(2.0), 707),
        ("lambda(s)=2s", RateFunction::PiecewiseLinear { times: vec![0.0, 1.0], values: vec![0.0, 2.0] }, 708),
    ] {
        let m = MotionModel::new(VelocitySet::canonical(2), SwitchKernel::complete_uniform(3), EventClock::Poisson(rate)).unwrap();
        let r = conditional_equivalence(&m, &[0, 1], 1.0, &cfg(seed)).unwrap();
        let big_lambda = if seed == 707 { 2.0 } else { 1.0 };
        let formula = (-big_lambda * (1.0 - 2.0 / 3.0f64)).exp() * 2.0 / 3.0;
        let ok = r.probability_pass && r.ks_pass && rel_diff(r.analytic_probability, formula) < 1e-13;
        pass &= ok;
        let ks = r.ks.iter().map(|k| format!("{:.4}", k.p_value)).collect::<Vec<_>>().join("/");
        parts.push(format!("{name}: P {:.6} vs MC {:.6} (z {:.2}), KS p {ks}", r.analytic_probability, r.mc_probability, r.z_score));
    }
    verdict(pass, parts.join("; "))
}

fn nonminimal_check() -> Verdict {
    let lambda = [1.0, 2.0, 3.0];
    let p = [0.5, 0.3, 0.2];
    let m = MotionModel::cyclic(VelocitySet::new(&[vec![0.0], vec![1.0], vec![-1.0]]).unwrap(), p.to_vec(), &lambda).unwrap();
    let t = 1.0;
    let mut worst: f64 = 0.0;
    let mut fiber_used = true;
    for i in 1..20 {
        let x = i as f64 / 20.0;
        let d = nonminimal_density(&m, t, &[x], 1e-12).unwrap();
        let get = |s: &[usize]| d.breakdown.iter().find(|c| c.subset == s).map(|c| c.value).unwrap_or(f64::NAN);
        let e01 = p[0] * lambda[0] * (-lambda[0] * (t - x)).exp() * (-lambda[1] * x).exp();
        let e12 = 0.5 * p[1] * lambda[1] * (-lambda[1] * (t + x) / 2.0).exp() * (-lambda[2] * (t - x) / 2.0).exp();
        worst = worst.max(rel_diff(get(&[0, 1]), e01)).max(rel_diff(get(&[1, 2]), e12));
        fiber_used &= d.breakdown.iter().any(|c| c.subset == [0, 1, 2] && c.method == ContributionMethod::Fiber);
    }
    let summary = mc_summary(
        &m,
        t,
        &McConfig::new(1_000_000, 808).with_grid(GridSpec::new(vec![-1.0], vec![1.0], vec![100]).unwrap()),
    )
    .unwrap();
    let report = compare_histogram(&m, &summary, 4, 1e-10, 3.0).unwrap();
    let within = report.bins.iter().filter(|b| b.within).count();
    let frac = within as f64 / report.bins.len() as f64;
    verdict(
        worst < 1e-12 && fiber_used && frac >= 0.99,
        format!(
            "closed edge terms worst relative error {worst:.1e}; {within} of {} bins within 3 sigma ({:.1}%)",
            report.bins.len(),
            100.0 * frac
        ),
    )
}

const CONFIGS: [(&str, &str, &str); 6] = [
    (
        "simulate",
        "--raw",
        r#"{"model":{"velocities":[[0,0],[1,0],[0,1]],"kernel":{"kind":"complete_uniform"},
            "clock":{"kind":"poisson","rate":{"kind":"constant","value":1.0}}},
            "query":{"t":1.0,"grid":{"bins":[10,10]}},"run":{"replicas":30000,"seed":9,"max_joint_total":4}}"#,
    ),
    (
        "density",
        "",
        r#"{"model":{"velocities":[[0,0],[1,0],[0,1]],"kernel":{"kind":"complete","p":[0.2,0.3,0.5]},
            "clock":{"kind":"poisson","rate":{"kind":"constant","value":1.5}}},
            "query":{"t":1.0,"grid":{"bins":[12,12]},"points":[[0.5,0.0],[0.0,0.0],[0.2,0.2]]}}"#,
    ),
    (
        "mass",
        "",
        r#"{"model":{"velocities":[[0,0],[1,0],[0,1]],"kernel":{"kind":"complete_uniform"},
            "clock":{"kind":"poisson","rate":{"kind":"piecewise_constant","breaks":[0,0.5],"values":[1,3]}}},
            "query":{"t":1.0}}"#,
    ),
    (
        "compare",
        "",
        r#"{"model":{"velocities":[[0],[1],[-1]],"kernel":{"kind":"cyclic","initial":[0.5,0.3,0.2]},
            "clock":{"kind":"renewal","laws":[{"law":"exponential","rate":1},{"law":"exponential","rate":2},{"law":"exponential","rate":3}]}},
            "query":{"t":1.0,"grid":{"bins":[20]}},"run":{"replicas":40000,"seed":5,"tol":1e-10},"compare":{"min_fraction":0.9}}"#,
    ),
    (
        "verify",
        "",
        r#"{"model":{"velocities":[[0],[1]],"kernel":{"kind":"complete","p":[0.3,0.7]},
            "clock":{"kind":"poisson","rate":{"kind":"constant","value":1.0}}},
            "query":{"t":1.0},"run":{"replicas":40000,"seed":6},
            "verify":{"identities":{"instances":200},
                      "pde":{"equation":"scalar","t_range":[0.8,1.2],"x_ranges":[[0.2,0.6]],"spacings":[0.04,0.02,0.01,0.005],
                             "negative_control":{"index":[1,0],"factor":1.01}},
                      "conditional":{"subset":[1],"conditioned_samples":5000,"scaled_samples":5000}}}"#,
    ),
    (
        "project",
        "",
        r#"{"model":{"velocities":[[0,0,0],[1,1,0],[2,0,1]],"kernel":{"kind":"complete_uniform"},
            "clock":{"kind":"poisson","rate":{"kind":"constant","value":1.0}}},
            "query":{"t":1.0,"points":[[1.0,0.5,0.25],[0.5,0.5,0.0],[3.0,0.0,0.0]]}}"#,
    ),
];

fn run_cli(cmd: &str, extra: &str, config: &Path, out: &Path, workers: usize) -> i32 {
    let mut c = Command::new(env!("CARGO_BIN_EXE_finvel"));
    c.arg(cmd).arg("--config").arg(config).arg("--out").arg(out).arg("--workers").arg(workers.to_string());
    if !extra.is_empty() {
        c.arg(extra);
    }
    c.output().expect("binary runs").status.code().unwrap_or(-1)
}

fn files(dir: &Path) -> Vec<(String, Vec<u8>)> {
    let mut v: Vec<(String, Vec<u8>)> = std::fs::read_dir(dir)
        .unwrap()
        .map(|e| {
            let e = e.unwrap();
            (e.file_name().to_string_lossy().into_owned(), std::fs::read(e.path()).unwrap())
        })
        .collect();
    v.sort();
    v
}

fn determinism_check() -> Verdict {
    let root: PathBuf = std::env::temp_dir().join(format!("finvel-acceptance-{}", std::process::id()));
    let _ = std::fs::remove_dir_all(&root);
    std::fs::create_dir_all(&root).unwrap();
    let mut problems = Vec::new();
    let mut artifacts = 0;
    for (cmd, extra, text) in CONFIGS {
        let config = root.join(format!("{cmd}.json"));
        std::fs::write(&config, text).unwrap();
        let runs: Vec<(i32, Vec<(String, Vec<u8>)>)> = [(1usize, "a"), (4, "b"), (4, "c")]
            .iter()
            .map(|&(w, tag)| {
                let out = root.join(format!("{cmd}-{tag}"));
                let code = run_cli(cmd, extra, &config, &out, w);
                (code, files(&out))
            })
            .collect();
        if runs[0].0 != 0 {
            problems.push(format!("{cmd} exited {}", runs[0].0));
        }
        if runs.iter().any(|r| r != &runs[0]) {
            problems.push(format!("{cmd} outputs differ across runs or worker counts"));
        }
        artifacts += runs[0].1.len();
        // Regenerate from the config embedded in the first CSV.
        if let Some((_, bytes)) = runs[0].1.iter().find(|(n, _)| n.ends_with(".csv")) {
            let first = String::from_utf8_lossy(bytes).lines().next().unwrap_or_default().to_string();
            let embedded = root.join(format!("{cmd}-embedded.json"));
            std::fs::write(&embedded, first.trim_start_matches("# config=")).unwrap();
            let out = root.join(format!("{cmd}-d"));
            run_cli(cmd, extra, &embedded, &out, 2);
            if files(&out) != runs[0].1 {
                problems.push(format!("{cmd} does not regenerate from its embedded config"));
            }
        }
    }
    let _ = std::fs::remove_dir_all(&root);
    let pass = problems.is_empty();
    verdict(
        pass,
        if pass {
            format!("{artifacts} artifacts from 6 subcommands identical across 1/4 workers, reruns and embedded-config replays")
        } else {
            problems.join("; ")
        },
    )
}

fn main() {
    let criteria: [(&str, fn() -> Verdict); 9] = [
        ("mass partition", mass_partition_check),
        ("series/integral consistency", series_integral_check),
        ("joint density vs brute force", master_formula_check),
        ("combinatorial identities", identities_check),
        ("cyclic density vs Monte Carlo", cyclic_check),
        ("PDE residuals", pde_check),
        ("conditional law on a velocity subset", conditional_check),
        ("non-minimal density", nonminimal_check),
        ("CLI determinism", determinism_check),
    ];
    let mut failed = 0;
    for (i, (name, f)) in criteria.iter().enumerate() {
        let v = f();
        if !v.pass {
            failed += 1;
        }
        println!("criterion {} [{}] {name}: {}", i + 1, if v.pass { "PASS" } else { "FAIL" }, v.detail);
    }
    println!("acceptance: {} of 9 criteria passed", 9 - failed);
    if failed > 0 {
        std::process::exit(1);
    }
}
