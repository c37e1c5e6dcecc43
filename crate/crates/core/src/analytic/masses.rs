use itertools::Itertools;

use crate::error::{Error, Result};
use crate::model::{EventClock, MotionModel};
use crate::special::binomial_u64;
use crate::stochastic::KernelKind;

/// Probability that a complete motion with switching law `p` and cumulative
/// rate `big_lambda` uses exactly the velocities in `face`:
/// `e^{-L} sum_{h in I} p_h e^{L p_h} prod_{j in I, j != h} (e^{L p_j} - 1)`.
pub fn face_mass_complete(p: &[f64], big_lambda: f64, face: &[usize]) -> f64 {
    let mut s = 0.0;
    for &h in face {
        let mut term = p[h] * (big_lambda * p[h]).exp();
        for &j in face {
            if j != h {
                term *= (big_lambda * p[j]).exp_m1();
            }
        }
        s += term;
    }
    (-big_lambda).exp() * s
}

/// Same probability by inclusion-exclusion over the subsets `S` of `face`:
/// `sum_S (-1)^{|I|-|S|} (sum_S p) e^{-L (1 - sum_S p)}`.
pub fn face_mass_alternating(p: &[f64], big_lambda: f64, face: &[usize]) -> f64 {
    let mut s = 0.0;
    for size in 1..=face.len() {
        let sign = if (face.len() - size).is_multiple_of(2) { 1.0 } else { -1.0 };
        for sub in face.iter().combinations(size) {
            let q: f64 = sub.iter().map(|&&h| p[h]).sum();
            s += sign * q * (-big_lambda * (1.0 - q)).exp();
        }
    }
    s
}

/// Mass of the inner part of the support: every velocity used.
pub fn inner_mass(p: &[f64], big_lambda: f64) -> f64 {
    let all: Vec<usize> = (0..p.len()).collect();
    face_mass_complete(p, big_lambda, &all)
}

/// Probability of using exactly `h + 1` velocities, from the alternating form
/// with binomial multiplicities.
pub fn mass_exactly_h_plus_1(p: &[f64], big_lambda: f64, h: usize) -> f64 {
    let n = p.len();
    let mut s = 0.0;
    for size in 1..=(h + 1) {
        let sign = if (h + 1 - size).is_multiple_of(2) { 1.0 } else { -1.0 };
        let mult = binomial_u64((n - size) as u64, (h + 1 - size) as u64) as f64;
        for sub in (0..n).combinations(size) {
            let q: f64 = sub.iter().map(|&i| p[i]).sum();
            s += sign * mult * q * (-big_lambda * (1.0 - q)).exp();
        }
    }
    s
}

/// Mass of the boundary of the support: some velocity never used.
/// Alternating sum over proper subsets of size `1..=D`.
pub fn border_mass(p: &[f64], big_lambda: f64) -> f64 {
    let n = p.len();
    let d = n - 1;
    let mut s = 0.0;
    for size in 1..=d {
        let sign = if (d - size).is_multiple_of(2) { 1.0 } else { -1.0 };
        for sub in (0..n).combinations(size) {
            let q: f64 = sub.iter().map(|&i| p[i]).sum();
            s += sign * q * (-big_lambda * (1.0 - q)).exp();
        }
    }
    s
}

/// Uniform switching law over `D+1` velocities: mass of one face with `H+1` velocities,
/// `(H+1)/(D+1) e^{-L D/(D+1)} (e^{L/(D+1)} - 1)^H`.
pub fn uniform_face_mass(d: usize, big_lambda: f64, h: usize) -> f64 {
    let n = (d + 1) as f64;
    (h + 1) as f64 / n * (-big_lambda * d as f64 / n).exp() * (big_lambda / n).exp_m1().powi(h as i32)
}

/// Every nonempty velocity subset with its mass, in lexicographic order by size.
pub fn mass_partition(p: &[f64], big_lambda: f64) -> Vec<(Vec<usize>, f64)> {
    let n = p.len();
    let mut out = Vec::new();
    for size in 1..=n {
        for face in (0..n).combinations(size) {
            let m = face_mass_complete(p, big_lambda, &face);
            out.push((face, m));
        }
    }
    out
}

/// `Lambda(t)` of the clock: the integrated rate for a Poisson clock, `lambda t`
/// for equal exponential waits.
pub fn model_cumulative_rate(model: &MotionModel, t: f64) -> Result<f64> {
    match model.clock() {
        EventClock::Poisson(r) => Ok(r.cumulative(t)),
        EventClock::Renewal(_) => model
            .common_rate()
            .map(|l| l * t)
            .ok_or_else(|| Error::Unsupported("masses need a Poisson clock or equal exponential waits".into())),
    }
}

/// Mass of the piece of the support where exactly the velocities in `face`
/// have been used, for a complete motion; valid for non-homogeneous rates too
/// since only `N(t) ~ Poisson(Lambda(t))` enters.
pub fn face_masses_complete(model: &MotionModel, t: f64, face: &[usize]) -> Result<f64> {
    if model.kernel().kind() != KernelKind::Complete {
        return Err(Error::Unsupported("mass formulas need a complete switching kernel".into()));
    }
    if face.is_empty() || face.iter().any(|&h| h >= model.count()) {
        return Err(Error::InvalidModel("face indices out of range".into()));
    }
    let big_lambda = model_cumulative_rate(model, t)?;
    Ok(face_mass_complete(model.kernel().initial(), big_lambda, face))
}
