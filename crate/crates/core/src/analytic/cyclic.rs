use crate::analytic::master::face_point;
use crate::analytic::{DensityValue, FormulaTag};
use crate::error::{Error, Result};
use crate::geometry::{RegionClassification, RegionKind};
use crate::model::MotionModel;
use crate::special::bessel_tilde_power;
use crate::stochastic::KernelKind;

/// Inner density of a cyclic motion with exponential waits of rate `lambda_h`
/// on velocity `h`, restricted to the paths whose switch count `N(t)` satisfies
/// `N(t) + 1 = j (mod D+1)`: the last `j` velocities of the cycle (ending at
/// the current one) have one more displacement than the others.
pub fn cyclic_density(model: &MotionModel, t: f64, x: &[f64], j: usize, tol: f64) -> Result<DensityValue> {
    if model.kernel().kind() != KernelKind::Cyclic {
        return Err(Error::Unsupported("closed form needs a cyclic switching kernel".into()));
    }
    if !model.velocities().is_minimal() {
        return Err(Error::NotMinimal);
    }
    let nu = model.count();
    if j >= nu {
        return Err(Error::InvalidModel(format!("residue {j} must be below {nu}")));
    }
    let rates = model
        .exponential_rates()
        .ok_or_else(|| Error::Unsupported("closed form needs exponential waiting times".into()))?;
    let all: Vec<usize> = (0..nu).collect();
    let fp = face_point(model, t, x, &all)?;
    let occ = &fp.occupation;
    let p = model.kernel().initial();
    let idx = |i: isize| i.rem_euclid(nu as isize) as usize;
    let lt: Vec<f64> = rates.iter().zip(occ).map(|(l, o)| l * o).collect();
    let prod_lt: f64 = lt.iter().product();
    let series = bessel_tilde_power(j as u32, nu as u32, prod_lt, tol);
    let decay = (-lt.iter().sum::<f64>()).exp();
    let mut sum = 0.0;
    for k in 0..nu {
        let ki = k as isize;
        sum += if j == 0 {
            p[idx(ki + 1)] * (0..nu).filter(|&h| h != k).map(|h| rates[h]).product::<f64>()
        } else {
            let first = ki - j as isize + 1;
            let mid: f64 = (first..ki).map(|h| lt[idx(h)]).product();
            p[idx(first)] * occ[k] * mid
        };
    }
    let lead = if j == 0 { 1.0 } else { rates.iter().product::<f64>() };
    let value = decay * lead * sum * series.value / fp.jacobian;
    Ok(DensityValue {
        value,
        region: RegionClassification {
            kind: RegionKind::Inner,
            face: all,
            weights: occ.iter().map(|o| o / t).collect(),
        },
        tag: FormulaTag::CyclicBessel,
        measure_rows: fp.rows.clone(),
        terms: series.terms,
        remainder: decay * lead * sum * series.remainder / fp.jacobian,
    })
}

/// Sum of the residue pieces: the full inner density of the cyclic motion.
pub fn cyclic_density_total(model: &MotionModel, t: f64, x: &[f64], tol: f64) -> Result<DensityValue> {
    let mut out = cyclic_density(model, t, x, 0, tol)?;
    for j in 1..model.count() {
        let d = cyclic_density(model, t, x, j, tol)?;
        out.value += d.value;
        out.remainder += d.remainder;
        out.terms += d.terms;
    }
    Ok(out)
}
