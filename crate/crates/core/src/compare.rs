//! Routing of density queries to the matching exact formula, and comparison of
//! Monte Carlo summaries with exact bin probabilities and face masses.

use itertools::Itertools;
use rayon::prelude::*;

use crate::analytic::{
    complete_density, cyclic_density_total, face_masses_complete, minimal_density, CompleteForm, DensityValue,
};
use crate::error::{Error, Result};
use crate::general_motion::{nonminimal_density, reduce_model};
use crate::geometry::{lift_point, MinimalClassifier, RegionKind};
use crate::model::{EventClock, MotionModel};
use crate::quadrature::gauss_legendre;
use crate::simulator::{GridSpec, MonteCarloSummary};
use crate::stats::binomial_z;
use crate::stochastic::KernelKind;

/// Law of `X(t)` at `x` by the most specific formula available: closed forms
/// for complete and cyclic motions at inner points, the count sum for other
/// minimal motions and on faces, fiber integration for non-minimal motions.
/// Motions spanning fewer than `D` dimensions are reduced first.
pub fn evaluate_density(
    model: &MotionModel,
    t: f64,
    x: &[f64],
    tol: f64,
    form: Option<CompleteForm>,
) -> Result<DensityValue> {
    if x.len() != model.dim() {
        return Err(Error::InvalidModel(format!("point has {} coordinates, motion has {}", x.len(), model.dim())));
    }
    let vs = model.velocities();
    if vs.state_space_dim() < vs.dim() {
        let (pm, reduced) = reduce_model(model)?;
        let xr = pm.apply(x);
        let back = lift_point(&pm, vs, &xr, t)?;
        let scale = 1.0 + x.iter().fold(0.0f64, |a, v| a.max(v.abs()));
        if back.iter().zip(x).any(|(a, b)| (a - b).abs() > 1e-9 * scale) {
            return Err(Error::OutsideSupport);
        }
        return evaluate_density(&reduced, t, &xr, tol, form);
    }
    if !vs.is_minimal() {
        return Ok(nonminimal_density(model, t, x, tol)?.total);
    }
    let region = MinimalClassifier::new(vs)?.classify(x, t);
    if region.kind == RegionKind::Inner && t > 0.0 {
        let kind = model.kernel().kind();
        if kind == KernelKind::Complete && model.common_rate().is_some() {
            return complete_density(model, t, x, form.unwrap_or(CompleteForm::Series), tol);
        }
        if kind == KernelKind::Cyclic && matches!(model.clock(), EventClock::Renewal(_)) && model.exponential_rates().is_some()
        {
            return cyclic_density_total(model, t, x, tol);
        }
    }
    minimal_density(model, t, x, tol)
}

/// Simplices spanned by affinely independent `(D+1)`-subsets of the velocities.
/// The density is smooth on each cell cut out by their boundaries.
fn chamber_simplices(model: &MotionModel) -> Result<Vec<MinimalClassifier>> {
    let vs = model.velocities();
    let d = vs.dim();
    let mut out = Vec::new();
    for s in (0..vs.count()).combinations(d + 1) {
        let sub = vs.subset(&s)?;
        if sub.is_minimal() {
            out.push(MinimalClassifier::new(&sub)?);
        }
    }
    Ok(out)
}

/// Whether a box lies inside the support and crosses no chamber wall, so that
/// the density is smooth on it.
fn regular_box(cells: &[MinimalClassifier], corners: &[Vec<f64>], t: f64) -> bool {
    let margin = 1e-12;
    let mut covered = false;
    for c in cells {
        let w: Vec<Vec<f64>> = corners.iter().map(|x| c.weights(x, t)).collect();
        let inside = w.iter().all(|wi| wi.iter().all(|&v| v > margin));
        let separated = (0..w[0].len()).any(|h| w.iter().all(|wi| wi[h] < -margin));
        if !inside && !separated {
            return false;
        }
        covered |= inside;
    }
    covered
}

/// Continuous-part density at `x`, zero off the support and on lower-dimensional pieces.
fn continuous_density(model: &MotionModel, t: f64, x: &[f64], tol: f64) -> Result<f64> {
    match evaluate_density(model, t, x, tol, None) {
        Ok(v) if v.region.kind == RegionKind::Inner || !model.velocities().is_minimal() => Ok(v.value),
        Ok(_) => Ok(0.0),
        Err(Error::OutsideSupport | Error::OutsideHull | Error::BoundaryTooClose { .. }) => Ok(0.0),
        Err(e) => Err(e),
    }
}

/// Integral of the continuous-part density over a box, tensor Gauss–Legendre with `nodes` per axis.
pub fn box_probability(model: &MotionModel, t: f64, lo: &[f64], hi: &[f64], nodes: usize, tol: f64) -> Result<f64> {
    let (z, w) = gauss_legendre(nodes);
    let d = lo.len();
    let half: Vec<f64> = (0..d).map(|i| 0.5 * (hi[i] - lo[i])).collect();
    let mut total = 0.0;
    for idx in (0..d).map(|_| 0..nodes).multi_cartesian_product() {
        let x: Vec<f64> = (0..d).map(|i| lo[i] + half[i] * (z[idx[i]] + 1.0)).collect();
        let wt: f64 = (0..d).map(|i| half[i] * w[idx[i]]).product();
        total += wt * continuous_density(model, t, &x, tol)?;
    }
    Ok(total)
}

#[derive(Clone, Debug, PartialEq, serde::Serialize)]
pub struct BinComparison {
    pub bin: usize,
    pub center: Vec<f64>,
    /// Inside the support with no chamber wall crossing it.
    pub interior: bool,
    pub observed: u64,
    pub expected_probability: f64,
    pub z: f64,
    pub within: bool,
}

#[derive(Clone, Debug, PartialEq, serde::Serialize)]
pub struct HistogramReport {
    pub replicas: u64,
    pub band: f64,
    pub bins: Vec<BinComparison>,
    pub interior_bins: usize,
    pub interior_within: usize,
    pub interior_fraction: f64,
}

/// Bin-by-bin comparison of a Monte Carlo histogram with exact bin probabilities.
pub fn compare_histogram(
    model: &MotionModel,
    summary: &MonteCarloSummary,
    nodes: usize,
    tol: f64,
    band: f64,
) -> Result<HistogramReport> {
    let grid: &GridSpec =
        summary.grid.as_ref().ok_or_else(|| Error::InvalidModel("the summary has no histogram grid".into()))?;
    let t = summary.horizon;
    let cells = if model.velocities().state_space_dim() == model.dim() { chamber_simplices(model)? } else { Vec::new() };
    let n = summary.replicas;
    let bins: Vec<BinComparison> = (0..grid.bin_count())
        .into_par_iter()
        .map(|i| {
            let (lo, hi) = grid.bin_bounds(i);
            let p = box_probability(model, t, &lo, &hi, nodes, tol)?;
            let observed = summary.histogram[i];
            let z = binomial_z(observed, n, p.clamp(0.0, 1.0));
            Ok(BinComparison {
                bin: i,
                center: grid.center(i),
                interior: !cells.is_empty() && regular_box(&cells, &grid.corners(i), t),
                observed,
                expected_probability: p,
                z,
                within: z.abs() <= band,
            })
        })
        .collect::<Result<_>>()?;
    let interior_bins = bins.iter().filter(|b| b.interior).count();
    let interior_within = bins.iter().filter(|b| b.interior && b.within).count();
    Ok(HistogramReport {
        replicas: n,
        band,
        interior_fraction: if interior_bins == 0 { 0.0 } else { interior_within as f64 / interior_bins as f64 },
        bins,
        interior_bins,
        interior_within,
    })
}

#[derive(Clone, Debug, PartialEq, serde::Serialize)]
pub struct MassComparison {
    /// Velocities used; the full set stands for the inner (continuous) part.
    pub index_set: Vec<usize>,
    pub observed: u64,
    pub frequency: f64,
    pub exact: f64,
    pub z: f64,
    pub within: bool,
}

/// Exact masses of every piece of the support of a complete motion against the
/// Monte Carlo counts, the inner part included.
pub fn compare_face_masses(model: &MotionModel, summary: &MonteCarloSummary, band: f64) -> Result<Vec<MassComparison>> {
    if !model.velocities().is_minimal() {
        return Err(Error::NotMinimal);
    }
    let n = model.count();
    let t = summary.horizon;
    let mut out = Vec::new();
    for size in 1..=n {
        for face in (0..n).combinations(size) {
            let exact = face_masses_complete(model, t, &face)?;
            let observed = if size == n { summary.continuous_total() } else { summary.face_count(&face) };
            let z = binomial_z(observed, summary.replicas, exact);
            out.push(MassComparison {
                index_set: face,
                observed,
                frequency: observed as f64 / summary.replicas as f64,
                exact,
                z,
                within: z.abs() <= band,
            });
        }
    }
    Ok(out)
}
