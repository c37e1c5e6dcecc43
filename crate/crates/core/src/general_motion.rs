//! Reduction of motions whose velocities span fewer than `D` dimensions, lifting
//! of non-minimal motions to minimal ones, and densities of non-minimal motions
//! by integrating lifted densities over fibers.

use std::cell::RefCell;

use itertools::Itertools;
use nalgebra::DMatrix;

use crate::analytic::master::{count_sum, FacePoint};
use crate::analytic::{DensityValue, FormulaTag};
use crate::error::{Error, Result};
use crate::geometry::{build_projection, minimal_support_weights, AffineChart, ProjectionMap, RegionClassification,
    RegionKind, VelocitySet};
use crate::linalg;
use crate::model::MotionModel;

/// Largest number of velocities accepted by subset enumeration (`M <= 8`).
pub const MAX_VELOCITIES: usize = 9;

/// Projects a motion whose velocities span an `R < D` dimensional affine hull
/// onto `R` coordinates. Events about `X(t)` become events about the reduced
/// motion after dropping the other coordinates; `geometry::lift_point` restores them.
pub fn reduce_model(model: &MotionModel) -> Result<(ProjectionMap, MotionModel)> {
    let vs = model.velocities();
    if vs.state_space_dim() == vs.dim() {
        return Err(Error::AlreadyFullDim);
    }
    let pm = build_projection(vs)?;
    let reduced = model.with_velocities(pm.apply_to_set(vs)?)?;
    Ok((pm, reduced))
}

/// A non-minimal motion seen as the first `D` coordinates of a minimal motion in `R^M`.
#[derive(Clone, Debug)]
pub struct LiftedModel {
    original: MotionModel,
    lifted: MotionModel,
    tail_rows: Vec<usize>,
}

impl LiftedModel {
    pub fn original(&self) -> &MotionModel {
        &self.original
    }

    pub fn lifted(&self) -> &MotionModel {
        &self.lifted
    }

    /// Velocity indices `e` whose unit rows complete `[1^T; V]`; tail `j` of
    /// velocity `h` is nonzero only for `h = e_j`.
    pub fn tail_rows(&self) -> &[usize] {
        &self.tail_rows
    }

    pub fn dim(&self) -> usize {
        self.original.dim()
    }

    pub fn is_identity(&self) -> bool {
        self.tail_rows.is_empty()
    }

    /// `pi_D`: keeps the first `D` coordinates.
    pub fn truncate(&self, x: &[f64]) -> Vec<f64> {
        x[..self.dim()].to_vec()
    }
}

/// Appends `M - D` coordinates to every velocity so the lifted set is affinely
/// independent. The tails are multiples of unit rows completing `[1^T; V]` to
/// full rank, chosen in index order, scaled by the largest velocity component.
pub fn lift_model(model: &MotionModel) -> Result<LiftedModel> {
    let vs = model.velocities();
    let d = vs.dim();
    if vs.state_space_dim() != d {
        return Err(Error::InvalidModel("velocities do not span R^D; reduce the model first".into()));
    }
    if vs.is_minimal() {
        return Ok(LiftedModel { original: model.clone(), lifted: model.clone(), tail_rows: Vec::new() });
    }
    let tail_rows = linalg::completing_unit_rows(&vs.augmented());
    let m1 = vs.count();
    let scale = vs.scale();
    let mut v = DMatrix::zeros(d + tail_rows.len(), m1);
    v.rows_mut(0, d).copy_from(vs.matrix());
    for (j, &e) in tail_rows.iter().enumerate() {
        v[(d + j, e)] = scale;
    }
    let lifted_vs = VelocitySet::from_matrix(v)?;
    if !lifted_vs.is_minimal() {
        return Err(Error::InvalidModel("lift did not produce affinely independent velocities".into()));
    }
    let lifted = model.with_velocities(lifted_vs)?;
    Ok(LiftedModel { original: model.clone(), lifted, tail_rows })
}

/// How a subset contribution was evaluated.
#[derive(Clone, Copy, Debug, PartialEq, Eq, serde::Serialize)]
#[serde(rename_all = "lowercase")]
pub enum ContributionMethod {
    /// The subset is affinely independent: joint law summed over counts.
    Direct,
    /// The subset is not: lifted density integrated over the fiber.
    Fiber,
}

/// Contribution of the paths using exactly the velocities in `subset`.
#[derive(Clone, Debug, PartialEq, serde::Serialize)]
pub struct SubsetContribution {
    pub subset: Vec<usize>,
    /// Dimension of the hull of the subset; only `dim = D` terms enter the density.
    pub dim: usize,
    pub value: f64,
    pub method: ContributionMethod,
    pub remainder: f64,
}

/// Density of a general motion with its per-subset breakdown.
#[derive(Clone, Debug, PartialEq, serde::Serialize)]
pub struct NonMinimalDensity {
    pub total: DensityValue,
    pub breakdown: Vec<SubsetContribution>,
}

/// Density at `x` of a motion with any number of velocities. Every velocity
/// subset whose hull holds `x` in its relative interior contributes; subsets
/// spanning fewer than `R` dimensions (with `R` the hull dimension of all
/// velocities) carry singular parts and are reported but not added to the total.
pub fn nonminimal_density(model: &MotionModel, t: f64, x: &[f64], tol: f64) -> Result<NonMinimalDensity> {
    let vs = model.velocities();
    if vs.count() > MAX_VELOCITIES {
        return Err(Error::TooManyVelocities(vs.count()));
    }
    if x.len() != vs.dim() || !(t > 0.0) {
        return Err(Error::OutsideSupport);
    }
    let wm = model.waiting_model()?;
    let weights = minimal_support_weights(vs, x, t).ok_or(Error::OutsideSupport)?;
    let full = vs.state_space_dim();
    let m1 = vs.count();
    let mut breakdown = Vec::new();
    let mut total = 0.0;
    let mut remainder = 0.0;
    let mut terms = 0;
    let mut rows = Vec::new();
    let mut face = Vec::new();
    for size in 1..=m1 {
        for subset in (0..m1).combinations(size) {
            let Ok(chart) = AffineChart::new(vs, &subset) else { continue };
            if !chart.contains_relint(t, x) {
                continue;
            }
            let (value, rem, n, method) = subset_contribution(model, &wm, &chart, t, x, tol)?;
            let dim = if size == 1 { 0 } else { chart.dim() };
            if dim == full {
                total += value;
                remainder += rem;
                terms += n;
                if rows.is_empty() {
                    rows = chart.rows().to_vec();
                }
            }
            if subset.len() > face.len() {
                face = subset.clone();
            }
            breakdown.push(SubsetContribution { subset, dim, value, method, remainder: rem });
        }
    }
    let kind = if face.len() == m1 {
        RegionKind::Inner
    } else if face.len() == 1 {
        RegionKind::Vertex
    } else if face.is_empty() {
        RegionKind::BoundaryDegenerate
    } else {
        RegionKind::Face
    };
    Ok(NonMinimalDensity {
        total: DensityValue {
            value: total,
            region: RegionClassification { kind, face, weights },
            tag: FormulaTag::Total,
            measure_rows: rows,
            terms,
            remainder,
        },
        breakdown,
    })
}

fn subset_contribution(
    model: &MotionModel,
    wm: &crate::stochastic::WaitingTimeModel,
    chart: &AffineChart,
    t: f64,
    x: &[f64],
    tol: f64,
) -> Result<(f64, f64, usize, ContributionMethod)> {
    let subset = chart.indices();
    if chart.fiber_dim() == 0 {
        let (base, _) = chart.occupation_affine(t, x).ok_or(Error::OutsideSupport)?;
        let fp = FacePoint { occupation: base.iter().copied().collect(), jacobian: chart.jacobian(), rows: chart.rows().to_vec() };
        let (v, n, rem) = count_sum(wm, model.kernel(), subset, &fp, tol)?;
        return Ok((v, rem, n, ContributionMethod::Direct));
    }
    let (poly, base, b) = chart.fiber(t, x).ok_or(Error::OutsideSupport)?;
    let failure: RefCell<Option<Error>> = RefCell::new(None);
    let evals = RefCell::new(0usize);
    let f = |y: &[f64]| -> f64 {
        let occupation: Vec<f64> = chart.occupation(&base, &b, y).into_iter().map(|o| o.max(0.0)).collect();
        if occupation.contains(&0.0) {
            return 0.0;
        }
        let fp = FacePoint { occupation, jacobian: chart.jacobian(), rows: Vec::new() };
        match count_sum(wm, model.kernel(), subset, &fp, 0.1 * tol) {
            Ok((v, n, _)) => {
                *evals.borrow_mut() += n;
                v
            }
            Err(e) => {
                failure.borrow_mut().get_or_insert(e);
                0.0
            }
        }
    };
    let q = poly.integrate(&f, 0.0, tol);
    if let Some(e) = failure.into_inner() {
        return Err(e);
    }
    Ok((q.value, q.error, evals.into_inner(), ContributionMethod::Fiber))
}
