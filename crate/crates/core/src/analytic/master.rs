use crate::analytic::{DensityValue, FormulaTag};
use crate::error::{Error, Result};
use crate::geometry::{AffineChart, MinimalClassifier, RegionClassification, RegionKind, POSITIVE_TOL};
use crate::model::MotionModel;
use crate::stochastic::{SwitchKernel, WaitingTimeModel};

/// Occupation times on a face, the Jacobian of the face chart and the
/// coordinates carrying the face measure.
pub(crate) struct FacePoint {
    pub occupation: Vec<f64>,
    pub jacobian: f64,
    pub rows: Vec<usize>,
}

pub(crate) fn face_point(model: &MotionModel, t: f64, x: &[f64], face: &[usize]) -> Result<FacePoint> {
    let vs = model.velocities();
    let outside = || {
        if face.len() == vs.count() {
            Error::OutsideSupport
        } else {
            Error::OutsideFace(face.to_vec())
        }
    };
    if !(t > 0.0) || x.len() != vs.dim() || face.is_empty() {
        return Err(outside());
    }
    if face.windows(2).any(|w| w[0] >= w[1]) || face[face.len() - 1] >= vs.count() {
        return Err(Error::InvalidModel("face indices must be increasing and in range".into()));
    }
    let tol = POSITIVE_TOL * t;
    let fp = if vs.is_canonical() {
        // Velocities 0, e_1, ..., e_D: occupation times are read off the coordinates.
        let on_face = |i: usize| face.binary_search(&(i + 1)).is_ok();
        if (0..x.len()).any(|i| !on_face(i) && x[i].abs() > tol) {
            return Err(outside());
        }
        let sum: f64 = x.iter().sum();
        let occupation: Vec<f64> = face.iter().map(|&h| if h == 0 { t - sum } else { x[h - 1] }).collect();
        if face[0] != 0 && (sum - t).abs() > tol {
            return Err(outside());
        }
        let skip = usize::from(face[0] != 0);
        let rows = face.iter().skip(skip).filter(|&&h| h > 0).map(|&h| h - 1).collect();
        FacePoint { occupation, jacobian: 1.0, rows }
    } else {
        let chart = AffineChart::new(vs, face)?;
        if chart.fiber_dim() > 0 {
            return Err(Error::NotMinimal);
        }
        let (base, _) = chart.occupation_affine(t, x).ok_or_else(outside)?;
        FacePoint { occupation: base.iter().copied().collect(), jacobian: chart.jacobian(), rows: chart.rows().to_vec() }
    };
    if fp.occupation.iter().any(|&o| o <= tol) {
        return Err(outside());
    }
    Ok(fp)
}

/// The joint law on `face` at fixed counts: waiting-time densities of the
/// finished displacements, the counting probability of the open one, and the
/// allocation probability.
fn joint_value(
    wm: &WaitingTimeModel,
    kernel: &SwitchKernel,
    face: &[usize],
    fp: &FacePoint,
    counts: &[u32],
    k: usize,
) -> Result<f64> {
    let alloc = kernel.allocation_probability(counts, k)?;
    if alloc == 0.0 {
        return Ok(0.0);
    }
    let mut v = alloc / fp.jacobian;
    for (i, &h) in face.iter().enumerate() {
        let s = fp.occupation[i];
        if h == k {
            v *= wm.counting_tail(h, s, counts[h] as u64 - 1);
        } else {
            v *= wm.waiting_density(h, counts[h] as u64, s)?;
        }
    }
    Ok(v)
}

fn check_counts(counts: &[u32], n: usize, face: &[usize], k: usize) -> Result<()> {
    if counts.len() != n || k >= n {
        return Err(Error::InvalidModel("count vector does not match the model".into()));
    }
    if counts[k] == 0 || face.binary_search(&k).is_err() {
        return Err(Error::InconsistentCounts(k));
    }
    for h in 0..n {
        let on = face.binary_search(&h).is_ok();
        if on != (counts[h] > 0) {
            return Err(Error::InconsistentCounts(h));
        }
    }
    Ok(())
}

fn region(kind: RegionKind, face: &[usize], fp: &FacePoint, t: f64, n: usize) -> RegionClassification {
    let mut weights = vec![0.0; n];
    for (i, &h) in face.iter().enumerate() {
        weights[h] = fp.occupation[i] / t;
    }
    RegionClassification { kind, face: face.to_vec(), weights }
}

fn face_kind(size: usize, n: usize) -> RegionKind {
    if size == n {
        RegionKind::Inner
    } else if size == 1 {
        RegionKind::Vertex
    } else {
        RegionKind::Face
    }
}

/// Density of `(X(t), N_0(t), ..., N_D(t), V(t) = v_k)` at an inner point of a
/// minimal motion.
pub fn minimal_joint_density(model: &MotionModel, t: f64, x: &[f64], counts: &[u32], k: usize) -> Result<DensityValue> {
    let n = model.count();
    if !model.velocities().is_minimal() {
        return Err(Error::NotMinimal);
    }
    let all: Vec<usize> = (0..n).collect();
    check_counts(counts, n, &all, k)?;
    let wm = model.waiting_model()?;
    let fp = face_point(model, t, x, &all)?;
    let value = joint_value(&wm, model.kernel(), &all, &fp, counts, k)?;
    Ok(DensityValue {
        value,
        region: region(RegionKind::Inner, &all, &fp, t, n),
        tag: FormulaTag::MinimalJoint,
        measure_rows: fp.rows.clone(),
        terms: 1,
        remainder: 0.0,
    })
}

/// Same joint law for a point in the relative interior of the face spanned by
/// `face`, with counts zero off the face. The density refers to Lebesgue
/// measure in the coordinates `measure_rows`; on a vertex it is a mass.
pub fn face_density(
    model: &MotionModel,
    t: f64,
    x: &[f64],
    face: &[usize],
    counts: &[u32],
    k: usize,
) -> Result<DensityValue> {
    let n = model.count();
    if !model.velocities().is_minimal() {
        return Err(Error::NotMinimal);
    }
    check_counts(counts, n, face, k)?;
    let wm = model.waiting_model()?;
    let fp = face_point(model, t, x, face)?;
    let value = joint_value(&wm, model.kernel(), face, &fp, counts, k)?;
    let kind = face_kind(face.len(), n);
    let tag = match kind {
        RegionKind::Inner => FormulaTag::MinimalJoint,
        RegionKind::Vertex => FormulaTag::VertexMass,
        _ => FormulaTag::FaceJoint,
    };
    Ok(DensityValue {
        value,
        region: region(kind, face, &fp, t, n),
        tag,
        measure_rows: fp.rows.clone(),
        terms: 1,
        remainder: 0.0,
    })
}

const MAX_SHELLS: u32 = 400;

/// Sums the joint law over all count vectors positive on `face`, shell by shell
/// in the total count. Stops after three consecutive shells below `tol` relative
/// to the running sum; the remainder is the last shell, an estimate.
pub(crate) fn count_sum(
    wm: &WaitingTimeModel,
    kernel: &SwitchKernel,
    face: &[usize],
    fp: &FacePoint,
    tol: f64,
) -> Result<(f64, usize, f64)> {
    let m = face.len() as u32;
    let mut total = 0.0;
    let mut terms = 0;
    let mut small = 0;
    let mut last = 0.0;
    for (n, shell) in kernel.allocation_shells(face) {
        if n >= m {
            let mut s = 0.0;
            for (c, probs) in &shell {
                if c.contains(&0) {
                    continue;
                }
                for (i, &pk) in probs.iter().enumerate() {
                    if pk == 0.0 {
                        continue;
                    }
                    let mut v = pk / fp.jacobian;
                    for (j, &h) in face.iter().enumerate() {
                        v *= if j == i {
                            wm.counting_tail(h, fp.occupation[j], c[j] as u64 - 1)
                        } else {
                            wm.waiting_density(h, c[j] as u64, fp.occupation[j])?
                        };
                    }
                    s += v;
                    terms += 1;
                }
            }
            total += s;
            last = s;
            if s <= tol * total {
                small += 1;
            } else {
                small = 0;
            }
            if small >= 3 {
                break;
            }
        }
        if n >= MAX_SHELLS {
            break;
        }
    }
    Ok((total, terms, last))
}

/// Density on a face (or mass at a vertex) summed over all counts and terminal velocities.
pub fn face_density_total(model: &MotionModel, t: f64, x: &[f64], face: &[usize], tol: f64) -> Result<DensityValue> {
    let n = model.count();
    if !model.velocities().is_minimal() {
        return Err(Error::NotMinimal);
    }
    let wm = model.waiting_model()?;
    let fp = face_point(model, t, x, face)?;
    let (value, terms, remainder) = count_sum(&wm, model.kernel(), face, &fp, tol)?;
    Ok(DensityValue {
        value,
        region: region(face_kind(face.len(), n), face, &fp, t, n),
        tag: FormulaTag::CountSum,
        measure_rows: fp.rows.clone(),
        terms,
        remainder,
    })
}

/// Law of `X(t)` at `x` for any minimal motion with density-bearing waits:
/// the inner density, a face density, or a vertex mass depending on where `x` lies.
pub fn minimal_density(model: &MotionModel, t: f64, x: &[f64], tol: f64) -> Result<DensityValue> {
    let c = MinimalClassifier::new(model.velocities())?.classify(x, t);
    match c.kind {
        RegionKind::Outside => Err(Error::OutsideSupport),
        RegionKind::BoundaryDegenerate => {
            let d = c.weights.iter().filter(|w| w.abs() > 0.0).fold(f64::INFINITY, |a, w| a.min(w.abs()));
            Err(Error::BoundaryTooClose { distance: d * t, required: POSITIVE_TOL * t })
        }
        _ if t == 0.0 => Err(Error::OutsideSupport),
        _ => face_density_total(model, t, x, &c.face, tol),
    }
}
