//! Affine geometry of the velocity hull: dimension, coordinate projections,
//! lifting and barycentric classification of points of `Conv(v_0 t, ..., v_M t)`.

use itertools::Itertools;
use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::linalg;
use crate::polytope::{max_uniform_slack, Polytope};

/// Weights above this are strictly positive.
pub const POSITIVE_TOL: f64 = 1e-12;
/// Weights below this in absolute value are treated as exact zeros.
pub const ZERO_TOL: f64 = 1e-14;

/// The velocities `v_0..v_M` of a motion, stored as the columns of a D x (M+1) matrix.
#[derive(Clone, Debug, PartialEq)]
pub struct VelocitySet {
    v: DMatrix<f64>,
    labels: Option<Vec<String>>,
}

impl VelocitySet {
    /// Builds the set from a list of velocity vectors of equal length.
    pub fn new(velocities: &[Vec<f64>]) -> Result<Self> {
        let m1 = velocities.len();
        if m1 == 0 {
            return Err(Error::InvalidModel("empty velocity set".into()));
        }
        let d = velocities[0].len();
        if d == 0 {
            return Err(Error::InvalidModel("velocities must have at least one coordinate".into()));
        }
        if let Some(h) = velocities.iter().position(|v| v.len() != d) {
            return Err(Error::InvalidModel(format!(
                "velocity {h} has {} coordinates, expected {d}",
                velocities[h].len()
            )));
        }
        Self::from_matrix(DMatrix::from_fn(d, m1, |i, h| velocities[h][i]))
    }

    /// Builds the set from a D x (M+1) matrix whose columns are the velocities.
    pub fn from_matrix(v: DMatrix<f64>) -> Result<Self> {
        if v.ncols() == 0 || v.nrows() == 0 {
            return Err(Error::InvalidModel("empty velocity set".into()));
        }
        if v.iter().any(|x| !x.is_finite()) {
            return Err(Error::InvalidModel("velocities must be finite".into()));
        }
        for (a, b) in (0..v.ncols()).tuple_combinations() {
            if v.column(a) == v.column(b) {
                return Err(Error::InvalidModel(format!("velocities {a} and {b} coincide")));
            }
        }
        Ok(VelocitySet { v, labels: None })
    }

    /// The canonical velocities `0, e_1, ..., e_D`.
    pub fn canonical(d: usize) -> Self {
        let v = DMatrix::from_fn(d, d + 1, |i, h| if h == i + 1 { 1.0 } else { 0.0 });
        VelocitySet { v, labels: None }
    }

    pub fn with_labels(mut self, labels: Vec<String>) -> Result<Self> {
        if labels.len() != self.count() {
            return Err(Error::InvalidModel(format!(
                "{} labels for {} velocities",
                labels.len(),
                self.count()
            )));
        }
        self.labels = Some(labels);
        Ok(self)
    }

    pub fn labels(&self) -> Option<&[String]> {
        self.labels.as_deref()
    }

    /// Ambient dimension D.
    pub fn dim(&self) -> usize {
        self.v.nrows()
    }

    /// Number of velocities M+1.
    pub fn count(&self) -> usize {
        self.v.ncols()
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.v
    }

    pub fn velocity(&self, h: usize) -> DVector<f64> {
        self.v.column(h).into_owned()
    }

    /// The (D+1) x (M+1) matrix `[1^T; V]` mapping occupation times to `(t, X)`.
    pub fn augmented(&self) -> DMatrix<f64> {
        let (d, m1) = self.v.shape();
        DMatrix::from_fn(d + 1, m1, |i, h| if i == 0 { 1.0 } else { self.v[(i - 1, h)] })
    }

    /// Matrix of differences `[v_h - v_k]_{h != k}`.
    pub fn differences(&self, k: usize) -> DMatrix<f64> {
        let cols: Vec<usize> = (0..self.count()).filter(|&h| h != k).collect();
        DMatrix::from_fn(self.dim(), cols.len(), |i, c| self.v[(i, cols[c])] - self.v[(i, k)])
    }

    pub fn state_space_dim(&self) -> usize {
        if self.count() == 1 {
            return 0;
        }
        linalg::rank(&self.differences(0))
    }

    /// D+1 affinely independent velocities.
    pub fn is_minimal(&self) -> bool {
        self.count() == self.dim() + 1 && self.state_space_dim() == self.dim()
    }

    pub fn is_canonical(&self) -> bool {
        self.v == VelocitySet::canonical(self.dim()).v
    }

    /// Velocities with the given indices, in that order.
    pub fn subset(&self, indices: &[usize]) -> Result<Self> {
        if indices.is_empty() || indices.iter().any(|&h| h >= self.count()) {
            return Err(Error::InvalidModel(format!("bad velocity subset {indices:?}")));
        }
        let v = DMatrix::from_fn(self.dim(), indices.len(), |i, c| self.v[(i, indices[c])]);
        Self::from_matrix(v)
    }

    /// Keeps only the given coordinate rows.
    pub fn project_rows(&self, rows: &[usize]) -> DMatrix<f64> {
        DMatrix::from_fn(rows.len(), self.count(), |i, h| self.v[(rows[i], h)])
    }

    /// Largest absolute velocity coordinate, or 1 for the all-zero case.
    pub fn scale(&self) -> f64 {
        let s = self.v.amax();
        if s > 0.0 {
            s
        } else {
            1.0
        }
    }
}

/// Rank of `[v_h - v_0]`, the dimension of the velocity hull.
pub fn state_space_dim(vs: &VelocitySet) -> usize {
    vs.state_space_dim()
}

/// Coordinate projection `p_R` keeping the rows `I^R`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ProjectionMap {
    source_dim: usize,
    rows: Vec<usize>,
}

impl ProjectionMap {
    pub fn identity(d: usize) -> Self {
        ProjectionMap { source_dim: d, rows: (0..d).collect() }
    }

    pub fn source_dim(&self) -> usize {
        self.source_dim
    }

    pub fn target_dim(&self) -> usize {
        self.rows.len()
    }

    /// Kept coordinate indices (0-based, increasing).
    pub fn rows(&self) -> &[usize] {
        &self.rows
    }

    pub fn is_identity(&self) -> bool {
        self.rows.len() == self.source_dim
    }

    pub fn apply(&self, x: &[f64]) -> Vec<f64> {
        self.rows.iter().map(|&i| x[i]).collect()
    }

    /// R x D selection matrix.
    pub fn matrix(&self) -> DMatrix<f64> {
        DMatrix::from_fn(self.rows.len(), self.source_dim, |i, j| if self.rows[i] == j { 1.0 } else { 0.0 })
    }

    pub fn apply_to_set(&self, vs: &VelocitySet) -> Result<VelocitySet> {
        VelocitySet::from_matrix(vs.project_rows(&self.rows))
    }
}

/// First linearly independent rows of `[v_h - v_k]_{h != k}`.
pub fn projection_rows_for_pivot(vs: &VelocitySet, k: usize) -> Vec<usize> {
    linalg::independent_rows(&vs.differences(k))
}

/// Builds `p_R`. The row set is computed for every pivot and required to agree.
pub fn build_projection(vs: &VelocitySet) -> Result<ProjectionMap> {
    let r = vs.state_space_dim();
    if r == 0 {
        return Err(Error::DegenerateSet);
    }
    let rows = projection_rows_for_pivot(vs, 0);
    for k in 1..vs.count() {
        let other = projection_rows_for_pivot(vs, k);
        if other != rows {
            return Err(Error::InvalidModel(format!(
                "row selection depends on the pivot: {rows:?} with v_0, {other:?} with v_{k}"
            )));
        }
    }
    if rows.len() != r {
        return Err(Error::InvalidModel("ill-conditioned velocity differences".into()));
    }
    Ok(ProjectionMap { source_dim: vs.dim(), rows })
}

fn point_tol(x: &[f64]) -> f64 {
    1e-10 * (1.0 + x.iter().map(|v| v * v).sum::<f64>().sqrt())
}

/// Barycentric weights of `x / t` with the smallest support: subsets are tried by
/// increasing size and lexicographically, keeping only affinely independent ones.
pub fn minimal_support_weights(vs: &VelocitySet, x: &[f64], t: f64) -> Option<Vec<f64>> {
    let m1 = vs.count();
    if t <= 0.0 {
        return None;
    }
    let y: Vec<f64> = x.iter().map(|v| v / t).collect();
    let tol = point_tol(&y);
    let r = vs.state_space_dim();
    for size in 1..=(r + 1).min(m1) {
        for subset in (0..m1).combinations(size) {
            let sub = vs.subset(&subset).ok()?;
            if sub.state_space_dim() != size - 1 {
                continue;
            }
            let a = sub.augmented();
            let mut rhs = DVector::zeros(vs.dim() + 1);
            rhs[0] = 1.0;
            for i in 0..vs.dim() {
                rhs[i + 1] = y[i];
            }
            let w = linalg::least_squares(&a, &rhs);
            if w.iter().any(|&wi| wi < -POSITIVE_TOL) {
                continue;
            }
            let res = (&a * &w - &rhs).norm();
            if res > tol {
                continue;
            }
            let mut full = vec![0.0; m1];
            for (c, &h) in subset.iter().enumerate() {
                full[h] = w[c].max(0.0);
            }
            return Some(full);
        }
    }
    None
}

/// Restores the unique hull point `x` with `p_R(x) = x_R` (scaled by `t`).
pub fn lift_point(pm: &ProjectionMap, vs: &VelocitySet, x_r: &[f64], t: f64) -> Result<Vec<f64>> {
    if x_r.len() != pm.target_dim() {
        return Err(Error::InvalidModel("projected point has wrong dimension".into()));
    }
    if pm.is_identity() {
        return Ok(x_r.to_vec());
    }
    let projected = pm.apply_to_set(vs).map_err(|_| Error::DegenerateSet)?;
    let w = minimal_support_weights(&projected, x_r, t).ok_or(Error::OutsideHull)?;
    let x = vs.matrix() * DVector::from_vec(w) * t;
    Ok(x.iter().copied().collect())
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, serde::Serialize)]
pub enum RegionKind {
    Vertex,
    Face,
    Inner,
    Outside,
    BoundaryDegenerate,
}

impl RegionKind {
    pub fn as_str(&self) -> &'static str {
        match self {
            RegionKind::Vertex => "vertex",
            RegionKind::Face => "face",
            RegionKind::Inner => "inner",
            RegionKind::Outside => "outside",
            RegionKind::BoundaryDegenerate => "boundary-degenerate",
        }
    }
}

/// Where a point sits relative to the hull `Conv(v_0 t, ..., v_M t)`.
#[derive(Clone, Debug, PartialEq, serde::Serialize)]
pub struct RegionClassification {
    pub kind: RegionKind,
    /// Velocities spanning the face whose relative interior holds the point.
    pub face: Vec<usize>,
    /// Barycentric weights; empty when outside.
    pub weights: Vec<f64>,
}

impl RegionClassification {
    pub fn outside() -> Self {
        RegionClassification { kind: RegionKind::Outside, face: Vec::new(), weights: Vec::new() }
    }
}

/// Classifier for a minimal set, caching `[1^T; V]^{-1}`.
#[derive(Clone, Debug)]
pub struct MinimalClassifier {
    inv: DMatrix<f64>,
    n: usize,
}

impl MinimalClassifier {
    pub fn new(vs: &VelocitySet) -> Result<Self> {
        if !vs.is_minimal() {
            return Err(Error::NotMinimal);
        }
        let inv = linalg::inverse(&vs.augmented()).ok_or(Error::NotMinimal)?;
        Ok(MinimalClassifier { inv, n: vs.count() })
    }

    /// Barycentric weights of `x / t` (may be negative).
    pub fn weights(&self, x: &[f64], t: f64) -> Vec<f64> {
        let mut w = vec![0.0; self.n];
        for (h, wh) in w.iter_mut().enumerate() {
            let mut s = self.inv[(h, 0)];
            for (i, xi) in x.iter().enumerate() {
                s += self.inv[(h, i + 1)] * xi / t;
            }
            *wh = s;
        }
        w
    }

    pub fn classify(&self, x: &[f64], t: f64) -> RegionClassification {
        if t < 0.0 || x.iter().any(|v| !v.is_finite()) {
            return RegionClassification::outside();
        }
        if t == 0.0 {
            return classify_at_zero(self.n, x);
        }
        let mut w = self.weights(x, t);
        let mut degenerate = false;
        let mut face = Vec::new();
        for (h, wh) in w.iter_mut().enumerate() {
            if *wh < -POSITIVE_TOL {
                return RegionClassification::outside();
            }
            if *wh > POSITIVE_TOL {
                face.push(h);
            } else if wh.abs() <= ZERO_TOL {
                *wh = 0.0;
            } else {
                degenerate = true;
            }
        }
        let kind = if degenerate {
            RegionKind::BoundaryDegenerate
        } else if face.len() == self.n {
            RegionKind::Inner
        } else if face.len() == 1 {
            RegionKind::Vertex
        } else {
            RegionKind::Face
        };
        RegionClassification { kind, face, weights: w }
    }
}

fn classify_at_zero(n: usize, x: &[f64]) -> RegionClassification {
    if x.iter().all(|v| v.abs() <= 1e-12) {
        RegionClassification {
            kind: RegionKind::Vertex,
            face: (0..n).collect(),
            weights: vec![1.0 / n as f64; n],
        }
    } else {
        RegionClassification::outside()
    }
}

/// Chart of the affine hull of a velocity subset: coordinates
/// `(t, x^R, y)` with `y` the lift coordinates, mapped linearly to occupation times.
#[derive(Clone, Debug)]
pub struct AffineChart {
    indices: Vec<usize>,
    rows: Vec<usize>,
    fiber_dim: usize,
    velocities: DMatrix<f64>,
    inv: DMatrix<f64>,
    det: f64,
    tail_scale: f64,
    tail_rows: Vec<usize>,
}

impl AffineChart {
    pub fn new(vs: &VelocitySet, indices: &[usize]) -> Result<Self> {
        let sub = vs.subset(indices)?;
        let n = indices.len();
        let rows = if n == 1 {
            Vec::new()
        } else {
            match build_projection(&sub) {
                Ok(pm) => pm.rows().to_vec(),
                Err(Error::DegenerateSet) => Vec::new(),
                Err(e) => return Err(e),
            }
        };
        let r = rows.len();
        let fiber_dim = n - 1 - r;
        let mut a = DMatrix::zeros(n, n);
        for h in 0..n {
            a[(0, h)] = 1.0;
            for (i, &row) in rows.iter().enumerate() {
                a[(i + 1, h)] = sub.matrix()[(row, h)];
            }
        }
        let head = a.rows(0, r + 1).into_owned();
        let tail_rows = linalg::completing_unit_rows(&head);
        if tail_rows.len() != fiber_dim {
            return Err(Error::InvalidModel("could not complete the affine chart".into()));
        }
        let tail_scale = sub.scale();
        for (j, &e) in tail_rows.iter().enumerate() {
            a[(r + 1 + j, e)] = tail_scale;
        }
        let inv = linalg::inverse(&a).ok_or(Error::NotMinimal)?;
        let det = a.determinant().abs();
        Ok(AffineChart {
            indices: indices.to_vec(),
            rows,
            fiber_dim,
            velocities: sub.matrix().clone(),
            inv,
            det,
            tail_scale,
            tail_rows,
        })
    }

    pub fn indices(&self) -> &[usize] {
        &self.indices
    }

    /// Affine dimension of the subset hull.
    pub fn dim(&self) -> usize {
        self.rows.len()
    }

    /// Number of lift coordinates needed to make the subset minimal.
    pub fn fiber_dim(&self) -> usize {
        self.fiber_dim
    }

    pub fn rows(&self) -> &[usize] {
        &self.rows
    }

    /// `|det [1^T; V^R; U]|`, equal to `|det [v~_h - v~_k]|` of the lifted velocities.
    pub fn jacobian(&self) -> f64 {
        self.det
    }

    /// Lifted velocities: projected coordinates followed by the tail coordinates.
    pub fn lifted_velocities(&self) -> DMatrix<f64> {
        let n = self.indices.len();
        let r = self.rows.len();
        let mut out = DMatrix::zeros(r + self.fiber_dim, n);
        for h in 0..n {
            for (i, &row) in self.rows.iter().enumerate() {
                out[(i, h)] = self.velocities[(row, h)];
            }
            for (j, &e) in self.tail_rows.iter().enumerate() {
                if e == h {
                    out[(r + j, h)] = self.tail_scale;
                }
            }
        }
        out
    }

    /// Splits the occupation map into `T = base + B y` for a fixed `(t, x)`.
    /// Returns `None` when `x` is off the affine hull of the subset.
    pub fn occupation_affine(&self, t: f64, x: &[f64]) -> Option<(DVector<f64>, DMatrix<f64>)> {
        let n = self.indices.len();
        let r = self.rows.len();
        let mut head = DVector::zeros(r + 1);
        head[0] = t;
        for (i, &row) in self.rows.iter().enumerate() {
            head[i + 1] = x[row];
        }
        let base = self.inv.columns(0, r + 1) * head;
        let b = self.inv.columns(r + 1, self.fiber_dim).into_owned();
        let back = &self.velocities * &base;
        let scale = 1e-9 * (1.0 + t.abs() + x.iter().map(|v| v.abs()).fold(0.0, f64::max));
        if back.iter().zip(x).any(|(u, v)| (u - v).abs() > scale) {
            return None;
        }
        debug_assert_eq!(base.len(), n);
        Some((base, b))
    }

    /// Occupation times at lift coordinates `y`.
    pub fn occupation(&self, base: &DVector<f64>, b: &DMatrix<f64>, y: &[f64]) -> Vec<f64> {
        let mut out: Vec<f64> = base.iter().copied().collect();
        for (j, yj) in y.iter().enumerate() {
            for (h, o) in out.iter_mut().enumerate() {
                *o += b[(h, j)] * yj;
            }
        }
        out
    }

    /// Polytope `A_x` of lift coordinates with nonnegative occupation times.
    pub fn fiber(&self, t: f64, x: &[f64]) -> Option<(Polytope, DVector<f64>, DMatrix<f64>)> {
        let (base, b) = self.occupation_affine(t, x)?;
        let base_v: Vec<f64> = base.iter().copied().collect();
        let p = Polytope::new(&base_v, &b, 1e-12 * t.abs().max(1e-300));
        if p.is_empty() {
            return None;
        }
        Some((p, base, b))
    }

    /// Whether `x` lies in the relative interior of `Conv(v_S t)`.
    pub fn contains_relint(&self, t: f64, x: &[f64]) -> bool {
        if t <= 0.0 {
            return false;
        }
        let Some((base, b)) = self.occupation_affine(t, x) else {
            return false;
        };
        let base_v: Vec<f64> = base.iter().copied().collect();
        match max_uniform_slack(&base_v, &b, t) {
            Some(s) => s > POSITIVE_TOL * t,
            None => false,
        }
    }
}

/// Classifies `x` relative to `Conv(v_0 t, ..., v_M t)`.
///
/// For non-minimal sets the face is the largest velocity subset whose hull holds `x`
/// in its relative interior; the weights follow the minimal-support rule.
pub fn classify_point(vs: &VelocitySet, x: &[f64], t: f64) -> RegionClassification {
    if x.len() != vs.dim() {
        return RegionClassification::outside();
    }
    if vs.is_minimal() {
        return MinimalClassifier::new(vs).expect("minimal set").classify(x, t);
    }
    if t < 0.0 || x.iter().any(|v| !v.is_finite()) {
        return RegionClassification::outside();
    }
    if t == 0.0 {
        return classify_at_zero(vs.count(), x);
    }
    let Some(weights) = minimal_support_weights(vs, x, t) else {
        return RegionClassification::outside();
    };
    let m1 = vs.count();
    for size in (1..=m1).rev() {
        for subset in (0..m1).combinations(size) {
            let Ok(chart) = AffineChart::new(vs, &subset) else { continue };
            if chart.contains_relint(t, x) {
                let kind = if size == m1 {
                    RegionKind::Inner
                } else if size == 1 {
                    RegionKind::Vertex
                } else {
                    RegionKind::Face
                };
                return RegionClassification { kind, face: subset, weights };
            }
        }
    }
    RegionClassification { kind: RegionKind::BoundaryDegenerate, face: Vec::new(), weights }
}
