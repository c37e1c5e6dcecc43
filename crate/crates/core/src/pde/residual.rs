use std::collections::BTreeMap;
use std::io::Write;

use rayon::prelude::*;

use crate::analytic::{complete_density, complete_terminal_densities, CompleteForm};
use crate::error::{Error, Result};
use crate::linalg;
use crate::model::{EventClock, MotionModel};
use crate::pde::operator::{build_dth_order_operator, OperatorPolynomial};
use crate::stochastic::KernelKind;

/// Grid of evaluation points in `(t, x)`: `points` per axis, endpoints included.
#[derive(Clone, Debug, PartialEq, serde::Serialize)]
pub struct EvalBox {
    pub t: (f64, f64),
    pub x: Vec<(f64, f64)>,
    pub points: usize,
}

impl EvalBox {
    fn axes(&self) -> Vec<(f64, f64)> {
        std::iter::once(self.t).chain(self.x.iter().copied()).collect()
    }

    /// All grid points as `(t, x_1, ..., x_D)`, first axis slowest.
    pub fn grid(&self) -> Vec<Vec<f64>> {
        let axes = self.axes();
        let coord = |(a, b): (f64, f64), i: usize| {
            if self.points <= 1 {
                0.5 * (a + b)
            } else {
                a + (b - a) * i as f64 / (self.points - 1) as f64
            }
        };
        let n = self.points.max(1);
        let mut out = vec![Vec::new()];
        for &ax in &axes {
            out = out
                .into_iter()
                .flat_map(|p| {
                    (0..n).map(move |i| {
                        let mut q = p.clone();
                        q.push(coord(ax, i));
                        q
                    })
                })
                .collect();
        }
        out
    }

    fn corners(&self) -> Vec<Vec<f64>> {
        let axes = self.axes();
        (0..(1usize << axes.len()))
            .map(|m| axes.iter().enumerate().map(|(i, &(a, b))| if m >> i & 1 == 1 { b } else { a }).collect())
            .collect()
    }
}

/// Central difference weights of accuracy order 2 for the `m`-th derivative, unit spacing.
fn stencil(m: u32) -> &'static [(i32, f64)] {
    match m {
        0 => &[(0, 1.0)],
        1 => &[(-1, -0.5), (1, 0.5)],
        2 => &[(-1, 1.0), (0, -2.0), (1, 1.0)],
        3 => &[(-2, -0.5), (-1, 1.0), (1, -1.0), (2, 0.5)],
        4 => &[(-2, 1.0), (-1, -4.0), (0, 6.0), (1, -4.0), (2, 1.0)],
        5 => &[(-3, -0.5), (-2, 2.0), (-1, -2.5), (1, 2.5), (2, -2.0), (3, 0.5)],
        _ => panic!("derivative order {m} not supported"),
    }
}

/// Widest stencil offset used for derivative orders up to `m`.
fn reach(m: u32) -> f64 {
    match m {
        0 => 0.0,
        1 | 2 => 1.0,
        3 | 4 => 2.0,
        _ => 3.0,
    }
}

/// Applies `op` to `f` at `z = (t, x)` by nested central differences with spacing `h`.
pub fn apply_operator<F>(op: &OperatorPolynomial<f64>, f: &F, z: &[f64], h: f64) -> Result<f64>
where
    F: Fn(f64, &[f64]) -> Result<f64>,
{
    let mut cache: BTreeMap<Vec<i32>, f64> = BTreeMap::new();
    let mut total = 0.0;
    for (idx, &c) in op.terms() {
        let mut pts: Vec<(Vec<i32>, f64)> = vec![(vec![0; z.len()], 1.0)];
        for (axis, &m) in idx.iter().enumerate() {
            let w = stencil(m);
            pts = pts
                .into_iter()
                .flat_map(|(off, wt)| {
                    w.iter().map(move |&(o, wo)| {
                        let mut off2 = off.clone();
                        off2[axis] += o;
                        (off2, wt * wo)
                    })
                })
                .collect();
        }
        let scale = h.powi(idx.iter().sum::<u32>() as i32);
        let mut s = 0.0;
        for (off, wt) in pts {
            let v = match cache.get(&off) {
                Some(&v) => v,
                None => {
                    let zt = z[0] + off[0] as f64 * h;
                    let zx: Vec<f64> = (1..z.len()).map(|i| z[i] + off[i] as f64 * h).collect();
                    let v = f(zt, &zx)?;
                    cache.insert(off, v);
                    v
                }
            };
            s += wt * v;
        }
        total += c * s / scale;
    }
    Ok(total)
}

/// Fails when the stencils at spacing `h` come within `2 * reach * h` (in
/// occupation time) of a face of the support.
fn check_margin(model: &MotionModel, eval: &EvalBox, h: f64, order: u32) -> Result<()> {
    let inv = linalg::inverse(&model.velocities().augmented()).ok_or(Error::NotMinimal)?;
    let row_norm = (0..inv.nrows()).map(|r| inv.row(r).iter().map(|v| v.abs()).sum::<f64>()).fold(0.0, f64::max);
    let mut distance = f64::INFINITY;
    for c in eval.corners() {
        for r in 0..inv.nrows() {
            let occ: f64 = (0..c.len()).map(|j| inv[(r, j)] * c[j]).sum();
            distance = distance.min(occ);
        }
    }
    let required = 2.0 * reach(order).max(1.0) * h * row_norm;
    if distance < required {
        return Err(Error::BoundaryTooClose { distance, required });
    }
    Ok(())
}

#[derive(Clone, Debug, PartialEq, serde::Serialize)]
pub struct ConvergenceRow {
    pub spacing: f64,
    pub max_residual: f64,
    /// Maximum per equation (one entry for a scalar equation).
    pub per_equation: Vec<f64>,
    /// `log2` of the residual ratio to the previous (coarser) row.
    pub observed_order: Option<f64>,
}

#[derive(Clone, Debug, PartialEq, serde::Serialize)]
pub struct ConvergenceTable {
    pub rows: Vec<ConvergenceRow>,
}

impl ConvergenceTable {
    pub fn orders(&self) -> Vec<f64> {
        self.rows.iter().filter_map(|r| r.observed_order).collect()
    }

    pub fn write_csv<W: Write>(&self, w: &mut W) -> std::io::Result<()> {
        writeln!(w, "spacing,max_residual,observed_order")?;
        for r in &self.rows {
            let o = r.observed_order.map(|v| format!("{v:.16e}")).unwrap_or_default();
            writeln!(w, "{:.16e},{:.16e},{o}", r.spacing, r.max_residual)?;
        }
        Ok(())
    }
}

/// Builds a table from per-spacing maxima, spacings in decreasing order.
pub fn convergence_table(spacings: &[f64], per_equation: Vec<Vec<f64>>) -> ConvergenceTable {
    let mut rows: Vec<ConvergenceRow> = Vec::new();
    for (&h, pe) in spacings.iter().zip(per_equation) {
        let max_residual = pe.iter().copied().fold(0.0, f64::max);
        let observed_order = rows.last().map(|prev| (prev.max_residual / max_residual).ln() / (prev.spacing / h).ln());
        rows.push(ConvergenceRow { spacing: h, max_residual, per_equation: pe, observed_order });
    }
    ConvergenceTable { rows }
}

/// Maximum of `|op f|` over the grid for each spacing.
pub fn residual_operator<F>(op: &OperatorPolynomial<f64>, f: &F, eval: &EvalBox, spacings: &[f64]) -> Result<ConvergenceTable>
where
    F: Fn(f64, &[f64]) -> Result<f64> + Sync,
{
    let grid = eval.grid();
    let mut maxima = Vec::new();
    for &h in spacings {
        let vals: Vec<f64> = grid.par_iter().map(|z| apply_operator(op, f, z, h).map(f64::abs)).collect::<Result<_>>()?;
        maxima.push(vec![vals.into_iter().fold(0.0, f64::max)]);
    }
    Ok(convergence_table(spacings, maxima))
}

fn constant_rate(model: &MotionModel) -> Result<f64> {
    if let EventClock::Poisson(r) = model.clock() {
        if let Some(l) = r.as_constant() {
            return Ok(l);
        }
    }
    model
        .common_rate()
        .ok_or_else(|| Error::Unsupported("residual checks need one homogeneous rate".into()))
}

/// Residuals of `d_t f_i + <grad f_i, v_i> + lambda f_i - lambda sum_j p_{j,i} f_j` at one point.
pub fn system_residual_at<F>(model: &MotionModel, f: &F, t: f64, x: &[f64], h: f64) -> Result<Vec<f64>>
where
    F: Fn(f64, &[f64]) -> Result<Vec<f64>>,
{
    let lambda = constant_rate(model)?;
    let n = model.count();
    let d = model.dim();
    let centre = f(t, x)?;
    let diff = |axis: usize| -> Result<Vec<f64>> {
        let (mut tp, mut tm) = (t, t);
        let (mut xp, mut xm) = (x.to_vec(), x.to_vec());
        if axis == 0 {
            tp += h;
            tm -= h;
        } else {
            xp[axis - 1] += h;
            xm[axis - 1] -= h;
        }
        let (a, b) = (f(tp, &xp)?, f(tm, &xm)?);
        Ok(a.iter().zip(&b).map(|(u, v)| (u - v) / (2.0 * h)).collect())
    };
    let dt = diff(0)?;
    let dx: Vec<Vec<f64>> = (1..=d).map(diff).collect::<Result<_>>()?;
    let v = model.velocities().matrix();
    let kernel = model.kernel();
    Ok((0..n)
        .map(|i| {
            let mut r = dt[i] + lambda * centre[i];
            for a in 0..d {
                r += v[(a, i)] * dx[a][i];
            }
            r - lambda * (0..n).map(|j| kernel.p(j, i) * centre[j]).sum::<f64>()
        })
        .collect())
}

/// Residuals of the first-order system for the densities `f(t, x) = (f_0, ..., f_M)`
/// jointly with the current velocity, for each spacing.
pub fn residual_system<F>(model: &MotionModel, f: &F, eval: &EvalBox, spacings: &[f64]) -> Result<ConvergenceTable>
where
    F: Fn(f64, &[f64]) -> Result<Vec<f64>> + Sync,
{
    if let Some(&h) = spacings.first() {
        check_margin(model, eval, h, 1)?;
    }
    let grid = eval.grid();
    let mut maxima = Vec::new();
    for &h in spacings {
        let vals: Vec<Vec<f64>> =
            grid.par_iter().map(|z| system_residual_at(model, f, z[0], &z[1..], h)).collect::<Result<_>>()?;
        let mut per = vec![0.0f64; model.count()];
        for r in vals {
            for (m, v) in per.iter_mut().zip(r) {
                *m = m.max(v.abs());
            }
        }
        maxima.push(per);
    }
    Ok(convergence_table(spacings, maxima))
}

/// Terminal densities of a complete motion as a residual-system input.
pub fn complete_terminal_evaluator(model: &MotionModel, tol: f64) -> impl Fn(f64, &[f64]) -> Result<Vec<f64>> + Sync + '_ {
    move |t, x| complete_terminal_densities(model, t, x, tol)
}

/// Residual of the scalar equation for the complete canonical motion, applied to
/// its inner density. `perturb` multiplies one coefficient (by multi-index) for
/// a negative control.
pub fn residual_dth_order(
    model: &MotionModel,
    eval: &EvalBox,
    spacings: &[f64],
    perturb: Option<(&[u32], f64)>,
) -> Result<ConvergenceTable> {
    if model.kernel().kind() != KernelKind::Complete || !model.velocities().is_canonical() {
        return Err(Error::Unsupported("the scalar equation is stated for complete canonical motions".into()));
    }
    let lambda = constant_rate(model)?;
    let d = model.dim();
    let mut op = build_dth_order_operator(d, &lambda, model.kernel().initial());
    if let Some((idx, factor)) = perturb {
        op = op.perturbed(idx, factor);
    }
    if let Some(&h) = spacings.first() {
        check_margin(model, eval, h, op.order())?;
    }
    let f = |t: f64, x: &[f64]| complete_density(model, t, x, CompleteForm::Series, 1e-16).map(|v| v.value);
    residual_operator(&op, &f, eval, spacings)
}
