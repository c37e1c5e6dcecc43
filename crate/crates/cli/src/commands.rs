//! Subcommands. Each writes `<name>.csv` and `<name>.json` (plus companions) under the output directory.

use std::fs;
use std::path::{Path, PathBuf};

use itertools::Itertools;
use num_rational::BigRational;
use rand::Rng;
use rayon::prelude::*;
use serde_json::{json, Value};

use finvel::analytic::{
    complete_joint_counts_density, face_density_total, identity_exp_product, identity_subset_power_sum,
    minimal_joint_density, subset_power_sum_rhs, DensityValue,
};
use finvel::compare::{compare_face_masses, compare_histogram, evaluate_density, MassComparison};
use finvel::general_motion::{lift_model, reduce_model};
use finvel::geometry::classify_point;
use finvel::pde::{
    build_dth_order_operator, complete_terminal_evaluator, conditional_equivalence, recursion_operator,
    residual_dth_order, residual_system, ConditionalConfig, ConvergenceTable, EvalBox, RecursionVariant,
};
use finvel::simulator::{collect_endpoints, mc_summary, McConfig, MonteCarloSummary};
use finvel::stochastic::{replica_rng, KernelKind};
use finvel::{Error, MotionModel};

use crate::config::{ConfigError, Equation, ExperimentConfig};

/// How a command failed; maps to the process exit code.
#[derive(Debug)]
pub enum Failure {
    Config(ConfigError),
    Runtime(String),
    /// Checks ran but did not pass; the report has been written.
    Verification(Vec<String>),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        Failure::Runtime(e.to_string())
    }
}

impl From<ConfigError> for Failure {
    fn from(e: ConfigError) -> Self {
        Failure::Config(e)
    }
}

impl From<std::io::Error> for Failure {
    fn from(e: std::io::Error) -> Self {
        Failure::Runtime(format!("i/o: {e}"))
    }
}

impl From<csv::Error> for Failure {
    fn from(e: csv::Error) -> Self {
        Failure::Runtime(format!("csv: {e}"))
    }
}

pub type Outcome = Result<(), Failure>;

pub struct Context {
    pub cfg: ExperimentConfig,
    pub model: MotionModel,
    pub out: PathBuf,
    pub raw: bool,
}

fn num(v: f64) -> String {
    format!("{v:.16e}")
}

fn set(s: &[usize]) -> String {
    s.iter().map(|h| h.to_string()).join(" ")
}

impl Context {
    fn path(&self, name: &str) -> PathBuf {
        self.out.join(name)
    }

    /// CSV with the effective config on the first line.
    fn write_csv(&self, name: &str, header: &[String], rows: &[Vec<String>]) -> Outcome {
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record(header)?;
        for r in rows {
            w.write_record(r)?;
        }
        let body = w.into_inner().map_err(|e| Failure::Runtime(e.to_string()))?;
        self.write_with_header(name, &body)
    }

    fn write_with_header(&self, name: &str, body: &[u8]) -> Outcome {
        let mut bytes = format!("# config={}\n", self.cfg.header()).into_bytes();
        bytes.extend_from_slice(body);
        fs::write(self.path(name), bytes)?;
        Ok(())
    }

    fn write_json(&self, name: &str, mut v: Value) -> Outcome {
        let cfg: Value = serde_json::from_str(&self.cfg.header()).expect("header is JSON");
        v["config"] = cfg;
        let mut text = serde_json::to_string_pretty(&v).expect("serializable");
        text.push('\n');
        fs::write(self.path(name), text)?;
        Ok(())
    }

    fn coords(&self) -> Vec<String> {
        (1..=self.model.dim()).map(|i| format!("x{i}")).collect()
    }

    fn t(&self) -> f64 {
        self.cfg.query.t
    }

    fn mc_config(&self) -> Result<McConfig, Failure> {
        let mut mc = McConfig::new(self.cfg.run.replicas, self.cfg.run.seed).with_joint(self.cfg.run.max_joint_total);
        if let Some(g) = self.cfg.grid(&self.model)? {
            mc = mc.with_grid(g);
        }
        Ok(mc)
    }

    /// Masses are available for complete motions with minimal velocity sets.
    fn masses_available(&self) -> bool {
        self.model.kernel().kind() == KernelKind::Complete && self.model.velocities().is_minimal()
    }
}

fn mass_rows(rows: &[MassComparison]) -> Vec<Vec<String>> {
    rows.iter()
        .map(|m| {
            vec![
                set(&m.index_set),
                m.observed.to_string(),
                num(m.frequency),
                num(m.exact),
                num(m.z),
                m.within.to_string(),
            ]
        })
        .collect()
}

fn mass_header() -> Vec<String> {
    ["index_set", "observed", "frequency", "exact", "z", "within"].map(String::from).to_vec()
}

pub fn simulate(ctx: &Context) -> Outcome {
    let t = ctx.t();
    let summary = mc_summary(&ctx.model, t, &ctx.mc_config()?)?;
    let mut body = Vec::new();
    summary.write_csv(&mut body, ctx.model.dim())?;
    ctx.write_with_header("simulate.csv", &body)?;
    let mut report = summary.to_json(json!({"model": ctx.model.describe()}));
    if ctx.masses_available() {
        let masses = compare_face_masses(&ctx.model, &summary, 3.0)?;
        ctx.write_csv("simulate_masses.csv", &mass_header(), &mass_rows(&masses))?;
        report["masses"] = serde_json::to_value(&masses).expect("serializable");
    }
    ctx.write_json("simulate.json", report)?;
    if ctx.raw {
        write_raw(ctx)?;
    }
    Ok(())
}

/// One row per replica: terminal velocity, counts, occupation times, position.
fn write_raw(ctx: &Context) -> Outcome {
    let n = ctx.model.count();
    let ends = collect_endpoints(&ctx.model, ctx.t(), ctx.cfg.run.replicas, ctx.cfg.run.seed)?;
    let mut header = vec!["replica".to_string(), "terminal".to_string(), "switches".to_string()];
    header.extend((0..n).map(|h| format!("n{h}")));
    header.extend((0..n).map(|h| format!("t{h}")));
    header.extend(ctx.coords());
    let rows: Vec<Vec<String>> = ends
        .iter()
        .enumerate()
        .map(|(i, e)| {
            let mut r = vec![i.to_string(), e.terminal.to_string(), e.switches.to_string()];
            r.extend(e.counts.iter().map(|c| c.to_string()));
            r.extend(e.occupation.iter().map(|&o| num(o)));
            r.extend(e.position.iter().map(|&x| num(x)));
            r
        })
        .collect();
    ctx.write_csv("endpoints.csv", &header, &rows)
}

/// Query points: the configured list, then the grid centres.
fn query_points(ctx: &Context) -> Result<Vec<Vec<f64>>, Failure> {
    let mut pts = ctx.cfg.query.points.clone();
    if let Some(g) = ctx.cfg.grid(&ctx.model)? {
        pts.extend((0..g.bin_count()).map(|i| g.center(i)));
    }
    if pts.is_empty() {
        return Err(Failure::Config(ConfigError::new("query.points", "density needs points or a grid")));
    }
    Ok(pts)
}

fn point_density(ctx: &Context, x: &[f64]) -> finvel::Result<DensityValue> {
    let q = &ctx.cfg.query;
    let (m, t, tol) = (&ctx.model, q.t, ctx.cfg.run.tol);
    if let Some(counts) = &q.counts {
        if m.kernel().kind() == KernelKind::Complete && m.common_rate().is_some() {
            return complete_joint_counts_density(m, t, x, counts, q.terminal);
        }
        let terminals: Vec<usize> = match q.terminal {
            Some(k) => vec![k],
            None => (0..m.count()).filter(|&k| counts[k] > 0).collect(),
        };
        let mut out: Option<DensityValue> = None;
        for k in terminals {
            let d = minimal_joint_density(m, t, x, counts, k)?;
            match &mut out {
                Some(o) => o.value += d.value,
                None => out = Some(d),
            }
        }
        return out.ok_or(Error::InconsistentCounts(0));
    }
    if let Some(face) = &q.face {
        return face_density_total(m, t, x, face, tol);
    }
    evaluate_density(m, t, x, tol, q.form)
}

pub fn density(ctx: &Context) -> Outcome {
    let pts = query_points(ctx)?;
    let results: Vec<finvel::Result<DensityValue>> = pts.par_iter().map(|x| point_density(ctx, x)).collect();
    let mut header = ctx.coords();
    header.extend(["value", "region", "face", "formula", "terms", "remainder", "note"].map(String::from));
    let mut rows = Vec::new();
    let mut max_remainder: f64 = 0.0;
    let mut notes = 0usize;
    for (x, r) in pts.iter().zip(results) {
        let mut row: Vec<String> = x.iter().map(|&v| num(v)).collect();
        match r {
            Ok(d) => {
                max_remainder = max_remainder.max(d.remainder);
                row.extend([
                    num(d.value),
                    d.region.kind.as_str().to_string(),
                    set(&d.region.face),
                    d.tag.as_str().to_string(),
                    d.terms.to_string(),
                    num(d.remainder),
                    String::new(),
                ]);
            }
            Err(Error::OutsideSupport | Error::OutsideFace(_) | Error::OutsideHull) => {
                row.extend([num(0.0), "outside".into(), String::new(), String::new(), "0".into(), num(0.0), String::new()]);
            }
            Err(e @ (Error::BoundaryTooClose { .. } | Error::InconsistentCounts(_))) => {
                notes += 1;
                let c = classify_point(ctx.model.velocities(), x, ctx.t());
                row.extend([
                    String::new(),
                    c.kind.as_str().to_string(),
                    set(&c.face),
                    String::new(),
                    String::new(),
                    String::new(),
                    e.to_string(),
                ]);
            }
            Err(e) => return Err(e.into()),
        }
        rows.push(row);
    }
    ctx.write_csv("density.csv", &header, &rows)?;
    ctx.write_json(
        "density.json",
        json!({"model": ctx.model.describe(), "points": pts.len(), "max_remainder": max_remainder, "unevaluated": notes}),
    )
}

pub fn mass(ctx: &Context) -> Outcome {
    if ctx.model.kernel().kind() != KernelKind::Complete {
        return Err(Failure::Runtime("mass formulas need a complete switching kernel".into()));
    }
    let n = ctx.model.count();
    let faces: Vec<Vec<usize>> = match &ctx.cfg.query.face {
        Some(f) => vec![f.clone()],
        None => (1..=n).flat_map(|k| (0..n).combinations(k)).collect(),
    };
    let mut rows = Vec::new();
    let mut entries = Vec::new();
    let mut total = 0.0;
    for f in faces {
        let m = finvel::analytic::face_masses_complete(&ctx.model, ctx.t(), &f)?;
        total += m;
        let region = match f.len() {
            1 => "vertex",
            k if k == n => "inner",
            _ => "face",
        };
        rows.push(vec![set(&f), region.to_string(), num(m)]);
        entries.push(json!({"index_set": f, "region": region, "mass": m}));
    }
    ctx.write_csv("mass.csv", &["index_set", "region", "mass"].map(String::from), &rows)?;
    ctx.write_json("mass.json", json!({"model": ctx.model.describe(), "masses": entries, "total": total}))
}

pub fn compare(ctx: &Context) -> Outcome {
    let cc = ctx.cfg.compare.clone().unwrap_or_default();
    let mc = ctx.mc_config()?;
    if mc.grid.is_none() {
        return Err(Failure::Config(ConfigError::new("query.grid", "compare needs a histogram grid")));
    }
    if ctx.model.velocities().state_space_dim() != ctx.model.dim() {
        return Err(Failure::Runtime("histogram comparison needs velocities spanning R^D".into()));
    }
    let summary: MonteCarloSummary = mc_summary(&ctx.model, ctx.t(), &mc)?;
    let report = compare_histogram(&ctx.model, &summary, cc.nodes, ctx.cfg.run.tol, cc.band)?;
    let mut header = vec!["bin".to_string()];
    header.extend(ctx.coords());
    header.extend(["interior", "observed", "expected_probability", "z", "within"].map(String::from));
    let rows: Vec<Vec<String>> = report
        .bins
        .iter()
        .map(|b| {
            let mut r = vec![b.bin.to_string()];
            r.extend(b.center.iter().map(|&c| num(c)));
            r.extend([b.interior.to_string(), b.observed.to_string(), num(b.expected_probability), num(b.z), b.within.to_string()]);
            r
        })
        .collect();
    ctx.write_csv("compare.csv", &header, &rows)?;
    let mut failures = Vec::new();
    if report.interior_fraction < cc.min_fraction {
        failures.push(format!(
            "{} of {} interior bins within {} sigma ({:.4} < {})",
            report.interior_within, report.interior_bins, cc.band, report.interior_fraction, cc.min_fraction
        ));
    }
    let mut out = json!({
        "model": ctx.model.describe(),
        "replicas": report.replicas,
        "band": cc.band,
        "interior_bins": report.interior_bins,
        "interior_within": report.interior_within,
        "interior_fraction": report.interior_fraction,
        "min_fraction": cc.min_fraction,
        "out_of_grid": summary.out_of_grid,
        "boundary_degenerate": summary.boundary_degenerate,
    });
    if ctx.masses_available() {
        let masses = compare_face_masses(&ctx.model, &summary, cc.band)?;
        for m in masses.iter().filter(|m| !m.within) {
            failures.push(format!("mass of {{{}}}: z = {:.3}", set(&m.index_set), m.z));
        }
        ctx.write_csv("compare_masses.csv", &mass_header(), &mass_rows(&masses))?;
        out["masses"] = serde_json::to_value(&masses).expect("serializable");
    }
    out["pass"] = json!(failures.is_empty());
    out["failures"] = json!(failures);
    ctx.write_json("compare.json", out)?;
    if failures.is_empty() {
        Ok(())
    } else {
        Err(Failure::Verification(failures))
    }
}

fn rational(v: f64) -> Result<BigRational, Failure> {
    BigRational::from_float(v).ok_or_else(|| Failure::Runtime(format!("{v} has no exact rational form")))
}

fn table_rows(label: &str, table: &ConvergenceTable) -> Vec<Vec<String>> {
    table
        .rows
        .iter()
        .map(|r| {
            vec![
                label.to_string(),
                num(r.spacing),
                num(r.max_residual),
                r.observed_order.map(num).unwrap_or_default(),
            ]
        })
        .collect()
}

pub fn verify(ctx: &Context) -> Outcome {
    let Some(v) = ctx.cfg.verify.clone() else {
        return Err(Failure::Config(ConfigError::new("verify", "verify needs at least one check")));
    };
    if v.identities.is_none() && v.pde.is_none() && v.conditional.is_none() {
        return Err(Failure::Config(ConfigError::new("verify", "verify needs at least one check")));
    }
    let mut failures = Vec::new();
    let mut report = json!({"model": ctx.model.describe()});
    if let Some(ic) = &v.identities {
        let rows: Vec<(usize, u32, f64, f64, f64, f64, f64, f64)> = (0..ic.instances)
            .into_par_iter()
            .map(|i| {
                let mut rng = replica_rng(ctx.cfg.run.seed ^ 0x1D, i);
                let h = rng.random_range(1..=ic.max_h);
                let c: Vec<f64> = (0..h).map(|_| rng.random_range(0.05..2.0)).collect();
                let m = rng.random_range(1..=(h as u32 + 4));
                let beta = rng.random_range(-2.0..2.0);
                let lhs = identity_subset_power_sum(&c, m);
                let rhs = subset_power_sum_rhs(&c, m);
                let scale = (1u64 << h) as f64 * c.iter().sum::<f64>().powi(m as i32);
                let (el, er) = identity_exp_product(&c, beta);
                // Both sides vanish like beta^(H-1) while the alternating side sums O(1) terms.
                let exp_scale = c.iter().product::<f64>() * (beta.abs() * c.iter().sum::<f64>()).exp();
                (h, m, lhs, rhs, scale, el, er, exp_scale)
            })
            .collect();
        let mut worst_power: f64 = 0.0;
        let mut worst_exp: f64 = 0.0;
        let mut zero_cases = 0u64;
        let mut worst_exp_plain: f64 = 0.0;
        for &(h, m, lhs, rhs, scale, el, er, exp_scale) in &rows {
            let e = if (m as usize) < h {
                zero_cases += 1;
                (lhs - rhs).abs() / scale
            } else {
                (lhs - rhs).abs() / rhs.abs().max(f64::MIN_POSITIVE)
            };
            worst_power = worst_power.max(e);
            worst_exp = worst_exp.max((el - er).abs() / el.abs().max(exp_scale).max(f64::MIN_POSITIVE));
            worst_exp_plain = worst_exp_plain.max((el - er).abs() / el.abs().max(f64::MIN_POSITIVE));
        }
        let pass = worst_power <= ic.tol && worst_exp <= ic.tol;
        if !pass {
            failures.push(format!("identities: worst errors {worst_power:e} and {worst_exp:e} exceed {:e}", ic.tol));
        }
        report["identities"] = json!({
            "instances": ic.instances,
            "exact_zero_cases": zero_cases,
            "power_sum_worst": worst_power,
            "exp_product_worst": worst_exp,
            "exp_product_worst_plain_relative": worst_exp_plain,
            "tol": ic.tol,
            "pass": pass,
        });
    }
    if let Some(pc) = &v.pde {
        let eval = EvalBox { t: (pc.t_range[0], pc.t_range[1]), x: pc.x_ranges.iter().map(|r| (r[0], r[1])).collect(), points: pc.points };
        let in_range = |o: &f64| *o >= pc.order_range[0] && *o <= pc.order_range[1];
        let mut csv_rows = Vec::new();
        let table = match pc.equation {
            Equation::System => {
                let f = complete_terminal_evaluator(&ctx.model, ctx.cfg.run.tol);
                residual_system(&ctx.model, &f, &eval, &pc.spacings)?
            }
            Equation::Scalar => residual_dth_order(&ctx.model, &eval, &pc.spacings, None)?,
        };
        let orders = table.orders();
        let converges = orders.iter().all(in_range);
        if !converges {
            failures.push(format!("pde: observed orders {orders:?} outside {:?}", pc.order_range));
        }
        csv_rows.extend(table_rows("exact", &table));
        let mut section = json!({"equation": pc.equation, "table": table, "orders": orders, "converges": converges});
        if pc.equation == Equation::Scalar {
            let d = ctx.model.dim();
            let lambda = rational(ctx.model.common_rate().unwrap_or(0.0))?;
            let p: Vec<BigRational> = ctx.model.kernel().initial().iter().map(|&x| rational(x)).collect::<Result<_, _>>()?;
            let exact = recursion_operator(d, &lambda, &p, RecursionVariant::Corrected) == build_dth_order_operator(d, &lambda, &p);
            if !exact {
                failures.push("pde: recursion and closed operator differ".into());
            }
            section["recursion_matches"] = json!(exact);
        }
        if let Some(nc) = &pc.negative_control {
            let perturbed = match pc.equation {
                Equation::Scalar => residual_dth_order(&ctx.model, &eval, &pc.spacings, Some((&nc.index, nc.factor)))?,
                Equation::System => {
                    return Err(Failure::Config(ConfigError::new(
                        "verify.pde.negative_control",
                        "the negative control perturbs the scalar equation",
                    )))
                }
            };
            let last = perturbed.orders().last().copied().unwrap_or(f64::NAN);
            let ratio = perturbed.rows.last().map(|r| r.max_residual).unwrap_or(0.0)
                / table.rows.last().map(|r| r.max_residual).unwrap_or(f64::INFINITY);
            let detected = last.abs() < 0.5 && ratio > 50.0;
            if !detected {
                failures.push(format!("pde: perturbed operator still converges (last order {last:.3})"));
            }
            csv_rows.extend(table_rows("perturbed", &perturbed));
            section["negative_control"] = json!({"table": perturbed, "last_order": last, "residual_ratio": ratio, "detected": detected});
        }
        ctx.write_csv("verify_pde.csv", &["operator", "spacing", "max_residual", "observed_order"].map(String::from), &csv_rows)?;
        report["pde"] = section;
    }
    if let Some(cc) = &v.conditional {
        let cfg = ConditionalConfig {
            replicas: ctx.cfg.run.replicas,
            conditioned_samples: cc.conditioned_samples,
            scaled_samples: cc.scaled_samples,
            seed: ctx.cfg.run.seed,
            level: cc.level,
        };
        let r = conditional_equivalence(&ctx.model, &cc.subset, ctx.t(), &cfg)?;
        if !r.probability_pass {
            failures.push(format!("conditional: probability z = {:.3}", r.z_score));
        }
        if !r.ks_pass {
            failures.push("conditional: two-sample KS rejects at the configured level".into());
        }
        report["conditional"] = serde_json::to_value(&r).expect("serializable");
    }
    report["pass"] = json!(failures.is_empty());
    report["failures"] = json!(failures);
    ctx.write_json("verify.json", report)?;
    if failures.is_empty() {
        Ok(())
    } else {
        Err(Failure::Verification(failures))
    }
}

pub fn project(ctx: &Context) -> Outcome {
    let vs = ctx.model.velocities();
    let t = ctx.t();
    let mut info = json!({
        "model": ctx.model.describe(),
        "dim": vs.dim(),
        "count": vs.count(),
        "state_space_dim": vs.state_space_dim(),
        "minimal": vs.is_minimal(),
        "canonical": vs.is_canonical(),
    });
    let reduced = if vs.state_space_dim() < vs.dim() { Some(reduce_model(&ctx.model)?) } else { None };
    if let Some((pm, r)) = &reduced {
        info["projection_rows"] = json!(pm.rows());
        info["reduced_velocities"] = json!(velocity_rows(r));
    }
    if vs.state_space_dim() == vs.dim() && !vs.is_minimal() {
        let l = lift_model(&ctx.model)?;
        info["lift_tail_rows"] = json!(l.tail_rows());
        info["lifted_velocities"] = json!(velocity_rows(l.lifted()));
    }
    let mut header = ctx.coords();
    header.extend(["region", "face", "weights"].map(String::from));
    if reduced.is_some() {
        header.push("projected".into());
    }
    let mut rows = Vec::new();
    let mut points = Vec::new();
    for x in &ctx.cfg.query.points {
        let c = classify_point(vs, x, t);
        let mut row: Vec<String> = x.iter().map(|&v| num(v)).collect();
        row.extend([c.kind.as_str().to_string(), set(&c.face), c.weights.iter().map(|&w| num(w)).join(" ")]);
        let mut entry = json!({"x": x, "region": c.kind.as_str(), "face": c.face, "weights": c.weights});
        if let Some((pm, _)) = &reduced {
            let xr = pm.apply(x);
            row.push(xr.iter().map(|&v| num(v)).join(" "));
            entry["projected"] = json!(xr);
        }
        rows.push(row);
        points.push(entry);
    }
    info["points"] = json!(points);
    ctx.write_csv("project.csv", &header, &rows)?;
    ctx.write_json("project.json", info)
}

fn velocity_rows(m: &MotionModel) -> Vec<Vec<f64>> {
    (0..m.count()).map(|h| m.velocities().velocity(h).iter().copied().collect()).collect()
}

pub fn ensure_dir(p: &Path) -> Outcome {
    fs::create_dir_all(p)?;
    Ok(())
}
