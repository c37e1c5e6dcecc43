//! Sample paths, occupation-time maps and the Monte Carlo harness.

use std::collections::BTreeMap;
use std::io::Write;

use nalgebra::DVector;
use rand::Rng;
use rayon::prelude::*;
use serde_json::{json, Value};

use crate::error::{Error, Result};
use crate::geometry::{MinimalClassifier, RegionKind, VelocitySet};
use crate::linalg;
use crate::model::{EventClock, MotionModel};
use crate::stochastic::{replica_rng, sample_arrivals_into};

/// One sample path on `[0, t]`.
#[derive(Clone, Debug, PartialEq)]
pub struct Trajectory {
    /// `T_0 = 0 < T_1 < ... < T_N <= t`.
    pub switch_times: Vec<f64>,
    /// Velocity used on each segment `[T_i, T_{i+1})`.
    pub velocity_indices: Vec<usize>,
    /// Time spent with each velocity.
    pub occupation: Vec<f64>,
    /// Number of displacements with each velocity.
    pub counts: Vec<u32>,
    pub endpoint: Vec<f64>,
    pub terminal: usize,
    pub horizon: f64,
}

impl Trajectory {
    /// Number of switches `N(t)`.
    pub fn switches(&self) -> usize {
        self.switch_times.len() - 1
    }

    /// Position at time `s` by walking the segments.
    pub fn position_at(&self, vs: &VelocitySet, s: f64) -> Vec<f64> {
        let mut x = vec![0.0; vs.dim()];
        for (i, &h) in self.velocity_indices.iter().enumerate() {
            let a = self.switch_times[i];
            if a >= s {
                break;
            }
            let b = self.switch_times.get(i + 1).copied().unwrap_or(self.horizon).min(s);
            for (d, xd) in x.iter_mut().enumerate() {
                *xd += vs.matrix()[(d, h)] * (b - a);
            }
        }
        x
    }
}

/// Endpoint summary of a path, without the switch history.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct EndpointSample {
    pub occupation: Vec<f64>,
    pub counts: Vec<u32>,
    pub terminal: usize,
    pub position: Vec<f64>,
    pub switches: u64,
}

impl EndpointSample {
    /// Indices of the velocities used at least once.
    pub fn used_set(&self) -> Vec<usize> {
        (0..self.counts.len()).filter(|&h| self.counts[h] > 0).collect()
    }

    fn used_mask(&self) -> usize {
        self.counts.iter().enumerate().filter(|(_, &c)| c > 0).fold(0, |m, (h, _)| m | (1 << h))
    }

    /// Checks the path identities; returns a description of the first failure.
    pub fn check_invariants(&self, vs: &VelocitySet, t: f64) -> std::result::Result<(), String> {
        let total: f64 = self.occupation.iter().sum();
        if (total - t).abs() > 1e-12 * t.max(1.0) {
            return Err(format!("occupation sums to {total}, horizon {t}"));
        }
        if self.occupation.iter().any(|&o| o < 0.0) {
            return Err("negative occupation time".into());
        }
        let n: u64 = self.counts.iter().map(|&c| c as u64).sum();
        if n != self.switches + 1 {
            return Err(format!("{n} displacements for {} switches", self.switches));
        }
        if self.counts[self.terminal] == 0 {
            return Err("terminal velocity never used".into());
        }
        let (_, x) = occupation_to_position(vs, &self.occupation);
        let scale = 1e-12 * (1.0 + t * vs.scale());
        if x.iter().zip(&self.position).any(|(a, b)| (a - b).abs() > scale) {
            return Err("endpoint differs from V T".into());
        }
        Ok(())
    }
}

/// Reusable buffers for endpoint simulation.
#[derive(Default)]
pub struct Scratch {
    arrivals: Vec<f64>,
}

fn walk<R: Rng + ?Sized, F: FnMut(f64, usize)>(
    model: &MotionModel,
    t: f64,
    rng: &mut R,
    scratch: &mut Scratch,
    out: &mut EndpointSample,
    mut on_segment: F,
) -> Result<()> {
    let n = model.count();
    out.occupation.clear();
    out.occupation.resize(n, 0.0);
    out.counts.clear();
    out.counts.resize(n, 0);
    out.switches = 0;
    let kernel = model.kernel();
    let mut h = kernel.initial_velocity(rng);
    out.counts[h] = 1;
    on_segment(0.0, h);
    let mut s = 0.0;
    match model.clock() {
        EventClock::Renewal(w) => loop {
            let d = w.law(h).sample(rng);
            if s + d >= t {
                out.occupation[h] += t - s;
                break;
            }
            out.occupation[h] += d;
            s += d;
            h = kernel.next_velocity(h, rng);
            out.counts[h] += 1;
            out.switches += 1;
            on_segment(s, h);
        },
        EventClock::Poisson(rate) => {
            sample_arrivals_into(rate, t, rng, &mut scratch.arrivals)?;
            for &a in &scratch.arrivals {
                out.occupation[h] += a - s;
                s = a;
                h = kernel.next_velocity(h, rng);
                out.counts[h] += 1;
                out.switches += 1;
                on_segment(s, h);
            }
            out.occupation[h] += t - s;
        }
    }
    out.terminal = h;
    let v = model.velocities().matrix();
    out.position.clear();
    out.position.resize(model.dim(), 0.0);
    for (k, &o) in out.occupation.iter().enumerate() {
        if o != 0.0 {
            for (d, x) in out.position.iter_mut().enumerate() {
                *x += v[(d, k)] * o;
            }
        }
    }
    Ok(())
}

/// Simulates one full path on `[0, t]`.
pub fn simulate_path<R: Rng + ?Sized>(model: &MotionModel, t: f64, rng: &mut R) -> Result<Trajectory> {
    if !(t >= 0.0) {
        return Err(Error::InvalidModel("horizon must be nonnegative".into()));
    }
    let mut times = Vec::new();
    let mut idx = Vec::new();
    let mut out = EndpointSample::default();
    walk(model, t, rng, &mut Scratch::default(), &mut out, |s, h| {
        times.push(s);
        idx.push(h);
    })?;
    Ok(Trajectory {
        switch_times: times,
        velocity_indices: idx,
        occupation: out.occupation,
        counts: out.counts,
        endpoint: out.position,
        terminal: out.terminal,
        horizon: t,
    })
}

/// Simulates only the endpoint summary, reusing buffers.
pub fn simulate_endpoint<R: Rng + ?Sized>(
    model: &MotionModel,
    t: f64,
    rng: &mut R,
    scratch: &mut Scratch,
    out: &mut EndpointSample,
) -> Result<()> {
    walk(model, t, rng, scratch, out, |_, _| {})
}

/// `(t, X) = [1^T; V] T`.
pub fn occupation_to_position(vs: &VelocitySet, occupation: &[f64]) -> (f64, Vec<f64>) {
    let t = occupation.iter().sum();
    let x = vs.matrix() * DVector::from_column_slice(occupation);
    (t, x.iter().copied().collect())
}

/// Inverse map for minimal sets: `T = [1^T; V]^{-1} (t, X)`.
pub fn position_to_occupation(vs: &VelocitySet, t: f64, x: &[f64]) -> Result<Vec<f64>> {
    if !vs.is_minimal() {
        return Err(Error::NotMinimal);
    }
    let occ: Vec<f64> = if vs.is_canonical() {
        let mut o = Vec::with_capacity(x.len() + 1);
        o.push(t - x.iter().sum::<f64>());
        o.extend_from_slice(x);
        o
    } else {
        let mut rhs = DVector::zeros(x.len() + 1);
        rhs[0] = t;
        rhs.rows_mut(1, x.len()).copy_from_slice(x);
        let inv = linalg::inverse(&vs.augmented()).ok_or(Error::NotMinimal)?;
        (inv * rhs).iter().copied().collect()
    };
    if occ.iter().any(|&o| o < -1e-12 * t.abs().max(1e-300)) {
        return Err(Error::OutsideHull);
    }
    Ok(occ)
}

/// Maps a sample of a minimal motion to the motion with the same switching
/// statistics and velocities `target`: `X' = V' [1^T; V]^{-1} (t, X)`.
pub fn canonical_transport(source: &VelocitySet, target: &VelocitySet, t: f64, x: &[f64]) -> Result<Vec<f64>> {
    if target.count() != source.count() {
        return Err(Error::InvalidModel("target must have as many velocities as the source".into()));
    }
    let occ = position_to_occupation(source, t, x)?;
    Ok(occupation_to_position(target, &occ).1)
}

/// Runs `f` over contiguous replica ranges of fixed size, in parallel, and
/// returns the partial results in range order.
pub fn map_replica_chunks<T, F>(replicas: u64, chunk: u64, f: F) -> Result<Vec<T>>
where
    T: Send,
    F: Fn(u64, u64) -> Result<T> + Sync,
{
    let chunk = chunk.max(1);
    let n = replicas.div_ceil(chunk);
    (0..n).into_par_iter().map(|c| f(c * chunk, ((c + 1) * chunk).min(replicas))).collect()
}

/// Runs `f` on a dedicated pool with `workers` threads (0 = rayon default).
pub fn with_workers<T: Send>(workers: usize, f: impl FnOnce() -> T + Send) -> T {
    if workers == 0 {
        return f();
    }
    match rayon::ThreadPoolBuilder::new().num_threads(workers).build() {
        Ok(pool) => pool.install(f),
        Err(_) => f(),
    }
}

pub const DEFAULT_CHUNK: u64 = 8192;

fn sampled_check(model: &MotionModel, t: f64, i: u64, e: &EndpointSample) {
    if cfg!(debug_assertions) || i.is_multiple_of(1000) {
        if let Err(msg) = e.check_invariants(model.velocities(), t) {
            panic!("path invariant violated at replica {i}: {msg}");
        }
    }
}

/// Endpoints of `replicas` independent paths, replica `i` using stream `(seed, i)`.
pub fn collect_endpoints(model: &MotionModel, t: f64, replicas: u64, seed: u64) -> Result<Vec<EndpointSample>> {
    let parts = map_replica_chunks(replicas, DEFAULT_CHUNK, |a, b| {
        let mut scratch = Scratch::default();
        let mut out = Vec::with_capacity((b - a) as usize);
        for i in a..b {
            let mut rng = replica_rng(seed, i);
            let mut e = EndpointSample::default();
            simulate_endpoint(model, t, &mut rng, &mut scratch, &mut e)?;
            sampled_check(model, t, i, &e);
            out.push(e);
        }
        Ok(out)
    })?;
    Ok(parts.into_iter().flatten().collect())
}

/// Regular axis-aligned grid of boxes.
#[derive(Clone, Debug, PartialEq, serde::Serialize)]
pub struct GridSpec {
    pub lower: Vec<f64>,
    pub upper: Vec<f64>,
    pub bins: Vec<usize>,
}

impl GridSpec {
    pub fn new(lower: Vec<f64>, upper: Vec<f64>, bins: Vec<usize>) -> Result<Self> {
        if lower.len() != upper.len() || lower.len() != bins.len() || lower.is_empty() {
            return Err(Error::InvalidModel("grid bounds and bin counts must have the same length".into()));
        }
        if lower.iter().zip(&upper).any(|(a, b)| !(b > a)) || bins.contains(&0) {
            return Err(Error::InvalidModel("grid needs lower < upper and at least one bin per axis".into()));
        }
        Ok(GridSpec { lower, upper, bins })
    }

    /// Bounding box of `Conv(v_0 t, ..., v_M t)` cut into `bins` boxes per axis.
    pub fn bounding_box(vs: &VelocitySet, t: f64, bins: usize) -> Self {
        let d = vs.dim();
        let mut lower = vec![f64::INFINITY; d];
        let mut upper = vec![f64::NEG_INFINITY; d];
        for h in 0..vs.count() {
            for i in 0..d {
                let x = vs.matrix()[(i, h)] * t;
                lower[i] = lower[i].min(x);
                upper[i] = upper[i].max(x);
            }
        }
        for i in 0..d {
            if !(upper[i] > lower[i]) {
                upper[i] = lower[i] + 1.0;
            }
        }
        GridSpec { lower, upper, bins: vec![bins; d] }
    }

    pub fn dim(&self) -> usize {
        self.bins.len()
    }

    pub fn bin_count(&self) -> usize {
        self.bins.iter().product()
    }

    pub fn widths(&self) -> Vec<f64> {
        (0..self.dim()).map(|i| (self.upper[i] - self.lower[i]) / self.bins[i] as f64).collect()
    }

    pub fn bin_volume(&self) -> f64 {
        self.widths().iter().product()
    }

    /// Flat bin index (first axis fastest) or `None` outside the grid.
    pub fn locate(&self, x: &[f64]) -> Option<usize> {
        let mut idx = 0;
        let mut stride = 1;
        for i in 0..self.dim() {
            if !(x[i] >= self.lower[i] && x[i] <= self.upper[i]) {
                return None;
            }
            let w = (self.upper[i] - self.lower[i]) / self.bins[i] as f64;
            let k = (((x[i] - self.lower[i]) / w) as usize).min(self.bins[i] - 1);
            idx += k * stride;
            stride *= self.bins[i];
        }
        Some(idx)
    }

    pub fn multi_index(&self, mut idx: usize) -> Vec<usize> {
        let mut out = Vec::with_capacity(self.dim());
        for &b in &self.bins {
            out.push(idx % b);
            idx /= b;
        }
        out
    }

    /// Lower and upper corners of a bin.
    pub fn bin_bounds(&self, idx: usize) -> (Vec<f64>, Vec<f64>) {
        let w = self.widths();
        let m = self.multi_index(idx);
        let lo: Vec<f64> = (0..self.dim()).map(|i| self.lower[i] + m[i] as f64 * w[i]).collect();
        let hi: Vec<f64> = (0..self.dim()).map(|i| lo[i] + w[i]).collect();
        (lo, hi)
    }

    pub fn center(&self, idx: usize) -> Vec<f64> {
        let (lo, hi) = self.bin_bounds(idx);
        lo.iter().zip(&hi).map(|(a, b)| 0.5 * (a + b)).collect()
    }

    /// All `2^D` corners of a bin.
    pub fn corners(&self, idx: usize) -> Vec<Vec<f64>> {
        let (lo, hi) = self.bin_bounds(idx);
        (0..(1usize << self.dim()))
            .map(|mask| (0..self.dim()).map(|i| if mask >> i & 1 == 1 { hi[i] } else { lo[i] }).collect())
            .collect()
    }
}

/// Settings of a Monte Carlo run.
#[derive(Clone, Debug)]
pub struct McConfig {
    pub replicas: u64,
    pub seed: u64,
    pub grid: Option<GridSpec>,
    /// Joint (counts, terminal) frequencies are kept for paths with at most this many displacements.
    pub max_joint_total: u32,
    pub chunk: u64,
}

impl McConfig {
    pub fn new(replicas: u64, seed: u64) -> Self {
        McConfig { replicas, seed, grid: None, max_joint_total: 0, chunk: DEFAULT_CHUNK }
    }

    pub fn with_grid(mut self, grid: GridSpec) -> Self {
        self.grid = Some(grid);
        self
    }

    pub fn with_joint(mut self, max_total: u32) -> Self {
        self.max_joint_total = max_total;
        self
    }
}

/// Aggregated Monte Carlo output. Every replica is counted exactly once in
/// `faces`, `histogram`, `out_of_grid` or `boundary_degenerate`.
#[derive(Clone, Debug, PartialEq)]
pub struct MonteCarloSummary {
    pub replicas: u64,
    pub seed: u64,
    pub horizon: f64,
    pub grid: Option<GridSpec>,
    /// Samples of the absolutely continuous part, per grid bin.
    pub histogram: Vec<u64>,
    /// Continuous-part samples outside the grid (or all of them without a grid).
    pub out_of_grid: u64,
    /// Continuous-part samples too close to a face to classify.
    pub boundary_degenerate: u64,
    /// Samples on lower-dimensional pieces, keyed by the set of velocities used.
    pub faces: BTreeMap<Vec<usize>, u64>,
    /// Counts of `(N_0, ..., N_M, terminal)` for short paths.
    pub joint: BTreeMap<(Vec<u32>, usize), u64>,
    pub occupation_sum: Vec<f64>,
    pub switch_sum: u64,
}

impl MonteCarloSummary {
    fn empty(n: usize, cfg: &McConfig, t: f64) -> Self {
        MonteCarloSummary {
            replicas: 0,
            seed: cfg.seed,
            horizon: t,
            grid: cfg.grid.clone(),
            histogram: vec![0; cfg.grid.as_ref().map_or(0, |g| g.bin_count())],
            out_of_grid: 0,
            boundary_degenerate: 0,
            faces: BTreeMap::new(),
            joint: BTreeMap::new(),
            occupation_sum: vec![0.0; n],
            switch_sum: 0,
        }
    }

    fn merge(&mut self, other: MonteCarloSummary) {
        self.replicas += other.replicas;
        for (a, b) in self.histogram.iter_mut().zip(other.histogram) {
            *a += b;
        }
        self.out_of_grid += other.out_of_grid;
        self.boundary_degenerate += other.boundary_degenerate;
        for (k, v) in other.faces {
            *self.faces.entry(k).or_insert(0) += v;
        }
        for (k, v) in other.joint {
            *self.joint.entry(k).or_insert(0) += v;
        }
        for (a, b) in self.occupation_sum.iter_mut().zip(other.occupation_sum) {
            *a += b;
        }
        self.switch_sum += other.switch_sum;
    }

    /// Samples in the absolutely continuous part.
    pub fn continuous_total(&self) -> u64 {
        self.histogram.iter().sum::<u64>() + self.out_of_grid + self.boundary_degenerate
    }

    pub fn face_count(&self, face: &[usize]) -> u64 {
        self.faces.get(face).copied().unwrap_or(0)
    }

    pub fn face_frequency(&self, face: &[usize]) -> f64 {
        self.face_count(face) as f64 / self.replicas as f64
    }

    pub fn continuous_frequency(&self) -> f64 {
        self.continuous_total() as f64 / self.replicas as f64
    }

    pub fn mean_occupation(&self) -> Vec<f64> {
        self.occupation_sum.iter().map(|s| s / self.replicas as f64).collect()
    }

    pub fn joint_frequency(&self, counts: &[u32], terminal: usize) -> f64 {
        self.joint.get(&(counts.to_vec(), terminal)).copied().unwrap_or(0) as f64 / self.replicas as f64
    }

    /// One row per face and per bin: region, index set, bin centre, count, frequency.
    pub fn write_csv<W: Write>(&self, w: &mut W, dim: usize) -> std::io::Result<()> {
        let n = self.replicas as f64;
        let coords: Vec<String> = (1..=dim).map(|i| format!("x{i}")).collect();
        writeln!(w, "region,index_set,{},count,frequency", coords.join(","))?;
        let blank = vec![String::new(); dim].join(",");
        for (face, &c) in &self.faces {
            let kind = if face.len() == 1 { "vertex" } else { "face" };
            let set: Vec<String> = face.iter().map(|h| h.to_string()).collect();
            writeln!(w, "{kind},{},{blank},{c},{:.16e}", set.join(" "), c as f64 / n)?;
        }
        if let Some(g) = &self.grid {
            for (i, &c) in self.histogram.iter().enumerate() {
                let ctr: Vec<String> = g.center(i).iter().map(|x| format!("{x:.16e}")).collect();
                writeln!(w, "inner-bin,,{},{c},{:.16e}", ctr.join(","), c as f64 / n)?;
            }
        }
        writeln!(w, "inner-outside-grid,,{blank},{},{:.16e}", self.out_of_grid, self.out_of_grid as f64 / n)?;
        writeln!(
            w,
            "boundary-degenerate,,{blank},{},{:.16e}",
            self.boundary_degenerate,
            self.boundary_degenerate as f64 / n
        )?;
        Ok(())
    }

    /// Full summary as JSON; `meta` is embedded verbatim.
    pub fn to_json(&self, meta: Value) -> Value {
        let faces: Vec<Value> = self
            .faces
            .iter()
            .map(|(k, v)| json!({"index_set": k, "count": v, "frequency": *v as f64 / self.replicas as f64}))
            .collect();
        let joint: Vec<Value> = self
            .joint
            .iter()
            .map(|((c, k), v)| json!({"counts": c, "terminal": k, "count": v}))
            .collect();
        json!({
            "meta": meta,
            "replicas": self.replicas,
            "seed": self.seed,
            "horizon": self.horizon,
            "grid": self.grid,
            "histogram": self.histogram,
            "out_of_grid": self.out_of_grid,
            "boundary_degenerate": self.boundary_degenerate,
            "continuous_total": self.continuous_total(),
            "faces": faces,
            "joint": joint,
            "mean_occupation": self.mean_occupation(),
            "mean_switches": self.switch_sum as f64 / self.replicas as f64,
        })
    }
}

/// Affine dimension of every velocity subset, indexed by bit mask.
fn subset_dims(vs: &VelocitySet) -> Vec<usize> {
    let n = vs.count();
    (0..(1usize << n))
        .map(|mask| {
            let idx: Vec<usize> = (0..n).filter(|h| mask >> h & 1 == 1).collect();
            if idx.len() <= 1 {
                0
            } else {
                vs.subset(&idx).map(|s| s.state_space_dim()).unwrap_or(0)
            }
        })
        .collect()
}

/// Monte Carlo summary of `X(t)`; bit-identical for a given seed whatever the
/// number of worker threads.
pub fn mc_summary(model: &MotionModel, t: f64, cfg: &McConfig) -> Result<MonteCarloSummary> {
    let n = model.count();
    if n > 20 {
        return Err(Error::Unsupported("Monte Carlo summaries support at most 20 velocities".into()));
    }
    if let Some(g) = &cfg.grid {
        if g.dim() != model.dim() {
            return Err(Error::InvalidModel("grid dimension differs from the motion dimension".into()));
        }
    }
    let vs = model.velocities();
    let dims = subset_dims(vs);
    let full = vs.state_space_dim();
    let classifier = if vs.is_minimal() { Some(MinimalClassifier::new(vs)?) } else { None };
    let parts = map_replica_chunks(cfg.replicas, cfg.chunk, |a, b| {
        let mut part = MonteCarloSummary::empty(n, cfg, t);
        let mut scratch = Scratch::default();
        let mut e = EndpointSample::default();
        for i in a..b {
            let mut rng = replica_rng(cfg.seed, i);
            simulate_endpoint(model, t, &mut rng, &mut scratch, &mut e)?;
            sampled_check(model, t, i, &e);
            part.replicas += 1;
            part.switch_sum += e.switches;
            for (s, o) in part.occupation_sum.iter_mut().zip(&e.occupation) {
                *s += o;
            }
            let total: u32 = e.counts.iter().sum();
            if total <= cfg.max_joint_total {
                *part.joint.entry((e.counts.clone(), e.terminal)).or_insert(0) += 1;
            }
            let mask = e.used_mask();
            let continuous = full > 0 && t > 0.0 && dims[mask] == full;
            if !continuous {
                *part.faces.entry(e.used_set()).or_insert(0) += 1;
                continue;
            }
            if let Some(c) = &classifier {
                if c.classify(&e.position, t).kind != RegionKind::Inner {
                    part.boundary_degenerate += 1;
                    continue;
                }
            }
            match cfg.grid.as_ref().and_then(|g| g.locate(&e.position)) {
                Some(k) => part.histogram[k] += 1,
                None => part.out_of_grid += 1,
            }
        }
        Ok(part)
    })?;
    let mut total = MonteCarloSummary::empty(n, cfg, t);
    for p in parts {
        total.merge(p);
    }
    Ok(total)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::stochastic::RateFunction;

    #[test]
    fn occupation_maps() {
        let vs = VelocitySet::canonical(2);
        let (t, x) = occupation_to_position(&vs, &[0.5, 0.3, 0.2]);
        assert!((t - 1.0).abs() < 1e-15 && x == vec![0.3, 0.2]);
        let o = position_to_occupation(&vs, 1.0, &[0.3, 0.2]).unwrap();
        assert!((o[0] - 0.5).abs() < 1e-15 && o[1] == 0.3 && o[2] == 0.2);
        let tel = VelocitySet::new(&[vec![-1.0], vec![1.0]]).unwrap();
        assert_eq!(occupation_to_position(&tel, &[0.5, 0.5]).1, vec![0.0]);
        let o = position_to_occupation(&tel, 1.0, &[0.0]).unwrap();
        assert!((o[0] - 0.5).abs() < 1e-15 && (o[1] - 0.5).abs() < 1e-15);
        let o = position_to_occupation(&tel, 2.0, &[2.0]).unwrap();
        assert!(o[0].abs() < 1e-15 && (o[1] - 2.0).abs() < 1e-15);
        assert_eq!(position_to_occupation(&vs, 1.0, &[0.7, 0.7]), Err(Error::OutsideHull));
        let nm = VelocitySet::new(&[vec![0.0], vec![1.0], vec![-1.0]]).unwrap();
        assert_eq!(position_to_occupation(&nm, 1.0, &[0.0]), Err(Error::NotMinimal));
    }

    #[test]
    fn transport_to_telegraph() {
        let src = VelocitySet::canonical(1);
        let dst = VelocitySet::new(&[vec![-1.0], vec![1.0]]).unwrap();
        let x = canonical_transport(&src, &dst, 2.0, &[0.5]).unwrap();
        assert!((x[0] - (-2.0 + 2.0 * 0.5)).abs() < 1e-15);
        assert_eq!(canonical_transport(&src, &src, 2.0, &[0.5]).unwrap(), vec![0.5]);
    }

    #[test]
    fn zero_rate_path_is_straight() {
        let m = MotionModel::complete_canonical(2, vec![0.2, 0.3, 0.5], 0.0).unwrap();
        let mut rng = replica_rng(1, 2);
        let p = simulate_path(&m, 1.5, &mut rng).unwrap();
        assert_eq!(p.switches(), 0);
        let v = m.velocities().velocity(p.terminal);
        assert_eq!(p.endpoint, v.iter().map(|x| x * 1.5).collect::<Vec<_>>());
    }

    #[test]
    fn path_and_endpoint_agree() {
        let m = MotionModel::cyclic(VelocitySet::canonical(2), vec![0.2, 0.3, 0.5], &[1.0, 2.0, 3.0]).unwrap();
        let p = simulate_path(&m, 2.0, &mut replica_rng(9, 4)).unwrap();
        let mut e = EndpointSample::default();
        simulate_endpoint(&m, 2.0, &mut replica_rng(9, 4), &mut Scratch::default(), &mut e).unwrap();
        assert_eq!(p.endpoint, e.position);
        assert_eq!(p.counts, e.counts);
        let x = p.position_at(m.velocities(), 2.0);
        for (a, b) in x.iter().zip(&p.endpoint) {
            assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn single_replica_zero_rate_summary() {
        let m = MotionModel::complete_canonical(2, vec![0.2, 0.3, 0.5], 0.0).unwrap();
        let s = mc_summary(&m, 1.0, &McConfig::new(1, 5)).unwrap();
        assert_eq!(s.faces.values().sum::<u64>(), 1);
        assert_eq!(s.faces.keys().next().unwrap().len(), 1);
    }

    #[test]
    fn summary_is_independent_of_workers() {
        let m = MotionModel::complete_canonical(2, vec![0.2, 0.3, 0.5], 1.3).unwrap();
        let cfg = McConfig::new(20_000, 77)
            .with_grid(GridSpec::bounding_box(m.velocities(), 1.0, 8))
            .with_joint(4);
        let a = with_workers(1, || mc_summary(&m, 1.0, &cfg).unwrap());
        let b = with_workers(3, || mc_summary(&m, 1.0, &cfg).unwrap());
        assert_eq!(a, b);
        let total = a.histogram.iter().sum::<u64>() + a.out_of_grid + a.boundary_degenerate + a.faces.values().sum::<u64>();
        assert_eq!(total, 20_000);
    }

    #[test]
    fn grid_locates_and_bounds() {
        let g = GridSpec::new(vec![0.0, 0.0], vec![1.0, 2.0], vec![4, 2]).unwrap();
        assert_eq!(g.locate(&[0.3, 1.5]), Some(1 + 4));
        assert_eq!(g.locate(&[1.0, 2.0]), Some(3 + 4));
        assert_eq!(g.locate(&[1.1, 0.0]), None);
        let (lo, hi) = g.bin_bounds(5);
        assert_eq!((lo, hi), (vec![0.25, 1.0], vec![0.5, 2.0]));
    }

    #[test]
    fn nonhomogeneous_clock_runs() {
        let m = MotionModel::complete_canonical(1, vec![0.5, 0.5], 1.0)
            .unwrap()
            .with_clock(EventClock::Poisson(RateFunction::PiecewiseLinear {
                times: vec![0.0, 1.0],
                values: vec![0.0, 2.0],
            }))
            .unwrap();
        let s = mc_summary(&m, 1.0, &McConfig::new(1000, 1)).unwrap();
        assert_eq!(s.replicas, 1000);
    }
}
