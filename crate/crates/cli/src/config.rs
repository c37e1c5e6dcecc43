//! Experiment configuration: schema, validation with field paths, and model construction.

use serde::{Deserialize, Serialize};

use finvel::analytic::CompleteForm;
use finvel::simulator::GridSpec;
use finvel::{EventClock, MotionModel, RateFunction, SwitchKernel, VelocitySet, WaitingLaw, WaitingTimeModel};

const PROB_TOL: f64 = 1e-12;

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub model: ModelConfig,
    pub query: QueryConfig,
    #[serde(default)]
    pub run: RunConfig,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub verify: Option<VerifyConfig>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub compare: Option<CompareConfig>,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelConfig {
    /// One row per velocity.
    pub velocities: Vec<Vec<f64>>,
    pub kernel: KernelConfig,
    pub clock: ClockConfig,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum KernelConfig {
    Complete { p: Vec<f64> },
    CompleteUniform,
    Cyclic { initial: Vec<f64> },
    Orthogonal { initial: Vec<f64> },
    General { initial: Vec<f64>, transition: Vec<Vec<f64>> },
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum ClockConfig {
    Poisson { rate: RateConfig },
    Renewal { laws: Vec<LawConfig> },
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum RateConfig {
    Constant { value: f64 },
    PiecewiseConstant { breaks: Vec<f64>, values: Vec<f64> },
    PiecewiseLinear { times: Vec<f64>, values: Vec<f64> },
    /// `lambda(s) = slope * s`.
    Linear { slope: f64 },
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(tag = "law", rename_all = "snake_case", deny_unknown_fields)]
pub enum LawConfig {
    Exponential { rate: f64 },
    Gamma { shape: f64, rate: f64 },
    Deterministic { duration: f64 },
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct QueryConfig {
    pub t: f64,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub points: Vec<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub grid: Option<GridConfig>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub face: Option<Vec<usize>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub counts: Option<Vec<u32>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub terminal: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub form: Option<CompleteForm>,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridConfig {
    pub bins: Vec<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub lower: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub upper: Option<Vec<f64>>,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    #[serde(default = "default_replicas")]
    pub replicas: u64,
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "default_tol")]
    pub tol: f64,
    /// Never written to output headers: results do not depend on it.
    #[serde(default, skip_serializing)]
    pub workers: Option<usize>,
    #[serde(default)]
    pub max_joint_total: u32,
}

fn default_replicas() -> u64 {
    100_000
}

fn default_tol() -> f64 {
    1e-12
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig { replicas: default_replicas(), seed: 0, tol: default_tol(), workers: None, max_joint_total: 0 }
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct VerifyConfig {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub identities: Option<IdentityCheck>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub pde: Option<PdeCheck>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub conditional: Option<ConditionalCheck>,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct IdentityCheck {
    #[serde(default = "default_instances")]
    pub instances: u64,
    #[serde(default = "default_max_h")]
    pub max_h: usize,
    #[serde(default = "default_identity_tol")]
    pub tol: f64,
}

fn default_instances() -> u64 {
    1000
}

fn default_max_h() -> usize {
    6
}

fn default_identity_tol() -> f64 {
    1e-9
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Equation {
    /// First-order system for the densities jointly with the current velocity.
    System,
    /// Scalar equation for the inner density.
    Scalar,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PdeCheck {
    pub equation: Equation,
    pub t_range: [f64; 2],
    pub x_ranges: Vec<[f64; 2]>,
    #[serde(default = "default_box_points")]
    pub points: usize,
    pub spacings: Vec<f64>,
    #[serde(default = "default_order_range")]
    pub order_range: [f64; 2],
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub negative_control: Option<NegativeControl>,
}

fn default_box_points() -> usize {
    5
}

fn default_order_range() -> [f64; 2] {
    [1.8, 2.2]
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NegativeControl {
    /// Multi-index `(a_t, a_1, ..., a_D)` of the coefficient to perturb.
    pub index: Vec<u32>,
    pub factor: f64,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConditionalCheck {
    pub subset: Vec<usize>,
    #[serde(default = "default_samples")]
    pub conditioned_samples: u64,
    #[serde(default = "default_samples")]
    pub scaled_samples: u64,
    #[serde(default = "default_level")]
    pub level: f64,
}

fn default_samples() -> u64 {
    100_000
}

fn default_level() -> f64 {
    0.001
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CompareConfig {
    #[serde(default = "default_nodes")]
    pub nodes: usize,
    #[serde(default = "default_band")]
    pub band: f64,
    #[serde(default = "default_min_fraction")]
    pub min_fraction: f64,
}

fn default_nodes() -> usize {
    4
}

fn default_band() -> f64 {
    3.0
}

fn default_min_fraction() -> f64 {
    0.99
}

impl Default for CompareConfig {
    fn default() -> Self {
        CompareConfig { nodes: default_nodes(), band: default_band(), min_fraction: default_min_fraction() }
    }
}

/// A rejected config: the dotted path of the field and what is wrong with it.
#[derive(Clone, Debug, PartialEq)]
pub struct ConfigError {
    pub path: String,
    pub message: String,
}

impl ConfigError {
    pub fn new(path: impl Into<String>, message: impl Into<String>) -> Self {
        ConfigError { path: path.into(), message: message.into() }
    }
}

type Check = Result<(), ConfigError>;

/// Parses a config, reporting the path of the first field that fails to deserialize.
pub fn parse(text: &str) -> Result<ExperimentConfig, ConfigError> {
    let de = &mut serde_json::Deserializer::from_str(text);
    let cfg: ExperimentConfig = serde_path_to_error::deserialize(de).map_err(|e| {
        let path = e.path().to_string();
        ConfigError::new(if path == "." { String::new() } else { path }, e.into_inner().to_string())
    })?;
    cfg.validate()?;
    Ok(cfg)
}

fn finite(path: &str, v: f64) -> Check {
    if v.is_finite() {
        Ok(())
    } else {
        Err(ConfigError::new(path, "must be a finite number"))
    }
}

fn positive(path: &str, v: f64) -> Check {
    if v.is_finite() && v > 0.0 {
        Ok(())
    } else {
        Err(ConfigError::new(path, format!("must be positive and finite, got {v}")))
    }
}

fn probability_vector(path: &str, p: &[f64], n: usize) -> Check {
    if p.len() != n {
        return Err(ConfigError::new(path, format!("has {} entries for {n} velocities", p.len())));
    }
    for (i, &x) in p.iter().enumerate() {
        if !(x.is_finite() && x >= 0.0) {
            return Err(ConfigError::new(format!("{path}[{i}]"), format!("must be a probability, got {x}")));
        }
    }
    let s: f64 = p.iter().sum();
    if (s - 1.0).abs() > PROB_TOL {
        return Err(ConfigError::new(path, format!("sums to {s}; must be 1 within {PROB_TOL}")));
    }
    Ok(())
}

fn index_set(path: &str, set: &[usize], n: usize) -> Check {
    if set.is_empty() {
        return Err(ConfigError::new(path, "must not be empty"));
    }
    for (i, &h) in set.iter().enumerate() {
        if h >= n {
            return Err(ConfigError::new(format!("{path}[{i}]"), format!("velocity index {h} out of range 0..{n}")));
        }
    }
    if set.windows(2).any(|w| w[1] <= w[0]) {
        return Err(ConfigError::new(path, "indices must be strictly increasing"));
    }
    Ok(())
}

fn nodes(path: &str, nodes_name: &str, nodes: &[f64], values: &[f64]) -> Check {
    if nodes.is_empty() || nodes.len() != values.len() {
        return Err(ConfigError::new(path, format!("{nodes_name} and values must be non-empty and of equal length")));
    }
    if nodes[0] != 0.0 {
        return Err(ConfigError::new(format!("{path}.{nodes_name}[0]"), "must be 0"));
    }
    for (i, w) in nodes.windows(2).enumerate() {
        if !(w[1] > w[0]) || !w[1].is_finite() {
            return Err(ConfigError::new(format!("{path}.{nodes_name}[{}]", i + 1), "must be finite and increasing"));
        }
    }
    for (i, &v) in values.iter().enumerate() {
        if !(v.is_finite() && v >= 0.0) {
            return Err(ConfigError::new(format!("{path}.values[{i}]"), "must be finite and nonnegative"));
        }
    }
    Ok(())
}

impl ExperimentConfig {
    pub fn dim(&self) -> usize {
        self.model.velocities.first().map_or(0, |v| v.len())
    }

    pub fn count(&self) -> usize {
        self.model.velocities.len()
    }

    /// Structural checks; every failure names the field.
    pub fn validate(&self) -> Check {
        let m = &self.model;
        if m.velocities.is_empty() {
            return Err(ConfigError::new("model.velocities", "needs at least one velocity"));
        }
        let d = self.dim();
        if d == 0 {
            return Err(ConfigError::new("model.velocities[0]", "velocities need at least one coordinate"));
        }
        for (h, v) in m.velocities.iter().enumerate() {
            if v.len() != d {
                return Err(ConfigError::new(
                    format!("model.velocities[{h}]"),
                    format!("has {} coordinates, velocity 0 has {d}", v.len()),
                ));
            }
            for (i, &x) in v.iter().enumerate() {
                finite(&format!("model.velocities[{h}][{i}]"), x)?;
            }
        }
        let n = self.count();
        match &m.kernel {
            KernelConfig::Complete { p } => {
                probability_vector("model.kernel.p", p, n)?;
                if let Some(i) = p.iter().position(|&x| x <= 0.0) {
                    return Err(ConfigError::new(format!("model.kernel.p[{i}]"), "complete kernels need positive entries"));
                }
            }
            KernelConfig::CompleteUniform => {}
            KernelConfig::Cyclic { initial } => probability_vector("model.kernel.initial", initial, n)?,
            KernelConfig::Orthogonal { initial } => {
                probability_vector("model.kernel.initial", initial, n)?;
                if n != 4 {
                    return Err(ConfigError::new("model.velocities", "the orthogonal kernel needs exactly four velocities"));
                }
            }
            KernelConfig::General { initial, transition } => {
                probability_vector("model.kernel.initial", initial, n)?;
                if transition.len() != n {
                    return Err(ConfigError::new(
                        "model.kernel.transition",
                        format!("has {} rows for {n} velocities", transition.len()),
                    ));
                }
                for (j, row) in transition.iter().enumerate() {
                    probability_vector(&format!("model.kernel.transition[{j}]"), row, n)?;
                }
            }
        }
        match &m.clock {
            ClockConfig::Poisson { rate } => match rate {
                RateConfig::Constant { value } => {
                    if !(value.is_finite() && *value >= 0.0) {
                        return Err(ConfigError::new("model.clock.rate.value", "must be finite and nonnegative"));
                    }
                }
                RateConfig::PiecewiseConstant { breaks, values } => nodes("model.clock.rate", "breaks", breaks, values)?,
                RateConfig::PiecewiseLinear { times, values } => nodes("model.clock.rate", "times", times, values)?,
                RateConfig::Linear { slope } => {
                    if !(slope.is_finite() && *slope >= 0.0) {
                        return Err(ConfigError::new("model.clock.rate.slope", "must be finite and nonnegative"));
                    }
                }
            },
            ClockConfig::Renewal { laws } => {
                if laws.len() != n {
                    return Err(ConfigError::new("model.clock.laws", format!("has {} laws for {n} velocities", laws.len())));
                }
                for (h, l) in laws.iter().enumerate() {
                    let p = format!("model.clock.laws[{h}]");
                    match *l {
                        LawConfig::Exponential { rate } => positive(&format!("{p}.rate"), rate)?,
                        LawConfig::Gamma { shape, rate } => {
                            positive(&format!("{p}.shape"), shape)?;
                            positive(&format!("{p}.rate"), rate)?;
                        }
                        LawConfig::Deterministic { duration } => positive(&format!("{p}.duration"), duration)?,
                    }
                }
            }
        }
        let q = &self.query;
        if !(q.t.is_finite() && q.t >= 0.0) {
            return Err(ConfigError::new("query.t", "must be finite and nonnegative"));
        }
        for (k, x) in q.points.iter().enumerate() {
            if x.len() != d {
                return Err(ConfigError::new(format!("query.points[{k}]"), format!("has {} coordinates, expected {d}", x.len())));
            }
            for (i, &v) in x.iter().enumerate() {
                finite(&format!("query.points[{k}][{i}]"), v)?;
            }
        }
        if let Some(g) = &q.grid {
            if g.bins.len() != d {
                return Err(ConfigError::new("query.grid.bins", format!("needs {d} entries")));
            }
            if let Some(i) = g.bins.iter().position(|&b| b == 0) {
                return Err(ConfigError::new(format!("query.grid.bins[{i}]"), "must be positive"));
            }
            match (&g.lower, &g.upper) {
                (Some(lo), Some(hi)) => {
                    if lo.len() != d {
                        return Err(ConfigError::new("query.grid.lower", format!("needs {d} entries")));
                    }
                    if hi.len() != d {
                        return Err(ConfigError::new("query.grid.upper", format!("needs {d} entries")));
                    }
                    for i in 0..d {
                        if !(lo[i].is_finite() && hi[i].is_finite() && hi[i] > lo[i]) {
                            return Err(ConfigError::new(format!("query.grid.upper[{i}]"), "must exceed the lower bound"));
                        }
                    }
                }
                (None, None) => {}
                (Some(_), None) => return Err(ConfigError::new("query.grid.upper", "required when lower is given")),
                (None, Some(_)) => return Err(ConfigError::new("query.grid.lower", "required when upper is given")),
            }
        }
        if let Some(f) = &q.face {
            index_set("query.face", f, n)?;
        }
        if let Some(c) = &q.counts {
            if c.len() != n {
                return Err(ConfigError::new("query.counts", format!("has {} entries for {n} velocities", c.len())));
            }
        }
        if let Some(k) = q.terminal {
            if k >= n {
                return Err(ConfigError::new("query.terminal", format!("velocity index {k} out of range 0..{n}")));
            }
            if q.counts.is_none() {
                return Err(ConfigError::new("query.terminal", "only meaningful together with query.counts"));
            }
        }
        let r = &self.run;
        if !(r.tol.is_finite() && r.tol > 0.0) {
            return Err(ConfigError::new("run.tol", "must be positive"));
        }
        if r.workers == Some(0) {
            return Err(ConfigError::new("run.workers", "must be at least 1"));
        }
        if let Some(v) = &self.verify {
            if let Some(i) = &v.identities {
                if i.max_h == 0 {
                    return Err(ConfigError::new("verify.identities.max_h", "must be at least 1"));
                }
                positive("verify.identities.tol", i.tol)?;
            }
            if let Some(p) = &v.pde {
                if p.x_ranges.len() != d {
                    return Err(ConfigError::new("verify.pde.x_ranges", format!("needs {d} ranges")));
                }
                if !(p.t_range[1] > p.t_range[0] && p.t_range[0] > 0.0) {
                    return Err(ConfigError::new("verify.pde.t_range", "needs 0 < lower < upper"));
                }
                for (i, r) in p.x_ranges.iter().enumerate() {
                    if !(r[1] >= r[0] && r[0].is_finite() && r[1].is_finite()) {
                        return Err(ConfigError::new(format!("verify.pde.x_ranges[{i}]"), "needs lower <= upper"));
                    }
                }
                if p.spacings.len() < 2 {
                    return Err(ConfigError::new("verify.pde.spacings", "needs at least two spacings"));
                }
                for (i, w) in p.spacings.iter().enumerate() {
                    positive(&format!("verify.pde.spacings[{i}]"), *w)?;
                }
                if p.spacings.windows(2).any(|w| w[1] >= w[0]) {
                    return Err(ConfigError::new("verify.pde.spacings", "must be decreasing"));
                }
                if let Some(nc) = &p.negative_control {
                    if nc.index.len() != d + 1 {
                        return Err(ConfigError::new("verify.pde.negative_control.index", format!("needs {} entries", d + 1)));
                    }
                    finite("verify.pde.negative_control.factor", nc.factor)?;
                }
            }
            if let Some(c) = &v.conditional {
                index_set("verify.conditional.subset", &c.subset, n)?;
                if !(c.level > 0.0 && c.level < 1.0) {
                    return Err(ConfigError::new("verify.conditional.level", "must lie in (0, 1)"));
                }
            }
        }
        if let Some(c) = &self.compare {
            if c.nodes == 0 {
                return Err(ConfigError::new("compare.nodes", "must be positive"));
            }
            positive("compare.band", c.band)?;
            if !(0.0..=1.0).contains(&c.min_fraction) {
                return Err(ConfigError::new("compare.min_fraction", "must lie in [0, 1]"));
            }
        }
        Ok(())
    }

    /// Builds the motion; errors are reported against the model fields.
    pub fn build_model(&self) -> Result<MotionModel, ConfigError> {
        let m = &self.model;
        let n = self.count();
        let vs = VelocitySet::new(&m.velocities).map_err(|e| ConfigError::new("model.velocities", e.to_string()))?;
        let kernel = match &m.kernel {
            KernelConfig::Complete { p } => SwitchKernel::complete(p.clone()),
            KernelConfig::CompleteUniform => Ok(SwitchKernel::complete_uniform(n)),
            KernelConfig::Cyclic { initial } => SwitchKernel::cyclic(initial.clone()),
            KernelConfig::Orthogonal { initial } => SwitchKernel::orthogonal(initial.clone()),
            KernelConfig::General { initial, transition } => SwitchKernel::general(initial.clone(), transition.clone()),
        }
        .map_err(|e| ConfigError::new("model.kernel", e.to_string()))?;
        let clock = match &m.clock {
            ClockConfig::Poisson { rate } => EventClock::Poisson(match rate {
                RateConfig::Constant { value } => RateFunction::Constant(*value),
                RateConfig::PiecewiseConstant { breaks, values } => {
                    RateFunction::PiecewiseConstant { breaks: breaks.clone(), values: values.clone() }
                }
                RateConfig::PiecewiseLinear { times, values } => {
                    RateFunction::PiecewiseLinear { times: times.clone(), values: values.clone() }
                }
                // Exact on [0, t]; the thinning sampler needs a rate bounded there.
                RateConfig::Linear { slope } => {
                    let end = if self.query.t > 0.0 { self.query.t } else { 1.0 };
                    RateFunction::PiecewiseLinear { times: vec![0.0, end], values: vec![0.0, slope * end] }
                }
            }),
            ClockConfig::Renewal { laws } => EventClock::Renewal(
                WaitingTimeModel::new(
                    laws.iter()
                        .map(|l| match *l {
                            LawConfig::Exponential { rate } => WaitingLaw::Exponential { rate },
                            LawConfig::Gamma { shape, rate } => WaitingLaw::Gamma { shape, rate },
                            LawConfig::Deterministic { duration } => WaitingLaw::Deterministic { duration },
                        })
                        .collect(),
                )
                .map_err(|e| ConfigError::new("model.clock.laws", e.to_string()))?,
            ),
        };
        MotionModel::new(vs, kernel, clock).map_err(|e| ConfigError::new("model", e.to_string()))
    }

    /// Histogram grid: the configured one, or the bounding box of the support.
    pub fn grid(&self, model: &MotionModel) -> Result<Option<GridSpec>, ConfigError> {
        let Some(g) = &self.query.grid else { return Ok(None) };
        let (lower, upper) = match (&g.lower, &g.upper) {
            (Some(lo), Some(hi)) => (lo.clone(), hi.clone()),
            _ => {
                let b = GridSpec::bounding_box(model.velocities(), self.query.t, 1);
                (b.lower, b.upper)
            }
        };
        GridSpec::new(lower, upper, g.bins.clone()).map(Some).map_err(|e| ConfigError::new("query.grid", e.to_string()))
    }

    /// Compact JSON of the effective config, worker count excluded.
    pub fn header(&self) -> String {
        serde_json::to_string(self).expect("config serializes")
    }
}
