use std::fmt;
use std::sync::Arc;

use rand::Rng;
use rand_distr::{Distribution, Exp};

use crate::error::{Error, Result};
use crate::quadrature::adaptive_gk;

/// A user-supplied rate `s -> lambda(s)` with an optional global upper bound.
#[derive(Clone)]
pub struct CustomRate {
    f: Arc<dyn Fn(f64) -> f64 + Send + Sync>,
    bound: Option<f64>,
}

impl CustomRate {
    pub fn new(f: impl Fn(f64) -> f64 + Send + Sync + 'static, bound: Option<f64>) -> Self {
        CustomRate { f: Arc::new(f), bound }
    }
}

impl fmt::Debug for CustomRate {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("CustomRate").field("bound", &self.bound).finish_non_exhaustive()
    }
}

/// Intensity `lambda(s) >= 0` of the Poisson process driving the switches.
#[derive(Clone, Debug)]
pub enum RateFunction {
    Constant(f64),
    /// `values[i]` on `[breaks[i], breaks[i+1])`, the last value extends to infinity; `breaks[0] = 0`.
    PiecewiseConstant { breaks: Vec<f64>, values: Vec<f64> },
    /// Linear interpolation of `(times[i], values[i])`, constant after the last node; `times[0] = 0`.
    PiecewiseLinear { times: Vec<f64>, values: Vec<f64> },
    Custom(CustomRate),
}

fn check_nodes(nodes: &[f64], values: &[f64], what: &str) -> Result<()> {
    if nodes.is_empty() || nodes.len() != values.len() {
        return Err(Error::InvalidModel(format!("{what}: need equally many nodes and values")));
    }
    if nodes[0] != 0.0 {
        return Err(Error::InvalidModel(format!("{what}: first node must be 0")));
    }
    if nodes.windows(2).any(|w| !(w[1] > w[0])) || nodes.iter().any(|x| !x.is_finite()) {
        return Err(Error::InvalidModel(format!("{what}: nodes must be finite and strictly increasing")));
    }
    if values.iter().any(|v| !v.is_finite() || *v < 0.0) {
        return Err(Error::InvalidModel(format!("{what}: rates must be finite and nonnegative")));
    }
    Ok(())
}

impl RateFunction {
    /// `lambda(s) = slope * s`.
    pub fn linear(slope: f64) -> Self {
        RateFunction::Custom(CustomRate::new(move |s| slope * s.max(0.0), None))
    }

    pub fn validate(&self) -> Result<()> {
        match self {
            RateFunction::Constant(l) if !(l.is_finite() && *l >= 0.0) => {
                Err(Error::InvalidModel("rate must be finite and nonnegative".into()))
            }
            RateFunction::Constant(_) | RateFunction::Custom(_) => Ok(()),
            RateFunction::PiecewiseConstant { breaks, values } => check_nodes(breaks, values, "piecewise-constant rate"),
            RateFunction::PiecewiseLinear { times, values } => check_nodes(times, values, "piecewise-linear rate"),
        }
    }

    pub fn as_constant(&self) -> Option<f64> {
        match self {
            RateFunction::Constant(l) => Some(*l),
            _ => None,
        }
    }

    pub fn rate(&self, s: f64) -> f64 {
        if s < 0.0 {
            return 0.0;
        }
        match self {
            RateFunction::Constant(l) => *l,
            RateFunction::PiecewiseConstant { breaks, values } => {
                let i = breaks.partition_point(|&b| b <= s);
                values[i.saturating_sub(1)]
            }
            RateFunction::PiecewiseLinear { times, values } => {
                let i = times.partition_point(|&b| b <= s);
                if i >= times.len() {
                    values[values.len() - 1]
                } else {
                    let (t0, t1) = (times[i - 1], times[i]);
                    let (v0, v1) = (values[i - 1], values[i]);
                    v0 + (v1 - v0) * (s - t0) / (t1 - t0)
                }
            }
            RateFunction::Custom(c) => (c.f)(s).max(0.0),
        }
    }

    /// `Lambda(t) = int_0^t lambda(s) ds`.
    pub fn cumulative(&self, t: f64) -> f64 {
        if t <= 0.0 {
            return 0.0;
        }
        match self {
            RateFunction::Constant(l) => l * t,
            RateFunction::PiecewiseConstant { breaks, values } => {
                let mut acc = 0.0;
                for i in 0..breaks.len() {
                    let a = breaks[i];
                    if a >= t {
                        break;
                    }
                    let b = breaks.get(i + 1).copied().unwrap_or(f64::INFINITY).min(t);
                    acc += values[i] * (b - a);
                }
                acc
            }
            RateFunction::PiecewiseLinear { times, .. } => {
                let mut acc = 0.0;
                for i in 0..times.len() {
                    let a = times[i];
                    if a >= t {
                        break;
                    }
                    let b = times.get(i + 1).copied().unwrap_or(f64::INFINITY).min(t);
                    acc += 0.5 * (self.rate(a) + self.rate(b)) * (b - a);
                }
                acc
            }
            RateFunction::Custom(c) => adaptive_gk(&|s| (c.f)(s).max(0.0), 0.0, t, 1e-15, 1e-13).value,
        }
    }

    /// Pieces `(a, b, bound)` covering `[0, t]` with `lambda <= bound` on each.
    pub fn envelope(&self, t: f64) -> Result<Vec<(f64, f64, f64)>> {
        if t <= 0.0 {
            return Ok(Vec::new());
        }
        let pieces = |nodes: &[f64], bound: &dyn Fn(usize, f64, f64) -> f64| {
            let mut out = Vec::new();
            for i in 0..nodes.len() {
                let a = nodes[i];
                if a >= t {
                    break;
                }
                let b = nodes.get(i + 1).copied().unwrap_or(f64::INFINITY).min(t);
                out.push((a, b, bound(i, a, b)));
            }
            out
        };
        match self {
            RateFunction::Constant(l) => Ok(vec![(0.0, t, *l)]),
            RateFunction::PiecewiseConstant { breaks, values } => Ok(pieces(breaks, &|i, _, _| values[i])),
            RateFunction::PiecewiseLinear { times, .. } => {
                Ok(pieces(times, &|_, a, b| self.rate(a).max(self.rate(b))))
            }
            RateFunction::Custom(c) => match c.bound {
                Some(m) if m.is_finite() => Ok(vec![(0.0, t, m)]),
                _ => Err(Error::UnboundedRate(t)),
            },
        }
    }

    /// `s -> alpha * lambda(s)`.
    pub fn scaled(&self, alpha: f64) -> RateFunction {
        match self {
            RateFunction::Constant(l) => RateFunction::Constant(alpha * l),
            RateFunction::PiecewiseConstant { breaks, values } => RateFunction::PiecewiseConstant {
                breaks: breaks.clone(),
                values: values.iter().map(|v| alpha * v).collect(),
            },
            RateFunction::PiecewiseLinear { times, values } => RateFunction::PiecewiseLinear {
                times: times.clone(),
                values: values.iter().map(|v| alpha * v).collect(),
            },
            RateFunction::Custom(c) => {
                let f = c.f.clone();
                RateFunction::Custom(CustomRate::new(move |s| alpha * f(s), c.bound.map(|b| alpha * b)))
            }
        }
    }
}

/// Event times of the Poisson process with intensity `rate` on `(0, t]`, by thinning.
pub fn sample_arrivals<R: Rng + ?Sized>(rate: &RateFunction, t: f64, rng: &mut R) -> Result<Vec<f64>> {
    let mut out = Vec::new();
    sample_arrivals_into(rate, t, rng, &mut out)?;
    Ok(out)
}

/// As [`sample_arrivals`], reusing `out`.
pub fn sample_arrivals_into<R: Rng + ?Sized>(
    rate: &RateFunction,
    t: f64,
    rng: &mut R,
    out: &mut Vec<f64>,
) -> Result<()> {
    out.clear();
    let constant = rate.as_constant().is_some();
    for (a, b, bound) in rate.envelope(t)? {
        if !(bound > 0.0) {
            continue;
        }
        let gap = Exp::new(bound).map_err(|_| Error::UnboundedRate(t))?;
        let mut s = a;
        loop {
            s += gap.sample(rng);
            if s > b {
                break;
            }
            if constant || rng.random::<f64>() * bound <= rate.rate(s) {
                out.push(s);
            }
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::stochastic::replica_rng;

    #[test]
    fn cumulative_forms() {
        let pwc = RateFunction::PiecewiseConstant { breaks: vec![0.0, 1.0], values: vec![1.0, 3.0] };
        assert!((pwc.cumulative(2.0) - 4.0).abs() < 1e-15);
        let pwl = RateFunction::PiecewiseLinear { times: vec![0.0, 1.0], values: vec![0.0, 2.0] };
        assert!((pwl.cumulative(1.0) - 1.0).abs() < 1e-15);
        assert!((pwl.cumulative(0.5) - 0.25).abs() < 1e-15);
        assert!((RateFunction::linear(2.0).cumulative(1.0) - 1.0).abs() < 1e-13);
    }

    #[test]
    fn zero_rate_gives_no_events() {
        let mut rng = replica_rng(3, 0);
        for _ in 0..100 {
            assert!(sample_arrivals(&RateFunction::Constant(0.0), 5.0, &mut rng).unwrap().is_empty());
        }
    }

    #[test]
    fn unbounded_custom_rate_rejected() {
        let mut rng = replica_rng(3, 0);
        assert_eq!(sample_arrivals(&RateFunction::linear(2.0), 1.0, &mut rng), Err(Error::UnboundedRate(1.0)));
    }

    #[test]
    fn arrivals_are_increasing_in_horizon() {
        let rate = RateFunction::PiecewiseLinear { times: vec![0.0, 1.0], values: vec![0.0, 2.0] };
        let mut rng = replica_rng(5, 1);
        for _ in 0..1000 {
            let a = sample_arrivals(&rate, 1.0, &mut rng).unwrap();
            assert!(a.windows(2).all(|w| w[0] < w[1]));
            assert!(a.iter().all(|&s| s > 0.0 && s <= 1.0));
        }
    }
}
