//! A motion model: velocities, switching kernel and the clock producing switch times.

use serde_json::{json, Value};

use crate::error::{Error, Result};
use crate::geometry::VelocitySet;
use crate::stochastic::{RateFunction, SwitchKernel, WaitingLaw, WaitingTimeModel};

/// Source of the switching events.
#[derive(Clone, Debug)]
pub enum EventClock {
    /// Each displacement with velocity `h` lasts an independent draw of law `h`.
    Renewal(WaitingTimeModel),
    /// Switches at the events of a (possibly non-homogeneous) Poisson process.
    Poisson(RateFunction),
}

#[derive(Clone, Debug)]
pub struct MotionModel {
    velocities: VelocitySet,
    kernel: SwitchKernel,
    clock: EventClock,
}

impl MotionModel {
    pub fn new(velocities: VelocitySet, kernel: SwitchKernel, clock: EventClock) -> Result<Self> {
        let n = velocities.count();
        if kernel.len() != n {
            return Err(Error::InvalidModel(format!("kernel has {} states for {n} velocities", kernel.len())));
        }
        match &clock {
            EventClock::Renewal(w) if w.len() != n => {
                return Err(Error::InvalidModel(format!("{} waiting laws for {n} velocities", w.len())));
            }
            EventClock::Poisson(r) => r.validate()?,
            _ => {}
        }
        Ok(MotionModel { velocities, kernel, clock })
    }

    /// Complete motion with switch law `p` driven by a Poisson process of rate `lambda`.
    pub fn complete(velocities: VelocitySet, p: Vec<f64>, lambda: f64) -> Result<Self> {
        Self::new(velocities, SwitchKernel::complete(p)?, EventClock::Poisson(RateFunction::Constant(lambda)))
    }

    pub fn complete_canonical(d: usize, p: Vec<f64>, lambda: f64) -> Result<Self> {
        Self::complete(VelocitySet::canonical(d), p, lambda)
    }

    /// Cyclic motion with exponential waits of rate `rates[h]` for velocity `h`.
    pub fn cyclic(velocities: VelocitySet, p: Vec<f64>, rates: &[f64]) -> Result<Self> {
        Self::new(
            velocities,
            SwitchKernel::cyclic(p)?,
            EventClock::Renewal(WaitingTimeModel::exponential(rates)?),
        )
    }

    pub fn velocities(&self) -> &VelocitySet {
        &self.velocities
    }

    pub fn kernel(&self) -> &SwitchKernel {
        &self.kernel
    }

    pub fn clock(&self) -> &EventClock {
        &self.clock
    }

    pub fn dim(&self) -> usize {
        self.velocities.dim()
    }

    pub fn count(&self) -> usize {
        self.velocities.count()
    }

    /// Same switching statistics, other velocities.
    pub fn with_velocities(&self, velocities: VelocitySet) -> Result<Self> {
        Self::new(velocities, self.kernel.clone(), self.clock.clone())
    }

    pub fn with_clock(&self, clock: EventClock) -> Result<Self> {
        Self::new(self.velocities.clone(), self.kernel.clone(), clock)
    }

    /// Per-velocity waiting laws; a homogeneous Poisson clock becomes exponential waits.
    pub fn waiting_model(&self) -> Result<WaitingTimeModel> {
        match &self.clock {
            EventClock::Renewal(w) => {
                w.require_densities()?;
                Ok(w.clone())
            }
            EventClock::Poisson(RateFunction::Constant(l)) if *l > 0.0 => {
                WaitingTimeModel::new(vec![WaitingLaw::Exponential { rate: *l }; self.count()])
            }
            EventClock::Poisson(_) => Err(Error::Unsupported(
                "density formulas need exponential or renewal waiting times with a positive homogeneous rate".into(),
            )),
        }
    }

    pub fn exponential_rates(&self) -> Option<Vec<f64>> {
        self.waiting_model().ok()?.exponential_rates()
    }

    /// The rate when every velocity has the same exponential waiting law.
    pub fn common_rate(&self) -> Option<f64> {
        let r = self.exponential_rates()?;
        if r.iter().all(|&x| x == r[0]) {
            Some(r[0])
        } else {
            None
        }
    }

    /// JSON description used in output metadata.
    pub fn describe(&self) -> Value {
        let v: Vec<Vec<f64>> = (0..self.count()).map(|h| self.velocities.velocity(h).iter().copied().collect()).collect();
        let clock = match &self.clock {
            EventClock::Renewal(w) => json!({
                "kind": "renewal",
                "laws": w.laws().iter().map(|l| match *l {
                    WaitingLaw::Exponential { rate } => json!({"law": "exponential", "rate": rate}),
                    WaitingLaw::Gamma { shape, rate } => json!({"law": "gamma", "shape": shape, "rate": rate}),
                    WaitingLaw::Deterministic { duration } => json!({"law": "deterministic", "duration": duration}),
                }).collect::<Vec<_>>(),
            }),
            EventClock::Poisson(r) => match r {
                RateFunction::Constant(l) => json!({"kind": "poisson", "rate": {"kind": "constant", "value": l}}),
                RateFunction::PiecewiseConstant { breaks, values } => json!({"kind": "poisson", "rate": {"kind": "piecewise_constant", "breaks": breaks, "values": values}}),
                RateFunction::PiecewiseLinear { times, values } => json!({"kind": "poisson", "rate": {"kind": "piecewise_linear", "times": times, "values": values}}),
                RateFunction::Custom(_) => json!({"kind": "poisson", "rate": {"kind": "custom"}}),
            },
        };
        json!({
            "velocities": v,
            "kernel": {"kind": self.kernel.kind(), "initial": self.kernel.initial(), "transition": self.kernel.transition()},
            "clock": clock,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn size_mismatch_rejected() {
        let r = MotionModel::complete(VelocitySet::canonical(2), vec![0.5, 0.5], 1.0);
        assert!(matches!(r, Err(Error::InvalidModel(_))));
    }

    #[test]
    fn poisson_constant_becomes_exponential_waits() {
        let m = MotionModel::complete_canonical(1, vec![0.5, 0.5], 2.0).unwrap();
        assert_eq!(m.exponential_rates(), Some(vec![2.0, 2.0]));
        assert_eq!(m.common_rate(), Some(2.0));
        let nh = m.with_clock(EventClock::Poisson(RateFunction::linear(2.0))).unwrap();
        assert!(matches!(nh.waiting_model(), Err(Error::Unsupported(_))));
    }
}
