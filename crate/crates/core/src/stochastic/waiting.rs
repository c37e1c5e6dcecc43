use rand::Rng;
use rand_distr::{Distribution, Exp, Gamma};
use statrs::function::gamma::{gamma_lr, gamma_ur, ln_gamma};

use crate::error::{Error, Result};
use crate::special::poisson_pmf;

/// Law of the time spent in one displacement with a given velocity.
#[derive(Clone, Debug, PartialEq)]
pub enum WaitingLaw {
    Exponential { rate: f64 },
    Gamma { shape: f64, rate: f64 },
    Deterministic { duration: f64 },
}

impl WaitingLaw {
    pub fn validate(&self) -> Result<()> {
        let ok = match *self {
            WaitingLaw::Exponential { rate } => rate > 0.0 && rate.is_finite(),
            WaitingLaw::Gamma { shape, rate } => shape > 0.0 && rate > 0.0 && shape.is_finite() && rate.is_finite(),
            WaitingLaw::Deterministic { duration } => duration > 0.0 && duration.is_finite(),
        };
        if ok {
            Ok(())
        } else {
            Err(Error::InvalidModel(format!("waiting law parameters must be positive and finite: {self:?}")))
        }
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        match *self {
            WaitingLaw::Exponential { rate } => Exp::new(rate).expect("validated").sample(rng),
            WaitingLaw::Gamma { shape, rate } => Gamma::new(shape, 1.0 / rate).expect("validated").sample(rng),
            WaitingLaw::Deterministic { duration } => duration,
        }
    }

    pub fn mean(&self) -> f64 {
        match *self {
            WaitingLaw::Exponential { rate } => 1.0 / rate,
            WaitingLaw::Gamma { shape, rate } => shape / rate,
            WaitingLaw::Deterministic { duration } => duration,
        }
    }

    /// Shape and rate of the `n`-fold sum when it is Gamma distributed.
    fn sum_gamma(&self, n: u64) -> Option<(f64, f64)> {
        match *self {
            WaitingLaw::Exponential { rate } => Some((n as f64, rate)),
            WaitingLaw::Gamma { shape, rate } => Some((n as f64 * shape, rate)),
            WaitingLaw::Deterministic { .. } => None,
        }
    }

    /// Density of `W_1 + ... + W_n` at `s`.
    pub fn sum_density(&self, n: u64, s: f64) -> Result<f64> {
        if n == 0 {
            return Err(Error::InvalidModel("density of an empty sum".into()));
        }
        let Some((a, rate)) = self.sum_gamma(n) else {
            return Err(Error::AtomicLaw(usize::MAX));
        };
        if s < 0.0 {
            return Ok(0.0);
        }
        if s == 0.0 {
            return Ok(if a < 1.0 {
                f64::INFINITY
            } else if a == 1.0 {
                rate
            } else {
                0.0
            });
        }
        Ok((a * rate.ln() + (a - 1.0) * s.ln() - rate * s - ln_gamma(a)).exp())
    }

    /// `P{W_1 + ... + W_n <= s}`.
    pub fn sum_cdf(&self, n: u64, s: f64) -> f64 {
        if n == 0 {
            return if s >= 0.0 { 1.0 } else { 0.0 };
        }
        if s <= 0.0 {
            return 0.0;
        }
        match self.sum_gamma(n) {
            Some((a, rate)) => gamma_lr(a, rate * s),
            None => {
                let WaitingLaw::Deterministic { duration } = *self else { unreachable!() };
                if n as f64 * duration <= s {
                    1.0
                } else {
                    0.0
                }
            }
        }
    }

    /// `P{N(s) = n}` for the renewal process with these inter-arrival times.
    pub fn counting_pmf(&self, s: f64, n: u64) -> f64 {
        if s < 0.0 {
            return 0.0;
        }
        match *self {
            WaitingLaw::Exponential { rate } => poisson_pmf(rate * s, n),
            WaitingLaw::Gamma { shape, rate } => {
                if s == 0.0 {
                    return if n == 0 { 1.0 } else { 0.0 };
                }
                let x = rate * s;
                let a1 = shape * (n + 1) as f64;
                if n == 0 {
                    return gamma_ur(a1, x);
                }
                let a0 = shape * n as f64;
                // Subtract whichever tails are small to limit cancellation.
                let lower0 = gamma_lr(a0, x);
                if lower0 < 0.5 {
                    (lower0 - gamma_lr(a1, x)).max(0.0)
                } else {
                    (gamma_ur(a1, x) - gamma_ur(a0, x)).max(0.0)
                }
            }
            WaitingLaw::Deterministic { .. } => (self.sum_cdf(n, s) - self.sum_cdf(n + 1, s)).max(0.0),
        }
    }
}

/// One waiting law per velocity index.
#[derive(Clone, Debug, PartialEq)]
pub struct WaitingTimeModel {
    laws: Vec<WaitingLaw>,
}

impl WaitingTimeModel {
    pub fn new(laws: Vec<WaitingLaw>) -> Result<Self> {
        if laws.is_empty() {
            return Err(Error::InvalidModel("no waiting laws".into()));
        }
        for l in &laws {
            l.validate()?;
        }
        Ok(WaitingTimeModel { laws })
    }

    pub fn exponential(rates: &[f64]) -> Result<Self> {
        Self::new(rates.iter().map(|&rate| WaitingLaw::Exponential { rate }).collect())
    }

    pub fn laws(&self) -> &[WaitingLaw] {
        &self.laws
    }

    pub fn law(&self, h: usize) -> &WaitingLaw {
        &self.laws[h]
    }

    pub fn len(&self) -> usize {
        self.laws.len()
    }

    pub fn is_empty(&self) -> bool {
        self.laws.is_empty()
    }

    /// Exponential rates when every law is exponential.
    pub fn exponential_rates(&self) -> Option<Vec<f64>> {
        self.laws
            .iter()
            .map(|l| match *l {
                WaitingLaw::Exponential { rate } => Some(rate),
                _ => None,
            })
            .collect()
    }

    /// Density of the sum of `n` waiting times of velocity `h` at `s`.
    pub fn waiting_density(&self, h: usize, n: u64, s: f64) -> Result<f64> {
        self.laws[h].sum_density(n, s).map_err(|e| match e {
            Error::AtomicLaw(_) => Error::AtomicLaw(h),
            e => e,
        })
    }

    /// `P{N_(h)(s) = n}`.
    pub fn counting_tail(&self, h: usize, s: f64, n: u64) -> f64 {
        self.laws[h].counting_pmf(s, n)
    }

    /// Fails with `AtomicLaw` when some velocity has deterministic waits.
    pub fn require_densities(&self) -> Result<()> {
        match self.laws.iter().position(|l| matches!(l, WaitingLaw::Deterministic { .. })) {
            Some(h) => Err(Error::AtomicLaw(h)),
            None => Ok(()),
        }
    }
}
