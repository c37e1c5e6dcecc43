//! Randomness sources: waiting-time laws, switching kernels, rate functions
//! and reproducible random streams.

mod kernel;
mod rate;
mod rng;
mod waiting;

pub use kernel::{AllocationShells, KernelKind, SwitchKernel};
pub use rate::{sample_arrivals, sample_arrivals_into, CustomRate, RateFunction};
pub use rng::{replica_rng, ReplicaRng};
pub use waiting::{WaitingLaw, WaitingTimeModel};
