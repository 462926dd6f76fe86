//! Behavioral model of a hardware stochastic online scheduler for
//! heterogeneous machines, with reference oracles, baseline policies, a
//! workload generator and an experiment harness.

pub mod baselines;
pub mod config;
pub mod domain;
pub mod engine;
pub mod machine;
pub mod metrics;
pub mod montecarlo;
pub mod numerics;
pub mod oracle;
pub mod quantstudy;
pub mod rng;
pub mod sim;
pub mod trace;
pub mod workload;

pub use domain::{Job, MachineProfile, MachineType, Nature, Quality};
pub use engine::{Scheduler, SchedulerConfig};
pub use numerics::{NumericFormat, Scalar, Scheme};
pub use trace::{EventKind, SimTrace, TraceEvent};
