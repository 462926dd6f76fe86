//! Drives a policy over a job trace until every job has completed.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::baselines::{BaselinePolicy, BaselineState};
use crate::domain::Job;
use crate::engine::{EngineError, Scheduler, SchedulerConfig};
use crate::machine::{ExecQueue, ServiceModel};
use crate::trace::{EventKind, SimTrace};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Policy {
    Sos,
    Rr,
    Greedy,
    Wsrr,
    Wsg,
}

impl Policy {
    pub const ALL: [Policy; 5] = [
        Policy::Sos,
        Policy::Rr,
        Policy::Greedy,
        Policy::Wsrr,
        Policy::Wsg,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Policy::Sos => "sos",
            Policy::Rr => "rr",
            Policy::Greedy => "greedy",
            Policy::Wsrr => "wsrr",
            Policy::Wsg => "wsg",
        }
    }

    pub fn baseline(self) -> Option<BaselinePolicy> {
        match self {
            Policy::Sos => None,
            Policy::Rr => Some(BaselinePolicy::Rr),
            Policy::Greedy => Some(BaselinePolicy::Greedy),
            Policy::Wsrr => Some(BaselinePolicy::Wsrr),
            Policy::Wsg => Some(BaselinePolicy::Wsg),
        }
    }
}

impl fmt::Display for Policy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Policy {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Self::ALL
            .into_iter()
            .find(|p| p.name().eq_ignore_ascii_case(s))
            .ok_or_else(|| format!("unknown policy `{s}` (expected sos, rr, greedy, wsrr or wsg)"))
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SimOptions {
    pub scheduler: SchedulerConfig,
    /// Perturb actual processing times around the EPT.
    pub noise: bool,
    pub noise_seed: u64,
    /// Abort if the run has not drained after this many ticks.
    pub max_ticks: u64,
}

impl SimOptions {
    pub fn new(scheduler: SchedulerConfig) -> Self {
        SimOptions {
            scheduler,
            noise: false,
            noise_seed: 0,
            max_ticks: 1 << 32,
        }
    }
}

#[derive(Debug, Error)]
pub enum SimError {
    #[error(transparent)]
    Engine(#[from] EngineError),
    #[error("job {0} arrives out of order")]
    Unordered(u64),
    #[error("job {job} has {got} EPT entries, expected {expected}")]
    EptArity { job: u64, got: usize, expected: usize },
    #[error("run did not drain within {0} ticks")]
    Timeout(u64),
}

fn check_jobs(jobs: &[Job], machines: usize) -> Result<(), SimError> {
    for (i, job) in jobs.iter().enumerate() {
        if job.ept.len() != machines {
            return Err(SimError::EptArity {
                job: job.id,
                got: job.ept.len(),
                expected: machines,
            });
        }
        if i > 0 && job.created_at < jobs[i - 1].created_at {
            return Err(SimError::Unordered(job.id));
        }
    }
    Ok(())
}

/// Runs `policy` over `jobs` (sorted by arrival) and returns the event log.
pub fn run(policy: Policy, jobs: &[Job], options: &SimOptions) -> Result<SimTrace, SimError> {
    let machines = options.scheduler.machines;
    check_jobs(jobs, machines)?;
    match policy.baseline() {
        None => run_sos(jobs, options),
        Some(b) => run_baseline(b, jobs, options),
    }
}

/// Index range of the jobs created at `tick`, starting from `next`.
fn arrivals(jobs: &[Job], next: usize, tick: u64) -> usize {
    jobs[next..]
        .iter()
        .take_while(|j| j.created_at == tick)
        .count()
}

fn run_sos(jobs: &[Job], options: &SimOptions) -> Result<SimTrace, SimError> {
    let machines = options.scheduler.machines;
    let mut scheduler = Scheduler::new(options.scheduler)?;
    let mut queues = vec![ExecQueue::new(); machines];
    let mut service = ServiceModel::new(options.noise, options.noise_seed);
    let mut trace = SimTrace::new(machines, Policy::Sos.name());
    let by_id: std::collections::HashMap<u64, &Job> = jobs.iter().map(|j| (j.id, j)).collect();
    let mut next = 0;
    let mut tick = 0u64;

    loop {
        let count = arrivals(jobs, next, tick);
        let batch = &jobs[next..next + count];
        next += count;
        for job in batch {
            trace.push(tick, EventKind::Created, job.id, None);
        }
        let report = scheduler.tick(batch.iter().cloned())?;
        for r in &report.released {
            trace.push(tick, EventKind::Released, r.job_id, Some(r.machine));
            trace.push(tick, EventKind::Enqueued, r.job_id, Some(r.machine));
            let job = by_id[&r.job_id];
            queues[r.machine].enqueue(job, r.machine, &mut service);
        }
        if let Some(a) = report.assigned {
            trace.push(tick, EventKind::Admitted, a.job_id, None);
            trace.push(tick, EventKind::Assigned, a.job_id, Some(a.machine));
        }
        for (i, q) in queues.iter_mut().enumerate() {
            if let Some(done) = q.advance() {
                trace.push(tick, EventKind::Completed, done.job_id, Some(i));
            }
        }
        if next == jobs.len() && scheduler.is_idle() && queues.iter().all(ExecQueue::is_idle) {
            return Ok(trace);
        }
        tick += 1;
        if tick >= options.max_ticks {
            return Err(SimError::Timeout(options.max_ticks));
        }
    }
}

fn run_baseline(
    policy: BaselinePolicy,
    jobs: &[Job],
    options: &SimOptions,
) -> Result<SimTrace, SimError> {
    let machines = options.scheduler.machines;
    let mut state = BaselineState::new(policy, machines);
    let mut service = ServiceModel::new(options.noise, options.noise_seed);
    let mut trace = SimTrace::new(machines, policy.name());
    let mut fifo = std::collections::VecDeque::new();
    let mut next = 0;
    let mut tick = 0u64;

    loop {
        let count = arrivals(jobs, next, tick);
        for job in &jobs[next..next + count] {
            trace.push(tick, EventKind::Created, job.id, None);
            fifo.push_back(job);
        }
        next += count;
        if let Some(job) = fifo.pop_front() {
            let m = state.assign(job, &mut service);
            trace.push(tick, EventKind::Admitted, job.id, None);
            trace.push(tick, EventKind::Assigned, job.id, Some(m));
            trace.push(tick, EventKind::Released, job.id, Some(m));
            trace.push(tick, EventKind::Enqueued, job.id, Some(m));
        }
        for s in state.steal(&mut service) {
            trace.push_steal(tick, s.job_id, s.from, s.to);
        }
        for (i, done) in state.advance() {
            trace.push(tick, EventKind::Completed, done.job_id, Some(i));
        }
        if next == jobs.len() && fifo.is_empty() && state.is_idle() {
            return Ok(trace);
        }
        tick += 1;
        if tick >= options.max_ticks {
            return Err(SimError::Timeout(options.max_ticks));
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numerics::NumericFormat;
    use crate::workload::{generate, BurstType, JobComposition, WorkloadConfig};

    fn options(machines: usize) -> SimOptions {
        SimOptions::new(SchedulerConfig {
            machines,
            capacity: 10,
            alpha: 0.5,
            format: NumericFormat::int8(),
        })
    }

    fn jobs() -> Vec<Job> {
        let mut c = WorkloadConfig::new(
            JobComposition::new(0.35, 0.35, 0.30),
            2,
            BurstType::Random,
            3,
            20,
            300,
        );
        c.seed = 7;
        generate(&c).unwrap()
    }

    #[test]
    fn every_policy_drains_and_conserves_jobs() {
        let jobs = jobs();
        for policy in Policy::ALL {
            let trace = run(policy, &jobs, &options(5)).unwrap();
            trace.validate().unwrap();
            for kind in [
                EventKind::Created,
                EventKind::Assigned,
                EventKind::Released,
                EventKind::Completed,
            ] {
                assert_eq!(trace.of_kind(kind).count(), jobs.len(), "{policy} {kind:?}");
            }
        }
    }

    #[test]
    fn noiseless_service_matches_ept() {
        let jobs = jobs();
        let trace = run(Policy::Rr, &jobs[..1], &options(5)).unwrap();
        let done = trace.of_kind(EventKind::Completed).next().unwrap();
        assert_eq!(done.tick + 1, jobs[0].created_at + jobs[0].ept[0] as u64);
    }

    #[test]
    fn rejects_wrong_arity_and_order() {
        let mut jobs = jobs();
        assert!(matches!(
            run(Policy::Sos, &jobs, &options(4)),
            Err(SimError::EptArity { .. })
        ));
        jobs.swap(0, 299);
        assert!(matches!(
            run(Policy::Rr, &jobs, &options(5)),
            Err(SimError::Unordered(_))
        ));
    }

    #[test]
    fn policy_names_round_trip() {
        for p in Policy::ALL {
            assert_eq!(p.to_string().parse::<Policy>().unwrap(), p);
        }
    }
}
