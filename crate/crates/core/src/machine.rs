//! Actual per-machine execution queues.

use std::collections::VecDeque;

use rand::Rng;
use rand_chacha::ChaCha8Rng;

use crate::domain::Job;
use crate::rng::{stream_rng, Stream};

/// Turns an EPT into an actual processing time.
#[derive(Debug, Clone)]
pub struct ServiceModel {
    rng: Option<ChaCha8Rng>,
}

impl ServiceModel {
    /// Actual time equals the EPT.
    pub fn exact() -> Self {
        ServiceModel { rng: None }
    }

    /// Actual time is the EPT scaled by a factor uniform in [0.8, 1.2].
    pub fn noisy(seed: u64) -> Self {
        ServiceModel {
            rng: Some(stream_rng(seed, Stream::Noise)),
        }
    }

    pub fn new(noise: bool, seed: u64) -> Self {
        if noise {
            Self::noisy(seed)
        } else {
            Self::exact()
        }
    }

    pub fn draw(&mut self, ept: u32) -> u32 {
        match &mut self.rng {
            None => ept,
            Some(rng) => actual_time(ept, rng.random_range(0.8..=1.2)),
        }
    }
}

/// `round(ept * factor)`, at least one tick.
pub fn actual_time(ept: u32, factor: f64) -> u32 {
    ((ept as f64 * factor + 0.5).floor() as u32).max(1)
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct QueuedJob {
    pub job_id: u64,
    /// Expected work left on this machine.
    pub expected: u32,
    /// Actual ticks of service left.
    pub remaining: u32,
    /// EPT row, for re-deriving service time after migration.
    pub ept: Box<[u32]>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Completion {
    pub job_id: u64,
}

/// FIFO execution queue of one machine; the front job runs.
#[derive(Debug, Clone, Default)]
pub struct ExecQueue {
    pending: VecDeque<QueuedJob>,
    running: Option<QueuedJob>,
    completed: u64,
}

impl ExecQueue {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn enqueue(&mut self, job: &Job, machine: usize, service: &mut ServiceModel) {
        let ept = job.ept[machine];
        self.push(QueuedJob {
            job_id: job.id,
            expected: ept,
            remaining: service.draw(ept),
            ept: job.ept.clone().into_boxed_slice(),
        });
    }

    /// Appends a prepared job; promotes it if the machine is idle.
    pub fn push(&mut self, job: QueuedJob) {
        if self.running.is_none() {
            debug_assert!(self.pending.is_empty());
            self.running = Some(job);
        } else {
            self.pending.push_back(job);
        }
    }

    /// One tick of service on the running job.
    pub fn advance(&mut self) -> Option<Completion> {
        let job = self.running.as_mut()?;
        job.remaining = job.remaining.saturating_sub(1);
        job.expected = job.expected.saturating_sub(1);
        if job.remaining > 0 {
            return None;
        }
        let done = self.running.take().expect("checked above");
        self.running = self.pending.pop_front();
        self.completed += 1;
        Some(Completion {
            job_id: done.job_id,
        })
    }

    /// Removes the most recently queued job that has not started.
    pub fn steal_tail(&mut self) -> Option<QueuedJob> {
        self.pending.pop_back()
    }

    pub fn is_idle(&self) -> bool {
        self.running.is_none() && self.pending.is_empty()
    }

    pub fn pending(&self) -> &VecDeque<QueuedJob> {
        &self.pending
    }

    pub fn running(&self) -> Option<&QueuedJob> {
        self.running.as_ref()
    }

    pub fn completed(&self) -> u64 {
        self.completed
    }

    pub fn len(&self) -> usize {
        self.pending.len() + usize::from(self.running.is_some())
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Expected work still queued, including what is left of the running job.
    pub fn remaining_work(&self) -> u64 {
        self.pending.iter().map(|j| j.expected as u64).sum::<u64>()
            + self.running.as_ref().map_or(0, |j| j.expected as u64)
    }
}
