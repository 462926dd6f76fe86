//! Comparison schedulers that dispatch straight into the execution queues.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::domain::Job;
use crate::machine::{Completion, ExecQueue, ServiceModel};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum BaselinePolicy {
    Rr,
    Greedy,
    Wsrr,
    Wsg,
}

impl BaselinePolicy {
    pub const ALL: [BaselinePolicy; 4] = [
        BaselinePolicy::Rr,
        BaselinePolicy::Greedy,
        BaselinePolicy::Wsrr,
        BaselinePolicy::Wsg,
    ];

    pub fn name(self) -> &'static str {
        match self {
            BaselinePolicy::Rr => "rr",
            BaselinePolicy::Greedy => "greedy",
            BaselinePolicy::Wsrr => "wsrr",
            BaselinePolicy::Wsg => "wsg",
        }
    }

    pub fn steals(self) -> bool {
        matches!(self, BaselinePolicy::Wsrr | BaselinePolicy::Wsg)
    }

    fn greedy(self) -> bool {
        matches!(self, BaselinePolicy::Greedy | BaselinePolicy::Wsg)
    }
}

impl fmt::Display for BaselinePolicy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for BaselinePolicy {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Self::ALL
            .into_iter()
            .find(|p| p.name().eq_ignore_ascii_case(s))
            .ok_or_else(|| format!("unknown baseline policy `{s}`"))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Steal {
    pub job_id: u64,
    pub from: usize,
    pub to: usize,
}

#[derive(Debug, Clone)]
pub struct BaselineState {
    policy: BaselinePolicy,
    rr_cursor: usize,
    queues: Vec<ExecQueue>,
}

/// Index of the smallest `queue_work[i] + ept[i]`, lowest index on ties.
pub fn greedy_choice(queue_work: &[u64], ept: &[u32]) -> usize {
    let mut best = 0;
    let mut best_cost = u64::MAX;
    for (i, (&w, &e)) in queue_work.iter().zip(ept).enumerate() {
        let cost = w + e as u64;
        if cost < best_cost {
            best = i;
            best_cost = cost;
        }
    }
    best
}

impl BaselineState {
    pub fn new(policy: BaselinePolicy, machines: usize) -> Self {
        assert!(machines > 0, "at least one machine required");
        BaselineState {
            policy,
            rr_cursor: 0,
            queues: vec![ExecQueue::new(); machines],
        }
    }

    pub fn policy(&self) -> BaselinePolicy {
        self.policy
    }

    pub fn rr_cursor(&self) -> usize {
        self.rr_cursor
    }

    pub fn queues(&self) -> &[ExecQueue] {
        &self.queues
    }

    pub fn queue_work(&self) -> Vec<u64> {
        self.queues.iter().map(ExecQueue::remaining_work).collect()
    }

    /// Chooses a machine for `job` and enqueues it there.
    pub fn assign(&mut self, job: &Job, service: &mut ServiceModel) -> usize {
        let machine = if self.policy.greedy() {
            greedy_choice(&self.queue_work(), &job.ept)
        } else {
            let m = self.rr_cursor;
            self.rr_cursor = (self.rr_cursor + 1) % self.queues.len();
            m
        };
        self.queues[machine].enqueue(job, machine, service);
        machine
    }

    /// Idle machines, in index order, each take the tail job of the busiest
    /// queue holding at least two waiting jobs.
    pub fn steal(&mut self, service: &mut ServiceModel) -> Vec<Steal> {
        let mut steals = Vec::new();
        if !self.policy.steals() {
            return steals;
        }
        for thief in 0..self.queues.len() {
            if !self.queues[thief].is_idle() {
                continue;
            }
            let mut victim: Option<(usize, u64)> = None;
            for (i, q) in self.queues.iter().enumerate() {
                if i == thief || q.pending().len() < 2 {
                    continue;
                }
                let work = q.remaining_work();
                if victim.is_none_or(|(_, best)| work > best) {
                    victim = Some((i, work));
                }
            }
            let Some((from, _)) = victim else {
                continue;
            };
            let mut job = self.queues[from].steal_tail().expect("victim has pending jobs");
            job.expected = job.ept[thief];
            job.remaining = service.draw(job.expected);
            steals.push(Steal {
                job_id: job.job_id,
                from,
                to: thief,
            });
            self.queues[thief].push(job);
        }
        steals
    }

    /// One tick of service on every machine.
    pub fn advance(&mut self) -> Vec<(usize, Completion)> {
        self.queues
            .iter_mut()
            .enumerate()
            .filter_map(|(i, q)| q.advance().map(|c| (i, c)))
            .collect()
    }

    pub fn is_idle(&self) -> bool {
        self.queues.iter().all(ExecQueue::is_idle)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::domain::Nature;

    fn job(id: u64, ept: &[u32]) -> Job {
        Job {
            id,
            created_at: 0,
            nature: Nature::Mixed,
            weight: 1,
            ept: ept.to_vec(),
        }
    }

    #[test]
    fn round_robin_cycles() {
        let mut s = BaselineState::new(BaselinePolicy::Rr, 5);
        let mut svc = ServiceModel::exact();
        let picks: Vec<_> = (0..6).map(|i| s.assign(&job(i, &[10; 5]), &mut svc)).collect();
        assert_eq!(picks, vec![0, 1, 2, 3, 4, 0]);
    }

    #[test]
    fn greedy_rule() {
        assert_eq!(greedy_choice(&[30, 5, 50], &[10, 40, 10]), 0);
        assert_eq!(greedy_choice(&[0, 0], &[40, 40]), 0);
    }

    #[test]
    fn greedy_counts_queued_work() {
        let mut s = BaselineState::new(BaselinePolicy::Greedy, 2);
        let mut svc = ServiceModel::exact();
        assert_eq!(s.assign(&job(1, &[10, 12]), &mut svc), 0);
        assert_eq!(s.assign(&job(2, &[10, 12]), &mut svc), 1);
        assert_eq!(s.assign(&job(3, &[10, 12]), &mut svc), 0);
    }

    fn loaded(policy: BaselinePolicy, pending: usize) -> BaselineState {
        let mut s = BaselineState::new(policy, 2);
        let mut svc = ServiceModel::exact();
        for id in 0..=pending as u64 {
            s.queues[0].enqueue(&job(id, &[10, 20]), 0, &mut svc);
        }
        s
    }

    #[test]
    fn steals_tail_job_and_rederives_time() {
        let mut s = loaded(BaselinePolicy::Wsrr, 3);
        let steals = s.steal(&mut ServiceModel::exact());
        assert_eq!(steals, vec![Steal { job_id: 3, from: 0, to: 1 }]);
        let pending: Vec<_> = s.queues[0].pending().iter().map(|j| j.job_id).collect();
        assert_eq!(pending, vec![1, 2]);
        let running = s.queues[1].running().unwrap();
        assert_eq!((running.job_id, running.remaining), (3, 20));
    }

    #[test]
    fn no_steal_below_two_pending_or_without_idle_thief() {
        let mut s = loaded(BaselinePolicy::Wsg, 1);
        assert!(s.steal(&mut ServiceModel::exact()).is_empty());
        let mut s = loaded(BaselinePolicy::Wsg, 3);
        s.queues[1].enqueue(&job(9, &[10, 20]), 1, &mut ServiceModel::exact());
        assert!(s.steal(&mut ServiceModel::exact()).is_empty());
        let mut s = loaded(BaselinePolicy::Rr, 3);
        assert!(s.steal(&mut ServiceModel::exact()).is_empty());
    }

    #[test]
    fn policy_names_parse() {
        for p in BaselinePolicy::ALL {
            assert_eq!(p.name().parse::<BaselinePolicy>().unwrap(), p);
        }
        assert!("fifo".parse::<BaselinePolicy>().is_err());
    }
}
