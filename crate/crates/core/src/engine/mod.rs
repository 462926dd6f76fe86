//! Cycle-level behavioral model of the scheduler datapath.
//!
//! Each machine owns a Job Metadata Memory (`jmm`), a Virtual Schedule
//! Manager (`vsm`), an α check CAM and an MMU. Per tick the model runs, in
//! this order:
//!
//! 1. virtual work: the head entry of every nonempty schedule has its sums
//!    decremented and its α counter stepped down;
//! 2. release: heads whose counter reached zero leave the schedule, and
//!    their slot and tag are recycled;
//! 3. admission: the job at the front of the input FIFO is costed against
//!    every machine at once and placed on the cheapest one with room;
//! 4. the tick counter advances.
//!
//! Hardware does 1–3 in parallel; this order is the serialization the
//! simulator commits to. A job placed in step 3 starts virtual work on the
//! next tick.

use std::collections::VecDeque;
use std::fmt;

use thiserror::Error;

use crate::domain::Job;
use crate::numerics::{quantize, Field, NumericFormat, Scalar};

pub mod cam;
pub mod cost;
pub mod jmm;
pub mod mmu;
pub mod vsm;

pub use cam::{alpha_init, AlphaCam, AlphaCamEntry};
pub use cost::{compute_cost, select_machine, tree_sum, CostOutcome};
pub use jmm::{individual_job_cost, IjccOutput, VsEntry};
pub use mmu::Mmu;
pub use vsm::{vsm_insert, vsm_pop, VirtualSchedule};

/// Hardware job tag drawn from a recycling pool of `M * N` values; 0 marks
/// an empty slot.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct JobTag(pub u32);

impl JobTag {
    pub const INVALID: JobTag = JobTag(0);

    pub fn is_valid(self) -> bool {
        self.0 != 0
    }
}

impl fmt::Display for JobTag {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "#{}", self.0)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum EngineError {
    #[error("virtual schedule or memory is full")]
    Capacity,
    #[error("no machine has a free virtual-schedule slot")]
    NoCapacity,
    #[error("virtual schedule is empty")]
    Empty,
    #[error("unknown job tag {0}")]
    UnknownId(JobTag),
    #[error("invalid scheduler configuration: {0}")]
    Config(String),
    #[error("job {job} has {got} EPT entries, expected {expected}")]
    EptArity { job: u64, got: usize, expected: usize },
    #[error("internal invariant violated: {0}")]
    Invariant(String),
}

/// Per-machine scheduler state.
#[derive(Debug, Clone)]
pub struct MachineSchedulerState {
    vsm: VirtualSchedule,
    jmm: Vec<VsEntry>,
    cam: AlphaCam,
    mmu: Mmu,
}

impl MachineSchedulerState {
    pub fn new(capacity: usize, format: &NumericFormat) -> Self {
        MachineSchedulerState {
            vsm: VirtualSchedule::new(capacity),
            jmm: vec![VsEntry::empty(format); capacity],
            cam: AlphaCam::new(capacity),
            mmu: Mmu::new(capacity),
        }
    }

    pub fn vsm(&self) -> &VirtualSchedule {
        &self.vsm
    }

    pub fn jmm(&self) -> &[VsEntry] {
        &self.jmm
    }

    pub fn cam(&self) -> &AlphaCam {
        &self.cam
    }

    pub fn mmu(&self) -> &Mmu {
        &self.mmu
    }

    pub fn head(&self) -> Option<JobTag> {
        self.vsm.head()
    }

    pub fn entry(&self, tag: JobTag) -> Option<&VsEntry> {
        self.mmu.lookup(tag).map(|addr| &self.jmm[addr])
    }

    /// Occupied entries in virtual-schedule order.
    pub fn entries(&self) -> impl Iterator<Item = &VsEntry> + '_ {
        self.vsm
            .tags()
            .iter()
            .filter_map(move |&tag| self.entry(tag))
    }

    pub fn remaining(&self, tag: JobTag) -> Option<u32> {
        self.cam.get(tag)
    }

    /// Writes a new entry at schedule position `p` with an α counter.
    pub fn install(&mut self, entry: VsEntry, p: usize, counter: u32) -> Result<usize, EngineError> {
        if self.vsm.is_full() {
            return Err(EngineError::Capacity);
        }
        self.vsm.insert(entry.tag, p)?;
        let addr = self.mmu.alloc(entry.tag)?;
        self.jmm[addr] = entry;
        self.cam.insert(entry.tag, counter)?;
        Ok(addr)
    }

    /// One cycle of virtual work on the head; returns its tag and remaining
    /// α count.
    fn work_head(&mut self) -> Result<Option<(JobTag, u32)>, EngineError> {
        let Some(head) = self.vsm.head() else {
            return Ok(None);
        };
        let addr = self.mmu.lookup(head).ok_or(EngineError::UnknownId(head))?;
        let entry = self.jmm[addr];
        let out = individual_job_cost(&entry, &entry.wspt.zero_like(), false, head);
        self.jmm[addr] = out.updated;
        let remaining = self.cam.decrement(head)?;
        Ok(Some((head, remaining)))
    }

    fn release_head(&mut self) -> Result<JobTag, EngineError> {
        let head = self.vsm.pop()?;
        self.cam.remove(head)?;
        self.mmu.free(&mut self.jmm, head)?;
        Ok(head)
    }

    /// Structural invariants of one machine.
    pub fn check_invariants(&self) -> Result<(), EngineError> {
        let n = self.vsm.len();
        let capacity = self.vsm.capacity();
        if self.cam.len() != n || self.mmu.mapped() != n || self.mmu.free_slots() != capacity - n {
            return Err(EngineError::Invariant(format!(
                "occupancy mismatch: vsm {n}, cam {}, lut {}, free {}",
                self.cam.len(),
                self.mmu.mapped(),
                self.mmu.free_slots()
            )));
        }
        let occupied = self.jmm.iter().filter(|e| e.is_valid()).count();
        if occupied != n {
            return Err(EngineError::Invariant(format!(
                "{occupied} valid JMM slots for {n} scheduled jobs"
            )));
        }
        let mut previous: Option<Scalar> = None;
        for &tag in self.vsm.tags() {
            let entry = self.entry(tag).ok_or(EngineError::UnknownId(tag))?;
            if entry.tag != tag || self.cam.get(tag).is_none() {
                return Err(EngineError::Invariant(format!("tag {tag} not mirrored")));
            }
            if let Some(prev) = previous {
                if entry.wspt > prev {
                    return Err(EngineError::Invariant(format!(
                        "schedule not in nonincreasing WSPT order at {tag}"
                    )));
                }
            }
            previous = Some(entry.wspt);
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SchedulerConfig {
    pub machines: usize,
    /// Virtual schedule capacity `N` per machine.
    pub capacity: usize,
    pub alpha: f64,
    pub format: NumericFormat,
}

impl SchedulerConfig {
    pub fn validate(&self) -> Result<(), EngineError> {
        if self.machines == 0 {
            return Err(EngineError::Config("at least one machine required".into()));
        }
        if self.capacity == 0 {
            return Err(EngineError::Config("virtual schedule capacity must be >= 1".into()));
        }
        if !(self.alpha > 0.0 && self.alpha <= 1.0) {
            return Err(EngineError::Config(format!(
                "alpha must lie in (0, 1], got {}",
                self.alpha
            )));
        }
        let tags = self.machines.checked_mul(self.capacity);
        if tags.is_none_or(|t| t >= u32::MAX as usize) {
            return Err(EngineError::Config("tag space overflows 32 bits".into()));
        }
        Ok(())
    }
}

/// `ceil(alpha * ept)` from the stored EPT, held in the α field.
pub fn release_counter(alpha: f64, ept_i: u32, format: &NumericFormat) -> u32 {
    let ept_q = quantize(ept_i as f64, format, Field::Ept).to_f64();
    let cycles = alpha_init(alpha, ept_q.round() as u32);
    quantize(cycles as f64, format, Field::Alpha).to_f64().round() as u32
}

/// A job leaving a virtual schedule for its machine's execution queue.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ReleaseEvent {
    pub tick: u64,
    pub job_id: u64,
    pub tag: JobTag,
    pub machine: usize,
}

/// A job placed into a virtual schedule.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Assignment {
    pub tick: u64,
    pub job_id: u64,
    pub tag: JobTag,
    pub machine: usize,
    pub insert_index: usize,
    pub cost: Scalar,
    /// α counter loaded into the CAM.
    pub counter: u32,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct TickReport {
    pub released: Vec<ReleaseEvent>,
    pub assigned: Option<Assignment>,
}

#[derive(Debug, Clone, Copy)]
struct Resident {
    job_id: u64,
}

/// Whole-scheduler state: `M` machines, the input FIFO and the tag pool.
#[derive(Debug, Clone)]
pub struct Scheduler {
    config: SchedulerConfig,
    machines: Vec<MachineSchedulerState>,
    input_fifo: VecDeque<Job>,
    tick: u64,
    tag_pool: VecDeque<JobTag>,
    residents: Vec<Option<Resident>>,
}

impl Scheduler {
    pub fn new(config: SchedulerConfig) -> Result<Self, EngineError> {
        config.validate()?;
        let tags = config.machines * config.capacity;
        Ok(Scheduler {
            machines: (0..config.machines)
                .map(|_| MachineSchedulerState::new(config.capacity, &config.format))
                .collect(),
            input_fifo: VecDeque::new(),
            tick: 0,
            tag_pool: (1..=tags as u32).map(JobTag).collect(),
            residents: vec![None; tags + 1],
            config,
        })
    }

    pub fn config(&self) -> &SchedulerConfig {
        &self.config
    }

    pub fn format(&self) -> &NumericFormat {
        &self.config.format
    }

    pub fn current_tick(&self) -> u64 {
        self.tick
    }

    pub fn machines(&self) -> &[MachineSchedulerState] {
        &self.machines
    }

    pub fn machine(&self, i: usize) -> &MachineSchedulerState {
        &self.machines[i]
    }

    pub fn input_fifo(&self) -> &VecDeque<Job> {
        &self.input_fifo
    }

    /// Trace id of the job holding `tag`.
    pub fn job_of(&self, tag: JobTag) -> Option<u64> {
        self.residents
            .get(tag.0 as usize)
            .copied()
            .flatten()
            .map(|r| r.job_id)
    }

    /// No queued and no scheduled jobs.
    pub fn is_idle(&self) -> bool {
        self.input_fifo.is_empty() && self.machines.iter().all(|m| m.vsm.is_empty())
    }

    pub fn resident_jobs(&self) -> usize {
        self.machines.iter().map(|m| m.vsm.len()).sum()
    }

    /// The release counter a job with `ept_i` gets.
    pub fn release_counter(&self, ept_i: u32) -> u32 {
        release_counter(self.config.alpha, ept_i, &self.config.format)
    }

    /// Costs of placing `job` on every machine, as the CC array sees them.
    pub fn costs_for(&self, job: &Job) -> Result<Vec<CostOutcome>, EngineError> {
        if job.ept.len() != self.machines.len() {
            return Err(EngineError::EptArity {
                job: job.id,
                got: job.ept.len(),
                expected: self.machines.len(),
            });
        }
        Ok(self
            .machines
            .iter()
            .zip(&job.ept)
            .map(|(m, &e)| compute_cost(m, job.weight, e, &self.config.format))
            .collect())
    }

    /// Advances one clock cycle. `arrivals` join the back of the input FIFO.
    pub fn tick(&mut self, arrivals: impl IntoIterator<Item = Job>) -> Result<TickReport, EngineError> {
        let now = self.tick;
        for job in arrivals {
            if job.ept.len() != self.machines.len() {
                return Err(EngineError::EptArity {
                    job: job.id,
                    got: job.ept.len(),
                    expected: self.machines.len(),
                });
            }
            self.input_fifo.push_back(job);
        }

        let mut report = TickReport::default();

        let mut exhausted = Vec::new();
        for (i, machine) in self.machines.iter_mut().enumerate() {
            if let Some((_, 0)) = machine.work_head()? {
                exhausted.push(i);
            }
        }

        for i in exhausted {
            let tag = self.machines[i].release_head()?;
            let resident = self.residents[tag.0 as usize]
                .take()
                .ok_or(EngineError::UnknownId(tag))?;
            self.tag_pool.push_back(tag);
            report.released.push(ReleaseEvent {
                tick: now,
                job_id: resident.job_id,
                tag,
                machine: i,
            });
        }

        if let Some(job) = self.input_fifo.front() {
            let costs = self.costs_for(job)?;
            match select_machine(&costs) {
                Ok(i) => {
                    let job = self.input_fifo.pop_front().expect("front exists");
                    let outcome = costs[i];
                    let tag = self.tag_pool.pop_front().ok_or_else(|| {
                        EngineError::Invariant("tag pool exhausted with free slots".into())
                    })?;
                    let entry = VsEntry::with_wspt(
                        tag,
                        job.weight,
                        job.ept[i],
                        outcome.wspt,
                        &self.config.format,
                    );
                    let counter = self.release_counter(job.ept[i]);
                    self.machines[i].install(entry, outcome.insert_index, counter)?;
                    self.residents[tag.0 as usize] = Some(Resident { job_id: job.id });
                    report.assigned = Some(Assignment {
                        tick: now,
                        job_id: job.id,
                        tag,
                        machine: i,
                        insert_index: outcome.insert_index,
                        cost: outcome.cost,
                        counter,
                    });
                }
                Err(EngineError::NoCapacity) => {}
                Err(e) => return Err(e),
            }
        }

        self.tick += 1;
        Ok(report)
    }

    pub fn check_invariants(&self) -> Result<(), EngineError> {
        for m in &self.machines {
            m.check_invariants()?;
        }
        let live = self.residents.iter().filter(|r| r.is_some()).count();
        if live != self.resident_jobs() || live + self.tag_pool.len() != self.residents.len() - 1 {
            return Err(EngineError::Invariant(format!(
                "tag accounting: {live} live, {} pooled",
                self.tag_pool.len()
            )));
        }
        Ok(())
    }
}
