//! Fixtures shared by the engine benchmarks.

use sos_core::domain::{MachineProfile, MachineType, Quality};
use sos_core::workload::{generate, BurstType, JobComposition, WorkloadConfig};
use sos_core::{Job, NumericFormat, Scheduler, SchedulerConfig};

/// A hardware configuration: machine count and virtual-schedule depth.
#[derive(Debug, Clone, Copy)]
pub struct Shape {
    pub name: &'static str,
    pub machines: usize,
    pub capacity: usize,
}

pub const SHAPES: [Shape; 4] = [
    Shape { name: "C1", machines: 5, capacity: 10 },
    Shape { name: "C2", machines: 5, capacity: 20 },
    Shape { name: "C3", machines: 10, capacity: 10 },
    Shape { name: "C4", machines: 10, capacity: 20 },
];

/// The default five machines repeated up to `machines`.
pub fn machine_set(machines: usize) -> Vec<MachineProfile> {
    let base = [
        MachineProfile::new(MachineType::Cpu, Quality::Best),
        MachineProfile::new(MachineType::Cpu, Quality::Worst),
        MachineProfile::new(MachineType::Mixed, Quality::Best),
        MachineProfile::new(MachineType::Gpu, Quality::Best),
        MachineProfile::new(MachineType::Gpu, Quality::Worst),
    ];
    base.iter().copied().cycle().take(machines).collect()
}

/// One arrival per tick, no idle gaps.
pub fn steady_jobs(machines: usize, total: u64, seed: u64) -> Vec<Job> {
    let mut config = WorkloadConfig::new(
        JobComposition::new(0.35, 0.35, 0.30),
        1,
        BurstType::Uniform,
        0,
        u32::MAX,
        total,
    );
    config.mc = machine_set(machines);
    config.seed = seed;
    generate(&config).expect("fixture config is valid")
}

pub fn scheduler(shape: Shape, format: NumericFormat) -> Scheduler {
    Scheduler::new(SchedulerConfig {
        machines: shape.machines,
        capacity: shape.capacity,
        alpha: 0.5,
        format,
    })
    .expect("fixture config is valid")
}

/// Ticks `scheduler` `ticks` times, cycling through `jobs` so the input FIFO
/// never runs dry. Returns the number of placements.
pub fn drive(scheduler: &mut Scheduler, jobs: &[Job], ticks: u64) -> u64 {
    let mut placed = 0;
    let mut next = 0;
    for _ in 0..ticks {
        let arrival = if scheduler.input_fifo().is_empty() {
            let job = jobs[next % jobs.len()].clone();
            next += 1;
            Some(job)
        } else {
            None
        };
        let report = scheduler.tick(arrival).expect("fixture jobs fit the shape");
        placed += u64::from(report.assigned.is_some());
    }
    placed
}
