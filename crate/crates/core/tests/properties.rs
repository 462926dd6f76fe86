use std::collections::{HashMap, HashSet};
use std::io::BufReader;

use proptest::prelude::*;

use sos_core::baselines::{BaselinePolicy, BaselineState};
use sos_core::machine::ServiceModel;
use sos_core::metrics::{job_counts, RunReport};
use sos_core::numerics::{NumericFormat, Scheme};
use sos_core::sim::{run, Policy, SimOptions};
use sos_core::workload::{generate, read_jobs, write_jobs, BurstType, JobComposition, WorkloadConfig};
use sos_core::{EventKind, Job, Nature, Scheduler, SchedulerConfig, SimTrace};

fn composition() -> impl Strategy<Value = JobComposition> {
    (0u32..=20, 0u32..=20, 0u32..=20)
        .prop_filter("nonzero", |(a, b, c)| a + b + c > 0)
        .prop_map(|(a, b, c)| {
            let s = (a + b + c) as f64;
            JobComposition::new(a as f64 / s, b as f64 / s, 1.0 - (a + b) as f64 / s)
        })
}

fn workload() -> impl Strategy<Value = WorkloadConfig> {
    (
        composition(),
        1u32..=5,
        prop_oneof![Just(BurstType::Uniform), Just(BurstType::Random)],
        0u32..=10,
        1u32..=40,
        1u64..=300,
        any::<u64>(),
    )
        .prop_map(|(jc, bf, bt, it, ii, total, seed)| {
            let mut c = WorkloadConfig::new(jc, bf, bt, it, ii, total);
            c.seed = seed;
            c
        })
}

fn scheme() -> impl Strategy<Value = Scheme> {
    prop::sample::select(Scheme::ALL.to_vec())
}

struct EngineRun {
    releases: Vec<(u64, u64, usize)>,
    assignments: Vec<(u64, u64, usize, usize)>,
}

/// Drives the engine to drain, checking per-tick invariants along the way.
fn checked_run(jobs: &[Job], config: SchedulerConfig) -> Result<EngineRun, TestCaseError> {
    let mut s = Scheduler::new(config).unwrap();
    let mut out = EngineRun {
        releases: Vec::new(),
        assignments: Vec::new(),
    };
    let mut next = 0;
    let mut tick = 0u64;
    loop {
        let before: Vec<HashMap<u64, u32>> = s
            .machines()
            .iter()
            .map(|m| {
                m.entries()
                    .map(|e| (s.job_of(e.tag).unwrap(), m.remaining(e.tag).unwrap()))
                    .collect()
            })
            .collect();
        let start = next;
        while next < jobs.len() && jobs[next].created_at == tick {
            next += 1;
        }
        let report = s.tick(jobs[start..next].iter().cloned()).unwrap();

        for (i, m) in s.machines().iter().enumerate() {
            m.check_invariants().map_err(|e| TestCaseError::fail(e.to_string()))?;
            let wspt: Vec<f64> = m.entries().map(|e| e.wspt.to_f64()).collect();
            prop_assert!(wspt.windows(2).all(|w| w[0] >= w[1]), "vsm order {wspt:?}");

            let mut accrued = report.released.iter().filter(|r| r.machine == i).count();
            for e in m.entries() {
                let job = s.job_of(e.tag).unwrap();
                if let Some(&prev) = before[i].get(&job) {
                    let now = m.remaining(e.tag).unwrap();
                    prop_assert!(prev - now <= 1);
                    accrued += (prev - now) as usize;
                }
            }
            prop_assert_eq!(accrued, usize::from(!before[i].is_empty()), "machine {} tick {}", i, tick);
        }
        out.releases
            .extend(report.released.iter().map(|r| (r.tick, r.job_id, r.machine)));
        if let Some(a) = report.assigned {
            out.assignments.push((a.tick, a.job_id, a.machine, a.insert_index));
        }
        if next == jobs.len() && s.is_idle() {
            return Ok(out);
        }
        tick += 1;
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn engine_invariants_hold_every_tick(
        w in workload(),
        scheme in scheme(),
        capacity in 1usize..=12,
        alpha in 0.05f64..=1.0,
    ) {
        let jobs = generate(&w).unwrap();
        let config = SchedulerConfig { machines: 5, capacity, alpha, format: NumericFormat::new(scheme) };
        let first = checked_run(&jobs, config)?;

        let released: HashSet<u64> = first.releases.iter().map(|r| r.1).collect();
        prop_assert_eq!(first.releases.len(), jobs.len());
        prop_assert_eq!(released.len(), jobs.len());
        prop_assert_eq!(first.assignments.len(), jobs.len());

        let second = checked_run(&jobs, config)?;
        prop_assert_eq!(first.releases, second.releases);
        prop_assert_eq!(first.assignments, second.assignments);
    }

    #[test]
    fn arrivals_respect_burst_and_idle_windows(w in workload()) {
        let jobs = generate(&w).unwrap();
        prop_assert_eq!(jobs.len() as u64, w.total_jobs);
        let mut per_tick: HashMap<u64, u32> = HashMap::new();
        for j in &jobs {
            *per_tick.entry(j.created_at).or_default() += 1;
        }
        prop_assert!(per_tick.values().all(|&n| n <= w.bf));
        for k in (w.ii as usize..jobs.len()).step_by(w.ii as usize) {
            prop_assert!(jobs[k].created_at - jobs[k - 1].created_at > w.it as u64);
        }
        prop_assert!(jobs.windows(2).all(|p| p[0].created_at <= p[1].created_at && p[0].id + 1 == p[1].id));
    }

    #[test]
    fn generation_is_deterministic_and_round_trips(w in workload()) {
        let jobs = generate(&w).unwrap();
        prop_assert_eq!(&jobs, &generate(&w).unwrap());
        let mut buf = Vec::new();
        write_jobs(&jobs, &mut buf).unwrap();
        prop_assert_eq!(read_jobs(BufReader::new(&buf[..])).unwrap(), jobs);
    }

    #[test]
    fn rr_counts_stay_level_without_bursts(ii in 1u32..=50, total in 1u64..=400, seed in any::<u64>()) {
        let mut w = WorkloadConfig::new(JobComposition::new(0.35, 0.35, 0.30), 1, BurstType::Uniform, 3, ii, total);
        w.seed = seed;
        let jobs = generate(&w).unwrap();
        let trace = run(Policy::Rr, &jobs, &SimOptions::new(w.scheduler_config().unwrap())).unwrap();
        let mut counts = [0u32; 5];
        for e in trace.of_kind(EventKind::Assigned) {
            counts[e.machine.unwrap()] += 1;
            prop_assert!(counts.iter().max().unwrap() - counts.iter().min().unwrap() <= 1);
        }
    }

    #[test]
    fn stealing_leaves_no_idle_machine_beside_a_backlog(
        epts in prop::collection::vec(prop::collection::vec(1u32..=60, 5), 1..200),
        arrivals in prop::collection::vec(0usize..=3, 1..200),
        greedy in any::<bool>(),
        seed in any::<u64>(),
    ) {
        let policy = if greedy { BaselinePolicy::Wsg } else { BaselinePolicy::Wsrr };
        let mut state = BaselineState::new(policy, 5);
        let mut service = ServiceModel::noisy(seed);
        let mut pending = epts.iter().enumerate().map(|(i, e)| Job {
            id: i as u64 + 1,
            created_at: 0,
            nature: Nature::Mixed,
            weight: 1,
            ept: e.clone(),
        });
        let mut placed = 0;
        let mut completed = 0;
        for &n in arrivals.iter().cycle().take(2000) {
            for job in pending.by_ref().take(n) {
                state.assign(&job, &mut service);
                placed += 1;
            }
            state.steal(&mut service);
            let queues = state.queues();
            let idle = queues.iter().any(|q| q.is_idle());
            let backlog = queues.iter().any(|q| q.pending().len() >= 2);
            prop_assert!(!(idle && backlog));
            let held: usize = queues.iter().map(|q| q.len()).sum();
            prop_assert_eq!(held + completed, placed);
            completed += state.advance().len();
        }
    }

    #[test]
    fn metrics_are_pure_functions_of_the_trace(
        w in workload(),
        policy in prop::sample::select(Policy::ALL.to_vec()),
        noise in any::<bool>(),
    ) {
        let jobs = generate(&w).unwrap();
        let mut options = SimOptions::new(w.scheduler_config().unwrap());
        options.noise = noise;
        let trace = run(policy, &jobs, &options).unwrap();
        trace.validate().unwrap();
        prop_assert_eq!(job_counts(&trace).iter().sum::<u64>(), jobs.len() as u64);
        prop_assert_eq!(trace.of_kind(EventKind::Completed).count(), jobs.len());

        let mut buf = Vec::new();
        trace.write_jsonl(&mut buf).unwrap();
        let stored = SimTrace::read_jsonl(BufReader::new(&buf[..])).unwrap();
        prop_assert_eq!(&stored, &trace);
        let a = RunReport::from_trace(0, &trace, 50).unwrap();
        let b = RunReport::from_trace(0, &stored, 50).unwrap();
        prop_assert_eq!(serde_json::to_string(&a).unwrap(), serde_json::to_string(&b).unwrap());
    }
}

#[test]
fn exact_service_time_equals_ept() {
    let w = WorkloadConfig::new(JobComposition::new(0.35, 0.35, 0.30), 2, BurstType::Uniform, 4, 10, 300);
    let jobs = generate(&w).unwrap();
    let ept: HashMap<u64, &Job> = jobs.iter().map(|j| (j.id, j)).collect();
    for policy in [Policy::Sos, Policy::Rr, Policy::Greedy] {
        let trace = run(policy, &jobs, &SimOptions::new(w.scheduler_config().unwrap())).unwrap();
        let mut started: HashMap<usize, u64> = HashMap::new();
        let mut queue: HashMap<usize, Vec<u64>> = HashMap::new();
        for e in &trace.events {
            let m = e.machine.unwrap_or(0);
            match e.kind {
                EventKind::Enqueued => queue.entry(m).or_default().push(e.job),
                EventKind::Completed => {
                    let q = queue.get_mut(&m).unwrap();
                    assert_eq!(q.remove(0), e.job);
                    let begin = started.get(&m).copied().unwrap_or(0);
                    let enq = trace
                        .events
                        .iter()
                        .find(|x| x.kind == EventKind::Enqueued && x.job == e.job)
                        .unwrap()
                        .tick;
                    let service = e.tick + 1 - begin.max(enq);
                    assert_eq!(service, ept[&e.job].ept[m] as u64, "{policy} job {}", e.job);
                    started.insert(m, e.tick + 1);
                }
                _ => {}
            }
        }
    }
}

#[test]
fn nature_proportions_converge() {
    let jc = JobComposition::new(0.1, 0.7, 0.2);
    let jobs = generate(&WorkloadConfig::new(jc, 2, BurstType::Random, 5, 20, 10_000)).unwrap();
    for nature in Nature::ALL {
        let share = jobs.iter().filter(|j| j.nature == nature).count() as f64 / jobs.len() as f64;
        assert!((share - jc.fraction(nature)).abs() <= 0.02);
    }
}
