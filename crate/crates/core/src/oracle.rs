//! Full-precision reference models: the continuous-time cost, the naive
//! discretized sums, and an exact-rational scheduler that rebuilds every
//! quantity from head-occupancy history at each decision.

use std::collections::{HashMap, VecDeque};

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{ToPrimitive, Zero};

use crate::domain::Job;
use crate::engine::jmm::sum_l_scalar;
use crate::numerics::{quantize, Field, Fixed, NumericFormat, Scalar};

/// Head-occupancy intervals `[start, end)` per job.
#[derive(Debug, Clone, Default)]
pub struct HeadHistory {
    intervals: HashMap<u64, Vec<(u64, u64)>>,
}

impl HeadHistory {
    pub fn new() -> Self {
        Self::default()
    }

    /// Marks `job` as head during `tick`.
    pub fn record(&mut self, job: u64, tick: u64) {
        let list = self.intervals.entry(job).or_default();
        match list.last_mut() {
            Some((_, end)) if *end == tick => *end += 1,
            Some((_, end)) if *end > tick => {}
            _ => list.push((tick, tick + 1)),
        }
    }

    pub fn intervals(&self, job: u64) -> &[(u64, u64)] {
        self.intervals.get(&job).map_or(&[], Vec::as_slice)
    }

    /// Head ticks of `job` strictly before `tick`.
    pub fn head_ticks(&self, job: u64, tick: u64) -> u64 {
        self.intervals(job)
            .iter()
            .map(|&(s, e)| e.min(tick).saturating_sub(s))
            .sum()
    }

    /// Measure of head occupancy over `[0, t]`.
    pub fn occupancy(&self, job: u64, t: f64) -> f64 {
        self.intervals(job)
            .iter()
            .map(|&(s, e)| (t.min(e as f64) - s as f64).max(0.0))
            .sum()
    }
}

/// Remaining virtual-work fraction `1 - occupancy / ept`.
pub fn iota_continuous(history: &HeadHistory, job: u64, ept: f64, t: f64) -> f64 {
    1.0 - history.occupancy(job, t) / ept
}

/// A resident job as seen by the continuous cost.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ResidentView {
    pub weight: f64,
    pub ept: f64,
    pub iota: f64,
}

/// Continuous-time placement cost of a job with `weight` and `ept` given
/// the residents' remaining fractions.
pub fn cost_continuous(weight: f64, ept: f64, residents: &[ResidentView]) -> f64 {
    let t_new = weight / ept;
    let mut high = 0.0;
    let mut low = 0.0;
    for k in residents {
        if k.weight / k.ept >= t_new {
            high += k.iota * k.ept;
        } else {
            low += k.weight * k.iota * ept;
        }
    }
    weight * (ept + high) + low
}

/// `(ept - n, weight - n * weight / ept)`, evaluated directly.
pub fn naive_discrete_sums(weight: f64, ept: f64, n: u64) -> (f64, f64) {
    let n = n as f64;
    (ept - n, weight - n * weight / ept)
}

/// Discretized cost with `iota = 1 - n / ept` for each `(weight, ept, n)`.
pub fn naive_discrete_cost(weight: f64, ept: f64, residents: &[(f64, f64, u64)]) -> f64 {
    let t_new = weight / ept;
    let mut high = 0.0;
    let mut low = 0.0;
    for &(w, e, n) in residents {
        let (sum_h, sum_l) = naive_discrete_sums(w, e, n);
        if w / e >= t_new {
            high += sum_h;
        } else {
            low += sum_l;
        }
    }
    weight * (ept + high) + ept * low
}

/// The naive sums in a given number format, from the stored (quantized)
/// attributes: `max(ept_q - n, 0)` and `max(weight_q - n * wspt_q, 0)`.
pub fn naive_discrete_sums_in(
    weight: u32,
    ept: u32,
    wspt: &Scalar,
    n: u64,
    format: &NumericFormat,
) -> (Scalar, Scalar) {
    let ept_q = quantize(ept as f64, format, Field::Ept);
    let weight_q = quantize(weight as f64, format, Field::Weight);
    let sum_l0 = sum_l_scalar(weight_q.to_f64(), format);
    match (ept_q, sum_l0, wspt) {
        (Scalar::Fixed(e), Scalar::Fixed(l), Scalar::Fixed(t)) => {
            let h = e.raw().saturating_sub(n);
            let step = t.resize(l.total_bits()).raw() as u128;
            let l = (l.raw() as u128).saturating_sub(step * n as u128);
            (
                Scalar::Fixed(Fixed::saturating_new(h, e.frac_bits(), e.total_bits())),
                Scalar::Fixed(Fixed::saturating_new(l as u64, l_frac(format), format.cost_bits)),
            )
        }
        _ => {
            let h = (ept_q.to_f64() - n as f64).max(0.0);
            let l = (sum_l0.to_f64() - n as f64 * wspt.to_f64()).max(0.0);
            (Scalar::Float(h), Scalar::Float(l))
        }
    }
}

fn l_frac(format: &NumericFormat) -> u32 {
    format.sum_l_layout().0
}

/// One scheduling decision in a reference or engine log.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Decision {
    Released {
        tick: u64,
        job: u64,
        machine: usize,
    },
    Assigned {
        tick: u64,
        job: u64,
        machine: usize,
        index: usize,
    },
}

struct RefJob {
    id: u64,
    weight: BigInt,
    ept: BigInt,
    wspt: BigRational,
    threshold: u64,
}

/// Exact-rational scheduler over `jobs` (sorted by arrival) on `machines`
/// machines of virtual-schedule capacity `capacity`.
///
/// Shares no state or arithmetic with the engine; ties resolve the same way
/// (lowest machine index, incumbents ahead on equal WSPT).
pub fn reference_schedule(jobs: &[Job], machines: usize, capacity: usize, alpha: f64) -> Vec<Decision> {
    // α taken to nine decimal places
    let alpha = BigRational::new(
        BigInt::from((alpha * 1e9).round() as i64),
        BigInt::from(1_000_000_000u64),
    );
    let mut schedules: Vec<Vec<RefJob>> = (0..machines).map(|_| Vec::new()).collect();
    let mut history = HeadHistory::new();
    let mut fifo: VecDeque<&Job> = VecDeque::new();
    let mut log = Vec::new();
    let mut next = 0;
    let mut tick = 0u64;

    loop {
        while next < jobs.len() && jobs[next].created_at == tick {
            fifo.push_back(&jobs[next]);
            next += 1;
        }
        if next == jobs.len() && fifo.is_empty() && schedules.iter().all(Vec::is_empty) {
            break;
        }

        for (i, vs) in schedules.iter_mut().enumerate() {
            let Some(head) = vs.first() else { continue };
            history.record(head.id, tick);
            if history.head_ticks(head.id, tick + 1) >= head.threshold {
                let done = vs.remove(0);
                log.push(Decision::Released {
                    tick,
                    job: done.id,
                    machine: i,
                });
            }
        }

        if let Some(&job) = fifo.front() {
            let mut best: Option<(usize, BigRational, usize)> = None;
            for (i, vs) in schedules.iter().enumerate() {
                if vs.len() >= capacity {
                    continue;
                }
                let weight = BigRational::from_integer(job.weight.into());
                let ept = BigRational::from_integer(job.ept[i].into());
                let t_new = &weight / &ept;
                let mut high = BigRational::zero();
                let mut low = BigRational::zero();
                let mut index = 0;
                for k in vs {
                    let n = BigRational::from_integer(history.head_ticks(k.id, tick + 1).into());
                    if k.wspt >= t_new {
                        index += 1;
                        high += BigRational::from_integer(k.ept.clone()) - &n;
                    } else {
                        low += BigRational::from_integer(k.weight.clone()) - &n * &k.wspt;
                    }
                }
                let cost = &weight * (&ept + high) + &ept * low;
                if best.as_ref().is_none_or(|(_, c, _)| cost < *c) {
                    best = Some((i, cost, index));
                }
            }
            if let Some((i, _, index)) = best {
                fifo.pop_front();
                let weight = BigInt::from(job.weight);
                let ept = BigInt::from(job.ept[i]);
                let threshold = (&alpha * BigRational::from_integer(ept.clone()))
                    .ceil()
                    .to_integer()
                    .to_u64()
                    .expect("threshold fits u64");
                schedules[i].insert(
                    index,
                    RefJob {
                        id: job.id,
                        wspt: BigRational::new(weight.clone(), ept.clone()),
                        weight,
                        ept,
                        threshold,
                    },
                );
                log.push(Decision::Assigned {
                    tick,
                    job: job.id,
                    machine: i,
                    index,
                });
            }
        }
        tick += 1;
    }
    log
}
