//! Comparison metrics computed purely from event logs.

use std::collections::HashMap;
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::trace::{EventKind, SimTrace};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum MetricsError {
    #[error("trace has no events")]
    EmptyTrace,
    #[error("no assignments recorded; CV is undefined")]
    NoAssignments,
    #[error("job {0} was never released; run the trace to completion")]
    IncompleteTrace(u64),
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
}

/// Machine holding each job after all events up to and including `until`.
fn placement(trace: &SimTrace, until: u64) -> HashMap<u64, usize> {
    let mut place = HashMap::new();
    for e in &trace.events {
        if e.tick > until {
            continue;
        }
        if matches!(e.kind, EventKind::Assigned | EventKind::Stolen) {
            if let Some(m) = e.machine {
                place.insert(e.job, m);
            }
        }
    }
    place
}

fn counts(place: &HashMap<u64, usize>, machines: usize) -> Vec<u64> {
    let mut out = vec![0; machines];
    for &m in place.values() {
        out[m] += 1;
    }
    out
}

/// Final number of jobs on each machine (after any steals).
pub fn job_counts(trace: &SimTrace) -> Vec<u64> {
    counts(&placement(trace, u64::MAX), trace.machines)
}

/// Fraction of all placed jobs on each machine.
pub fn job_shares(trace: &SimTrace) -> Vec<f64> {
    let c = job_counts(trace);
    let total: u64 = c.iter().sum();
    c.iter()
        .map(|&n| if total == 0 { 0.0 } else { n as f64 / total as f64 })
        .collect()
}

/// Cumulative jobs per machine at each checkpoint fraction of the scheduling
/// window, averaged over `traces`. Indexed `[machine][checkpoint]`.
pub fn fairness_heatmap(traces: &[SimTrace], checkpoints: &[f64]) -> Result<Vec<Vec<f64>>, MetricsError> {
    let first = traces.first().ok_or(MetricsError::EmptyTrace)?;
    if let Some(c) = checkpoints.iter().find(|&&c| !(c > 0.0 && c <= 1.0)) {
        return Err(MetricsError::InvalidArgument(format!(
            "checkpoint {c} outside (0, 1]"
        )));
    }
    let machines = first.machines;
    if traces.iter().any(|t| t.machines != machines) {
        return Err(MetricsError::InvalidArgument("traces differ in machine count".into()));
    }
    let mut sum = vec![vec![0.0; checkpoints.len()]; machines];
    for trace in traces {
        let (_, end) = trace.scheduling_span().ok_or(MetricsError::EmptyTrace)?;
        for (j, &c) in checkpoints.iter().enumerate() {
            let cut = (c * end as f64).floor() as u64;
            for (i, n) in counts(&placement(trace, cut), machines).into_iter().enumerate() {
                sum[i][j] += n as f64;
            }
        }
    }
    let runs = traces.len() as f64;
    Ok(sum
        .into_iter()
        .map(|row| row.into_iter().map(|v| v / runs).collect())
        .collect())
}

/// Population standard deviation over mean.
pub fn coefficient_of_variation(values: &[f64]) -> Option<f64> {
    if values.is_empty() {
        return None;
    }
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    if mean == 0.0 {
        return None;
    }
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n;
    Some(var.sqrt() / mean)
}

/// Load-balance CV: per interval, the CV of per-machine assignment counts,
/// averaged over intervals that saw at least one assignment.
pub fn load_cv(trace: &SimTrace, interval: u64) -> Result<f64, MetricsError> {
    if interval == 0 {
        return Err(MetricsError::InvalidArgument("interval must be >= 1".into()));
    }
    let (start, _) = trace.scheduling_span().ok_or(MetricsError::EmptyTrace)?;
    let mut buckets: Vec<Vec<f64>> = Vec::new();
    for e in trace.of_kind(EventKind::Assigned) {
        let Some(m) = e.machine else { continue };
        let b = ((e.tick - start) / interval) as usize;
        if buckets.len() <= b {
            buckets.resize_with(b + 1, || vec![0.0; trace.machines]);
        }
        buckets[b][m] += 1.0;
    }
    let cvs: Vec<f64> = buckets
        .iter()
        .filter_map(|b| coefficient_of_variation(b))
        .collect();
    if cvs.is_empty() {
        return Err(MetricsError::NoAssignments);
    }
    Ok(cvs.iter().sum::<f64>() / cvs.len() as f64)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Latency {
    /// Mean release delay per machine; `None` for machines with no jobs.
    pub per_machine: Vec<Option<f64>>,
    pub overall: f64,
}

/// Delay from creation to release into a machine queue.
pub fn avg_latency(trace: &SimTrace) -> Result<Latency, MetricsError> {
    let mut created = HashMap::new();
    let mut released = HashMap::new();
    for e in &trace.events {
        match e.kind {
            EventKind::Created => {
                created.insert(e.job, e.tick);
            }
            EventKind::Released => {
                released.insert(e.job, (e.tick, e.machine.unwrap_or(0)));
            }
            _ => {}
        }
    }
    if created.is_empty() {
        return Err(MetricsError::EmptyTrace);
    }
    let mut sums = vec![(0u64, 0u64); trace.machines];
    let mut total = 0u64;
    for (&job, &c) in &created {
        let &(r, m) = released.get(&job).ok_or(MetricsError::IncompleteTrace(job))?;
        let d = r.saturating_sub(c);
        sums[m].0 += d;
        sums[m].1 += 1;
        total += d;
    }
    Ok(Latency {
        per_machine: sums
            .into_iter()
            .map(|(s, n)| (n > 0).then(|| s as f64 / n as f64))
            .collect(),
        overall: total as f64 / created.len() as f64,
    })
}

/// Releases per tick over the scheduling window.
pub fn throughput(trace: &SimTrace) -> Result<f64, MetricsError> {
    let (first, last) = trace.scheduling_span().ok_or(MetricsError::EmptyTrace)?;
    let released = trace.of_kind(EventKind::Released).count();
    Ok(released as f64 / (last - first + 1) as f64)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunReport {
    pub run_id: usize,
    pub policy: String,
    pub jobs: Vec<u64>,
    pub latency: Latency,
    pub cv: f64,
    pub throughput: f64,
}

impl RunReport {
    pub fn from_trace(run_id: usize, trace: &SimTrace, cv_interval: u64) -> Result<Self, MetricsError> {
        Ok(RunReport {
            run_id,
            policy: trace.policy.clone(),
            jobs: job_counts(trace),
            latency: avg_latency(trace)?,
            cv: load_cv(trace, cv_interval)?,
            throughput: throughput(trace)?,
        })
    }

    pub fn shares(&self) -> Vec<f64> {
        let total: u64 = self.jobs.iter().sum();
        self.jobs
            .iter()
            .map(|&n| if total == 0 { 0.0 } else { n as f64 / total as f64 })
            .collect()
    }
}

pub const CSV_HEADER: &str = "run_id,policy,machine,jobs,avg_latency,cv,throughput";

/// One row per run per machine. Machines without jobs leave latency empty.
pub fn reports_csv(reports: &[RunReport]) -> String {
    let mut out = String::from(CSV_HEADER);
    out.push('\n');
    for r in reports {
        for (m, jobs) in r.jobs.iter().enumerate() {
            let latency = r.latency.per_machine[m].map_or(String::new(), |v| v.to_string());
            writeln!(
                out,
                "{},{},{},{},{},{},{}",
                r.run_id, r.policy, m, jobs, latency, r.cv, r.throughput
            )
            .expect("writing to a String");
        }
    }
    out
}

/// Heatmap rows as `machine,c1,c2,...`.
pub fn heatmap_csv(heatmap: &[Vec<f64>], checkpoints: &[f64]) -> String {
    let mut out = String::from("machine");
    for c in checkpoints {
        write!(out, ",{c}").expect("writing to a String");
    }
    out.push('\n');
    for (m, row) in heatmap.iter().enumerate() {
        write!(out, "{m}").expect("writing to a String");
        for v in row {
            write!(out, ",{v}").expect("writing to a String");
        }
        out.push('\n');
    }
    out
}
