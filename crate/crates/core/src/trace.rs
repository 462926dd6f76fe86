//! Timestamped event log shared by every policy; all metrics read from it.

use std::collections::HashMap;
use std::io::{BufRead, Write};

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "UPPERCASE")]
pub enum EventKind {
    Created,
    /// Taken from the input FIFO for a placement decision.
    Admitted,
    Assigned,
    /// Handed to the machine's execution queue.
    Released,
    Enqueued,
    Completed,
    Stolen,
}

impl EventKind {
    /// Scheduler-side events, as opposed to machine execution and rebalancing.
    pub fn is_scheduling(self) -> bool {
        !matches!(self, EventKind::Enqueued | EventKind::Completed | EventKind::Stolen)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct TraceEvent {
    pub tick: u64,
    pub kind: EventKind,
    pub job: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub machine: Option<usize>,
    /// Victim of a steal.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub from: Option<usize>,
}

#[derive(Debug, Error)]
pub enum TraceError {
    #[error("trace I/O: {0}")]
    Io(#[from] std::io::Error),
    #[error("trace line {line}: {source}")]
    Parse {
        line: usize,
        source: serde_json::Error,
    },
    #[error("trace header missing")]
    MissingHeader,
    #[error("job {job}: {reason}")]
    Inconsistent { job: u64, reason: String },
}

#[derive(Debug, Clone, Serialize, Deserialize)]
struct Header {
    machines: usize,
    policy: String,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SimTrace {
    pub machines: usize,
    pub policy: String,
    pub events: Vec<TraceEvent>,
}

impl SimTrace {
    pub fn new(machines: usize, policy: impl Into<String>) -> Self {
        SimTrace {
            machines,
            policy: policy.into(),
            events: Vec::new(),
        }
    }

    pub fn push(&mut self, tick: u64, kind: EventKind, job: u64, machine: Option<usize>) {
        self.events.push(TraceEvent {
            tick,
            kind,
            job,
            machine,
            from: None,
        });
    }

    pub fn push_steal(&mut self, tick: u64, job: u64, from: usize, to: usize) {
        self.events.push(TraceEvent {
            tick,
            kind: EventKind::Stolen,
            job,
            machine: Some(to),
            from: Some(from),
        });
    }

    pub fn is_empty(&self) -> bool {
        self.events.is_empty()
    }

    pub fn of_kind(&self, kind: EventKind) -> impl Iterator<Item = &TraceEvent> + '_ {
        self.events.iter().filter(move |e| e.kind == kind)
    }

    /// First and last tick of scheduler-side events.
    pub fn scheduling_span(&self) -> Option<(u64, u64)> {
        let mut ticks = self
            .events
            .iter()
            .filter(|e| e.kind.is_scheduling())
            .map(|e| e.tick);
        let first = ticks.next()?;
        let (lo, hi) = ticks.fold((first, first), |(lo, hi), t| (lo.min(t), hi.max(t)));
        Some((lo, hi))
    }

    /// Header line, then one event per line.
    pub fn write_jsonl<W: Write>(&self, mut out: W) -> Result<(), TraceError> {
        let header = Header {
            machines: self.machines,
            policy: self.policy.clone(),
        };
        serde_json::to_writer(&mut out, &header).map_err(std::io::Error::from)?;
        out.write_all(b"\n")?;
        for event in &self.events {
            serde_json::to_writer(&mut out, event).map_err(std::io::Error::from)?;
            out.write_all(b"\n")?;
        }
        Ok(())
    }

    pub fn read_jsonl<R: BufRead>(input: R) -> Result<Self, TraceError> {
        let mut lines = input.lines().enumerate();
        let header: Header = loop {
            let (i, line) = lines.next().ok_or(TraceError::MissingHeader)?;
            let line = line?;
            if line.trim().is_empty() {
                continue;
            }
            break serde_json::from_str(&line)
                .map_err(|source| TraceError::Parse { line: i + 1, source })?;
        };
        let mut trace = SimTrace::new(header.machines, header.policy);
        for (i, line) in lines {
            let line = line?;
            if line.trim().is_empty() {
                continue;
            }
            let event = serde_json::from_str(&line)
                .map_err(|source| TraceError::Parse { line: i + 1, source })?;
            trace.events.push(event);
        }
        Ok(trace)
    }

    /// Per-job ordering and multiplicity checks.
    pub fn validate(&self) -> Result<(), TraceError> {
        #[derive(Default)]
        struct Seen {
            created: Option<u64>,
            assigned: Option<u64>,
            released: Option<u64>,
            counts: HashMap<EventKind, u32>,
        }
        let mut jobs: HashMap<u64, Seen> = HashMap::new();
        for e in &self.events {
            if let Some(m) = e.machine {
                if m >= self.machines {
                    return Err(TraceError::Inconsistent {
                        job: e.job,
                        reason: format!("machine {m} out of range"),
                    });
                }
            }
            let seen = jobs.entry(e.job).or_default();
            let count = seen.counts.entry(e.kind).or_default();
            *count += 1;
            if *count > 1 && e.kind != EventKind::Stolen {
                return Err(TraceError::Inconsistent {
                    job: e.job,
                    reason: format!("{:?} recorded twice", e.kind),
                });
            }
            match e.kind {
                EventKind::Created => seen.created = Some(e.tick),
                EventKind::Assigned => seen.assigned = Some(e.tick),
                EventKind::Released => seen.released = Some(e.tick),
                _ => {}
            }
        }
        for (&job, seen) in &jobs {
            let ordered = match (seen.created, seen.assigned, seen.released) {
                (Some(c), Some(a), Some(r)) => c <= a && a <= r,
                (Some(c), Some(a), None) => c <= a,
                (Some(_), None, None) => true,
                _ => false,
            };
            if !ordered {
                return Err(TraceError::Inconsistent {
                    job,
                    reason: "CREATED <= ASSIGNED <= RELEASED violated".into(),
                });
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample() -> SimTrace {
        let mut t = SimTrace::new(2, "sos");
        t.push(0, EventKind::Created, 1, None);
        t.push(0, EventKind::Admitted, 1, Some(0));
        t.push(0, EventKind::Assigned, 1, Some(0));
        t.push(4, EventKind::Released, 1, Some(0));
        t.push(4, EventKind::Enqueued, 1, Some(0));
        t.push(13, EventKind::Completed, 1, Some(0));
        t
    }

    #[test]
    fn jsonl_round_trip() {
        let mut t = sample();
        t.push_steal(5, 1, 0, 1);
        let mut buf = Vec::new();
        t.write_jsonl(&mut buf).unwrap();
        let text = String::from_utf8(buf.clone()).unwrap();
        assert!(text.starts_with(r#"{"machines":2,"policy":"sos"}"#));
        assert!(text.contains(r#"{"tick":5,"kind":"STOLEN","job":1,"machine":1,"from":0}"#));
        let back = SimTrace::read_jsonl(buf.as_slice()).unwrap();
        assert_eq!(back, t);
    }

    #[test]
    fn validation_catches_disorder_and_duplicates() {
        sample().validate().unwrap();
        let mut t = sample();
        t.push(5, EventKind::Released, 1, Some(0));
        assert!(t.validate().is_err());

        let mut t = SimTrace::new(1, "x");
        t.push(5, EventKind::Created, 1, None);
        t.push(3, EventKind::Assigned, 1, Some(0));
        assert!(t.validate().is_err());
    }

    #[test]
    fn span_ignores_execution_events() {
        assert_eq!(sample().scheduling_span(), Some((0, 4)));
        assert_eq!(SimTrace::new(1, "x").scheduling_span(), None);
    }
}
