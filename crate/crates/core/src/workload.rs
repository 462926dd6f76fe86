//! Seeded synthetic job streams.

use std::fmt;
use std::io::{BufRead, Write};

use rand::distr::weighted::WeightedIndex;
use rand::distr::Distribution;
use rand::seq::SliceRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::domain::{default_machines, ept_model, AffinityTable, Job, MachineProfile, Nature};
use crate::engine::SchedulerConfig;
use crate::numerics::{NumericFormat, Scheme};
use crate::rng::{stream_rng, Stream};

/// Fractions of each job nature.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct JobComposition {
    pub compute: f64,
    pub memory: f64,
    pub mixed: f64,
}

impl JobComposition {
    pub const fn new(compute: f64, memory: f64, mixed: f64) -> Self {
        JobComposition {
            compute,
            memory,
            mixed,
        }
    }

    pub fn fraction(&self, nature: Nature) -> f64 {
        match nature {
            Nature::Compute => self.compute,
            Nature::Memory => self.memory,
            Nature::Mixed => self.mixed,
        }
    }

    pub fn sum(&self) -> f64 {
        self.compute + self.memory + self.mixed
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum BurstType {
    /// Each active tick releases a uniform count in `[0, bf]`.
    Random,
    /// Each active tick releases exactly `bf` jobs.
    Uniform,
}

fn default_weight_range() -> [u32; 2] {
    [1, 20]
}

fn default_alpha() -> f64 {
    0.5
}

fn default_precision() -> Scheme {
    Scheme::Int8
}

fn default_capacity() -> usize {
    10
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct WorkloadConfig {
    pub jc: JobComposition,
    #[serde(default = "default_machines")]
    pub mc: Vec<MachineProfile>,
    /// Burst factor: most jobs released in one tick.
    pub bf: u32,
    pub bt: BurstType,
    /// Idle ticks inserted after each idle interval.
    pub it: u32,
    /// Jobs released between idle periods.
    pub ii: u32,
    pub total_jobs: u64,
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "default_weight_range")]
    pub weight_range: [u32; 2],
    #[serde(default = "default_alpha")]
    pub alpha: f64,
    #[serde(default = "default_precision")]
    pub precision: Scheme,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub wspt_frac_bits: Option<u32>,
    #[serde(default = "default_capacity")]
    pub vs_capacity: usize,
    #[serde(default)]
    pub affinity: AffinityTable,
}

impl WorkloadConfig {
    /// A config over the default machines with default numerics.
    pub fn new(jc: JobComposition, bf: u32, bt: BurstType, it: u32, ii: u32, total_jobs: u64) -> Self {
        WorkloadConfig {
            jc,
            mc: default_machines(),
            bf,
            bt,
            it,
            ii,
            total_jobs,
            seed: 0,
            weight_range: default_weight_range(),
            alpha: default_alpha(),
            precision: default_precision(),
            wspt_frac_bits: None,
            vs_capacity: default_capacity(),
            affinity: AffinityTable::default(),
        }
    }

    pub fn format(&self) -> Result<NumericFormat, ValidationErrors> {
        let base = NumericFormat::new(self.precision);
        match self.wspt_frac_bits {
            None => Ok(base),
            Some(bits) => base
                .with_wspt_frac_bits(bits)
                .map_err(|e| ValidationErrors(vec![format!("wspt_frac_bits: {e}")])),
        }
    }

    pub fn scheduler_config(&self) -> Result<SchedulerConfig, ValidationErrors> {
        Ok(SchedulerConfig {
            machines: self.mc.len(),
            capacity: self.vs_capacity,
            alpha: self.alpha,
            format: self.format()?,
        })
    }
}

/// Every violated constraint of a configuration.
#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub struct ValidationErrors(pub Vec<String>);

impl fmt::Display for ValidationErrors {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0.join("; "))
    }
}

pub fn validate_config(config: &WorkloadConfig) -> Result<(), ValidationErrors> {
    let mut errors = Vec::new();
    let jc = &config.jc;
    for nature in Nature::ALL {
        let f = jc.fraction(nature);
        if !(f.is_finite() && f >= 0.0) {
            errors.push(format!("jc.{nature:?} must be a nonnegative fraction, got {f}").to_lowercase());
        }
    }
    if (jc.sum() - 1.0).abs() > 1e-9 {
        errors.push(format!("job composition sums to {}, expected 1.00", jc.sum()));
    }
    if config.mc.is_empty() {
        errors.push("mc must list at least one machine".into());
    }
    if config.bf < 1 {
        errors.push("burst factor bf must be >= 1".into());
    }
    if config.ii < 1 {
        errors.push("idle interval ii must be >= 1".into());
    }
    if config.total_jobs < 1 {
        errors.push("total_jobs must be >= 1".into());
    }
    let [lo, hi] = config.weight_range;
    if lo < 1 || lo > hi {
        errors.push(format!("weight_range [{lo}, {hi}] must satisfy 1 <= lo <= hi"));
    }
    if !(config.alpha > 0.0 && config.alpha <= 1.0) {
        errors.push(format!("alpha must lie in (0, 1], got {}", config.alpha));
    }
    if config.vs_capacity < 1 {
        errors.push("vs_capacity must be >= 1".into());
    }
    if let Err(e) = config.format() {
        errors.extend(e.0);
    }
    let table = &config.affinity;
    let bases = [table.compute, table.memory, table.mixed]
        .into_iter()
        .flat_map(|r| [r.cpu, r.gpu, r.mixed]);
    if bases
        .chain([table.best_factor, table.worst_factor])
        .any(|v| !(v.is_finite() && v > 0.0))
    {
        errors.push("affinity entries must be positive".into());
    }
    if errors.is_empty() {
        Ok(())
    } else {
        Err(ValidationErrors(errors))
    }
}

/// Nature sequence hitting `total * jc` exactly where integral; the residual
/// is drawn in proportion to the fractional remainders.
fn natures(config: &WorkloadConfig) -> Vec<Nature> {
    let mut rng = stream_rng(config.seed, Stream::Nature);
    let total = config.total_jobs;
    let mut out = Vec::with_capacity(total as usize);
    let mut remainders = [0.0; 3];
    for (i, nature) in Nature::ALL.into_iter().enumerate() {
        let exact = total as f64 * config.jc.fraction(nature);
        let whole = (exact.floor() as u64).min(total - out.len() as u64);
        remainders[i] = exact - exact.floor();
        out.extend(std::iter::repeat_n(nature, whole as usize));
    }
    let residual = total - out.len() as u64;
    if residual > 0 {
        let weights = if remainders.iter().sum::<f64>() > 0.0 {
            remainders
        } else {
            Nature::ALL.map(|n| config.jc.fraction(n))
        };
        let dist = WeightedIndex::new(weights).expect("composition validated");
        for _ in 0..residual {
            out.push(Nature::ALL[dist.sample(&mut rng)]);
        }
    }
    out.shuffle(&mut rng);
    out
}

/// Release tick of every job, in order.
fn arrival_ticks(config: &WorkloadConfig) -> Vec<u64> {
    let mut rng = stream_rng(config.seed, Stream::Burst);
    let total = config.total_jobs;
    let mut ticks = Vec::with_capacity(total as usize);
    let mut tick = 0u64;
    let mut since_idle = 0u32;
    while (ticks.len() as u64) < total {
        let burst = match config.bt {
            BurstType::Uniform => config.bf,
            BurstType::Random => rng.random_range(0..=config.bf),
        };
        let left = total - ticks.len() as u64;
        let count = (burst.min(config.ii - since_idle) as u64).min(left);
        ticks.extend(std::iter::repeat_n(tick, count as usize));
        since_idle += count as u32;
        if since_idle == config.ii {
            since_idle = 0;
            tick += config.it as u64;
        }
        tick += 1;
    }
    ticks
}

/// Generates the job trace; ids start at 1.
pub fn generate(config: &WorkloadConfig) -> Result<Vec<Job>, ValidationErrors> {
    validate_config(config)?;
    let natures = natures(config);
    let ticks = arrival_ticks(config);
    let mut weight_rng = stream_rng(config.seed, Stream::Weight);
    let mut jitter_rng = stream_rng(config.seed, Stream::Jitter);
    let [lo, hi] = config.weight_range;
    Ok(natures
        .into_iter()
        .zip(ticks)
        .enumerate()
        .map(|(i, (nature, created_at))| Job {
            id: i as u64 + 1,
            created_at,
            nature,
            weight: weight_rng.random_range(lo..=hi),
            ept: config
                .mc
                .iter()
                .map(|&p| ept_model(nature, p, &config.affinity, &mut jitter_rng))
                .collect(),
        })
        .collect())
}

#[derive(Debug, Error)]
pub enum JobTraceError {
    #[error("job trace I/O: {0}")]
    Io(#[from] std::io::Error),
    #[error("job trace line {line}: {source}")]
    Parse {
        line: usize,
        source: serde_json::Error,
    },
    #[error("job trace line {line}: {reason}")]
    Invalid { line: usize, reason: String },
}

pub fn write_jobs<W: Write>(jobs: &[Job], mut out: W) -> Result<(), JobTraceError> {
    for job in jobs {
        serde_json::to_writer(&mut out, job).map_err(std::io::Error::from)?;
        out.write_all(b"\n")?;
    }
    Ok(())
}

/// Reads a job trace, checking ids, arrival order and EPT bounds.
pub fn read_jobs<R: BufRead>(input: R) -> Result<Vec<Job>, JobTraceError> {
    let mut jobs: Vec<Job> = Vec::new();
    for (i, line) in input.lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let job: Job = serde_json::from_str(&line)
            .map_err(|source| JobTraceError::Parse { line: i + 1, source })?;
        let invalid = |reason: String| JobTraceError::Invalid { line: i + 1, reason };
        if job.id == 0 {
            return Err(invalid("job id 0 is reserved".into()));
        }
        if job.weight == 0 || job.ept.contains(&0) {
            return Err(invalid(format!("job {} has a zero weight or EPT", job.id)));
        }
        if let Some(prev) = jobs.last() {
            if job.created_at < prev.created_at {
                return Err(invalid(format!("job {} arrives before its predecessor", job.id)));
            }
            if job.ept.len() != prev.ept.len() {
                return Err(invalid(format!("job {} has a different machine count", job.id)));
            }
        }
        jobs.push(job);
    }
    Ok(jobs)
}
