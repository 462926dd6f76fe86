//! Monte-Carlo experiments over randomized workload parameters.

use rand::{Rng, RngCore};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::config::ExperimentConfig;
use crate::domain::Job;
use crate::metrics::{coefficient_of_variation, fairness_heatmap, MetricsError, RunReport};
use crate::rng::{stream_rng, Stream};
use crate::sim::{run, Policy, SimError};
use crate::trace::SimTrace;
use crate::workload::{generate, BurstType, JobComposition, ValidationErrors, WorkloadConfig};

#[derive(Debug, Error)]
pub enum ExperimentError {
    #[error("invalid configuration: {0}")]
    Config(#[from] ValidationErrors),
    #[error(transparent)]
    Sim(#[from] SimError),
    #[error(transparent)]
    Metrics(#[from] MetricsError),
}

/// Inclusive sampling ranges for the varied workload knobs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct McRanges {
    pub bf: [u32; 2],
    pub it: [u32; 2],
    pub ii: [u32; 2],
    /// Probability of a RANDOM burst type.
    pub random_burst: f64,
    /// Draw the composition uniformly from the simplex; otherwise keep the
    /// base composition.
    pub vary_jc: bool,
}

impl Default for McRanges {
    fn default() -> Self {
        McRanges {
            bf: [1, 5],
            it: [0, 10],
            ii: [5, 50],
            random_burst: 0.5,
            vary_jc: true,
        }
    }
}

impl McRanges {
    pub fn validate(&self) -> Vec<String> {
        let mut errors = Vec::new();
        for (name, [lo, hi], min) in [("bf", self.bf, 1), ("it", self.it, 0), ("ii", self.ii, 1)] {
            if lo < min || lo > hi {
                errors.push(format!("montecarlo.{name} range [{lo}, {hi}] is invalid"));
            }
        }
        if !(0.0..=1.0).contains(&self.random_burst) {
            errors.push("montecarlo.random_burst must lie in [0, 1]".into());
        }
        errors
    }
}

/// Uniform point on the 2-simplex.
fn simplex<R: Rng>(rng: &mut R) -> JobComposition {
    let (a, b): (f64, f64) = (rng.random(), rng.random());
    let (lo, hi) = if a < b { (a, b) } else { (b, a) };
    JobComposition::new(lo, hi - lo, 1.0 - hi)
}

/// Draws `draws` workload variations of `base`, in order.
pub fn sample_workloads(base: &WorkloadConfig, ranges: &McRanges, draws: usize, seed: u64) -> Vec<WorkloadConfig> {
    let mut rng = stream_rng(seed, Stream::MonteCarlo);
    (0..draws)
        .map(|_| {
            let mut c = base.clone();
            if ranges.vary_jc {
                c.jc = simplex(&mut rng);
            }
            c.bf = rng.random_range(ranges.bf[0]..=ranges.bf[1]);
            c.it = rng.random_range(ranges.it[0]..=ranges.it[1]);
            c.ii = rng.random_range(ranges.ii[0]..=ranges.ii[1]);
            c.bt = if rng.random_bool(ranges.random_burst) {
                BurstType::Random
            } else {
                BurstType::Uniform
            };
            c.seed = rng.next_u64();
            c
        })
        .collect()
}

/// Runs every configured policy over `jobs`.
pub fn run_policies(
    config: &ExperimentConfig,
    jobs: &[Job],
) -> Result<Vec<SimTrace>, ExperimentError> {
    let options = config.sim_options()?;
    config
        .policies
        .iter()
        .map(|&p| run(p, jobs, &options).map_err(ExperimentError::from))
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PolicySummary {
    pub policy: Policy,
    pub mean_throughput: f64,
    pub throughput_cv: f64,
    pub mean_latency: f64,
    pub mean_load_cv: f64,
    /// Mean per-machine share of jobs.
    pub shares: Vec<f64>,
    /// `[machine][checkpoint]`, averaged over draws.
    pub heatmap: Vec<Vec<f64>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct McReport {
    pub seed: u64,
    pub checkpoints: Vec<f64>,
    pub workloads: Vec<WorkloadConfig>,
    pub runs: Vec<RunReport>,
    pub summary: Vec<PolicySummary>,
}

struct DrawResult {
    reports: Vec<RunReport>,
    heatmaps: Vec<Vec<Vec<f64>>>,
}

fn run_draw(config: &ExperimentConfig, index: usize) -> Result<DrawResult, ExperimentError> {
    let jobs = generate(&config.workload)?;
    let traces = run_policies(config, &jobs)?;
    let mut reports = Vec::with_capacity(traces.len());
    let mut heatmaps = Vec::with_capacity(traces.len());
    for trace in &traces {
        reports.push(RunReport::from_trace(index, trace, config.cv_interval)?);
        heatmaps.push(fairness_heatmap(std::slice::from_ref(trace), &config.checkpoints)?);
    }
    Ok(DrawResult { reports, heatmaps })
}

fn mean(values: impl Iterator<Item = f64>) -> f64 {
    let (sum, n) = values.fold((0.0, 0usize), |(s, n), v| (s + v, n + 1));
    if n == 0 {
        0.0
    } else {
        sum / n as f64
    }
}

/// Samples `draws` workloads from `config`, runs them in parallel and merges
/// the results in draw order.
pub fn monte_carlo(config: &ExperimentConfig, draws: usize, seed: u64) -> Result<McReport, ExperimentError> {
    config.validate()?;
    if draws == 0 {
        return Err(ValidationErrors(vec!["draws must be >= 1".into()]).into());
    }
    let workloads = sample_workloads(&config.workload, &config.montecarlo, draws, seed);
    let results: Vec<DrawResult> = workloads
        .par_iter()
        .enumerate()
        .map(|(i, w)| {
            let mut c = config.clone();
            c.workload = w.clone();
            run_draw(&c, i)
        })
        .collect::<Result<_, _>>()?;

    let summary = config
        .policies
        .iter()
        .enumerate()
        .map(|(p, &policy)| {
            let reports: Vec<&RunReport> = results.iter().map(|r| &r.reports[p]).collect();
            let throughputs: Vec<f64> = reports.iter().map(|r| r.throughput).collect();
            let machines = config.workload.mc.len();
            let shares = (0..machines)
                .map(|m| mean(reports.iter().map(|r| r.shares()[m])))
                .collect();
            let heatmap = (0..machines)
                .map(|m| {
                    (0..config.checkpoints.len())
                        .map(|c| mean(results.iter().map(|r| r.heatmaps[p][m][c])))
                        .collect()
                })
                .collect();
            PolicySummary {
                policy,
                mean_throughput: mean(throughputs.iter().copied()),
                throughput_cv: coefficient_of_variation(&throughputs).unwrap_or(0.0),
                mean_latency: mean(reports.iter().map(|r| r.latency.overall)),
                mean_load_cv: mean(reports.iter().map(|r| r.cv)),
                shares,
                heatmap,
            }
        })
        .collect();

    Ok(McReport {
        seed,
        checkpoints: config.checkpoints.clone(),
        workloads,
        runs: results.into_iter().flat_map(|r| r.reports).collect(),
        summary,
    })
}
