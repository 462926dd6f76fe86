//! Numeric-format comparison against the FP32 datapath.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::config::ExperimentConfig;
use crate::domain::{self, Job};
use crate::engine::{release_counter, SchedulerConfig};
use crate::metrics::job_shares;
use crate::montecarlo::{sample_workloads, ExperimentError};
use crate::numerics::{relative_error, NumericFormat, Scheme};
use crate::sim::{run, Policy, SimOptions};
use crate::workload::generate;

/// Summary of a relative-error sample, in percent.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ErrorStats {
    pub count: usize,
    pub mean: f64,
    pub median: f64,
    pub p95: f64,
    pub max: f64,
}

impl ErrorStats {
    pub fn from_samples(mut samples: Vec<f64>) -> Self {
        if samples.is_empty() {
            return ErrorStats {
                count: 0,
                mean: 0.0,
                median: 0.0,
                p95: 0.0,
                max: 0.0,
            };
        }
        samples.sort_by(f64::total_cmp);
        let n = samples.len();
        let at = |q: f64| samples[((q * (n - 1) as f64).round() as usize).min(n - 1)];
        ErrorStats {
            count: n,
            mean: samples.iter().sum::<f64>() / n as f64,
            median: at(0.5),
            p95: at(0.95),
            max: samples[n - 1],
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SchemeReport {
    pub scheme: Scheme,
    pub wspt_error: ErrorStats,
    pub alpha_error: ErrorStats,
    /// Per-machine job share, averaged over workloads.
    pub mean_shares: Vec<f64>,
    /// `mean_shares` minus the FP32 `mean_shares`.
    pub share_delta: Vec<f64>,
    /// Per-machine mean over workloads of `|share - share_fp32|`.
    pub mean_abs_share_delta: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QuantReport {
    pub workloads: usize,
    pub schemes: Vec<SchemeReport>,
}

/// WSPT and release-counter errors of `format` against FP32 over every
/// (job, machine) pair.
pub fn attribute_errors(jobs: &[Job], alpha: f64, format: &NumericFormat) -> (Vec<f64>, Vec<f64>) {
    let fp32 = NumericFormat::fp32();
    let mut wspt = Vec::new();
    let mut counter = Vec::new();
    for job in jobs {
        for &e in &job.ept {
            let q = domain::wspt(job.weight, e, format).to_f64();
            let r = domain::wspt(job.weight, e, &fp32).to_f64();
            if let Ok(err) = relative_error(q, r) {
                wspt.push(err);
            }
            let q = release_counter(alpha, e, format) as f64;
            let r = release_counter(alpha, e, &fp32) as f64;
            if let Ok(err) = relative_error(q, r) {
                counter.push(err);
            }
        }
    }
    (wspt, counter)
}

struct DrawOutcome {
    wspt: Vec<Vec<f64>>,
    alpha: Vec<Vec<f64>>,
    shares: Vec<Vec<f64>>,
}

fn run_draw(config: &ExperimentConfig, jobs: &[Job]) -> Result<DrawOutcome, ExperimentError> {
    let base = config.sim_options()?;
    let mut out = DrawOutcome {
        wspt: Vec::new(),
        alpha: Vec::new(),
        shares: Vec::new(),
    };
    for scheme in Scheme::ALL {
        let format = NumericFormat::new(scheme);
        let options = SimOptions {
            scheduler: SchedulerConfig {
                format,
                ..base.scheduler
            },
            ..base
        };
        let trace = run(Policy::Sos, jobs, &options)?;
        let (w, a) = attribute_errors(jobs, config.workload.alpha, &format);
        out.wspt.push(w);
        out.alpha.push(a);
        out.shares.push(job_shares(&trace));
    }
    Ok(out)
}

/// Runs the scheduler under every scheme on `draws` sampled workloads.
pub fn quant_study(config: &ExperimentConfig, draws: usize, seed: u64) -> Result<QuantReport, ExperimentError> {
    config.validate()?;
    let workloads = sample_workloads(&config.workload, &config.montecarlo, draws.max(1), seed);
    let outcomes: Vec<DrawOutcome> = workloads
        .par_iter()
        .map(|w| {
            let mut c = config.clone();
            c.workload = w.clone();
            let jobs = generate(w)?;
            run_draw(&c, &jobs)
        })
        .collect::<Result<_, _>>()?;

    let machines = config.workload.mc.len();
    let n = outcomes.len() as f64;
    let fp32 = Scheme::ALL
        .iter()
        .position(|&s| s == Scheme::Fp32)
        .expect("FP32 is a scheme");
    let mean_shares = |s: usize| -> Vec<f64> {
        (0..machines)
            .map(|m| outcomes.iter().map(|o| o.shares[s][m]).sum::<f64>() / n)
            .collect()
    };
    let reference = mean_shares(fp32);
    let schemes = Scheme::ALL
        .iter()
        .enumerate()
        .map(|(s, &scheme)| {
            let shares = mean_shares(s);
            SchemeReport {
                scheme,
                wspt_error: ErrorStats::from_samples(
                    outcomes.iter().flat_map(|o| o.wspt[s].iter().copied()).collect(),
                ),
                alpha_error: ErrorStats::from_samples(
                    outcomes.iter().flat_map(|o| o.alpha[s].iter().copied()).collect(),
                ),
                share_delta: shares.iter().zip(&reference).map(|(a, b)| a - b).collect(),
                mean_abs_share_delta: (0..machines)
                    .map(|m| {
                        outcomes
                            .iter()
                            .map(|o| (o.shares[s][m] - o.shares[fp32][m]).abs())
                            .sum::<f64>()
                            / n
                    })
                    .collect(),
                mean_shares: shares,
            }
        })
        .collect();
    Ok(QuantReport {
        workloads: outcomes.len(),
        schemes,
    })
}
