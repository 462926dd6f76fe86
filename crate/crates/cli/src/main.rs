use std::fs::{self, File};
use std::io::{BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use serde::Serialize;

use sos_core::config::{ConfigError, ExperimentConfig};
use sos_core::engine::EngineError;
use sos_core::metrics::{fairness_heatmap, heatmap_csv, reports_csv, MetricsError, RunReport};
use sos_core::montecarlo::{monte_carlo, run_policies, ExperimentError};
use sos_core::quantstudy::quant_study;
use sos_core::sim::{Policy, SimError};
use sos_core::workload::{generate, read_jobs, write_jobs, JobTraceError};
use sos_core::Scheme;

#[derive(Parser)]
#[command(name = "sos", version, about = "Stochastic online scheduling simulator")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Common {
    /// Experiment configuration (JSON).
    #[arg(long)]
    config: PathBuf,
    /// Override the workload seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Override the scheduler number format.
    #[arg(long)]
    precision: Option<Scheme>,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a job trace (JSON lines).
    Gen {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        out: PathBuf,
    },
    /// Run policies over a job trace and write event logs and metrics.
    Run {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        trace: PathBuf,
        #[arg(long)]
        out: PathBuf,
        /// Comma-separated policies; defaults to the config's list.
        #[arg(long, value_delimiter = ',')]
        policy: Vec<Policy>,
        /// Perturb actual processing times around the EPT.
        #[arg(long)]
        noise: bool,
    },
    /// Compare number formats against FP32 over sampled workloads.
    Quantstudy {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        draws: Option<usize>,
    },
    /// Monte-Carlo comparison over sampled workloads.
    Montecarlo {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        draws: Option<usize>,
        #[arg(long, value_delimiter = ',')]
        policy: Vec<Policy>,
        #[arg(long)]
        noise: bool,
    },
}

enum Failure {
    Validation(String),
    Io(String),
    Internal(String),
}

impl Failure {
    fn code(&self) -> u8 {
        match self {
            Failure::Validation(_) => 1,
            Failure::Io(_) => 2,
            Failure::Internal(_) => 3,
        }
    }

    fn message(&self) -> &str {
        match self {
            Failure::Validation(m) | Failure::Io(m) | Failure::Internal(m) => m,
        }
    }
}

impl From<ConfigError> for Failure {
    fn from(e: ConfigError) -> Self {
        match e {
            ConfigError::Io { .. } => Failure::Io(e.to_string()),
            _ => Failure::Validation(e.to_string()),
        }
    }
}

impl From<JobTraceError> for Failure {
    fn from(e: JobTraceError) -> Self {
        match e {
            JobTraceError::Io(_) => Failure::Io(e.to_string()),
            _ => Failure::Validation(e.to_string()),
        }
    }
}

impl From<SimError> for Failure {
    fn from(e: SimError) -> Self {
        match e {
            SimError::Engine(EngineError::Invariant(_)) | SimError::Timeout(_) => {
                Failure::Internal(e.to_string())
            }
            _ => Failure::Validation(e.to_string()),
        }
    }
}

impl From<MetricsError> for Failure {
    fn from(e: MetricsError) -> Self {
        Failure::Internal(e.to_string())
    }
}

impl From<ExperimentError> for Failure {
    fn from(e: ExperimentError) -> Self {
        match e {
            ExperimentError::Config(v) => Failure::Validation(v.to_string()),
            ExperimentError::Sim(s) => s.into(),
            ExperimentError::Metrics(m) => m.into(),
        }
    }
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> Failure + '_ {
    move |e| Failure::Io(format!("{}: {e}", path.display()))
}

fn load_config(common: &Common) -> Result<ExperimentConfig, Failure> {
    let mut config = ExperimentConfig::load(&common.config)?;
    if let Some(seed) = common.seed {
        config.workload.seed = seed;
    }
    if let Some(p) = common.precision {
        config.workload.precision = p;
        config.workload.wspt_frac_bits = None;
    }
    config
        .validate()
        .map_err(|e| Failure::Validation(e.to_string()))?;
    Ok(config)
}

fn create(path: &Path) -> Result<BufWriter<File>, Failure> {
    File::create(path).map(BufWriter::new).map_err(io_err(path))
}

fn write_text(path: &Path, text: &str) -> Result<(), Failure> {
    fs::write(path, text).map_err(io_err(path))
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<(), Failure> {
    let mut out = create(path)?;
    serde_json::to_writer_pretty(&mut out, value).map_err(|e| Failure::Internal(e.to_string()))?;
    out.write_all(b"\n").map_err(io_err(path))?;
    out.flush().map_err(io_err(path))
}

fn make_dir(path: &Path) -> Result<(), Failure> {
    fs::create_dir_all(path).map_err(io_err(path))
}

fn cmd_gen(common: &Common, out: &Path) -> Result<(), Failure> {
    let config = load_config(common)?;
    let jobs = generate(&config.workload).map_err(|e| Failure::Validation(e.to_string()))?;
    let mut file = create(out)?;
    write_jobs(&jobs, &mut file)?;
    file.flush().map_err(io_err(out))?;
    println!(
        "wrote {} jobs (seed {}) to {}",
        jobs.len(),
        config.workload.seed,
        out.display()
    );
    Ok(())
}

fn cmd_run(
    common: &Common,
    trace: &Path,
    out: &Path,
    policies: &[Policy],
    noise: bool,
) -> Result<(), Failure> {
    let mut config = load_config(common)?;
    if !policies.is_empty() {
        config.policies = policies.to_vec();
    }
    config.noise |= noise;
    let file = File::open(trace).map_err(io_err(trace))?;
    let jobs = read_jobs(BufReader::new(file))?;
    if let Some(job) = jobs.iter().find(|j| j.ept.len() != config.workload.mc.len()) {
        return Err(Failure::Validation(format!(
            "job {} has {} EPT entries but the config lists {} machines",
            job.id,
            job.ept.len(),
            config.workload.mc.len()
        )));
    }
    make_dir(out)?;
    let traces = run_policies(&config, &jobs)?;
    for (policy, sim) in config.policies.iter().zip(&traces) {
        let mut file = create(&out.join(format!("{policy}.trace.jsonl")))?;
        sim.write_jsonl(&mut file)
            .map_err(|e| Failure::Io(e.to_string()))?;
        file.flush().map_err(|e| Failure::Io(e.to_string()))?;
        let report = RunReport::from_trace(0, sim, config.cv_interval)?;
        write_text(&out.join(format!("{policy}.metrics.csv")), &reports_csv(std::slice::from_ref(&report)))?;
        write_json(&out.join(format!("{policy}.metrics.json")), &report)?;
        let heatmap = fairness_heatmap(std::slice::from_ref(sim), &config.checkpoints)?;
        write_text(
            &out.join(format!("{policy}.heatmap.csv")),
            &heatmap_csv(&heatmap, &config.checkpoints),
        )?;
        println!(
            "{policy}: {} jobs, throughput {:.4}/tick, mean latency {:.2}, load CV {:.4}",
            jobs.len(),
            report.throughput,
            report.latency.overall,
            report.cv
        );
    }
    Ok(())
}

fn cmd_quantstudy(common: &Common, out: &Path, draws: Option<usize>) -> Result<(), Failure> {
    let config = load_config(common)?;
    let draws = draws.unwrap_or(config.draws);
    let report = quant_study(&config, draws, config.workload.seed)?;
    make_dir(out)?;
    write_json(&out.join("quantstudy.json"), &report)?;
    let mut csv = String::from("scheme,machine,mean_share,share_delta,mean_abs_share_delta\n");
    for r in &report.schemes {
        for m in 0..r.mean_shares.len() {
            csv.push_str(&format!(
                "{},{m},{},{},{}\n",
                r.scheme, r.mean_shares[m], r.share_delta[m], r.mean_abs_share_delta[m]
            ));
        }
    }
    write_text(&out.join("quantstudy_shares.csv"), &csv)?;
    for r in &report.schemes {
        let worst = r.share_delta.iter().fold(0.0f64, |a, d| a.max(d.abs()));
        println!(
            "{:>5}: wspt error mean {:.3}%, alpha error mean {:.3}%, max share delta {:.4}",
            r.scheme.name(),
            r.wspt_error.mean,
            r.alpha_error.mean,
            worst
        );
    }
    Ok(())
}

fn cmd_montecarlo(
    common: &Common,
    out: &Path,
    draws: Option<usize>,
    policies: &[Policy],
    noise: bool,
) -> Result<(), Failure> {
    let mut config = load_config(common)?;
    if !policies.is_empty() {
        config.policies = policies.to_vec();
    }
    config.noise |= noise;
    let draws = draws.unwrap_or(config.draws);
    let report = monte_carlo(&config, draws, config.workload.seed)?;
    make_dir(out)?;
    write_text(&out.join("runs.csv"), &reports_csv(&report.runs))?;
    write_json(&out.join("summary.json"), &report)?;
    for s in &report.summary {
        write_text(
            &out.join(format!("{}.heatmap.csv", s.policy)),
            &heatmap_csv(&s.heatmap, &report.checkpoints),
        )?;
        println!(
            "{:>6}: throughput {:.4}/tick (CV {:.4}), latency {:.2}, load CV {:.4}",
            s.policy.name(),
            s.mean_throughput,
            s.throughput_cv,
            s.mean_latency,
            s.mean_load_cv
        );
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match &cli.command {
        Command::Gen { common, out } => cmd_gen(common, out),
        Command::Run {
            common,
            trace,
            out,
            policy,
            noise,
        } => cmd_run(common, trace, out, policy, *noise),
        Command::Quantstudy { common, out, draws } => cmd_quantstudy(common, out, *draws),
        Command::Montecarlo {
            common,
            out,
            draws,
            policy,
            noise,
        } => cmd_montecarlo(common, out, *draws, policy, *noise),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("error: {}", f.message());
            ExitCode::from(f.code())
        }
    }
}
