//! Batch command-line front end.
//!
//! Every subcommand writes its primary output plus a `<out>.manifest.json`
//! run manifest next to it. `replay` re-executes a manifest and reproduces
//! the outputs byte-for-byte.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::data_ingest::{daily_deltas, filter_regions, load_case_series, rank_timeline};
use crate::error::Error;
use crate::experiments::{
    compare_observables, hit_vs_correlation, run_hit_experiment, sweep_decay_parameter, Execution,
    ExperimentConfig, Scenario,
};
use crate::network::{generate_erdos_renyi, Network};
use crate::profiler::{likeliness_scores, DecayKind, DecaySpec};
use crate::simulator::{
    simulate_with_rng, Dataset, EpidemicParams, IncidenceTerm, InitialCondition, Observable,
    SimulationConfig,
};

const FILE_SCHEMAS: &str = "\
File formats:
  adjacency CSV   header row of N node labels (an empty leading corner cell is
                  accepted), then N rows: label followed by N entries in {0,1};
                  the matrix must be symmetric with a zero diagonal
  dataset CSV     node_label,value          (one row per node, values >= 0)
  cases CSV       date,region,cumulative_cases   (ISO 8601 dates)
  trajectory CSV  time,node_label,S,I,R,J   (+ <out>.json parameter sidecar)
  ranking CSV     rank,node_label,score     (JSON via --format json adds the
                  degenerate flag)
  experiment CSV  experiment,decay_kind,param,t,mean_H,stderr,replicates
  correlation CSV replicate,t,decay_kind,param,R_I,H
  timeline CSV    day_index,date,rank,region,score,degenerate_flag
  experiment JSON config fields: name, replicates, nodes, mean_degree,
                  params{alpha,beta,gamma}, index_cases, population,
                  observation_times, delta_t, observable (I|J|DELTA_I|DELTA_J),
                  decays[{kind,param}], master_seed, simulation{t_end,sim_dt,
                  report_dt,noise,incidence}
Every output gets a <out>.manifest.json run manifest; `replay` reruns it.
Exit codes: 0 success, 2 usage or config error, 1 runtime failure.";

#[derive(Debug, Parser)]
#[command(name = "epiprofile", version, about = "Locate epidemic sources on meta-population networks", after_long_help = FILE_SCHEMAS)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, PartialEq, Subcommand, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Command {
    /// Generate an Erdős–Rényi network and write it as adjacency CSV
    GenNet(GenNetArgs),
    /// Simulate the stochastic SIR model on a network
    Simulate(SimulateArgs),
    /// Rank every node as a candidate source of one dataset
    Profile(ProfileArgs),
    /// Run a synthetic hit-score experiment
    Evaluate(EvaluateArgs),
    /// Grid-search one decay parameter
    Sweep(SweepArgs),
    /// Rank regions day by day from cumulative case reports
    RankTimeline(RankTimelineArgs),
    /// Re-run a recorded manifest
    Replay(ReplayArgs),
}

#[derive(Debug, Clone, PartialEq, Args, Serialize, Deserialize)]
pub struct GenNetArgs {
    #[arg(long)]
    pub nodes: usize,
    #[arg(long)]
    pub mean_degree: f64,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum IncidenceArg {
    AsWritten,
    ForceOfInfection,
}

#[derive(Debug, Clone, PartialEq, Args, Serialize, Deserialize)]
pub struct SimulateArgs {
    /// Adjacency CSV
    #[arg(long)]
    pub net: PathBuf,
    #[arg(long, default_value_t = 0.16)]
    pub alpha: f64,
    #[arg(long, default_value_t = 0.04)]
    pub beta: f64,
    #[arg(long, default_value_t = 0.2)]
    pub gamma: f64,
    /// Source node: index, label, or `random`
    #[arg(long, default_value = "random")]
    pub source: String,
    #[arg(long, default_value_t = 20.0)]
    pub index_cases: f64,
    #[arg(long, default_value_t = 1e8)]
    pub population: f64,
    #[arg(long, default_value_t = 100.0)]
    pub t_end: f64,
    #[arg(long, default_value_t = 0.05)]
    pub sim_dt: f64,
    #[arg(long, default_value_t = 1.0)]
    pub report_dt: f64,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Deterministic Euler integration of the drift terms
    #[arg(long)]
    pub no_noise: bool,
    #[arg(long, value_enum, default_value_t = IncidenceArg::AsWritten)]
    pub incidence: IncidenceArg,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum DecayArg {
    Naive,
    Power,
    Polynomial,
    Exponential,
}

impl From<DecayArg> for DecayKind {
    fn from(d: DecayArg) -> Self {
        match d {
            DecayArg::Naive => DecayKind::Naive,
            DecayArg::Power => DecayKind::Power,
            DecayArg::Polynomial => DecayKind::Polynomial,
            DecayArg::Exponential => DecayKind::Exponential,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum FormatArg {
    Csv,
    Json,
}

#[derive(Debug, Clone, PartialEq, Args, Serialize, Deserialize)]
pub struct ProfileArgs {
    #[arg(long)]
    pub net: PathBuf,
    /// Dataset CSV (node_label,value)
    #[arg(long)]
    pub data: PathBuf,
    #[arg(long, value_enum)]
    pub decay: DecayArg,
    #[arg(long)]
    pub param: Option<f64>,
    #[arg(long, value_enum, default_value_t = FormatArg::Csv)]
    pub format: FormatArg,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ExperimentKind {
    /// Mean hit score over time per decay function
    Hit,
    /// Pooled (R_I, H) samples
    Correlation,
    /// Paired hit curves for I, J, ΔI and ΔJ
    Observables,
}

#[derive(Debug, Clone, PartialEq, Args, Serialize, Deserialize)]
pub struct ExperimentSource {
    /// JSON experiment config
    #[arg(
        long,
        conflicts_with = "scenario",
        required_unless_present = "scenario"
    )]
    pub config: Option<PathBuf>,
    /// Built-in parameter set: slow_growth, moderate_growth, fast_growth, fast_growth_dense
    #[arg(long)]
    pub scenario: Option<String>,
    /// Override the replicate count
    #[arg(long)]
    pub replicates: Option<u64>,
    /// Override the master seed
    #[arg(long)]
    pub seed: Option<u64>,
    /// Worker threads (results never depend on this)
    #[arg(long)]
    pub workers: Option<usize>,
}

#[derive(Debug, Clone, PartialEq, Args, Serialize, Deserialize)]
pub struct EvaluateArgs {
    #[command(flatten)]
    pub source: ExperimentSource,
    #[arg(long, value_enum, default_value_t = ExperimentKind::Hit)]
    pub experiment: ExperimentKind,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Clone, PartialEq, Args, Serialize, Deserialize)]
pub struct SweepArgs {
    #[command(flatten)]
    pub source: ExperimentSource,
    #[arg(long, value_enum)]
    pub kind: DecayArg,
    /// Comma-separated parameter values
    #[arg(long, value_delimiter = ',', required = true)]
    pub grid: Vec<f64>,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Clone, PartialEq, Args, Serialize, Deserialize)]
pub struct RankTimelineArgs {
    /// Adjacency CSV whose labels are region codes
    #[arg(long)]
    pub net: PathBuf,
    /// Cumulative cases CSV (date,region,cumulative_cases)
    #[arg(long)]
    pub cases: PathBuf,
    #[arg(long, value_enum, default_value_t = DecayArg::Polynomial)]
    pub decay: DecayArg,
    #[arg(long)]
    pub param: Option<f64>,
    #[arg(long, default_value_t = crate::data_ingest::DEFAULT_MIN_CASES)]
    pub min_cases: u64,
    #[arg(long, default_value_t = crate::data_ingest::DEFAULT_WINDOW_DAYS)]
    pub window_days: u32,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Clone, PartialEq, Args, Serialize, Deserialize)]
pub struct ReplayArgs {
    #[arg(long)]
    pub manifest: PathBuf,
    /// Write outputs into this directory instead of their recorded paths
    #[arg(long)]
    pub out_dir: Option<PathBuf>,
}

/// Provenance record written next to every output.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub tool: String,
    pub version: String,
    pub subcommand: String,
    pub command: Command,
    pub seed: Option<u64>,
    /// Fully resolved experiment configuration, when one applies.
    pub config: Option<ExperimentConfig>,
    pub inputs: Vec<PathBuf>,
    pub outputs: Vec<PathBuf>,
    /// Subcommand-specific facts about the result (e.g. degenerate flag).
    #[serde(default)]
    pub summary: serde_json::Value,
}

impl RunManifest {
    pub fn load(path: impl AsRef<Path>) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path)?;
        serde_json::from_str(&text).map_err(|e| CliError::Usage(format!("manifest: {e}")))
    }
}

pub fn manifest_path(out: &Path) -> PathBuf {
    let mut name = out.file_name().unwrap_or_default().to_os_string();
    name.push(".manifest.json");
    out.with_file_name(name)
}

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("usage: {0}")]
    Usage(String),
    #[error(transparent)]
    Run(#[from] Error),
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        Self::Run(e.into())
    }
}

impl CliError {
    pub fn exit_code(&self) -> ExitCode {
        match self {
            Self::Usage(_) | Self::Run(Error::Config(_)) => ExitCode::from(2),
            Self::Run(_) => ExitCode::from(1),
        }
    }
}

fn usage(msg: impl Into<String>) -> CliError {
    CliError::Usage(msg.into())
}

pub fn main_with_args<I, T>(args: I) -> ExitCode
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() {
                ExitCode::from(2)
            } else {
                ExitCode::SUCCESS
            };
        }
    };
    match run(cli.command, None) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}

/// Executes one command. `redirect` moves every output into that directory,
/// keeping file names.
pub fn run(command: Command, redirect: Option<&Path>) -> Result<(), CliError> {
    run_with_config(command, redirect, None)
}

fn run_with_config(
    command: Command,
    redirect: Option<&Path>,
    recorded: Option<ExperimentConfig>,
) -> Result<(), CliError> {
    let place = |p: &Path| match redirect {
        Some(dir) => dir.join(p.file_name().unwrap_or_default()),
        None => p.to_path_buf(),
    };
    match &command {
        Command::GenNet(a) => {
            if a.nodes < 2 {
                return Err(usage("--nodes must be at least 2"));
            }
            if !(a.mean_degree > 0.0 && a.mean_degree <= (a.nodes - 1) as f64) {
                return Err(usage(format!(
                    "--mean-degree must lie in (0, {}]",
                    a.nodes - 1
                )));
            }
            let out = place(&a.out);
            let net = generate_erdos_renyi(a.nodes, a.mean_degree, a.seed)?;
            net.save(&out)?;
            let summary =
                serde_json::json!({ "edges": net.edge_count(), "mean_degree": net.mean_degree() });
            write_manifest(&command, Some(a.seed), None, vec![], vec![out], summary)
        }
        Command::Simulate(a) => {
            let net = Network::load(&a.net)?;
            let params =
                EpidemicParams::new(a.alpha, a.beta, a.gamma).map_err(|e| usage(e.to_string()))?;
            let mut rng = ChaCha8Rng::seed_from_u64(a.seed);
            let source = match a.source.as_str() {
                "random" => rng.random_range(0..net.len()),
                s => s
                    .parse::<usize>()
                    .ok()
                    .filter(|&k| k < net.len())
                    .or_else(|| net.index_of(s))
                    .ok_or_else(|| usage(format!("--source `{s}` is not a node index or label")))?,
            };
            let config = SimulationConfig {
                t_end: a.t_end,
                sim_dt: a.sim_dt,
                report_dt: a.report_dt,
                noise: !a.no_noise,
                incidence: match a.incidence {
                    IncidenceArg::AsWritten => IncidenceTerm::AsWritten,
                    IncidenceArg::ForceOfInfection => IncidenceTerm::ForceOfInfection,
                },
            };
            let init = InitialCondition {
                source,
                index_cases: a.index_cases,
                population: a.population,
            };
            let mut traj = simulate_with_rng(&net, params, init, config, &mut rng)?;
            traj.seed = Some(a.seed);
            let out = place(&a.out);
            let mut w = BufWriter::new(File::create(&out)?);
            traj.write_csv(&mut w)?;
            w.flush()?;
            let sidecar = out.with_extension("json");
            write_json(&sidecar, &traj.metadata())?;
            let summary =
                serde_json::json!({ "source": source, "source_label": net.labels()[source] });
            write_manifest(
                &command,
                Some(a.seed),
                None,
                vec![a.net.clone()],
                vec![out, sidecar],
                summary,
            )
        }
        Command::Profile(a) => {
            let spec = DecaySpec::new(a.decay.into(), a.param).map_err(|e| usage(e.to_string()))?;
            let net = Network::load(&a.net)?;
            let data = Dataset::read_csv(File::open(&a.data)?, net.labels(), Observable::DeltaJ)?;
            let result = likeliness_scores(&crate::network::hop_distances(&net), &data, spec)?;
            if result.degenerate {
                log::warn!("dataset is all zero; ranking carries no information");
            }
            let out = place(&a.out);
            match a.format {
                FormatArg::Csv => {
                    let mut w = BufWriter::new(File::create(&out)?);
                    result.write_csv(&mut w, net.labels())?;
                    w.flush()?;
                }
                FormatArg::Json => write_json(&out, &result.to_json(net.labels()))?,
            }
            let summary = serde_json::json!({ "degenerate": result.degenerate });
            write_manifest(
                &command,
                None,
                None,
                vec![a.net.clone(), a.data.clone()],
                vec![out],
                summary,
            )
        }
        Command::Evaluate(a) => {
            let cfg = match recorded {
                Some(cfg) => cfg,
                None => resolve_config(&a.source)?,
            };
            let exec = Execution::with_workers(a.source.workers);
            let out = place(&a.out);
            let mut w = BufWriter::new(File::create(&out)?);
            let summary = match a.experiment {
                ExperimentKind::Hit => {
                    run_hit_experiment(&cfg, exec)?.write_csv(&mut w)?;
                    serde_json::Value::Null
                }
                ExperimentKind::Observables => {
                    compare_observables(&cfg, exec)?.write_csv(&mut w)?;
                    serde_json::Value::Null
                }
                ExperimentKind::Correlation => {
                    let samples = hit_vs_correlation(&cfg, exec)?;
                    samples.write_csv(&mut w)?;
                    serde_json::json!({ "skipped": samples.skipped })
                }
            };
            w.flush()?;
            let inputs = a.source.config.iter().cloned().collect();
            let seed = Some(cfg.master_seed);
            write_manifest(&command, seed, Some(cfg), inputs, vec![out], summary)
        }
        Command::Sweep(a) => {
            let cfg = match recorded {
                Some(cfg) => cfg,
                None => resolve_config(&a.source)?,
            };
            let exec = Execution::with_workers(a.source.workers);
            let sweep =
                sweep_decay_parameter(&cfg, a.kind.into(), &a.grid, exec).map_err(|e| match e {
                    Error::Parameter(m) => usage(m),
                    e => e.into(),
                })?;
            let out = place(&a.out);
            let mut w = BufWriter::new(File::create(&out)?);
            sweep.write_csv(&mut w)?;
            w.flush()?;
            let summary = serde_json::json!({ "best": sweep.best, "table": sweep.table });
            let inputs = a.source.config.iter().cloned().collect();
            let seed = Some(cfg.master_seed);
            write_manifest(&command, seed, Some(cfg), inputs, vec![out], summary)
        }
        Command::RankTimeline(a) => {
            let param = match (a.decay, a.param) {
                (DecayArg::Polynomial, None) => Some(0.5),
                (DecayArg::Power, None) => Some(2.0),
                (DecayArg::Exponential, None) => Some(0.05),
                (_, p) => p,
            };
            let spec = DecaySpec::new(a.decay.into(), param).map_err(|e| usage(e.to_string()))?;
            let net = Network::load(&a.net)?;
            let series = filter_regions(&load_case_series(&a.cases)?, a.min_cases, a.window_days)
                .map_err(|e| usage(e.to_string()))?;
            let deltas = daily_deltas(&series, net.labels())?;
            let timeline = rank_timeline(&net, &deltas, spec)?;
            let out = place(&a.out);
            timeline.save(&out)?;
            let summary = serde_json::json!({
                "days": timeline.entries.len(),
                "revisions": deltas.revisions,
                "degenerate_days": timeline.entries.iter().filter(|e| e.result.degenerate).map(|e| e.day_index).collect::<Vec<_>>(),
            });
            write_manifest(
                &command,
                None,
                None,
                vec![a.net.clone(), a.cases.clone()],
                vec![out],
                summary,
            )
        }
        Command::Replay(a) => {
            let manifest = RunManifest::load(&a.manifest)?;
            if matches!(manifest.command, Command::Replay(_)) {
                return Err(usage("a manifest cannot record a replay"));
            }
            run_with_config(manifest.command, a.out_dir.as_deref(), manifest.config)
        }
    }
}

fn resolve_config(src: &ExperimentSource) -> Result<ExperimentConfig, CliError> {
    let mut cfg = match (&src.config, &src.scenario) {
        (Some(path), _) => ExperimentConfig::from_json(&std::fs::read_to_string(path)?)?,
        (None, Some(name)) => {
            let sc: Scenario = name.parse()?;
            sc.config(100, 0)
        }
        (None, None) => return Err(usage("one of --config or --scenario is required")),
    };
    if let Some(r) = src.replicates {
        cfg.replicates = r;
    }
    if let Some(s) = src.seed {
        cfg.master_seed = s;
    }
    if src.workers == Some(0) {
        return Err(usage("--workers must be at least 1"));
    }
    cfg.validate()?;
    Ok(cfg)
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<(), CliError> {
    let mut w = BufWriter::new(File::create(path)?);
    serde_json::to_writer_pretty(&mut w, value).map_err(Error::from)?;
    w.write_all(b"\n")?;
    w.flush()?;
    Ok(())
}

fn write_manifest(
    command: &Command,
    seed: Option<u64>,
    config: Option<ExperimentConfig>,
    inputs: Vec<PathBuf>,
    outputs: Vec<PathBuf>,
    summary: serde_json::Value,
) -> Result<(), CliError> {
    let subcommand = serde_json::to_value(command)
        .ok()
        .and_then(|v| v.as_object().and_then(|o| o.keys().next().cloned()))
        .unwrap_or_default();
    let path = manifest_path(&outputs[0]);
    let manifest = RunManifest {
        tool: env!("CARGO_PKG_NAME").into(),
        version: env!("CARGO_PKG_VERSION").into(),
        subcommand,
        command: command.clone(),
        seed,
        config,
        inputs,
        outputs,
        summary,
    };
    write_json(&path, &manifest)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn cli_definition_is_consistent() {
        use clap::CommandFactory;
        Cli::command().debug_assert();
    }

    #[test]
    fn manifest_sits_next_to_output() {
        assert_eq!(
            manifest_path(Path::new("/tmp/x/net.csv")),
            PathBuf::from("/tmp/x/net.csv.manifest.json")
        );
    }

    #[test]
    fn naive_with_param_is_usage_error() {
        let err = run(
            Command::Profile(ProfileArgs {
                net: "missing.csv".into(),
                data: "missing.csv".into(),
                decay: DecayArg::Naive,
                param: Some(1.0),
                format: FormatArg::Csv,
                out: "x.csv".into(),
            }),
            None,
        )
        .unwrap_err();
        assert!(matches!(err, CliError::Usage(_)));
    }
}
