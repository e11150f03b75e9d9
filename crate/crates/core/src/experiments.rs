//! Ensemble evaluation of the profiling algorithms on synthetic outbreaks.
//!
//! A replicate draws a random topology, a uniformly random source and one
//! stochastic trajectory, all from its own ChaCha stream
//! `(master_seed, replicate_index)`. Every arm of an experiment (decay
//! functions, observables, sweep parameters) is scored on that same
//! trajectory, so comparisons are paired. Replicates are independent and
//! run in parallel when the `parallel` feature is on; aggregation is a
//! sequential reduce in replicate order, so results never depend on the
//! worker count.

use std::io::Write;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::network::{erdos_renyi_with_rng, hop_distances, DistanceMatrix, Network};
use crate::profiler::{hit_score, DecayKind, DecaySpec, Profiler};
use crate::simulator::{
    correlation_ri, simulate_with_rng, synthesize_dataset, EpidemicParams, InitialCondition,
    Observable, SimulationConfig, Trajectory,
};
use crate::stats::{mean, mean_and_stderr, spearman};

/// Fully specifies a synthetic experiment; loadable from JSON.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    #[serde(default = "defaults::name")]
    pub name: String,
    #[serde(default = "defaults::replicates")]
    pub replicates: u64,
    #[serde(default = "defaults::nodes")]
    pub nodes: usize,
    pub mean_degree: f64,
    pub params: EpidemicParams,
    #[serde(default = "defaults::index_cases")]
    pub index_cases: f64,
    #[serde(default = "defaults::population")]
    pub population: f64,
    #[serde(default = "defaults::observation_times")]
    pub observation_times: Vec<f64>,
    #[serde(default = "defaults::delta_t")]
    pub delta_t: f64,
    #[serde(default = "defaults::observable")]
    pub observable: Observable,
    #[serde(default = "defaults::decays")]
    pub decays: Vec<DecaySpec>,
    #[serde(default)]
    pub master_seed: u64,
    #[serde(default)]
    pub simulation: SimulationConfig,
}

mod defaults {
    use super::*;

    pub fn name() -> String {
        "experiment".into()
    }
    pub fn replicates() -> u64 {
        100
    }
    pub fn nodes() -> usize {
        100
    }
    pub fn index_cases() -> f64 {
        20.0
    }
    pub fn population() -> f64 {
        1e8
    }
    pub fn observation_times() -> Vec<f64> {
        (1..=20).map(|k| 5.0 * k as f64).collect()
    }
    pub fn delta_t() -> f64 {
        1.0
    }
    pub fn observable() -> Observable {
        Observable::DeltaJ
    }
    pub fn decays() -> Vec<DecaySpec> {
        super::calibrated_decays().to_vec()
    }
}

/// The four decay functions at their calibrated parameters.
pub fn calibrated_decays() -> [DecaySpec; 4] {
    [
        DecaySpec::Naive,
        DecaySpec::Power(2.0),
        DecaySpec::Polynomial(0.5),
        DecaySpec::Exponential(0.05),
    ]
}

/// Named parameter sets for the synthetic studies (gamma = 0.2 throughout).
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Scenario {
    /// k = 2, alpha = 0.11, beta = 0.09 (r = 1.2)
    SlowGrowth,
    /// k = 2, alpha = 0.133, beta = 0.067 (r = 2)
    ModerateGrowth,
    /// k = 2, alpha = 0.16, beta = 0.04 (r = 4)
    FastGrowth,
    /// k = 4, alpha = 0.16, beta = 0.04 (r = 4)
    FastGrowthDense,
}

impl Scenario {
    pub const ALL: [Scenario; 4] = [
        Self::SlowGrowth,
        Self::ModerateGrowth,
        Self::FastGrowth,
        Self::FastGrowthDense,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Self::SlowGrowth => "slow_growth",
            Self::ModerateGrowth => "moderate_growth",
            Self::FastGrowth => "fast_growth",
            Self::FastGrowthDense => "fast_growth_dense",
        }
    }

    pub fn config(self, replicates: u64, master_seed: u64) -> ExperimentConfig {
        let (k, alpha, beta) = match self {
            Self::SlowGrowth => (2.0, 0.11, 0.09),
            Self::ModerateGrowth => (2.0, 0.133, 0.067),
            Self::FastGrowth => (2.0, 0.16, 0.04),
            Self::FastGrowthDense => (4.0, 0.16, 0.04),
        };
        ExperimentConfig {
            name: self.name().into(),
            replicates,
            nodes: defaults::nodes(),
            mean_degree: k,
            params: EpidemicParams::new(alpha, beta, 0.2).expect("preset rates are valid"),
            index_cases: defaults::index_cases(),
            population: defaults::population(),
            observation_times: defaults::observation_times(),
            delta_t: defaults::delta_t(),
            observable: defaults::observable(),
            decays: defaults::decays(),
            master_seed,
            simulation: SimulationConfig::default(),
        }
    }
}

impl std::str::FromStr for Scenario {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Self::ALL
            .into_iter()
            .find(|sc| sc.name() == s)
            .ok_or_else(|| Error::Config(format!("unknown scenario `{s}`")))
    }
}

impl ExperimentConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        let cfg: Self = serde_json::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        let fail = |msg: String| Err(Error::Config(msg));
        if self.replicates < 1 {
            return fail("`replicates` must be at least 1".into());
        }
        if self.nodes < 2 {
            return fail("`nodes` must be at least 2".into());
        }
        if !(self.mean_degree > 0.0 && self.mean_degree <= (self.nodes - 1) as f64) {
            return fail(format!("`mean_degree` must lie in (0, {}]", self.nodes - 1));
        }
        if self.decays.is_empty() {
            return fail("`decays` must not be empty".into());
        }
        if self.observation_times.is_empty() {
            return fail("`observation_times` must not be empty".into());
        }
        if self.delta_t.is_nan() || self.delta_t <= 0.0 {
            return fail("`delta_t` must be positive".into());
        }
        let t_end = self.simulation.t_end;
        for &t in &self.observation_times {
            if !(t >= 0.0 && t + self.delta_t <= t_end + 1e-9) {
                return fail(format!(
                    "`observation_times` entry {t} (+ delta_t {}) exceeds simulation.t_end {t_end}",
                    self.delta_t
                ));
            }
        }
        let share = self.population / self.nodes as f64;
        if !(self.index_cases >= 0.0 && self.index_cases <= share) {
            return fail(format!("`index_cases` must lie in [0, {share}]"));
        }
        Ok(())
    }
}

/// How replicates are scheduled. Results are identical across variants.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Execution {
    Sequential,
    /// Rayon worker pool; `None` uses the global pool.
    #[cfg(feature = "parallel")]
    Parallel {
        workers: Option<usize>,
    },
}

impl Default for Execution {
    fn default() -> Self {
        #[cfg(feature = "parallel")]
        {
            Self::Parallel { workers: None }
        }
        #[cfg(not(feature = "parallel"))]
        {
            Self::Sequential
        }
    }
}

impl Execution {
    /// `workers = Some(1)` always runs sequentially.
    pub fn with_workers(workers: Option<usize>) -> Self {
        match workers {
            Some(1) => Self::Sequential,
            #[cfg(feature = "parallel")]
            w => Self::Parallel { workers: w },
            #[cfg(not(feature = "parallel"))]
            _ => Self::Sequential,
        }
    }

    /// Runs `f` for every replicate index and returns results in index order.
    pub fn map_replicates<T, F>(self, count: u64, f: F) -> Result<Vec<T>>
    where
        T: Send,
        F: Fn(u64) -> Result<T> + Sync + Send,
    {
        let results: Vec<Result<T>> = match self {
            Self::Sequential => (0..count).map(&f).collect(),
            #[cfg(feature = "parallel")]
            Self::Parallel { workers } => {
                use rayon::prelude::*;
                let run = || (0..count).into_par_iter().map(&f).collect();
                match workers {
                    None => run(),
                    Some(w) => rayon::ThreadPoolBuilder::new()
                        .num_threads(w)
                        .build()
                        .map_err(|e| Error::Config(format!("worker pool: {e}")))?
                        .install(run),
                }
            }
        };
        results.into_iter().collect()
    }
}

/// One synthetic outbreak: topology, source and trajectory.
#[derive(Debug, Clone)]
pub struct Replicate {
    pub index: u64,
    pub network: Network,
    pub distances: DistanceMatrix,
    pub source: usize,
    pub trajectory: Trajectory,
}

impl Replicate {
    pub fn generate(cfg: &ExperimentConfig, index: u64) -> Result<Self> {
        Self::try_generate(cfg, index).map_err(|e| Error::Replicate {
            replicate: index,
            source: Box::new(e),
        })
    }

    fn try_generate(cfg: &ExperimentConfig, index: u64) -> Result<Self> {
        let mut rng = ChaCha8Rng::seed_from_u64(cfg.master_seed);
        rng.set_stream(index);
        let network = erdos_renyi_with_rng(cfg.nodes, cfg.mean_degree, &mut rng)?;
        let source = rng.random_range(0..cfg.nodes);
        let init = InitialCondition {
            source,
            index_cases: cfg.index_cases,
            population: cfg.population,
        };
        let trajectory = simulate_with_rng(&network, cfg.params, init, cfg.simulation, &mut rng)?;
        let distances = hop_distances(&network);
        Ok(Self {
            index,
            network,
            distances,
            source,
            trajectory,
        })
    }

    /// Hit scores indexed `[observable][decay][time]`.
    pub fn hit_scores(
        &self,
        observables: &[Observable],
        decays: &[DecaySpec],
        times: &[f64],
        delta_t: f64,
    ) -> Result<Vec<Vec<Vec<f64>>>> {
        let profilers: Vec<Profiler> = decays
            .iter()
            .map(|&d| Profiler::new(&self.distances, d))
            .collect();
        let mut out = vec![vec![Vec::with_capacity(times.len()); decays.len()]; observables.len()];
        for (o, &kind) in observables.iter().enumerate() {
            for &t in times {
                let data = synthesize_dataset(&self.trajectory, t, delta_t, kind)?;
                for (d, profiler) in profilers.iter().enumerate() {
                    out[o][d].push(hit_score(&profiler.score(&data)?, self.source)?);
                }
            }
        }
        Ok(out)
    }

    /// `(R_I(t), H(t))` pairs; times where `I(t)` or `I(0)` is flat are
    /// returned as skipped.
    pub fn correlation_samples(
        &self,
        observable: Observable,
        decays: &[DecaySpec],
        times: &[f64],
        delta_t: f64,
    ) -> Result<(Vec<CorrelationSample>, usize)> {
        let profilers: Vec<Profiler> = decays
            .iter()
            .map(|&d| Profiler::new(&self.distances, d))
            .collect();
        let mut samples = Vec::new();
        let mut skipped = 0;
        for &t in times {
            let r_i = match correlation_ri(&self.trajectory, t) {
                Ok(r) => r,
                Err(Error::UndefinedCorrelation(_)) => {
                    skipped += 1;
                    continue;
                }
                Err(e) => return Err(e),
            };
            let data = synthesize_dataset(&self.trajectory, t, delta_t, observable)?;
            for (profiler, &decay) in profilers.iter().zip(decays) {
                samples.push(CorrelationSample {
                    replicate: self.index,
                    t,
                    decay,
                    r_i,
                    h: hit_score(&profiler.score(&data)?, self.source)?,
                });
            }
        }
        Ok((samples, skipped))
    }
}

/// Mean hit score over replicates for one (observable, decay) arm.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct HitSeries {
    pub observable: Observable,
    pub decay: DecaySpec,
    pub mean: Vec<f64>,
    pub stderr: Vec<f64>,
}

impl HitSeries {
    /// Mean of `mean` over the entries whose time is at least `t_from`.
    pub fn mean_from(&self, times: &[f64], t_from: f64) -> f64 {
        let late: Vec<f64> = times
            .iter()
            .zip(&self.mean)
            .filter(|(t, _)| **t >= t_from)
            .map(|(_, h)| *h)
            .collect();
        mean(&late)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct HitCurve {
    pub name: String,
    pub times: Vec<f64>,
    pub series: Vec<HitSeries>,
    pub replicates: u64,
    /// Per-replicate trajectory checksums, in replicate order.
    pub checksums: Vec<u64>,
}

impl HitCurve {
    pub fn series(&self, observable: Observable, decay: DecaySpec) -> Option<&HitSeries> {
        self.series
            .iter()
            .find(|s| s.observable == observable && s.decay == decay)
    }

    pub fn by_kind(&self, kind: DecayKind) -> Option<&HitSeries> {
        self.series.iter().find(|s| s.decay.kind() == kind)
    }

    /// Tidy CSV: `experiment,decay_kind,param,t,mean_H,stderr,replicates`.
    /// The experiment column carries the observable as `name/OBSERVABLE`.
    pub fn write_csv<W: Write>(&self, writer: W) -> Result<()> {
        let mut wtr = csv::Writer::from_writer(writer);
        write_tidy_header(&mut wtr)?;
        for s in &self.series {
            for (k, t) in self.times.iter().enumerate() {
                write_tidy_row(
                    &mut wtr,
                    &format!("{}/{}", self.name, s.observable),
                    s.decay,
                    &t.to_string(),
                    s.mean[k],
                    s.stderr[k],
                    self.replicates,
                )?;
            }
        }
        wtr.flush()?;
        Ok(())
    }
}

fn write_tidy_header<W: Write>(wtr: &mut csv::Writer<W>) -> Result<()> {
    wtr.write_record([
        "experiment",
        "decay_kind",
        "param",
        "t",
        "mean_H",
        "stderr",
        "replicates",
    ])?;
    Ok(())
}

fn write_tidy_row<W: Write>(
    wtr: &mut csv::Writer<W>,
    experiment: &str,
    decay: DecaySpec,
    t: &str,
    mean_h: f64,
    stderr: f64,
    replicates: u64,
) -> Result<()> {
    wtr.write_record([
        experiment.to_string(),
        decay.kind().to_string(),
        decay.param().map_or_else(String::new, |p| p.to_string()),
        t.to_string(),
        mean_h.to_string(),
        stderr.to_string(),
        replicates.to_string(),
    ])?;
    Ok(())
}

fn evaluate(
    cfg: &ExperimentConfig,
    observables: &[Observable],
    decays: &[DecaySpec],
    exec: Execution,
) -> Result<HitCurve> {
    cfg.validate()?;
    let per_replicate = exec.map_replicates(cfg.replicates, |index| {
        let rep = Replicate::generate(cfg, index)?;
        let scores = rep
            .hit_scores(observables, decays, &cfg.observation_times, cfg.delta_t)
            .map_err(|e| Error::Replicate {
                replicate: index,
                source: Box::new(e),
            })?;
        Ok((rep.trajectory.checksum(), scores))
    })?;

    let nt = cfg.observation_times.len();
    let mut series = Vec::with_capacity(observables.len() * decays.len());
    for (o, &observable) in observables.iter().enumerate() {
        for (d, &decay) in decays.iter().enumerate() {
            let (mut means, mut errs) = (Vec::with_capacity(nt), Vec::with_capacity(nt));
            for k in 0..nt {
                let column: Vec<f64> = per_replicate.iter().map(|(_, h)| h[o][d][k]).collect();
                let (m, e) = mean_and_stderr(&column);
                means.push(m);
                errs.push(e);
            }
            series.push(HitSeries {
                observable,
                decay,
                mean: means,
                stderr: errs,
            });
        }
    }
    Ok(HitCurve {
        name: cfg.name.clone(),
        times: cfg.observation_times.clone(),
        series,
        replicates: cfg.replicates,
        checksums: per_replicate.iter().map(|(c, _)| *c).collect(),
    })
}

/// Mean hit score over time for every configured decay function.
pub fn run_hit_experiment(cfg: &ExperimentConfig, exec: Execution) -> Result<HitCurve> {
    evaluate(cfg, &[cfg.observable], &cfg.decays, exec)
}

/// Paired hit curves for the observables I, J, ΔI and ΔJ.
pub fn compare_observables(cfg: &ExperimentConfig, exec: Execution) -> Result<HitCurve> {
    evaluate(cfg, &Observable::ALL, &cfg.decays, exec)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct CorrelationSample {
    pub replicate: u64,
    pub t: f64,
    pub decay: DecaySpec,
    pub r_i: f64,
    pub h: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CorrelationSamples {
    pub samples: Vec<CorrelationSample>,
    /// (replicate, time) pairs dropped because `I(t)` had zero variance.
    pub skipped: usize,
}

impl CorrelationSamples {
    pub fn for_decay(&self, decay: DecaySpec) -> impl Iterator<Item = &CorrelationSample> {
        self.samples.iter().filter(move |s| s.decay == decay)
    }

    /// Spearman correlation between R_I and H pooled over replicates and times.
    pub fn rank_correlation(&self, decay: DecaySpec) -> Result<f64> {
        let (r, h): (Vec<f64>, Vec<f64>) = self.for_decay(decay).map(|s| (s.r_i, s.h)).unzip();
        spearman(&r, &h)
    }

    /// CSV: `replicate,t,decay_kind,param,R_I,H`.
    pub fn write_csv<W: Write>(&self, writer: W) -> Result<()> {
        let mut wtr = csv::Writer::from_writer(writer);
        wtr.write_record(["replicate", "t", "decay_kind", "param", "R_I", "H"])?;
        for s in &self.samples {
            wtr.write_record([
                s.replicate.to_string(),
                s.t.to_string(),
                s.decay.kind().to_string(),
                s.decay.param().map_or_else(String::new, |p| p.to_string()),
                s.r_i.to_string(),
                s.h.to_string(),
            ])?;
        }
        wtr.flush()?;
        Ok(())
    }
}

/// Pooled `(R_I, H)` pairs over replicates and observation times.
pub fn hit_vs_correlation(cfg: &ExperimentConfig, exec: Execution) -> Result<CorrelationSamples> {
    cfg.validate()?;
    let per_replicate = exec.map_replicates(cfg.replicates, |index| {
        Replicate::generate(cfg, index)?
            .correlation_samples(
                cfg.observable,
                &cfg.decays,
                &cfg.observation_times,
                cfg.delta_t,
            )
            .map_err(|e| Error::Replicate {
                replicate: index,
                source: Box::new(e),
            })
    })?;
    let mut samples = Vec::new();
    let mut skipped = 0;
    for (s, k) in per_replicate {
        samples.extend(s);
        skipped += k;
    }
    Ok(CorrelationSamples { samples, skipped })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SweepRow {
    pub param: f64,
    /// Hit score averaged over replicates and the observation grid.
    pub mean_h: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepResult {
    pub kind: DecayKind,
    pub table: Vec<SweepRow>,
    pub best: f64,
    pub curve: HitCurve,
}

impl SweepResult {
    /// Tidy CSV: per-time rows for every parameter, then one `t = all` row
    /// per parameter carrying the sweep objective.
    pub fn write_csv<W: Write>(&self, writer: W) -> Result<()> {
        let mut wtr = csv::Writer::from_writer(writer);
        write_tidy_header(&mut wtr)?;
        let experiment = format!("{}/sweep", self.curve.name);
        for s in &self.curve.series {
            for (k, t) in self.curve.times.iter().enumerate() {
                write_tidy_row(
                    &mut wtr,
                    &experiment,
                    s.decay,
                    &t.to_string(),
                    s.mean[k],
                    s.stderr[k],
                    self.curve.replicates,
                )?;
            }
        }
        for (row, s) in self.table.iter().zip(&self.curve.series) {
            let (_, err) = mean_and_stderr(&s.mean);
            write_tidy_row(
                &mut wtr,
                &experiment,
                s.decay,
                "all",
                row.mean_h,
                err,
                self.curve.replicates,
            )?;
        }
        wtr.flush()?;
        Ok(())
    }
}

/// Grid search of one decay parameter on paired replicates. The objective
/// is the mean hit score over replicates and observation times; ties go to
/// the smaller parameter.
pub fn sweep_decay_parameter(
    cfg: &ExperimentConfig,
    kind: DecayKind,
    grid: &[f64],
    exec: Execution,
) -> Result<SweepResult> {
    if grid.is_empty() {
        return Err(Error::Parameter("sweep grid must not be empty".into()));
    }
    let decays = grid
        .iter()
        .map(|&p| DecaySpec::new(kind, Some(p)))
        .collect::<Result<Vec<_>>>()?;
    let curve = evaluate(cfg, &[cfg.observable], &decays, exec)?;
    let table: Vec<SweepRow> = grid
        .iter()
        .zip(&curve.series)
        .map(|(&param, s)| SweepRow {
            param,
            mean_h: mean(&s.mean),
        })
        .collect();
    let best = argmin(&table);
    Ok(SweepResult {
        kind,
        table,
        best,
        curve,
    })
}

fn argmin(table: &[SweepRow]) -> f64 {
    table
        .iter()
        .min_by(|a, b| {
            a.mean_h
                .total_cmp(&b.mean_h)
                .then(a.param.total_cmp(&b.param))
        })
        .map(|row| row.param)
        .expect("grid is non-empty")
}

#[derive(Debug, Clone, PartialEq)]
pub struct PooledSweep {
    pub kind: DecayKind,
    /// Objective averaged with equal weight over the configs.
    pub table: Vec<SweepRow>,
    pub best: f64,
    pub per_config: Vec<SweepResult>,
}

/// One parameter chosen jointly for several experimental conditions, as
/// opposed to [`sweep_decay_parameter`] which tunes for a single one.
pub fn pooled_sweep(
    cfgs: &[ExperimentConfig],
    kind: DecayKind,
    grid: &[f64],
    exec: Execution,
) -> Result<PooledSweep> {
    if cfgs.is_empty() {
        return Err(Error::Parameter(
            "pooled sweep needs at least one config".into(),
        ));
    }
    let per_config = cfgs
        .iter()
        .map(|cfg| sweep_decay_parameter(cfg, kind, grid, exec))
        .collect::<Result<Vec<_>>>()?;
    let table: Vec<SweepRow> = grid
        .iter()
        .enumerate()
        .map(|(k, &param)| SweepRow {
            param,
            mean_h: mean(
                &per_config
                    .iter()
                    .map(|s| s.table[k].mean_h)
                    .collect::<Vec<_>>(),
            ),
        })
        .collect();
    Ok(PooledSweep {
        kind,
        best: argmin(&table),
        table,
        per_config,
    })
}
