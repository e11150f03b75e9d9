//! Stochastic meta-population SIR dynamics.
//!
//! Each node holds continuous compartment sizes `S`, `I`, `R` plus the
//! cumulative case counter `J`. Within a node, infection proceeds at the
//! force of infection `alpha * S * I / (S + I + R)` and removal at `beta * I`.
//! Between nodes, every compartment travels along each link `i -> j` at the
//! rate `g[i][j]` given by [`mobility_matrix`]. The cumulative counter grows
//! at `alpha * I` by default; [`IncidenceTerm::ForceOfInfection`] switches it
//! to the force-of-infection term instead.
//!
//! The printed Langevin system only specifies the infectious compartment and
//! the case counter. Susceptible and removed populations are an extension:
//! they mirror the infection/removal transfers and migrate with the same
//! link rates (and independent link noise) as the infectious compartment.
//!
//! Integration is Euler–Maruyama. Every demographic noise channel is an
//! independent standard normal per step: one infection channel and one
//! removal channel per node, and separate outflow and inflow channels per
//! directed link and compartment. The infection channel is shared by the
//! `S`, `I` and `J` equations. Square-root amplitudes clamp their argument at
//! zero and all compartments clamp at zero after each step.

use std::hash::Hasher;
use std::io::{Read, Write};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::network::{mobility_matrix, Network};

/// Transmission, removal and total mobility rates (all per unit time).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawParams", into = "RawParams")]
pub struct EpidemicParams {
    alpha: f64,
    beta: f64,
    gamma: f64,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawParams {
    alpha: f64,
    beta: f64,
    gamma: f64,
}

impl TryFrom<RawParams> for EpidemicParams {
    type Error = Error;

    fn try_from(raw: RawParams) -> Result<Self> {
        Self::new(raw.alpha, raw.beta, raw.gamma)
    }
}

impl From<EpidemicParams> for RawParams {
    fn from(p: EpidemicParams) -> Self {
        Self {
            alpha: p.alpha,
            beta: p.beta,
            gamma: p.gamma,
        }
    }
}

impl EpidemicParams {
    /// `beta` must be positive; `alpha` and `gamma` may be zero (no
    /// transmission, no travel).
    pub fn new(alpha: f64, beta: f64, gamma: f64) -> Result<Self> {
        let ok = |x: f64| x.is_finite() && x >= 0.0;
        if !(ok(alpha) && ok(gamma) && beta.is_finite() && beta > 0.0) {
            return Err(Error::Parameter(format!(
                "rates must be finite with alpha >= 0, beta > 0, gamma >= 0 \
                 (got alpha={alpha}, beta={beta}, gamma={gamma})"
            )));
        }
        Ok(Self { alpha, beta, gamma })
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    pub fn beta(&self) -> f64 {
        self.beta
    }

    pub fn gamma(&self) -> f64 {
        self.gamma
    }

    /// Reproductive ratio `alpha / beta`.
    pub fn r(&self) -> f64 {
        self.alpha / self.beta
    }
}

/// Where the outbreak starts and how large the population is.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InitialCondition {
    pub source: usize,
    /// Infectious persons placed at the source at t = 0.
    pub index_cases: f64,
    /// Total population, split equally across nodes.
    pub population: f64,
}

impl InitialCondition {
    pub fn new(source: usize) -> Self {
        Self {
            source,
            index_cases: 20.0,
            population: 1e8,
        }
    }

    pub fn state(&self, n: usize) -> Result<CompartmentState> {
        if self.source >= n {
            return Err(Error::Parameter(format!(
                "source {} out of range for {n} nodes",
                self.source
            )));
        }
        let share = self.population / n as f64;
        if !(self.index_cases >= 0.0 && self.index_cases <= share && share.is_finite()) {
            return Err(Error::Parameter(format!(
                "index cases {} must lie in [0, {share}] (population per node)",
                self.index_cases
            )));
        }
        let mut state = CompartmentState {
            s: vec![share; n],
            i: vec![0.0; n],
            r: vec![0.0; n],
            j: vec![0.0; n],
        };
        state.s[self.source] = share - self.index_cases;
        state.i[self.source] = self.index_cases;
        state.j[self.source] = self.index_cases;
        Ok(state)
    }
}

/// Rate driving the cumulative case counter.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum IncidenceTerm {
    /// `alpha * I`
    #[default]
    AsWritten,
    /// `alpha * S * I / (S + I + R)`
    ForceOfInfection,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SimulationConfig {
    pub t_end: f64,
    pub sim_dt: f64,
    pub report_dt: f64,
    pub noise: bool,
    pub incidence: IncidenceTerm,
}

impl Default for SimulationConfig {
    fn default() -> Self {
        Self {
            t_end: 101.0,
            sim_dt: 0.05,
            report_dt: 1.0,
            noise: true,
            incidence: IncidenceTerm::AsWritten,
        }
    }
}

impl SimulationConfig {
    /// Integration steps per reporting interval.
    fn steps_per_report(&self) -> Result<usize> {
        let positive = |x: f64| x.is_finite() && x > 0.0;
        if !(positive(self.sim_dt) && positive(self.report_dt) && self.t_end.is_finite()) {
            return Err(Error::Parameter(
                "sim_dt and report_dt must be positive and t_end finite".into(),
            ));
        }
        if self.t_end < 0.0 {
            return Err(Error::Parameter(format!(
                "t_end must be >= 0, got {}",
                self.t_end
            )));
        }
        let k = (self.report_dt / self.sim_dt).round();
        if k < 1.0 || (k * self.sim_dt - self.report_dt).abs() > 1e-9 * self.report_dt {
            return Err(Error::Parameter(format!(
                "report_dt {} is not a positive multiple of sim_dt {}",
                self.report_dt, self.sim_dt
            )));
        }
        Ok(k as usize)
    }
}

/// Per-node compartment sizes (reals, since the model is continuous).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CompartmentState {
    pub s: Vec<f64>,
    pub i: Vec<f64>,
    pub r: Vec<f64>,
    pub j: Vec<f64>,
}

impl CompartmentState {
    pub fn len(&self) -> usize {
        self.i.len()
    }

    pub fn is_empty(&self) -> bool {
        self.i.is_empty()
    }

    /// Sum of `S + I + R` over all nodes.
    pub fn total_population(&self) -> f64 {
        self.s.iter().chain(&self.i).chain(&self.r).sum()
    }
}

/// Reported states on a uniform time grid, with provenance.
#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    pub times: Vec<f64>,
    pub states: Vec<CompartmentState>,
    pub labels: Vec<String>,
    pub params: EpidemicParams,
    pub init: InitialCondition,
    pub config: SimulationConfig,
    pub seed: Option<u64>,
}

impl Trajectory {
    /// Index of the report at time `t`; `t` must sit on the reporting grid.
    pub fn index_at(&self, t: f64) -> Result<usize> {
        let out_of_range = || Error::TimeOutOfRange {
            t,
            start: self.times[0],
            end: *self.times.last().unwrap(),
        };
        if !t.is_finite() || t < 0.0 {
            return Err(out_of_range());
        }
        let k = (t / self.config.report_dt).round() as usize;
        match self.times.get(k) {
            Some(&tk) if (tk - t).abs() <= 1e-9 * t.abs().max(1.0) => Ok(k),
            _ => Err(out_of_range()),
        }
    }

    pub fn state_at(&self, t: f64) -> Result<&CompartmentState> {
        Ok(&self.states[self.index_at(t)?])
    }

    /// FNV-1a over the bit patterns of every reported value.
    pub fn checksum(&self) -> u64 {
        let mut h = Fnv1a::default();
        for (t, st) in self.times.iter().zip(&self.states) {
            h.write_u64(t.to_bits());
            for v in st.s.iter().chain(&st.i).chain(&st.r).chain(&st.j) {
                h.write_u64(v.to_bits());
            }
        }
        h.finish()
    }

    /// Long-format CSV: `time,node_label,S,I,R,J`.
    pub fn write_csv<W: Write>(&self, writer: W) -> Result<()> {
        let mut wtr = csv::Writer::from_writer(writer);
        wtr.write_record(["time", "node_label", "S", "I", "R", "J"])?;
        for (t, st) in self.times.iter().zip(&self.states) {
            for (k, label) in self.labels.iter().enumerate() {
                wtr.write_record([
                    t.to_string(),
                    label.clone(),
                    st.s[k].to_string(),
                    st.i[k].to_string(),
                    st.r[k].to_string(),
                    st.j[k].to_string(),
                ])?;
            }
        }
        wtr.flush()?;
        Ok(())
    }

    /// JSON sidecar echoing every simulation input.
    pub fn metadata(&self) -> TrajectoryMetadata {
        TrajectoryMetadata {
            nodes: self.labels.len(),
            params: self.params,
            init: self.init,
            config: self.config,
            seed: self.seed,
            source_label: self.labels[self.init.source].clone(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrajectoryMetadata {
    pub nodes: usize,
    pub params: EpidemicParams,
    pub init: InitialCondition,
    pub config: SimulationConfig,
    pub seed: Option<u64>,
    pub source_label: String,
}

struct Fnv1a(u64);

impl Default for Fnv1a {
    fn default() -> Self {
        Self(0xcbf2_9ce4_8422_2325)
    }
}

impl Hasher for Fnv1a {
    fn finish(&self) -> u64 {
        self.0
    }

    fn write(&mut self, bytes: &[u8]) {
        for &b in bytes {
            self.0 ^= u64::from(b);
            self.0 = self.0.wrapping_mul(0x0100_0000_01b3);
        }
    }
}

/// Seeded simulation run.
pub fn simulate(
    net: &Network,
    params: EpidemicParams,
    init: InitialCondition,
    config: SimulationConfig,
    seed: u64,
) -> Result<Trajectory> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut traj = simulate_with_rng(net, params, init, config, &mut rng)?;
    traj.seed = Some(seed);
    Ok(traj)
}

/// Simulation run drawing noise from a caller-owned stream.
pub fn simulate_with_rng<R: Rng + ?Sized>(
    net: &Network,
    params: EpidemicParams,
    init: InitialCondition,
    config: SimulationConfig,
    rng: &mut R,
) -> Result<Trajectory> {
    let steps_per_report = config.steps_per_report()?;
    let n = net.len();
    let mut state = init.state(n)?;
    let links = links(net, params.gamma)?;
    let reports = (config.t_end / config.report_dt + 1e-9).floor() as usize;

    let mut times = Vec::with_capacity(reports + 1);
    let mut states = Vec::with_capacity(reports + 1);
    times.push(0.0);
    states.push(state.clone());

    let mut stepper = Stepper::new(n, params, config);
    let mut step = 0usize;
    for report in 1..=reports {
        for _ in 0..steps_per_report {
            step += 1;
            stepper.advance(&mut state, &links, rng, step as f64 * config.sim_dt)?;
        }
        times.push(report as f64 * config.report_dt);
        states.push(state.clone());
    }

    Ok(Trajectory {
        times,
        states,
        labels: net.labels().to_vec(),
        params,
        init,
        config,
        seed: None,
    })
}

struct Link {
    from: usize,
    to: usize,
    rate: f64,
}

fn links(net: &Network, gamma: f64) -> Result<Vec<Link>> {
    if gamma == 0.0 {
        return Ok(Vec::new());
    }
    let g = mobility_matrix(net, gamma)?;
    Ok((0..net.len())
        .flat_map(|from| {
            let g = &g;
            net.neighbors(from).iter().map(move |&to| Link {
                from,
                to,
                rate: g.get(from, to),
            })
        })
        .collect())
}

struct Stepper {
    params: EpidemicParams,
    config: SimulationConfig,
    sqrt_dt: f64,
    ds: Vec<f64>,
    di: Vec<f64>,
    dr: Vec<f64>,
    dj: Vec<f64>,
}

impl Stepper {
    fn new(n: usize, params: EpidemicParams, config: SimulationConfig) -> Self {
        Self {
            params,
            config,
            sqrt_dt: config.sim_dt.sqrt(),
            ds: vec![0.0; n],
            di: vec![0.0; n],
            dr: vec![0.0; n],
            dj: vec![0.0; n],
        }
    }

    fn normal<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        if self.config.noise {
            rng.sample(StandardNormal)
        } else {
            0.0
        }
    }

    fn advance<R: Rng + ?Sized>(
        &mut self,
        state: &mut CompartmentState,
        links: &[Link],
        rng: &mut R,
        t_next: f64,
    ) -> Result<()> {
        let dt = self.config.sim_dt;
        let sq = self.sqrt_dt;
        let EpidemicParams { alpha, beta, .. } = self.params;

        for k in 0..state.len() {
            let (s, i, r) = (state.s[k], state.i[k], state.r[k]);
            let total = s + i + r;
            let infection = if total > 0.0 {
                alpha * s * i / total
            } else {
                0.0
            };
            let removal = beta * i;
            let incidence = match self.config.incidence {
                IncidenceTerm::AsWritten => alpha * i,
                IncidenceTerm::ForceOfInfection => infection,
            };
            let z_inf = self.normal(rng);
            let z_rem = self.normal(rng);
            let infection_noise = infection.max(0.0).sqrt() * sq * z_inf;
            let removal_noise = removal.max(0.0).sqrt() * sq * z_rem;

            self.ds[k] = -infection * dt - infection_noise;
            self.di[k] = (infection - removal) * dt + infection_noise - removal_noise;
            self.dr[k] = removal * dt + removal_noise;
            self.dj[k] = (incidence * dt + incidence.max(0.0).sqrt() * sq * z_inf).max(0.0);
        }

        for link in links {
            for (x, dx) in [
                (&state.s, &mut self.ds),
                (&state.i, &mut self.di),
                (&state.r, &mut self.dr),
            ] {
                let flow = link.rate * x[link.from];
                let amplitude = flow.max(0.0).sqrt() * sq;
                let z_out = if self.config.noise {
                    rng.sample::<f64, _>(StandardNormal)
                } else {
                    0.0
                };
                let z_in = if self.config.noise {
                    rng.sample::<f64, _>(StandardNormal)
                } else {
                    0.0
                };
                dx[link.from] -= flow * dt + amplitude * z_out;
                dx[link.to] += flow * dt + amplitude * z_in;
            }
        }

        for k in 0..state.len() {
            for (x, dx) in [
                (&mut state.s, &self.ds),
                (&mut state.i, &self.di),
                (&mut state.r, &self.dr),
                (&mut state.j, &self.dj),
            ] {
                let next = x[k] + dx[k];
                if !next.is_finite() {
                    return Err(Error::NonFinite {
                        node: k,
                        time: t_next,
                    });
                }
                x[k] = next.max(0.0);
            }
        }
        Ok(())
    }
}

/// Which per-node quantity a dataset reports.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Observable {
    #[serde(rename = "I")]
    I,
    #[serde(rename = "J")]
    J,
    #[serde(rename = "DELTA_I")]
    DeltaI,
    #[serde(rename = "DELTA_J")]
    DeltaJ,
}

impl Observable {
    pub const ALL: [Observable; 4] = [Self::I, Self::J, Self::DeltaI, Self::DeltaJ];

    pub fn name(self) -> &'static str {
        match self {
            Self::I => "I",
            Self::J => "J",
            Self::DeltaI => "DELTA_I",
            Self::DeltaJ => "DELTA_J",
        }
    }
}

impl std::fmt::Display for Observable {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

impl std::str::FromStr for Observable {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Self::ALL
            .into_iter()
            .find(|k| k.name().eq_ignore_ascii_case(s))
            .ok_or_else(|| Error::Parameter(format!("unknown observable `{s}`")))
    }
}

/// One observation vector, one non-negative value per node.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Dataset {
    values: Vec<f64>,
    kind: Observable,
    t_obs: Option<f64>,
}

impl Dataset {
    pub fn new(values: Vec<f64>, kind: Observable) -> Result<Self> {
        if let Some((k, v)) = values
            .iter()
            .enumerate()
            .find(|(_, v)| !(v.is_finite() && **v >= 0.0))
        {
            return Err(Error::Parameter(format!(
                "dataset value at node {k} must be finite and non-negative, got {v}"
            )));
        }
        Ok(Self {
            values,
            kind,
            t_obs: None,
        })
    }

    pub fn with_t_obs(mut self, t_obs: f64) -> Self {
        self.t_obs = Some(t_obs);
        self
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn kind(&self) -> Observable {
        self.kind
    }

    pub fn t_obs(&self) -> Option<f64> {
        self.t_obs
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn is_all_zero(&self) -> bool {
        self.values.iter().all(|&v| v == 0.0)
    }

    /// Reads `node_label,value` rows and orders them by `labels`.
    pub fn read_csv<R: Read>(reader: R, labels: &[String], kind: Observable) -> Result<Self> {
        let mut rdr = csv::ReaderBuilder::new()
            .trim(csv::Trim::All)
            .from_reader(reader);
        let mut values = vec![None; labels.len()];
        for record in rdr.records() {
            let record = record?;
            let line = record.position().map_or(0, |p| p.line());
            let load_err = |reason: String| Error::Load {
                path: "<dataset>".into(),
                line,
                reason,
            };
            if record.len() != 2 {
                return Err(load_err(format!(
                    "expected 2 fields, found {}",
                    record.len()
                )));
            }
            let k = labels.iter().position(|l| l == &record[0]).ok_or_else(|| {
                Error::LabelMismatch(format!(
                    "dataset label `{}` is not a network node",
                    &record[0]
                ))
            })?;
            let v: f64 = record[1]
                .parse()
                .map_err(|_| load_err(format!("value `{}` is not a number", &record[1])))?;
            if values[k].replace(v).is_some() {
                return Err(load_err(format!("duplicate label `{}`", &record[0])));
            }
        }
        let values = values
            .into_iter()
            .zip(labels)
            .map(|(v, l)| v.ok_or_else(|| Error::LabelMismatch(format!("no value for node `{l}`"))))
            .collect::<Result<Vec<_>>>()?;
        Self::new(values, kind)
    }

    pub fn write_csv<W: Write>(&self, writer: W, labels: &[String]) -> Result<()> {
        let mut wtr = csv::Writer::from_writer(writer);
        wtr.write_record(["node_label", "value"])?;
        for (l, v) in labels.iter().zip(&self.values) {
            wtr.write_record([l.clone(), v.to_string()])?;
        }
        wtr.flush()?;
        Ok(())
    }
}

/// Observation of `kind` at `t_obs`; differenced kinds span `[t_obs, t_obs + delta_t]`
/// and clamp negative differences to zero.
pub fn synthesize_dataset(
    traj: &Trajectory,
    t_obs: f64,
    delta_t: f64,
    kind: Observable,
) -> Result<Dataset> {
    let now = traj.state_at(t_obs)?;
    let values = match kind {
        Observable::I => now.i.clone(),
        Observable::J => now.j.clone(),
        Observable::DeltaI | Observable::DeltaJ => {
            let later = traj.state_at(t_obs + delta_t)?;
            let (a, b) = if kind == Observable::DeltaI {
                (&now.i, &later.i)
            } else {
                (&now.j, &later.j)
            };
            a.iter().zip(b).map(|(x0, x1)| (x1 - x0).max(0.0)).collect()
        }
    };
    Ok(Dataset::new(values, kind)?.with_t_obs(t_obs))
}

/// Pearson correlation between `I(t)` and `I(0)`.
pub fn correlation_ri(traj: &Trajectory, t: f64) -> Result<f64> {
    let now = traj.state_at(t)?;
    crate::stats::pearson(&now.i, &traj.states[0].i, ("I(t)", "I(0)"))
}
