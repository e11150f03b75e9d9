//! Source-likeliness scoring.
//!
//! Every candidate node `i` gets a decay vector `w_i[j] = w(d_ij)` built from
//! hop distances. Its likeliness score is the cosine between `w_i` and the
//! observation vector `D`; the hit score measures how much of the ranking
//! has to be searched before reaching the true source.

use std::fmt;
use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::network::DistanceMatrix;
use crate::simulator::Dataset;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum DecayKind {
    Naive,
    Power,
    Polynomial,
    Exponential,
}

impl DecayKind {
    pub const ALL: [DecayKind; 4] = [
        Self::Naive,
        Self::Power,
        Self::Polynomial,
        Self::Exponential,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Self::Naive => "naive",
            Self::Power => "power",
            Self::Polynomial => "polynomial",
            Self::Exponential => "exponential",
        }
    }
}

impl fmt::Display for DecayKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl std::str::FromStr for DecayKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Self::ALL
            .into_iter()
            .find(|k| k.name().eq_ignore_ascii_case(s))
            .ok_or_else(|| Error::Parameter(format!("unknown decay kind `{s}`")))
    }
}

/// Distance-decay function.
///
/// * `Naive`: 1 at the candidate itself, 0 elsewhere.
/// * `Power(p)`: `p^d / d!`, which rises then falls when `p > 1`.
/// * `Polynomial(rho)`: `(d + 1)^-rho`, slow decay.
/// * `Exponential(sigma)`: `exp(-sigma d)`, fast decay.
///
/// Unreachable nodes weigh 0 for every kind.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawDecay", into = "RawDecay")]
pub enum DecaySpec {
    Naive,
    Power(f64),
    Polynomial(f64),
    Exponential(f64),
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawDecay {
    kind: DecayKind,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    param: Option<f64>,
}

impl TryFrom<RawDecay> for DecaySpec {
    type Error = Error;

    fn try_from(raw: RawDecay) -> Result<Self> {
        Self::new(raw.kind, raw.param)
    }
}

impl From<DecaySpec> for RawDecay {
    fn from(spec: DecaySpec) -> Self {
        Self {
            kind: spec.kind(),
            param: spec.param(),
        }
    }
}

impl DecaySpec {
    pub fn new(kind: DecayKind, param: Option<f64>) -> Result<Self> {
        match (kind, param) {
            (DecayKind::Naive, None) => Ok(Self::Naive),
            (DecayKind::Naive, Some(_)) => Err(Error::Parameter(
                "the naive decay takes no parameter".into(),
            )),
            (_, None) => Err(Error::Parameter(format!(
                "{kind} decay requires a parameter"
            ))),
            (_, Some(p)) if !(p.is_finite() && p > 0.0) => Err(Error::Parameter(format!(
                "{kind} decay parameter must be positive, got {p}"
            ))),
            (DecayKind::Power, Some(p)) => Ok(Self::Power(p)),
            (DecayKind::Polynomial, Some(p)) => Ok(Self::Polynomial(p)),
            (DecayKind::Exponential, Some(p)) => Ok(Self::Exponential(p)),
        }
    }

    pub fn kind(&self) -> DecayKind {
        match self {
            Self::Naive => DecayKind::Naive,
            Self::Power(_) => DecayKind::Power,
            Self::Polynomial(_) => DecayKind::Polynomial,
            Self::Exponential(_) => DecayKind::Exponential,
        }
    }

    pub fn param(&self) -> Option<f64> {
        match *self {
            Self::Naive => None,
            Self::Power(p) | Self::Polynomial(p) | Self::Exponential(p) => Some(p),
        }
    }

    /// Weight at hop distance `d` (`None` = unreachable).
    pub fn weight(&self, d: Option<u32>) -> f64 {
        let Some(d) = d else { return 0.0 };
        match *self {
            Self::Naive => {
                if d == 0 {
                    1.0
                } else {
                    0.0
                }
            }
            Self::Power(p) => power_weight(p, d),
            Self::Polynomial(rho) => (f64::from(d) + 1.0).powf(-rho),
            Self::Exponential(sigma) => (-sigma * f64::from(d)).exp(),
        }
    }
}

impl fmt::Display for DecaySpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.param() {
            Some(p) => write!(f, "{}({p})", self.kind()),
            None => write!(f, "{}", self.kind()),
        }
    }
}

/// `p^d / d!`; above 20 hops the factorial goes through its logarithm.
fn power_weight(p: f64, d: u32) -> f64 {
    if d <= 20 {
        let factorial: f64 = (1..=d).map(f64::from).product();
        p.powi(d as i32) / factorial
    } else {
        let ln_factorial: f64 = (2..=d).map(|k| f64::from(k).ln()).sum();
        (f64::from(d) * p.ln() - ln_factorial).exp()
    }
}

/// Free-function form of [`DecaySpec::weight`].
pub fn decay_weight(spec: DecaySpec, d: Option<u32>) -> f64 {
    spec.weight(d)
}

/// Scores, ranking and degeneracy flag for one dataset.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LikelinessResult {
    pub scores: Vec<f64>,
    /// Node indices by descending score, ties by ascending index.
    pub ranking: Vec<usize>,
    /// Set when the dataset is all zero; scores are then all 0.
    pub degenerate: bool,
}

impl LikelinessResult {
    /// Ranks `scores` descending, ties by ascending index.
    pub fn from_scores(scores: Vec<f64>, degenerate: bool) -> Self {
        let mut ranking: Vec<usize> = (0..scores.len()).collect();
        ranking.sort_by(|&a, &b| scores[b].total_cmp(&scores[a]).then(a.cmp(&b)));
        Self {
            scores,
            ranking,
            degenerate,
        }
    }

    /// 1-based rank of `node`.
    pub fn rank_of(&self, node: usize) -> Option<usize> {
        self.ranking.iter().position(|&k| k == node).map(|p| p + 1)
    }

    /// Applies the node relabeling `perm` (node `i` moves to `perm[i]`).
    pub fn relabeled(&self, perm: &[usize]) -> Result<Self> {
        crate::network::check_permutation(perm, self.scores.len())?;
        let mut scores = vec![0.0; self.scores.len()];
        for (i, &p) in perm.iter().enumerate() {
            scores[p] = self.scores[i];
        }
        Ok(Self::from_scores(scores, self.degenerate))
    }

    /// CSV with columns `rank,node_label,score`.
    pub fn write_csv<W: Write>(&self, writer: W, labels: &[String]) -> Result<()> {
        let mut wtr = csv::Writer::from_writer(writer);
        wtr.write_record(["rank", "node_label", "score"])?;
        for (pos, &k) in self.ranking.iter().enumerate() {
            wtr.write_record([
                (pos + 1).to_string(),
                labels[k].clone(),
                self.scores[k].to_string(),
            ])?;
        }
        wtr.flush()?;
        Ok(())
    }

    /// JSON form, including the degenerate flag.
    pub fn to_json(&self, labels: &[String]) -> serde_json::Value {
        let ranking: Vec<_> = self
            .ranking
            .iter()
            .enumerate()
            .map(|(pos, &k)| {
                serde_json::json!({ "rank": pos + 1, "node_label": labels[k], "score": self.scores[k] })
            })
            .collect();
        serde_json::json!({ "degenerate": self.degenerate, "ranking": ranking })
    }
}

/// Pre-normalized decay vectors for one (distance matrix, decay) pair,
/// reusable across many datasets.
#[derive(Debug, Clone)]
pub struct Profiler {
    n: usize,
    unit_rows: Vec<f64>,
}

impl Profiler {
    pub fn new(dist: &DistanceMatrix, spec: DecaySpec) -> Self {
        let n = dist.len();
        let mut unit_rows = Vec::with_capacity(n * n);
        for i in 0..n {
            let row: Vec<f64> = dist.row(i).iter().map(|&d| spec.weight(d)).collect();
            let norm = sorted_sum(&mut row.iter().map(|w| w * w).collect::<Vec<_>>()).sqrt();
            unit_rows.extend(row.iter().map(|w| w / norm));
        }
        Self { n, unit_rows }
    }

    pub fn len(&self) -> usize {
        self.n
    }

    pub fn is_empty(&self) -> bool {
        self.n == 0
    }

    pub fn score_values(&self, values: &[f64]) -> Result<LikelinessResult> {
        if values.len() != self.n {
            return Err(Error::Dimension {
                expected: self.n,
                found: values.len(),
            });
        }
        let norm = sorted_sum(&mut values.iter().map(|v| v * v).collect::<Vec<_>>()).sqrt();
        if norm == 0.0 {
            return Ok(LikelinessResult::from_scores(vec![0.0; self.n], true));
        }
        let unit: Vec<f64> = values.iter().map(|v| v / norm).collect();
        let mut terms = Vec::with_capacity(self.n);
        let scores = self
            .unit_rows
            .chunks_exact(self.n)
            .map(|w| {
                terms.clear();
                terms.extend(w.iter().zip(&unit).map(|(a, b)| a * b));
                sorted_sum(&mut terms)
            })
            .collect();
        Ok(LikelinessResult::from_scores(scores, false))
    }

    pub fn score(&self, data: &Dataset) -> Result<LikelinessResult> {
        self.score_values(data.values())
    }
}

// Summing in sorted order makes every score a function of the multiset of
// terms only, so relabeling nodes permutes scores bit-for-bit.
fn sorted_sum(terms: &mut [f64]) -> f64 {
    terms.sort_unstable_by(f64::total_cmp);
    terms.iter().sum()
}

/// Scores every node as a candidate source of `data`.
pub fn likeliness_scores(
    dist: &DistanceMatrix,
    data: &Dataset,
    spec: DecaySpec,
) -> Result<LikelinessResult> {
    if data.len() != dist.len() {
        return Err(Error::Dimension {
            expected: dist.len(),
            found: data.len(),
        });
    }
    Profiler::new(dist, spec).score(data)
}

/// Fraction of nodes scoring at least as high as the true source; ties count
/// against the ranking.
pub fn hit_score(result: &LikelinessResult, src: usize) -> Result<f64> {
    let n = result.scores.len();
    let Some(&s_src) = result.scores.get(src) else {
        return Err(Error::Parameter(format!(
            "source {src} out of range for {n} nodes"
        )));
    };
    let hits = result.scores.iter().filter(|&&s| s >= s_src).count();
    Ok(hits as f64 / n as f64)
}
