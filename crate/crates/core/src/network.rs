//! Undirected meta-population networks: adjacency, hop distances and the
//! degree-based mobility law that couples sub-populations.

use std::collections::VecDeque;
use std::io::{Read, Write};
use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};

/// Undirected simple graph over labelled nodes.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Network {
    labels: Vec<String>,
    adjacency: Vec<u8>,
    neighbors: Vec<Vec<usize>>,
}

impl Network {
    /// Builds a network from a dense 0/1 matrix, validating symmetry and the
    /// zero diagonal.
    pub fn from_adjacency(labels: Vec<String>, matrix: &[Vec<u8>]) -> Result<Self> {
        let n = labels.len();
        if n == 0 {
            return Err(Error::Parameter(
                "network must have at least one node".into(),
            ));
        }
        if matrix.len() != n {
            return Err(Error::Dimension {
                expected: n,
                found: matrix.len(),
            });
        }
        let mut adjacency = vec![0u8; n * n];
        for (i, row) in matrix.iter().enumerate() {
            if row.len() != n {
                return Err(Error::Dimension {
                    expected: n,
                    found: row.len(),
                });
            }
            for (j, &v) in row.iter().enumerate() {
                let cell = |reason: &str| Error::Adjacency {
                    row: labels[i].clone(),
                    col: labels[j].clone(),
                    reason: reason.to_string(),
                };
                if v > 1 {
                    return Err(cell("entry must be 0 or 1"));
                }
                if i == j && v != 0 {
                    return Err(cell("self-loop on the diagonal"));
                }
                if j < i && v != matrix[j][i] {
                    return Err(cell("asymmetric entry (directed links are not supported)"));
                }
                adjacency[i * n + j] = v;
            }
        }
        Ok(Self::from_parts(labels, adjacency))
    }

    /// Builds a network on nodes `n0..n{N-1}` from an undirected edge list.
    pub fn from_edges(n: usize, edges: &[(usize, usize)]) -> Result<Self> {
        let labels = default_labels(n);
        let mut matrix = vec![vec![0u8; n]; n];
        for &(a, b) in edges {
            if a >= n || b >= n || a == b {
                return Err(Error::Parameter(format!(
                    "invalid edge ({a}, {b}) for {n} nodes"
                )));
            }
            matrix[a][b] = 1;
            matrix[b][a] = 1;
        }
        Self::from_adjacency(labels, &matrix)
    }

    fn from_parts(labels: Vec<String>, adjacency: Vec<u8>) -> Self {
        let n = labels.len();
        let neighbors = (0..n)
            .map(|i| (0..n).filter(|&j| adjacency[i * n + j] == 1).collect())
            .collect();
        Self {
            labels,
            adjacency,
            neighbors,
        }
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn labels(&self) -> &[String] {
        &self.labels
    }

    pub fn index_of(&self, label: &str) -> Option<usize> {
        self.labels.iter().position(|l| l == label)
    }

    pub fn is_linked(&self, i: usize, j: usize) -> bool {
        self.adjacency[i * self.len() + j] == 1
    }

    pub fn neighbors(&self, i: usize) -> &[usize] {
        &self.neighbors[i]
    }

    pub fn degree(&self, i: usize) -> usize {
        self.neighbors[i].len()
    }

    pub fn edge_count(&self) -> usize {
        self.neighbors.iter().map(Vec::len).sum::<usize>() / 2
    }

    pub fn mean_degree(&self) -> f64 {
        2.0 * self.edge_count() as f64 / self.len() as f64
    }

    /// Returns the same graph with node `i` moved to position `perm[i]`.
    pub fn relabeled(&self, perm: &[usize]) -> Result<Self> {
        let n = self.len();
        check_permutation(perm, n)?;
        let mut labels = vec![String::new(); n];
        let mut adjacency = vec![0u8; n * n];
        for i in 0..n {
            labels[perm[i]] = self.labels[i].clone();
            for j in 0..n {
                adjacency[perm[i] * n + perm[j]] = self.adjacency[i * n + j];
            }
        }
        Ok(Self::from_parts(labels, adjacency))
    }

    /// Reads the adjacency CSV format: a header of node labels (optionally
    /// preceded by an empty corner cell), then one row per node holding its
    /// label and N entries in {0, 1}.
    pub fn read_csv<R: Read>(reader: R) -> Result<Self> {
        let mut rdr = csv::ReaderBuilder::new()
            .has_headers(false)
            .flexible(true)
            .trim(csv::Trim::All)
            .from_reader(reader);
        let mut records = rdr.records();
        let header = records
            .next()
            .ok_or_else(|| Error::Parameter("empty adjacency file".into()))??;
        let mut labels: Vec<String> = header.iter().map(str::to_string).collect();
        if labels.first().is_some_and(String::is_empty) {
            labels.remove(0);
        }
        let n = labels.len();
        let mut matrix = Vec::with_capacity(n);
        for (row_idx, record) in records.enumerate() {
            let record = record?;
            let line = record.position().map_or(0, |p| p.line());
            let load_err = |reason: String| Error::Load {
                path: "<adjacency>".into(),
                line,
                reason,
            };
            if row_idx >= n {
                return Err(load_err(format!("more rows than the {n} labelled nodes")));
            }
            if record.len() != n + 1 {
                return Err(load_err(format!(
                    "expected a label and {n} entries, found {} fields",
                    record.len()
                )));
            }
            if record[0] != labels[row_idx] {
                return Err(load_err(format!(
                    "row label `{}` does not match header label `{}`",
                    &record[0], labels[row_idx]
                )));
            }
            let row = record
                .iter()
                .skip(1)
                .enumerate()
                .map(|(j, s)| match s {
                    "0" => Ok(0u8),
                    "1" => Ok(1u8),
                    other => Err(Error::Adjacency {
                        row: labels[row_idx].clone(),
                        col: labels[j].clone(),
                        reason: format!("entry `{other}` is not 0 or 1"),
                    }),
                })
                .collect::<Result<Vec<u8>>>()?;
            matrix.push(row);
        }
        if matrix.len() != n {
            return Err(Error::Dimension {
                expected: n,
                found: matrix.len(),
            });
        }
        Self::from_adjacency(labels, &matrix)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let file = std::fs::File::open(path)?;
        Self::read_csv(file).map_err(|e| match e {
            Error::Load { line, reason, .. } => Error::Load {
                path: path.to_path_buf(),
                line,
                reason,
            },
            other => other,
        })
    }

    pub fn write_csv<W: Write>(&self, writer: W) -> Result<()> {
        let mut wtr = csv::WriterBuilder::new().flexible(true).from_writer(writer);
        wtr.write_record(&self.labels)?;
        let n = self.len();
        for i in 0..n {
            let mut row = Vec::with_capacity(n + 1);
            row.push(self.labels[i].clone());
            row.extend((0..n).map(|j| self.adjacency[i * n + j].to_string()));
            wtr.write_record(&row)?;
        }
        wtr.flush()?;
        Ok(())
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let file = std::fs::File::create(path)?;
        self.write_csv(std::io::BufWriter::new(file))
    }
}

pub fn default_labels(n: usize) -> Vec<String> {
    (0..n).map(|i| format!("n{i}")).collect()
}

pub(crate) fn check_permutation(perm: &[usize], n: usize) -> Result<()> {
    if perm.len() != n {
        return Err(Error::Dimension {
            expected: n,
            found: perm.len(),
        });
    }
    let mut seen = vec![false; n];
    for &p in perm {
        if p >= n || std::mem::replace(&mut seen[p], true) {
            return Err(Error::Parameter("relabeling is not a permutation".into()));
        }
    }
    Ok(())
}

/// G(n, p) random graph with `p = mean_degree / (n - 1)`, seeded.
pub fn generate_erdos_renyi(n: usize, mean_degree: f64, seed: u64) -> Result<Network> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    erdos_renyi_with_rng(n, mean_degree, &mut rng)
}

/// Same as [`generate_erdos_renyi`] but draws from a caller-owned stream.
pub fn erdos_renyi_with_rng<R: Rng + ?Sized>(
    n: usize,
    mean_degree: f64,
    rng: &mut R,
) -> Result<Network> {
    if n < 2 {
        return Err(Error::Parameter(format!(
            "node count must be at least 2, got {n}"
        )));
    }
    if !(mean_degree.is_finite() && mean_degree > 0.0 && mean_degree <= (n - 1) as f64) {
        return Err(Error::Parameter(format!(
            "mean degree must lie in (0, {}], got {mean_degree}",
            n - 1
        )));
    }
    let p = mean_degree / (n - 1) as f64;
    let mut adjacency = vec![0u8; n * n];
    for i in 0..n {
        for j in (i + 1)..n {
            if rng.random::<f64>() < p {
                adjacency[i * n + j] = 1;
                adjacency[j * n + i] = 1;
            }
        }
    }
    Ok(Network::from_parts(default_labels(n), adjacency))
}

/// All-pairs hop counts; `None` marks an unreachable pair.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DistanceMatrix {
    n: usize,
    hops: Vec<Option<u32>>,
}

impl DistanceMatrix {
    pub fn len(&self) -> usize {
        self.n
    }

    pub fn is_empty(&self) -> bool {
        self.n == 0
    }

    pub fn get(&self, i: usize, j: usize) -> Option<u32> {
        self.hops[i * self.n + j]
    }

    pub fn row(&self, i: usize) -> &[Option<u32>] {
        &self.hops[i * self.n..(i + 1) * self.n]
    }

    /// True when swapping positions `a` and `b` leaves the matrix unchanged,
    /// i.e. the two nodes occupy topologically equivalent positions.
    pub fn swap_equivalent(&self, a: usize, b: usize) -> bool {
        let swap = |k: usize| {
            if k == a {
                b
            } else if k == b {
                a
            } else {
                k
            }
        };
        (0..self.n).all(|i| (0..self.n).all(|j| self.get(i, j) == self.get(swap(i), swap(j))))
    }
}

/// Breadth-first search from every node.
pub fn hop_distances(net: &Network) -> DistanceMatrix {
    let n = net.len();
    let mut hops = vec![None; n * n];
    let mut queue = VecDeque::with_capacity(n);
    for src in 0..n {
        let row = &mut hops[src * n..(src + 1) * n];
        row[src] = Some(0);
        queue.push_back(src);
        while let Some(u) = queue.pop_front() {
            let next = row[u].map(|d| d + 1);
            for &v in net.neighbors(u) {
                if row[v].is_none() {
                    row[v] = next;
                    queue.push_back(v);
                }
            }
        }
    }
    DistanceMatrix { n, hops }
}

/// Per-link travel rates `g[i][j]` (1/time).
#[derive(Debug, Clone, PartialEq)]
pub struct MobilityMatrix {
    n: usize,
    rates: Vec<f64>,
}

impl MobilityMatrix {
    pub fn len(&self) -> usize {
        self.n
    }

    pub fn is_empty(&self) -> bool {
        self.n == 0
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.rates[i * self.n + j]
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.rates[i * self.n..(i + 1) * self.n]
    }
}

/// Degree-weighted mobility: the outflow rate `gamma` of each node is shared
/// among its links in proportion to `sqrt(k_i k_j)`. Isolated nodes get a
/// zero row.
pub fn mobility_matrix(net: &Network, gamma: f64) -> Result<MobilityMatrix> {
    if !(gamma.is_finite() && gamma > 0.0) {
        return Err(Error::Parameter(format!(
            "gamma must be positive, got {gamma}"
        )));
    }
    let n = net.len();
    let mut rates = vec![0.0; n * n];
    for i in 0..n {
        let ki = net.degree(i) as f64;
        let norm: f64 = net
            .neighbors(i)
            .iter()
            .map(|&m| (ki * net.degree(m) as f64).sqrt())
            .sum();
        if norm == 0.0 {
            continue;
        }
        for &j in net.neighbors(i) {
            rates[i * n + j] = (ki * net.degree(j) as f64).sqrt() / norm * gamma;
        }
    }
    Ok(MobilityMatrix { n, rates })
}
