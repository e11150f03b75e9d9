//! Independent reference implementations shared by the integration tests
//! and the acceptance runner. Nothing here calls into the crate's numerics.

#![allow(dead_code)]

use epiprofile::{DecaySpec, Network};
use proptest::prelude::*;

/// Random undirected graph on `2..=max_n` nodes, as (n, edge list).
pub fn graph_strategy(max_n: usize) -> impl Strategy<Value = (usize, Vec<(usize, usize)>)> {
    (2..=max_n, 0.0..=1.0f64).prop_flat_map(|(n, density)| {
        let pairs = n * (n - 1) / 2;
        (
            Just(n),
            prop::collection::vec(prop::bool::weighted(density), pairs),
        )
            .prop_map(|(n, bits)| {
                let mut edges = Vec::new();
                let mut k = 0;
                for a in 0..n {
                    for b in a + 1..n {
                        if bits[k] {
                            edges.push((a, b));
                        }
                        k += 1;
                    }
                }
                (n, edges)
            })
    })
}

/// All-pairs hop counts by Floyd–Warshall on the dense adjacency.
pub fn floyd_warshall(net: &Network) -> Vec<Vec<Option<u32>>> {
    let n = net.len();
    let inf = u64::MAX / 4;
    let mut d = vec![vec![inf; n]; n];
    for (i, row) in d.iter_mut().enumerate() {
        for (j, cell) in row.iter_mut().enumerate() {
            if i == j {
                *cell = 0;
            } else if net.is_linked(i, j) {
                *cell = 1;
            }
        }
    }
    for k in 0..n {
        for i in 0..n {
            for j in 0..n {
                if d[i][k] + d[k][j] < d[i][j] {
                    d[i][j] = d[i][k] + d[k][j];
                }
            }
        }
    }
    d.into_iter()
        .map(|row| {
            row.into_iter()
                .map(|x| (x < inf).then_some(x as u32))
                .collect()
        })
        .collect()
}

/// Decay weight straight from the closed forms; the power form uses a
/// running product so no factorial is ever formed.
pub fn reference_weight(spec: DecaySpec, d: Option<u32>) -> f64 {
    let Some(d) = d else { return 0.0 };
    match spec {
        DecaySpec::Naive => f64::from(u8::from(d == 0)),
        DecaySpec::Power(p) => (1..=d).fold(1.0, |acc, k| acc * p / f64::from(k)),
        DecaySpec::Polynomial(rho) => (-rho * f64::from(d + 1).ln()).exp(),
        DecaySpec::Exponential(sigma) => (-sigma * f64::from(d)).exp(),
    }
}

/// Neumaier-compensated sum.
pub fn compensated_sum(xs: impl IntoIterator<Item = f64>) -> f64 {
    let (mut sum, mut c) = (0.0f64, 0.0f64);
    for x in xs {
        let t = sum + x;
        if sum.abs() >= x.abs() {
            c += (sum - t) + x;
        } else {
            c += (x - t) + sum;
        }
        sum = t;
    }
    sum + c
}

/// Cosine between each node's decay vector and the dataset, evaluated
/// directly from the distance rows.
pub fn reference_scores(dist: &[Vec<Option<u32>>], data: &[f64], spec: DecaySpec) -> Vec<f64> {
    let data_norm = compensated_sum(data.iter().map(|v| v * v)).sqrt();
    dist.iter()
        .map(|row| {
            let w: Vec<f64> = row.iter().map(|&d| reference_weight(spec, d)).collect();
            let w_norm = compensated_sum(w.iter().map(|x| x * x)).sqrt();
            let dot = compensated_sum(w.iter().zip(data).map(|(a, b)| a * b));
            dot / (w_norm * data_norm)
        })
        .collect()
}

/// Classical single-population SIR by fixed-step RK4. Returns the time
/// series of (S, I) sampled every `dt`.
pub fn rk4_sir(alpha: f64, beta: f64, s0: f64, i0: f64, dt: f64, t_end: f64) -> Vec<(f64, f64)> {
    let n = s0 + i0;
    let f = |s: f64, i: f64| {
        let inf = alpha * s * i / n;
        (-inf, inf - beta * i)
    };
    let steps = (t_end / dt).round() as usize;
    let (mut s, mut i) = (s0, i0);
    let mut out = Vec::with_capacity(steps + 1);
    out.push((s, i));
    for _ in 0..steps {
        let k1 = f(s, i);
        let k2 = f(s + 0.5 * dt * k1.0, i + 0.5 * dt * k1.1);
        let k3 = f(s + 0.5 * dt * k2.0, i + 0.5 * dt * k2.1);
        let k4 = f(s + dt * k3.0, i + dt * k3.1);
        s += dt / 6.0 * (k1.0 + 2.0 * k2.0 + 2.0 * k3.0 + k4.0);
        i += dt / 6.0 * (k1.1 + 2.0 * k2.1 + 2.0 * k3.1 + k4.1);
        out.push((s, i));
    }
    out
}

/// Random permutation of `0..n` driven by a proptest-generated key vector.
pub fn permutation_from_keys(keys: &[u64]) -> Vec<usize> {
    let mut order: Vec<usize> = (0..keys.len()).collect();
    order.sort_by_key(|&i| (keys[i], i));
    order
}
