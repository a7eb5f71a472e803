//! Reference computations used as test oracles. They share no code with the
//! library beyond its public data types.

#![allow(dead_code)]

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Exact optimum of `min <Q, M>` subject to `Q 1 = r`, `Q^T 1 = c`, `Q >= 0`
/// by successive shortest paths on the bipartite flow network.
pub fn exact_transport_cost(cost: &[Vec<f64>], r: &[f64], c: &[f64]) -> f64 {
    struct Edge {
        to: usize,
        cap: f64,
        cost: f64,
    }
    let n = r.len();
    let k = c.len();
    let source = n + k;
    let sink = source + 1;
    let nodes = sink + 1;
    let mut edges: Vec<Edge> = Vec::new();
    let mut adj: Vec<Vec<usize>> = vec![Vec::new(); nodes];
    let add = |edges: &mut Vec<Edge>, adj: &mut Vec<Vec<usize>>, a: usize, b: usize, cap: f64, w: f64| {
        adj[a].push(edges.len());
        edges.push(Edge { to: b, cap, cost: w });
        adj[b].push(edges.len());
        edges.push(Edge { to: a, cap: 0.0, cost: -w });
    };
    for (i, &ri) in r.iter().enumerate() {
        add(&mut edges, &mut adj, source, i, ri, 0.0);
        for j in 0..k {
            add(&mut edges, &mut adj, i, n + j, f64::INFINITY, cost[i][j]);
        }
    }
    for (j, &cj) in c.iter().enumerate() {
        add(&mut edges, &mut adj, n + j, sink, cj, 0.0);
    }

    let eps = 1e-15;
    let mut remaining: f64 = r.iter().sum();
    let mut total = 0.0;
    while remaining > 1e-13 {
        // Bellman-Ford from the source over the residual graph.
        let mut dist = vec![f64::INFINITY; nodes];
        let mut via = vec![usize::MAX; nodes];
        dist[source] = 0.0;
        for _ in 0..nodes {
            let mut changed = false;
            for u in 0..nodes {
                if dist[u].is_infinite() {
                    continue;
                }
                for &e in &adj[u] {
                    let edge = &edges[e];
                    if edge.cap > eps && dist[u] + edge.cost < dist[edge.to] - 1e-15 {
                        dist[edge.to] = dist[u] + edge.cost;
                        via[edge.to] = e;
                        changed = true;
                    }
                }
            }
            if !changed {
                break;
            }
        }
        assert!(dist[sink].is_finite(), "oracle: no augmenting path with {remaining} left");
        let mut push = remaining;
        let mut v = sink;
        while v != source {
            let e = via[v];
            push = push.min(edges[e].cap);
            v = edges[e ^ 1].to;
        }
        let mut v = sink;
        while v != source {
            let e = via[v];
            edges[e].cap -= push;
            edges[e ^ 1].cap += push;
            v = edges[e ^ 1].to;
        }
        total += push * dist[sink];
        remaining -= push;
    }
    total
}

/// Anchor selection by sorting each candidate list and slicing. `rho_percent`
/// is rho in hundredths so the floor is computed in integers.
pub fn sort_and_slice(candidates: &[Vec<usize>], confidence: &[f64], rho_percent: usize, min_anchors: usize) -> Vec<Vec<usize>> {
    candidates
        .iter()
        .map(|members| {
            if members.is_empty() {
                return Vec::new();
            }
            let mut sorted = members.clone();
            sorted.sort_by(|&a, &b| confidence[b].partial_cmp(&confidence[a]).unwrap().then(a.cmp(&b)));
            let take = (rho_percent * members.len() / 100).max(min_anchors).min(members.len());
            sorted.truncate(take);
            sorted
        })
        .collect()
}

/// Confusion counts, IoU per class and overall accuracy by direct tally over
/// label codes, `None` meaning ignore.
pub struct Tally {
    pub counts: Vec<Vec<u64>>,
    pub iou: Vec<Option<f64>>,
    pub miou: f64,
    pub oa: f64,
}

pub fn tally(truth: &[Option<usize>], pred: &[Option<usize>], k: usize) -> Tally {
    let mut counts = vec![vec![0u64; k]; k];
    for (t, p) in truth.iter().zip(pred) {
        if let (Some(t), Some(p)) = (t, p) {
            counts[*t][*p] += 1;
        }
    }
    let mut iou = Vec::new();
    for c in 0..k {
        let tp = counts[c][c] as f64;
        let row: u64 = counts[c].iter().sum();
        let col: u64 = counts.iter().map(|r| r[c]).sum();
        let union = row as f64 + col as f64 - tp;
        iou.push(if union > 0.0 { Some(tp / union) } else { None });
    }
    let defined: Vec<f64> = iou.iter().flatten().copied().collect();
    let miou = defined.iter().sum::<f64>() / defined.len() as f64;
    let hits: u64 = (0..k).map(|c| counts[c][c]).sum();
    let all: u64 = counts.iter().flatten().sum();
    Tally { counts, iou, miou, oa: hits as f64 / all as f64 }
}

/// Central difference of `f` along every coordinate of `x`.
pub fn central_differences(x: &[f64], h: f64, mut f: impl FnMut(&[f64]) -> f64) -> Vec<f64> {
    let mut probe = x.to_vec();
    (0..x.len())
        .map(|j| {
            probe[j] = x[j] + h;
            let up = f(&probe);
            probe[j] = x[j] - h;
            let down = f(&probe);
            probe[j] = x[j];
            (up - down) / (2.0 * h)
        })
        .collect()
}

pub fn random_simplex(rng: &mut impl Rng, k: usize) -> Vec<f64> {
    let raw: Vec<f64> = (0..k).map(|_| rng.random_range(0.05..1.0)).collect();
    let s: f64 = raw.iter().sum();
    raw.into_iter().map(|v| v / s).collect()
}

pub fn histogram(labels: &[Option<usize>], k: usize) -> Vec<usize> {
    let mut h = vec![0; k];
    for l in labels.iter().flatten() {
        h[*l] += 1;
    }
    h
}
