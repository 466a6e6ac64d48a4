//! Loopless K-shortest paths under usefulness-weighted edge costs.
//!
//! Deviation search (Yen) over the undirected traversal rows. Equal-cost
//! paths are ordered lexicographically by their `(vertex, relation)` step
//! sequence, and every path cost is summed left to right from the source, so
//! ranks are reproducible bit for bit.

use std::cmp::Ordering;
use std::cell::RefCell;
use std::collections::BinaryHeap;

use crate::hetgraph::{HetGraph, RelId, VertexId};

use super::Rtud;

/// A simple path: the source vertex followed by `(reached vertex, relation)`
/// steps.
#[derive(Debug, Clone, PartialEq)]
pub struct Path {
    pub source: VertexId,
    pub steps: Vec<(VertexId, RelId)>,
    pub weight: f64,
}

impl Path {
    /// Number of relations on the path.
    pub fn len(&self) -> usize {
        self.steps.len()
    }

    pub fn is_empty(&self) -> bool {
        self.steps.is_empty()
    }

    pub fn vertices(&self) -> impl Iterator<Item = VertexId> + '_ {
        std::iter::once(self.source).chain(self.steps.iter().map(|s| s.0))
    }

    pub fn relations(&self) -> impl Iterator<Item = RelId> + '_ {
        self.steps.iter().map(|s| s.1)
    }

    /// Same vertex/relation sequence, ignoring weight.
    pub fn same_route(&self, other: &Path) -> bool {
        self.source == other.source && self.steps == other.steps
    }

    fn rank_cmp(&self, other: &Path) -> Ordering {
        self.weight
            .total_cmp(&other.weight)
            .then_with(|| self.steps.cmp(&other.steps))
    }
}

#[derive(Debug, Clone, Copy, Default)]
pub struct SearchOptions {
    /// Ignore every relation directly joining the two endpoints.
    pub exclude_direct_edge: bool,
}

#[derive(Clone, Copy)]
struct Label {
    cost: f64,
    pred: Option<(VertexId, RelId)>,
    settled: bool,
}

#[derive(PartialEq)]
struct Entry {
    cost: f64,
    vertex: VertexId,
}

impl Eq for Entry {}

impl Ord for Entry {
    fn cmp(&self, other: &Self) -> Ordering {
        other
            .cost
            .total_cmp(&self.cost)
            .then_with(|| other.vertex.cmp(&self.vertex))
    }
}

impl PartialOrd for Entry {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

/// Per-vertex labels reused across searches; a label is live only when its
/// stamp equals the current generation.
struct Labels {
    label: Vec<Label>,
    stamp: Vec<u32>,
    generation: u32,
}

impl Labels {
    fn reset(&mut self, n: usize) {
        if self.label.len() < n {
            self.label.resize(
                n,
                Label {
                    cost: 0.0,
                    pred: None,
                    settled: false,
                },
            );
            self.stamp.resize(n, 0);
        }
        self.generation = self.generation.wrapping_add(1);
        if self.generation == 0 {
            self.stamp.iter_mut().for_each(|s| *s = 0);
            self.generation = 1;
        }
    }

    fn get(&self, v: VertexId) -> Option<&Label> {
        let i = v.index();
        (self.stamp[i] == self.generation).then(|| &self.label[i])
    }

    fn set(&mut self, v: VertexId, l: Label) {
        let i = v.index();
        self.stamp[i] = self.generation;
        self.label[i] = l;
    }

    fn steps_to(&self, mut v: VertexId) -> Vec<(VertexId, RelId)> {
        let mut out = Vec::new();
        while let Some((prev, z)) = self.label[v.index()].pred {
            out.push((v, z));
            v = prev;
        }
        out.reverse();
        out
    }
}

thread_local! {
    static LABELS: RefCell<Labels> = const {
        RefCell::new(Labels {
            label: Vec::new(),
            stamp: Vec::new(),
            generation: 0,
        })
    };
}

struct Search<'a> {
    graph: &'a HetGraph,
    beta: &'a Rtud,
    banned_vertices: &'a [VertexId],
    banned_edges: &'a [(VertexId, RelId, VertexId)],
}

impl Search<'_> {
    /// Cheapest path `from -> to` starting with accumulated cost
    /// `start_cost`; ties broken toward the lexicographically smaller step
    /// sequence.
    fn run(&self, from: VertexId, to: VertexId, start_cost: f64) -> Option<(Vec<(VertexId, RelId)>, f64)> {
        LABELS.with(|cell| self.run_with(&mut cell.borrow_mut(), from, to, start_cost))
    }

    fn run_with(
        &self,
        labels: &mut Labels,
        from: VertexId,
        to: VertexId,
        start_cost: f64,
    ) -> Option<(Vec<(VertexId, RelId)>, f64)> {
        labels.reset(self.graph.vertex_count());
        let mut heap = BinaryHeap::new();
        labels.set(
            from,
            Label {
                cost: start_cost,
                pred: None,
                settled: false,
            },
        );
        heap.push(Entry {
            cost: start_cost,
            vertex: from,
        });
        while let Some(Entry { cost, vertex: x }) = heap.pop() {
            let label = labels.get(x).expect("queued vertices have labels");
            if label.settled || cost != label.cost {
                continue;
            }
            labels.label[x.index()].settled = true;
            if x == to {
                return Some((labels.steps_to(to), cost));
            }
            let xt = self.graph.vertex_type(x);
            for (z, row) in self.graph.rows_at(x) {
                let b = self.beta.get(xt, z);
                if b == 0.0 {
                    continue;
                }
                for nb in row {
                    let n = nb.vertex;
                    if n == x || self.banned_vertices.contains(&n) || self.banned_edges.contains(&(x, z, n)) {
                        continue;
                    }
                    let next = cost + 1.0 / (b * nb.prob);
                    let fresh = Label {
                        cost: next,
                        pred: Some((x, z)),
                        settled: false,
                    };
                    match labels.get(n) {
                        Some(l) if l.settled => continue,
                        Some(l) if next > l.cost => continue,
                        Some(l) if next == l.cost => {
                            let current = labels.steps_to(n);
                            let mut proposed = labels.steps_to(x);
                            proposed.push((n, z));
                            if proposed >= current {
                                continue;
                            }
                            labels.set(n, fresh);
                        }
                        _ => {
                            labels.set(n, fresh);
                            heap.push(Entry { cost: next, vertex: n });
                        }
                    }
                }
            }
        }
        None
    }
}

/// Up to `k` cheapest loopless paths from `s` to `t`, cheapest first.
pub fn k_shortest_paths(
    graph: &HetGraph,
    beta: &Rtud,
    s: VertexId,
    t: VertexId,
    k: usize,
    opts: SearchOptions,
) -> Vec<Path> {
    if k == 0 || s == t || !graph.contains(s) || !graph.contains(t) {
        return Vec::new();
    }
    let mut base_bans: Vec<(VertexId, RelId, VertexId)> = Vec::new();
    if opts.exclude_direct_edge {
        for (z, row) in graph.rows_at(s) {
            if row.iter().any(|n| n.vertex == t) {
                base_bans.push((s, z, t));
                base_bans.push((t, z, s));
            }
        }
    }
    let first = Search {
        graph,
        beta,
        banned_vertices: &[],
        banned_edges: &base_bans,
    }
    .run(s, t, 0.0);
    let Some((steps, weight)) = first else {
        return Vec::new();
    };
    let mut accepted = vec![Path {
        source: s,
        steps,
        weight,
    }];
    let mut candidates: Vec<Path> = Vec::new();

    while accepted.len() < k {
        let prev = accepted.last().unwrap().clone();
        let nodes: Vec<VertexId> = prev.vertices().collect();
        let mut root_cost = 0.0;
        for i in 0..prev.steps.len() {
            let spur = nodes[i];
            let root = &prev.steps[..i];
            let mut bans = base_bans.clone();
            for p in &accepted {
                if p.steps.len() > i && p.steps[..i] == *root {
                    let (next, z) = p.steps[i];
                    bans.push((spur, z, next));
                }
            }
            let found = Search {
                graph,
                beta,
                banned_vertices: &nodes[..i],
                banned_edges: &bans,
            }
            .run(spur, t, root_cost);
            if let Some((spur_steps, total)) = found {
                let mut steps = root.to_vec();
                steps.extend(spur_steps);
                let path = Path {
                    source: s,
                    steps,
                    weight: total,
                };
                let known = accepted.iter().chain(&candidates).any(|p| p.same_route(&path));
                if !known {
                    candidates.push(path);
                }
            }
            let (v, z) = prev.steps[i];
            root_cost += 1.0 / (beta.get(graph.vertex_type(spur), z) * graph.transition_prob(spur, z, v));
        }
        let Some(best) = candidates
            .iter()
            .enumerate()
            .min_by(|a, b| a.1.rank_cmp(b.1))
            .map(|(i, _)| i)
        else {
            break;
        };
        accepted.push(candidates.swap_remove(best));
    }
    accepted
}
