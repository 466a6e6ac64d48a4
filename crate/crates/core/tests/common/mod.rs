//! Independent oracles and fixtures shared by the integration suites.
#![allow(dead_code)]

use std::collections::HashMap;

use hetrec::embed::{sgns_grad, sgns_loss, EmbeddingTable};
use hetrec::eval::{self, ApDenominator, Qrels};
use hetrec::hetgraph::{GraphBuilder, GraphSchema, HetGraph, RelId, VertexId};
use hetrec::recommend::RankedList;
use hetrec::rtud::{edge_weight, Path, Rtud};
use hetrec::seed;
use hetrec::walk::hierarchical_step;
use rand::Rng;

pub const TRIALS: usize = 100_000;

/// Two vertex types, three relation types (one within each type, one across).
pub fn small_schema() -> GraphSchema {
    GraphSchema::parse("V a\nV b\nR aa a a\nR ab a b\nR bb b b\nR ab2 a b\n", "fixture").unwrap()
}

/// Random graph with `n <= 8` vertices and `m <= 20` edges, random positive
/// weights (or all-ones when `unit` is set, which produces many ties).
pub fn random_graph<R: Rng>(rng: &mut R, unit: bool) -> HetGraph {
    let schema = small_schema();
    let n = rng.random_range(2..=8usize);
    let m = rng.random_range(1..=20usize);
    let mut b = GraphBuilder::new(schema.clone());
    let a_t = schema.vertex_type("a").unwrap();
    let b_t = schema.vertex_type("b").unwrap();
    let ids: Vec<VertexId> = (0..n)
        .map(|i| {
            let t = if i % 3 == 2 { b_t } else { a_t };
            b.add_vertex(&format!("v{i}"), t).unwrap()
        })
        .collect();
    let types: Vec<_> = (0..n).map(|i| if i % 3 == 2 { b_t } else { a_t }).collect();
    let mut added = 0;
    let mut tries = 0;
    while added < m && tries < 200 {
        tries += 1;
        let u = rng.random_range(0..n);
        let v = rng.random_range(0..n);
        if u == v {
            continue;
        }
        let rels: Vec<RelId> = schema
            .relations()
            .filter(|(_, r)| r.src == types[u] && r.dst == types[v])
            .map(|(id, _)| id)
            .collect();
        if rels.is_empty() {
            continue;
        }
        let z = rels[rng.random_range(0..rels.len())];
        let w = if unit { 1.0 } else { rng.random_range(0.05..5.0) };
        b.add_edge(ids[u], z, ids[v], w).unwrap();
        added += 1;
    }
    b.build()
}

/// Random usefulness matrix respecting the schema mask; with `zeros` some
/// permitted entries are zeroed out (rows keep at least one positive entry).
pub fn random_rtud<R: Rng>(rng: &mut R, schema: &GraphSchema, zeros: bool) -> Rtud {
    let uniform = Rtud::uniform(schema);
    let rows: Vec<Vec<f64>> = schema
        .vertex_types()
        .map(|(t, _)| {
            let mut row: Vec<f64> = (0..schema.relation_count())
                .map(|j| {
                    if !uniform.is_permitted(t, RelId(j as u32)) || (zeros && rng.random_bool(0.2)) {
                        0.0
                    } else {
                        rng.random_range(0.05..1.0)
                    }
                })
                .collect();
            let s: f64 = row.iter().sum();
            if s == 0.0 {
                let first = (0..row.len()).find(|&j| uniform.is_permitted(t, RelId(j as u32)));
                if let Some(j) = first {
                    row[j] = 1.0;
                }
            } else {
                row.iter_mut().for_each(|x| *x /= s);
            }
            row
        })
        .collect();
    Rtud::from_rows(schema, &rows).unwrap()
}

/// Every simple path from `s` to `t` by exhaustive DFS, weights summed left
/// to right, sorted by (weight, step sequence).
pub fn brute_force_paths(g: &HetGraph, beta: &Rtud, s: VertexId, t: VertexId) -> Vec<Path> {
    #[allow(clippy::too_many_arguments)]
    fn dfs(
        g: &HetGraph,
        beta: &Rtud,
        at: VertexId,
        t: VertexId,
        cost: f64,
        visited: &mut Vec<VertexId>,
        steps: &mut Vec<(VertexId, RelId)>,
        out: &mut Vec<Path>,
    ) {
        if at == t {
            out.push(Path {
                source: visited[0],
                steps: steps.clone(),
                weight: cost,
            });
            return;
        }
        for (z, row) in g.rows_at(at) {
            for nb in row {
                let n = nb.vertex;
                if visited.contains(&n) {
                    continue;
                }
                let w = edge_weight(beta, g, at, z, n);
                if w.is_infinite() {
                    continue;
                }
                visited.push(n);
                steps.push((n, z));
                dfs(g, beta, n, t, cost + w, visited, steps, out);
                steps.pop();
                visited.pop();
            }
        }
    }
    let mut out = Vec::new();
    dfs(g, beta, s, t, 0.0, &mut vec![s], &mut Vec::new(), &mut out);
    out.sort_by(|a, b| a.weight.total_cmp(&b.weight).then_with(|| a.steps.cmp(&b.steps)));
    out
}

/// Binary-relevance reference scorer written straight from the textbook
/// definitions, one query at a time.
#[allow(clippy::needless_range_loop)]
pub mod reference_metrics {
    pub fn precision_at(ranked: &[bool], k: usize) -> f64 {
        let mut hits = 0usize;
        for i in 0..k {
            if i < ranked.len() && ranked[i] {
                hits += 1;
            }
        }
        hits as f64 / k as f64
    }

    pub fn average_precision_at(ranked: &[bool], n_relevant: usize, k: usize) -> f64 {
        if n_relevant == 0 {
            return 0.0;
        }
        let mut sum = 0.0;
        for i in 0..k.min(ranked.len()) {
            if ranked[i] {
                sum += precision_at(ranked, i + 1);
            }
        }
        sum / n_relevant.min(k) as f64
    }

    pub fn ndcg_at(ranked: &[bool], n_relevant: usize, k: usize) -> f64 {
        let mut dcg = 0.0;
        for i in 0..k.min(ranked.len()) {
            if ranked[i] {
                dcg += 1.0 / ((i + 2) as f64).log2();
            }
        }
        let mut idcg = 0.0;
        for i in 0..k.min(n_relevant) {
            idcg += 1.0 / ((i + 2) as f64).log2();
        }
        if idcg == 0.0 {
            0.0
        } else {
            dcg / idcg
        }
    }

    pub fn reciprocal_rank(ranked: &[bool]) -> f64 {
        for (i, &r) in ranked.iter().enumerate() {
            if r {
                return 1.0 / (i + 1) as f64;
            }
        }
        0.0
    }
}

pub fn star() -> (HetGraph, Rtud) {
    let s = GraphSchema::parse("V a\nV b\nR x a b\nR y a b\n", "star").unwrap();
    let g = HetGraph::parse_edges(s.clone(), "c\tx\tl1\nc\tx\tl2\nc\ty\tl3\nc\ty\tl4\t3\n").unwrap();
    let beta = Rtud::from_rows(&s, &[vec![0.9, 0.1], vec![0.5, 0.5]]).unwrap();
    (g, beta)
}

pub fn relation_freq(g: &HetGraph, draws: impl Iterator<Item = Option<(RelId, VertexId)>>) -> Vec<f64> {
    let mut counts = vec![0usize; g.schema().relation_count()];
    let mut n = 0;
    for (z, _) in draws.flatten() {
        counts[z.index()] += 1;
        n += 1;
    }
    counts.iter().map(|&c| c as f64 / n as f64).collect()
}

/// Exact first-step law: beta restricted to the local menu, times RTD.
pub fn exact_joint(g: &HetGraph, beta: &Rtud, v: VertexId) -> HashMap<(RelId, VertexId), f64> {
    let vt = g.vertex_type(v);
    let menu = g.relation_menu(v).unwrap();
    let mass: f64 = menu.iter().map(|&z| beta.get(vt, z)).sum();
    let mut out = HashMap::new();
    for &z in &menu {
        for nb in g.neighbors(v, z) {
            *out.entry((z, nb.vertex)).or_insert(0.0) += beta.get(vt, z) / mass * nb.prob;
        }
    }
    out
}

pub fn joint_l1(g: &HetGraph, beta: &Rtud, v: VertexId, seed_value: u64) -> f64 {
    let exact = exact_joint(g, beta, v);
    let mut counts: HashMap<(RelId, VertexId), usize> = HashMap::new();
    let mut rng = seed::stream(seed_value);
    for _ in 0..TRIALS {
        let step = hierarchical_step(g, beta, v, &mut rng).expect("vertex has mass");
        *counts.entry(step).or_insert(0) += 1;
    }
    let mut keys: Vec<_> = exact.keys().chain(counts.keys()).copied().collect();
    keys.sort();
    keys.dedup();
    keys.iter()
        .map(|k| {
            let emp = counts.get(k).copied().unwrap_or(0) as f64 / TRIALS as f64;
            (emp - exact.get(k).copied().unwrap_or(0.0)).abs()
        })
        .sum()
}

pub fn fixtures() -> Vec<(HetGraph, Rtud, &'static str)> {
    let mut out = Vec::new();
    let (g, beta) = star();
    out.push((g, beta, "c"));

    // beta mass on a relation absent at the vertex: renormalized away
    let s = GraphSchema::parse("V p\nV k\nR cite p p\nR has p k\nR rel k k\n", "f2").unwrap();
    let g = HetGraph::parse_edges(
        s.clone(),
        "p1\tcite\tp2\t2\np1\tcite\tp3\t1\np3\tcite\tp1\t4\np1\thas\tk1\np1\thas\tk2\t0.5\nk1\trel\tk2\n",
    )
    .unwrap();
    let beta = Rtud::from_rows(&s, &[vec![0.3, 0.7, 0.0], vec![0.0, 0.6, 0.4]]).unwrap();
    out.push((g, beta, "p1"));

    // same relation reaching one neighbor in both directions, three relations
    let s = GraphSchema::parse("V u\nV w\nR a u u\nR b u w\nR c u w\n", "f3").unwrap();
    let g = HetGraph::parse_edges(
        s.clone(),
        "h\ta\tq\nq\ta\th\t2\nh\ta\tr\t5\nh\tb\tw1\nh\tb\tw2\t7\nh\tc\tw1\t3\nh\tc\tw3\n",
    )
    .unwrap();
    let beta = Rtud::from_rows(&s, &[vec![0.2, 0.5, 0.3], vec![0.0, 0.5, 0.5]]).unwrap();
    out.push((g, beta, "h"));
    out
}

pub fn fixture(n_per_type: usize) -> HetGraph {
    let s = GraphSchema::parse("V p\nV k\nV q\nR pk p k\nR pq p q\nR kk k k\n", "f").unwrap();
    let mut text = String::new();
    for i in 0..n_per_type {
        text += &format!("p{i}\tpk\tk{i}\n");
        text += &format!("p{i}\tpq\tq{}\n", (i * 7) % n_per_type);
        text += &format!("k{i}\tkk\tk{}\n", (i + 1) % n_per_type);
    }
    HetGraph::parse_edges(s, &text).unwrap()
}

pub fn random_table<R: Rng>(rng: &mut R, n: usize, d: usize) -> EmbeddingTable {
    let input = (0..n * d).map(|_| rng.random_range(-1.0..1.0)).collect();
    let context = (0..n * d).map(|_| rng.random_range(-1.0..1.0)).collect();
    EmbeddingTable::from_parts(d, input, context).unwrap()
}

const H: f64 = 1e-5;

fn rel_err(a: f64, b: f64) -> f64 {
    (a - b).abs() / a.abs().max(b.abs()).max(1e-6)
}

fn random_vec<R: Rng>(rng: &mut R, d: usize) -> Vec<f64> {
    (0..d).map(|_| rng.random_range(-1.0..1.0)).collect()
}

/// Central difference of `f` along coordinate `k` of `x`.
fn central(x: &[f64], k: usize, f: impl Fn(&[f64]) -> f64) -> f64 {
    let mut up = x.to_vec();
    let mut down = x.to_vec();
    up[k] += H;
    down[k] -= H;
    (f(&up) - f(&down)) / (2.0 * H)
}

/// Worst relative error between the analytic negative-sampling gradient and
/// central differences over `instances` random small problems.
pub fn sgns_fd_worst(seed_value: u64, instances: usize) -> f64 {
    let mut rng = seed::stream(seed_value);
    let mut worst: f64 = 0.0;
    let loss_with = |c: &[f64], p: &[f64], ns: &[Vec<f64>]| {
        let refs: Vec<&[f64]> = ns.iter().map(Vec::as_slice).collect();
        sgns_loss(c, p, &refs)
    };
    for _ in 0..instances {
        let d = rng.random_range(1..=8);
        let m = rng.random_range(1..=5);
        let c = random_vec(&mut rng, d);
        let p = random_vec(&mut rng, d);
        let negs: Vec<Vec<f64>> = (0..m).map(|_| random_vec(&mut rng, d)).collect();
        let grad = {
            let refs: Vec<&[f64]> = negs.iter().map(Vec::as_slice).collect();
            sgns_grad(&c, &p, &refs)
        };
        for k in 0..d {
            let fd = central(&c, k, |x| loss_with(x, &p, &negs));
            worst = worst.max(rel_err(fd, grad.center[k]));
            let fd = central(&p, k, |x| loss_with(&c, x, &negs));
            worst = worst.max(rel_err(fd, grad.pos[k]));
            for j in 0..m {
                let fd = central(&negs[j], k, |x| {
                    let mut ns = negs.clone();
                    ns[j] = x.to_vec();
                    loss_with(&c, &p, &ns)
                });
                worst = worst.max(rel_err(fd, grad.negs[j][k]));
            }
        }
    }
    worst
}

/// Worst absolute deviation between the library scorer and
/// [`reference_metrics`] over random rankings, per query and macro-averaged.
pub fn metric_oracle_worst(seed_value: u64, instances: usize) -> f64 {
    use reference_metrics as r;
    let mut rng = seed::stream(seed_value);
    let mut worst: f64 = 0.0;
    let mut dev = |a: f64, b: f64| worst = worst.max((a - b).abs());
    for inst in 0..instances {
        let queries = rng.random_range(1..=6);
        let ks = [1, 3, 5, 10, rng.random_range(1..=40)];
        let mut qrels = Qrels::new();
        let mut runs = Vec::new();
        let mut want = vec![[0.0; 3]; ks.len()];
        let mut want_mrr = 0.0;
        for q in 0..queries {
            let query = format!("q{inst}_{q}");
            let len = rng.random_range(0..30);
            let p = rng.random_range(0.0..0.6);
            let ranked: Vec<bool> = (0..len).map(|_| rng.random_bool(p)).collect();
            let unretrieved = rng.random_range(0..4);
            let n_rel = ranked.iter().filter(|&&x| x).count() + unretrieved;
            let n_rel = n_rel.max(1);
            let mut entries = Vec::new();
            let mut rel_id = 0;
            for (i, &hit) in ranked.iter().enumerate() {
                if hit {
                    qrels.insert(query.clone(), format!("r{rel_id}"));
                    entries.push((format!("r{rel_id}"), (len - i) as f64));
                    rel_id += 1;
                } else {
                    entries.push((format!("n{i}"), (len - i) as f64));
                }
            }
            while rel_id < n_rel {
                qrels.insert(query.clone(), format!("r{rel_id}"));
                rel_id += 1;
            }
            for (j, &k) in ks.iter().enumerate() {
                let (pk, ap, nd) = (
                    r::precision_at(&ranked, k),
                    r::average_precision_at(&ranked, n_rel, k),
                    r::ndcg_at(&ranked, n_rel, k),
                );
                dev(eval::precision_at(&ranked, k), pk);
                dev(eval::average_precision_at(&ranked, n_rel, k, ApDenominator::MinRelevantK), ap);
                dev(eval::ndcg_at(&ranked, n_rel, k), nd);
                want[j][0] += pk / queries as f64;
                want[j][1] += ap / queries as f64;
                want[j][2] += nd / queries as f64;
            }
            let rr = r::reciprocal_rank(&ranked);
            dev(eval::reciprocal_rank(&ranked), rr);
            want_mrr += rr / queries as f64;
            runs.push(RankedList { query, entries });
        }
        let mut sorted_ks = ks.to_vec();
        sorted_ks.sort_unstable();
        sorted_ks.dedup();
        let report = eval::evaluate(&runs, &qrels, &sorted_ks, ApDenominator::MinRelevantK).unwrap();
        for (j, k) in ks.iter().enumerate() {
            dev(report.p_at[k], want[j][0]);
            dev(report.map_at[k], want[j][1]);
            dev(report.ndcg_at[k], want[j][2]);
        }
        dev(report.mrr, want_mrr);
    }
    worst
}

/// P@3, AP@3 and NDCG@3 of the ranking (hit, miss, hit) with two relevant
/// items, scored by the library.
pub fn hand_fixture_metrics() -> (f64, f64, f64) {
    let ranked = [true, false, true];
    (
        eval::precision_at(&ranked, 3),
        eval::average_precision_at(&ranked, 2, 3, ApDenominator::MinRelevantK),
        eval::ndcg_at(&ranked, 2, 3),
    )
}
