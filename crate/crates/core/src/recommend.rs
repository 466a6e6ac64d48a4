//! Candidate ranking by clamped cosine similarity between embeddings.

use std::cmp::Ordering;
use std::fs;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use rayon::prelude::*;

use crate::embed::EmbeddingTable;
use crate::error::{Error, Result};
use crate::hetgraph::{HetGraph, VertexId, VertexTypeId};

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Squared norm; the cosine divides by `sqrt(|q|² |c|²)`, which is exact
/// for identical vectors.
fn sq_norm(a: &[f64]) -> f64 {
    dot(a, a)
}

fn clamped_cosine(d: f64, nq: f64, nc: f64) -> f64 {
    if nq == 0.0 || nc == 0.0 {
        return 0.0;
    }
    (d / (nq * nc).sqrt()).clamp(0.0, 1.0)
}

/// `max(0, cos(q, c))`; 0 when either vector is zero.
pub fn score(q: &[f64], c: &[f64]) -> f64 {
    let (nq, nc) = (sq_norm(q), sq_norm(c));
    if nq == 0.0 || nc == 0.0 {
        log::warn!("cosine undefined for a zero vector; scoring 0");
    }
    clamped_cosine(dot(q, c), nq, nc)
}

#[derive(Debug, Clone, PartialEq)]
pub struct RankedList {
    pub query: String,
    /// `(candidate key, score)`, best first.
    pub entries: Vec<(String, f64)>,
}

/// Every vertex of type `t`, erroring when there are none.
pub fn candidates_of_type(g: &HetGraph, t: VertexTypeId) -> Result<Vec<VertexId>> {
    let c = g.vertices_of_type(t);
    if c.is_empty() {
        return Err(Error::Invalid(format!(
            "candidate type `{}` has no vertices",
            g.schema().vertex_type_name(t)
        )));
    }
    Ok(c.to_vec())
}

/// Brute-force ranker over a fixed candidate pool.
pub struct Ranker<'a> {
    table: &'a EmbeddingTable,
    g: &'a HetGraph,
    pool: Vec<VertexId>,
    sq_norms: Vec<f64>,
}

impl<'a> Ranker<'a> {
    pub fn new(table: &'a EmbeddingTable, g: &'a HetGraph, pool: Vec<VertexId>) -> Result<Ranker<'a>> {
        if pool.is_empty() {
            return Err(Error::Invalid("candidate pool is empty".into()));
        }
        if table.len() != g.vertex_count() {
            return Err(Error::Invalid(format!(
                "embedding table has {} rows, graph has {} vertices",
                table.len(),
                g.vertex_count()
            )));
        }
        let mut pool = pool;
        pool.sort_by(|a, b| g.vertex_key(*a).cmp(g.vertex_key(*b)));
        pool.dedup();
        let sq_norms: Vec<f64> = pool.iter().map(|&c| sq_norm(table.input(c))).collect();
        let zero = sq_norms.iter().filter(|&&n| n == 0.0).count();
        if zero > 0 {
            log::warn!("{zero} candidates have zero embeddings and score 0");
        }
        Ok(Ranker { table, g, pool, sq_norms })
    }

    pub fn pool(&self) -> &[VertexId] {
        &self.pool
    }

    /// Top `top_k` candidates for `query`; ties broken by key ascending.
    pub fn rank(&self, query: &str, top_k: usize) -> Result<RankedList> {
        let q = self.g.vertex(query).ok_or_else(|| Error::UnknownVertex(query.to_owned()))?;
        let qv = self.table.input(q);
        let nq = sq_norm(qv);
        if nq == 0.0 {
            log::warn!("query `{query}` has a zero embedding; all scores are 0");
        }
        // pool is key-sorted, so a stable sort by score keeps keys ascending
        let mut scored: Vec<(usize, f64)> = self
            .pool
            .iter()
            .zip(&self.sq_norms)
            .enumerate()
            .map(|(i, (&c, &nc))| (i, clamped_cosine(dot(qv, self.table.input(c)), nq, nc)))
            .collect();
        scored.sort_by(|a, b| b.1.partial_cmp(&a.1).unwrap_or(Ordering::Equal));
        scored.truncate(top_k);
        Ok(RankedList {
            query: query.to_owned(),
            entries: scored
                .into_iter()
                .map(|(i, s)| (self.g.vertex_key(self.pool[i]).to_owned(), s))
                .collect(),
        })
    }

    /// Ranks each query independently, preserving query order.
    pub fn rank_all(&self, queries: &[String], top_k: usize) -> Result<Vec<RankedList>> {
        queries.par_iter().map(|q| self.rank(q, top_k)).collect()
    }
}

/// Ranks all vertices of `candidate_type` for `query`.
pub fn recommend(
    table: &EmbeddingTable,
    g: &HetGraph,
    query: &str,
    candidate_type: VertexTypeId,
    top_k: usize,
) -> Result<RankedList> {
    Ranker::new(table, g, candidates_of_type(g, candidate_type)?)?.rank(query, top_k)
}

/// Run file rows: `query <TAB> candidate <TAB> rank <TAB> score <TAB> tag`.
pub fn write_run<W: Write>(lists: &[RankedList], tag: &str, mut out: W) -> std::io::Result<()> {
    for list in lists {
        for (rank, (cand, s)) in list.entries.iter().enumerate() {
            writeln!(out, "{}\t{}\t{}\t{}\t{}", list.query, cand, rank + 1, s, tag)?;
        }
    }
    out.flush()
}

pub fn save_run(lists: &[RankedList], tag: &str, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let file = fs::File::create(path).map_err(|e| Error::io(path, e))?;
    write_run(lists, tag, BufWriter::new(file)).map_err(|e| Error::io(path, e))
}

/// Parses a run file; lists keep first-appearance query order and are sorted
/// by the rank column.
pub fn read_run<R: BufRead>(input: R, origin: &str) -> Result<Vec<RankedList>> {
    let mut lists: Vec<(RankedList, Vec<usize>)> = Vec::new();
    let mut index = std::collections::HashMap::new();
    for (idx, line) in input.lines().enumerate() {
        let line = line.map_err(|e| Error::io(origin, e))?;
        if line.trim().is_empty() || line.starts_with('#') {
            continue;
        }
        let cols: Vec<&str> = line.split('\t').collect();
        let [q, c, rank, s, ..] = cols.as_slice() else {
            return Err(Error::parse(origin, idx + 1, "expected query, candidate, rank, score, tag"));
        };
        let rank: usize = rank
            .parse()
            .map_err(|_| Error::parse(origin, idx + 1, format!("bad rank `{rank}`")))?;
        let s: f64 = s
            .parse()
            .map_err(|_| Error::parse(origin, idx + 1, format!("bad score `{s}`")))?;
        let slot = *index.entry(q.to_string()).or_insert_with(|| {
            lists.push((
                RankedList {
                    query: q.to_string(),
                    entries: Vec::new(),
                },
                Vec::new(),
            ));
            lists.len() - 1
        });
        lists[slot].0.entries.push((c.to_string(), s));
        lists[slot].1.push(rank);
    }
    Ok(lists
        .into_iter()
        .map(|(mut list, ranks)| {
            let mut order: Vec<usize> = (0..ranks.len()).collect();
            order.sort_by_key(|&i| ranks[i]);
            list.entries = order.iter().map(|&i| list.entries[i].clone()).collect();
            list
        })
        .collect())
}

pub fn load_run(path: impl AsRef<Path>) -> Result<Vec<RankedList>> {
    let path = path.as_ref();
    let file = fs::File::open(path).map_err(|e| Error::io(path, e))?;
    read_run(BufReader::new(file), &path.display().to_string())
}

/// Candidate-pool file: one vertex key per line.
pub fn read_pool(g: &HetGraph, text: &str, origin: &str) -> Result<Vec<VertexId>> {
    text.lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty())
        .map(|(i, l)| {
            g.vertex(l.trim())
                .ok_or_else(|| Error::parse(origin, i + 1, format!("unknown vertex `{}`", l.trim())))
        })
        .collect()
}

pub fn load_pool(g: &HetGraph, path: impl AsRef<Path>) -> Result<Vec<VertexId>> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    read_pool(g, &text, &path.display().to_string())
}

pub fn write_pool<W: Write>(g: &HetGraph, pool: &[VertexId], mut out: W) -> std::io::Result<()> {
    for &v in pool {
        writeln!(out, "{}", g.vertex_key(v))?;
    }
    out.flush()
}
