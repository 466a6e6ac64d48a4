//! Held-out split: pick query vertices, remove their edges of one relation,
//! and record the removed targets as ground truth.

use std::collections::BTreeSet;

use rand::seq::index;

use crate::error::{Error, Result};
use crate::hetgraph::{HetGraph, RelId, StoredEdge, VertexId, VertexTypeId};
use crate::seed;

use super::Qrels;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SplitSpec {
    /// Share of eligible queries held out, in (0, 1).
    pub fraction: f64,
    pub seed: u64,
    pub query_type: VertexTypeId,
    pub target_type: VertexTypeId,
    pub held_out: RelId,
}

#[derive(Debug, Clone)]
pub struct Split {
    pub train: HetGraph,
    pub qrels: Qrels,
    /// Union of removed targets, sorted by key.
    pub pool: Vec<VertexId>,
    /// Test queries, sorted by key.
    pub queries: Vec<VertexId>,
}

/// The `(query, target)` endpoints of `e` if it is a held-out edge.
fn held_out_ends(g: &HetGraph, spec: &SplitSpec, e: &StoredEdge) -> Option<(VertexId, VertexId)> {
    if e.rel != spec.held_out {
        return None;
    }
    let (ts, td) = (g.vertex_type(e.src), g.vertex_type(e.dst));
    if ts == spec.query_type && td == spec.target_type {
        Some((e.src, e.dst))
    } else if td == spec.query_type && ts == spec.target_type {
        Some((e.dst, e.src))
    } else {
        None
    }
}

pub fn make_split(g: &HetGraph, spec: &SplitSpec) -> Result<Split> {
    if !(spec.fraction > 0.0 && spec.fraction < 1.0) {
        return Err(Error::Invalid(format!("split fraction {} outside (0, 1)", spec.fraction)));
    }
    let schema = g.schema();
    if !schema.permits(spec.query_type, spec.held_out, spec.target_type)
        && !schema.permits(spec.target_type, spec.held_out, spec.query_type)
    {
        return Err(Error::Invalid(format!(
            "relation `{}` does not join `{}` and `{}`",
            schema.relation_name(spec.held_out),
            schema.vertex_type_name(spec.query_type),
            schema.vertex_type_name(spec.target_type)
        )));
    }
    let eligible: Vec<VertexId> = g
        .edges()
        .iter()
        .filter_map(|e| held_out_ends(g, spec, e).map(|(q, _)| q))
        .collect::<BTreeSet<_>>()
        .into_iter()
        .collect();
    if eligible.is_empty() {
        return Err(Error::Invalid("no query vertex has a held-out edge".into()));
    }
    let count = (spec.fraction * eligible.len() as f64).round() as usize;
    if count == 0 {
        return Err(Error::Invalid(format!(
            "fraction {} of {} eligible queries selects none",
            spec.fraction,
            eligible.len()
        )));
    }
    let mut rng = seed::stream_for(spec.seed, &[1]);
    let chosen: BTreeSet<VertexId> = index::sample(&mut rng, eligible.len(), count)
        .into_iter()
        .map(|i| eligible[i])
        .collect();

    let mut qrels = Qrels::new();
    let mut pool = BTreeSet::new();
    for e in g.edges() {
        if let Some((q, t)) = held_out_ends(g, spec, e) {
            if chosen.contains(&q) {
                qrels.insert(g.vertex_key(q), g.vertex_key(t));
                pool.insert(t);
            }
        }
    }
    let train = g.retain_edges(|e| !held_out_ends(g, spec, e).is_some_and(|(q, _)| chosen.contains(&q)));
    let by_key = |v: &VertexId| g.vertex_key(*v).to_owned();
    let mut pool: Vec<VertexId> = pool.into_iter().collect();
    pool.sort_by_key(by_key);
    let mut queries: Vec<VertexId> = chosen.into_iter().collect();
    queries.sort_by_key(by_key);
    Ok(Split {
        train,
        qrels,
        pool,
        queries,
    })
}
