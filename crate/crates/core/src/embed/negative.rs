//! Smoothed-unigram negative tables, one per vertex type plus a global one.

use rand::Rng;

use crate::hetgraph::{AliasTable, HetGraph, VertexId, VertexTypeId};

use super::EmbedMode;

/// Unigram exponent applied to corpus occurrence counts.
pub const SMOOTHING: f64 = 0.75;

/// Resampling budget when a draw hits the positive context.
const MAX_REDRAWS: usize = 64;

#[derive(Debug, Clone)]
struct Pool {
    table: AliasTable,
    members: Vec<VertexId>,
}

impl Pool {
    fn build(members: impl Iterator<Item = VertexId>, counts: &[u64]) -> Option<Pool> {
        let members: Vec<VertexId> = members.filter(|v| counts[v.index()] > 0).collect();
        if members.len() < 2 {
            return None;
        }
        let weights: Vec<f64> = members
            .iter()
            .map(|v| (counts[v.index()] as f64).powf(SMOOTHING))
            .collect();
        Some(Pool {
            table: AliasTable::from_weights(&weights),
            members,
        })
    }

    fn draw<R: Rng + ?Sized>(&self, positive: VertexId, rng: &mut R) -> Option<VertexId> {
        for _ in 0..MAX_REDRAWS {
            let v = self.members[self.table.sample(rng)];
            if v != positive {
                return Some(v);
            }
        }
        None
    }

    fn probability(&self, v: VertexId, counts: &[u64]) -> f64 {
        if !self.members.contains(&v) {
            return 0.0;
        }
        let total: f64 = self
            .members
            .iter()
            .map(|m| (counts[m.index()] as f64).powf(SMOOTHING))
            .sum();
        (counts[v.index()] as f64).powf(SMOOTHING) / total
    }
}

#[derive(Debug, Clone)]
pub struct NegativeSampler {
    mode: EmbedMode,
    types: Vec<VertexTypeId>,
    by_type: Vec<Option<Pool>>,
    global: Option<Pool>,
    counts: Vec<u64>,
    fallback_types: Vec<VertexTypeId>,
}

impl NegativeSampler {
    /// `counts[v]` is the number of corpus occurrences of vertex `v`.
    /// Types with fewer than two occurring vertices draw from the global pool.
    pub fn new(g: &HetGraph, counts: &[u64], mode: EmbedMode) -> NegativeSampler {
        assert_eq!(counts.len(), g.vertex_count(), "one count per vertex");
        let types: Vec<VertexTypeId> = g.vertex_ids().map(|v| g.vertex_type(v)).collect();
        let global = Pool::build(g.vertex_ids(), counts);
        let mut by_type = Vec::new();
        let mut fallback_types = Vec::new();
        if mode == EmbedMode::Heterogeneous {
            for (t, _) in g.schema().vertex_types() {
                let pool = Pool::build(g.vertices_of_type(t).iter().copied(), counts);
                if pool.is_none() && g.vertices_of_type(t).iter().any(|v| counts[v.index()] > 0) {
                    log::warn!(
                        "vertex type `{}` has fewer than two vertices in the corpus; its negatives come from the global pool",
                        g.schema().vertex_type_name(t)
                    );
                    fallback_types.push(t);
                }
                by_type.push(pool);
            }
        }
        NegativeSampler {
            mode,
            types,
            by_type,
            global,
            counts: counts.to_vec(),
            fallback_types,
        }
    }

    pub fn mode(&self) -> EmbedMode {
        self.mode
    }

    /// Types whose negatives fall back to the global pool.
    pub fn fallback_types(&self) -> &[VertexTypeId] {
        &self.fallback_types
    }

    fn pool_for(&self, positive: VertexId) -> Option<&Pool> {
        match self.mode {
            EmbedMode::Heterogeneous => self.by_type[self.types[positive.index()].index()]
                .as_ref()
                .or(self.global.as_ref()),
            EmbedMode::Ordinary => self.global.as_ref(),
        }
    }

    /// A negative for `positive`, never equal to it; `None` when no other
    /// vertex can be drawn.
    pub fn sample<R: Rng + ?Sized>(&self, positive: VertexId, rng: &mut R) -> Option<VertexId> {
        self.pool_for(positive)?.draw(positive, rng)
    }

    /// Smoothed probability of drawing `v` from the pool serving `positive`,
    /// before excluding the positive itself.
    pub fn pool_probability(&self, positive: VertexId, v: VertexId) -> f64 {
        self.pool_for(positive)
            .map_or(0.0, |p| p.probability(v, &self.counts))
    }
}
