use std::collections::HashMap;

use rand::Rng;

use crate::error::{Error, Result};

use super::alias::AliasTables;
use super::{GraphSchema, RelId, VertexId, VertexTypeId};

/// One ingestion row: `src_key rel_name dst_key weight`.
#[derive(Debug, Clone, PartialEq)]
pub struct EdgeRecord {
    pub src_key: String,
    pub rel_name: String,
    pub dst_key: String,
    pub weight: f64,
}

/// A directed input edge after duplicate rows were merged.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StoredEdge {
    pub src: VertexId,
    pub rel: RelId,
    pub dst: VertexId,
    pub weight: f64,
}

/// Which input direction(s) a traversal entry came from.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Direction {
    Forward,
    Reverse,
    Both,
}

impl Direction {
    fn bits(self) -> u8 {
        match self {
            Direction::Forward => 1,
            Direction::Reverse => 2,
            Direction::Both => 3,
        }
    }

    fn from_bits(bits: u8) -> Self {
        match bits {
            1 => Direction::Forward,
            2 => Direction::Reverse,
            _ => Direction::Both,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Neighbor {
    pub vertex: VertexId,
    /// Transition probability within the (vertex, relation) row.
    pub prob: f64,
    pub direction: Direction,
}

#[derive(Debug, Clone, Copy)]
struct Row {
    rel: RelId,
    start: u32,
    len: u32,
}

#[derive(Debug, Clone)]
struct Vertex {
    key: String,
    vtype: VertexTypeId,
}

/// Immutable typed graph with undirected traversal rows.
///
/// Every input edge `(u, z, v)` yields a traversal entry in row `(u, z)` and
/// one in row `(v, z)`. Each row holds raw weights normalized to sum to one,
/// plus an alias table for O(1) draws.
#[derive(Debug, Clone)]
pub struct HetGraph {
    schema: GraphSchema,
    vertices: Vec<Vertex>,
    key_index: HashMap<String, VertexId>,
    by_type: Vec<Vec<VertexId>>,
    row_offsets: Vec<u32>,
    rows: Vec<Row>,
    neighbors: Vec<Neighbor>,
    alias: AliasTables,
    edges: Vec<StoredEdge>,
}

/// Accumulates vertices and edges, validating each against the schema.
#[derive(Debug, Clone)]
pub struct GraphBuilder {
    schema: GraphSchema,
    vertices: Vec<Vertex>,
    key_index: HashMap<String, VertexId>,
    edges: Vec<StoredEdge>,
}

impl GraphBuilder {
    pub fn new(schema: GraphSchema) -> Self {
        GraphBuilder {
            schema,
            vertices: Vec::new(),
            key_index: HashMap::new(),
            edges: Vec::new(),
        }
    }

    pub fn schema(&self) -> &GraphSchema {
        &self.schema
    }

    /// Interns `key` with type `vtype`; re-adding a key with the same type
    /// returns the existing id.
    pub fn add_vertex(&mut self, key: &str, vtype: VertexTypeId) -> Result<VertexId> {
        if vtype.index() >= self.schema.vertex_type_count() {
            return Err(Error::Invalid(format!("unknown vertex type id {vtype}")));
        }
        if let Some(&id) = self.key_index.get(key) {
            let existing = self.vertices[id.index()].vtype;
            if existing != vtype {
                return Err(Error::Schema(format!(
                    "vertex `{key}` is a {} but is used as a {}",
                    self.schema.vertex_type_name(existing),
                    self.schema.vertex_type_name(vtype)
                )));
            }
            return Ok(id);
        }
        let id = VertexId(self.vertices.len() as u32);
        self.vertices.push(Vertex {
            key: key.to_owned(),
            vtype,
        });
        self.key_index.insert(key.to_owned(), id);
        Ok(id)
    }

    pub fn add_edge(&mut self, src: VertexId, rel: RelId, dst: VertexId, weight: f64) -> Result<()> {
        if !weight.is_finite() || weight < 0.0 {
            return Err(Error::Invalid(format!("weight {weight} is not a finite nonnegative number")));
        }
        let st = self.vertex_type(src)?;
        let dt = self.vertex_type(dst)?;
        if rel.index() >= self.schema.relation_count() {
            return Err(Error::Invalid(format!("unknown relation id {rel}")));
        }
        if !self.schema.permits(st, rel, dt) {
            return Err(Error::Schema(format!(
                "triple ({}, {}, {}) is not permitted",
                self.schema.vertex_type_name(st),
                self.schema.relation_name(rel),
                self.schema.vertex_type_name(dt)
            )));
        }
        self.edges.push(StoredEdge { src, rel, dst, weight });
        Ok(())
    }

    /// Adds one ingestion row, inferring endpoint types from the relation.
    pub fn add_record(&mut self, record: &EdgeRecord) -> Result<()> {
        let rel = self
            .schema
            .relation(&record.rel_name)
            .ok_or_else(|| Error::Schema(format!("unknown relation `{}`", record.rel_name)))?;
        if !record.weight.is_finite() || record.weight < 0.0 {
            return Err(Error::Invalid(format!(
                "weight {} is not a finite nonnegative number",
                record.weight
            )));
        }
        let rt = self.schema.relation_type(rel).clone();
        let src = self.add_vertex(&record.src_key, rt.src)?;
        let dst = self.add_vertex(&record.dst_key, rt.dst)?;
        self.add_edge(src, rel, dst, record.weight)
    }

    fn vertex_type(&self, v: VertexId) -> Result<VertexTypeId> {
        self.vertices
            .get(v.index())
            .map(|x| x.vtype)
            .ok_or(Error::UnknownVertexId(v.0))
    }

    pub fn build(self) -> HetGraph {
        let GraphBuilder {
            schema,
            vertices,
            key_index,
            mut edges,
        } = self;

        edges.sort_by_key(|e| (e.src, e.rel, e.dst));
        let mut merged: Vec<StoredEdge> = Vec::with_capacity(edges.len());
        for e in edges {
            match merged.last_mut() {
                Some(last) if (last.src, last.rel, last.dst) == (e.src, e.rel, e.dst) => {
                    last.weight += e.weight
                }
                _ => merged.push(e),
            }
        }
        merged.retain(|e| e.weight > 0.0);

        let mut entries: Vec<(u32, u32, u32, f64, u8)> = Vec::with_capacity(2 * merged.len());
        for e in &merged {
            entries.push((e.src.0, e.rel.0, e.dst.0, e.weight, Direction::Forward.bits()));
            entries.push((e.dst.0, e.rel.0, e.src.0, e.weight, Direction::Reverse.bits()));
        }
        entries.sort_by_key(|&(v, z, n, _, _)| (v, z, n));
        let mut combined: Vec<(u32, u32, u32, f64, u8)> = Vec::with_capacity(entries.len());
        for e in entries {
            match combined.last_mut() {
                Some(last) if (last.0, last.1, last.2) == (e.0, e.1, e.2) => {
                    last.3 += e.3;
                    last.4 |= e.4;
                }
                _ => combined.push(e),
            }
        }

        let n = vertices.len();
        let mut row_offsets = vec![0u32; n + 1];
        let mut rows: Vec<Row> = Vec::new();
        let mut neighbors: Vec<Neighbor> = Vec::with_capacity(combined.len());
        let mut alias = AliasTables::with_capacity(combined.len());
        let mut i = 0;
        let mut next_vertex = 0usize;
        while i < combined.len() {
            let (v, z) = (combined[i].0, combined[i].1);
            let mut j = i;
            while j < combined.len() && combined[j].0 == v && combined[j].1 == z {
                j += 1;
            }
            while next_vertex <= v as usize {
                row_offsets[next_vertex] = rows.len() as u32;
                next_vertex += 1;
            }
            let total: f64 = combined[i..j].iter().map(|e| e.3).sum();
            let probs: Vec<f64> = combined[i..j].iter().map(|e| e.3 / total).collect();
            let start = neighbors.len();
            let offset = alias.push(&probs);
            debug_assert_eq!(offset, start);
            for (e, &p) in combined[i..j].iter().zip(&probs) {
                neighbors.push(Neighbor {
                    vertex: VertexId(e.2),
                    prob: p,
                    direction: Direction::from_bits(e.4),
                });
            }
            rows.push(Row {
                rel: RelId(z),
                start: start as u32,
                len: (j - i) as u32,
            });
            i = j;
        }
        while next_vertex <= n {
            row_offsets[next_vertex] = rows.len() as u32;
            next_vertex += 1;
        }

        let mut by_type = vec![Vec::new(); schema.vertex_type_count()];
        for (i, v) in vertices.iter().enumerate() {
            by_type[v.vtype.index()].push(VertexId(i as u32));
        }

        HetGraph {
            schema,
            vertices,
            key_index,
            by_type,
            row_offsets,
            rows,
            neighbors,
            alias,
            edges: merged,
        }
    }
}

impl HetGraph {
    pub fn schema(&self) -> &GraphSchema {
        &self.schema
    }

    pub fn vertex_count(&self) -> usize {
        self.vertices.len()
    }

    /// Number of stored (directed, merged) input edges.
    pub fn edge_count(&self) -> usize {
        self.edges.len()
    }

    pub fn edges(&self) -> &[StoredEdge] {
        &self.edges
    }

    pub fn vertex(&self, key: &str) -> Option<VertexId> {
        self.key_index.get(key).copied()
    }

    pub fn vertex_key(&self, v: VertexId) -> &str {
        &self.vertices[v.index()].key
    }

    pub fn vertex_type(&self, v: VertexId) -> VertexTypeId {
        self.vertices[v.index()].vtype
    }

    pub fn vertex_ids(&self) -> impl Iterator<Item = VertexId> + '_ {
        (0..self.vertices.len() as u32).map(VertexId)
    }

    pub fn vertices_of_type(&self, t: VertexTypeId) -> &[VertexId] {
        self.by_type.get(t.index()).map(Vec::as_slice).unwrap_or(&[])
    }

    pub fn contains(&self, v: VertexId) -> bool {
        v.index() < self.vertices.len()
    }

    fn rows_of(&self, v: VertexId) -> &[Row] {
        let lo = self.row_offsets[v.index()] as usize;
        let hi = self.row_offsets[v.index() + 1] as usize;
        &self.rows[lo..hi]
    }

    fn row(&self, v: VertexId, z: RelId) -> Option<&Row> {
        let rows = self.rows_of(v);
        rows.binary_search_by_key(&z, |r| r.rel).ok().map(|i| &rows[i])
    }

    /// Relation types with at least one traversal entry at `v`, ascending.
    pub fn relation_menu(&self, v: VertexId) -> Result<Vec<RelId>> {
        if !self.contains(v) {
            return Err(Error::UnknownVertexId(v.0));
        }
        Ok(self.relations_at(v).collect())
    }

    /// Unchecked variant of [`relation_menu`](Self::relation_menu) for hot loops.
    pub fn relations_at(&self, v: VertexId) -> impl Iterator<Item = RelId> + '_ {
        self.rows_of(v).iter().map(|r| r.rel)
    }

    /// The transition row for `(v, z)`, sorted by neighbor id. Empty when `v`
    /// has no `z` relations.
    pub fn neighbors(&self, v: VertexId, z: RelId) -> &[Neighbor] {
        match self.row(v, z) {
            Some(r) => &self.neighbors[r.start as usize..(r.start + r.len) as usize],
            None => &[],
        }
    }

    /// All traversal rows at `v` as `(relation, row)` pairs.
    pub fn rows_at(&self, v: VertexId) -> impl Iterator<Item = (RelId, &[Neighbor])> + '_ {
        self.rows_of(v).iter().map(move |r| {
            (
                r.rel,
                &self.neighbors[r.start as usize..(r.start + r.len) as usize],
            )
        })
    }

    /// Transition probability of `v -z-> n`, or 0 when no such entry exists.
    pub fn transition_prob(&self, v: VertexId, z: RelId, n: VertexId) -> f64 {
        let row = self.neighbors(v, z);
        row.binary_search_by_key(&n, |x| x.vertex)
            .map(|i| row[i].prob)
            .unwrap_or(0.0)
    }

    pub fn sample_neighbor<R: Rng + ?Sized>(
        &self,
        v: VertexId,
        z: RelId,
        rng: &mut R,
    ) -> Result<VertexId> {
        if !self.contains(v) {
            return Err(Error::UnknownVertexId(v.0));
        }
        let row = self.row(v, z).ok_or(Error::EmptyRelation { vertex: v, rel: z })?;
        let i = self.alias.sample(row.start as usize, row.len as usize, rng);
        Ok(self.neighbors[row.start as usize + i].vertex)
    }

    /// Input records reconstructed from the stored edges.
    pub fn edge_records(&self) -> impl Iterator<Item = EdgeRecord> + '_ {
        self.edges.iter().map(|e| EdgeRecord {
            src_key: self.vertex_key(e.src).to_owned(),
            rel_name: self.schema.relation_name(e.rel).to_owned(),
            dst_key: self.vertex_key(e.dst).to_owned(),
            weight: e.weight,
        })
    }

    /// A copy of this graph without the edges rejected by `keep`. All
    /// vertices are retained, including ones left isolated.
    pub fn retain_edges(&self, mut keep: impl FnMut(&StoredEdge) -> bool) -> HetGraph {
        let mut b = GraphBuilder {
            schema: self.schema.clone(),
            vertices: self.vertices.clone(),
            key_index: self.key_index.clone(),
            edges: Vec::with_capacity(self.edges.len()),
        };
        b.edges.extend(self.edges.iter().filter(|e| keep(e)).copied());
        b.build()
    }

    /// Total number of traversal entries (at most twice the edge count).
    pub fn traversal_entry_count(&self) -> usize {
        self.neighbors.len()
    }
}
