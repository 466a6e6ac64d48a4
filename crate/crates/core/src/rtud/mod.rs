//! Relation type usefulness distributions: one probability row over relation
//! types per vertex type, learned by ranking K-shortest paths between labeled
//! vertex pairs and shifting mass toward the relations those paths use.

mod em;
mod paths;

use std::fmt;
use std::fs;
use std::path::Path as FsPath;
use std::str::FromStr;

use log::warn;

use crate::error::{Error, Result};
use crate::hetgraph::{GraphSchema, HetGraph, RelId, VertexId, VertexTypeId};

pub use em::{
    stability_fraction, train_rtud, EmConfig, EmOutcome, EmTrainer, IterationRecord,
    LabeledPairs, StabilityMode,
};
pub use paths::{k_shortest_paths, Path, SearchOptions};

/// Row-stochastic |vertex types| x |relation types| matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct Rtud {
    types: usize,
    rels: usize,
    beta: Vec<f64>,
    permitted: Vec<bool>,
}

impl Rtud {
    /// Uniform over the relations each vertex type may use; every entry the
    /// schema rules out is zero.
    pub fn uniform(schema: &GraphSchema) -> Rtud {
        let types = schema.vertex_type_count();
        let rels = schema.relation_count();
        let mut permitted = vec![false; types * rels];
        for (t, _) in schema.vertex_types() {
            for z in schema.permitted_relations(t) {
                permitted[t.index() * rels + z.index()] = true;
            }
        }
        let mut beta = vec![0.0; types * rels];
        for i in 0..types {
            let row = &permitted[i * rels..(i + 1) * rels];
            let m = row.iter().filter(|&&p| p).count();
            for j in 0..rels {
                if row[j] {
                    beta[i * rels + j] = 1.0 / m as f64;
                }
            }
        }
        Rtud {
            types,
            rels,
            beta,
            permitted,
        }
    }

    /// Builds a matrix from explicit rows, checking the schema mask and row
    /// sums.
    pub fn from_rows(schema: &GraphSchema, rows: &[Vec<f64>]) -> Result<Rtud> {
        let mut out = Rtud::uniform(schema);
        if rows.len() != out.types {
            return Err(Error::Invalid(format!(
                "expected {} rows, got {}",
                out.types,
                rows.len()
            )));
        }
        for (i, row) in rows.iter().enumerate() {
            if row.len() != out.rels {
                return Err(Error::Invalid(format!(
                    "row {i}: expected {} columns, got {}",
                    out.rels,
                    row.len()
                )));
            }
            let mut sum = 0.0;
            for (j, &x) in row.iter().enumerate() {
                if !x.is_finite() || x < 0.0 {
                    return Err(Error::Invalid(format!("row {i}: entry {x} is not a probability")));
                }
                if x != 0.0 && !out.permitted[i * out.rels + j] {
                    return Err(Error::Invalid(format!(
                        "row {i}: relation {j} is not permitted for this vertex type"
                    )));
                }
                sum += x;
            }
            let any = out.permitted[i * out.rels..(i + 1) * out.rels].iter().any(|&p| p);
            if any && (sum - 1.0).abs() > 1e-6 {
                return Err(Error::Invalid(format!("row {i} sums to {sum}, not 1")));
            }
            out.beta[i * out.rels..(i + 1) * out.rels].copy_from_slice(row);
        }
        Ok(out)
    }

    pub fn vertex_type_count(&self) -> usize {
        self.types
    }

    pub fn relation_count(&self) -> usize {
        self.rels
    }

    #[inline]
    pub fn get(&self, t: VertexTypeId, z: RelId) -> f64 {
        self.beta[t.index() * self.rels + z.index()]
    }

    pub fn row(&self, t: VertexTypeId) -> &[f64] {
        &self.beta[t.index() * self.rels..(t.index() + 1) * self.rels]
    }

    pub fn is_permitted(&self, t: VertexTypeId, z: RelId) -> bool {
        self.permitted[t.index() * self.rels + z.index()]
    }

    /// Number of schema-permitted relation types for vertex type `t`.
    pub fn permitted_count(&self, t: VertexTypeId) -> usize {
        self.permitted[t.index() * self.rels..(t.index() + 1) * self.rels]
            .iter()
            .filter(|&&p| p)
            .count()
    }

    /// Applies one M-step with the pooled update vector. Rows with no mass on
    /// any permitted entry are left unchanged and reported.
    pub fn m_step(&self, theta: &Theta, update: BetaUpdate) -> (Rtud, Vec<VertexTypeId>) {
        assert_eq!(theta.0.len(), self.rels, "theta length must match relation count");
        let mut next = self.clone();
        let mut skipped = Vec::new();
        for i in 0..self.types {
            let lo = i * self.rels;
            let mask = &self.permitted[lo..lo + self.rels];
            let m = mask.iter().filter(|&&p| p).count();
            if m == 0 {
                continue;
            }
            let mass: Vec<f64> = (0..self.rels)
                .map(|j| if mask[j] { self.beta[lo + j] + theta.0[j] } else { 0.0 })
                .collect();
            let total: f64 = mass.iter().sum();
            if total.is_nan() || total <= 0.0 {
                warn!("vertex type {i}: no usefulness mass on permitted relations, row unchanged");
                skipped.push(VertexTypeId(i as u32));
                continue;
            }
            let inner: Vec<f64> = match update {
                BetaUpdate::DirectSum => mass,
                BetaUpdate::Damped { lambda } => (0..self.rels)
                    .map(|j| {
                        if mask[j] {
                            lambda * mass[j] / total + (1.0 - lambda) / m as f64
                        } else {
                            0.0
                        }
                    })
                    .collect(),
            };
            let eta: f64 = inner.iter().sum();
            for j in 0..self.rels {
                next.beta[lo + j] = if mask[j] { inner[j] / eta } else { 0.0 };
            }
        }
        (next, skipped)
    }

    pub fn to_tsv(&self, schema: &GraphSchema) -> String {
        let mut out = String::from("vertex_type");
        for (_, r) in schema.relations() {
            out.push('\t');
            out.push_str(&r.name);
        }
        out.push('\n');
        for (t, name) in schema.vertex_types() {
            out.push_str(name);
            for &x in self.row(t) {
                out.push('\t');
                out.push_str(&format_sig9(x));
            }
            out.push('\n');
        }
        out
    }

    pub fn parse_tsv(schema: &GraphSchema, text: &str, origin: &str) -> Result<Rtud> {
        let mut lines = text.lines().enumerate().filter(|(_, l)| !l.trim().is_empty());
        let (_, header) = lines
            .next()
            .ok_or_else(|| Error::parse(origin, 1, "empty usefulness file"))?;
        let cols: Vec<&str> = header.split('\t').skip(1).collect();
        let rel_order: Vec<RelId> = cols
            .iter()
            .map(|c| {
                schema
                    .relation(c.trim())
                    .ok_or_else(|| Error::parse(origin, 1, format!("unknown relation `{c}`")))
            })
            .collect::<Result<_>>()?;
        if rel_order.len() != schema.relation_count() {
            return Err(Error::parse(origin, 1, "header must list every relation type"));
        }
        let mut rows = vec![vec![0.0; schema.relation_count()]; schema.vertex_type_count()];
        let mut seen = vec![false; schema.vertex_type_count()];
        for (idx, line) in lines {
            let fields: Vec<&str> = line.split('\t').collect();
            let t = schema
                .vertex_type(fields[0].trim())
                .ok_or_else(|| Error::parse(origin, idx + 1, format!("unknown vertex type `{}`", fields[0])))?;
            if fields.len() != rel_order.len() + 1 {
                return Err(Error::parse(origin, idx + 1, "wrong number of columns"));
            }
            for (z, f) in rel_order.iter().zip(&fields[1..]) {
                rows[t.index()][z.index()] = f
                    .trim()
                    .parse()
                    .map_err(|_| Error::parse(origin, idx + 1, format!("`{f}` is not a number")))?;
            }
            seen[t.index()] = true;
        }
        if let Some(missing) = seen.iter().position(|s| !s) {
            return Err(Error::parse(
                origin,
                0,
                format!(
                    "missing row for vertex type `{}`",
                    schema.vertex_type_name(VertexTypeId(missing as u32))
                ),
            ));
        }
        Rtud::from_rows(schema, &rows).map_err(|e| Error::parse(origin, 0, e.to_string()))
    }

    pub fn load(schema: &GraphSchema, path: impl AsRef<FsPath>) -> Result<Rtud> {
        let path = path.as_ref();
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::parse_tsv(schema, &text, &path.display().to_string())
    }

    pub fn write(&self, schema: &GraphSchema, path: impl AsRef<FsPath>) -> Result<()> {
        let path = path.as_ref();
        fs::write(path, self.to_tsv(schema)).map_err(|e| Error::io(path, e))
    }
}

/// `%.9g`-style formatting: nine significant digits, trailing zeros trimmed.
pub fn format_sig9(x: f64) -> String {
    if x == 0.0 || !x.is_finite() {
        return format!("{x}");
    }
    let sci = format!("{x:.8e}");
    let exp: i32 = sci[sci.find('e').unwrap() + 1..].parse().unwrap();
    if (-5..9).contains(&exp) {
        let s = format!("{:.*}", (8 - exp) as usize, x);
        if s.contains('.') {
            s.trim_end_matches('0').trim_end_matches('.').to_owned()
        } else {
            s
        }
    } else {
        let (mant, e) = sci.split_at(sci.find('e').unwrap());
        let mant = if mant.contains('.') {
            mant.trim_end_matches('0').trim_end_matches('.')
        } else {
            mant
        };
        format!("{mant}{e}")
    }
}

/// Weight of traversing `v -z-> n`: `1 / (beta[type(v)][z] * p(n | v, z))`.
/// Infinite when either factor is zero.
pub fn edge_weight(beta: &Rtud, g: &HetGraph, v: VertexId, z: RelId, n: VertexId) -> f64 {
    let b = beta.get(g.vertex_type(v), z);
    let p = g.transition_prob(v, z, n);
    if b == 0.0 || p == 0.0 {
        f64::INFINITY
    } else {
        1.0 / (b * p)
    }
}

/// Per-relation update factors accumulated over one E-step.
#[derive(Debug, Clone, PartialEq)]
pub struct Theta(pub Vec<f64>);

impl Theta {
    pub fn zeros(rels: usize) -> Theta {
        Theta(vec![0.0; rels])
    }

    pub fn l1(&self) -> f64 {
        self.0.iter().map(|x| x.abs()).sum()
    }

    /// Adds the contribution of one ranked path list (rank 1 first).
    pub fn accumulate(&mut self, ranking: &[Path], update: ThetaUpdate) {
        for (k, path) in ranking.iter().enumerate() {
            let rank = k + 1;
            let len = path.len();
            if len == 0 {
                continue;
            }
            let inc = match update {
                ThetaUpdate::RawCount => 1.0,
                ThetaUpdate::LengthNormalized => 1.0 / len as f64,
                ThetaUpdate::LogDiscounted => 1.0 / ((rank + 1) as f64).log2(),
            };
            for &(_, z) in &path.steps {
                self.0[z.index()] += inc;
            }
        }
    }
}

/// How each relation occurrence on a ranked path feeds the update vector.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ThetaUpdate {
    /// +1 per occurrence.
    RawCount,
    /// +1/L for a path with L relations.
    LengthNormalized,
    /// +1/log2(k+1) for the rank-k path.
    LogDiscounted,
}

impl FromStr for ThetaUpdate {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_uppercase().as_str() {
            "RC" => Ok(ThetaUpdate::RawCount),
            "LNC" => Ok(ThetaUpdate::LengthNormalized),
            "LDC" => Ok(ThetaUpdate::LogDiscounted),
            _ => Err(Error::Invalid(format!("unknown theta update `{s}` (RC, LNC, LDC)"))),
        }
    }
}

impl fmt::Display for ThetaUpdate {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            ThetaUpdate::RawCount => "RC",
            ThetaUpdate::LengthNormalized => "LNC",
            ThetaUpdate::LogDiscounted => "LDC",
        })
    }
}

/// Row update rule for the M-step.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum BetaUpdate {
    /// `(beta + theta) / eta`.
    DirectSum,
    /// Convex mix of the direct sum with a uniform floor `(1 - lambda) / m`.
    Damped { lambda: f64 },
}

impl BetaUpdate {
    pub fn parse(name: &str, lambda: f64) -> Result<Self> {
        match name.to_ascii_uppercase().as_str() {
            "DS" => Ok(BetaUpdate::DirectSum),
            "SDF" => {
                if !(lambda > 0.0 && lambda <= 1.0) {
                    return Err(Error::Invalid(format!("lambda {lambda} must be in (0, 1]")));
                }
                Ok(BetaUpdate::Damped { lambda })
            }
            _ => Err(Error::Invalid(format!("unknown beta update `{name}` (DS, SDF)"))),
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            BetaUpdate::DirectSum => "DS",
            BetaUpdate::Damped { .. } => "SDF",
        }
    }
}
