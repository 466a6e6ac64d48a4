//! Two-level random walks: at each vertex draw a relation type from the
//! vertex type's usefulness row (restricted to the relations present there),
//! then draw a neighbor from that relation's transition row.

use std::fs;
use std::io::{BufRead, BufReader, BufWriter, Read, Write};
use std::path::Path;
use std::str::FromStr;

use byteorder::{LittleEndian, ReadBytesExt, WriteBytesExt};
use rand::Rng;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::hetgraph::{HetGraph, RelId, VertexId};
use crate::rtud::Rtud;
use crate::seed;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum WalkMode {
    /// Relation type drawn from the usefulness row.
    #[default]
    Hierarchical,
    /// Relation type drawn uniformly from the local menu (ablation).
    Uniform,
}

impl FromStr for WalkMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "hierarchical" => Ok(WalkMode::Hierarchical),
            "uniform" => Ok(WalkMode::Uniform),
            _ => Err(Error::Invalid(format!("unknown walk mode `{s}` (hierarchical, uniform)"))),
        }
    }
}

impl WalkMode {
    pub fn name(self) -> &'static str {
        match self {
            WalkMode::Hierarchical => "hierarchical",
            WalkMode::Uniform => "uniform",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct WalkConfig {
    pub walks_per_vertex: usize,
    /// Steps attempted per walk; a complete walk has `walk_length + 1`
    /// vertices.
    pub walk_length: usize,
    pub seed: u64,
    pub mode: WalkMode,
}

impl Default for WalkConfig {
    fn default() -> Self {
        WalkConfig {
            walks_per_vertex: 10,
            walk_length: 80,
            seed: 0,
            mode: WalkMode::Hierarchical,
        }
    }
}

impl WalkConfig {
    pub fn validate(&self) -> Result<()> {
        if self.walks_per_vertex == 0 {
            return Err(Error::Invalid("walks per vertex must be at least 1".into()));
        }
        if self.walk_length == 0 {
            return Err(Error::Invalid("walk length must be at least 1".into()));
        }
        Ok(())
    }
}

/// One step: the relation drawn and the vertex reached, or `None` when no
/// relation at `v` has usefulness mass.
pub fn hierarchical_step<R: Rng + ?Sized>(
    g: &HetGraph,
    beta: &Rtud,
    v: VertexId,
    rng: &mut R,
) -> Option<(RelId, VertexId)> {
    let vt = g.vertex_type(v);
    let total: f64 = g.relations_at(v).map(|z| beta.get(vt, z)).sum();
    if total.is_nan() || total <= 0.0 {
        return None;
    }
    let mut u = rng.random::<f64>() * total;
    let mut chosen = None;
    for z in g.relations_at(v) {
        let b = beta.get(vt, z);
        if b <= 0.0 {
            continue;
        }
        chosen = Some(z);
        if u < b {
            break;
        }
        u -= b;
    }
    let z = chosen?;
    let n = g.sample_neighbor(v, z, rng).ok()?;
    Some((z, n))
}

/// Uniform choice over the local relation menu, then an RTD draw.
pub fn uniform_step<R: Rng + ?Sized>(g: &HetGraph, v: VertexId, rng: &mut R) -> Option<(RelId, VertexId)> {
    let count = g.relations_at(v).count();
    if count == 0 {
        return None;
    }
    let z = g.relations_at(v).nth(rng.random_range(0..count))?;
    let n = g.sample_neighbor(v, z, rng).ok()?;
    Some((z, n))
}

/// Walk of up to `steps` steps from `start`; stops early at a vertex whose
/// menu carries no usefulness mass.
pub fn hierarchical_walk<R: Rng + ?Sized>(
    g: &HetGraph,
    beta: &Rtud,
    start: VertexId,
    steps: usize,
    rng: &mut R,
) -> Vec<VertexId> {
    walk_with(start, steps, |v| hierarchical_step(g, beta, v, rng))
}

pub fn uniform_walk<R: Rng + ?Sized>(g: &HetGraph, start: VertexId, steps: usize, rng: &mut R) -> Vec<VertexId> {
    walk_with(start, steps, |v| uniform_step(g, v, rng))
}

fn walk_with(start: VertexId, steps: usize, mut step: impl FnMut(VertexId) -> Option<(RelId, VertexId)>) -> Vec<VertexId> {
    let mut walk = Vec::with_capacity(steps + 1);
    walk.push(start);
    let mut at = start;
    for _ in 0..steps {
        match step(at) {
            Some((_, next)) => {
                walk.push(next);
                at = next;
            }
            None => break,
        }
    }
    walk
}

#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct WalkCorpus {
    pub walks: Vec<Vec<VertexId>>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CorpusStats {
    pub walks: usize,
    /// Walks shorter than `walk_length + 1` vertices.
    pub truncated: usize,
    pub mean_length: f64,
}

impl CorpusStats {
    pub fn to_tsv(&self) -> String {
        format!(
            "walks\t{}\ntruncated\t{}\nmean_length\t{}\n",
            self.walks, self.truncated, self.mean_length
        )
    }
}

/// `walks_per_vertex` walks from every vertex. Walk `(iter, v)` uses its own
/// stream derived from `(seed, v, iter)`, so output does not depend on the
/// number of worker threads. Walks are ordered iteration-major.
pub fn generate_corpus(g: &HetGraph, beta: Option<&Rtud>, cfg: &WalkConfig) -> Result<WalkCorpus> {
    cfg.validate()?;
    if cfg.mode == WalkMode::Hierarchical && beta.is_none() {
        return Err(Error::Invalid("hierarchical walks need usefulness distributions".into()));
    }
    if let Some(b) = beta {
        if b.vertex_type_count() != g.schema().vertex_type_count() || b.relation_count() != g.schema().relation_count() {
            return Err(Error::Invalid("usefulness matrix does not match the graph schema".into()));
        }
    }
    let n = g.vertex_count();
    let walks = (0..cfg.walks_per_vertex * n)
        .into_par_iter()
        .map(|idx| {
            let iter = idx / n;
            let v = VertexId((idx % n) as u32);
            let mut rng = seed::stream_for(cfg.seed, &[v.0 as u64, iter as u64]);
            match (cfg.mode, beta) {
                (WalkMode::Hierarchical, Some(b)) => hierarchical_walk(g, b, v, cfg.walk_length, &mut rng),
                _ => uniform_walk(g, v, cfg.walk_length, &mut rng),
            }
        })
        .collect();
    Ok(WalkCorpus { walks })
}

impl WalkCorpus {
    pub fn len(&self) -> usize {
        self.walks.len()
    }

    pub fn is_empty(&self) -> bool {
        self.walks.is_empty()
    }

    pub fn token_count(&self) -> usize {
        self.walks.iter().map(Vec::len).sum()
    }

    pub fn stats(&self, walk_length: usize) -> CorpusStats {
        let walks = self.walks.len();
        let truncated = self.walks.iter().filter(|w| w.len() < walk_length + 1).count();
        let mean_length = if walks == 0 {
            0.0
        } else {
            self.token_count() as f64 / walks as f64
        };
        CorpusStats {
            walks,
            truncated,
            mean_length,
        }
    }

    /// One walk per line, space-separated vertex keys.
    pub fn write_text<W: Write>(&self, g: &HetGraph, mut out: W) -> Result<()> {
        for walk in &self.walks {
            let mut line = String::new();
            for (i, &v) in walk.iter().enumerate() {
                let key = g.vertex_key(v);
                if key.chars().any(char::is_whitespace) {
                    return Err(Error::Invalid(format!(
                        "vertex key `{key}` contains whitespace; use the binary corpus format"
                    )));
                }
                if i > 0 {
                    line.push(' ');
                }
                line.push_str(key);
            }
            line.push('\n');
            out.write_all(line.as_bytes()).map_err(|e| Error::io("<corpus>", e))?;
        }
        out.flush().map_err(|e| Error::io("<corpus>", e))
    }

    pub fn read_text<R: BufRead>(g: &HetGraph, input: R, origin: &str) -> Result<WalkCorpus> {
        let mut walks = Vec::new();
        for (idx, line) in input.lines().enumerate() {
            let line = line.map_err(|e| Error::io(origin, e))?;
            if line.trim().is_empty() {
                continue;
            }
            let walk = line
                .split(' ')
                .filter(|k| !k.is_empty())
                .map(|k| {
                    g.vertex(k)
                        .ok_or_else(|| Error::parse(origin, idx + 1, format!("unknown vertex `{k}`")))
                })
                .collect::<Result<Vec<_>>>()?;
            walks.push(walk);
        }
        Ok(WalkCorpus { walks })
    }

    /// Binary block format: magic `HWC1`, key dictionary, then walks as
    /// dense ids, all little-endian.
    pub fn write_binary<W: Write>(&self, g: &HetGraph, mut out: W) -> std::io::Result<()> {
        out.write_all(b"HWC1")?;
        out.write_u32::<LittleEndian>(g.vertex_count() as u32)?;
        for v in g.vertex_ids() {
            let key = g.vertex_key(v).as_bytes();
            out.write_u32::<LittleEndian>(key.len() as u32)?;
            out.write_all(key)?;
        }
        out.write_u64::<LittleEndian>(self.walks.len() as u64)?;
        for walk in &self.walks {
            out.write_u32::<LittleEndian>(walk.len() as u32)?;
            for v in walk {
                out.write_u32::<LittleEndian>(v.0)?;
            }
        }
        out.flush()
    }

    pub fn read_binary<R: Read>(g: &HetGraph, mut input: R, origin: &str) -> Result<WalkCorpus> {
        let bad = |msg: &str| Error::parse(origin, 0, msg.to_owned());
        let io = |e: std::io::Error| Error::io(origin, e);
        let mut magic = [0u8; 4];
        input.read_exact(&mut magic).map_err(io)?;
        if &magic != b"HWC1" {
            return Err(bad("not a binary walk corpus"));
        }
        let n_keys = input.read_u32::<LittleEndian>().map_err(io)? as usize;
        let mut dict = Vec::with_capacity(n_keys);
        for _ in 0..n_keys {
            let len = input.read_u32::<LittleEndian>().map_err(io)? as usize;
            let mut buf = vec![0u8; len];
            input.read_exact(&mut buf).map_err(io)?;
            let key = String::from_utf8(buf).map_err(|_| bad("key is not UTF-8"))?;
            dict.push(g.vertex(&key).ok_or(Error::UnknownVertex(key))?);
        }
        let n_walks = input.read_u64::<LittleEndian>().map_err(io)? as usize;
        let mut walks = Vec::with_capacity(n_walks);
        for _ in 0..n_walks {
            let len = input.read_u32::<LittleEndian>().map_err(io)? as usize;
            let mut walk = Vec::with_capacity(len);
            for _ in 0..len {
                let id = input.read_u32::<LittleEndian>().map_err(io)? as usize;
                walk.push(*dict.get(id).ok_or_else(|| bad("walk references an id outside the dictionary"))?);
            }
            walks.push(walk);
        }
        Ok(WalkCorpus { walks })
    }

    /// Writes text, or the binary format when the extension is `.bin`.
    pub fn save(&self, g: &HetGraph, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let file = fs::File::create(path).map_err(|e| Error::io(path, e))?;
        let out = BufWriter::new(file);
        if path.extension().is_some_and(|e| e == "bin") {
            self.write_binary(g, out).map_err(|e| Error::io(path, e))
        } else {
            self.write_text(g, out).map_err(|e| match e {
                Error::Io { source, .. } => Error::io(path, source),
                other => other,
            })
        }
    }

    pub fn load(g: &HetGraph, path: impl AsRef<Path>) -> Result<WalkCorpus> {
        let path = path.as_ref();
        let file = fs::File::open(path).map_err(|e| Error::io(path, e))?;
        let origin = path.display().to_string();
        if path.extension().is_some_and(|e| e == "bin") {
            Self::read_binary(g, BufReader::new(file), &origin)
        } else {
            Self::read_text(g, BufReader::new(file), &origin)
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::hetgraph::GraphSchema;

    fn path_graph() -> (HetGraph, Rtud) {
        let s = GraphSchema::parse("V n\nV o\nR e n n\n", "t").unwrap();
        let g = HetGraph::parse_edges(s.clone(), "a\te\tb\nb\te\tc\n").unwrap();
        let beta = Rtud::uniform(&s);
        (g, beta)
    }

    #[test]
    fn path_graph_walks_are_forced() {
        let (g, beta) = path_graph();
        let (a, b, c) = (g.vertex("a").unwrap(), g.vertex("b").unwrap(), g.vertex("c").unwrap());
        let mut rng = seed::stream(1);
        for _ in 0..200 {
            let w = hierarchical_walk(&g, &beta, a, 2, &mut rng);
            assert_eq!(w.len(), 3);
            assert_eq!(w[0], a);
            assert_eq!(w[1], b);
            assert!(w[2] == a || w[2] == c);
        }
    }

    #[test]
    fn empty_menu_truncates() {
        let s = GraphSchema::parse("V n\nV o\nR e n n\nR f n o\n", "t").unwrap();
        let g = HetGraph::parse_edges(s.clone(), "a\tf\tx\n").unwrap();
        // n-type row puts all mass on `e`, which is absent at `a`
        let beta = Rtud::from_rows(&s, &[vec![1.0, 0.0], vec![0.0, 1.0]]).unwrap();
        let a = g.vertex("a").unwrap();
        let mut rng = seed::stream(2);
        assert_eq!(hierarchical_walk(&g, &beta, a, 5, &mut rng), vec![a]);
        // x (type o) can walk back to a, then stops
        let x = g.vertex("x").unwrap();
        assert_eq!(hierarchical_walk(&g, &beta, x, 5, &mut rng), vec![x, a]);
    }

    #[test]
    fn corpus_counts_and_determinism() {
        let (g, beta) = path_graph();
        let cfg = WalkConfig {
            walks_per_vertex: 10,
            walk_length: 4,
            seed: 9,
            mode: WalkMode::Hierarchical,
        };
        let c1 = generate_corpus(&g, Some(&beta), &cfg).unwrap();
        let c2 = generate_corpus(&g, Some(&beta), &cfg).unwrap();
        assert_eq!(c1.len(), 30);
        assert_eq!(c1, c2);
        let other = generate_corpus(&g, Some(&beta), &WalkConfig { seed: 10, ..cfg }).unwrap();
        assert_ne!(c1, other);
        let stats = c1.stats(4);
        assert_eq!(stats.truncated, 0);
        assert_eq!(stats.mean_length, 5.0);
        assert!(generate_corpus(&g, None, &cfg).is_err());
        assert!(generate_corpus(&g, None, &WalkConfig { mode: WalkMode::Uniform, ..cfg }).is_ok());
    }

    #[test]
    fn isolated_vertex_yields_single_vertex_walk() {
        let s = GraphSchema::parse("V n\nV o\nR e n n\n", "t").unwrap();
        let g = HetGraph::parse_edges(s.clone(), "a\te\tb\n").unwrap();
        let g = g.retain_edges(|_| false);
        let c = generate_corpus(&g, Some(&Rtud::uniform(&s)), &WalkConfig::default()).unwrap();
        assert!(c.walks.iter().all(|w| w.len() == 1));
        assert_eq!(c.stats(80).truncated, c.len());
    }

    #[test]
    fn corpus_file_round_trips() {
        let (g, beta) = path_graph();
        let cfg = WalkConfig {
            walks_per_vertex: 2,
            walk_length: 3,
            ..WalkConfig::default()
        };
        let c = generate_corpus(&g, Some(&beta), &cfg).unwrap();
        let mut text = Vec::new();
        c.write_text(&g, &mut text).unwrap();
        let back = WalkCorpus::read_text(&g, &text[..], "t").unwrap();
        assert_eq!(back, c);
        let mut bin = Vec::new();
        c.write_binary(&g, &mut bin).unwrap();
        assert_eq!(WalkCorpus::read_binary(&g, &bin[..], "t").unwrap(), c);
        assert!(WalkCorpus::read_text(&g, &b"a zz\n"[..], "t").is_err());
    }
}
