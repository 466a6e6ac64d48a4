//! Skip-gram embeddings trained on a walk corpus with type-aware negative
//! sampling.

mod negative;
mod sgns;

use std::fs;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;
use std::str::FromStr;
use std::sync::atomic::{AtomicUsize, Ordering};

use rand::Rng;

use crate::error::{Error, Result};
use crate::hetgraph::{HetGraph, VertexId, VertexTypeId};
use crate::seed;
use crate::walk::WalkCorpus;

pub use negative::{NegativeSampler, SMOOTHING};
pub use sgns::{log_softmax_grad, sgns_grad, sgns_loss, sigmoid, softmax_check, softplus, SgnsGrad};

use sgns::{pair_step, AtomicF64, LocalF64, Scratch, Slot};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum EmbedMode {
    /// Negatives drawn from the positive context's vertex type.
    #[default]
    Heterogeneous,
    /// Negatives drawn from all vertices (ablation).
    Ordinary,
}

impl FromStr for EmbedMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "heterogeneous" => Ok(EmbedMode::Heterogeneous),
            "ordinary" => Ok(EmbedMode::Ordinary),
            _ => Err(Error::Invalid(format!(
                "unknown embedding mode `{s}` (heterogeneous, ordinary)"
            ))),
        }
    }
}

impl EmbedMode {
    pub fn name(self) -> &'static str {
        match self {
            EmbedMode::Heterogeneous => "heterogeneous",
            EmbedMode::Ordinary => "ordinary",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrainConfig {
    pub dim: usize,
    pub window: usize,
    pub negatives: usize,
    pub epochs: usize,
    /// Initial step size; decays linearly to `1e-4` of itself.
    pub learning_rate: f64,
    pub mode: EmbedMode,
    /// Single worker, bit-identical output for a given seed. Otherwise
    /// workers update shared tables without locking.
    pub reproducible: bool,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            dim: 128,
            window: 10,
            negatives: 5,
            epochs: 5,
            learning_rate: 0.025,
            mode: EmbedMode::Heterogeneous,
            reproducible: true,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if self.dim == 0 {
            return Err(Error::Invalid("dimension must be at least 1".into()));
        }
        if self.window == 0 {
            return Err(Error::Invalid("window must be at least 1".into()));
        }
        if self.negatives == 0 {
            return Err(Error::Invalid("negatives must be at least 1".into()));
        }
        if self.epochs == 0 {
            return Err(Error::Invalid("epochs must be at least 1".into()));
        }
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return Err(Error::Invalid("learning rate must be positive".into()));
        }
        Ok(())
    }
}

/// Input vectors (the embedding) and context vectors, row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct EmbeddingTable {
    dim: usize,
    input: Vec<f64>,
    context: Vec<f64>,
}

impl EmbeddingTable {
    /// Input rows uniform in `[-0.5/d, 0.5/d]`, context rows zero.
    pub fn init<R: Rng + ?Sized>(count: usize, dim: usize, rng: &mut R) -> EmbeddingTable {
        let half = 0.5 / dim as f64;
        let input = (0..count * dim).map(|_| rng.random_range(-half..=half)).collect();
        EmbeddingTable {
            dim,
            input,
            context: vec![0.0; count * dim],
        }
    }

    pub fn from_parts(dim: usize, input: Vec<f64>, context: Vec<f64>) -> Result<EmbeddingTable> {
        if dim == 0 || !input.len().is_multiple_of(dim) || context.len() != input.len() {
            return Err(Error::Invalid("embedding table shape mismatch".into()));
        }
        Ok(EmbeddingTable { dim, input, context })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.input.len() / self.dim
    }

    pub fn is_empty(&self) -> bool {
        self.input.is_empty()
    }

    pub fn input(&self, v: VertexId) -> &[f64] {
        &self.input[v.index() * self.dim..(v.index() + 1) * self.dim]
    }

    pub fn context(&self, v: VertexId) -> &[f64] {
        &self.context[v.index() * self.dim..(v.index() + 1) * self.dim]
    }

    pub fn input_mut(&mut self, v: VertexId) -> &mut [f64] {
        let d = self.dim;
        &mut self.input[v.index() * d..(v.index() + 1) * d]
    }

    pub fn context_mut(&mut self, v: VertexId) -> &mut [f64] {
        let d = self.dim;
        &mut self.context[v.index() * d..(v.index() + 1) * d]
    }

    pub fn is_finite(&self) -> bool {
        self.input.iter().chain(&self.context).all(|x| x.is_finite())
    }

    /// Multiplies every input vector by `c`.
    pub fn scale(&mut self, c: f64) {
        self.input.iter_mut().for_each(|x| *x *= c);
    }

    /// Text format: `<count> <d>`, then `key v1 .. vd` per vertex. Only input
    /// vectors are written.
    pub fn write_to<W: Write>(&self, g: &HetGraph, mut out: W) -> std::io::Result<()> {
        writeln!(out, "{} {}", self.len(), self.dim)?;
        let mut line = String::new();
        for v in g.vertex_ids() {
            line.clear();
            line.push_str(g.vertex_key(v));
            for x in self.input(v) {
                line.push(' ');
                line.push_str(&x.to_string());
            }
            line.push('\n');
            out.write_all(line.as_bytes())?;
        }
        out.flush()
    }

    pub fn save(&self, g: &HetGraph, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let file = fs::File::create(path).map_err(|e| Error::io(path, e))?;
        self.write_to(g, BufWriter::new(file)).map_err(|e| Error::io(path, e))
    }

    /// Reads input vectors; every vertex of `g` must be present. Context
    /// vectors of a loaded table are zero.
    pub fn read_from<R: BufRead>(g: &HetGraph, input: R, origin: &str) -> Result<EmbeddingTable> {
        let mut lines = input.lines().enumerate();
        let (count, dim) = loop {
            let Some((idx, line)) = lines.next() else {
                return Err(Error::parse(origin, 0, "missing header"));
            };
            let line = line.map_err(|e| Error::io(origin, e))?;
            if line.trim().is_empty() {
                continue;
            }
            let nums: Vec<usize> = line
                .split_whitespace()
                .map(|t| t.parse().map_err(|_| Error::parse(origin, idx + 1, "bad header")))
                .collect::<Result<_>>()?;
            match nums.as_slice() {
                [c, d] if *d > 0 => break (*c, *d),
                _ => return Err(Error::parse(origin, idx + 1, "header must be `<count> <dim>`")),
            }
        };
        let n = g.vertex_count();
        let mut data = vec![0.0; n * dim];
        let mut seen = vec![false; n];
        let mut rows = 0;
        for (idx, line) in lines {
            let line = line.map_err(|e| Error::io(origin, e))?;
            if line.trim().is_empty() {
                continue;
            }
            let mut tok = line.split(' ');
            let key = tok.next().unwrap_or_default();
            let v = g
                .vertex(key)
                .ok_or_else(|| Error::parse(origin, idx + 1, format!("unknown vertex `{key}`")))?;
            let vals: Vec<f64> = tok
                .filter(|t| !t.is_empty())
                .map(|t| {
                    t.parse::<f64>()
                        .ok()
                        .filter(|x| x.is_finite())
                        .ok_or_else(|| Error::parse(origin, idx + 1, format!("bad value `{t}`")))
                })
                .collect::<Result<_>>()?;
            if vals.len() != dim {
                return Err(Error::parse(
                    origin,
                    idx + 1,
                    format!("expected {dim} values, got {}", vals.len()),
                ));
            }
            if std::mem::replace(&mut seen[v.index()], true) {
                return Err(Error::parse(origin, idx + 1, format!("duplicate vertex `{key}`")));
            }
            data[v.index() * dim..(v.index() + 1) * dim].copy_from_slice(&vals);
            rows += 1;
        }
        if rows != count {
            return Err(Error::parse(origin, 0, format!("header says {count} rows, found {rows}")));
        }
        if let Some(missing) = seen.iter().position(|s| !s) {
            return Err(Error::Invalid(format!(
                "{origin}: no embedding for vertex `{}`",
                g.vertex_key(VertexId(missing as u32))
            )));
        }
        Ok(EmbeddingTable {
            dim,
            context: vec![0.0; data.len()],
            input: data,
        })
    }

    pub fn load(g: &HetGraph, path: impl AsRef<Path>) -> Result<EmbeddingTable> {
        let path = path.as_ref();
        let file = fs::File::open(path).map_err(|e| Error::io(path, e))?;
        Self::read_from(g, BufReader::new(file), &path.display().to_string())
    }
}

/// Ordered (center, context, context type) pairs within `ws` positions.
pub fn context_pairs(g: &HetGraph, walk: &[VertexId], ws: usize) -> Vec<(VertexId, VertexId, VertexTypeId)> {
    let mut out = Vec::new();
    for (i, &c) in walk.iter().enumerate() {
        let lo = i.saturating_sub(ws);
        let hi = (i + ws).min(walk.len().saturating_sub(1));
        for (j, &o) in walk.iter().enumerate().take(hi + 1).skip(lo) {
            if j != i {
                out.push((c, o, g.vertex_type(o)));
            }
        }
    }
    out
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainOutcome {
    pub table: EmbeddingTable,
    /// Mean per-pair loss of each epoch, measured before each update.
    pub epoch_loss: Vec<f64>,
    pub negatives_drawn: u64,
    /// Negatives whose type differs from their positive context.
    pub negative_type_mismatches: u64,
}

/// Occurrence count of every vertex in the corpus.
pub fn corpus_counts(g: &HetGraph, corpus: &WalkCorpus) -> Vec<u64> {
    let mut counts = vec![0u64; g.vertex_count()];
    for v in corpus.walks.iter().flatten() {
        counts[v.index()] += 1;
    }
    counts
}

struct Shared<'a, S> {
    g: &'a HetGraph,
    cfg: &'a TrainConfig,
    sampler: &'a NegativeSampler,
    input: &'a [S],
    context: &'a [S],
    total_pairs: f64,
    done: &'a AtomicUsize,
}

#[derive(Default)]
struct ShardStats {
    loss: f64,
    pairs: u64,
    negatives: u64,
    mismatches: u64,
}

fn pairs_in(len: usize, ws: usize) -> usize {
    (0..len)
        .map(|i| i.min(ws) + (len - 1 - i).min(ws))
        .sum()
}

fn run_shard<S: Slot, R: Rng>(sh: &Shared<'_, S>, walks: &[Vec<VertexId>], rng: &mut R) -> ShardStats {
    let d = sh.cfg.dim;
    let mut sc = Scratch::new(d);
    let mut negs = Vec::with_capacity(sh.cfg.negatives);
    let mut st = ShardStats::default();
    let lr0 = sh.cfg.learning_rate;
    let floor = lr0 * 1e-4;
    for walk in walks {
        let progress = sh.done.load(Ordering::Relaxed) as f64 / sh.total_pairs;
        let lr = (lr0 * (1.0 - progress)).max(floor);
        let mut local = 0;
        for (i, &c) in walk.iter().enumerate() {
            let lo = i.saturating_sub(sh.cfg.window);
            let hi = (i + sh.cfg.window).min(walk.len() - 1);
            for (j, &o) in walk.iter().enumerate().take(hi + 1).skip(lo) {
                if j == i {
                    continue;
                }
                negs.clear();
                let ot = sh.g.vertex_type(o);
                for _ in 0..sh.cfg.negatives {
                    if let Some(n) = sh.sampler.sample(o, rng) {
                        st.negatives += 1;
                        if sh.g.vertex_type(n) != ot {
                            st.mismatches += 1;
                        }
                        negs.push(n.index());
                    }
                }
                st.loss += pair_step(sh.input, sh.context, d, c.index(), o.index(), &negs, lr, &mut sc);
                st.pairs += 1;
                local += 1;
            }
        }
        sh.done.fetch_add(local, Ordering::Relaxed);
    }
    st
}

#[allow(clippy::too_many_arguments)]
fn train_with<S: Slot + Send>(
    g: &HetGraph,
    corpus: &WalkCorpus,
    cfg: &TrainConfig,
    seed_value: u64,
    init: &EmbeddingTable,
    wrap: impl Fn(f64) -> S,
    unwrap: impl Fn(S) -> f64,
    shards: usize,
) -> TrainOutcome {
    let input: Vec<S> = init.input.iter().map(|&x| wrap(x)).collect();
    let context: Vec<S> = init.context.iter().map(|&x| wrap(x)).collect();
    let counts = corpus_counts(g, corpus);
    let sampler = NegativeSampler::new(g, &counts, cfg.mode);
    let per_epoch: usize = corpus.walks.iter().map(|w| pairs_in(w.len(), cfg.window)).sum();
    let done = AtomicUsize::new(0);
    let shared = Shared {
        g,
        cfg,
        sampler: &sampler,
        input: &input,
        context: &context,
        total_pairs: (per_epoch * cfg.epochs).max(1) as f64,
        done: &done,
    };
    let mut epoch_loss = Vec::with_capacity(cfg.epochs);
    let (mut negatives_drawn, mut negative_type_mismatches) = (0, 0);
    let chunk = corpus.walks.len().div_ceil(shards).max(1);
    for epoch in 0..cfg.epochs {
        let stats: Vec<ShardStats> = if shards == 1 {
            let mut rng = seed::stream_for(seed_value, &[1, epoch as u64, 0]);
            vec![run_shard(&shared, &corpus.walks, &mut rng)]
        } else {
            std::thread::scope(|scope| {
                let handles: Vec<_> = corpus
                    .walks
                    .chunks(chunk)
                    .enumerate()
                    .map(|(i, part)| {
                        let shared = &shared;
                        scope.spawn(move || {
                            let mut rng = seed::stream_for(seed_value, &[1, epoch as u64, i as u64]);
                            run_shard(shared, part, &mut rng)
                        })
                    })
                    .collect();
                handles.into_iter().map(|h| h.join().expect("worker panicked")).collect()
            })
        };
        let (loss, pairs) = stats.iter().fold((0.0, 0u64), |a, s| (a.0 + s.loss, a.1 + s.pairs));
        negatives_drawn += stats.iter().map(|s| s.negatives).sum::<u64>();
        negative_type_mismatches += stats.iter().map(|s| s.mismatches).sum::<u64>();
        let mean = if pairs == 0 { 0.0 } else { loss / pairs as f64 };
        log::info!("epoch {}: mean loss {mean:.6} over {pairs} pairs", epoch + 1);
        epoch_loss.push(mean);
    }
    let table = EmbeddingTable {
        dim: cfg.dim,
        input: input.into_iter().map(&unwrap).collect(),
        context: context.into_iter().map(&unwrap).collect(),
    };
    TrainOutcome {
        table,
        epoch_loss,
        negatives_drawn,
        negative_type_mismatches,
    }
}

/// Trains embeddings for every vertex of `g` from `corpus`. Fast mode uses
/// `workers` threads (0 means the rayon pool size).
pub fn train(g: &HetGraph, corpus: &WalkCorpus, cfg: &TrainConfig, seed_value: u64, workers: usize) -> Result<TrainOutcome> {
    cfg.validate()?;
    if corpus.is_empty() {
        return Err(Error::Invalid("walk corpus is empty".into()));
    }
    if let Some(&bad) = corpus.walks.iter().flatten().find(|v| !g.contains(**v)) {
        return Err(Error::UnknownVertexId(bad.0));
    }
    let mut rng = seed::stream_for(seed_value, &[0]);
    let init = EmbeddingTable::init(g.vertex_count(), cfg.dim, &mut rng);
    let out = if cfg.reproducible {
        train_with(g, corpus, cfg, seed_value, &init, LocalF64::new, LocalF64::into_inner, 1)
    } else {
        let workers = if workers == 0 { rayon::current_num_threads() } else { workers };
        train_with(g, corpus, cfg, seed_value, &init, AtomicF64::new, AtomicF64::into_inner, workers.max(1))
    };
    if !out.table.is_finite() {
        return Err(Error::Invalid("training diverged: nonfinite embedding entries".into()));
    }
    Ok(out)
}
