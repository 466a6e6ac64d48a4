//! Expectation-maximization over K-shortest-path rankings.

use std::fs;
use std::path::Path as FsPath;

use log::{debug, warn};
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::hetgraph::{HetGraph, VertexId};

use super::paths::{k_shortest_paths, Path, SearchOptions};
use super::{BetaUpdate, Rtud, Theta, ThetaUpdate};

/// Task-relevant vertex pairs that supervise the usefulness distributions.
#[derive(Debug, Clone, PartialEq)]
pub struct LabeledPairs(Vec<(VertexId, VertexId)>);

impl LabeledPairs {
    pub fn new(graph: &HetGraph, pairs: Vec<(VertexId, VertexId)>) -> Result<Self> {
        for &(s, t) in &pairs {
            if !graph.contains(s) {
                return Err(Error::UnknownVertexId(s.0));
            }
            if !graph.contains(t) {
                return Err(Error::UnknownVertexId(t.0));
            }
            if s == t {
                return Err(Error::Invalid(format!(
                    "labeled pair joins `{}` to itself",
                    graph.vertex_key(s)
                )));
            }
        }
        Ok(LabeledPairs(pairs))
    }

    /// Parses `src_key <TAB> dst_key` rows.
    pub fn parse(graph: &HetGraph, text: &str, origin: &str) -> Result<Self> {
        let mut pairs = Vec::new();
        for (idx, raw) in text.lines().enumerate() {
            let line = raw.trim_end_matches('\r');
            if line.trim().is_empty() || line.starts_with('#') {
                continue;
            }
            let cols: Vec<&str> = line.split('\t').collect();
            if cols.len() < 2 {
                return Err(Error::parse(origin, idx + 1, "expected `src_key<TAB>dst_key`"));
            }
            let lookup = |k: &str| {
                graph
                    .vertex(k)
                    .ok_or_else(|| Error::parse(origin, idx + 1, format!("unknown vertex `{k}`")))
            };
            let (s, t) = (lookup(cols[0])?, lookup(cols[1])?);
            if s == t {
                return Err(Error::parse(origin, idx + 1, "source and target are the same vertex"));
            }
            pairs.push((s, t));
        }
        Ok(LabeledPairs(pairs))
    }

    pub fn load(graph: &HetGraph, path: impl AsRef<FsPath>) -> Result<Self> {
        let path = path.as_ref();
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::parse(graph, &text, &path.display().to_string())
    }

    pub fn to_tsv(&self, graph: &HetGraph) -> String {
        self.0
            .iter()
            .map(|&(s, t)| format!("{}\t{}\n", graph.vertex_key(s), graph.vertex_key(t)))
            .collect()
    }

    pub fn pairs(&self) -> &[(VertexId, VertexId)] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }
}

/// What counts as an unchanged ranking between iterations.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum StabilityMode {
    /// Same paths in the same order.
    #[default]
    Ordered,
    /// Same set of paths, order ignored.
    Set,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EmConfig {
    pub k: usize,
    pub theta_update: ThetaUpdate,
    pub beta_update: BetaUpdate,
    /// Percentage of pairs whose ranking must be unchanged to stop.
    pub epsilon: f64,
    pub max_iters: usize,
    pub exclude_direct_edge: bool,
    pub stability: StabilityMode,
}

impl Default for EmConfig {
    fn default() -> Self {
        EmConfig {
            k: 3,
            theta_update: ThetaUpdate::LengthNormalized,
            beta_update: BetaUpdate::Damped { lambda: 0.2 },
            epsilon: 80.0,
            max_iters: 50,
            exclude_direct_edge: false,
            stability: StabilityMode::Ordered,
        }
    }
}

impl EmConfig {
    pub fn validate(&self) -> Result<()> {
        if self.k == 0 {
            return Err(Error::Invalid("K must be at least 1".into()));
        }
        if !(self.epsilon > 0.0 && self.epsilon <= 100.0) {
            return Err(Error::Invalid(format!("epsilon {} must be in (0, 100]", self.epsilon)));
        }
        if self.max_iters == 0 {
            return Err(Error::Invalid("max_iters must be at least 1".into()));
        }
        if let BetaUpdate::Damped { lambda } = self.beta_update {
            if !(lambda > 0.0 && lambda <= 1.0) {
                return Err(Error::Invalid(format!("lambda {lambda} must be in (0, 1]")));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct IterationRecord {
    pub iter: usize,
    /// Fraction of pairs whose ranking matched the previous iteration; 0 on
    /// the first iteration.
    pub stability: f64,
    pub theta_l1: f64,
    pub converged: bool,
}

#[derive(Debug, Clone)]
pub struct EmOutcome {
    pub rtud: Rtud,
    pub trace: Vec<IterationRecord>,
    pub converged: bool,
}

impl EmOutcome {
    /// `iter  stability_fraction  theta_l1` lines.
    pub fn trace_tsv(&self) -> String {
        self.trace
            .iter()
            .map(|r| format!("{}\t{}\t{}\n", r.iter, r.stability, r.theta_l1))
            .collect()
    }
}

/// Fraction of pairs whose rankings are unchanged.
pub fn stability_fraction(prev: &[Vec<Path>], curr: &[Vec<Path>], mode: StabilityMode) -> Result<f64> {
    if prev.len() != curr.len() {
        return Err(Error::Mismatch(format!(
            "rankings cover {} and {} pairs",
            prev.len(),
            curr.len()
        )));
    }
    if prev.is_empty() {
        return Ok(1.0);
    }
    let same = prev
        .iter()
        .zip(curr)
        .filter(|(a, b)| match mode {
            StabilityMode::Ordered => {
                a.len() == b.len() && a.iter().zip(b.iter()).all(|(x, y)| x.same_route(y))
            }
            StabilityMode::Set => {
                a.len() == b.len() && a.iter().all(|x| b.iter().any(|y| x.same_route(y)))
            }
        })
        .count();
    Ok(same as f64 / prev.len() as f64)
}

/// Step-wise EM driver; [`train_rtud`] runs it to convergence.
pub struct EmTrainer<'g> {
    graph: &'g HetGraph,
    pairs: &'g LabeledPairs,
    cfg: EmConfig,
    beta: Rtud,
    prev: Option<Vec<Vec<Path>>>,
    iter: usize,
}

impl<'g> EmTrainer<'g> {
    pub fn new(graph: &'g HetGraph, pairs: &'g LabeledPairs, cfg: EmConfig) -> Result<Self> {
        cfg.validate()?;
        if pairs.is_empty() {
            return Err(Error::Invalid("no labeled pairs".into()));
        }
        Ok(EmTrainer {
            graph,
            pairs,
            cfg,
            beta: Rtud::uniform(graph.schema()),
            prev: None,
            iter: 0,
        })
    }

    pub fn beta(&self) -> &Rtud {
        &self.beta
    }

    pub fn into_beta(self) -> Rtud {
        self.beta
    }

    /// Rankings for every labeled pair under the current distributions.
    pub fn rankings(&self) -> Vec<Vec<Path>> {
        let opts = SearchOptions {
            exclude_direct_edge: self.cfg.exclude_direct_edge,
        };
        self.pairs
            .pairs()
            .par_iter()
            .map(|&(s, t)| k_shortest_paths(self.graph, &self.beta, s, t, self.cfg.k, opts))
            .collect()
    }

    /// One E-step followed by one M-step.
    pub fn step(&mut self) -> Result<IterationRecord> {
        self.iter += 1;
        let rankings = self.rankings();
        if self.iter == 1 && rankings.iter().all(Vec::is_empty) {
            return Err(Error::NoTrainingSignal);
        }
        let mut theta = Theta::zeros(self.beta.relation_count());
        for ranking in &rankings {
            theta.accumulate(ranking, self.cfg.theta_update);
        }
        let (next, skipped) = self.beta.m_step(&theta, self.cfg.beta_update);
        if !skipped.is_empty() {
            warn!("iteration {}: {} row(s) had no mass and were kept", self.iter, skipped.len());
        }
        self.beta = next;
        let stability = match &self.prev {
            Some(prev) => stability_fraction(prev, &rankings, self.cfg.stability)?,
            None => 0.0,
        };
        let converged = self.prev.is_some() && stability * 100.0 >= self.cfg.epsilon;
        self.prev = Some(rankings);
        let record = IterationRecord {
            iter: self.iter,
            stability,
            theta_l1: theta.l1(),
            converged,
        };
        debug!("em {:?}", record);
        Ok(record)
    }
}

/// Runs EM until the stability threshold or the iteration cap is reached.
pub fn train_rtud(graph: &HetGraph, pairs: &LabeledPairs, cfg: EmConfig) -> Result<EmOutcome> {
    let mut trainer = EmTrainer::new(graph, pairs, cfg)?;
    let mut trace = Vec::new();
    let mut converged = false;
    for _ in 0..cfg.max_iters {
        let rec = trainer.step()?;
        trace.push(rec);
        if rec.converged {
            converged = true;
            break;
        }
    }
    if !converged {
        warn!("usefulness training did not stabilize within {} iterations", cfg.max_iters);
    }
    Ok(EmOutcome {
        rtud: trainer.into_beta(),
        trace,
        converged,
    })
}
