//! Binary-relevance ranking metrics and the qrels file.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt::Write as _;
use std::fs;
use std::io::Write;
use std::path::Path;

use crate::error::{Error, Result};
use crate::recommend::RankedList;

/// Relevant candidates per query.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Qrels {
    map: BTreeMap<String, BTreeSet<String>>,
}

impl Qrels {
    pub fn new() -> Qrels {
        Qrels::default()
    }

    pub fn insert(&mut self, query: impl Into<String>, candidate: impl Into<String>) {
        self.map.entry(query.into()).or_default().insert(candidate.into());
    }

    pub fn relevant(&self, query: &str) -> Option<&BTreeSet<String>> {
        self.map.get(query)
    }

    pub fn queries(&self) -> impl Iterator<Item = &str> {
        self.map.keys().map(String::as_str)
    }

    pub fn len(&self) -> usize {
        self.map.len()
    }

    pub fn is_empty(&self) -> bool {
        self.map.is_empty()
    }

    /// Union of all relevant candidates.
    pub fn candidates(&self) -> BTreeSet<&str> {
        self.map.values().flatten().map(String::as_str).collect()
    }

    /// Rows `query 0 candidate 1`; other relevance values are rejected
    /// unless 0, which is skipped.
    pub fn parse(text: &str, origin: &str) -> Result<Qrels> {
        let mut q = Qrels::new();
        for (idx, line) in text.lines().enumerate() {
            if line.trim().is_empty() || line.starts_with('#') {
                continue;
            }
            let cols: Vec<&str> = line.split_whitespace().collect();
            let [query, _, cand, rel] = cols.as_slice() else {
                return Err(Error::parse(origin, idx + 1, "expected `query 0 candidate relevance`"));
            };
            match *rel {
                "1" => q.insert(*query, *cand),
                "0" => {}
                other => {
                    return Err(Error::parse(origin, idx + 1, format!("relevance must be 0 or 1, got `{other}`")))
                }
            }
        }
        Ok(q)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Qrels> {
        let path = path.as_ref();
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::parse(&text, &path.display().to_string())
    }

    pub fn to_tsv(&self) -> String {
        let mut out = String::new();
        for (q, cs) in &self.map {
            for c in cs {
                let _ = writeln!(out, "{q}\t0\t{c}\t1");
            }
        }
        out
    }

    pub fn write(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        fs::write(path, self.to_tsv()).map_err(|e| Error::io(path, e))
    }
}

/// Normalizer for average precision at `k`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum ApDenominator {
    /// `min(|relevant|, k)`.
    #[default]
    MinRelevantK,
    /// `|relevant|`.
    Relevant,
}

pub fn precision_at(rel: &[bool], k: usize) -> f64 {
    if k == 0 {
        return 0.0;
    }
    rel.iter().take(k).filter(|&&r| r).count() as f64 / k as f64
}

pub fn average_precision_at(rel: &[bool], n_relevant: usize, k: usize, denom: ApDenominator) -> f64 {
    let norm = match denom {
        ApDenominator::MinRelevantK => n_relevant.min(k),
        ApDenominator::Relevant => n_relevant,
    };
    if norm == 0 {
        return 0.0;
    }
    let mut hits = 0;
    let mut sum = 0.0;
    for (i, _) in rel.iter().take(k).enumerate().filter(|(_, &r)| r) {
        hits += 1;
        sum += hits as f64 / (i + 1) as f64;
    }
    sum / norm as f64
}

pub fn ndcg_at(rel: &[bool], n_relevant: usize, k: usize) -> f64 {
    let disc = |i: usize| 1.0 / ((i + 2) as f64).log2();
    let ideal: f64 = (0..n_relevant.min(k)).map(disc).sum();
    if ideal == 0.0 {
        return 0.0;
    }
    let dcg: f64 = rel.iter().take(k).enumerate().filter(|(_, &r)| r).map(|(i, _)| disc(i)).sum();
    dcg / ideal
}

pub fn reciprocal_rank(rel: &[bool]) -> f64 {
    rel.iter().position(|&r| r).map_or(0.0, |i| 1.0 / (i + 1) as f64)
}

/// Macro-averaged metrics over all qrels queries.
#[derive(Debug, Clone, PartialEq)]
pub struct MetricsReport {
    pub queries: usize,
    pub map_at: BTreeMap<usize, f64>,
    pub ndcg_at: BTreeMap<usize, f64>,
    pub p_at: BTreeMap<usize, f64>,
    pub mrr: f64,
}

/// Rank cutoffs reported by default.
pub const DEFAULT_KS: [usize; 3] = [10, 30, 50];

/// Scores `runs` against `qrels`. Queries absent from `runs` score 0; run
/// queries absent from `qrels` are an error.
pub fn evaluate(runs: &[RankedList], qrels: &Qrels, ks: &[usize], denom: ApDenominator) -> Result<MetricsReport> {
    if qrels.is_empty() {
        return Err(Error::Invalid("qrels are empty".into()));
    }
    let mut by_query: BTreeMap<&str, &RankedList> = BTreeMap::new();
    for run in runs {
        if qrels.relevant(&run.query).is_none() {
            return Err(Error::Invalid(format!("run query `{}` has no qrels", run.query)));
        }
        if by_query.insert(&run.query, run).is_some() {
            return Err(Error::Invalid(format!("run query `{}` appears twice", run.query)));
        }
    }
    let n = qrels.len() as f64;
    let mut report = MetricsReport {
        queries: qrels.len(),
        map_at: ks.iter().map(|&k| (k, 0.0)).collect(),
        ndcg_at: ks.iter().map(|&k| (k, 0.0)).collect(),
        p_at: ks.iter().map(|&k| (k, 0.0)).collect(),
        mrr: 0.0,
    };
    for (q, relevant) in &qrels.map {
        let rel: Vec<bool> = by_query
            .get(q.as_str())
            .map(|r| r.entries.iter().map(|(c, _)| relevant.contains(c)).collect())
            .unwrap_or_default();
        for &k in ks {
            *report.map_at.get_mut(&k).unwrap() += average_precision_at(&rel, relevant.len(), k, denom) / n;
            *report.ndcg_at.get_mut(&k).unwrap() += ndcg_at(&rel, relevant.len(), k) / n;
            *report.p_at.get_mut(&k).unwrap() += precision_at(&rel, k) / n;
        }
        report.mrr += reciprocal_rank(&rel) / n;
    }
    Ok(report)
}

impl MetricsReport {
    pub fn values(&self) -> Vec<(String, f64)> {
        let mut out = Vec::new();
        for (k, v) in &self.map_at {
            out.push((format!("MAP@{k}"), *v));
        }
        for (k, v) in &self.ndcg_at {
            out.push((format!("NDCG@{k}"), *v));
        }
        for (k, v) in &self.p_at {
            out.push((format!("P@{k}"), *v));
        }
        out.push(("MRR".into(), self.mrr));
        out
    }

    pub fn to_tsv(&self) -> String {
        let mut out = format!("metric\tvalue\nqueries\t{}\n", self.queries);
        for (name, v) in self.values() {
            let _ = writeln!(out, "{name}\t{v}");
        }
        out
    }

    pub fn to_table(&self) -> String {
        let mut out = format!("{:<10} {:>8}\n", "metric", "value");
        let _ = writeln!(out, "{:<10} {:>8}", "queries", self.queries);
        for (name, v) in self.values() {
            let _ = writeln!(out, "{name:<10} {v:>8.4}");
        }
        out
    }

    pub fn write(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let mut f = fs::File::create(path).map_err(|e| Error::io(path, e))?;
        f.write_all(self.to_tsv().as_bytes()).map_err(|e| Error::io(path, e))
    }
}
