//! Synthetic bilingual citation graph with planted topical communities.
//!
//! Papers and keywords on a source and a target side. Each community splits
//! into topic groups: keywords are shared across a community, while
//! citations and semantic edges stay within a group unless noise redirects
//! them. Monolingual citations are dense, cross-language citations sparse, keyword
//! citations are derived from paper citations, and semantic edges between
//! sides are noisy.

use std::collections::{BTreeMap, HashSet};
use std::fs;
use std::path::Path;

use rand::Rng;

use crate::error::{Error, Result};
use crate::hetgraph::{EdgeRecord, GraphBuilder, GraphSchema, HetGraph};
use crate::seed::{self, Stream};

/// Schema of the bilingual scholarly graph: four vertex types, ten
/// relations.
pub const BILINGUAL_SCHEMA: &str = "\
# bilingual scholarly graph
V P_s
V P_t
V K_s
V K_t
R semantic P_s P_t
R cite_s P_s P_s
R cite_t P_t P_t
R cite_x P_s P_t
R kw_s P_s K_s
R kw_t P_t K_t
R kwcite_s K_s K_s
R kwcite_t K_t K_t
R kwcite_x K_s K_t
R translate K_s K_t
";

pub fn bilingual_schema() -> GraphSchema {
    GraphSchema::parse(BILINGUAL_SCHEMA, "<bilingual>").expect("built-in schema is valid")
}

#[derive(Debug, Clone, PartialEq)]
pub struct SynthSpec {
    pub communities: usize,
    /// Topic groups per community.
    pub groups_per_community: usize,
    pub papers_per_side: usize,
    pub keywords_per_side: usize,
    /// Share of keywords not tied to any community.
    pub generic_keyword_share: f64,
    pub keywords_per_paper: usize,
    /// Probability that a paper keyword is drawn from the generic pool.
    pub keyword_noise: f64,
    /// Mean outgoing monolingual citations per paper.
    pub mono_citations_per_paper: f64,
    /// Monolingual-to-cross-language citation count ratio.
    pub ratio: f64,
    /// Mean cross-language citations per citing source paper.
    pub cross_citations_per_citer: f64,
    /// Probability that a citation leaves its community.
    pub citation_noise: f64,
    pub semantic_per_paper: usize,
    /// Probability that a semantic edge points to a random target paper.
    pub semantic_noise: f64,
    /// Probability that a keyword translation points to a random keyword.
    pub translation_noise: f64,
    pub seed: u64,
}

impl Default for SynthSpec {
    fn default() -> Self {
        SynthSpec {
            communities: 10,
            groups_per_community: 1,
            papers_per_side: 1700,
            keywords_per_side: 300,
            generic_keyword_share: 0.2,
            keywords_per_paper: 4,
            keyword_noise: 0.3,
            mono_citations_per_paper: 6.0,
            ratio: 28.0,
            cross_citations_per_citer: 3.0,
            citation_noise: 0.1,
            semantic_per_paper: 3,
            semantic_noise: 0.5,
            translation_noise: 0.3,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone)]
pub struct SynthGraph {
    pub schema: GraphSchema,
    pub edges: Vec<EdgeRecord>,
    /// Cross-language citation pairs `(source paper, target paper)`.
    pub pairs: Vec<(String, String)>,
    /// Community of every paper and community keyword.
    pub community: BTreeMap<String, usize>,
}

struct Side {
    paper_comm: Vec<usize>,
    paper_group: Vec<usize>,
    papers_by_group: Vec<Vec<usize>>,
    /// Community keyword ids per community; generic ids follow them.
    kw_by_comm: Vec<Vec<usize>>,
    generic: Vec<usize>,
    paper_kws: Vec<Vec<usize>>,
}

fn prob(name: &str, p: f64) -> Result<()> {
    if (0.0..=1.0).contains(&p) {
        Ok(())
    } else {
        Err(Error::Invalid(format!("{name} must lie in [0, 1], got {p}")))
    }
}

impl SynthSpec {
    pub fn validate(&self) -> Result<()> {
        if self.communities < 2 {
            return Err(Error::Invalid("at least 2 communities are required".into()));
        }
        prob("generic keyword share", self.generic_keyword_share)?;
        prob("keyword noise", self.keyword_noise)?;
        prob("citation noise", self.citation_noise)?;
        prob("semantic noise", self.semantic_noise)?;
        prob("translation noise", self.translation_noise)?;
        if self.groups_per_community == 0 {
            return Err(Error::Invalid("at least one topic group per community is required".into()));
        }
        if self.papers_per_side < 2 * self.groups() {
            return Err(Error::Invalid("need at least two papers per topic group".into()));
        }
        let generic = self.generic_keywords();
        let per_comm = (self.keywords_per_side - generic) / self.communities;
        if per_comm < self.keywords_per_paper || (self.keyword_noise > 0.0 && generic < self.keywords_per_paper) {
            return Err(Error::Invalid("too few keywords for the requested keywords per paper".into()));
        }
        if !(self.ratio > 0.0 && self.mono_citations_per_paper > 0.0 && self.cross_citations_per_citer >= 1.0) {
            return Err(Error::Invalid("citation rates must be positive".into()));
        }
        let mono = self.mono_total();
        let smallest = self.papers_per_side / self.groups();
        if mono / 2 > self.papers_per_side * (smallest - 1) / 2 {
            return Err(Error::Invalid("monolingual citation density is infeasible".into()));
        }
        if self.cross_total() == 0 {
            return Err(Error::Invalid("ratio leaves no cross-language citations".into()));
        }
        if self.semantic_per_paper >= smallest {
            return Err(Error::Invalid("too many semantic edges per paper".into()));
        }
        Ok(())
    }

    fn groups(&self) -> usize {
        self.communities * self.groups_per_community
    }

    fn generic_keywords(&self) -> usize {
        (self.generic_keyword_share * self.keywords_per_side as f64).round() as usize
    }

    fn mono_total(&self) -> usize {
        (self.mono_citations_per_paper * 2.0 * self.papers_per_side as f64).round() as usize
    }

    fn cross_total(&self) -> usize {
        (self.mono_total() as f64 / self.ratio).round() as usize
    }
}

fn build_side(spec: &SynthSpec, rng: &mut Stream) -> Side {
    let c = spec.communities;
    let paper_group: Vec<usize> = (0..spec.papers_per_side).map(|i| i % spec.groups()).collect();
    let paper_comm: Vec<usize> = paper_group.iter().map(|g| g % c).collect();
    let mut papers_by_group = vec![Vec::new(); spec.groups()];
    for (p, &g) in paper_group.iter().enumerate() {
        papers_by_group[g].push(p);
    }
    let generic_n = spec.generic_keywords();
    let per_comm = (spec.keywords_per_side - generic_n) / c;
    let kw_by_comm: Vec<Vec<usize>> = (0..c).map(|k| (k * per_comm..(k + 1) * per_comm).collect()).collect();
    let generic: Vec<usize> = (c * per_comm..c * per_comm + generic_n).collect();
    let paper_kws = paper_comm
        .iter()
        .map(|&k| {
            let mut kws = Vec::with_capacity(spec.keywords_per_paper);
            while kws.len() < spec.keywords_per_paper {
                let pool = if rng.random::<f64>() < spec.keyword_noise { &generic } else { &kw_by_comm[k] };
                let kw = pool[rng.random_range(0..pool.len())];
                if !kws.contains(&kw) {
                    kws.push(kw);
                }
            }
            kws
        })
        .collect();
    Side {
        paper_comm,
        paper_group,
        papers_by_group,
        kw_by_comm,
        generic,
        paper_kws,
    }
}

fn keyword_count(side: &Side) -> usize {
    side.kw_by_comm.iter().map(Vec::len).sum::<usize>() + side.generic.len()
}

/// A citation target: same topic group unless the noise draw says otherwise.
fn pick_target(papers_by_group: &[Vec<usize>], group: usize, noise: f64, rng: &mut Stream) -> usize {
    let k = if rng.random::<f64>() < noise {
        rng.random_range(0..papers_by_group.len())
    } else {
        group
    };
    let pool = &papers_by_group[k];
    pool[rng.random_range(0..pool.len())]
}

/// Distinct directed citations within one side.
fn mono_citations(side: &Side, count: usize, noise: f64, rng: &mut Stream) -> Result<Vec<(usize, usize)>> {
    let n = side.paper_comm.len();
    let mut seen = HashSet::new();
    let mut out = Vec::with_capacity(count);
    let mut attempts = 0;
    while out.len() < count {
        attempts += 1;
        if attempts > count * 50 {
            return Err(Error::Invalid("could not place the requested monolingual citations".into()));
        }
        let a = rng.random_range(0..n);
        let b = pick_target(&side.papers_by_group, side.paper_group[a], noise, rng);
        if a != b && seen.insert((a, b)) {
            out.push((a, b));
        }
    }
    out.sort_unstable();
    Ok(out)
}

pub fn generate_synthetic(spec: &SynthSpec) -> Result<SynthGraph> {
    spec.validate()?;
    let mut rng = seed::stream_for(spec.seed, &[7]);
    let src = build_side(spec, &mut rng);
    let tgt = build_side(spec, &mut rng);
    let ps = |i: usize| format!("ps{i:05}");
    let pt = |i: usize| format!("pt{i:05}");
    let ks = |i: usize| format!("ks{i:04}");
    let kt = |i: usize| format!("kt{i:04}");
    let mut edges = Vec::new();
    let mut push = |s: String, r: &str, d: String, w: f64| {
        edges.push(EdgeRecord {
            src_key: s,
            rel_name: r.to_owned(),
            dst_key: d,
            weight: w,
        })
    };

    let mono = spec.mono_total();
    let cite_s = mono_citations(&src, mono / 2, spec.citation_noise, &mut rng)?;
    let cite_t = mono_citations(&tgt, mono - mono / 2, spec.citation_noise, &mut rng)?;

    // cross-language citations from a subset of citing source papers
    let cross = spec.cross_total();
    let citers_n = ((cross as f64 / spec.cross_citations_per_citer).ceil() as usize).clamp(1, spec.papers_per_side);
    let citers: Vec<usize> = rand::seq::index::sample(&mut rng, spec.papers_per_side, citers_n).into_vec();
    let mut seen = HashSet::new();
    let mut cite_x = Vec::with_capacity(cross);
    let mut attempts = 0;
    while cite_x.len() < cross {
        attempts += 1;
        if attempts > cross * 50 {
            return Err(Error::Invalid("could not place the requested cross-language citations".into()));
        }
        // every citer gets one citation before any gets a second
        let a = if cite_x.len() < citers_n {
            citers[cite_x.len()]
        } else {
            citers[rng.random_range(0..citers_n)]
        };
        let b = pick_target(&tgt.papers_by_group, src.paper_group[a], spec.citation_noise, &mut rng);
        if seen.insert((a, b)) {
            cite_x.push((a, b));
        }
    }
    cite_x.sort_unstable();

    // noisy semantic similarity edges
    for a in 0..spec.papers_per_side {
        let mut targets = Vec::new();
        while targets.len() < spec.semantic_per_paper {
            let b = pick_target(&tgt.papers_by_group, src.paper_group[a], spec.semantic_noise, &mut rng);
            if !targets.contains(&b) {
                targets.push(b);
            }
        }
        targets.sort_unstable();
        for b in targets {
            let w = rng.random_range(0.2..1.0);
            push(ps(a), "semantic", pt(b), w);
        }
    }
    for &(a, b) in &cite_s {
        push(ps(a), "cite_s", ps(b), 1.0);
    }
    for &(a, b) in &cite_t {
        push(pt(a), "cite_t", pt(b), 1.0);
    }
    for &(a, b) in &cite_x {
        push(ps(a), "cite_x", pt(b), 1.0);
    }
    for (p, kws) in src.paper_kws.iter().enumerate() {
        for &k in kws {
            push(ps(p), "kw_s", ks(k), 1.0);
        }
    }
    for (p, kws) in tgt.paper_kws.iter().enumerate() {
        for &k in kws {
            push(pt(p), "kw_t", kt(k), 1.0);
        }
    }

    // keyword citations: one unit per keyword pair of every paper citation
    let derive = |cites: &[(usize, usize)], from: &Side, to: &Side| {
        let mut acc: BTreeMap<(usize, usize), f64> = BTreeMap::new();
        for &(a, b) in cites {
            for &ka in &from.paper_kws[a] {
                for &kb in &to.paper_kws[b] {
                    *acc.entry((ka, kb)).or_insert(0.0) += 1.0;
                }
            }
        }
        acc
    };
    for ((a, b), w) in derive(&cite_s, &src, &src) {
        if a != b {
            push(ks(a), "kwcite_s", ks(b), w);
        }
    }
    for ((a, b), w) in derive(&cite_t, &tgt, &tgt) {
        if a != b {
            push(kt(a), "kwcite_t", kt(b), w);
        }
    }
    for ((a, b), w) in derive(&cite_x, &src, &tgt) {
        push(ks(a), "kwcite_x", kt(b), w);
    }

    // translations pair keywords with the same index on each side
    let n_kw = keyword_count(&src);
    for k in 0..n_kw {
        let b = if rng.random::<f64>() < spec.translation_noise {
            rng.random_range(0..n_kw)
        } else {
            k
        };
        push(ks(k), "translate", kt(b), 1.0);
    }

    let mut community = BTreeMap::new();
    for (i, &c) in src.paper_comm.iter().enumerate() {
        community.insert(ps(i), c);
    }
    for (i, &c) in tgt.paper_comm.iter().enumerate() {
        community.insert(pt(i), c);
    }
    for (side, key) in [(&src, &ks as &dyn Fn(usize) -> String), (&tgt, &kt)] {
        for (c, kws) in side.kw_by_comm.iter().enumerate() {
            for &k in kws {
                community.insert(key(k), c);
            }
        }
    }
    Ok(SynthGraph {
        schema: bilingual_schema(),
        edges,
        pairs: cite_x.iter().map(|&(a, b)| (ps(a), pt(b))).collect(),
        community,
    })
}

impl SynthGraph {
    pub fn graph(&self) -> Result<HetGraph> {
        let mut b = GraphBuilder::new(self.schema.clone());
        for e in &self.edges {
            b.add_record(e)?;
        }
        Ok(b.build())
    }

    pub fn edges_tsv(&self) -> String {
        let mut out = String::new();
        for e in &self.edges {
            out.push_str(&format!("{}\t{}\t{}\t{}\n", e.src_key, e.rel_name, e.dst_key, e.weight));
        }
        out
    }

    pub fn pairs_tsv(&self) -> String {
        self.pairs.iter().map(|(a, b)| format!("{a}\t{b}\n")).collect()
    }

    /// Writes `schema.txt`, `edges.tsv` and `pairs.tsv` into `dir`.
    pub fn write(&self, dir: impl AsRef<Path>) -> Result<()> {
        let dir = dir.as_ref();
        fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        let put = |name: &str, text: String| {
            let p = dir.join(name);
            fs::write(&p, text).map_err(|e| Error::io(&p, e))
        };
        put("schema.txt", self.schema.to_text())?;
        put("edges.tsv", self.edges_tsv())?;
        put("pairs.tsv", self.pairs_tsv())
    }
}
