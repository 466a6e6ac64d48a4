//! Stage drivers. Each file stage reads only artifacts written by earlier
//! stages and writes its outputs atomically.

use std::fs;
use std::io::BufWriter;
use std::path::{Path, PathBuf};

use rand::seq::index;

use crate::config::RunConfig;
use crate::embed::{self, EmbeddingTable, TrainOutcome};
use crate::error::{Error, Result};
use crate::eval::{evaluate, make_split, MetricsReport, Qrels, Split, SplitSpec};
use crate::hetgraph::{GraphSchema, HetGraph, VertexId};
use crate::recommend::{self, RankedList, Ranker};
use crate::rtud::{train_rtud, EmOutcome, LabeledPairs, Rtud};
use crate::seed;
use crate::walk::{generate_corpus, CorpusStats, WalkCorpus, WalkMode};

/// Runs `f` against a `.partial` sibling of `path` and renames it into place on success;
/// the partial file is removed on failure.
pub fn commit<T>(path: &Path, f: impl FnOnce(&Path) -> Result<T>) -> Result<T> {
    // keeps the final extension so format dispatch on the temporary matches
    let partial = match path.extension() {
        Some(ext) => path.with_extension(format!("partial.{}", ext.to_string_lossy())),
        None => path.with_extension("partial"),
    };
    match f(&partial) {
        Ok(v) => {
            fs::rename(&partial, path).map_err(|e| Error::io(path, e))?;
            Ok(v)
        }
        Err(e) => {
            let _ = fs::remove_file(&partial);
            Err(e)
        }
    }
}

/// Sizes the global worker pool; 0 keeps the default (one per core).
pub fn set_workers(workers: usize) -> Result<()> {
    if workers == 0 {
        return Ok(());
    }
    rayon::ThreadPoolBuilder::new()
        .num_threads(workers)
        .build_global()
        .map_err(|e| Error::Invalid(format!("cannot size worker pool: {e}")))
}

fn write_text(path: &Path, text: &str) -> Result<()> {
    commit(path, |p| fs::write(p, text).map_err(|e| Error::io(p, e)))
}

pub fn load_graph(schema: &Path, edges: &Path) -> Result<HetGraph> {
    HetGraph::load(GraphSchema::load(schema)?, edges)
}

/// Resolves the configured split against the graph schema.
pub fn split_spec(g: &HetGraph, cfg: &RunConfig) -> Result<SplitSpec> {
    let s = g.schema();
    let vt = |name: &str| {
        s.vertex_type(name)
            .ok_or_else(|| Error::Invalid(format!("unknown vertex type `{name}`")))
    };
    Ok(SplitSpec {
        fraction: cfg.eval.fraction,
        seed: cfg.eval.seed,
        query_type: vt(&cfg.eval.query_type)?,
        target_type: vt(&cfg.eval.target_type)?,
        held_out: s
            .relation(&cfg.eval.held_out)
            .ok_or_else(|| Error::Invalid(format!("unknown relation `{}`", cfg.eval.held_out)))?,
    })
}

/// Held-out-relation edges still present in `g`, as `(query, target)`
/// pairs; at most `max` of them (0 = all), chosen with `seed_value`.
pub fn training_pairs(g: &HetGraph, spec: &SplitSpec, max: usize, seed_value: u64) -> Vec<(VertexId, VertexId)> {
    let mut pairs: Vec<(VertexId, VertexId)> = g
        .edges()
        .iter()
        .filter(|e| e.rel == spec.held_out)
        .filter_map(|e| {
            let (ts, td) = (g.vertex_type(e.src), g.vertex_type(e.dst));
            if ts == spec.query_type && td == spec.target_type {
                Some((e.src, e.dst))
            } else if td == spec.query_type && ts == spec.target_type {
                Some((e.dst, e.src))
            } else {
                None
            }
        })
        .collect();
    pairs.sort_unstable();
    pairs.dedup();
    if max > 0 && pairs.len() > max {
        let mut rng = seed::stream_for(seed_value, &[2]);
        let mut keep = index::sample(&mut rng, pairs.len(), max).into_vec();
        keep.sort_unstable();
        pairs = keep.into_iter().map(|i| pairs[i]).collect();
    }
    pairs
}

/// Walks, embeddings, rankings and metrics for one configuration.
#[derive(Debug, Clone)]
pub struct ArmOutcome {
    pub corpus_stats: CorpusStats,
    pub epoch_loss: Vec<f64>,
    pub runs: Vec<RankedList>,
    pub metrics: MetricsReport,
}

pub fn rank_queries(table: &EmbeddingTable, g: &HetGraph, split: &Split, top_k: usize) -> Result<Vec<RankedList>> {
    let ranker = Ranker::new(table, g, split.pool.clone())?;
    let queries: Vec<String> = split.queries.iter().map(|&q| g.vertex_key(q).to_owned()).collect();
    ranker.rank_all(&queries, top_k)
}

/// In-memory run of the walk, embedding, ranking and scoring stages on a
/// split's training graph. `beta` is required for hierarchical walks.
pub fn run_arm(split: &Split, beta: Option<&Rtud>, cfg: &RunConfig) -> Result<ArmOutcome> {
    let g = &split.train;
    let corpus = generate_corpus(g, beta, &cfg.walk)?;
    let corpus_stats = corpus.stats(cfg.walk.walk_length);
    let trained = embed::train(g, &corpus, &cfg.embed, cfg.seed, cfg.workers)?;
    let runs = rank_queries(&trained.table, g, split, cfg.eval.list_length())?;
    let metrics = evaluate(&runs, &split.qrels, &cfg.eval.ks, cfg.eval.ap_denominator)?;
    Ok(ArmOutcome {
        corpus_stats,
        epoch_loss: trained.epoch_loss,
        runs,
        metrics,
    })
}

/// Trains usefulness distributions on the split's remaining held-out edges.
pub fn train_split_beta(split: &Split, spec: &SplitSpec, cfg: &RunConfig) -> Result<EmOutcome> {
    let pairs = training_pairs(&split.train, spec, cfg.max_pairs, cfg.seed);
    let pairs = LabeledPairs::new(&split.train, pairs)?;
    train_rtud(&split.train, &pairs, cfg.rtud)
}

// ---- file stages ----

pub fn stage_train_rtud(schema: &Path, edges: &Path, pairs: &Path, cfg: &RunConfig, out_dir: &Path) -> Result<EmOutcome> {
    let g = load_graph(schema, edges)?;
    let pairs = LabeledPairs::load(&g, pairs)?;
    let pairs = if cfg.max_pairs > 0 && pairs.len() > cfg.max_pairs {
        let mut rng = seed::stream_for(cfg.seed, &[2]);
        let mut keep = index::sample(&mut rng, pairs.len(), cfg.max_pairs).into_vec();
        keep.sort_unstable();
        LabeledPairs::new(&g, keep.into_iter().map(|i| pairs.pairs()[i]).collect())?
    } else {
        pairs
    };
    let outcome = train_rtud(&g, &pairs, cfg.rtud)?;
    fs::create_dir_all(out_dir).map_err(|e| Error::io(out_dir, e))?;
    write_text(&out_dir.join("rtud.tsv"), &outcome.rtud.to_tsv(g.schema()))?;
    write_text(&out_dir.join("trace.tsv"), &outcome.trace_tsv())?;
    Ok(outcome)
}

pub fn stage_walk(schema: &Path, edges: &Path, rtud: Option<&Path>, cfg: &RunConfig, corpus_out: &Path) -> Result<CorpusStats> {
    let g = load_graph(schema, edges)?;
    let beta = match (cfg.walk.mode, rtud) {
        (WalkMode::Hierarchical, Some(p)) => Some(Rtud::load(g.schema(), p)?),
        (WalkMode::Hierarchical, None) => {
            return Err(Error::Invalid("hierarchical walks need an --rtud file".into()))
        }
        (WalkMode::Uniform, _) => None,
    };
    let corpus = generate_corpus(&g, beta.as_ref(), &cfg.walk)?;
    let stats = corpus.stats(cfg.walk.walk_length);
    commit(corpus_out, |p| corpus.save(&g, p))?;
    let mut side = corpus_out.as_os_str().to_owned();
    side.push(".stats");
    write_text(Path::new(&side), &stats.to_tsv())?;
    Ok(stats)
}

pub fn stage_embed(schema: &Path, edges: &Path, corpus: &Path, cfg: &RunConfig, out: &Path) -> Result<TrainOutcome> {
    let g = load_graph(schema, edges)?;
    let corpus = WalkCorpus::load(&g, corpus)?;
    let trained = embed::train(&g, &corpus, &cfg.embed, cfg.seed, cfg.workers)?;
    commit(out, |p| trained.table.save(&g, p))?;
    let loss: String = trained
        .epoch_loss
        .iter()
        .enumerate()
        .map(|(i, l)| format!("{}\t{l}\n", i + 1))
        .collect();
    let mut side = out.as_os_str().to_owned();
    side.push(".loss");
    write_text(Path::new(&side), &loss)?;
    Ok(trained)
}

/// Query keys from a file, one per line.
pub fn load_keys(path: &Path) -> Result<Vec<String>> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    Ok(text
        .lines()
        .map(str::trim)
        .filter(|l| !l.is_empty())
        .map(str::to_owned)
        .collect())
}

pub struct RecommendInputs<'a> {
    pub schema: &'a Path,
    pub edges: &'a Path,
    pub embeddings: &'a Path,
    pub queries: &'a [String],
    /// Candidate-pool file; otherwise every vertex of `candidate_type`.
    pub pool: Option<&'a Path>,
    pub candidate_type: &'a str,
    pub top_k: usize,
    pub tag: &'a str,
}

pub fn stage_recommend(inp: &RecommendInputs<'_>, out: &Path) -> Result<Vec<RankedList>> {
    let g = load_graph(inp.schema, inp.edges)?;
    let table = EmbeddingTable::load(&g, inp.embeddings)?;
    let pool = match inp.pool {
        Some(p) => recommend::load_pool(&g, p)?,
        None => {
            let t = g
                .schema()
                .vertex_type(inp.candidate_type)
                .ok_or_else(|| Error::Invalid(format!("unknown vertex type `{}`", inp.candidate_type)))?;
            recommend::candidates_of_type(&g, t)?
        }
    };
    let lists = Ranker::new(&table, &g, pool)?.rank_all(inp.queries, inp.top_k)?;
    commit(out, |p| recommend::save_run(&lists, inp.tag, p))?;
    Ok(lists)
}

pub fn stage_evaluate(run: &Path, qrels: &Path, cfg: &RunConfig, out: &Path) -> Result<MetricsReport> {
    let runs = recommend::load_run(run)?;
    let qrels = Qrels::load(qrels)?;
    let report = evaluate(&runs, &qrels, &cfg.eval.ks, cfg.eval.ap_denominator)?;
    commit(out, |p| report.write(p))?;
    Ok(report)
}

/// Artifacts of a file-mediated end-to-end run.
#[derive(Debug, Clone)]
pub struct EndToEnd {
    pub metrics: MetricsReport,
    pub rtud: Option<EmOutcome>,
    pub out_dir: PathBuf,
}

/// Split, usefulness training (hierarchical mode), walks, embeddings,
/// rankings and metrics, each stage reading the previous stage's files.
pub fn run_end_to_end(cfg: &RunConfig, out_dir: &Path) -> Result<EndToEnd> {
    cfg.validate()?;
    let need = |p: &Option<PathBuf>, what: &str| {
        p.clone()
            .ok_or_else(|| Error::Invalid(format!("no {what} path configured")))
    };
    let schema = need(&cfg.paths.schema, "schema")?;
    let edges = need(&cfg.paths.edges, "edges")?;
    fs::create_dir_all(out_dir).map_err(|e| Error::io(out_dir, e))?;
    write_text(&out_dir.join("config.resolved"), &cfg.to_text())?;

    let g = load_graph(&schema, &edges)?;
    let spec = split_spec(&g, cfg)?;
    let split = make_split(&g, &spec)?;
    let train_edges = out_dir.join("train_edges.tsv");
    commit(&train_edges, |p| split.train.write_edges(p))?;
    let schema_out = out_dir.join("schema.txt");
    write_text(&schema_out, &g.schema().to_text())?;
    split.qrels.write(out_dir.join("qrels.tsv"))?;
    let pool_path = out_dir.join("pool.txt");
    commit(&pool_path, |p| {
        let f = fs::File::create(p).map_err(|e| Error::io(p, e))?;
        recommend::write_pool(&g, &split.pool, BufWriter::new(f)).map_err(|e| Error::io(p, e))
    })?;
    let queries: Vec<String> = split.queries.iter().map(|&q| g.vertex_key(q).to_owned()).collect();
    write_text(&out_dir.join("queries.txt"), &(queries.join("\n") + "\n"))?;
    drop(split);

    let train = load_graph(&schema_out, &train_edges)?;
    let rtud = if cfg.walk.mode == WalkMode::Hierarchical {
        let pairs = training_pairs(&train, &spec, cfg.max_pairs, cfg.seed);
        let pairs_path = out_dir.join("pairs.tsv");
        write_text(&pairs_path, &LabeledPairs::new(&train, pairs)?.to_tsv(&train))?;
        let unlimited = RunConfig {
            max_pairs: 0,
            ..cfg.clone()
        };
        Some(stage_train_rtud(&schema_out, &train_edges, &pairs_path, &unlimited, out_dir)?)
    } else {
        None
    };
    let corpus = out_dir.join("corpus.txt");
    let rtud_path = out_dir.join("rtud.tsv");
    stage_walk(&schema_out, &train_edges, rtud.as_ref().map(|_| rtud_path.as_path()), cfg, &corpus)?;
    let emb = out_dir.join("embeddings.txt");
    stage_embed(&schema_out, &train_edges, &corpus, cfg, &emb)?;
    let queries = load_keys(&out_dir.join("queries.txt"))?;
    let run = out_dir.join("run.tsv");
    stage_recommend(
        &RecommendInputs {
            schema: &schema_out,
            edges: &train_edges,
            embeddings: &emb,
            queries: &queries,
            pool: Some(&pool_path),
            candidate_type: &cfg.eval.target_type,
            top_k: cfg.eval.list_length(),
            tag: run_tag(cfg),
        },
        &run,
    )?;
    let metrics = stage_evaluate(&run, &out_dir.join("qrels.tsv"), cfg, &out_dir.join("metrics.tsv"))?;
    write_text(&out_dir.join("metrics.txt"), &metrics.to_table())?;
    Ok(EndToEnd {
        metrics,
        rtud,
        out_dir: out_dir.to_owned(),
    })
}

/// Run tag naming the walk and embedding modes.
pub fn run_tag(cfg: &RunConfig) -> &'static str {
    match (cfg.walk.mode, cfg.embed.mode) {
        (WalkMode::Hierarchical, crate::embed::EmbedMode::Heterogeneous) => "hierarchical-heterogeneous",
        (WalkMode::Hierarchical, crate::embed::EmbedMode::Ordinary) => "hierarchical-ordinary",
        (WalkMode::Uniform, crate::embed::EmbedMode::Heterogeneous) => "uniform-heterogeneous",
        (WalkMode::Uniform, crate::embed::EmbedMode::Ordinary) => "uniform-ordinary",
    }
}
