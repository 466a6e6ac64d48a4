use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use hetrec::config::RunConfig;
use hetrec::eval::{generate_synthetic, SynthSpec};
use hetrec::pipeline::{self, RecommendInputs};
use hetrec::Error;

const EXIT_INTERNAL: u8 = 1;
const EXIT_INPUT: u8 = 2;
const EXIT_NOT_CONVERGED: u8 = 3;

#[derive(Parser, Debug)]
#[command(name = "hetrec", version, about = "Hierarchical random-walk embeddings for cross-corpus citation recommendation")]
struct Cli {
    /// Run configuration file (`key = value` lines).
    #[arg(long, global = true)]
    config: Option<PathBuf>,

    /// Override a configuration key; repeatable.
    #[arg(long = "set", value_name = "KEY=VALUE", global = true)]
    set: Vec<String>,

    /// Seed for every stage (overrides seed, walk.seed and eval.seed).
    #[arg(long, global = true)]
    seed: Option<u64>,

    /// Worker threads; 0 uses one per core.
    #[arg(long, global = true)]
    workers: Option<usize>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Write a synthetic bilingual citation graph.
    Generate(GenerateArgs),
    /// Learn relation type usefulness distributions from labeled pairs.
    TrainRtud(TrainRtudArgs),
    /// Generate a random-walk corpus.
    Walk(WalkArgs),
    /// Train embeddings on a walk corpus.
    Embed(EmbedArgs),
    /// Rank candidates for query vertices.
    Recommend(RecommendArgs),
    /// Score a run file, or run every stage with `--end-to-end`.
    Evaluate(EvaluateArgs),
}

#[derive(Args, Debug)]
struct GraphArgs {
    #[arg(long)]
    schema: Option<PathBuf>,
    #[arg(long)]
    edges: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct GenerateArgs {
    /// Output directory for schema.txt, edges.tsv and pairs.tsv.
    #[arg(long)]
    out: PathBuf,
    #[arg(long)]
    communities: Option<usize>,
    /// Topic groups per community; citations stay within a group.
    #[arg(long)]
    groups_per_community: Option<usize>,
    #[arg(long)]
    papers_per_side: Option<usize>,
    #[arg(long)]
    keywords_per_side: Option<usize>,
    /// Monolingual to cross-language citation ratio.
    #[arg(long)]
    ratio: Option<f64>,
    #[arg(long)]
    mono_citations_per_paper: Option<f64>,
    #[arg(long)]
    cross_citations_per_citer: Option<f64>,
    #[arg(long)]
    semantic_noise: Option<f64>,
    #[arg(long)]
    citation_noise: Option<f64>,
    #[arg(long)]
    keyword_noise: Option<f64>,
    #[arg(long)]
    translation_noise: Option<f64>,
}

#[derive(Args, Debug)]
struct TrainRtudArgs {
    #[command(flatten)]
    graph: GraphArgs,
    #[arg(long)]
    pairs: Option<PathBuf>,
    /// Output directory for rtud.tsv and trace.tsv.
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long)]
    exclude_direct_edge: bool,
}

#[derive(Args, Debug)]
struct WalkArgs {
    #[command(flatten)]
    graph: GraphArgs,
    /// Usefulness distributions; required for hierarchical walks.
    #[arg(long)]
    rtud: Option<PathBuf>,
    /// hierarchical or uniform.
    #[arg(long)]
    mode: Option<String>,
    /// Corpus file; a `.bin` extension selects the binary format.
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args, Debug)]
struct EmbedArgs {
    #[command(flatten)]
    graph: GraphArgs,
    #[arg(long)]
    corpus: PathBuf,
    /// heterogeneous or ordinary.
    #[arg(long)]
    embed_mode: Option<String>,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args, Debug)]
struct RecommendArgs {
    #[command(flatten)]
    graph: GraphArgs,
    #[arg(long)]
    embeddings: PathBuf,
    /// Query key; repeatable.
    #[arg(long = "query")]
    query: Vec<String>,
    /// File of query keys, one per line.
    #[arg(long)]
    queries: Option<PathBuf>,
    /// Candidate pool file; defaults to every vertex of the candidate type.
    #[arg(long)]
    pool: Option<PathBuf>,
    #[arg(long)]
    candidate_type: Option<String>,
    #[arg(long)]
    top_k: Option<usize>,
    #[arg(long, default_value = "hetrec")]
    tag: String,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args, Debug)]
struct EvaluateArgs {
    /// Split, train, walk, embed, rank and score in one pass.
    #[arg(long)]
    end_to_end: bool,
    #[command(flatten)]
    graph: GraphArgs,
    #[arg(long)]
    run: Option<PathBuf>,
    #[arg(long)]
    qrels: Option<PathBuf>,
    /// hierarchical or uniform (end-to-end only).
    #[arg(long)]
    mode: Option<String>,
    /// heterogeneous or ordinary (end-to-end only).
    #[arg(long)]
    embed_mode: Option<String>,
    #[arg(long)]
    exclude_direct_edge: bool,
    /// Metrics file, or the output directory with `--end-to-end`.
    #[arg(long)]
    out: Option<PathBuf>,
}

enum Failure {
    Error(Error),
    NotConverged,
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        Failure::Error(e)
    }
}

type Outcome = std::result::Result<(), Failure>;

fn resolve(cli: &Cli) -> hetrec::Result<RunConfig> {
    let mut cfg = match &cli.config {
        Some(p) => RunConfig::load(p)?,
        None => RunConfig::default(),
    };
    for kv in &cli.set {
        let (k, v) = kv
            .split_once('=')
            .ok_or_else(|| Error::Invalid(format!("--set expects KEY=VALUE, got `{kv}`")))?;
        cfg.set(k, v)?;
    }
    if let Some(s) = cli.seed {
        cfg.seed = s;
        cfg.walk.seed = s;
        cfg.eval.seed = s;
    }
    if let Some(w) = cli.workers {
        cfg.workers = w;
    }
    Ok(cfg)
}

fn required(flag: Option<&PathBuf>, configured: &Option<PathBuf>, name: &str) -> hetrec::Result<PathBuf> {
    flag.or(configured.as_ref())
        .cloned()
        .ok_or_else(|| Error::Invalid(format!("no {name} given (use --{name} or `{name} =` in the config)")))
}

fn graph_paths(a: &GraphArgs, cfg: &RunConfig) -> hetrec::Result<(PathBuf, PathBuf)> {
    Ok((
        required(a.schema.as_ref(), &cfg.paths.schema, "schema")?,
        required(a.edges.as_ref(), &cfg.paths.edges, "edges")?,
    ))
}

fn generate(a: &GenerateArgs, cfg: &RunConfig) -> Outcome {
    let mut spec = SynthSpec {
        seed: cfg.seed,
        ..SynthSpec::default()
    };
    macro_rules! take {
        ($($f:ident),*) => { $(if let Some(v) = a.$f { spec.$f = v; })* };
    }
    take!(
        communities,
        groups_per_community,
        papers_per_side,
        keywords_per_side,
        ratio,
        mono_citations_per_paper,
        cross_citations_per_citer,
        semantic_noise,
        citation_noise,
        keyword_noise,
        translation_noise
    );
    let g = generate_synthetic(&spec)?;
    g.write(&a.out)?;
    log::info!(
        "wrote {} edges and {} labeled pairs to {}",
        g.edges.len(),
        g.pairs.len(),
        a.out.display()
    );
    Ok(())
}

fn train_rtud(a: &TrainRtudArgs, mut cfg: RunConfig) -> Outcome {
    if a.exclude_direct_edge {
        cfg.rtud.exclude_direct_edge = true;
    }
    cfg.validate()?;
    let (schema, edges) = graph_paths(&a.graph, &cfg)?;
    let pairs = required(a.pairs.as_ref(), &cfg.paths.pairs, "pairs")?;
    let out = required(a.out.as_ref(), &cfg.paths.out_dir, "out")?;
    let outcome = pipeline::stage_train_rtud(&schema, &edges, &pairs, &cfg, &out)?;
    log::info!("{} EM iterations, wrote {}", outcome.trace.len(), out.join("rtud.tsv").display());
    if outcome.converged {
        Ok(())
    } else {
        Err(Failure::NotConverged)
    }
}

fn walk(a: &WalkArgs, mut cfg: RunConfig) -> Outcome {
    if let Some(m) = &a.mode {
        cfg.set("walk.mode", m)?;
    }
    cfg.validate()?;
    let (schema, edges) = graph_paths(&a.graph, &cfg)?;
    let stats = pipeline::stage_walk(&schema, &edges, a.rtud.as_deref(), &cfg, &a.out)?;
    log::info!(
        "{} walks ({} truncated), mean length {:.2}",
        stats.walks,
        stats.truncated,
        stats.mean_length
    );
    Ok(())
}

fn embed(a: &EmbedArgs, mut cfg: RunConfig) -> Outcome {
    if let Some(m) = &a.embed_mode {
        cfg.set("embed.mode", m)?;
    }
    cfg.validate()?;
    let (schema, edges) = graph_paths(&a.graph, &cfg)?;
    let trained = pipeline::stage_embed(&schema, &edges, &a.corpus, &cfg, &a.out)?;
    if let Some(l) = trained.epoch_loss.last() {
        log::info!("final epoch loss {l:.6}");
    }
    Ok(())
}

fn recommend(a: &RecommendArgs, cfg: RunConfig) -> Outcome {
    let (schema, edges) = graph_paths(&a.graph, &cfg)?;
    let mut queries = a.query.clone();
    if let Some(p) = &a.queries {
        queries.extend(pipeline::load_keys(p)?);
    }
    if queries.is_empty() {
        return Err(Error::Invalid("no queries given (use --query or --queries)".into()).into());
    }
    let candidate_type = a.candidate_type.clone().unwrap_or_else(|| cfg.eval.target_type.clone());
    pipeline::stage_recommend(
        &RecommendInputs {
            schema: &schema,
            edges: &edges,
            embeddings: &a.embeddings,
            queries: &queries,
            pool: a.pool.as_deref(),
            candidate_type: &candidate_type,
            top_k: a.top_k.unwrap_or_else(|| cfg.eval.list_length()),
            tag: &a.tag,
        },
        &a.out,
    )?;
    Ok(())
}

fn evaluate(a: &EvaluateArgs, mut cfg: RunConfig) -> Outcome {
    if a.end_to_end {
        if let Some(s) = &a.graph.schema {
            cfg.paths.schema = Some(s.clone());
        }
        if let Some(e) = &a.graph.edges {
            cfg.paths.edges = Some(e.clone());
        }
        if let Some(m) = &a.mode {
            cfg.set("walk.mode", m)?;
        }
        if let Some(m) = &a.embed_mode {
            cfg.set("embed.mode", m)?;
        }
        if a.exclude_direct_edge {
            cfg.rtud.exclude_direct_edge = true;
        }
        let out = required(a.out.as_ref(), &cfg.paths.out_dir, "out")?;
        cfg.paths.out_dir = Some(out.clone());
        let done = pipeline::run_end_to_end(&cfg, &out)?;
        print!("{}", done.metrics.to_table());
        return match done.rtud {
            Some(r) if !r.converged => Err(Failure::NotConverged),
            _ => Ok(()),
        };
    }
    let run = a
        .run
        .as_ref()
        .ok_or_else(|| Error::Invalid("--run is required without --end-to-end".into()))?;
    let qrels = a
        .qrels
        .as_ref()
        .ok_or_else(|| Error::Invalid("--qrels is required without --end-to-end".into()))?;
    let out = a.out.clone().unwrap_or_else(|| Path::new("metrics.tsv").to_owned());
    let report = pipeline::stage_evaluate(run, qrels, &cfg, &out)?;
    print!("{}", report.to_table());
    Ok(())
}

fn dispatch(cli: &Cli) -> Outcome {
    let cfg = resolve(cli)?;
    pipeline::set_workers(cfg.workers)?;
    match &cli.command {
        Command::Generate(a) => generate(a, &cfg),
        Command::TrainRtud(a) => train_rtud(a, cfg),
        Command::Walk(a) => walk(a, cfg),
        Command::Embed(a) => embed(a, cfg),
        Command::Recommend(a) => recommend(a, cfg),
        Command::Evaluate(a) => evaluate(a, cfg),
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let cli = Cli::parse();
    match dispatch(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::NotConverged) => {
            log::warn!("EM stopped at the iteration cap without converging");
            ExitCode::from(EXIT_NOT_CONVERGED)
        }
        Err(Failure::Error(e)) => {
            eprintln!("error: {e}");
            ExitCode::from(if e.is_input_error() { EXIT_INPUT } else { EXIT_INTERNAL })
        }
    }
}
