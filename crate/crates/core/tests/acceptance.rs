//! Acceptance suite: one PASS/FAIL line per criterion, non-zero exit when
//! any criterion fails.

mod common;

use std::fs;
use std::time::{Duration, Instant};

use hetrec::config::RunConfig;
use hetrec::embed::{softmax_check, EmbedMode};
use hetrec::eval::{generate_synthetic, make_split, SynthSpec};
use hetrec::hetgraph::{RelId, VertexId, VertexTypeId};
use hetrec::pipeline::{run_arm, run_end_to_end, split_spec, train_split_beta};
use hetrec::rtud::{
    k_shortest_paths, train_rtud, BetaUpdate, EmConfig, EmTrainer, LabeledPairs, Rtud, SearchOptions, ThetaUpdate,
};
use hetrec::seed;
use hetrec::walk::WalkMode;
use rand::Rng;

const KSP_GRAPHS: u64 = 200;
const KSP_WEIGHT_TOL: f64 = 1e-12;
const KSP_BUDGET: Duration = Duration::from_secs(60);

const EM_ITERS: usize = 50;
const EM_INVARIANT_PAIRS: usize = 60;
const ROW_SUM_TOL: f64 = 1e-9;
const FLOOR_SLACK: f64 = 0.8;
const CONVERGENCE_SEEDS: u64 = 5;

const JOINT_L1_MAX: f64 = 0.02;

const GRAD_INSTANCES: usize = 100;
const GRAD_REL_TOL: f64 = 1e-5;
const SOFTMAX_TOL: f64 = 1e-9;

const METRIC_INSTANCES: usize = 1000;
const METRIC_TOL: f64 = 1e-12;
const HAND_TOL: f64 = 1e-4;

const ABLATION_SEEDS: u64 = 5;
const ABLATION_MIN_WINS: usize = 4;
const ABLATION_BUDGET: Duration = Duration::from_secs(600);

type Check = fn() -> Verdict;

struct Verdict {
    pass: bool,
    detail: String,
}

fn verdict(pass: bool, detail: impl Into<String>) -> Verdict {
    Verdict {
        pass,
        detail: detail.into(),
    }
}

fn ksp_oracle() -> Verdict {
    let t = Instant::now();
    let mut mismatches = Vec::new();
    let mut compared = 0usize;
    for s in 0..KSP_GRAPHS {
        let mut rng = seed::stream(90_000 + s);
        let g = common::random_graph(&mut rng, s % 4 == 0);
        let beta = common::random_rtud(&mut rng, g.schema(), s % 3 == 0);
        let n = g.vertex_count() as u32;
        for _ in 0..3 {
            let src = VertexId(rng.random_range(0..n));
            let dst = VertexId(rng.random_range(0..n));
            if src == dst {
                continue;
            }
            let all = common::brute_force_paths(&g, &beta, src, dst);
            for k in 1..=3 {
                let got = k_shortest_paths(&g, &beta, src, dst, k, SearchOptions::default());
                let want = &all[..k.min(all.len())];
                compared += 1;
                let same = got.len() == want.len()
                    && got
                        .iter()
                        .zip(want)
                        .all(|(a, b)| a.steps == b.steps && (a.weight - b.weight).abs() <= KSP_WEIGHT_TOL);
                if !same {
                    mismatches.push(format!("graph {s} K={k}"));
                }
            }
        }
    }
    let secs = t.elapsed();
    verdict(
        mismatches.is_empty() && secs < KSP_BUDGET,
        format!(
            "{compared} rankings on {KSP_GRAPHS} graphs, {} mismatches {:?}, {:.1}s",
            mismatches.len(),
            mismatches.iter().take(3).collect::<Vec<_>>(),
            secs.as_secs_f64()
        ),
    )
}

/// Violations of the row-sum, schema-mask and damping-floor invariants.
fn invariant_violations(beta: &Rtud, lambda: f64) -> Vec<String> {
    let schema = beta_schema_rows(beta);
    let mut out = Vec::new();
    for (t, permitted) in schema {
        let row = beta.row(t);
        let sum: f64 = row.iter().sum();
        if (sum - 1.0).abs() > ROW_SUM_TOL {
            out.push(format!("row {} sums to {sum}", t.index()));
        }
        let m = beta.permitted_count(t) as f64;
        let floor = FLOOR_SLACK * (1.0 - lambda) / m;
        for (j, (&x, &p)) in row.iter().zip(&permitted).enumerate() {
            if !p && x != 0.0 {
                out.push(format!("row {} entry {j} outside schema is {x}", t.index()));
            }
            if p && x < floor {
                out.push(format!("row {} entry {j} = {x} below floor {floor}", t.index()));
            }
        }
    }
    out
}

fn beta_schema_rows(beta: &Rtud) -> Vec<(VertexTypeId, Vec<bool>)> {
    (0..beta.vertex_type_count())
        .map(|i| {
            let t = VertexTypeId(i as u32);
            let permitted = (0..beta.relation_count())
                .map(|j| beta.is_permitted(t, RelId(j as u32)))
                .collect();
            (t, permitted)
        })
        .collect()
}

fn em_invariants() -> Verdict {
    let lambda = 0.2;
    let cfg = EmConfig {
        beta_update: BetaUpdate::Damped { lambda },
        theta_update: ThetaUpdate::LengthNormalized,
        ..EmConfig::default()
    };
    let synth = generate_synthetic(&SynthSpec::default()).expect("synthetic corpus");
    let g = synth.graph().expect("graph");
    let mut pairs: Vec<(VertexId, VertexId)> = synth
        .pairs
        .iter()
        .map(|(a, b)| (g.vertex(a).unwrap(), g.vertex(b).unwrap()))
        .collect();
    let mut rng = seed::stream(31);
    let keep = rand::seq::index::sample(&mut rng, pairs.len(), EM_INVARIANT_PAIRS.min(pairs.len())).into_vec();
    pairs = keep.into_iter().map(|i| pairs[i]).collect();
    let pairs = LabeledPairs::new(&g, pairs).expect("pairs");
    let mut trainer = EmTrainer::new(&g, &pairs, cfg).expect("trainer");
    let mut violations = invariant_violations(trainer.beta(), lambda);
    for _ in 0..EM_ITERS {
        trainer.step().expect("em step");
        violations.extend(invariant_violations(trainer.beta(), lambda));
    }

    let t = Instant::now();
    let mut iters = Vec::new();
    for s in 0..CONVERGENCE_SEEDS {
        let synth = generate_synthetic(&SynthSpec {
            seed: s,
            ..SynthSpec::default()
        })
        .expect("synthetic corpus");
        let g = synth.graph().expect("graph");
        let pairs = LabeledPairs::parse(&g, &synth.pairs_tsv(), "pairs").expect("pairs");
        let out = train_rtud(&g, &pairs, EmConfig::default()).expect("em");
        iters.push(if out.converged { Some(out.trace.len()) } else { None });
    }
    let converged = iters.iter().filter(|i| i.is_some()).count();
    verdict(
        violations.is_empty() && converged == CONVERGENCE_SEEDS as usize,
        format!(
            "{EM_ITERS} iterations on {EM_INVARIANT_PAIRS} pairs: {} invariant violations {:?}; converged {converged}/{CONVERGENCE_SEEDS} seeds (iterations {iters:?}, {:.1}s)",
            violations.len(),
            violations.iter().take(3).collect::<Vec<_>>(),
            t.elapsed().as_secs_f64()
        ),
    )
}

fn sampler_fidelity() -> Verdict {
    let l1: Vec<f64> = common::fixtures()
        .into_iter()
        .enumerate()
        .map(|(i, (g, beta, key))| common::joint_l1(&g, &beta, g.vertex(key).unwrap(), 700 + i as u64))
        .collect();
    verdict(
        l1.iter().all(|&x| x < JOINT_L1_MAX),
        format!("L1 over {} trials: {l1:.4?}", common::TRIALS),
    )
}

fn gradient_and_softmax() -> Verdict {
    let worst = common::sgns_fd_worst(4242, GRAD_INSTANCES);
    let g = common::fixture(10);
    let mut rng = seed::stream(17);
    let table = common::random_table(&mut rng, g.vertex_count(), 6);
    let mut worst_sum: f64 = 0.0;
    for v in g.vertex_ids() {
        for (n, _) in g.schema().vertex_types() {
            let dist = softmax_check(&table, &g, v, n).expect("softmax");
            let s: f64 = dist.iter().map(|x| x.1).sum();
            worst_sum = worst_sum.max((s - 1.0).abs());
        }
    }
    verdict(
        worst <= GRAD_REL_TOL && worst_sum <= SOFTMAX_TOL && g.vertex_count() == 30,
        format!(
            "worst relative gradient error {worst:.2e} on {GRAD_INSTANCES} instances; worst softmax |sum-1| {worst_sum:.2e} on {} vertices",
            g.vertex_count()
        ),
    )
}

fn metric_oracle() -> Verdict {
    let worst = common::metric_oracle_worst(55, METRIC_INSTANCES);
    let (p, ap, ndcg) = common::hand_fixture_metrics();
    let hand_ok = (p - 2.0 / 3.0).abs() <= HAND_TOL && (ap - 5.0 / 6.0).abs() <= HAND_TOL && (ndcg - 0.9197).abs() <= HAND_TOL;
    verdict(
        worst <= METRIC_TOL && hand_ok,
        format!("worst deviation {worst:.1e} on {METRIC_INSTANCES} instances; hand fixture P@3 {p:.4} AP@3 {ap:.4} NDCG@3 {ndcg:.4}"),
    )
}

/// Scaled-down walk and embedding settings for the trend comparison.
const ABLATION_SETTINGS: [(&str, &str); 5] = [
    ("walk.l", "20"),
    ("embed.d", "32"),
    ("embed.ws", "5"),
    ("embed.epochs", "2"),
    ("rtud.max_pairs", "100"),
];

fn ablation_setup() -> (SynthSpec, RunConfig) {
    let mut cfg = RunConfig::default();
    for (k, v) in ABLATION_SETTINGS {
        cfg.set(k, v).expect("ablation setting");
    }
    let spec = SynthSpec {
        groups_per_community: 5,
        mono_citations_per_paper: 12.0,
        cross_citations_per_citer: 1.0,
        semantic_noise: 0.2,
        ..SynthSpec::default()
    };
    (spec, cfg)
}

fn ablation_trend() -> Verdict {
    let t = Instant::now();
    let (spec, cfg) = ablation_setup();
    let arms = [
        ("full", WalkMode::Hierarchical, EmbedMode::Heterogeneous),
        ("uniform", WalkMode::Uniform, EmbedMode::Heterogeneous),
        ("ordinary", WalkMode::Hierarchical, EmbedMode::Ordinary),
    ];
    // scores[arm][seed] = (MAP@10, NDCG@10)
    let mut scores = vec![Vec::new(); arms.len()];
    for s in 0..ABLATION_SEEDS {
        let synth = generate_synthetic(&SynthSpec { seed: s, ..spec.clone() }).expect("synthetic corpus");
        let g = synth.graph().expect("graph");
        let mut cfg = cfg.clone();
        cfg.seed = s;
        cfg.walk.seed = s;
        cfg.eval.seed = s;
        let sp = split_spec(&g, &cfg).expect("split spec");
        let split = make_split(&g, &sp).expect("split");
        let beta = train_split_beta(&split, &sp, &cfg).expect("usefulness training");
        for (i, (_, wm, em)) in arms.iter().enumerate() {
            let mut c = cfg.clone();
            c.walk.mode = *wm;
            c.embed.mode = *em;
            let out = run_arm(&split, Some(&beta.rtud), &c).expect("arm");
            scores[i].push((out.metrics.map_at[&10], out.metrics.ndcg_at[&10]));
        }
    }
    let secs = t.elapsed();
    let mean = |v: &[(f64, f64)], f: fn(&(f64, f64)) -> f64| v.iter().map(f).sum::<f64>() / v.len() as f64;
    let mut pass = secs < ABLATION_BUDGET;
    let mut detail = Vec::new();
    for name in ["MAP@10", "NDCG@10"] {
        let f: fn(&(f64, f64)) -> f64 = if name == "MAP@10" { |x| x.0 } else { |x| x.1 };
        let full = mean(&scores[0], f);
        let mut part = format!("{name} full {full:.4}");
        for (i, (arm, _, _)) in arms.iter().enumerate().skip(1) {
            let other = mean(&scores[i], f);
            let wins = scores[0].iter().zip(&scores[i]).filter(|(a, b)| f(a) > f(b)).count();
            pass &= full > other && wins >= ABLATION_MIN_WINS;
            part += &format!(", {arm} {other:.4} (full ahead in {wins}/{ABLATION_SEEDS})");
        }
        detail.push(part);
    }
    verdict(pass, format!("{}; {:.0}s", detail.join("; "), secs.as_secs_f64()))
}

fn default_snapshot() -> Verdict {
    let cfg = RunConfig::default();
    let text = cfg.to_text();
    let expected = [
        "walk.r = 10",
        "walk.l = 80",
        "embed.d = 128",
        "embed.ws = 10",
        "rtud.k = 3",
        "rtud.f_theta = LNC",
        "rtud.f_beta = SDF",
        "rtud.lambda = 0.2",
        "rtud.epsilon = 80",
    ];
    let missing: Vec<&str> = expected.iter().copied().filter(|e| !text.lines().any(|l| l == *e)).collect();
    let typed = cfg.walk.walks_per_vertex == 10
        && cfg.walk.walk_length == 80
        && cfg.embed.dim == 128
        && cfg.embed.window == 10
        && cfg.rtud.k == 3
        && cfg.rtud.theta_update == ThetaUpdate::LengthNormalized
        && cfg.rtud.beta_update == BetaUpdate::Damped { lambda: 0.2 }
        && cfg.rtud.epsilon == 80.0;
    verdict(missing.is_empty() && typed, format!("missing lines {missing:?}"))
}

fn determinism() -> Verdict {
    let dir = tempfile::tempdir().expect("tempdir");
    let data = dir.path().join("data");
    let synth = generate_synthetic(&SynthSpec {
        communities: 4,
        papers_per_side: 200,
        keywords_per_side: 40,
        seed: 4,
        ..SynthSpec::default()
    })
    .expect("synthetic corpus");
    synth.write(&data).expect("write corpus");
    let mut cfg = RunConfig::default();
    for (k, v) in [
        ("walk.r", "2"),
        ("walk.l", "10"),
        ("embed.d", "8"),
        ("embed.ws", "3"),
        ("embed.epochs", "1"),
        ("eval.fraction", "0.2"),
        ("seed", "11"),
        ("walk.seed", "11"),
        ("eval.seed", "11"),
    ] {
        cfg.set(k, v).expect("setting");
    }
    cfg.paths.schema = Some(data.join("schema.txt"));
    cfg.paths.edges = Some(data.join("edges.tsv"));
    let (a, b) = (dir.path().join("a"), dir.path().join("b"));
    run_end_to_end(&cfg, &a).expect("first run");
    run_end_to_end(&cfg, &b).expect("second run");
    let differing: Vec<&str> = ["run.tsv", "metrics.tsv"]
        .into_iter()
        .filter(|f| fs::read(a.join(f)).ok() != fs::read(b.join(f)).ok() || !a.join(f).exists())
        .collect();
    verdict(differing.is_empty(), format!("differing files {differing:?}"))
}

fn main() {
    let criteria: [(&str, Check); 8] = [
        ("1 k-shortest-paths oracle", ksp_oracle),
        ("2 EM invariants and convergence", em_invariants),
        ("3 first-step sampler fidelity", sampler_fidelity),
        ("4 gradient check and typed softmax", gradient_and_softmax),
        ("5 metric oracle", metric_oracle),
        ("6 ablation trend", ablation_trend),
        ("7 default parameters", default_snapshot),
        ("8 end-to-end determinism", determinism),
    ];
    let only: Vec<String> = std::env::args().skip(1).filter(|a| !a.starts_with('-')).collect();
    let mut failed = 0;
    for (name, check) in criteria {
        if !only.is_empty() && !only.iter().any(|o| name.starts_with(o.as_str())) {
            continue;
        }
        let t = Instant::now();
        let v = check();
        println!(
            "{} criterion {name}: {} [{:.1}s]",
            if v.pass { "PASS" } else { "FAIL" },
            v.detail,
            t.elapsed().as_secs_f64()
        );
        failed += usize::from(!v.pass);
    }
    if failed > 0 {
        eprintln!("{failed} acceptance criteria failed");
        std::process::exit(1);
    }
}
