//! Compares full walks + typed skip-gram against uniform-relation walks and
//! ordinary skip-gram on synthetic bilingual graphs.
//!
//! Usage: `cargo run --release --example ablation -- [seeds=N] [key=value ...]`
//! where keys are run-configuration keys (`walk.l=40`, `embed.d=64`, ...) or
//! generator fields prefixed with `synth.` (`synth.semantic_noise=0.2`).

use std::time::Instant;

use hetrec::config::RunConfig;
use hetrec::embed::EmbedMode;
use hetrec::eval::{generate_synthetic, make_split, SynthSpec};
use hetrec::pipeline::{run_arm, split_spec, train_split_beta};
use hetrec::walk::WalkMode;

fn main() -> hetrec::Result<()> {
    let mut seeds = 5u64;
    let mut cfg = RunConfig::default();
    let mut base = SynthSpec::default();
    for arg in std::env::args().skip(1) {
        let (k, v) = arg
            .split_once('=')
            .ok_or_else(|| hetrec::Error::Invalid(format!("expected key=value, got `{arg}`")))?;
        if k == "seeds" {
            seeds = v.parse().map_err(|_| hetrec::Error::Invalid(format!("bad seed count `{v}`")))?;
        } else if let Some(field) = k.strip_prefix("synth.") {
            let x: f64 = v.parse().map_err(|_| hetrec::Error::Invalid(format!("bad number `{v}`")))?;
            match field {
                "communities" => base.communities = x as usize,
                "groups_per_community" => base.groups_per_community = x as usize,
                "keywords_per_paper" => base.keywords_per_paper = x as usize,
                "semantic_per_paper" => base.semantic_per_paper = x as usize,
                "keyword_noise" => base.keyword_noise = x,
                "citation_noise" => base.citation_noise = x,
                "semantic_noise" => base.semantic_noise = x,
                "translation_noise" => base.translation_noise = x,
                "generic_keyword_share" => base.generic_keyword_share = x,
                "mono_citations_per_paper" => base.mono_citations_per_paper = x,
                "cross_citations_per_citer" => base.cross_citations_per_citer = x,
                _ => return Err(hetrec::Error::Invalid(format!("unknown generator field `{field}`"))),
            }
        } else {
            cfg.set(k, v)?;
        }
    }
    cfg.validate()?;
    println!("seed\tarm\tmap@10\tndcg@10\tsecs");
    for s in 0..seeds {
        let synth = generate_synthetic(&SynthSpec {
            seed: s,
            ..base.clone()
        })?;
        let g = synth.graph()?;
        let mut cfg = cfg.clone();
        cfg.seed = s;
        cfg.walk.seed = s;
        cfg.eval.seed = s;
        let spec = split_spec(&g, &cfg)?;
        let split = make_split(&g, &spec)?;
        println!("{s}\tqueries={} pool={}", split.queries.len(), split.pool.len());
        let t = Instant::now();
        let beta = train_split_beta(&split, &spec, &cfg)?;
        println!("{s}\trtud\titers={} converged={}\t{:.1}", beta.trace.len(), beta.converged, t.elapsed().as_secs_f64());
        let arms = [
            ("full", WalkMode::Hierarchical, EmbedMode::Heterogeneous),
            ("uniform", WalkMode::Uniform, EmbedMode::Heterogeneous),
            ("ordinary", WalkMode::Hierarchical, EmbedMode::Ordinary),
        ];
        for (name, wm, em) in arms {
            let mut c = cfg.clone();
            c.walk.mode = wm;
            c.embed.mode = em;
            let t = Instant::now();
            let out = run_arm(&split, Some(&beta.rtud), &c)?;
            let m = &out.metrics;
            println!(
                "{s}\t{name}\t{:.4}\t{:.4}\t{:.1}",
                m.map_at[&10],
                m.ndcg_at[&10],
                t.elapsed().as_secs_f64()
            );
        }
    }
    Ok(())
}
