use hetrec::hetgraph::{GraphSchema, HetGraph};
use hetrec::rtud::Rtud;
use hetrec::seed;
use hetrec::walk::{generate_corpus, hierarchical_step, uniform_step, WalkConfig, WalkMode};

mod common;

use common::{fixtures, joint_l1, relation_freq, star, TRIALS};

#[test]
fn star_first_step_follows_beta() {
    let (g, beta) = star();
    let c = g.vertex("c").unwrap();
    let mut rng = seed::stream(11);
    let f = relation_freq(&g, (0..TRIALS).map(|_| hierarchical_step(&g, &beta, c, &mut rng)));
    assert!((f[0] - 0.9).abs() < 0.01, "{f:?}");
    assert!((f[1] - 0.1).abs() < 0.01, "{f:?}");
}

#[test]
fn star_uniform_mode_ignores_beta() {
    let (g, _) = star();
    let c = g.vertex("c").unwrap();
    let mut rng = seed::stream(12);
    let f = relation_freq(&g, (0..TRIALS).map(|_| uniform_step(&g, c, &mut rng)));
    assert!((f[0] - 0.5).abs() < 0.01, "{f:?}");
    assert!((f[1] - 0.5).abs() < 0.01, "{f:?}");
}

#[test]
fn first_step_joint_matches_two_level_law() {
    for (i, (g, beta, key)) in fixtures().into_iter().enumerate() {
        let v = g.vertex(key).unwrap();
        let l1 = joint_l1(&g, &beta, v, 100 + i as u64);
        assert!(l1 < 0.02, "fixture {i}: L1 {l1}");
    }
}

#[test]
fn walks_follow_adjacency_and_length_bounds() {
    for (g, beta, _) in fixtures() {
        let cfg = WalkConfig {
            walks_per_vertex: 5,
            walk_length: 7,
            seed: 3,
            mode: WalkMode::Hierarchical,
        };
        let corpus = generate_corpus(&g, Some(&beta), &cfg).unwrap();
        assert_eq!(corpus.len(), 5 * g.vertex_count());
        for walk in &corpus.walks {
            assert!(!walk.is_empty() && walk.len() <= 8);
            if !g.relation_menu(walk[0]).unwrap().is_empty() {
                assert!(walk.len() >= 2);
            }
            for pair in walk.windows(2) {
                let linked = g
                    .relations_at(pair[0])
                    .any(|z| g.neighbors(pair[0], z).iter().any(|n| n.vertex == pair[1]));
                assert!(linked);
            }
        }
    }
}

#[test]
fn corpus_is_independent_of_worker_count() {
    let (g, beta, _) = fixtures().remove(2);
    let cfg = WalkConfig {
        walks_per_vertex: 20,
        walk_length: 30,
        seed: 77,
        mode: WalkMode::Hierarchical,
    };
    let run = |threads| {
        rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build()
            .unwrap()
            .install(|| generate_corpus(&g, Some(&beta), &cfg).unwrap())
    };
    assert_eq!(run(1), run(4));
}

#[test]
fn hundred_vertices_ten_walks_each() {
    let s = GraphSchema::parse("V a\nV b\nR x a b\n", "t").unwrap();
    let text: String = (0..50).map(|i| format!("a{i}\tx\tb{i}\n")).collect();
    let g = HetGraph::parse_edges(s.clone(), &text).unwrap();
    assert_eq!(g.vertex_count(), 100);
    let c = generate_corpus(&g, Some(&Rtud::uniform(&s)), &WalkConfig::default()).unwrap();
    assert_eq!(c.len(), 1000);
}
